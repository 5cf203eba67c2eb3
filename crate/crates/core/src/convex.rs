//! Dense log-barrier interior-point method for small problems of the form
//!
//! maximize cᵀz subject to f_i(z) = a_iᵀz + b_i − zᵀQ_i z ≥ 0, Q_i ⪰ 0.
//!
//! Every subproblem of the alternating optimizers (epigraph forms of max-min
//! concave surrogates over balls and simplices) fits this template.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Concave quadratic constraint aᵀz + b − zᵀQz ≥ 0.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub lin: DVector<f64>,
    pub constant: f64,
    pub quad: Option<DMatrix<f64>>,
}

impl Constraint {
    pub fn linear(lin: DVector<f64>, constant: f64) -> Self {
        Constraint { lin, constant, quad: None }
    }

    pub fn value(&self, z: &DVector<f64>) -> f64 {
        let mut v = self.lin.dot(z) + self.constant;
        if let Some(q) = &self.quad {
            v -= z.dot(&(q * z));
        }
        v
    }

    pub fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        match &self.quad {
            Some(q) => &self.lin - (q * z) * 2.0,
            None => self.lin.clone(),
        }
    }

    /// Same constraint on (z, s) with s subtracted: f(z) − s ≥ 0.
    fn with_slack(&self) -> Constraint {
        let n = self.lin.len();
        let mut lin = DVector::zeros(n + 1);
        lin.rows_mut(0, n).copy_from(&self.lin);
        lin[n] = -1.0;
        let quad = self.quad.as_ref().map(|q| {
            let mut m = DMatrix::zeros(n + 1, n + 1);
            m.view_mut((0, 0), (n, n)).copy_from(q);
            m
        });
        Constraint { lin, constant: self.constant, quad }
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub objective: DVector<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    /// Duality-gap bound m/t at termination.
    pub gap: f64,
    pub mu: f64,
    pub t0: f64,
    pub max_newton: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options { gap: 1e-9, mu: 20.0, t0: 1.0, max_newton: 80 }
    }
}

impl Problem {
    pub fn min_slack(&self, z: &DVector<f64>) -> f64 {
        self.constraints.iter().map(|c| c.value(z)).fold(f64::INFINITY, f64::min)
    }

    fn barrier(&self, t: f64, z: &DVector<f64>) -> Option<f64> {
        let mut v = -t * self.objective.dot(z);
        for c in &self.constraints {
            let f = c.value(z);
            if !(f > 0.0) {
                return None;
            }
            v -= f.ln();
        }
        Some(v)
    }

    /// Newton centering for fixed t; returns false if it ran out of iterations.
    fn center(&self, t: f64, z: &mut DVector<f64>, opts: &Options) -> Result<bool> {
        let n = z.len();
        for _ in 0..opts.max_newton {
            let mut grad = &self.objective * (-t);
            let mut hess = DMatrix::<f64>::zeros(n, n);
            for c in &self.constraints {
                let f = c.value(z);
                let g = c.gradient(z);
                grad -= &g / f;
                hess.ger(1.0 / (f * f), &g, &g, 1.0);
                if let Some(q) = &c.quad {
                    hess += q * (2.0 / f);
                }
            }
            let step = solve_spd(hess, &grad).ok_or_else(|| Error::Solver {
                message: "singular barrier Hessian".into(),
                iterate: z.iter().copied().collect(),
            })?;
            let dec = -grad.dot(&step);
            if dec / 2.0 <= 1e-12 {
                return Ok(true);
            }
            let phi0 = self.barrier(t, z).expect("iterate stays interior");
            let mut s = 1.0;
            loop {
                let cand = &*z + &step * s;
                if let Some(p) = self.barrier(t, &cand) {
                    if p <= phi0 - 0.25 * s * dec {
                        *z = cand;
                        break;
                    }
                }
                s *= 0.5;
                if s < 1e-14 {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// Maximizes from a strictly feasible start.
    pub fn maximize(&self, z0: DVector<f64>, opts: &Options) -> Result<DVector<f64>> {
        if !(self.min_slack(&z0) > 0.0) {
            return Err(Error::Solver {
                message: "starting point is not strictly feasible".into(),
                iterate: z0.iter().copied().collect(),
            });
        }
        let m = self.constraints.len() as f64;
        let mut z = z0;
        let mut t = opts.t0;
        for _ in 0..200 {
            self.center(t, &mut z, opts)?;
            if m / t < opts.gap {
                break;
            }
            t *= opts.mu;
        }
        Ok(z)
    }
}

fn solve_spd(mut h: DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..12 {
        if let Some(ch) = h.clone().cholesky() {
            let s = ch.solve(&(-g));
            if s.iter().all(|v| v.is_finite()) {
                return Some(s);
            }
        }
        let next = if ridge == 0.0 { 1e-14 * scale } else { ridge * 100.0 };
        for i in 0..n {
            h[(i, i)] += next - ridge;
        }
        ridge = next;
    }
    None
}

/// Finds a point with every constraint strictly positive, starting from `z0`.
///
/// Maximizes s subject to f_i(z) ≥ s and s ≤ 1, stopping as soon as s > 0.
pub fn find_interior(constraints: &[Constraint], z0: &DVector<f64>, opts: &Options) -> Result<Option<DVector<f64>>> {
    let base = Problem { objective: DVector::zeros(z0.len()), constraints: constraints.to_vec() };
    let s0 = base.min_slack(z0);
    if s0 > 0.0 {
        return Ok(Some(z0.clone()));
    }
    let n = z0.len();
    let mut cons: Vec<Constraint> = constraints.iter().map(|c| c.with_slack()).collect();
    let mut cap = DVector::zeros(n + 1);
    cap[n] = -1.0;
    cons.push(Constraint::linear(cap, 1.0));
    let mut objective = DVector::zeros(n + 1);
    objective[n] = 1.0;
    let p1 = Problem { objective, constraints: cons };
    let mut z = DVector::zeros(n + 1);
    z.rows_mut(0, n).copy_from(z0);
    z[n] = s0 - 1.0;
    let m = p1.constraints.len() as f64;
    let mut t = opts.t0;
    for _ in 0..200 {
        p1.center(t, &mut z, opts)?;
        let cand = z.rows(0, n).into_owned();
        if base.min_slack(&cand) > 0.0 {
            return Ok(Some(cand));
        }
        if m / t < opts.gap {
            break;
        }
        t *= opts.mu;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(n: usize, r2: f64) -> Constraint {
        Constraint { lin: DVector::zeros(n), constant: r2, quad: Some(DMatrix::identity(n, n)) }
    }

    #[test]
    fn linear_objective_over_ball() {
        let c = DVector::from_vec(vec![3.0, 4.0]);
        let p = Problem { objective: c, constraints: vec![ball(2, 1.0)] };
        let z = p.maximize(DVector::zeros(2), &Options::default()).unwrap();
        assert!((z[0] - 0.6).abs() < 1e-6 && (z[1] - 0.8).abs() < 1e-6);
    }

    #[test]
    fn epigraph_max_min() {
        // maximize t s.t. z0 ≥ t, z1 ≥ t, z0 + z1 ≤ 2 (variables z0, z1, t)
        let obj = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let cons = vec![
            Constraint::linear(DVector::from_vec(vec![1.0, 0.0, -1.0]), 0.0),
            Constraint::linear(DVector::from_vec(vec![0.0, 1.0, -1.0]), 0.0),
            Constraint::linear(DVector::from_vec(vec![-1.0, -1.0, 0.0]), 2.0),
        ];
        let p = Problem { objective: obj, constraints: cons };
        let z = p.maximize(DVector::from_vec(vec![0.5, 0.5, 0.0]), &Options::default()).unwrap();
        assert!((z[2] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn rejects_infeasible_start() {
        let p = Problem { objective: DVector::from_vec(vec![1.0]), constraints: vec![ball(1, 1.0)] };
        assert!(p.maximize(DVector::from_vec(vec![2.0]), &Options::default()).is_err());
    }

    #[test]
    fn phase_one_finds_interior_or_reports_none() {
        // z ≥ 1 and z ≤ 2
        let cons = vec![
            Constraint::linear(DVector::from_vec(vec![1.0]), -1.0),
            Constraint::linear(DVector::from_vec(vec![-1.0]), 2.0),
        ];
        let z = find_interior(&cons, &DVector::from_vec(vec![-5.0]), &Options::default()).unwrap().unwrap();
        assert!(z[0] > 1.0 && z[0] < 2.0);
        // z ≥ 2 and z ≤ 1 is empty
        let empty = vec![
            Constraint::linear(DVector::from_vec(vec![1.0]), -2.0),
            Constraint::linear(DVector::from_vec(vec![-1.0]), 1.0),
        ];
        assert!(find_interior(&empty, &DVector::from_vec(vec![0.0]), &Options::default()).unwrap().is_none());
    }
}
