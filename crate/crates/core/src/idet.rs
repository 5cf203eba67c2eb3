//! Downlink data and energy transfer: SINR, harvested power, the sigmoidal
//! rectifier curve and the fractional-programming optimizer that maximizes
//! the smallest harvested power under per-receiver rate floors.
//!
//! Channels are passed as equivalent per-feed rows: `hbar[k]` stacks
//! h̄_{k,b} over surfaces b, and a precoder `x[k']` stacks X_{k',b} the same
//! way, so Σ_b h̄_{k,b} X_{k',b} is a plain inner product without conjugation.

use crate::convex::{find_interior, Constraint, Options, Problem};
use crate::error::{Error, Result};
use crate::math::C64;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EhCurve {
    /// Steepness ξ, 1/W.
    pub xi: f64,
    pub nu: f64,
    /// Activation power E₀, W.
    pub e0: f64,
    /// Saturation power E_m, W.
    pub em: f64,
}

impl Default for EhCurve {
    fn default() -> Self {
        EhCurve { xi: 274.0, nu: 0.29, e0: 0.064e-3, em: 24e-3 }
    }
}

impl EhCurve {
    fn c(&self) -> f64 {
        (-self.xi * self.e0 + self.nu).exp()
    }

    /// Harvested DC power for RF input `p`.
    pub fn gamma(&self, p: f64) -> f64 {
        let c = self.c();
        let v = self.em / c * ((1.0 + c) / (1.0 + (-self.xi * p + self.nu).exp()) - 1.0);
        v.max(0.0)
    }

    /// RF input needed for DC output `p_dc` ∈ [0, E_m).
    pub fn gamma_inverse(&self, p_dc: f64) -> Result<f64> {
        if !(0.0..self.em).contains(&p_dc) {
            return Err(Error::invalid(format!("DC power {p_dc} outside [0, E_m)")));
        }
        if p_dc == 0.0 {
            return Ok(self.e0);
        }
        let c = self.c();
        let e = (1.0 + c) / (1.0 + p_dc * c / self.em) - 1.0;
        Ok((self.nu - e.ln()) / self.xi)
    }
}

/// Precoders, splitting factors and FP auxiliaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdetState {
    /// `x[k]` stacks X_{k,b} over surfaces.
    pub x: Vec<Vec<C64>>,
    pub rho: Vec<f64>,
    pub vartheta: Vec<C64>,
    pub varsigma: Vec<Vec<C64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdetMetrics {
    pub sinr: Vec<f64>,
    pub rate: Vec<f64>,
    pub p_eh: Vec<f64>,
    pub p_dc: Vec<f64>,
    pub min_dc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    /// Antenna noise σ₀², W.
    pub antenna: f64,
    /// Conversion noise σ_cov², W.
    pub conversion: f64,
}

fn inner(h: &[C64], x: &[C64]) -> C64 {
    h.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// S[k][k'] = Σ_b h̄_{k,b} X_{k',b}.
pub fn cross_gains(hbar: &[Vec<C64>], x: &[Vec<C64>]) -> Vec<Vec<C64>> {
    hbar.iter().map(|h| x.iter().map(|xk| inner(h, xk)).collect()).collect()
}

/// SINR per receiver; receivers with ρ ≥ 1 get 0.
pub fn sinr(hbar: &[Vec<C64>], x: &[Vec<C64>], rho: &[f64], noise: &Noise) -> Vec<f64> {
    let s = cross_gains(hbar, x);
    (0..hbar.len())
        .map(|k| {
            if rho[k] >= 1.0 {
                return 0.0;
            }
            let a = 1.0 - rho[k];
            let interf: f64 = (0..x.len()).filter(|&j| j != k).map(|j| s[k][j].norm_sqr()).sum();
            a * s[k][k].norm_sqr() / (a * interf + a * noise.antenna + noise.conversion)
        })
        .collect()
}

/// RF power at the harvester, ρ_k (Σ_{k'} |h̄_k X_{k'}|² + σ₀²).
pub fn eh_rf_power(hbar: &[Vec<C64>], x: &[Vec<C64>], rho: &[f64], antenna_noise: f64) -> Vec<f64> {
    let s = cross_gains(hbar, x);
    (0..hbar.len())
        .map(|k| rho[k] * (s[k].iter().map(|v| v.norm_sqr()).sum::<f64>() + antenna_noise))
        .collect()
}

pub fn metrics(hbar: &[Vec<C64>], x: &[Vec<C64>], rho: &[f64], noise: &Noise, curve: &EhCurve) -> IdetMetrics {
    let sinr = sinr(hbar, x, rho, noise);
    let rate = sinr.iter().map(|g| (1.0 + g).log2()).collect();
    let p_eh = eh_rf_power(hbar, x, rho, noise.antenna);
    let p_dc: Vec<f64> = p_eh.iter().map(|p| curve.gamma(*p)).collect();
    let min_dc = p_dc.iter().copied().fold(f64::INFINITY, f64::min);
    IdetMetrics { sinr, rate, p_eh, p_dc, min_dc }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FpOptions {
    /// Relative stopping tolerance on the objective.
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for FpOptions {
    fn default() -> Self {
        FpOptions { epsilon: 1e-4, max_iters: 60 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdetOutcome {
    pub state: IdetState,
    pub metrics: IdetMetrics,
    /// min_k P_EH,k after every outer cycle (index 0 is the start).
    pub trace: Vec<f64>,
    pub iterations: usize,
}

/// Channels and noise rescaled so the largest received power is about 1
/// and the precoder lives in the unit ball.
struct Scaled {
    h: Vec<Vec<C64>>,
    noise: Noise,
    power_unit: f64,
    amp: f64,
    k: usize,
    n: usize,
}

impl Scaled {
    fn new(hbar: &[Vec<C64>], p_tx: f64, noise: &Noise) -> Result<Self> {
        let k = hbar.len();
        if k == 0 {
            return Err(Error::invalid("no receivers"));
        }
        let n = hbar[0].len();
        if hbar.iter().any(|h| h.len() != n) {
            return Err(Error::invalid("equivalent channels differ in length"));
        }
        let hmax = hbar.iter().map(|h| h.iter().map(|v| v.norm_sqr()).sum::<f64>()).fold(0.0, f64::max);
        let power_unit = if hmax > 0.0 { hmax * p_tx } else { 1.0 };
        let amp = (p_tx / power_unit).sqrt();
        let h = hbar.iter().map(|row| row.iter().map(|v| v * amp).collect()).collect();
        let noise = Noise { antenna: noise.antenna / power_unit, conversion: noise.conversion / power_unit };
        Ok(Scaled { h, noise, power_unit, amp: p_tx.sqrt(), k, n })
    }

    fn nvar(&self) -> usize {
        2 * self.k * self.n
    }

    /// Real rows (Re S, Im S) of S_{k,k'} as linear forms in the stacked variables.
    fn s_rows(&self, k: usize, kp: usize, total: usize) -> (DVector<f64>, DVector<f64>) {
        let mut re = DVector::zeros(total);
        let mut im = DVector::zeros(total);
        for (j, h) in self.h[k].iter().enumerate() {
            let i = 2 * (kp * self.n + j);
            re[i] = h.re;
            re[i + 1] = -h.im;
            im[i] = h.im;
            im[i + 1] = h.re;
        }
        (re, im)
    }

    fn pack(&self, x: &[Vec<C64>], total: usize) -> DVector<f64> {
        let mut z = DVector::zeros(total);
        for (kp, xk) in x.iter().enumerate() {
            for (j, v) in xk.iter().enumerate() {
                z[2 * (kp * self.n + j)] = v.re;
                z[2 * (kp * self.n + j) + 1] = v.im;
            }
        }
        z
    }

    fn unpack(&self, z: &DVector<f64>) -> Vec<Vec<C64>> {
        (0..self.k)
            .map(|kp| (0..self.n).map(|j| C64::new(z[2 * (kp * self.n + j)], z[2 * (kp * self.n + j) + 1])).collect())
            .collect()
    }

    fn power_constraint(&self, total: usize) -> Constraint {
        let mut q = DMatrix::zeros(total, total);
        for i in 0..self.nvar() {
            q[(i, i)] = 1.0;
        }
        Constraint { lin: DVector::zeros(total), constant: 1.0, quad: Some(q) }
    }

    /// Quadratic-transform rate surrogate γ̇_k(x) − τ ≥ 0 for fixed ϑ, ρ.
    fn rate_constraint(&self, k: usize, vartheta: C64, rho: f64, tau: f64, total: usize) -> Constraint {
        let a = 1.0 - rho;
        let (re, im) = self.s_rows(k, k, total);
        let lin = (&re * vartheta.re + &im * vartheta.im) * (2.0 * a.sqrt());
        let w = vartheta.norm_sqr();
        let mut q = DMatrix::zeros(total, total);
        for kp in (0..self.k).filter(|&j| j != k) {
            let (r, i) = self.s_rows(k, kp, total);
            q.ger(w * a, &r, &r, 1.0);
            q.ger(w * a, &i, &i, 1.0);
        }
        let constant = -w * (a * self.noise.antenna + self.noise.conversion) - tau;
        Constraint { lin, constant, quad: Some(q) }
    }

    /// Linear EH surrogate 2√ρ Re{ςᴴ S_k} − ‖ς‖² + ρσ₀² (minus t when `with_t`).
    fn eh_constraint(&self, k: usize, varsigma: &[C64], rho: f64, total: usize, with_t: bool) -> Constraint {
        let mut lin = DVector::zeros(total);
        for (kp, s) in varsigma.iter().enumerate() {
            let (re, im) = self.s_rows(k, kp, total);
            lin += (&re * s.re + &im * s.im) * (2.0 * rho.sqrt());
        }
        if with_t {
            lin[total - 1] = -1.0;
        }
        let constant = -varsigma.iter().map(|v| v.norm_sqr()).sum::<f64>() + rho * self.noise.antenna;
        Constraint::linear(lin, constant)
    }

    fn vartheta(&self, x: &[Vec<C64>], rho: &[f64]) -> Vec<C64> {
        let s = cross_gains(&self.h, x);
        (0..self.k)
            .map(|k| {
                let a = 1.0 - rho[k];
                let interf: f64 = (0..self.k).filter(|&j| j != k).map(|j| s[k][j].norm_sqr()).sum();
                s[k][k] * a.sqrt() / (a * interf + a * self.noise.antenna + self.noise.conversion)
            })
            .collect()
    }

    fn varsigma(&self, x: &[Vec<C64>], rho: &[f64]) -> Vec<Vec<C64>> {
        let s = cross_gains(&self.h, x);
        (0..self.k).map(|k| s[k].iter().map(|v| v * rho[k].sqrt()).collect()).collect()
    }

    fn min_eh(&self, x: &[Vec<C64>], rho: &[f64]) -> f64 {
        eh_rf_power(&self.h, x, rho, self.noise.antenna).into_iter().fold(f64::INFINITY, f64::min)
    }

    fn min_sinr(&self, x: &[Vec<C64>], rho: &[f64]) -> f64 {
        sinr(&self.h, x, rho, &self.noise).into_iter().fold(f64::INFINITY, f64::min)
    }

    fn matched_start(&self) -> Vec<Vec<C64>> {
        let share = 1.0 / (self.k as f64).sqrt();
        self.h
            .iter()
            .map(|h| {
                let n = h.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                if n > 0.0 {
                    h.iter().map(|v| v.conj() * (share / n)).collect()
                } else {
                    vec![C64::new(share / (self.n as f64).sqrt(), 0.0); self.n]
                }
            })
            .collect()
    }
}

const BARRIER: Options = Options { gap: 1e-10, mu: 20.0, t0: 1.0, max_newton: 80 };

/// Max-min SINR with ρ = 0, used to reach the rate floors before harvesting.
fn reach_rate_floor(sc: &Scaled, tau: f64, opts: &FpOptions) -> Result<Vec<Vec<C64>>> {
    let rho = vec![0.0; sc.k];
    let mut x = sc.matched_start();
    let mut best = sc.min_sinr(&x, &rho);
    let total = sc.nvar() + 1;
    for _ in 0..opts.max_iters.max(100) {
        if best > tau * (1.0 + 1e-3) + 1e-12 {
            return Ok(x);
        }
        let vt = sc.vartheta(&x, &rho);
        let mut cons = Vec::new();
        for k in 0..sc.k {
            let mut c = sc.rate_constraint(k, vt[k], 0.0, 0.0, total);
            c.lin[total - 1] = -1.0;
            cons.push(c);
        }
        cons.push(sc.power_constraint(total));
        let mut obj = DVector::zeros(total);
        obj[total - 1] = 1.0;
        let mut z0 = sc.pack(&x, total) * 0.999;
        let start: f64 = cons[..sc.k].iter().map(|c| c.value(&z0)).fold(f64::INFINITY, f64::min);
        z0[total - 1] = start - 1.0;
        let z = Problem { objective: obj, constraints: cons }.maximize(z0, &BARRIER)?;
        let xn = sc.unpack(&z.rows(0, sc.nvar()).into_owned());
        let v = sc.min_sinr(&xn, &rho);
        if v <= best * (1.0 + 1e-7) {
            if v > best {
                x = xn;
                best = v;
            }
            break;
        }
        x = xn;
        best = v;
    }
    if best > tau {
        Ok(x)
    } else {
        Err(Error::infeasible("rate floor not reachable at this transmit power", Some((1.0 + best).log2())))
    }
}

/// Largest-min-EH search over ρ for one receiver with fixed x, ϑ, ς.
fn update_rho(sc: &Scaled, k: usize, s_k: &[C64], vt: C64, vs: &[C64], rho0: f64, tau: Option<f64>) -> f64 {
    let interf: f64 = (0..sc.k).filter(|&j| j != k).map(|j| s_k[j].norm_sqr()).sum();
    let a = (vt.conj() * s_k[k]).re;
    let w = vt.norm_sqr();
    let rate = |r: f64| 2.0 * (1.0 - r).max(0.0).sqrt() * a - w * ((1.0 - r) * (interf + sc.noise.antenna) + sc.noise.conversion);
    let c: f64 = vs.iter().zip(s_k).map(|(v, s)| (v.conj() * s).re).sum();
    let norm: f64 = vs.iter().map(|v| v.norm_sqr()).sum();
    let eh = |r: f64| 2.0 * r.sqrt() * c - norm + r * sc.noise.antenna;
    let (lo, hi) = match tau {
        None => (0.0, 1.0),
        Some(t) => {
            if rate(rho0) < t {
                return rho0;
            }
            let edge = |inside: f64, outside: f64| {
                if rate(outside) >= t {
                    return outside;
                }
                let (mut good, mut bad) = (inside, outside);
                while (good - bad).abs() > 1e-9 {
                    let mid = 0.5 * (good + bad);
                    if rate(mid) >= t {
                        good = mid;
                    } else {
                        bad = mid;
                    }
                }
                good
            };
            (edge(rho0, 0.0), edge(rho0, 1.0))
        }
    };
    // eh is concave for c ≥ 0 and convex otherwise; its max over [lo, hi] sits at an end point
    // or, when concave, at the end where it is increasing.
    let mut best = rho0;
    for r in [lo, hi] {
        if eh(r) > eh(best) {
            best = r;
        }
    }
    best
}

/// Maximizes min_k P_EH,k subject to rate floors and the power budget.
pub fn optimize_idet(
    hbar: &[Vec<C64>],
    p_tx: f64,
    r0: f64,
    noise: &Noise,
    curve: &EhCurve,
    opts: &FpOptions,
) -> Result<IdetOutcome> {
    let sc = Scaled::new(hbar, p_tx, noise)?;
    let tau = if r0 > 0.0 { Some(2f64.powf(r0) - 1.0) } else { None };
    let (mut x, mut rho) = match tau {
        Some(t) => (reach_rate_floor(&sc, t, opts)?, vec![0.0; sc.k]),
        None => (sc.matched_start(), vec![1.0; sc.k]),
    };
    let mut vt = sc.vartheta(&x, &rho);
    let mut vs = sc.varsigma(&x, &rho);
    let total = sc.nvar() + 1;
    let mut obj_val = sc.min_eh(&x, &rho);
    let mut trace = vec![obj_val * sc.power_unit];
    let mut iterations = 0;
    for _ in 0..opts.max_iters {
        iterations += 1;
        let prev = obj_val;
        // X step
        let mut cons: Vec<Constraint> = (0..sc.k).map(|k| sc.eh_constraint(k, &vs[k], rho[k], total, true)).collect();
        if let Some(t) = tau {
            for k in 0..sc.k {
                cons.push(sc.rate_constraint(k, vt[k], rho[k], t, total));
            }
        }
        cons.push(sc.power_constraint(total));
        let feas: Vec<Constraint> = cons[sc.k..].iter().map(|c| {
            let mut c = c.clone();
            c.lin[total - 1] = 0.0;
            c
        }).collect();
        if let Some(mut z0) = find_interior(&feas, &sc.pack(&x, total), &BARRIER)? {
            let start = cons[..sc.k].iter().map(|c| c.value(&z0)).fold(f64::INFINITY, f64::min);
            z0[total - 1] = start - 1.0;
            let mut obj = DVector::zeros(total);
            obj[total - 1] = 1.0;
            let z = Problem { objective: obj, constraints: cons }.maximize(z0, &BARRIER)?;
            let xn = sc.unpack(&z.rows(0, sc.nvar()).into_owned());
            let rate_ok = tau.is_none_or(|t| sc.min_sinr(&xn, &rho) >= t);
            if rate_ok && sc.min_eh(&xn, &rho) >= obj_val {
                x = xn;
            }
        }
        // ρ step
        let s = cross_gains(&sc.h, &x);
        let cand: Vec<f64> = (0..sc.k).map(|k| update_rho(&sc, k, &s[k], vt[k], &vs[k], rho[k], tau)).collect();
        let rate_ok = tau.is_none_or(|t| sc.min_sinr(&x, &cand) >= t);
        if rate_ok && sc.min_eh(&x, &cand) >= sc.min_eh(&x, &rho) {
            rho = cand;
        }
        // auxiliaries
        vt = sc.vartheta(&x, &rho);
        vs = sc.varsigma(&x, &rho);
        obj_val = sc.min_eh(&x, &rho);
        trace.push(obj_val * sc.power_unit);
        if (obj_val - prev).abs() <= opts.epsilon * obj_val.abs().max(1e-300) {
            break;
        }
    }
    let xs: Vec<Vec<C64>> = x.iter().map(|row| row.iter().map(|v| v * sc.amp).collect()).collect();
    let state = IdetState {
        vartheta: vt,
        varsigma: vs,
        rho: rho.clone(),
        x: xs.clone(),
    };
    let metrics = metrics(hbar, &xs, &rho, noise, curve);
    if let Some(t) = tau {
        if metrics.sinr.iter().any(|g| *g < t * (1.0 - 1e-6)) {
            return Err(Error::Solver { message: "rate floor violated after optimization".into(), iterate: rho });
        }
    }
    Ok(IdetOutcome { state, metrics, trace, iterations })
}
