//! Surface orientation: rotations from sensed directions, discrete slot
//! selection and joint refinement of feed weights and digital precoders.
//!
//! Every surface b serves receiver b. Precoders are stored per receiver as
//! `x[k][b * Q + q]`, the same stacking the downlink optimizer uses.

use crate::channel::{steering, steering_local, MaskRule};
use crate::convex::{Constraint, Options, Problem};
use crate::error::{Error, Result};
use crate::geometry::{check_poses, interpolate_rotation, radial_rotation, rotation_between, SlotTable, SurfaceLayout, SurfacePose};
use crate::idet::cross_gains;
use crate::math::{RotationMatrix, Vec3, C64};
use crate::rhs::{feed_patterns, holo_from_steering, EmResponse, HoloBeamformer};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Frame in which the hologram's steering phase is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HologramPhase {
    /// Surface frame; the gain toward the target does not depend on the pose.
    #[default]
    Local,
    /// Global element coordinates, including the translation phase.
    Global,
}

/// Which degrees of freedom a scheme may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mobility {
    /// Sensed rotations and slot selection.
    #[default]
    Full,
    /// Sensed rotations at the anchor positions.
    RotationOnly,
    /// Slot selection with radial normals.
    TranslationOnly,
    /// Anchor positions with radial normals.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrientationOptions {
    /// Relative stopping tolerance, shared by every loop.
    pub epsilon: f64,
    pub max_outer: usize,
    pub max_fp: usize,
    pub max_sweeps: usize,
}

impl Default for OrientationOptions {
    fn default() -> Self {
        OrientationOptions { epsilon: 1e-4, max_outer: 20, max_fp: 30, max_sweeps: 20 }
    }
}

#[derive(Debug, Clone)]
pub struct OrientationProblem {
    /// Sensed direction per receiver, global frame; receiver b is served by surface b.
    pub sensed: Vec<Vec3>,
    /// Max-gain direction ū in the surface frame.
    pub max_gain_dir: Vec3,
    pub slots: SlotTable,
    /// Fixed deployment positions, also the starting points for slot selection.
    pub anchors: Vec<Vec3>,
    pub layout: SurfaceLayout,
    pub em: EmResponse,
    pub wavelength: f64,
    pub p_tx: f64,
    pub d_min: f64,
    pub mobility: Mobility,
    pub hologram: HologramPhase,
    pub mask: MaskRule,
    pub options: OrientationOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationSolution {
    pub poses: Vec<SurfacePose>,
    /// Selected slot per surface; `None` when positions are fixed.
    pub slots: Option<Vec<usize>>,
    /// ω̄ per surface.
    pub weights: Vec<Vec<f64>>,
    pub holograms: Vec<HoloBeamformer>,
    /// `x[k][b * Q + q]`.
    pub precoders: Vec<Vec<C64>>,
    /// min_k ġ_k.
    pub objective: f64,
    /// Objective after each outer iteration (index 0 is the start).
    pub trace: Vec<f64>,
    pub outer_iterations: usize,
    /// Objective evaluations spent by slot selection.
    pub slot_evaluations: usize,
}

impl OrientationSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }
}

/// R̃_b = rotation_between(ū, u_b) for every sensed direction.
pub fn rotations_from_sensing(max_gain_dir: Vec3, sensed: &[Vec3]) -> Result<Vec<RotationMatrix>> {
    sensed.iter().map(|u| rotation_between(max_gain_dir, *u)).collect()
}

/// Permutation `perm` maximizing Σ_b q̂_b·u_{perm[b]}; exhaustive up to 8 surfaces.
pub fn match_receivers(anchors: &[Vec3], dirs: &[Vec3]) -> Vec<usize> {
    let n = anchors.len();
    let score = |b: usize, k: usize| anchors[b].normalized().map_or(0.0, |a| a.dot(dirs[k]));
    if n > 8 {
        let mut used = vec![false; n];
        return (0..n)
            .map(|b| {
                let k = (0..n)
                    .filter(|&k| !used[k])
                    .max_by(|&i, &j| score(b, i).total_cmp(&score(b, j)))
                    .expect("free receiver");
                used[k] = true;
                k
            })
            .collect();
    }
    fn rec(b: usize, n: usize, cur: &mut Vec<usize>, used: &mut [bool], acc: f64, best: &mut (f64, Vec<usize>), s: &dyn Fn(usize, usize) -> f64) {
        if b == n {
            if acc > best.0 {
                *best = (acc, cur.clone());
            }
            return;
        }
        for k in 0..n {
            if !used[k] {
                used[k] = true;
                cur.push(k);
                rec(b + 1, n, cur, used, acc + s(b, k), best, s);
                cur.pop();
                used[k] = false;
            }
        }
    }
    let mut best = (f64::NEG_INFINITY, (0..n).collect());
    rec(0, n, &mut Vec::new(), &mut vec![false; n], 0.0, &mut best, &score);
    best.1
}

/// c^{(q')}_{k,b}[q] = a_b(u_k)ᵀ diag(P_{b,q'}) Θ_q, zero when u_k is masked at the pose.
type SurfaceCoeffs = Vec<Vec<Vec<C64>>>;

impl OrientationProblem {
    fn surfaces(&self) -> usize {
        self.sensed.len()
    }

    fn feeds(&self) -> usize {
        self.em.feeds()
    }

    fn validate(&self) -> Result<()> {
        let b = self.surfaces();
        if b == 0 || self.anchors.len() != b {
            return Err(Error::invalid("need one anchor per sensed direction"));
        }
        if self.sensed.iter().any(|u| !u.is_unit(1e-9)) || !self.max_gain_dir.is_unit(1e-9) {
            return Err(Error::invalid("directions must be unit vectors"));
        }
        if self.em.elements() != self.layout.elements() {
            return Err(Error::invalid("EM response does not match the layout"));
        }
        if matches!(self.mobility, Mobility::Full | Mobility::TranslationOnly) && self.slots.len() < b {
            return Err(Error::infeasible("fewer slots than surfaces", None));
        }
        Ok(())
    }

    fn uses_slots(&self) -> bool {
        matches!(self.mobility, Mobility::Full | Mobility::TranslationOnly)
    }

    fn pose_at(&self, b: usize, position: Vec3, slot: usize) -> Result<SurfacePose> {
        let rotation = match self.mobility {
            Mobility::Full | Mobility::RotationOnly => rotation_between(self.max_gain_dir, self.sensed[b])?,
            Mobility::TranslationOnly | Mobility::Fixed => radial_rotation(position),
        };
        Ok(SurfacePose { rotation, slot, position })
    }

    fn slot_pose(&self, b: usize, slot: usize) -> Result<SurfacePose> {
        self.pose_at(b, self.slots.positions[slot], slot)
    }

    fn target_steering(&self, b: usize, pose: &SurfacePose) -> Vec<C64> {
        match self.hologram {
            HologramPhase::Local => {
                let d = pose.rotation.apply_transpose(self.sensed[b]);
                steering_local(&self.layout, d, self.wavelength)
            }
            HologramPhase::Global => steering(pose, &self.layout, self.sensed[b], self.wavelength),
        }
    }

    fn coeffs(&self, b: usize, pose: &SurfacePose) -> SurfaceCoeffs {
        let q = self.feeds();
        let pats = feed_patterns(&self.target_steering(b, pose), &self.em);
        self.sensed
            .iter()
            .map(|u| {
                if !self.mask.visible(pose, *u) {
                    return vec![vec![C64::new(0.0, 0.0); q]; q];
                }
                let a = steering(pose, &self.layout, *u, self.wavelength);
                pats.iter()
                    .map(|p| {
                        (0..q)
                            .map(|qq| {
                                self.em.column(qq).iter().zip(&a).zip(p).map(|((t, s), w)| s * *w * t).sum()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    fn hologram_for(&self, b: usize, pose: &SurfacePose, weights: &[f64]) -> Result<HoloBeamformer> {
        holo_from_steering(&self.target_steering(b, pose), &self.em, weights)
    }

    /// Feasibility of a full pose set plus q_bᵀu_b > 0 for slot-based schemes.
    fn admissible(&self, poses: &[SurfacePose]) -> bool {
        if !check_poses(poses, self.d_min).is_feasible() {
            return false;
        }
        !self.uses_slots() || poses.iter().zip(&self.sensed).all(|(p, u)| p.position.dot(*u) > 0.0)
    }
}

/// Effective rows h_k[b·Q + q] = Σ_{q'} ω_{b,q'} c^{(q')}_{k,b}[q].
fn effective_rows(coeffs: &[SurfaceCoeffs], weights: &[Vec<f64>], k_count: usize) -> Vec<Vec<C64>> {
    (0..k_count)
        .map(|k| {
            let mut row = Vec::new();
            for (b, cb) in coeffs.iter().enumerate() {
                let q = cb[k].len();
                for qq in 0..q {
                    row.push((0..q).map(|qp| cb[k][qp][qq] * weights[b][qp]).sum());
                }
            }
            row
        })
        .collect()
}

fn per_receiver_gain(rows: &[Vec<C64>], x: &[Vec<C64>]) -> Vec<f64> {
    cross_gains(rows, x).iter().map(|r| r.iter().map(|v| v.norm_sqr()).sum()).collect()
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// min_k Σ_{k'} |Σ_b a_b(u_k)ᵀ diag(Ψ̄_b) Θ_b X_{k',b}|².
pub fn gain_objective(problem: &OrientationProblem, poses: &[SurfacePose], weights: &[Vec<f64>], x: &[Vec<C64>]) -> f64 {
    let coeffs: Vec<SurfaceCoeffs> = poses.iter().enumerate().map(|(b, p)| problem.coeffs(b, p)).collect();
    min_of(&per_receiver_gain(&effective_rows(&coeffs, weights, problem.surfaces()), x))
}

/// Quadratic-transform surrogate Σ_{k'} 2Re{ζ*_{kk'} Ξ_{kk'}} − |ζ_{kk'}|² per receiver.
pub fn surrogate(rows: &[Vec<C64>], x: &[Vec<C64>], zeta: &[Vec<C64>]) -> Vec<f64> {
    cross_gains(rows, x)
        .iter()
        .zip(zeta)
        .map(|(xi, z)| xi.iter().zip(z).map(|(a, b)| 2.0 * (b.conj() * a).re - b.norm_sqr()).sum())
        .collect()
}

/// Equal-power matched precoders toward each receiver's own row.
fn matched_precoders(rows: &[Vec<C64>], p_tx: f64) -> Vec<Vec<C64>> {
    let share = (p_tx / rows.len() as f64).sqrt();
    rows.iter()
        .map(|h| {
            let n = h.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if n > 0.0 {
                h.iter().map(|v| v.conj() * (share / n)).collect()
            } else {
                vec![C64::new(share / (h.len() as f64).sqrt(), 0.0); h.len()]
            }
        })
        .collect()
}

const BARRIER: Options = Options { gap: 1e-10, mu: 20.0, t0: 1.0, max_newton: 80 };

fn xi_rows(h: &[C64], kp: usize, n: usize, total: usize) -> (DVector<f64>, DVector<f64>) {
    let mut re = DVector::zeros(total);
    let mut im = DVector::zeros(total);
    for (j, v) in h.iter().enumerate() {
        let i = 2 * (kp * n + j);
        re[i] = v.re;
        re[i + 1] = -v.im;
        im[i] = v.im;
        im[i + 1] = v.re;
    }
    (re, im)
}

/// Epigraph step over X in the power ball with ζ fixed.
fn precoder_step(rows: &[Vec<C64>], x: &[Vec<C64>], zeta: &[Vec<C64>], p_tx: f64) -> Result<Vec<Vec<C64>>> {
    let k = rows.len();
    let n = rows[0].len();
    let nv = 2 * k * n;
    let total = nv + 1;
    let current = min_of(&per_receiver_gain(rows, x));
    if current <= 0.0 {
        return Ok(x.to_vec());
    }
    let amp = p_tx.sqrt();
    let scale = 1.0 / current;
    let mut cons = Vec::with_capacity(k + 1);
    for kk in 0..k {
        let mut lin = DVector::zeros(total);
        for (kp, z) in zeta[kk].iter().enumerate() {
            let (re, im) = xi_rows(&rows[kk], kp, n, total);
            lin += (&re * z.re + &im * z.im) * (2.0 * amp * scale);
        }
        lin[nv] = -1.0;
        let constant = -zeta[kk].iter().map(|v| v.norm_sqr()).sum::<f64>() * scale;
        cons.push(Constraint::linear(lin, constant));
    }
    let mut q = DMatrix::zeros(total, total);
    for i in 0..nv {
        q[(i, i)] = 1.0;
    }
    cons.push(Constraint { lin: DVector::zeros(total), constant: 1.0, quad: Some(q) });
    let mut z0 = DVector::zeros(total);
    for (kp, xk) in x.iter().enumerate() {
        for (j, v) in xk.iter().enumerate() {
            z0[2 * (kp * n + j)] = 0.5 * v.re / amp;
            z0[2 * (kp * n + j) + 1] = 0.5 * v.im / amp;
        }
    }
    z0[nv] = cons[..k].iter().map(|c| c.value(&z0)).fold(f64::INFINITY, f64::min) - 1.0;
    let mut obj = DVector::zeros(total);
    obj[nv] = 1.0;
    let z = Problem { objective: obj, constraints: cons }.maximize(z0, &BARRIER)?;
    Ok((0..k)
        .map(|kp| (0..n).map(|j| C64::new(z[2 * (kp * n + j)], z[2 * (kp * n + j) + 1]) * amp).collect())
        .collect())
}

/// Epigraph step over the feed weights of every surface with ζ and X fixed.
fn weight_step(coeffs: &[SurfaceCoeffs], weights: &[Vec<f64>], x: &[Vec<C64>], zeta: &[Vec<C64>]) -> Result<Vec<Vec<f64>>> {
    let bcount = coeffs.len();
    let q = weights[0].len();
    if q == 1 {
        return Ok(weights.to_vec());
    }
    let k = x.len();
    let rows = effective_rows(coeffs, weights, k);
    let current = min_of(&per_receiver_gain(&rows, x));
    if current <= 0.0 {
        return Ok(weights.to_vec());
    }
    let scale = 1.0 / current;
    let free = q - 1;
    let nv = bcount * free;
    let total = nv + 1;
    // D[k][k'][b][q'] = Σ_q c^{(q')}_{k,b}[q] x_{k'}[bQ + q]
    let d = |kk: usize, kp: usize, b: usize, qp: usize| -> C64 {
        (0..q).map(|qq| coeffs[b][kk][qp][qq] * x[kp][b * q + qq]).sum()
    };
    let mut cons = Vec::new();
    for kk in 0..k {
        let mut lin = DVector::zeros(total);
        let mut constant = 0.0;
        for (kp, z) in zeta[kk].iter().enumerate() {
            for b in 0..bcount {
                let last = d(kk, kp, b, free);
                constant += 2.0 * (z.conj() * last).re;
                for qp in 0..free {
                    lin[b * free + qp] += 2.0 * (z.conj() * (d(kk, kp, b, qp) - last)).re;
                }
            }
            constant -= z.norm_sqr();
        }
        lin *= scale;
        lin[nv] = -1.0;
        cons.push(Constraint::linear(lin, constant * scale));
    }
    for b in 0..bcount {
        let mut sum = DVector::zeros(total);
        for qp in 0..free {
            let mut e = DVector::zeros(total);
            e[b * free + qp] = 1.0;
            cons.push(Constraint::linear(e, 0.0));
            sum[b * free + qp] = -1.0;
        }
        cons.push(Constraint::linear(sum, 1.0));
    }
    let mut z0 = DVector::zeros(total);
    let uniform = 1.0 / q as f64;
    for b in 0..bcount {
        for qp in 0..free {
            z0[b * free + qp] = 0.5 * (weights[b][qp] + uniform);
        }
    }
    z0[nv] = cons[..k].iter().map(|c| c.value(&z0)).fold(f64::INFINITY, f64::min) - 1.0;
    let mut obj = DVector::zeros(total);
    obj[nv] = 1.0;
    let z = Problem { objective: obj, constraints: cons }.maximize(z0, &BARRIER)?;
    Ok((0..bcount)
        .map(|b| {
            let mut w: Vec<f64> = (0..free).map(|qp| z[b * free + qp].max(0.0)).collect();
            let s: f64 = w.iter().sum();
            if s > 1.0 {
                w.iter_mut().for_each(|v| *v /= s);
            }
            w.push((1.0 - w.iter().sum::<f64>()).max(0.0));
            w
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpResult {
    pub weights: Vec<Vec<f64>>,
    pub precoders: Vec<Vec<C64>>,
    pub zeta: Vec<Vec<C64>>,
    /// True objective after each cycle (index 0 is the start).
    pub trace: Vec<f64>,
}

/// Alternates the precoder step, the feed-weight step and ζ ← Ξ at fixed poses.
pub fn fp_refine(
    problem: &OrientationProblem,
    poses: &[SurfacePose],
    weights: &[Vec<f64>],
    x: &[Vec<C64>],
) -> Result<FpResult> {
    let k = problem.surfaces();
    let coeffs: Vec<SurfaceCoeffs> = poses.iter().enumerate().map(|(b, p)| problem.coeffs(b, p)).collect();
    let mut w = weights.to_vec();
    let mut x = x.to_vec();
    let mut rows = effective_rows(&coeffs, &w, k);
    let mut zeta = cross_gains(&rows, &x);
    let mut value = min_of(&per_receiver_gain(&rows, &x));
    let mut trace = vec![value];
    for _ in 0..problem.options.max_fp {
        let prev = value;
        let xn = precoder_step(&rows, &x, &zeta, problem.p_tx)?;
        let vx = min_of(&per_receiver_gain(&rows, &xn));
        if vx >= value {
            x = xn;
            value = vx;
        }
        zeta = cross_gains(&rows, &x);
        let wn = weight_step(&coeffs, &w, &x, &zeta)?;
        let rn = effective_rows(&coeffs, &wn, k);
        let vw = min_of(&per_receiver_gain(&rn, &x));
        if vw >= value {
            w = wn;
            rows = rn;
            value = vw;
        }
        zeta = cross_gains(&rows, &x);
        assert!(value >= prev, "fractional-programming objective decreased");
        trace.push(value);
        if value - prev <= problem.options.epsilon * value.abs() {
            break;
        }
    }
    Ok(FpResult { weights: w, precoders: x, zeta, trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSelection {
    pub slots: Vec<usize>,
    pub objective: f64,
    /// Candidate moves visited, M₁·B per sweep.
    pub candidates: usize,
    /// Candidates that were feasible and scored.
    pub evaluations: usize,
    pub sweeps: usize,
}

/// Greedy slot sweep with strictly-improving, feasibility-preserving moves.
pub fn select_slots(
    problem: &OrientationProblem,
    init: &[usize],
    weights: &[Vec<f64>],
    x: &[Vec<C64>],
) -> Result<SlotSelection> {
    let bcount = problem.surfaces();
    let mut slots = init.to_vec();
    let mut poses = slots.iter().enumerate().map(|(b, &s)| problem.slot_pose(b, s)).collect::<Result<Vec<_>>>()?;
    if !problem.admissible(&poses) {
        return Err(Error::infeasible("initial slot assignment violates placement constraints", None));
    }
    let mut coeffs: Vec<SurfaceCoeffs> = poses.iter().enumerate().map(|(b, p)| problem.coeffs(b, p)).collect();
    let mut value = min_of(&per_receiver_gain(&effective_rows(&coeffs, weights, bcount), x));
    let (mut candidates, mut evaluations, mut sweeps) = (0, 0, 0);
    for _ in 0..problem.options.max_sweeps {
        sweeps += 1;
        let start = value;
        for m in 0..problem.slots.len() {
            for b in 0..bcount {
                candidates += 1;
                if slots.contains(&m) {
                    continue;
                }
                let mut trial = poses.clone();
                trial[b] = problem.slot_pose(b, m)?;
                if !problem.admissible(&trial) {
                    continue;
                }
                evaluations += 1;
                let mut tc = coeffs.clone();
                tc[b] = problem.coeffs(b, &trial[b]);
                let v = min_of(&per_receiver_gain(&effective_rows(&tc, weights, bcount), x));
                if v > value {
                    value = v;
                    slots[b] = m;
                    poses = trial;
                    coeffs = tc;
                }
            }
        }
        if value - start <= problem.options.epsilon * value.abs() {
            break;
        }
    }
    Ok(SlotSelection { slots, objective: value, candidates, evaluations, sweeps })
}

/// Distinct slots nearest to the anchors, or a depth-first search for any
/// admissible assignment when those collide or violate constraints.
fn initial_slots(problem: &OrientationProblem) -> Result<Vec<usize>> {
    let n = problem.slots.len();
    let mut used = vec![false; n];
    let mut near = Vec::new();
    for a in &problem.anchors {
        let s = (0..n)
            .filter(|&s| !used[s])
            .min_by(|&i, &j| {
                problem.slots.positions[i].distance(*a).total_cmp(&problem.slots.positions[j].distance(*a))
            })
            .expect("enough slots");
        used[s] = true;
        near.push(s);
    }
    let poses = near.iter().enumerate().map(|(b, &s)| problem.slot_pose(b, s)).collect::<Result<Vec<_>>>()?;
    if problem.admissible(&poses) {
        return Ok(near);
    }
    let order: Vec<Vec<usize>> = problem
        .sensed
        .iter()
        .map(|u| {
            let mut c: Vec<usize> = (0..n).filter(|&s| problem.slots.positions[s].dot(*u) > 0.0).collect();
            c.sort_by(|&i, &j| problem.slots.positions[j].dot(*u).total_cmp(&problem.slots.positions[i].dot(*u)));
            c
        })
        .collect();
    let mut chosen = Vec::new();
    let mut budget = 200_000usize;
    if dfs(problem, &order, &mut chosen, &mut budget)? {
        Ok(chosen.iter().map(|p: &SurfacePose| p.slot).collect())
    } else {
        Err(Error::infeasible("no admissible slot assignment", None))
    }
}

fn dfs(problem: &OrientationProblem, order: &[Vec<usize>], chosen: &mut Vec<SurfacePose>, budget: &mut usize) -> Result<bool> {
    let b = chosen.len();
    if b == order.len() {
        return Ok(true);
    }
    for &s in &order[b] {
        if *budget == 0 {
            return Ok(false);
        }
        *budget -= 1;
        if chosen.iter().any(|p| p.slot == s) {
            continue;
        }
        chosen.push(problem.slot_pose(b, s)?);
        if check_poses(chosen, problem.d_min).is_feasible() && dfs(problem, order, chosen, budget)? {
            return Ok(true);
        }
        chosen.pop();
    }
    Ok(false)
}

const ANCHOR_STEPS: usize = 20;

/// Sensed rotations at the anchors, pulled back toward radial until placement holds.
fn anchor_poses(problem: &OrientationProblem) -> Result<Vec<SurfacePose>> {
    let target = problem.anchors.iter().enumerate().map(|(b, a)| problem.pose_at(b, *a, 0)).collect::<Result<Vec<_>>>()?;
    let radial: Vec<RotationMatrix> = problem.anchors.iter().map(|a| radial_rotation(*a)).collect();
    let mut t = vec![1.0f64; target.len()];
    let mut poses = target.clone();
    for _ in 0..=ANCHOR_STEPS {
        let rep = check_poses(&poses, problem.d_min);
        if rep.is_feasible() {
            return Ok(poses);
        }
        let mut bad: Vec<usize> = rep.blockage.clone();
        bad.extend(rep.reflection.iter().flat_map(|(a, b)| [*a, *b]));
        bad.sort_unstable();
        bad.dedup();
        for b in bad {
            t[b] = (t[b] - 1.0 / ANCHOR_STEPS as f64).max(0.0);
            poses[b].rotation = interpolate_rotation(&radial[b], &target[b].rotation, t[b]);
        }
    }
    Err(Error::infeasible("fixed positions violate placement constraints", None))
}

/// Alternates slot selection and fractional-programming refinement.
///
/// When no slot assignment is admissible the surfaces stay at the anchors
/// as in [`Mobility::RotationOnly`] and `slots` is `None`.
pub fn optimize_orientation(problem: &OrientationProblem) -> Result<OrientationSolution> {
    problem.validate()?;
    let bcount = problem.surfaces();
    let q = problem.feeds();
    let mut weights = vec![vec![1.0 / q as f64; q]; bcount];
    let start = if problem.uses_slots() {
        match initial_slots(problem) {
            Ok(s) => Some(s),
            Err(Error::Infeasible { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let (mut slots, mut poses) = match start {
        Some(s) => {
            let p = s.iter().enumerate().map(|(b, &s)| problem.slot_pose(b, s)).collect::<Result<Vec<_>>>()?;
            (Some(s), p)
        }
        None => (None, anchor_poses(problem)?),
    };
    let coeffs: Vec<SurfaceCoeffs> = poses.iter().enumerate().map(|(b, p)| problem.coeffs(b, p)).collect();
    let mut x = matched_precoders(&effective_rows(&coeffs, &weights, bcount), problem.p_tx);
    let mut value = gain_objective(problem, &poses, &weights, &x);
    let mut trace = vec![value];
    let mut slot_evaluations = 0;
    let mut outer_iterations = 0;
    for _ in 0..problem.options.max_outer {
        outer_iterations += 1;
        let prev = value;
        if let Some(s) = &mut slots {
            let sel = select_slots(problem, s, &weights, &x)?;
            slot_evaluations += sel.evaluations;
            *s = sel.slots;
            poses = s.iter().enumerate().map(|(b, &sl)| problem.slot_pose(b, sl)).collect::<Result<Vec<_>>>()?;
        }
        let fp = fp_refine(problem, &poses, &weights, &x)?;
        weights = fp.weights;
        x = fp.precoders;
        value = gain_objective(problem, &poses, &weights, &x);
        assert!(value >= prev * (1.0 - 1e-12), "orientation objective decreased");
        trace.push(value);
        if !((value - prev).abs() > problem.options.epsilon * value.abs()) {
            break;
        }
    }
    let holograms = poses
        .iter()
        .enumerate()
        .map(|(b, p)| problem.hologram_for(b, p, &weights[b]))
        .collect::<Result<Vec<_>>>()?;
    Ok(OrientationSolution {
        poses,
        slots,
        weights,
        holograms,
        precoders: x,
        objective: value,
        trace,
        outer_iterations,
        slot_evaluations,
    })
}
