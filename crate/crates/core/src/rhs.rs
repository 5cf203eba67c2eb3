//! Surface electromagnetic response, amplitude-only holograms and
//! directional beamforming gain.
//!
//! The feed-to-element distances are computed in the local frame, so the
//! response is independent of the pose and can be cached per layout.

use crate::channel::{angles_of, direction_vector, steering_local};
use crate::error::{Error, Result};
use crate::geometry::SurfaceLayout;
use crate::math::{Vec3, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Per-feed reference-wave response Θ (M×Q, column-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmResponse {
    m: usize,
    q: usize,
    pub efficiency: f64,
    data: Vec<C64>,
}

impl EmResponse {
    pub fn elements(&self) -> usize {
        self.m
    }

    pub fn feeds(&self) -> usize {
        self.q
    }

    pub fn get(&self, m: usize, q: usize) -> C64 {
        self.data[q * self.m + m]
    }

    pub fn column(&self, q: usize) -> &[C64] {
        &self.data[q * self.m..(q + 1) * self.m]
    }
}

/// Θ[m, q] = √η exp(−j 2π ϱ ‖r_m − r_q‖ / λ).
pub fn em_response(layout: &SurfaceLayout, efficiency: f64, refractive: f64, wavelength: f64) -> EmResponse {
    let elems = layout.local_elements();
    let k = 2.0 * PI * refractive / wavelength;
    let amp = efficiency.sqrt();
    let mut data = Vec::with_capacity(elems.len() * layout.num_feeds());
    for feed in &layout.feeds {
        for r in &elems {
            data.push(C64::from_polar(amp, -k * r.distance(*feed)));
        }
    }
    EmResponse { m: elems.len(), q: layout.num_feeds(), efficiency, data }
}

/// Amplitude-only holographic pattern Ψ ∈ [0,1]^M with its feed weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoloBeamformer {
    pub psi: Vec<f64>,
    pub weights: Vec<f64>,
}

fn check_simplex(w: &[f64], q: usize) -> Result<()> {
    if w.len() != q {
        return Err(Error::invalid(format!("{} weights for {q} feeds", w.len())));
    }
    let s: f64 = w.iter().sum();
    if w.iter().any(|&x| x < -1e-12 || !x.is_finite()) || (s - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("feed weights must lie on the simplex"));
    }
    Ok(())
}

/// Per-feed interference patterns P_q[m] = (Re{√(M/η) Θ_q[m] a[m]} + 1)/2.
pub fn feed_patterns(a: &[C64], em: &EmResponse) -> Vec<Vec<f64>> {
    let scale = (em.m as f64 / em.efficiency).sqrt();
    (0..em.q)
        .map(|q| {
            em.column(q)
                .iter()
                .zip(a)
                .map(|(t, s)| (((t * s).re * scale + 1.0) / 2.0).clamp(0.0, 1.0))
                .collect()
        })
        .collect()
}

/// Ψ = Σ_q ω_q P_q for an arbitrary steering vector `a`.
pub fn holo_from_steering(a: &[C64], em: &EmResponse, weights: &[f64]) -> Result<HoloBeamformer> {
    check_simplex(weights, em.q)?;
    if a.len() != em.m {
        return Err(Error::invalid("steering length differs from element count"));
    }
    let pats = feed_patterns(a, em);
    let mut psi = vec![0.0; em.m];
    for (w, p) in weights.iter().zip(&pats) {
        for (x, v) in psi.iter_mut().zip(p) {
            *x += w * v;
        }
    }
    for x in psi.iter_mut() {
        *x = x.clamp(0.0, 1.0);
    }
    Ok(HoloBeamformer { psi, weights: weights.to_vec() })
}

/// Hologram steered toward a direction given in the surface's local frame.
pub fn holo_beamformer(
    dir_local: Vec3,
    em: &EmResponse,
    weights: &[f64],
    layout: &SurfaceLayout,
    wavelength: f64,
) -> Result<HoloBeamformer> {
    holo_from_steering(&steering_local(layout, dir_local, wavelength), em, weights)
}

/// g = |Σ_q aᵀ diag(Ψ) Θ_q|.
pub fn beam_gain(psi: &HoloBeamformer, em: &EmResponse, a: &[C64]) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for q in 0..em.q {
        for ((t, s), p) in em.column(q).iter().zip(a).zip(&psi.psi) {
            acc += s * *p * t;
        }
    }
    acc.norm()
}

/// Gain of a hologram steered at local direction `f` and evaluated there.
///
/// Cheaper than building Ψ explicitly; used by the search and gain maps.
pub fn steered_gain(layout: &SurfaceLayout, feeds: &[Vec3], weights: &[f64], f: Vec3, cfg: &EmParams) -> f64 {
    let k = 2.0 * PI / cfg.wavelength;
    let kr = k * cfg.refractive;
    let mut acc_re = 0.0;
    let mut acc_im = 0.0;
    let q = feeds.len();
    let mut phases = vec![0.0; q];
    for mx in 0..layout.mx {
        for my in 0..layout.my {
            let r = layout.local_element(mx, my);
            let base = k * f.dot(r);
            let mut psi = 0.0;
            for (i, feed) in feeds.iter().enumerate() {
                let x = base - kr * r.distance(*feed);
                phases[i] = x;
                psi += weights[i] * (x.cos() + 1.0) * 0.5;
            }
            for x in &phases {
                let (s, c) = x.sin_cos();
                acc_re += psi * c;
                acc_im += psi * s;
            }
        }
    }
    cfg.efficiency.sqrt() / (layout.elements() as f64).sqrt() * (acc_re * acc_re + acc_im * acc_im).sqrt()
}

/// Material and carrier parameters of the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmParams {
    pub efficiency: f64,
    pub refractive: f64,
    pub wavelength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainProfile {
    /// (θ, φ, gain) samples, local frame, front hemisphere.
    pub samples: Vec<(f64, f64, f64)>,
    pub argmax: (f64, f64),
    pub max_gain: f64,
    pub min_gain: f64,
}

impl GainProfile {
    pub fn anisotropy(&self) -> f64 {
        self.max_gain / self.min_gain
    }

    pub fn argmax_direction(&self) -> Vec3 {
        direction_vector(self.argmax.0, self.argmax.1)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,phi,gain\n");
        for (t, p, g) in &self.samples {
            s.push_str(&format!("{t},{p},{g}\n"));
        }
        s
    }
}

/// Samples the steered gain over an n_theta × n_phi grid of the front hemisphere.
pub fn gain_profile(
    layout: &SurfaceLayout,
    weights: &[f64],
    cfg: &EmParams,
    n_theta: usize,
    n_phi: usize,
) -> GainProfile {
    let grid: Vec<(f64, f64)> = (0..n_phi)
        .flat_map(|j| {
            let phi = FRAC_PI_2 * j as f64 / (n_phi.max(2) - 1) as f64;
            (0..n_theta).map(move |i| (-PI + 2.0 * PI * (i as f64 + 1.0) / n_theta as f64, phi))
        })
        .collect();
    let samples: Vec<(f64, f64, f64)> = grid
        .par_iter()
        .map(|&(t, p)| (t, p, steered_gain(layout, &layout.feeds, weights, direction_vector(t, p), cfg)))
        .collect();
    let mut best = 0;
    let mut min_gain = f64::INFINITY;
    for (i, s) in samples.iter().enumerate() {
        if s.2 > samples[best].2 {
            best = i;
        }
        min_gain = min_gain.min(s.2);
    }
    GainProfile { argmax: (samples[best].0, samples[best].1), max_gain: samples[best].2, min_gain, samples }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub coarse_theta: usize,
    pub coarse_phi: usize,
    pub restarts: usize,
    /// Final refinement step for angles, radians.
    pub step: f64,
    /// Final refinement step for feed coordinates, meters.
    pub position_step: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            coarse_theta: 36,
            coarse_phi: 10,
            restarts: 24,
            step: 1e-3,
            position_step: 1e-5,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxGain {
    /// Max-gain direction ū in the local frame.
    pub direction: Vec3,
    pub theta: f64,
    pub phi: f64,
    pub feeds: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub gain: f64,
}

/// Feed placements must stay in the aperture box with spacing ≥ `min_spacing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedBox {
    pub width: f64,
    pub height: f64,
    pub min_spacing: f64,
}

impl FeedBox {
    pub fn of(layout: &SurfaceLayout, min_spacing: f64) -> Self {
        FeedBox {
            width: (layout.mx as f64 - 1.0) * layout.spacing,
            height: (layout.my as f64 - 1.0) * layout.spacing,
            min_spacing,
        }
    }

    fn contains(&self, p: Vec3) -> bool {
        p.x >= -1e-12 && p.x <= self.width + 1e-12 && p.y >= -1e-12 && p.y <= self.height + 1e-12
    }

    pub fn admits(&self, feeds: &[Vec3]) -> bool {
        feeds.iter().all(|p| self.contains(*p))
            && feeds
                .iter()
                .enumerate()
                .all(|(i, a)| feeds[i + 1..].iter().all(|b| a.distance(*b) >= self.min_spacing - 1e-12))
    }

    /// Square lattice of `q` feeds centered in the box, if it fits.
    pub fn lattice(&self, q: usize) -> Result<Vec<Vec3>> {
        if q == 0 {
            return Err(Error::invalid("at least one feed is required"));
        }
        let s = self.min_spacing;
        let per = |len: f64| if s > 0.0 { (len / s + 1e-9).floor() as usize + 1 } else { usize::MAX };
        let (nx, ny) = (per(self.width), per(self.height));
        if nx.saturating_mul(ny) < q {
            return Err(Error::infeasible(
                format!("{q} feeds at spacing {s} m do not fit a {}x{} m aperture", self.width, self.height),
                None,
            ));
        }
        let cols = ((q as f64).sqrt().ceil() as usize).min(nx).max(1);
        let rows = q.div_ceil(cols);
        if rows > ny {
            return Err(Error::infeasible("feed lattice does not fit", None));
        }
        let x0 = (self.width - (cols as f64 - 1.0) * s) / 2.0;
        let y0 = (self.height - (rows as f64 - 1.0) * s) / 2.0;
        Ok((0..q).map(|i| Vec3::new(x0 + (i % cols) as f64 * s, y0 + (i / cols) as f64 * s, 0.0)).collect())
    }

    fn random(&self, q: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec3>> {
        for _ in 0..200 {
            let f: Vec<Vec3> = (0..q)
                .map(|_| Vec3::new(rng.gen::<f64>() * self.width, rng.gen::<f64>() * self.height, 0.0))
                .collect();
            if self.admits(&f) {
                return Ok(f);
            }
        }
        self.lattice(q)
    }
}

fn random_simplex(q: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let e: Vec<f64> = (0..q).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

struct Candidate {
    theta: f64,
    phi: f64,
    feeds: Vec<Vec3>,
    weights: Vec<f64>,
    gain: f64,
}

fn evaluate(layout: &SurfaceLayout, c: &Candidate, cfg: &EmParams) -> f64 {
    steered_gain(layout, &c.feeds, &c.weights, direction_vector(c.theta, c.phi), cfg)
}

/// One coordinate-descent sweep at the given steps; returns whether anything improved.
fn sweep(layout: &SurfaceLayout, fb: &FeedBox, c: &mut Candidate, cfg: &EmParams, ang: f64, pos: f64) -> bool {
    let mut improved = false;
    let try_accept = |c: &mut Candidate, trial: Candidate| -> bool {
        if trial.gain > c.gain {
            *c = trial;
            true
        } else {
            false
        }
    };
    for coord in 0..2 {
        for sign in [1.0, -1.0] {
            let (mut t, mut p) = (c.theta, c.phi);
            if coord == 0 {
                t += sign * ang;
            } else {
                p = (p + sign * ang).clamp(0.0, FRAC_PI_2);
            }
            let mut trial = Candidate { theta: t, phi: p, feeds: c.feeds.clone(), weights: c.weights.clone(), gain: 0.0 };
            trial.gain = evaluate(layout, &trial, cfg);
            improved |= try_accept(c, trial);
        }
    }
    for i in 0..c.feeds.len() {
        for axis in 0..2 {
            for sign in [1.0, -1.0] {
                let mut feeds = c.feeds.clone();
                if axis == 0 {
                    feeds[i].x += sign * pos;
                } else {
                    feeds[i].y += sign * pos;
                }
                if !fb.admits(&feeds) {
                    continue;
                }
                let mut trial = Candidate { theta: c.theta, phi: c.phi, feeds, weights: c.weights.clone(), gain: 0.0 };
                trial.gain = evaluate(layout, &trial, cfg);
                improved |= try_accept(c, trial);
            }
        }
    }
    let q = c.weights.len();
    for i in 0..q {
        for j in 0..q {
            if i == j {
                continue;
            }
            let mv = (ang).min(c.weights[j]);
            if mv <= 0.0 {
                continue;
            }
            let mut w = c.weights.clone();
            w[i] += mv;
            w[j] -= mv;
            let mut trial = Candidate { theta: c.theta, phi: c.phi, feeds: c.feeds.clone(), weights: w, gain: 0.0 };
            trial.gain = evaluate(layout, &trial, cfg);
            improved |= try_accept(c, trial);
        }
    }
    improved
}

/// Searches direction, feed placement and feed weights for the largest steered gain.
///
/// A coarse direction grid is scanned for each random feed configuration, the
/// best candidate is refined by coordinate descent with halving steps until no
/// perturbation of size `cfg.step` (angles, weights) or `cfg.position_step`
/// (feed coordinates) improves the gain.
pub fn find_max_gain_direction(
    layout: &SurfaceLayout,
    feeds: usize,
    min_feed_spacing: f64,
    em: &EmParams,
    cfg: &SearchConfig,
) -> Result<MaxGain> {
    let fb = FeedBox::of(layout, min_feed_spacing);
    let lattice = fb.lattice(feeds)?;
    let mut starts = vec![(lattice, vec![1.0 / feeds as f64; feeds])];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.restarts {
        let f = fb.random(feeds, &mut rng)?;
        let w = random_simplex(feeds, &mut rng);
        starts.push((f, w));
    }
    let dirs: Vec<(f64, f64)> = (0..cfg.coarse_phi.max(1))
        .flat_map(|j| {
            let phi = FRAC_PI_2 * (j as f64 + 0.5) / cfg.coarse_phi.max(1) as f64;
            (0..cfg.coarse_theta.max(1)).map(move |i| (-PI + 2.0 * PI * i as f64 / cfg.coarse_theta.max(1) as f64, phi))
        })
        .chain(std::iter::once((0.0, FRAC_PI_2)))
        .collect();
    let coarse: Vec<Candidate> = starts
        .par_iter()
        .map(|(f, w)| {
            let mut best = Candidate { theta: 0.0, phi: FRAC_PI_2, feeds: f.clone(), weights: w.clone(), gain: -1.0 };
            for &(t, p) in &dirs {
                let g = steered_gain(layout, f, w, direction_vector(t, p), em);
                if g > best.gain {
                    best.theta = t;
                    best.phi = p;
                    best.gain = g;
                }
            }
            best
        })
        .collect();
    // Refine the few best coarse candidates; keep the overall winner.
    let mut order: Vec<usize> = (0..coarse.len()).collect();
    order.sort_by(|&a, &b| coarse[b].gain.total_cmp(&coarse[a].gain).then(a.cmp(&b)));
    let top: Vec<usize> = order.into_iter().take(4).collect();
    let ang0 = PI / cfg.coarse_theta.max(4) as f64;
    let pos0 = layout.spacing.max(cfg.position_step);
    let refined: Vec<Candidate> = top
        .par_iter()
        .map(|&i| {
            let c0 = &coarse[i];
            let mut c = Candidate {
                theta: c0.theta,
                phi: c0.phi,
                feeds: c0.feeds.clone(),
                weights: c0.weights.clone(),
                gain: c0.gain,
            };
            let (mut ang, mut pos) = (ang0, pos0);
            loop {
                while sweep(layout, &fb, &mut c, em, ang, pos) {}
                if ang <= cfg.step && pos <= cfg.position_step {
                    break;
                }
                ang = (ang / 2.0).max(cfg.step);
                pos = (pos / 2.0).max(cfg.position_step);
            }
            c
        })
        .collect();
    let best = refined
        .into_iter()
        .reduce(|a, b| if b.gain > a.gain { b } else { a })
        .expect("at least one start");
    let direction = direction_vector(best.theta, best.phi);
    let (theta, phi) = angles_of(direction);
    Ok(MaxGain { direction, theta, phi, feeds: best.feeds, weights: best.weights, gain: best.gain })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::steering;
    use crate::geometry::{rodrigues, SurfacePose};

    const LAMBDA: f64 = 0.01;

    fn params() -> EmParams {
        EmParams { efficiency: 1.0, refractive: 3.0, wavelength: LAMBDA }
    }

    fn layout(n: usize, feeds: Vec<Vec3>) -> SurfaceLayout {
        SurfaceLayout::new(n, n, LAMBDA / 2.0, feeds).unwrap()
    }

    #[test]
    fn em_response_examples() {
        let l = layout(4, vec![Vec3::new(LAMBDA / 2.0, LAMBDA / 2.0, 0.0)]);
        let em = em_response(&l, 0.8, 3.0, LAMBDA);
        // element (1,1) sits on the feed
        assert!((em.get(5, 0) - C64::new(0.8f64.sqrt(), 0.0)).norm() < 1e-15);
        for m in 0..16 {
            assert!((em.get(m, 0).norm() - 0.8f64.sqrt()).abs() < 1e-14);
        }
        // (0,1) and (1,0) are equidistant from the feed
        assert!((em.get(1, 0) - em.get(4, 0)).norm() < 1e-14);
    }

    #[test]
    fn hologram_examples() {
        let l = layout(1, vec![Vec3::ZERO]);
        let em = em_response(&l, 1.0, 3.0, LAMBDA);
        let h = holo_beamformer(Vec3::E3, &em, &[1.0], &l, LAMBDA).unwrap();
        assert!((h.psi[0] - 1.0).abs() < 1e-15);

        let l2 = layout(6, vec![Vec3::new(0.01, 0.012, 0.0), Vec3::new(0.02, 0.005, 0.0)]);
        let em2 = em_response(&l2, 1.0, 3.0, LAMBDA);
        let dir = direction_vector(0.3, 0.9);
        let two = holo_beamformer(dir, &em2, &[1.0, 0.0], &l2, LAMBDA).unwrap();
        let l1 = layout(6, vec![l2.feeds[0]]);
        let one = holo_beamformer(dir, &em_response(&l1, 1.0, 3.0, LAMBDA), &[1.0], &l1, LAMBDA).unwrap();
        for (a, b) in two.psi.iter().zip(&one.psi) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(two.psi.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert!(holo_beamformer(dir, &em2, &[0.7, 0.7], &l2, LAMBDA).is_err());
    }

    #[test]
    fn zero_hologram_has_zero_gain() {
        let l = layout(4, vec![Vec3::ZERO]);
        let em = em_response(&l, 1.0, 3.0, LAMBDA);
        let psi = HoloBeamformer { psi: vec![0.0; 16], weights: vec![1.0] };
        assert_eq!(beam_gain(&psi, &em, &steering_local(&l, Vec3::E3, LAMBDA)), 0.0);
    }

    #[test]
    fn steered_gain_matches_matrix_form() {
        let l = layout(8, vec![Vec3::new(0.013, 0.021, 0.0), Vec3::new(0.03, 0.01, 0.0)]);
        let em = em_response(&l, 0.9, 3.0, LAMBDA);
        let w = [0.3, 0.7];
        let dir = direction_vector(-1.2, 0.7);
        let h = holo_beamformer(dir, &em, &w, &l, LAMBDA).unwrap();
        let g = beam_gain(&h, &em, &steering_local(&l, dir, LAMBDA));
        let p = EmParams { efficiency: 0.9, ..params() };
        let fast = steered_gain(&l, &l.feeds, &w, dir, &p);
        assert!((g - fast).abs() < 1e-10 * g);
    }

    #[test]
    fn gain_ignores_global_phase_of_steering() {
        let l = layout(6, vec![Vec3::new(0.01, 0.01, 0.0)]);
        let em = em_response(&l, 1.0, 3.0, LAMBDA);
        let dir = direction_vector(0.5, 1.0);
        let h = holo_beamformer(dir, &em, &[1.0], &l, LAMBDA).unwrap();
        let a = steering_local(&l, dir, LAMBDA);
        let rot: Vec<C64> = a.iter().map(|v| v * C64::from_polar(1.0, 1.234)).collect();
        assert!((beam_gain(&h, &em, &a) - beam_gain(&h, &em, &rot)).abs() < 1e-12);
    }

    #[test]
    fn local_hologram_gain_is_pose_invariant() {
        let l = layout(6, vec![Vec3::new(0.01, 0.02, 0.0)]);
        let em = em_response(&l, 1.0, 3.0, LAMBDA);
        let u_local = direction_vector(0.2, 1.1);
        let h = holo_beamformer(u_local, &em, &[1.0], &l, LAMBDA).unwrap();
        let g0 = beam_gain(&h, &em, &steering_local(&l, u_local, LAMBDA));
        let pose = SurfacePose::at(rodrigues(Vec3::new(0.0, 0.6, 0.8), 0.9).unwrap(), Vec3::new(0.4, -0.7, 0.3));
        let g1 = beam_gain(&h, &em, &steering(&pose, &l, pose.rotation.apply(u_local), LAMBDA));
        assert!((g0 - g1).abs() < 1e-10);
    }

    #[test]
    fn broadside_beam_beats_sixty_degree_offset() {
        let l = layout(32, vec![Vec3::new(0.0775, 0.0775, 0.0)]);
        let em = em_response(&l, 1.0, 3.0, LAMBDA);
        let h = holo_beamformer(Vec3::E3, &em, &[1.0], &l, LAMBDA).unwrap();
        let on = beam_gain(&h, &em, &steering_local(&l, Vec3::E3, LAMBDA));
        let off = beam_gain(&h, &em, &steering_local(&l, direction_vector(0.0, FRAC_PI_2 - PI / 3.0), LAMBDA));
        assert!(on > off, "{on} vs {off}");
    }

    #[test]
    fn single_element_gain_is_direction_free() {
        let l = layout(1, vec![]);
        let r = find_max_gain_direction(&l, 1, LAMBDA / 2.0, &params(), &SearchConfig { restarts: 2, ..Default::default() })
            .unwrap();
        assert!((r.gain - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_feeds_is_infeasible() {
        let l = layout(2, vec![]);
        let e = find_max_gain_direction(&l, 5, LAMBDA / 2.0, &params(), &SearchConfig::default()).unwrap_err();
        assert!(e.is_infeasible());
    }

    #[test]
    fn search_beats_centered_broadside_and_is_local_max() {
        let l = layout(8, vec![]);
        let cfg = SearchConfig { restarts: 8, ..Default::default() };
        let r = find_max_gain_direction(&l, 1, LAMBDA / 2.0, &params(), &cfg).unwrap();
        let center = l.aperture_center();
        let base = steered_gain(&l, &[center], &[1.0], Vec3::E3, &params());
        assert!(r.gain >= base);
        let again = find_max_gain_direction(&l, 1, LAMBDA / 2.0, &params(), &cfg).unwrap();
        assert_eq!(r, again);
        let (t, p) = (r.direction.y.atan2(r.direction.x), r.direction.z.asin());
        for (dt, dp) in [(cfg.step, 0.0), (-cfg.step, 0.0), (0.0, cfg.step), (0.0, -cfg.step)] {
            let g = steered_gain(&l, &r.feeds, &r.weights, direction_vector(t + dt, (p + dp).min(FRAC_PI_2)), &params());
            assert!(g <= r.gain + 1e-9);
        }
    }

    #[test]
    fn lattice_respects_spacing() {
        let fb = FeedBox { width: 0.05, height: 0.05, min_spacing: 0.005 };
        let f = fb.lattice(9).unwrap();
        assert!(fb.admits(&f));
    }
}
