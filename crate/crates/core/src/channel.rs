//! Rician multipath channel between receivers and surfaces.
//!
//! Path angles are seen from the base station at the origin and shared by all
//! surfaces (far field). Complex gains are drawn per (receiver, path, surface).
//! The antenna-gain mask depends on the pose, so it is evaluated on demand.

use crate::error::{Error, Result};
use crate::geometry::{SurfaceLayout, SurfacePose};
use crate::math::{Vec3, C64};
use crate::rhs::{EmResponse, HoloBeamformer};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// f(θ, φ) = [cosθ cosφ, sinθ cosφ, sinφ].
pub fn direction_vector(theta: f64, phi: f64) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(ct * cp, st * cp, sp)
}

/// Inverse of [`direction_vector`] for a unit vector.
pub fn angles_of(f: Vec3) -> (f64, f64) {
    (f.y.atan2(f.x), f.z.clamp(-1.0, 1.0).asin())
}

/// Unit-norm steering vector at element positions `r`: entries e^{j k fᵀr}/√M.
pub fn steering_at(points: &[Vec3], dir: Vec3, wavelength: f64) -> Vec<C64> {
    let k = 2.0 * PI / wavelength;
    let s = 1.0 / (points.len() as f64).sqrt();
    points.iter().map(|r| C64::from_polar(s, k * dir.dot(*r))).collect()
}

/// Steering vector of a posed surface toward global direction `dir`.
pub fn steering(pose: &SurfacePose, layout: &SurfaceLayout, dir: Vec3, wavelength: f64) -> Vec<C64> {
    let pts: Vec<Vec3> = layout.local_elements().into_iter().map(|r| pose.to_global(r)).collect();
    steering_at(&pts, dir, wavelength)
}

/// Steering vector in the surface's own frame (no translation phase).
pub fn steering_local(layout: &SurfaceLayout, dir_local: Vec3, wavelength: f64) -> Vec<C64> {
    steering_at(&layout.local_elements(), dir_local, wavelength)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskRule {
    /// Path visible when q_bᵀf > 0.
    #[default]
    Position,
    /// Path visible when n_bᵀf > 0.
    Normal,
}

impl MaskRule {
    pub fn visible(self, pose: &SurfacePose, dir: Vec3) -> bool {
        match self {
            MaskRule::Position => pose.position.dot(dir) > 0.0,
            MaskRule::Normal => pose.normal().dot(dir) > 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    pub theta: f64,
    pub phi: f64,
    pub eta: C64,
    pub is_los: bool,
}

impl PathComponent {
    pub fn direction(&self) -> Vec3 {
        direction_vector(self.theta, self.phi)
    }
}

/// Paths from one receiver to one surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub path_loss: f64,
    pub paths: Vec<PathComponent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReceiverPlacement {
    pub r_min: f64,
    pub r_max: f64,
    pub height: f64,
    /// Minimum azimuth separation between receivers, degrees.
    pub min_separation_deg: f64,
    /// Receiver k draws its azimuth from the sector of width 2π/K centered on 2πk/K.
    pub sectored: bool,
}

impl Default for ReceiverPlacement {
    fn default() -> Self {
        ReceiverPlacement { r_min: 5.0, r_max: 25.0, height: 0.0, min_separation_deg: 30.0, sectored: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub receivers: usize,
    pub surfaces: usize,
    pub nlos_paths: usize,
    /// Linear Rician factor.
    pub rician_k: f64,
    pub wavelength: f64,
    pub path_loss_exponent: f64,
    pub placement: ReceiverPlacement,
    /// Fixed receiver positions; drawn from `placement` when `None`.
    pub positions: Option<Vec<Vec3>>,
    pub mask: MaskRule,
    pub path_loss_reference: PathLossReference,
}

/// Point from which the path loss Ω of a link is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathLossReference {
    /// Base station at the origin; Ω is the same for every surface.
    Origin,
    /// Center of the surface in its current pose.
    #[default]
    Surface,
}

/// One draw of the multipath channel for every (receiver, surface) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub wavelength: f64,
    pub rician_k: f64,
    pub mask: MaskRule,
    pub receivers: Vec<Vec3>,
    /// Indexed `[k][b]`.
    pub links: Vec<Vec<Link>>,
    #[serde(default)]
    pub path_loss_exponent: f64,
    #[serde(default)]
    pub path_loss_reference: PathLossReference,
}

/// Path loss (λ/4π)² d^{-n}; free space for n = 2.
pub fn path_loss(wavelength: f64, distance: f64, exponent: f64) -> f64 {
    (wavelength / (4.0 * PI)).powi(2) * distance.powf(-exponent)
}

pub fn complex_normal(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn draw_positions(cfg: &ChannelConfig, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let p = &cfg.placement;
    let min_sep = p.min_separation_deg.to_radians();
    let mut az: Vec<f64> = Vec::with_capacity(cfg.receivers);
    let mut out = Vec::with_capacity(cfg.receivers);
    while out.len() < cfg.receivers {
        let mut tries = 0;
        loop {
            let a = if p.sectored {
                let w = 2.0 * PI / cfg.receivers as f64;
                w * out.len() as f64 + rng.gen_range(-w / 2.0..w / 2.0)
            } else {
                rng.gen_range(-PI..PI)
            };
            let r = rng.gen_range(p.r_min * p.r_min..=p.r_max * p.r_max).sqrt();
            tries += 1;
            let ok = az.iter().all(|&b| {
                let d = (a - b).rem_euclid(2.0 * PI);
                d.min(2.0 * PI - d) >= min_sep
            });
            if ok || tries > 1000 {
                az.push(a);
                out.push(Vec3::new(r * a.cos(), r * a.sin(), p.height));
                break;
            }
        }
    }
    out
}

/// Draws a channel realization; deterministic in `seed`.
pub fn draw_channel(cfg: &ChannelConfig, seed: u64) -> Result<ChannelRealization> {
    if cfg.rician_k < 0.0 {
        return Err(Error::invalid("Rician factor must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let receivers = match &cfg.positions {
        Some(p) if p.len() == cfg.receivers => p.clone(),
        Some(_) => return Err(Error::invalid("receiver position count mismatch")),
        None => draw_positions(cfg, &mut rng),
    };
    let los_amp = (cfg.rician_k / (cfg.rician_k + 1.0)).sqrt();
    let nlos_amp = (1.0 / (cfg.rician_k + 1.0)).sqrt();
    let mut links = Vec::with_capacity(cfg.receivers);
    for pos in &receivers {
        let dist = pos.norm();
        let omega = path_loss(cfg.wavelength, dist, cfg.path_loss_exponent);
        let los_dir = pos.normalized().ok_or_else(|| Error::invalid("receiver at the origin"))?;
        let (lt, lp) = angles_of(los_dir);
        let mut angles = vec![(lt, lp)];
        for _ in 0..cfg.nlos_paths {
            let z: f64 = rng.gen_range(0.0..1.0);
            let az = rng.gen_range(-PI..PI);
            angles.push((az, z.asin()));
        }
        let mut per_surface = Vec::with_capacity(cfg.surfaces);
        for _ in 0..cfg.surfaces {
            let paths = angles
                .iter()
                .enumerate()
                .map(|(i, &(theta, phi))| {
                    let eta = if i == 0 {
                        C64::new(los_amp * omega.sqrt(), 0.0)
                    } else {
                        complex_normal(&mut rng) * (nlos_amp * omega.sqrt())
                    };
                    PathComponent { theta, phi, eta, is_los: i == 0 }
                })
                .collect();
            per_surface.push(Link { path_loss: omega, paths });
        }
        links.push(per_surface);
    }
    Ok(ChannelRealization {
        wavelength: cfg.wavelength,
        rician_k: cfg.rician_k,
        mask: cfg.mask,
        receivers,
        links,
        path_loss_exponent: cfg.path_loss_exponent,
        path_loss_reference: cfg.path_loss_reference,
    })
}

impl ChannelRealization {
    pub fn num_receivers(&self) -> usize {
        self.links.len()
    }

    pub fn num_surfaces(&self) -> usize {
        self.links.first().map_or(0, |l| l.len())
    }

    /// Amplitude factor √(Ω at `position` / Ω at the origin) for receiver `k`.
    pub fn distance_factor(&self, k: usize, position: Vec3) -> f64 {
        match self.path_loss_reference {
            PathLossReference::Origin => 1.0,
            PathLossReference::Surface => {
                let r = self.receivers[k];
                (r.norm() / r.distance(position)).powf(self.path_loss_exponent / 2.0)
            }
        }
    }

    /// Λ for every path of link (k, b) at the given pose.
    pub fn mask_for(&self, k: usize, b: usize, pose: &SurfacePose) -> Vec<bool> {
        self.links[k][b].paths.iter().map(|p| self.mask.visible(pose, p.direction())).collect()
    }

    /// h_{k,b} = √M Σ Λ η a_b(θ, φ), length M.
    pub fn channel_vector(&self, k: usize, b: usize, pose: &SurfacePose, layout: &SurfaceLayout) -> Vec<C64> {
        let m = layout.elements();
        let local = layout.local_elements();
        let kw = 2.0 * PI / self.wavelength;
        let scale = self.distance_factor(k, pose.position);
        let mut h = vec![C64::new(0.0, 0.0); m];
        for p in &self.links[k][b].paths {
            let f = p.direction();
            if !self.mask.visible(pose, f) {
                continue;
            }
            // e^{jk fᵀ(q + R r̄)} = e^{jk fᵀq} e^{jk (Rᵀf)ᵀ r̄}; √M·(1/√M) cancels.
            let common = p.eta * scale * C64::from_polar(1.0, kw * f.dot(pose.position));
            let fl = pose.rotation.apply_transpose(f);
            for (hm, r) in h.iter_mut().zip(&local) {
                *hm += common * C64::from_polar(1.0, kw * fl.dot(*r));
            }
        }
        h
    }

    /// Index of the path with the largest |Λη|² over all surfaces at the given poses.
    pub fn dominant_path(&self, k: usize, poses: &[SurfacePose]) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_p = -1.0;
        for (b, pose) in poses.iter().enumerate() {
            for (i, p) in self.links[k][b].paths.iter().enumerate() {
                let lam = if self.mask.visible(pose, p.direction()) { 1.0 } else { 0.0 };
                let pw = lam * (p.eta * self.distance_factor(k, pose.position)).norm_sqr();
                if pw > best_p {
                    best_p = pw;
                    best = (b, i);
                }
            }
        }
        best
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("channel serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }
}

/// h̄ = hᵀ diag(Ψ) Θ, one entry per feed.
pub fn equivalent_channel(h: &[C64], psi: &HoloBeamformer, em: &EmResponse) -> Result<Vec<C64>> {
    if h.len() != psi.psi.len() || h.len() != em.elements() {
        return Err(Error::invalid(format!(
            "dimension mismatch: h {} psi {} em {}",
            h.len(),
            psi.psi.len(),
            em.elements()
        )));
    }
    Ok((0..em.feeds())
        .map(|q| {
            em.column(q)
                .iter()
                .zip(h)
                .zip(&psi.psi)
                .map(|((t, hm), p)| hm * *p * t)
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{radial_rotation, rodrigues};
    use crate::math::RotationMatrix;
    use crate::rhs::{em_response, holo_beamformer};

    const LAMBDA: f64 = 0.01;

    fn cfg(k: usize, b: usize, rician: f64) -> ChannelConfig {
        ChannelConfig {
            receivers: k,
            surfaces: b,
            nlos_paths: 3,
            rician_k: rician,
            wavelength: LAMBDA,
            path_loss_exponent: 2.0,
            placement: ReceiverPlacement::default(),
            positions: None,
            mask: MaskRule::Position,
            path_loss_reference: PathLossReference::Origin,
        }
    }

    #[test]
    fn surface_reference_favors_the_nearer_surface() {
        let mut c = cfg(1, 2, 10.0);
        c.positions = Some(vec![Vec3::new(10.0, 0.0, 0.0)]);
        c.path_loss_reference = PathLossReference::Surface;
        let ch = draw_channel(&c, 3).unwrap();
        let near = ch.distance_factor(0, Vec3::E1);
        let far = ch.distance_factor(0, -Vec3::E1);
        assert!((near - 10.0 / 9.0).abs() < 1e-12);
        assert!((far - 10.0 / 11.0).abs() < 1e-12);
        c.path_loss_reference = PathLossReference::Origin;
        assert_eq!(draw_channel(&c, 3).unwrap().distance_factor(0, Vec3::E1), 1.0);
    }

    #[test]
    fn sectored_receivers_stay_in_their_sector() {
        let c = cfg(4, 1, 10.0);
        for seed in 0..50 {
            let ch = draw_channel(&c, seed).unwrap();
            for (k, r) in ch.receivers.iter().enumerate() {
                let center = PI / 2.0 * k as f64;
                let d = (r.y.atan2(r.x) - center + PI).rem_euclid(2.0 * PI) - PI;
                assert!(d.abs() <= PI / 4.0 + 1e-12, "receiver {k} off by {d}");
            }
        }
    }

    #[test]
    fn direction_examples() {
        let f = direction_vector(0.0, 0.0);
        assert!((f - Vec3::E1).norm() < 1e-15);
        assert!((direction_vector(PI / 2.0, 0.0) - Vec3::E2).norm() < 1e-15);
        assert!((direction_vector(1.234, PI / 2.0) - Vec3::E3).norm() < 1e-15);
        let (t, p) = angles_of(direction_vector(-2.0, 0.4));
        assert!((t + 2.0).abs() < 1e-14 && (p - 0.4).abs() < 1e-14);
    }

    #[test]
    fn steering_examples() {
        let one = SurfaceLayout::new(1, 1, LAMBDA / 2.0, vec![]).unwrap();
        let a = steering(&SurfacePose::identity(), &one, Vec3::new(0.6, 0.0, 0.8), LAMBDA);
        assert!((a[0] - C64::new(1.0, 0.0)).norm() < 1e-15);

        let l = SurfaceLayout::new(4, 5, LAMBDA / 2.0, vec![]).unwrap();
        let a = steering(&SurfacePose::identity(), &l, Vec3::E3, LAMBDA);
        for v in &a {
            assert!((v - C64::new(1.0 / 20f64.sqrt(), 0.0)).norm() < 1e-15);
        }
        let pose = SurfacePose::at(rodrigues(Vec3::E2, 0.7).unwrap(), Vec3::new(0.2, 0.5, 0.1));
        let a = steering(&pose, &l, direction_vector(0.3, -0.2), LAMBDA);
        let n: f64 = a.iter().map(|v| v.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn steering_entry_order_is_mx_major() {
        let l = SurfaceLayout::new(3, 2, 0.004, vec![]).unwrap();
        let dir = direction_vector(0.4, 0.3);
        let a = steering(&SurfacePose::identity(), &l, dir, LAMBDA);
        let k = 2.0 * PI / LAMBDA;
        let idx = 2 * 2 + 1;
        let r = Vec3::new(2.0 * 0.004, 0.004, 0.0);
        let want = C64::from_polar(1.0 / 6f64.sqrt(), k * dir.dot(r));
        assert!((a[idx] - want).norm() < 1e-14);
    }

    #[test]
    fn large_rician_factor_suppresses_nlos() {
        let ch = draw_channel(&cfg(3, 3, 1e9), 5).unwrap();
        for link in ch.links.iter().flatten() {
            let los = link.paths[0].eta.norm();
            for p in &link.paths[1..] {
                assert!(p.eta.norm() < 1e-4 * los);
            }
        }
    }

    #[test]
    fn los_gain_and_angles() {
        let ch = draw_channel(&cfg(2, 2, 10.0), 9).unwrap();
        for (k, links) in ch.links.iter().enumerate() {
            let los_dir = ch.receivers[k].normalized().unwrap();
            for link in links {
                let p = &link.paths[0];
                assert!(p.is_los);
                assert!((p.direction() - los_dir).norm() < 1e-12);
                let want = (10.0f64 / 11.0).sqrt() * link.path_loss.sqrt();
                assert!((p.eta.re - want).abs() < 1e-18 && p.eta.im == 0.0);
                assert_eq!(link.paths.len(), 4);
            }
        }
    }

    #[test]
    fn path_loss_doubling_is_six_db() {
        let r = path_loss(LAMBDA, 10.0, 2.0) / path_loss(LAMBDA, 20.0, 2.0);
        assert!((10.0 * r.log10() - 6.0206).abs() < 1e-3);
    }

    #[test]
    fn same_seed_same_channel() {
        let a = draw_channel(&cfg(3, 3, 2.0), 77).unwrap();
        let b = draw_channel(&cfg(3, 3, 2.0), 77).unwrap();
        assert_eq!(a, b);
        let c = draw_channel(&cfg(3, 3, 2.0), 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn json_round_trip() {
        let a = draw_channel(&cfg(2, 3, 2.0), 1).unwrap();
        let b = ChannelRealization::from_json(&a.to_json()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn receivers_respect_annulus_and_separation() {
        let ch = draw_channel(&cfg(3, 1, 1.0), 3).unwrap();
        for (i, p) in ch.receivers.iter().enumerate() {
            let r = p.norm();
            assert!((5.0..=25.0).contains(&r));
            for q in &ch.receivers[i + 1..] {
                let d = (p.y.atan2(p.x) - q.y.atan2(q.x)).rem_euclid(2.0 * PI);
                assert!(d.min(2.0 * PI - d) >= 30f64.to_radians() - 1e-12);
            }
        }
    }

    #[test]
    fn receiver_behind_surface_sees_nothing() {
        let mut c = cfg(1, 1, 1e9);
        c.nlos_paths = 0;
        c.positions = Some(vec![Vec3::new(-10.0, 0.0, 0.0)]);
        let ch = draw_channel(&c, 0).unwrap();
        let q = Vec3::new(1.0, 0.0, 0.0);
        let pose = SurfacePose::at(radial_rotation(q), q);
        let l = SurfaceLayout::new(4, 4, LAMBDA / 2.0, vec![]).unwrap();
        let h = ch.channel_vector(0, 0, &pose, &l);
        assert!(h.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn channel_second_moment_matches_visible_paths() {
        // E‖h‖² = M Σ_visible E|η|² when path directions are distinct.
        let l = SurfaceLayout::new(4, 4, LAMBDA / 2.0, vec![]).unwrap();
        let mut c = cfg(1, 1, 1.0);
        c.positions = Some(vec![Vec3::new(8.0, 6.0, 0.0)]);
        let pose = SurfacePose::at(RotationMatrix::IDENTITY, Vec3::new(0.0, 0.0, 1.0));
        let trials = 10_000;
        let mut acc = 0.0;
        let mut want = 0.0;
        for s in 0..trials {
            let ch = draw_channel(&c, s).unwrap();
            let h = ch.channel_vector(0, 0, &pose, &l);
            acc += h.iter().map(|v| v.norm_sqr()).sum::<f64>();
            let link = &ch.links[0][0];
            let mask = ch.mask_for(0, 0, &pose);
            let omega = link.path_loss;
            // K_R = 1: each path carries Ω/2 on average; M = 16 elements.
            want += 16.0 * mask.iter().filter(|v| **v).count() as f64 * omega * 0.5;
        }
        let ratio = acc / want;
        assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn equivalent_channel_examples() {
        let l = SurfaceLayout::new(4, 4, LAMBDA / 2.0, vec![Vec3::new(0.007, 0.008, 0.0)]).unwrap();
        let em = em_response(&l, 1.0, 3.0, LAMBDA);
        let h: Vec<C64> = (0..16).map(|i| C64::new(i as f64, 1.0)).collect();
        let zero = HoloBeamformer { psi: vec![0.0; 16], weights: vec![1.0] };
        assert!(equivalent_channel(&h, &zero, &em).unwrap().iter().all(|v| v.norm() == 0.0));
        assert!(equivalent_channel(&h[..3], &zero, &em).is_err());

        let mut c = cfg(1, 1, 1e9);
        c.nlos_paths = 0;
        c.positions = Some(vec![Vec3::new(3.0, 4.0, 12.0)]);
        let ch = draw_channel(&c, 2).unwrap();
        let pose = SurfacePose::at(rodrigues(Vec3::E1, 0.2).unwrap(), Vec3::new(0.0, 0.0, 1.0));
        let psi = holo_beamformer(direction_vector(0.3, 1.0), &em, &[1.0], &l, LAMBDA).unwrap();
        let hb = equivalent_channel(&ch.channel_vector(0, 0, &pose, &l), &psi, &em).unwrap();
        let eta = ch.links[0][0].paths[0].eta;
        let a = steering(&pose, &l, ch.links[0][0].paths[0].direction(), LAMBDA);
        let direct: C64 = (0..16).map(|m| a[m] * psi.psi[m] * em.get(m, 0)).sum::<C64>() * eta * 4.0;
        assert!((hb[0] - direct).norm() <= 1e-12 * direct.norm().max(1e-30));
    }
}
