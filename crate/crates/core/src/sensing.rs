//! Holographic uplink sensing on the border elements of each surface.
//!
//! Each border element mixes the uplink pilot with a strong reference wave and
//! reports only a power reading. Exciting the readings with the reference
//! recovers a phase-bearing image whose 2D spatial spectrum peaks at the
//! arrival direction.

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::geometry::{SurfaceLayout, SurfacePose};
use crate::math::{Vec3, C64};
use crate::rhs::EmResponse;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Border sensing grid centered on the aperture, local frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingLayout {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    pub center: Vec3,
}

impl SensingLayout {
    pub fn new(nx: usize, ny: usize, spacing: f64, center: Vec3) -> Result<Self> {
        if nx < 2 || ny < 2 || !(spacing > 0.0) {
            return Err(Error::invalid("sensing grid needs nx, ny >= 2 and positive spacing"));
        }
        Ok(SensingLayout { nx, ny, spacing, center })
    }

    /// Centered on the element aperture of `surface`.
    pub fn around(surface: &SurfaceLayout, nx: usize, ny: usize, spacing: f64) -> Result<Self> {
        SensingLayout::new(nx, ny, spacing, surface.aperture_center())
    }

    pub fn count(&self) -> usize {
        2 * self.nx + 2 * self.ny - 4
    }

    pub fn is_border(&self, ix: usize, iy: usize) -> bool {
        ix == 0 || iy == 0 || ix + 1 == self.nx || iy + 1 == self.ny
    }

    pub fn position(&self, ix: usize, iy: usize) -> Vec3 {
        self.center
            + Vec3::new(
                (ix as f64 - (self.nx as f64 - 1.0) / 2.0) * self.spacing,
                (iy as f64 - (self.ny as f64 - 1.0) / 2.0) * self.spacing,
                0.0,
            )
    }

    /// Flat indices (ix·ny + iy) of the border elements.
    pub fn border_indices(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.count());
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                if self.is_border(ix, iy) {
                    v.push(ix * self.ny + iy);
                }
            }
        }
        v
    }
}

/// Dense nx×ny complex matrix (row-major, index ix·ny + iy).
pub type Grid = Vec<C64>;

/// Border uplink channel Σ Λ η e^{j k f_Lᵀ r} for receiver `k` at surface `b`.
pub fn border_channel(
    ch: &ChannelRealization,
    k: usize,
    b: usize,
    pose: &SurfacePose,
    layout: &SensingLayout,
) -> Grid {
    let kw = 2.0 * PI / ch.wavelength;
    let mut g = vec![C64::new(0.0, 0.0); layout.nx * layout.ny];
    let scale = ch.distance_factor(k, pose.position);
    for p in &ch.links[k][b].paths {
        let f = p.direction();
        if !ch.mask.visible(pose, f) {
            continue;
        }
        let fl = pose.rotation.apply_transpose(f);
        for ix in 0..layout.nx {
            for iy in 0..layout.ny {
                if layout.is_border(ix, iy) {
                    g[ix * layout.ny + iy] += p.eta * scale * C64::from_polar(1.0, kw * fl.dot(layout.position(ix, iy)));
                }
            }
        }
    }
    g
}

/// Reference wave s^ref = √A e^{j 2π χ}, χ ~ U(−σ₁, σ₁), on border elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceField {
    pub power: f64,
    pub values: Grid,
}

impl ReferenceField {
    pub fn draw(layout: &SensingLayout, power: f64, spread: f64, rng: &mut impl Rng) -> Self {
        let amp = power.sqrt();
        let mut values = vec![C64::new(0.0, 0.0); layout.nx * layout.ny];
        for i in layout.border_indices() {
            let chi = if spread > 0.0 { rng.gen_range(-spread..spread) } else { 0.0 };
            values[i] = C64::from_polar(amp, 2.0 * PI * chi);
        }
        ReferenceField { power, values }
    }
}

/// Power-meter values |√P_S h + z + s^ref|² on the border, 0 inside.
pub fn meter_readings(
    uplink: &Grid,
    reference: &ReferenceField,
    layout: &SensingLayout,
    pilot_power: f64,
    noise_var: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let sp = pilot_power.sqrt();
    let sn = (noise_var / 2.0).sqrt();
    let mut out = vec![0.0; uplink.len()];
    for i in layout.border_indices() {
        let z = if noise_var > 0.0 {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im) * sn
        } else {
            C64::new(0.0, 0.0)
        };
        out[i] = (uplink[i] * sp + z + reference.values[i]).norm_sqr();
    }
    out
}

/// Holographic image 𝓗 = (reading − A)·s^ref on the border, 0 inside.
pub fn excite(readings: &[f64], reference: &ReferenceField, layout: &SensingLayout) -> Grid {
    let mut h = vec![C64::new(0.0, 0.0); readings.len()];
    for i in layout.border_indices() {
        h[i] = reference.values[i] * (readings[i] - reference.power);
    }
    h
}

/// (1/N) Σ e^{−j k fᵀ r} 𝓗 over the border at local direction `f`.
pub fn correlate(image: &Grid, layout: &SensingLayout, f: Vec3, wavelength: f64) -> C64 {
    let kw = 2.0 * PI / wavelength;
    let mut acc = C64::new(0.0, 0.0);
    for ix in 0..layout.nx {
        for iy in 0..layout.ny {
            if layout.is_border(ix, iy) {
                acc += image[ix * layout.ny + iy] * C64::from_polar(1.0, -kw * f.dot(layout.position(ix, iy)));
            }
        }
    }
    acc / layout.count() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinMapping {
    /// f₁ = λ k_x / (P N_x d_S) with centered k.
    #[default]
    Standard,
    /// The printed closed form ((2n − N + 1) d_S / (2Nλ), axes swapped), unpadded only.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleEstimate {
    pub local: Vec3,
    pub global: Vec3,
    pub surface: usize,
    /// Centered spatial-frequency bin (k_x, k_y) on the padded grid.
    pub bin: (i64, i64),
    pub peak: f64,
}

fn centered(i: usize, n: usize) -> i64 {
    if i < n.div_ceil(2) {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Maps (f₁, f₂) onto the unit hemisphere, clamping to the unit disk.
pub fn lift(f1: f64, f2: f64) -> Vec3 {
    let r2 = f1 * f1 + f2 * f2;
    if r2 >= 1.0 {
        let r = r2.sqrt();
        Vec3::new(f1 / r, f2 / r, 0.0)
    } else {
        Vec3::new(f1, f2, (1.0 - r2).sqrt())
    }
}

/// In-place 2D forward FFT of a rows×cols row-major matrix.
pub fn fft2(data: &mut [C64], rows: usize, cols: usize, planner: &mut FftPlanner<f64>) {
    let row_fft = planner.plan_fft_forward(cols);
    for r in data.chunks_exact_mut(cols) {
        row_fft.process(r);
    }
    let col_fft = planner.plan_fft_forward(rows);
    let mut col = vec![C64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = data[r * cols + c];
        }
        col_fft.process(&mut col);
        for r in 0..rows {
            data[r * cols + c] = col[r];
        }
    }
}

/// Peak of |2D-DFT| of one zero-padded image: (magnitude, kx, ky).
pub fn spectrum_peak(image: &Grid, layout: &SensingLayout, pad: usize, planner: &mut FftPlanner<f64>) -> (f64, i64, i64) {
    let (px, py) = (layout.nx * pad, layout.ny * pad);
    let mut buf = vec![C64::new(0.0, 0.0); px * py];
    for ix in 0..layout.nx {
        for iy in 0..layout.ny {
            buf[ix * py + iy] = image[ix * layout.ny + iy];
        }
    }
    fft2(&mut buf, px, py, planner);
    let mut best = (-1.0, 0, 0);
    for i in 0..px {
        for j in 0..py {
            let m = buf[i * py + j].norm();
            if m > best.0 {
                best = (m, centered(i, px), centered(j, py));
            }
        }
    }
    best
}

/// Spatial frequency of centered bin k on a grid of `len` padded bins.
pub fn bin_frequency(k: i64, len: usize, spacing: f64, wavelength: f64) -> f64 {
    wavelength * k as f64 / (len as f64 * spacing)
}

/// 2D-FFT direction finding over one image per surface.
///
/// `rotations[b]` is the rotation of surface b while sensing; the estimate is
/// mapped to the global frame with the winning surface's rotation.
pub fn fft_detect(
    images: &[Grid],
    layout: &SensingLayout,
    poses: &[SurfacePose],
    pad: usize,
    wavelength: f64,
    mapping: BinMapping,
) -> Result<AngleEstimate> {
    let pad = pad.max(1);
    let mut planner = FftPlanner::new();
    let mut best: Option<(f64, i64, i64, usize)> = None;
    for (b, img) in images.iter().enumerate() {
        let (m, kx, ky) = spectrum_peak(img, layout, pad, &mut planner);
        if best.is_none_or(|x| m > x.0) {
            best = Some((m, kx, ky, b));
        }
    }
    let (peak, kx, ky, b) = best.ok_or_else(|| Error::NoDetection("no images".into()))?;
    if !(peak > 0.0) {
        return Err(Error::NoDetection("all-zero holographic image".into()));
    }
    let (f1, f2) = match mapping {
        BinMapping::Standard => (
            bin_frequency(kx, layout.nx * pad, layout.spacing, wavelength),
            bin_frequency(ky, layout.ny * pad, layout.spacing, wavelength),
        ),
        BinMapping::Literal => {
            let n = layout.count() as f64;
            let nxs = kx.rem_euclid((layout.nx * pad) as i64) as f64 / pad as f64;
            let nys = ky.rem_euclid((layout.ny * pad) as i64) as f64 / pad as f64;
            let s = layout.spacing / (2.0 * n * wavelength);
            ((2.0 * nys - layout.ny as f64 + 1.0) * s, (2.0 * nxs - layout.nx as f64 + 1.0) * s)
        }
    };
    let local = lift(f1, f2);
    Ok(AngleEstimate { local, global: poses[b].rotation.apply(local), surface: b, bin: (kx, ky), peak })
}

/// Brute-force correlation over candidate (f₁, f₂) points; returns the best index and magnitude.
pub fn matched_filter_oracle(image: &Grid, layout: &SensingLayout, grid: &[(f64, f64)], wavelength: f64) -> (usize, f64) {
    let kw = 2.0 * PI / wavelength;
    let pts: Vec<(usize, Vec3)> = layout
        .border_indices()
        .into_iter()
        .map(|i| (i, layout.position(i / layout.ny, i % layout.ny)))
        .collect();
    let mut best = (0, -1.0);
    for (g, &(f1, f2)) in grid.iter().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for &(i, r) in &pts {
            acc += image[i] * C64::from_polar(1.0, -kw * (f1 * r.x + f2 * r.y));
        }
        let m = acc.norm();
        if m > best.1 {
            best = (g, m);
        }
    }
    best
}

/// The FFT bin lattice of a padded grid as (f₁, f₂) points, with their centered bins.
pub fn bin_grid(layout: &SensingLayout, pad: usize, wavelength: f64) -> Vec<((i64, i64), (f64, f64))> {
    let (px, py) = (layout.nx * pad, layout.ny * pad);
    let mut v = Vec::with_capacity(px * py);
    for i in 0..px {
        for j in 0..py {
            let (kx, ky) = (centered(i, px), centered(j, py));
            v.push((
                (kx, ky),
                (bin_frequency(kx, px, layout.spacing, wavelength), bin_frequency(ky, py, layout.spacing, wavelength)),
            ));
        }
    }
    v
}

/// Parameters for one holographic snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub pilot_power: f64,
    pub noise_var: f64,
    pub reference_power: f64,
    pub phase_spread: f64,
}

/// Full holographic pipeline for receiver `k`: one image per surface, then FFT detection.
#[allow(clippy::too_many_arguments)]
pub fn sense_receiver(
    ch: &ChannelRealization,
    k: usize,
    poses: &[SurfacePose],
    layout: &SensingLayout,
    snap: &Snapshot,
    pad: usize,
    mapping: BinMapping,
    rng: &mut impl Rng,
) -> Result<AngleEstimate> {
    let images: Vec<Grid> = poses
        .iter()
        .enumerate()
        .map(|(b, pose)| {
            let up = border_channel(ch, k, b, pose, layout);
            let reference = ReferenceField::draw(layout, snap.reference_power, snap.phase_spread, rng);
            let r = meter_readings(&up, &reference, layout, snap.pilot_power, snap.noise_var, rng);
            excite(&r, &reference, layout)
        })
        .collect();
    fft_detect(&images, layout, poses, pad, ch.wavelength, mapping)
}

/// Mean of ‖f^e − f^t‖² (no outer square root).
pub fn rmse(estimates: &[Vec3], truths: &[Vec3]) -> Result<f64> {
    if estimates.is_empty() || estimates.len() != truths.len() {
        return Err(Error::invalid("rmse needs equal, non-empty lists"));
    }
    Ok(estimates.iter().zip(truths).map(|(e, t)| (*e - *t).dot(*e - *t)).sum::<f64>() / estimates.len() as f64)
}

/// Pilot holograms and dictionary for the feed-port least-squares baseline.
#[derive(Debug, Clone)]
pub struct LsSounder {
    /// Per pilot slot t, Ψ_t ∈ [0,1]^M.
    pub pilots: Vec<Vec<f64>>,
    /// Candidate (f₁, f₂) points inside the unit disk.
    pub grid: Vec<(f64, f64)>,
}

impl LsSounder {
    pub fn new(elements: usize, slots: usize, grid_side: usize, rng: &mut impl Rng) -> Result<Self> {
        if slots == 0 {
            return Err(Error::invalid("LS sounding needs at least one pilot slot"));
        }
        let pilots = (0..slots).map(|_| (0..elements).map(|_| rng.gen::<f64>()).collect()).collect();
        let mut grid = Vec::new();
        for i in 0..grid_side {
            for j in 0..grid_side {
                let f1 = -1.0 + 2.0 * (i as f64 + 0.5) / grid_side as f64;
                let f2 = -1.0 + 2.0 * (j as f64 + 0.5) / grid_side as f64;
                if f1 * f1 + f2 * f2 < 1.0 {
                    grid.push((f1, f2));
                }
            }
        }
        Ok(LsSounder { pilots, grid })
    }

    /// Feed-port observations y[t·Q + q] = √P_S Θ_qᵀ diag(Ψ_t) h + z.
    pub fn observe(&self, h: &[C64], em: &EmResponse, pilot_power: f64, noise_var: f64, rng: &mut impl Rng) -> Vec<C64> {
        let sp = pilot_power.sqrt();
        let sn = (noise_var / 2.0).sqrt();
        let mut y = Vec::with_capacity(self.pilots.len() * em.feeds());
        for psi in &self.pilots {
            for q in 0..em.feeds() {
                let s: C64 = em.column(q).iter().zip(h).zip(psi).map(|((t, hm), p)| t * hm * *p).sum();
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                y.push(s * sp + C64::new(re, im) * sn);
            }
        }
        y
    }

    /// Largest explained energy |d_gᴴ y|² / ‖d_g‖² over the grid, with its index.
    ///
    /// Dictionary columns d_g[t,q] = Σ_m Θ_q[m] Ψ_t[m] e^{j k (f₁x_m + f₂y_m)}
    /// are evaluated separably over the element rows and columns.
    pub fn best_fit(&self, y: &[C64], layout: &SurfaceLayout, em: &EmResponse, wavelength: f64) -> (usize, f64) {
        let kw = 2.0 * PI / wavelength;
        let (mx, my) = (layout.mx, layout.my);
        let f1s: Vec<f64> = {
            let mut v: Vec<f64> = self.grid.iter().map(|g| g.0).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let f2s: Vec<f64> = {
            let mut v: Vec<f64> = self.grid.iter().map(|g| g.1).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let ex: Vec<Vec<C64>> = f1s
            .iter()
            .map(|f| (0..mx).map(|i| C64::from_polar(1.0, kw * f * i as f64 * layout.spacing)).collect())
            .collect();
        let ey: Vec<Vec<C64>> = f2s
            .iter()
            .map(|f| (0..my).map(|i| C64::from_polar(1.0, kw * f * i as f64 * layout.spacing)).collect())
            .collect();
        let n_obs = y.len();
        let mut num = vec![C64::new(0.0, 0.0); f1s.len() * f2s.len()];
        let mut den = vec![0.0; f1s.len() * f2s.len()];
        let mut inner = vec![C64::new(0.0, 0.0); mx * f2s.len()];
        for (t, psi) in self.pilots.iter().enumerate() {
            for q in 0..em.feeds() {
                let idx = t * em.feeds() + q;
                if idx >= n_obs {
                    break;
                }
                let col = em.column(q);
                for ix in 0..mx {
                    for (j2, e2) in ey.iter().enumerate() {
                        let mut s = C64::new(0.0, 0.0);
                        for iy in 0..my {
                            let m = ix * my + iy;
                            s += col[m] * psi[m] * e2[iy];
                        }
                        inner[ix * f2s.len() + j2] = s;
                    }
                }
                for (j1, e1) in ex.iter().enumerate() {
                    for j2 in 0..f2s.len() {
                        let mut d = C64::new(0.0, 0.0);
                        for ix in 0..mx {
                            d += e1[ix] * inner[ix * f2s.len() + j2];
                        }
                        let cell = j1 * f2s.len() + j2;
                        num[cell] += d.conj() * y[idx];
                        den[cell] += d.norm_sqr();
                    }
                }
            }
        }
        let mut best = (0, -1.0);
        for (g, &(f1, f2)) in self.grid.iter().enumerate() {
            let j1 = f1s.binary_search_by(|v| v.total_cmp(&f1)).unwrap();
            let j2 = f2s.binary_search_by(|v| v.total_cmp(&f2)).unwrap();
            let cell = j1 * f2s.len() + j2;
            let score = if den[cell] > 0.0 { num[cell].norm_sqr() / den[cell] } else { 0.0 };
            if score > best.1 {
                best = (g, score);
            }
        }
        best
    }
}

/// LS direction finding for receiver `k` across all surfaces.
#[allow(clippy::too_many_arguments)]
pub fn ls_baseline_detect(
    ch: &ChannelRealization,
    k: usize,
    poses: &[SurfacePose],
    layout: &SurfaceLayout,
    em: &EmResponse,
    sounder: &LsSounder,
    pilot_power: f64,
    noise_var: f64,
    rng: &mut impl Rng,
) -> Result<AngleEstimate> {
    if em.feeds() == 0 {
        return Err(Error::invalid("LS sensing needs at least one feed"));
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for (b, pose) in poses.iter().enumerate() {
        let h = ch.channel_vector(k, b, pose, layout);
        let y = sounder.observe(&h, em, pilot_power, noise_var, rng);
        let (g, score) = sounder.best_fit(&y, layout, em, ch.wavelength);
        if best.is_none_or(|x| score > x.0) {
            best = Some((score, g, b));
        }
    }
    let (peak, g, b) = best.ok_or_else(|| Error::NoDetection("no surfaces".into()))?;
    if !(peak > 0.0) {
        return Err(Error::NoDetection("zero feed signal".into()));
    }
    let (f1, f2) = sounder.grid[g];
    let local = lift(f1, f2);
    Ok(AngleEstimate { local, global: poses[b].rotation.apply(local), surface: b, bin: (g as i64, 0), peak })
}
