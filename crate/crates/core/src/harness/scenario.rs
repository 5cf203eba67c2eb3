//! Scenario configuration. Powers are given in dBm (noise and transmit) and
//! converted to watts on use; lengths that scale with the carrier are given
//! in wavelengths.

use crate::channel::{ChannelConfig, MaskRule, PathLossReference, ReceiverPlacement};
use crate::error::{Error, Result};
use crate::idet::{EhCurve, FpOptions, Noise};
use crate::math::{db_to_linear, dbm_to_watt, SPEED_OF_LIGHT};
use crate::geometry::SlotTable;
use crate::math::Vec3;
use crate::orientation::{HologramPhase, OrientationOptions};
use crate::rhs::SearchConfig;
use crate::sensing::BinMapping;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Pipeline variant evaluated by a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    /// Holographic sensing, sensed rotations and slot selection.
    #[default]
    Proposed,
    /// Fixed sphere positions with radial normals.
    Fpa,
    /// Fixed positions, sensed rotations.
    RotationOnly,
    /// Slot selection with radial normals.
    TranslationOnly,
    /// Feed-port least-squares sensing feeding the proposed orientation.
    LsSensing,
    /// True dominant path, full-CSI pilot overhead.
    PerfectCsi,
    /// True line-of-sight path.
    LosOnly,
}

impl SchemeId {
    pub const ALL: [SchemeId; 7] = [
        SchemeId::Proposed,
        SchemeId::Fpa,
        SchemeId::RotationOnly,
        SchemeId::TranslationOnly,
        SchemeId::LsSensing,
        SchemeId::PerfectCsi,
        SchemeId::LosOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::Proposed => "proposed",
            SchemeId::Fpa => "fpa",
            SchemeId::RotationOnly => "rotation_only",
            SchemeId::TranslationOnly => "translation_only",
            SchemeId::LsSensing => "ls_sensing",
            SchemeId::PerfectCsi => "perfect_csi",
            SchemeId::LosOnly => "los_only",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

/// Which local direction is pointed at the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    #[default]
    MaxGain,
    /// Surface normal.
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedPlacement {
    /// Searched jointly with the max-gain direction.
    #[default]
    Optimized,
    /// Centered lattice with uniform weights.
    Centered,
}

/// Fixed surface positions used for sensing and by the fixed-position schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorLayout {
    /// Evenly spaced on the horizontal great circle.
    #[default]
    Ring,
    Fibonacci,
}

impl AnchorLayout {
    pub fn positions(self, n: usize, radius: f64) -> Vec<Vec3> {
        match self {
            AnchorLayout::Ring => (0..n)
                .map(|b| {
                    let phi = 2.0 * std::f64::consts::PI * b as f64 / n as f64;
                    Vec3::new(phi.cos(), phi.sin(), 0.0) * radius
                })
                .collect(),
            AnchorLayout::Fibonacci => SlotTable::fibonacci(n, radius).positions,
        }
    }
}

/// Pilot overhead per coherence block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverheadModel {
    /// Coherence block length T_c in symbols.
    pub coherence: f64,
    pub alpha: f64,
    /// Pilot blocks per channel path; S = this × number of paths.
    pub blocks_per_path: f64,
}

impl Default for OverheadModel {
    fn default() -> Self {
        OverheadModel { coherence: 120.0, alpha: 0.32, blocks_per_path: 1.0 }
    }
}

impl OverheadModel {
    /// T_{s,1} = αKS log₂(BQ).
    pub fn sensing_pilots(&self, k: usize, s: f64, b: usize, q: usize) -> f64 {
        self.alpha * k as f64 * s * ((b * q) as f64).log2()
    }

    /// T_{s,2} = αKS log₂(BM).
    pub fn full_csi_pilots(&self, k: usize, s: f64, b: usize, m: usize) -> f64 {
        self.alpha * k as f64 * s * ((b * m) as f64).log2()
    }

    /// (T_c − T_s)/T_c clamped at zero.
    pub fn scale(&self, pilots: f64) -> f64 {
        ((self.coherence - pilots) / self.coherence).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingParams {
    pub nx: usize,
    pub ny: usize,
    /// d_S in wavelengths.
    pub spacing: f64,
    pub pilot_dbm: f64,
    pub noise_dbm: f64,
    /// Reference power A relative to P_S times the receiver's path loss, dB.
    pub reference_margin_db: f64,
    /// Phase spread σ₁ of the reference wave, in turns.
    pub phase_spread: f64,
    /// FFT zero-padding factor.
    pub pad: usize,
    pub mapping: BinMapping,
    /// Surface positions during uplink sensing, with radial normals.
    pub poses: AnchorLayout,
    /// Pilot slots of the least-squares baseline.
    pub ls_pilots: usize,
    /// Side of the least-squares direction grid.
    pub ls_grid: usize,
}

impl Default for SensingParams {
    fn default() -> Self {
        SensingParams {
            nx: 32,
            ny: 32,
            spacing: 0.5,
            pilot_dbm: 10.0,
            noise_dbm: -100.0,
            reference_margin_db: 60.0,
            phase_spread: 0.5,
            pad: 4,
            mapping: BinMapping::Standard,
            poses: AnchorLayout::Ring,
            ls_pilots: 24,
            ls_grid: 48,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub carrier_hz: f64,
    pub mx: usize,
    pub my: usize,
    /// Element spacing in wavelengths.
    pub element_spacing: f64,
    pub feeds: usize,
    /// Minimum feed spacing ε_r in wavelengths.
    pub feed_spacing: f64,
    pub efficiency: f64,
    pub refractive: f64,
    /// Number of surfaces, equal to the number of receivers.
    pub surfaces: usize,
    pub slots: usize,
    pub sphere_radius: f64,
    pub d_min: f64,
    pub p_tx_dbm: f64,
    pub rician_k_db: f64,
    pub nlos_paths: usize,
    pub path_loss_exponent: f64,
    pub path_loss_reference: PathLossReference,
    pub antenna_noise_dbm: f64,
    pub conversion_noise_dbm: f64,
    /// Rate floor R₀ in bit/s/Hz.
    pub r0: f64,
    pub placement: ReceiverPlacement,
    pub mask: MaskRule,
    pub hologram: HologramPhase,
    pub alignment: Alignment,
    pub feed_placement: FeedPlacement,
    pub anchors: AnchorLayout,
    pub sensing: SensingParams,
    /// Rectifier curve, watts.
    pub eh: EhCurve,
    pub overhead: OverheadModel,
    /// Replaces sensing by the true direction perturbed with this mean ‖Δf‖².
    pub rmse_injection: Option<f64>,
    pub search: SearchConfig,
    pub orientation: OrientationOptions,
    pub idet: FpOptions,
    pub trials: usize,
    pub seed: u64,
    pub scheme: SchemeId,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            carrier_hz: 30e9,
            mx: 16,
            my: 16,
            element_spacing: 0.5,
            feeds: 1,
            feed_spacing: 0.5,
            efficiency: 1.0,
            refractive: 3.0,
            surfaces: 3,
            slots: 20,
            sphere_radius: 1.0,
            d_min: 0.25,
            p_tx_dbm: 40.0,
            rician_k_db: 10.0,
            nlos_paths: 3,
            path_loss_exponent: 2.0,
            path_loss_reference: PathLossReference::Surface,
            antenna_noise_dbm: -100.0,
            conversion_noise_dbm: -50.0,
            r0: 2.0,
            placement: ReceiverPlacement::default(),
            mask: MaskRule::Position,
            hologram: HologramPhase::Local,
            alignment: Alignment::MaxGain,
            feed_placement: FeedPlacement::Optimized,
            anchors: AnchorLayout::Ring,
            sensing: SensingParams::default(),
            eh: EhCurve::default(),
            overhead: OverheadModel::default(),
            rmse_injection: None,
            search: SearchConfig::default(),
            orientation: OrientationOptions::default(),
            idet: FpOptions::default(),
            trials: 50,
            seed: 1,
            scheme: SchemeId::Proposed,
        }
    }
}

impl Scenario {
    /// 32×32 elements and 50 slots.
    pub fn paper_scale() -> Self {
        Scenario { mx: 32, my: 32, slots: 50, ..Scenario::default() }
    }

    /// Reads JSON or TOML, chosen by extension (`.toml` is TOML, anything else JSON).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let s: Scenario = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.carrier_hz > 0.0) {
            return bad("carrier_hz must be positive");
        }
        if self.mx == 0 || self.my == 0 || self.feeds == 0 || self.surfaces == 0 {
            return bad("mx, my, feeds and surfaces must be positive");
        }
        if self.slots < self.surfaces {
            return bad("need at least as many slots as surfaces");
        }
        if !(self.element_spacing > 0.0 && self.sensing.spacing > 0.0 && self.sphere_radius > 0.0) {
            return bad("spacings and radius must be positive");
        }
        if self.sensing.nx < 2 || self.sensing.ny < 2 || self.sensing.pad == 0 {
            return bad("sensing grid needs at least 2×2 elements and pad ≥ 1");
        }
        if self.rmse_injection.is_some_and(|r| !(0.0..=4.0).contains(&r)) {
            return bad("rmse_injection must lie in [0, 4]");
        }
        if self.trials == 0 {
            return bad("trials must be positive");
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn p_tx(&self) -> f64 {
        dbm_to_watt(self.p_tx_dbm)
    }

    pub fn noise(&self) -> Noise {
        Noise { antenna: dbm_to_watt(self.antenna_noise_dbm), conversion: dbm_to_watt(self.conversion_noise_dbm) }
    }

    pub fn elements(&self) -> usize {
        self.mx * self.my
    }

    /// S = pilot blocks per path × paths per receiver.
    pub fn pilot_blocks(&self) -> f64 {
        self.overhead.blocks_per_path * (1 + self.nlos_paths) as f64
    }

    pub fn channel_config(&self) -> ChannelConfig {
        ChannelConfig {
            receivers: self.surfaces,
            surfaces: self.surfaces,
            nlos_paths: self.nlos_paths,
            rician_k: db_to_linear(self.rician_k_db),
            wavelength: self.wavelength(),
            path_loss_exponent: self.path_loss_exponent,
            placement: self.placement,
            positions: None,
            mask: self.mask,
            path_loss_reference: self.path_loss_reference,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_anchors_are_equally_spaced_on_the_equator() {
        let a = AnchorLayout::Ring.positions(3, 2.0);
        for p in &a {
            assert!(p.z.abs() < 1e-15 && (p.norm() - 2.0).abs() < 1e-12);
        }
        assert!((a[0].distance(a[1]) - a[1].distance(a[2])).abs() < 1e-12);
        assert!((a[0].distance(a[1]) - 2.0 * 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn defaults_round_trip_through_json_and_toml() {
        let s = Scenario::default();
        let j: Scenario = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(j, s);
        let t: Scenario = toml::from_str(&toml::to_string(&s).unwrap()).unwrap();
        assert_eq!(t, s);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let s: Scenario = serde_json::from_str(r#"{"p_tx_dbm": 30, "scheme": "fpa"}"#).unwrap();
        assert_eq!(s.p_tx_dbm, 30.0);
        assert_eq!(s.scheme, SchemeId::Fpa);
        assert_eq!(s.mx, 16);
        assert!(serde_json::from_str::<Scenario>(r#"{"unknown": 1}"#).is_err());
    }

    #[test]
    fn wavelength_and_units() {
        let s = Scenario::default();
        assert!((s.wavelength() - 0.01).abs() < 1e-15);
        assert!((s.p_tx() - 10.0).abs() < 1e-12);
        assert!((s.noise().antenna - 1e-13).abs() < 1e-25);
    }

    #[test]
    fn overhead_ordering() {
        let s = Scenario::default();
        let o = s.overhead;
        let t1 = o.sensing_pilots(3, s.pilot_blocks(), 3, 1);
        let t2 = o.full_csi_pilots(3, s.pilot_blocks(), 3, 256);
        assert!(t1 < t2);
        assert!((t2 - 0.32 * 3.0 * 4.0 * 768f64.log2()).abs() < 1e-12);
        assert_eq!(o.scale(500.0), 0.0);
        assert!((o.scale(12.0) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn scheme_names_parse() {
        for s in SchemeId::ALL {
            assert_eq!(s.as_str().parse::<SchemeId>().unwrap(), s);
        }
        assert!("nope".parse::<SchemeId>().is_err());
    }
}
