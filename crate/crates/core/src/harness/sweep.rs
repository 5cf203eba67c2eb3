//! Sweeps over one scenario axis, per-figure experiments, CSV tables and
//! run manifests.

use super::protocol::{prepare, run_protocol, run_sensing, Prepared, TrialMetrics};
use super::scenario::{Alignment, FeedPlacement, Scenario, SchemeId};
use super::{stream, trial_seed};
use crate::channel::draw_channel;
use crate::error::{Error, Result};
use crate::math::watt_to_dbm;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    PTxDbm,
    R0,
    /// d_S in wavelengths.
    SensingSpacing,
    RicianKDb,
    /// Elements per side (M = n × n).
    Elements,
    Feeds,
    RmseInjection,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::PTxDbm => "p_tx_dbm",
            Axis::R0 => "r0",
            Axis::SensingSpacing => "sensing_spacing",
            Axis::RicianKDb => "rician_k_db",
            Axis::Elements => "elements",
            Axis::Feeds => "feeds",
            Axis::RmseInjection => "rmse_injection",
        }
    }

    pub fn apply(self, s: &mut Scenario, v: f64) {
        match self {
            Axis::PTxDbm => s.p_tx_dbm = v,
            Axis::R0 => s.r0 = v,
            Axis::SensingSpacing => s.sensing.spacing = v,
            Axis::RicianKDb => s.rician_k_db = v,
            Axis::Elements => {
                s.mx = v as usize;
                s.my = v as usize;
            }
            Axis::Feeds => s.feeds = v as usize,
            Axis::RmseInjection => s.rmse_injection = Some(v),
        }
    }
}

/// One CSV row: a single run (`kind = run`) or the mean over trials (`kind = aggregate`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: String,
    pub variant: String,
    pub scheme: String,
    pub axis: String,
    pub axis_value: f64,
    pub kind: String,
    pub trial: Option<usize>,
    pub seed: u64,
    pub n: usize,
    pub feasible: Option<f64>,
    pub min_eh_w: Option<f64>,
    pub min_eh_dbm: Option<f64>,
    pub min_eh_ci95: Option<f64>,
    pub min_eh_effective_w: Option<f64>,
    pub min_eh_effective_ci95: Option<f64>,
    pub min_dc_w: Option<f64>,
    pub min_rate: Option<f64>,
    pub sensing_rmse: Option<f64>,
    pub sensing_rmse_ci95: Option<f64>,
    pub objective: Option<f64>,
}

fn dbm(w: f64) -> Option<f64> {
    (w > 0.0).then(|| watt_to_dbm(w))
}

/// Sample mean and normal-approximation 95% half-width.
pub fn mean_ci(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

fn run_row(label: (&str, &str), scheme: SchemeId, axis: Axis, value: f64, trial: usize, seed: u64, m: &TrialMetrics) -> RunRecord {
    RunRecord {
        experiment: label.0.into(),
        variant: label.1.into(),
        scheme: scheme.as_str().into(),
        axis: axis.name().into(),
        axis_value: value,
        kind: "run".into(),
        trial: Some(trial),
        seed,
        n: 1,
        feasible: Some(if m.feasible { 1.0 } else { 0.0 }),
        min_eh_w: Some(m.min_eh),
        min_eh_dbm: dbm(m.min_eh),
        min_eh_ci95: None,
        min_eh_effective_w: Some(m.min_eh_effective),
        min_eh_effective_ci95: None,
        min_dc_w: Some(m.min_dc),
        min_rate: Some(m.min_rate),
        sensing_rmse: Some(m.sensing_rmse),
        sensing_rmse_ci95: None,
        objective: Some(m.objective),
    }
}

/// Mean row over the run rows; columns absent from any run stay empty.
pub fn aggregate(runs: &[RunRecord], master_seed: u64) -> RunRecord {
    let col = |f: fn(&RunRecord) -> Option<f64>| -> Option<Vec<f64>> { runs.iter().map(f).collect() };
    let mean = |f: fn(&RunRecord) -> Option<f64>| col(f).map(|v| mean_ci(&v));
    let eh = mean(|r| r.min_eh_w);
    let eff = mean(|r| r.min_eh_effective_w);
    let sr = mean(|r| r.sensing_rmse);
    let first = &runs[0];
    RunRecord {
        experiment: first.experiment.clone(),
        variant: first.variant.clone(),
        scheme: first.scheme.clone(),
        axis: first.axis.clone(),
        axis_value: first.axis_value,
        kind: "aggregate".into(),
        trial: None,
        seed: master_seed,
        n: runs.len(),
        feasible: mean(|r| r.feasible).map(|m| m.0),
        min_eh_w: eh.map(|m| m.0),
        min_eh_dbm: eh.and_then(|m| dbm(m.0)),
        min_eh_ci95: eh.map(|m| m.1),
        min_eh_effective_w: eff.map(|m| m.0),
        min_eh_effective_ci95: eff.map(|m| m.1),
        min_dc_w: mean(|r| r.min_dc_w).map(|m| m.0),
        min_rate: mean(|r| r.min_rate).map(|m| m.0),
        sensing_rmse: sr.map(|m| m.0),
        sensing_rmse_ci95: sr.map(|m| m.1),
        objective: mean(|r| r.objective).map(|m| m.0),
    }
}

/// Shares surface designs between sweep points with the same hardware.
#[derive(Default)]
pub struct PrepCache {
    map: HashMap<String, Arc<Prepared>>,
}

impl PrepCache {
    pub fn get(&mut self, s: &Scenario) -> Result<Arc<Prepared>> {
        let key = serde_json::to_string(&(
            (s.carrier_hz, s.mx, s.my, s.element_spacing, s.feeds, s.feed_spacing, s.efficiency, s.refractive),
            (s.surfaces, s.slots, s.sphere_radius, s.alignment, s.feed_placement, s.anchors, s.seed),
            (s.sensing.nx, s.sensing.ny, s.sensing.spacing, s.sensing.ls_pilots, s.sensing.ls_grid, s.sensing.poses),
            &s.search,
        ))
        .expect("key serializes");
        if let Some(p) = self.map.get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(prepare(s)?);
        self.map.insert(key, p.clone());
        Ok(p)
    }
}

/// Runs every (value, scheme, trial) and appends one aggregate row per (value, scheme).
pub fn sweep(
    base: &Scenario,
    label: (&str, &str),
    axis: Axis,
    values: &[f64],
    schemes: &[SchemeId],
    cache: &mut PrepCache,
) -> Result<Vec<RunRecord>> {
    let mut out = Vec::new();
    for &v in values {
        let mut s = base.clone();
        axis.apply(&mut s, v);
        s.validate()?;
        let prep = cache.get(&s)?;
        for &scheme in schemes {
            let runs: Vec<RunRecord> = (0..s.trials)
                .into_par_iter()
                .map(|t| {
                    let seed = trial_seed(s.seed, t);
                    run_protocol(&s, &prep, scheme, seed).map(|o| run_row(label, scheme, axis, v, t, seed, &o.metrics))
                })
                .collect::<Result<_>>()?;
            let agg = aggregate(&runs, s.seed);
            out.extend(runs);
            out.push(agg);
        }
    }
    Ok(out)
}

/// Stage I only: per-trial sensing error.
pub fn sensing_sweep(
    base: &Scenario,
    label: (&str, &str),
    axis: Axis,
    values: &[f64],
    schemes: &[SchemeId],
    cache: &mut PrepCache,
) -> Result<Vec<RunRecord>> {
    let mut out = Vec::new();
    for &v in values {
        let mut s = base.clone();
        axis.apply(&mut s, v);
        s.validate()?;
        let prep = cache.get(&s)?;
        for &scheme in schemes {
            let runs: Vec<RunRecord> = (0..s.trials)
                .into_par_iter()
                .map(|t| {
                    let seed = trial_seed(s.seed, t);
                    let ch = draw_channel(&s.channel_config(), stream(seed, 1))?;
                    let (e, tr) = run_sensing(&s, &prep, scheme, &ch, seed)?;
                    let r = crate::sensing::rmse(&e, &tr)?;
                    Ok(RunRecord {
                        experiment: label.0.into(),
                        variant: label.1.into(),
                        scheme: scheme.as_str().into(),
                        axis: axis.name().into(),
                        axis_value: v,
                        kind: "run".into(),
                        trial: Some(t),
                        seed,
                        n: 1,
                        feasible: None,
                        min_eh_w: None,
                        min_eh_dbm: None,
                        min_eh_ci95: None,
                        min_eh_effective_w: None,
                        min_eh_effective_ci95: None,
                        min_dc_w: None,
                        min_rate: None,
                        sensing_rmse: Some(r),
                        sensing_rmse_ci95: None,
                        objective: None,
                    })
                })
                .collect::<Result<_>>()?;
            let agg = aggregate(&runs, s.seed);
            out.extend(runs);
            out.push(agg);
        }
    }
    Ok(out)
}

pub fn to_csv(records: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn from_csv(text: &str) -> Result<Vec<RunRecord>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(e.to_string()))
}

/// Everything needed to reproduce an experiment's CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub figure: u32,
    pub scenario: Scenario,
    /// SHA-256 of the scenario JSON.
    pub config_hash: String,
    pub version: String,
    pub trial_seeds: Vec<u64>,
    pub csv_file: String,
    pub csv_sha256: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub csv: String,
    pub manifest: Manifest,
}

pub fn sha256_hex(data: &[u8]) -> String {
    format!("{:x}", Sha256::digest(data))
}

pub const FIGURES: [u32; 7] = [4, 5, 6, 7, 8, 9, 10];

/// Reproduces the data behind figure `fig` (4–10) starting from `base`.
pub fn experiment(fig: u32, base: &Scenario) -> Result<ExperimentOutput> {
    let name = format!("fig{fig}");
    let e = name.as_str();
    let mut cache = PrepCache::default();
    let p_tx = [30.0, 35.0, 40.0, 45.0];
    let r0 = [0.0, 2.0, 4.0, 6.0];
    let records = match fig {
        4 => sweep(
            base,
            (e, ""),
            Axis::PTxDbm,
            &p_tx,
            &[SchemeId::Proposed, SchemeId::RotationOnly, SchemeId::TranslationOnly, SchemeId::Fpa],
            &mut cache,
        )?,
        5 => {
            let mut out = Vec::new();
            for r in [0.0, 0.1, 0.17] {
                let s = Scenario { rmse_injection: Some(r), ..base.clone() };
                out.extend(sweep(&s, (e, &format!("rmse={r}")), Axis::R0, &r0, &[SchemeId::Proposed], &mut cache)?);
            }
            out
        }
        6 => {
            let mut out = Vec::new();
            for d in [0.25, 0.5, 1.0] {
                let mut s = base.clone();
                s.sensing.spacing = d;
                out.extend(sweep(&s, (e, &format!("d_s={d}")), Axis::R0, &r0, &[SchemeId::Proposed], &mut cache)?);
            }
            let mut s = base.clone();
            s.sensing.spacing = 0.5;
            out.extend(sweep(&s, (e, "ls"), Axis::R0, &r0, &[SchemeId::LsSensing], &mut cache)?);
            out
        }
        7 => sensing_sweep(
            base,
            (e, ""),
            Axis::SensingSpacing,
            &[0.25, 0.5, 1.0],
            &[SchemeId::Proposed, SchemeId::LsSensing],
            &mut cache,
        )?,
        8 => {
            let mut out = Vec::new();
            for (al, fp) in [
                (Alignment::MaxGain, FeedPlacement::Optimized),
                (Alignment::Normal, FeedPlacement::Optimized),
                (Alignment::MaxGain, FeedPlacement::Centered),
                (Alignment::Normal, FeedPlacement::Centered),
            ] {
                let s = Scenario { alignment: al, feed_placement: fp, ..base.clone() };
                let label = format!("{}/{}", serde_json::to_value(al).unwrap().as_str().unwrap(), serde_json::to_value(fp).unwrap().as_str().unwrap());
                out.extend(sweep(&s, (e, &label), Axis::PTxDbm, &p_tx, &[SchemeId::Proposed], &mut cache)?);
            }
            out
        }
        9 => {
            let sides: Vec<f64> = if base.mx >= 32 { vec![16.0, 24.0, 32.0] } else { vec![8.0, 12.0, 16.0, 20.0] };
            let mut out = Vec::new();
            for q in 1..=4usize {
                let s = Scenario { feeds: q, ..base.clone() };
                out.extend(sweep(&s, (e, &format!("q={q}")), Axis::Elements, &sides, &[SchemeId::Proposed], &mut cache)?);
            }
            out
        }
        10 => sweep(
            base,
            (e, ""),
            Axis::RicianKDb,
            &[-4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
            &[SchemeId::Proposed, SchemeId::PerfectCsi, SchemeId::LosOnly],
            &mut cache,
        )?,
        _ => return Err(Error::Config(format!("no experiment for figure {fig}; choose 4-10"))),
    };
    let csv = to_csv(&records)?;
    let manifest = Manifest {
        experiment: name.clone(),
        figure: fig,
        scenario: base.clone(),
        config_hash: sha256_hex(base.to_json().as_bytes()),
        version: env!("CARGO_PKG_VERSION").into(),
        trial_seeds: (0..base.trials).map(|t| trial_seed(base.seed, t)).collect(),
        csv_file: format!("{name}.csv"),
        csv_sha256: sha256_hex(csv.as_bytes()),
    };
    Ok(ExperimentOutput { records, csv, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_ci_matches_hand_computation() {
        let (m, h) = mean_ci(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((h - 1.96 * (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_ci(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = TrialMetrics {
            feasible: true,
            min_eh: 1.234_567_890_123e-7,
            min_dc: 0.0,
            min_eh_effective: 1.1e-7,
            overhead_scale: 0.9,
            min_rate: 2.000_000_1,
            sensing_rmse: 0.013,
            objective: 42.0,
        };
        let rows = vec![run_row(("x", "v"), SchemeId::Fpa, Axis::R0, 2.0, 0, 99, &m)];
        let back = from_csv(&to_csv(&rows).unwrap()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn aggregate_is_mean_of_runs() {
        let rows: Vec<RunRecord> = (0..5)
            .map(|t| {
                let m = TrialMetrics {
                    feasible: t % 2 == 0,
                    min_eh: 1e-6 * (t as f64 + 1.0),
                    min_dc: 0.0,
                    min_eh_effective: 0.5e-6,
                    overhead_scale: 0.5,
                    min_rate: 2.0,
                    sensing_rmse: 0.01 * t as f64,
                    objective: 1.0,
                };
                run_row(("x", ""), SchemeId::Proposed, Axis::PTxDbm, 40.0, t, t as u64, &m)
            })
            .collect();
        let a = aggregate(&rows, 1);
        assert!((a.min_eh_w.unwrap() - 3e-6).abs() < 1e-12);
        assert!((a.feasible.unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(a.n, 5);
        assert_eq!(a.kind, "aggregate");
    }

    #[test]
    fn unknown_figure_is_a_config_error() {
        assert!(matches!(experiment(3, &Scenario::default()), Err(Error::Config(_))));
    }
}
