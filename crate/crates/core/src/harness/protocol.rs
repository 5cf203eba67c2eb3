//! One Monte-Carlo trial: sensing, orientation, downlink transfer.

use super::scenario::{Alignment, FeedPlacement, Scenario, SchemeId};
use super::stream;
use crate::channel::{draw_channel, equivalent_channel, ChannelRealization};
use crate::error::{Error, Result};
use crate::geometry::{radial_rotation, SlotTable, SurfaceLayout, SurfacePose};
use crate::idet::{optimize_idet, IdetOutcome};
use crate::math::{dbm_to_watt, watt_to_dbm, Vec3, C64};
use crate::orientation::{match_receivers, optimize_orientation, Mobility, OrientationProblem, OrientationSolution};
use crate::rhs::{em_response, find_max_gain_direction, gain_profile, EmParams, EmResponse, FeedBox};
use crate::sensing::{ls_baseline_detect, sense_receiver, LsSounder, SensingLayout, Snapshot};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const CHANNEL: u64 = 1;
const SENSING: u64 = 2;
const INJECT: u64 = 3;
const PILOTS: u64 = 4;

/// Per-scenario state shared by all trials: surface design, slots and sensing hardware.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub layout: SurfaceLayout,
    pub em: EmResponse,
    /// ū, local frame.
    pub max_gain_dir: Vec3,
    pub slots: SlotTable,
    /// Fixed sphere positions, one per surface.
    pub anchors: Vec<Vec3>,
    /// Anchors with radial normals; every scheme senses from here.
    pub sensing_poses: Vec<SurfacePose>,
    pub sensing_layout: SensingLayout,
    pub sounder: LsSounder,
}

/// Designs the surface (feeds and ū) and builds slot, anchor and sensing tables.
pub fn prepare(s: &Scenario) -> Result<Prepared> {
    s.validate()?;
    let lambda = s.wavelength();
    let spacing = s.element_spacing * lambda;
    let feed_gap = s.feed_spacing * lambda;
    let probe = SurfaceLayout::new(s.mx, s.my, spacing, vec![Vec3::ZERO])?;
    let lattice = FeedBox::of(&probe, feed_gap).lattice(s.feeds)?;
    let params = EmParams { efficiency: s.efficiency, refractive: s.refractive, wavelength: lambda };
    let (layout, searched_dir) = match s.feed_placement {
        FeedPlacement::Optimized => {
            let mg = find_max_gain_direction(&probe, s.feeds, feed_gap, &params, &s.search)?;
            (SurfaceLayout::new(s.mx, s.my, spacing, mg.feeds)?, mg.direction)
        }
        FeedPlacement::Centered => {
            let layout = SurfaceLayout::new(s.mx, s.my, spacing, lattice)?;
            let w = vec![1.0 / s.feeds as f64; s.feeds];
            let dir = gain_profile(&layout, &w, &params, 72, 19).argmax_direction();
            (layout, dir)
        }
    };
    let max_gain_dir = match s.alignment {
        Alignment::MaxGain => searched_dir,
        Alignment::Normal => Vec3::E3,
    };
    let em = em_response(&layout, s.efficiency, s.refractive, lambda);
    let slots = SlotTable::fibonacci(s.slots, s.sphere_radius);
    let anchors = s.anchors.positions(s.surfaces, s.sphere_radius);
    let sensing_poses = s.sensing.poses.positions(s.surfaces, s.sphere_radius).iter().map(|a| SurfacePose::at(radial_rotation(*a), *a)).collect();
    let sensing_layout = SensingLayout::around(&layout, s.sensing.nx, s.sensing.ny, s.sensing.spacing * lambda)?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream(s.seed, PILOTS));
    let sounder = LsSounder::new(layout.elements(), s.sensing.ls_pilots, s.sensing.ls_grid, &mut rng)?;
    Ok(Prepared { layout, em, max_gain_dir, slots, anchors, sensing_poses, sensing_layout, sounder })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    /// Whether the rate floors were reachable.
    pub feasible: bool,
    /// min_k P_EH,k at the rectifier input, W (0 when infeasible).
    pub min_eh: f64,
    pub min_dc: f64,
    /// `min_eh` scaled by the pilot-overhead factor.
    pub min_eh_effective: f64,
    pub overhead_scale: f64,
    pub min_rate: f64,
    /// Mean over receivers of ‖f^e − f^t‖².
    pub sensing_rmse: f64,
    pub objective: f64,
}

impl TrialMetrics {
    pub fn min_eh_dbm(&self) -> f64 {
        watt_to_dbm(self.min_eh)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub scheme: SchemeId,
    pub seed: u64,
    /// Per receiver, global frame.
    pub estimates: Vec<Vec3>,
    pub truths: Vec<Vec3>,
    /// Receiver served by each surface.
    pub assignment: Vec<usize>,
    pub orientation: OrientationSolution,
    pub idet: Option<IdetOutcome>,
    pub metrics: TrialMetrics,
}

/// Truth per receiver: the strongest visible path at the sensing poses.
pub fn true_directions(ch: &ChannelRealization, poses: &[SurfacePose]) -> Vec<Vec3> {
    (0..ch.num_receivers())
        .map(|k| {
            let (b, i) = ch.dominant_path(k, poses);
            ch.links[k][b].paths[i].direction()
        })
        .collect()
}

/// Rotates `truth` by β with 2 − 2cos β = s, s ~ Exp(mean), toward a uniform tangent direction.
pub fn inject_error(truth: Vec3, mean: f64, rng: &mut impl Rng) -> Vec3 {
    let u: f64 = rng.gen();
    let psi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let s = (-mean * (1.0 - u).ln()).min(4.0);
    let cos_b = 1.0 - s / 2.0;
    let sin_b = (1.0 - cos_b * cos_b).max(0.0).sqrt();
    let helper = if truth.x.abs() < 0.9 { Vec3::E1 } else { Vec3::E2 };
    let e1 = truth.cross(helper).normalized().expect("helper is not parallel");
    let e2 = truth.cross(e1);
    let t = e1 * psi.cos() + e2 * psi.sin();
    (truth * cos_b + t * sin_b).normalized().expect("unit result")
}

fn uses_sensing(scheme: SchemeId) -> bool {
    !matches!(scheme, SchemeId::PerfectCsi | SchemeId::LosOnly)
}

/// Stage I for one trial: estimated and true directions per receiver.
pub fn run_sensing(s: &Scenario, prep: &Prepared, scheme: SchemeId, ch: &ChannelRealization, seed: u64) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let truths = true_directions(ch, &prep.sensing_poses);
    let k_count = ch.num_receivers();
    let estimates = if let (Some(r), true) = (s.rmse_injection, uses_sensing(scheme)) {
        let mut rng = ChaCha8Rng::seed_from_u64(stream(seed, INJECT));
        truths.iter().map(|t| inject_error(*t, r, &mut rng)).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(stream(seed, SENSING));
        let p_s = dbm_to_watt(s.sensing.pilot_dbm);
        let noise = dbm_to_watt(s.sensing.noise_dbm);
        match scheme {
            SchemeId::PerfectCsi => truths.clone(),
            SchemeId::LosOnly => (0..k_count).map(|k| ch.links[k][0].paths[0].direction()).collect(),
            SchemeId::LsSensing => (0..k_count)
                .map(|k| {
                    ls_baseline_detect(ch, k, &prep.sensing_poses, &prep.layout, &prep.em, &prep.sounder, p_s, noise, &mut rng)
                        .map(|e| e.global)
                })
                .collect::<Result<Vec<_>>>()?,
            _ => (0..k_count)
                .map(|k| {
                    let snap = Snapshot {
                        pilot_power: p_s,
                        noise_var: noise,
                        reference_power: p_s * ch.links[k][0].path_loss * 10f64.powf(s.sensing.reference_margin_db / 10.0),
                        phase_spread: s.sensing.phase_spread,
                    };
                    sense_receiver(ch, k, &prep.sensing_poses, &prep.sensing_layout, &snap, s.sensing.pad, s.sensing.mapping, &mut rng)
                        .map(|e| e.global)
                })
                .collect::<Result<Vec<_>>>()?,
        }
    };
    Ok((estimates, truths))
}

fn mobility(scheme: SchemeId) -> Mobility {
    match scheme {
        SchemeId::Fpa => Mobility::Fixed,
        SchemeId::RotationOnly => Mobility::RotationOnly,
        SchemeId::TranslationOnly => Mobility::TranslationOnly,
        _ => Mobility::Full,
    }
}

/// The channel realization of the trial with the given seed.
pub fn trial_channel(s: &Scenario, seed: u64) -> Result<ChannelRealization> {
    draw_channel(&s.channel_config(), stream(seed, CHANNEL))
}

/// Channel, sensing result and surface design of one trial (stages I and II).
#[derive(Debug, Clone)]
pub struct Oriented {
    pub channel: ChannelRealization,
    pub estimates: Vec<Vec3>,
    pub truths: Vec<Vec3>,
    pub assignment: Vec<usize>,
    pub orientation: OrientationSolution,
    pub sensing_rmse: f64,
}

/// Sensing and orientation for `scheme` on the trial with the given seed.
pub fn run_orientation(s: &Scenario, prep: &Prepared, scheme: SchemeId, seed: u64) -> Result<Oriented> {
    let ch = trial_channel(s, seed)?;
    let (estimates, truths) = run_sensing(s, prep, scheme, &ch, seed)?;
    let sensing_rmse = crate::sensing::rmse(&estimates, &truths)?;
    let assignment = match_receivers(&prep.anchors, &estimates);
    let problem = OrientationProblem {
        sensed: assignment.iter().map(|&k| estimates[k]).collect(),
        max_gain_dir: prep.max_gain_dir,
        slots: prep.slots.clone(),
        anchors: prep.anchors.clone(),
        layout: prep.layout.clone(),
        em: prep.em.clone(),
        wavelength: s.wavelength(),
        p_tx: s.p_tx(),
        d_min: s.d_min,
        mobility: mobility(scheme),
        hologram: s.hologram,
        mask: s.mask,
        options: s.orientation,
    };
    let orientation = optimize_orientation(&problem)?;
    Ok(Oriented { channel: ch, estimates, truths, assignment, orientation, sensing_rmse })
}

/// Runs the three stages for `scheme` on the trial with the given seed.
pub fn run_protocol(s: &Scenario, prep: &Prepared, scheme: SchemeId, seed: u64) -> Result<TrialOutcome> {
    let Oriented { channel: ch, estimates, truths, assignment, orientation, sensing_rmse } = run_orientation(s, prep, scheme, seed)?;
    let hbar: Vec<Vec<C64>> = (0..ch.num_receivers())
        .map(|k| {
            let mut row = Vec::new();
            for (b, pose) in orientation.poses.iter().enumerate() {
                let h = ch.channel_vector(k, b, pose, &prep.layout);
                row.extend(equivalent_channel(&h, &orientation.holograms[b], &prep.em)?);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let blocks = s.pilot_blocks();
    let pilots = match scheme {
        SchemeId::PerfectCsi => s.overhead.full_csi_pilots(s.surfaces, blocks, s.surfaces, s.elements()),
        _ => s.overhead.sensing_pilots(s.surfaces, blocks, s.surfaces, s.feeds),
    };
    let overhead_scale = s.overhead.scale(pilots);
    let (idet, metrics) = match optimize_idet(&hbar, s.p_tx(), s.r0, &s.noise(), &s.eh, &s.idet) {
        Ok(out) => {
            let min_eh = out.metrics.p_eh.iter().copied().fold(f64::INFINITY, f64::min);
            let min_rate = out.metrics.rate.iter().copied().fold(f64::INFINITY, f64::min);
            let m = TrialMetrics {
                feasible: true,
                min_eh,
                min_dc: out.metrics.min_dc,
                min_eh_effective: min_eh * overhead_scale,
                overhead_scale,
                min_rate,
                sensing_rmse,
                objective: orientation.objective,
            };
            (Some(out), m)
        }
        Err(Error::Infeasible { certificate, .. }) => (
            None,
            TrialMetrics {
                feasible: false,
                min_eh: 0.0,
                min_dc: 0.0,
                min_eh_effective: 0.0,
                overhead_scale,
                min_rate: certificate.unwrap_or(0.0),
                sensing_rmse,
                objective: orientation.objective,
            },
        ),
        Err(e) => return Err(e),
    };
    Ok(TrialOutcome { scheme, seed, estimates, truths, assignment, orientation, idet, metrics })
}
