//! Shared fixtures for the criterion benches.

use holoidet_core::harness::{prepare, trial_channel, trial_seed, Prepared, Scenario};
use holoidet_core::sensing::{border_channel, excite, meter_readings, Grid, ReferenceField, SensingLayout};
use holoidet_core::{ChannelRealization, SurfacePose};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 8×8 surface, 16×16 sensing grid, 20 slots.
pub fn small_scenario() -> Scenario {
    let mut s = Scenario { mx: 8, my: 8, trials: 1, ..Scenario::default() };
    s.sensing.nx = 16;
    s.sensing.ny = 16;
    s
}

pub struct Fixture {
    pub scenario: Scenario,
    pub prep: Prepared,
    pub channel: ChannelRealization,
    pub seed: u64,
}

pub fn fixture(s: Scenario) -> Fixture {
    let prep = prepare(&s).expect("scenario prepares");
    let seed = trial_seed(s.seed, 0);
    let channel = trial_channel(&s, seed).expect("channel draws");
    Fixture { scenario: s, prep, channel, seed }
}

/// One holographic image per surface for receiver 0.
pub fn images(f: &Fixture) -> (Vec<Grid>, &SensingLayout, &[SurfacePose]) {
    let layout = &f.prep.sensing_layout;
    let poses = &f.prep.sensing_poses;
    let mut rng = ChaCha8Rng::seed_from_u64(f.seed);
    let p = 1e-2;
    let a = p * f.channel.links[0][0].path_loss * 1e6;
    let imgs = poses
        .iter()
        .enumerate()
        .map(|(b, pose)| {
            let up = border_channel(&f.channel, 0, b, pose, layout);
            let r = ReferenceField::draw(layout, a, 0.5, &mut rng);
            excite(&meter_readings(&up, &r, layout, p, 1e-13, &mut rng), &r, layout)
        })
        .collect();
    (imgs, layout, poses)
}
