//! Seeded random fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::grid::{Field, Grid};
use crate::pde::{TimeAxis, Trajectory};

pub const SINE_MODES: usize = 8;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `Σ_{m=1}^{8} c_m sin(mπx)` with `c_m ~ N(0,1)/m`.
pub fn smooth_field(g: &Grid, rng: &mut impl Rng) -> Field {
    let coeffs: Vec<f64> = (1..=SINE_MODES)
        .map(|m| rng.sample::<f64, _>(StandardNormal) / m as f64)
        .collect();
    g.sample(|x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * ((i + 1) as f64 * std::f64::consts::PI * x).sin())
            .sum()
    })
}

/// Independent smooth fields on every frame.
pub fn smooth_trajectory(g: &Grid, ta: &TimeAxis, rng: &mut impl Rng) -> Trajectory {
    Trajectory {
        axis: *ta,
        frames: (0..=ta.n_steps).map(|_| smooth_field(g, rng)).collect(),
    }
}

/// Nodal white noise on frames `1..N`; frame 0 is zero.
pub fn white_noise_trajectory(g: &Grid, ta: &TimeAxis, rng: &mut impl Rng) -> Trajectory {
    let mut frames = vec![g.zeros()];
    for _ in 0..ta.n_steps {
        frames.push(Field((0..g.n).map(|_| rng.sample(StandardNormal)).collect()));
    }
    Trajectory { axis: *ta, frames }
}
