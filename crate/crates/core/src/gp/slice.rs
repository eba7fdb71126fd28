//! Coordinate-wise slice sampling with stepping out and shrinkage.

use crate::noise::NoiseStream;

const MAX_STEP_OUT: usize = 20;
const MAX_SHRINK: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceSchedule {
    pub burn_in: usize,
    pub thin: usize,
    pub count: usize,
}

impl Default for SliceSchedule {
    fn default() -> Self {
        Self {
            burn_in: 100,
            thin: 10,
            count: 10,
        }
    }
}

/// Draws `schedule.count` states from the density `exp(log_density)`.
///
/// `x0` must have finite log density. `widths` are the initial bracket widths
/// per coordinate. Each sweep updates every coordinate once; a state is kept
/// after the burn-in and every `thin` sweeps thereafter.
pub fn slice_sample<F>(
    mut log_density: F,
    x0: &[f64],
    widths: &[f64],
    schedule: SliceSchedule,
    rng: &mut NoiseStream,
) -> Vec<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut x = x0.to_vec();
    let mut lp = log_density(&x);
    assert!(lp.is_finite(), "slice sampler started at an impossible state");
    let thin = schedule.thin.max(1);
    let total = schedule.burn_in + thin * schedule.count;
    let mut samples = Vec::with_capacity(schedule.count);
    for sweep in 1..=total {
        for k in 0..x.len() {
            lp = update_coordinate(&mut log_density, &mut x, lp, k, widths[k], rng);
        }
        if sweep > schedule.burn_in && (sweep - schedule.burn_in) % thin == 0 {
            samples.push(x.clone());
        }
    }
    samples
}

fn update_coordinate<F>(
    log_density: &mut F,
    x: &mut [f64],
    lp: f64,
    k: usize,
    width: f64,
    rng: &mut NoiseStream,
) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let x0 = x[k];
    // exponential(1) drop below the current level defines the slice
    let level = lp + rng.uniform().max(f64::MIN_POSITIVE).ln();
    let mut eval_at = |x: &mut [f64], v: f64| {
        x[k] = v;
        log_density(x)
    };

    let mut left = x0 - width * rng.uniform();
    let mut right = left + width;
    let mut j = (MAX_STEP_OUT as f64 * rng.uniform()) as usize;
    let mut kk = MAX_STEP_OUT - 1 - j;
    while j > 0 && eval_at(x, left) > level {
        left -= width;
        j -= 1;
    }
    while kk > 0 && eval_at(x, right) > level {
        right += width;
        kk -= 1;
    }

    for _ in 0..MAX_SHRINK {
        let candidate = left + rng.uniform() * (right - left);
        let lc = eval_at(x, candidate);
        if lc > level {
            return lc;
        }
        if candidate < x0 {
            left = candidate;
        } else {
            right = candidate;
        }
    }
    x[k] = x0;
    lp
}
