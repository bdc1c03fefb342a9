use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{better, GlobalConfig, Tracker};
use crate::sampling::ScrambledHalton;

/// Returns whether the run stopped on the stall test.
pub(super) fn run<F>(tr: &mut Tracker<'_, F>, cfg: &GlobalConfig) -> bool
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    let bx = tr.bx().clone();
    let n = bx.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let width = bx.width();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let (mut x, mut fx) = if cfg.initial_guesses.is_empty() {
        let mut h = ScrambledHalton::new(n, cfg.seed);
        let x = bx.from_unit(&h.next_point());
        let v = tr.eval(&x);
        (x, v)
    } else {
        let vals = tr.eval_batch(&cfg.initial_guesses);
        let mut b = 0;
        for i in 1..vals.len() {
            if better(vals[i], vals[b]) {
                b = i;
            }
        }
        let mut x = cfg.initial_guesses[b].clone();
        bx.clip(&mut x);
        (x, vals[b])
    };

    let mut temp = cfg.sa.t0;
    let mut idle = 0;
    while tr.remaining() > 0 {
        let before = tr.best;
        for _ in 0..cfg.sa.steps_per_temperature {
            if tr.remaining() == 0 {
                break;
            }
            let mut y = x.clone();
            for j in 0..n {
                y[j] += cfg.sa.step_fraction * width[j] * normal.sample(&mut rng);
            }
            bx.clip(&mut y);
            let fy = tr.eval(&y);
            let accept = if !better(fx, fy) {
                true
            } else if fy.is_finite() {
                rng.random::<f64>() < ((fy - fx) / temp).exp()
            } else {
                false
            };
            if accept {
                x = y;
                fx = fy;
            }
        }
        temp *= cfg.sa.cooling;
        let scale = 1.0 + before.abs().min(1e300);
        if tr.best.is_finite() && (!before.is_finite() || tr.best - before > cfg.value_tol * scale) {
            idle = 0;
        } else {
            idle += 1;
        }
        if idle >= cfg.stall_generations {
            return true;
        }
    }
    false
}
