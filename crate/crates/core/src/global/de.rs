use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{better, DeVariant, GlobalConfig, Tracker};
use crate::sampling::ScrambledHalton;

fn argmax(vals: &[f64]) -> usize {
    let mut b = 0;
    for i in 1..vals.len() {
        if better(vals[i], vals[b]) {
            b = i;
        }
    }
    b
}

fn distinct<R: Rng>(rng: &mut R, np: usize, exclude: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let r = rng.random_range(0..np);
        if r != exclude && !out.contains(&r) {
            out.push(r);
        }
    }
    out
}

/// Returns whether the run stopped on the stall or spread test.
pub(super) fn run<F>(tr: &mut Tracker<'_, F>, cfg: &GlobalConfig) -> bool
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    let bx = tr.bx().clone();
    let n = bx.dim();
    let np = cfg.population;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut halton = ScrambledHalton::new(n, cfg.seed);

    let mut pop: Vec<DVector<f64>> = cfg.initial_guesses.iter().take(np).cloned().collect();
    while pop.len() < np {
        pop.push(bx.from_unit(&halton.next_point()));
    }
    for p in pop.iter_mut() {
        bx.clip(p);
    }
    let mut vals = tr.eval_batch(&pop);

    let f = cfg.de.mutation;
    let cr = cfg.de.crossover;
    let mut since_improvement = 0;
    let mut best_seen = vals[argmax(&vals)];
    while tr.remaining() > 0 {
        let b = argmax(&vals);
        let mut trials = Vec::with_capacity(np);
        for i in 0..np {
            let target = &pop[i];
            let mut trial = target.clone();
            match cfg.de.variant {
                DeVariant::RandToBest1Exp => {
                    let r = distinct(&mut rng, np, i, 3);
                    let mutant =
                        &pop[r[0]] + (&pop[b] - &pop[r[0]]) * f + (&pop[r[1]] - &pop[r[2]]) * f;
                    let mut j = rng.random_range(0..n);
                    let mut len = 0;
                    loop {
                        trial[j] = mutant[j];
                        j = (j + 1) % n;
                        len += 1;
                        if len >= n || rng.random::<f64>() >= cr {
                            break;
                        }
                    }
                }
                DeVariant::Rand1Bin => {
                    let r = distinct(&mut rng, np, i, 3);
                    let mutant = &pop[r[0]] + (&pop[r[1]] - &pop[r[2]]) * f;
                    let jr = rng.random_range(0..n);
                    for j in 0..n {
                        if j == jr || rng.random::<f64>() < cr {
                            trial[j] = mutant[j];
                        }
                    }
                }
            }
            bx.clip(&mut trial);
            trials.push(trial);
        }
        trials.truncate(tr.remaining());
        let tv = tr.eval_batch(&trials);
        for (i, (t, v)) in trials.into_iter().zip(tv).enumerate() {
            if !better(vals[i], v) {
                pop[i] = t;
                vals[i] = v;
            }
        }

        let cur = vals[argmax(&vals)];
        let scale = 1.0 + cur.abs().min(1e300);
        if cur.is_finite() && (!best_seen.is_finite() || cur - best_seen > cfg.value_tol * scale) {
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        best_seen = if better(cur, best_seen) { cur } else { best_seen };
        if since_improvement >= cfg.stall_generations {
            return true;
        }
        if vals.iter().all(|v| v.is_finite()) {
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            if cur - lo <= cfg.value_tol * scale {
                return true;
            }
        }
    }
    false
}
