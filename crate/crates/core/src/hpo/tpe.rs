//! Tree-structured-Parzen-style suggestion, one dimension at a time.
//!
//! Completed trials are split into a good set (top quarter by score, at
//! least one trial) and a bad set. For each dimension, candidates are
//! drawn from the good-set density `l` and the one maximizing `l / g` is
//! kept, where `g` is the bad-set density. Both densities mix a uniform
//! prior with one component per trial, so every point of the space stays
//! reachable.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::space::{Assignment, Dim, SearchSpace, Value};
use super::{Trial, GOOD_FRACTION, WARMUP_TRIALS};

const CANDIDATES: usize = 24;

pub(super) fn suggest(space: &SearchSpace, history: &[Trial], rng: &mut ChaCha8Rng) -> Assignment {
    let mut done: Vec<&Trial> = history.iter().filter(|t| t.objective.is_some()).collect();
    if done.len() < WARMUP_TRIALS {
        return space.sample_uniform(rng);
    }
    done.sort_by(|a, b| b.score().total_cmp(&a.score()).then(a.index.cmp(&b.index)));
    let n_good = ((done.len() as f64 * GOOD_FRACTION).ceil() as usize).max(1);
    let (good, bad) = done.split_at(n_good);

    let mut out = Assignment::new();
    for (name, dim) in &space.dims {
        let pick = |set: &[&Trial]| -> Vec<Value> { set.iter().filter_map(|t| t.assignment.get(name).cloned()).collect() };
        let v = match dim {
            Dim::Bool => {
                let choices = [Value::Bool(false), Value::Bool(true)];
                categorical(&choices, &pick(good), &pick(bad), rng)
            }
            Dim::Categorical { choices } => {
                let choices: Vec<Value> = choices.iter().cloned().map(Value::Cat).collect();
                categorical(&choices, &pick(good), &pick(bad), rng)
            }
            Dim::Int { low, high, log } => {
                let t = numeric(*low as f64, *high as f64, *log, &pick(good), &pick(bad), rng);
                Value::Int((t.round() as i64).clamp(*low, *high))
            }
            Dim::Float { low, high, log } => {
                Value::Float(numeric(*low, *high, *log, &pick(good), &pick(bad), rng).clamp(*low, *high))
            }
        };
        debug_assert!(dim.contains(&v));
        out.insert(name.clone(), v);
    }
    out
}

fn categorical(choices: &[Value], good: &[Value], bad: &[Value], rng: &mut ChaCha8Rng) -> Value {
    let weights = |obs: &[Value]| -> Vec<f64> {
        choices
            .iter()
            .map(|c| 1.0 + obs.iter().filter(|o| *o == c).count() as f64)
            .collect()
    };
    let (l, g) = (weights(good), weights(bad));
    let (l_sum, g_sum): (f64, f64) = (l.iter().sum(), g.iter().sum());
    let mut best: Option<(usize, f64)> = None;
    for _ in 0..CANDIDATES {
        let mut u = rng.gen_range(0.0..l_sum);
        let mut idx = choices.len() - 1;
        for (i, w) in l.iter().enumerate() {
            if u < *w {
                idx = i;
                break;
            }
            u -= w;
        }
        let ratio = (l[idx] / l_sum) / (g[idx] / g_sum);
        if best.map_or(true, |(_, r)| ratio > r) {
            best = Some((idx, ratio));
        }
    }
    choices[best.expect("at least one candidate").0].clone()
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(x) => Some(*x),
        _ => None,
    }
}

/// Suggests a value in `[low, high]` (in the original scale).
fn numeric(low: f64, high: f64, log: bool, good: &[Value], bad: &[Value], rng: &mut ChaCha8Rng) -> f64 {
    let fwd = |x: f64| if log { x.ln() } else { x };
    let (lo, hi) = (fwd(low), fwd(high));
    let range = hi - lo;
    if range <= 0.0 {
        return low;
    }
    let centers = |obs: &[Value]| -> Vec<f64> { obs.iter().filter_map(as_f64).map(|x| fwd(x).clamp(lo, hi)).collect() };
    let (lc, gc) = (centers(good), centers(bad));
    let bandwidth = |n: usize| range * (0.2 * (n.max(1) as f64).powf(-0.2)).max(0.02);
    let (lbw, gbw) = (bandwidth(lc.len()), bandwidth(gc.len()));
    let density = |x: f64, cs: &[f64], bw: f64| -> f64 {
        let kernel: f64 = cs
            .iter()
            .map(|c| {
                let z = (x - c) / bw;
                (-0.5 * z * z).exp() / (bw * (2.0 * std::f64::consts::PI).sqrt())
            })
            .sum();
        (1.0 / range + kernel) / (cs.len() + 1) as f64
    };

    let mut best: Option<(f64, f64)> = None;
    for _ in 0..CANDIDATES {
        let j = rng.gen_range(0..=lc.len());
        let x = if j == lc.len() {
            rng.gen_range(lo..=hi)
        } else {
            let normal = Normal::new(lc[j], lbw).expect("positive bandwidth");
            let mut x = normal.sample(rng);
            for _ in 0..16 {
                if (lo..=hi).contains(&x) {
                    break;
                }
                x = normal.sample(rng);
            }
            x.clamp(lo, hi)
        };
        let ratio = density(x, &lc, lbw) / density(x, &gc, gbw);
        if best.map_or(true, |(_, r)| ratio > r) {
            best = Some((x, ratio));
        }
    }
    let t = best.expect("at least one candidate").0;
    if log {
        t.exp().clamp(low, high)
    } else {
        t
    }
}
