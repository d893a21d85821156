#![allow(dead_code)]

use innkeeper::model::{Arm, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` valid models with parameters spread over the admissible region.
pub fn random_models(n: usize, seed: u64) -> Vec<ModelParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let q = rng.gen_range(0.05..0.95);
        let p_l = rng.gen_range(0.0..0.9);
        let b = p_l + (1.0 - p_l) * rng.gen::<f64>();
        let p_h = b + (0.99 - b).max(0.0) * rng.gen::<f64>();
        let m = ModelParams::new(q, p_h, p_l, b);
        if m.validate().is_ok() && p_h - p_l > 0.05 {
            out.push(m);
        }
    }
    out
}

pub const CANONICAL: ModelParams = ModelParams::new(0.5, 0.8, 0.3, 0.5);

/// Per-stage decisions for observed r ∈ {0, 1}, found by summing the
/// likelihood of every prefix that reaches the observation.
pub fn brute_force_policy(m: &ModelParams, k: usize) -> Vec<[Option<Arm>; 2]> {
    let mut decisions: Vec<[Option<Arm>; 2]> = Vec::with_capacity(k);
    decisions.push([None, None]); // stage 1 sees nothing
    for stage in 2..=k {
        let prefix_len = stage - 1;
        // [r][state] likelihood mass of prefixes whose stages all pulled R and ended in r
        let mut mass = [[0.0f64; 2]; 2];
        for bits in 0u32..(1 << prefix_len) {
            let draws: Vec<bool> = (0..prefix_len).map(|i| bits >> i & 1 == 1).collect();
            if !all_risky(m, &draws, &decisions) {
                continue;
            }
            let last = usize::from(draws[prefix_len - 1]);
            for (s, p) in [m.p_h, m.p_l].into_iter().enumerate() {
                mass[last][s] += seq_prob(&draws, p);
            }
        }
        let mut row = [None, None];
        for r in 0..2 {
            let h = m.q * mass[r][0];
            let l = (1.0 - m.q) * mass[r][1];
            if h + l > 0.0 {
                let post = h / (h + l);
                let e = post * m.p_h + (1.0 - post) * m.p_l;
                row[r] = Some(if e > m.b { Arm::R } else { Arm::S });
            }
        }
        decisions.push(row);
    }
    decisions
}

/// Whether every stage covered by `draws` pulls R under `decisions`.
fn all_risky(m: &ModelParams, draws: &[bool], decisions: &[[Option<Arm>; 2]]) -> bool {
    if m.q * m.p_h + (1.0 - m.q) * m.p_l <= m.b {
        return false;
    }
    (1..draws.len()).all(|i| decisions[i][usize::from(draws[i - 1])] == Some(Arm::R))
}

fn seq_prob(draws: &[bool], p: f64) -> f64 {
    draws.iter().map(|&t| if t { p } else { 1.0 - p }).product()
}

/// (R1, R2, S) probabilities per state.
pub fn brute_force_events(m: &ModelParams, k: usize) -> [[f64; 3]; 2] {
    let decisions = brute_force_policy(m, k);
    let mut out = [[0.0; 3]; 2];
    for bits in 0u32..(1 << k) {
        let draws: Vec<bool> = (0..k).map(|i| bits >> i & 1 == 1).collect();
        let event = if all_risky(m, &draws, &decisions) {
            let s = draws.iter().filter(|&&t| t).count() as f64;
            if 2.0 * s >= k as f64 * (m.p_h + m.p_l) {
                0
            } else {
                1
            }
        } else {
            2
        };
        for (st, p) in [m.p_h, m.p_l].into_iter().enumerate() {
            out[st][event] += seq_prob(&draws, p);
        }
    }
    out
}
