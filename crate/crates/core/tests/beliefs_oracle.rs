//! Brute-force enumeration over every K-draw sequence, with best responses
//! recomputed from scratch, checked against the dynamic program.

mod common;

use common::{brute_force_events, brute_force_policy};
use innkeeper::beliefs::{event_probabilities, preintervention_policy};
use innkeeper::model::{Arm, ModelParams, Observation, WorldState};

#[test]
fn event_probabilities_match_enumeration() {
    let models = common::random_models(20, 0xB1E5);
    let mut worst = 0.0f64;
    for m in &models {
        for k in 1..=12usize {
            let probs = event_probabilities(m, k as u64).unwrap();
            let oracle = brute_force_events(m, k);
            for (st, w) in [WorldState::H, WorldState::L].into_iter().enumerate() {
                let got = probs.given(w);
                for (a, b) in [got.r1, got.r2, got.s].into_iter().zip(oracle[st]) {
                    worst = worst.max((a - b).abs());
                    assert!((a - b).abs() <= 1e-12, "{m:?} K={k} {w}: {a} vs {b}");
                }
            }
        }
    }
    assert!(worst <= 1e-12);
}

#[test]
fn policy_matches_enumeration_on_reachable_cells() {
    for m in &common::random_models(20, 0x901C) {
        let k = 12;
        let table = preintervention_policy(m, k as u64).unwrap();
        let oracle = brute_force_policy(m, k);
        assert_eq!(table.arm(1, Observation::Start), Arm::R);
        for stage in 2..=k {
            for (r, obs) in [Observation::Failure, Observation::Success]
                .into_iter()
                .enumerate()
            {
                if let Some(arm) = oracle[stage - 1][r] {
                    assert_eq!(
                        table.arm(stage as u64, obs),
                        arm,
                        "{m:?} stage {stage} {obs}"
                    );
                }
            }
            assert_eq!(table.arm(stage as u64, Observation::Safe), Arm::S);
        }
    }
}

#[test]
fn canonical_small_k_by_hand() {
    let m = ModelParams::new(0.5, 0.8, 0.3, 0.5);
    let k2 = brute_force_events(&m, 2);
    assert!((k2[0][0] - 0.64).abs() < 1e-15);
    assert!((k2[0][1] - 0.16).abs() < 1e-15);
    assert!((k2[0][2] - 0.2).abs() < 1e-15);
}
