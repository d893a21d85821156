//! Exact Bayesian bookkeeping for the pre-intervention phase.
//!
//! During the first K stages every agent is recommended its own best
//! response. Once someone pulls S every successor copies it, so an agent who
//! sees a risky reward knows that every predecessor pulled R. The forward
//! recursions below track, per world state, the probability mass of the
//! all-R chain split by the last reward (for the policy) and by the running
//! success count (for the end-of-phase events R1, R2 and S).
//!
//! Everything is plain double precision. Chain masses are products of
//! bounded factors and stay representable for K up to a few thousand;
//! [`MAX_SAMPLE_SIZE`] is the supported limit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Arm, ModelParams, Observation, WorldState};

/// Largest K for which the recursions are documented to stay accurate.
pub const MAX_SAMPLE_SIZE: u64 = 5000;

/// P(H | `successes` out of `trials` IID risky pulls).
pub fn posterior_from_counts(model: &ModelParams, successes: u64, trials: u64) -> Result<f64> {
    if successes > trials {
        return Err(Error::SuccessesExceedTrials { successes, trials });
    }
    if trials == 0 {
        return Ok(model.q);
    }
    let failures = trials - successes;
    let log_h = log_likelihood(model.p_h, successes, failures);
    let log_l = log_likelihood(model.p_l, successes, failures);
    match (log_h.is_finite(), log_l.is_finite()) {
        (false, false) => Err(Error::ZeroLikelihood),
        (true, false) => Ok(1.0),
        (false, true) => Ok(0.0),
        (true, true) => {
            // logistic of the log posterior odds
            let log_odds = model.q.ln() - (1.0 - model.q).ln() + log_h - log_l;
            Ok(1.0 / (1.0 + (-log_odds).exp()))
        }
    }
}

fn log_likelihood(p: f64, successes: u64, failures: u64) -> f64 {
    let term = |count: u64, prob: f64| {
        if count == 0 {
            0.0
        } else {
            count as f64 * prob.ln()
        }
    };
    term(successes, p) + term(failures, 1.0 - p)
}

/// Best response and posterior for one (stage, observation) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub arm: Arm,
    /// P(H | observation at this stage); `None` when the observation cannot occur.
    pub posterior: Option<f64>,
}

impl PolicyEntry {
    const UNREACHABLE: PolicyEntry = PolicyEntry {
        arm: Arm::S,
        posterior: None,
    };
}

/// Equilibrium recommendations for stages 1..=K, indexed by what the agent
/// saw of its predecessor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    k: u64,
    stages: Vec<[PolicyEntry; 4]>,
}

impl PolicyTable {
    pub fn sample_size(&self) -> u64 {
        self.k
    }

    /// Entry for 1-based `stage` in `1..=K`.
    pub fn entry(&self, stage: u64, obs: Observation) -> PolicyEntry {
        assert!(
            stage >= 1 && stage <= self.k,
            "stage {stage} outside 1..={}",
            self.k
        );
        self.stages[(stage - 1) as usize][obs.index()]
    }

    pub fn arm(&self, stage: u64, obs: Observation) -> Arm {
        self.entry(stage, obs).arm
    }
}

/// Mass of the all-R chain after some stage, split by the last reward (index 0 or 1).
type ChainMass = [f64; 2];

fn risky_step(p: f64) -> [f64; 2] {
    [1.0 - p, p]
}

/// Builds the pre-intervention best-response table by forward recursion.
///
/// An agent who sees reward r ∈ {0,1} is recommended R iff the chain-aware
/// expected risky reward strictly exceeds b. An agent who sees b copies S.
pub fn preintervention_policy(model: &ModelParams, k: u64) -> Result<PolicyTable> {
    check_inputs(model, k)?;
    let states = [WorldState::H, WorldState::L];
    let priors = [model.q, 1.0 - model.q];

    // stage 1 always pulls R: the prior mean exceeds b
    let mut chain: [ChainMass; 2] = states.map(|w| risky_step(model.success_prob(w)));
    let mut defected = [0.0_f64; 2];

    let mut stages = Vec::with_capacity(k as usize);
    let mut first = [PolicyEntry::UNREACHABLE; 4];
    first[Observation::Start.index()] = PolicyEntry {
        arm: Arm::R,
        posterior: Some(model.q),
    };
    stages.push(first);

    for _stage in 2..=k {
        let mut row = [PolicyEntry::UNREACHABLE; 4];
        let mut next: [ChainMass; 2] = [[0.0; 2]; 2];
        let mut next_defected = defected;
        for (r, obs) in [(0, Observation::Failure), (1, Observation::Success)] {
            let mass_h = priors[0] * chain[0][r];
            let mass_l = priors[1] * chain[1][r];
            let total = mass_h + mass_l;
            if total <= 0.0 {
                continue;
            }
            let posterior = mass_h / total;
            let arm = if model.expected_risky(posterior) > model.b {
                Arm::R
            } else {
                Arm::S
            };
            row[obs.index()] = PolicyEntry {
                arm,
                posterior: Some(posterior),
            };
            for w in 0..2 {
                match arm {
                    Arm::R => {
                        let step = risky_step(model.success_prob(states[w]));
                        next[w][0] += chain[w][r] * step[0];
                        next[w][1] += chain[w][r] * step[1];
                    }
                    Arm::S => next_defected[w] += chain[w][r],
                }
            }
        }
        let safe_total = priors[0] * defected[0] + priors[1] * defected[1];
        row[Observation::Safe.index()] = PolicyEntry {
            arm: Arm::S,
            posterior: (safe_total > 0.0).then(|| priors[0] * defected[0] / safe_total),
        };
        stages.push(row);
        chain = next;
        defected = next_defected;
    }
    Ok(PolicyTable { k, stages })
}

/// Probabilities of the three ways the pre-intervention phase can end, for one state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EventMass {
    /// All K pulled R and the mean reached the midpoint.
    pub r1: f64,
    /// All K pulled R and the mean fell below the midpoint.
    pub r2: f64,
    /// Some agent among the first K pulled S.
    pub s: f64,
}

impl EventMass {
    pub fn total(&self) -> f64 {
        self.r1 + self.r2 + self.s
    }
}

/// Which event ended the pre-intervention phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntryEvent {
    R1,
    R2,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventProbs {
    pub q: f64,
    pub given_h: EventMass,
    pub given_l: EventMass,
}

impl EventProbs {
    pub fn given(&self, state: WorldState) -> &EventMass {
        match state {
            WorldState::H => &self.given_h,
            WorldState::L => &self.given_l,
        }
    }

    fn conditional(&self, event: EntryEvent, state: WorldState) -> f64 {
        let m = self.given(state);
        match event {
            EntryEvent::R1 => m.r1,
            EntryEvent::R2 => m.r2,
            EntryEvent::S => m.s,
        }
    }

    /// Marginal probability of `event` under the prior.
    pub fn marginal(&self, event: EntryEvent) -> f64 {
        self.q * self.conditional(event, WorldState::H)
            + (1.0 - self.q) * self.conditional(event, WorldState::L)
    }

    /// P(H | event), `None` for a zero-probability event.
    pub fn posterior(&self, event: EntryEvent) -> Option<f64> {
        let total = self.marginal(event);
        (total > 0.0).then(|| self.q * self.conditional(event, WorldState::H) / total)
    }

    pub fn p_r1(&self) -> f64 {
        self.marginal(EntryEvent::R1)
    }

    pub fn p_r2(&self) -> f64 {
        self.marginal(EntryEvent::R2)
    }

    pub fn p_s(&self) -> f64 {
        self.marginal(EntryEvent::S)
    }
}

/// Exact P(R1|ω), P(R2|ω), P(S|ω) under the equilibrium pre-intervention policy.
pub fn event_probabilities(model: &ModelParams, k: u64) -> Result<EventProbs> {
    let policy = preintervention_policy(model, k)?;
    Ok(event_probabilities_with(model, &policy))
}

/// Same as [`event_probabilities`] with a precomputed policy table.
pub fn event_probabilities_with(model: &ModelParams, policy: &PolicyTable) -> EventProbs {
    let k = policy.sample_size();
    let per_state = |state: WorldState| -> EventMass {
        let step = risky_step(model.success_prob(state));
        let width = k as usize + 1;
        // mass[2 * s + r]: s successes so far, last reward r
        let mut mass = vec![0.0_f64; 2 * width];
        let mut next = vec![0.0_f64; 2 * width];
        mass[0] = step[0];
        mass[2 + 1] = step[1];
        let mut safe = 0.0;
        for stage in 2..=k {
            next.iter_mut().for_each(|m| *m = 0.0);
            let arms = [
                policy.arm(stage, Observation::Failure),
                policy.arm(stage, Observation::Success),
            ];
            for s in 0..stage as usize {
                for r in 0..2 {
                    let m = mass[2 * s + r];
                    if m == 0.0 {
                        continue;
                    }
                    match arms[r] {
                        Arm::R => {
                            next[2 * s] += m * step[0];
                            next[2 * (s + 1) + 1] += m * step[1];
                        }
                        Arm::S => safe += m,
                    }
                }
            }
            std::mem::swap(&mut mass, &mut next);
        }
        let mut out = EventMass {
            s: safe,
            ..EventMass::default()
        };
        for s in 0..width {
            let m = mass[2 * s] + mass[2 * s + 1];
            if model.mean_reaches_midpoint(s as u64, k) {
                out.r1 += m;
            } else {
                out.r2 += m;
            }
        }
        out
    };
    EventProbs {
        q: model.q,
        given_h: per_state(WorldState::H),
        given_l: per_state(WorldState::L),
    }
}

/// E(t | Z) for the three switching-entry events; `None` when P(Z) = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchExpectations {
    pub e1: Option<f64>,
    pub e2: Option<f64>,
    pub e3: Option<f64>,
}

impl SwitchExpectations {
    pub fn get(&self, event: EntryEvent) -> Option<f64> {
        match event {
            EntryEvent::R1 => self.e1,
            EntryEvent::R2 => self.e2,
            EntryEvent::S => self.e3,
        }
    }
}

/// Expected risky reward conditional on each entry event. The coin is
/// independent of the rewards, so conditioning on the switching signal
/// leaves these unchanged.
pub fn switch_expectations(model: &ModelParams, probs: &EventProbs) -> SwitchExpectations {
    let e = |event| probs.posterior(event).map(|p| model.expected_risky(p));
    SwitchExpectations {
        e1: e(EntryEvent::R1),
        e2: e(EntryEvent::R2),
        e3: e(EntryEvent::S),
    }
}

fn check_inputs(model: &ModelParams, k: u64) -> Result<()> {
    model.validate()?;
    if k == 0 {
        return Err(Error::InvalidArgument(
            "sample size K must be at least 1".into(),
        ));
    }
    if k > MAX_SAMPLE_SIZE {
        return Err(Error::InvalidArgument(format!(
            "sample size K={k} exceeds the supported limit {MAX_SAMPLE_SIZE}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANONICAL: ModelParams = ModelParams::new(0.5, 0.8, 0.3, 0.5);

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn posterior_counts_examples() {
        assert_eq!(posterior_from_counts(&CANONICAL, 0, 0).unwrap(), 0.5);
        assert!(close(
            posterior_from_counts(&CANONICAL, 1, 1).unwrap(),
            8.0 / 11.0
        ));
        assert!(close(
            posterior_from_counts(&CANONICAL, 0, 1).unwrap(),
            2.0 / 9.0
        ));
    }

    #[test]
    fn posterior_rejects_too_many_successes() {
        assert!(matches!(
            posterior_from_counts(&CANONICAL, 3, 2),
            Err(Error::SuccessesExceedTrials {
                successes: 3,
                trials: 2
            })
        ));
    }

    #[test]
    fn posterior_with_zero_low_success_rate() {
        let m = ModelParams::new(0.5, 0.8, 0.0, 0.5);
        assert_eq!(posterior_from_counts(&m, 1, 3).unwrap(), 1.0);
        assert!(posterior_from_counts(&m, 0, 3).unwrap() < 0.5);
    }

    #[test]
    fn policy_examples() {
        let table = preintervention_policy(&CANONICAL, 3).unwrap();
        assert_eq!(table.arm(1, Observation::Start), Arm::R);

        let s2_hi = table.entry(2, Observation::Success);
        assert_eq!(s2_hi.arm, Arm::R);
        assert!(close(
            CANONICAL.expected_risky(s2_hi.posterior.unwrap()),
            7.3 / 11.0
        ));

        let s2_lo = table.entry(2, Observation::Failure);
        assert_eq!(s2_lo.arm, Arm::S);
        assert!(close(
            CANONICAL.expected_risky(s2_lo.posterior.unwrap()),
            3.7 / 9.0
        ));

        let s3_lo = table.entry(3, Observation::Failure);
        assert_eq!(s3_lo.arm, Arm::R);
        assert!(close(s3_lo.posterior.unwrap(), 0.08 / 0.185));

        assert_eq!(table.entry(2, Observation::Safe).posterior, None);
        assert_eq!(table.arm(3, Observation::Safe), Arm::S);
        assert!(close(
            table.entry(3, Observation::Safe).posterior.unwrap(),
            2.0 / 9.0
        ));
    }

    #[test]
    fn event_probabilities_small_k() {
        let k1 = event_probabilities(&CANONICAL, 1).unwrap();
        assert!(close(k1.given_h.r1, 0.8));
        assert!(close(k1.given_h.r2, 0.2));
        assert_eq!(k1.given_h.s, 0.0);

        let k2 = event_probabilities(&CANONICAL, 2).unwrap();
        assert!(close(k2.given_h.r1, 0.64));
        assert!(close(k2.given_h.r2, 0.16));
        assert!(close(k2.given_h.s, 0.2));
        for m in [k2.given_h, k2.given_l] {
            assert!(close(m.total(), 1.0));
        }
    }

    #[test]
    fn switch_expectations_k1() {
        let probs = event_probabilities(&CANONICAL, 1).unwrap();
        let e = switch_expectations(&CANONICAL, &probs);
        assert!(close(e.e1.unwrap(), 7.3 / 11.0));
        assert!(close(e.e2.unwrap(), 3.7 / 9.0));
        assert_eq!(e.e3, None);
    }

    #[test]
    fn zero_sample_size_is_rejected() {
        assert!(preintervention_policy(&CANONICAL, 0).is_err());
    }

    #[test]
    fn invalid_model_is_rejected() {
        let bad = ModelParams {
            b: 0.6,
            ..CANONICAL
        };
        assert!(matches!(
            event_probabilities(&bad, 3),
            Err(Error::InvalidModel(_))
        ));
    }
}
