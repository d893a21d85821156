//! The innkeeper state machine.
//!
//! One [`Mediator`] drives one run. Each stage is a `next_message` /
//! `record` pair: the mediator issues a private message, the agent acts, and
//! the mediator records the action and the reward it produced.
//!
//! Phases run pre-intervention (s1) for K stages, then either exploit at
//! once (all K pulled R, high mean, coin 0) or switch (s2) until 2K
//! subsidized switches have been recorded, then exploit (s3). A mismatch
//! between action and recommendation before exploitation moves the mediator
//! to deviation treatment (s4) for the rest of the run.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beliefs::{self, EntryEvent, PolicyTable};
use crate::calibration::MediatorParams;
use crate::error::{Error, Result};
use crate::model::{Arm, Message, ModelParams, Observation, PhaseSignal, Reward};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    PreIntervention,
    Switching,
    Exploit,
    Deviation,
}

/// How exploitation was entered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExploitRoute {
    /// Straight after the pre-intervention phase (R1 and coin 0).
    Direct,
    /// After 2K recorded switches.
    Switching,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub recommended: Arm,
    pub action: Arm,
    pub reward: Reward,
}

/// Exploit value after the switching phase: R iff the K counted risky
/// rewards average at least the midpoint `(p_H + p_L)/2`.
pub fn exploit_decision(r_sum: u64, k: u64, model: &ModelParams) -> Arm {
    if model.mean_reaches_midpoint(r_sum, k) {
        Arm::R
    } else {
        Arm::S
    }
}

/// Serializable view of the mediator's counters, for trace dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediatorSnapshot {
    pub stage: u64,
    pub phase: Phase,
    pub coin: Option<bool>,
    pub exploit_flag: bool,
    pub deviation_flag: bool,
    pub exploit_value: Option<Arm>,
    pub switching_count: u64,
    pub r_count: u64,
    pub r_sum: u64,
    pub subsidy_units: u64,
    pub promised_subsidy: f64,
}

#[derive(Debug, Clone)]
pub struct Mediator {
    model: ModelParams,
    params: MediatorParams,
    population: u64,
    policy: Arc<PolicyTable>,
    forced_coin: Option<bool>,

    stage: u64,
    phase: Phase,
    pending: Option<Message>,
    last_reward: Option<Reward>,
    history: Vec<HistoryEntry>,

    coin: Option<bool>,
    entry_event: Option<EntryEvent>,
    exploit_flag: bool,
    deviation_flag: bool,
    exploit_value: Option<Arm>,
    exploit_route: Option<ExploitRoute>,
    exploit_stage: Option<u64>,
    deviation_stage: Option<u64>,

    pre_all_risky: bool,
    pre_successes: u64,
    switching_count: u64,
    r_count: u64,
    r_sum: u64,
    failure_switches: u64,
    safe_switches: u64,
    risky_pulls: u64,
    risky_successes: u64,
}

impl Mediator {
    pub fn new(model: ModelParams, params: MediatorParams, population: u64) -> Result<Self> {
        let policy = beliefs::preintervention_policy(&model, params.k)?;
        Self::with_policy(model, params, population, Arc::new(policy))
    }

    /// Builds a mediator around a policy table shared across runs.
    pub fn with_policy(
        model: ModelParams,
        params: MediatorParams,
        population: u64,
        policy: Arc<PolicyTable>,
    ) -> Result<Self> {
        model.validate()?;
        if params.k == 0 {
            return Err(Error::InvalidArgument("K must be at least 1".into()));
        }
        if policy.sample_size() != params.k {
            return Err(Error::InvalidArgument(format!(
                "policy table built for K={} but mediator has K={}",
                policy.sample_size(),
                params.k
            )));
        }
        if !(0.0..=1.0).contains(&params.delta) {
            return Err(Error::InvalidArgument(format!(
                "delta {} outside [0, 1]",
                params.delta
            )));
        }
        if population < params.k {
            return Err(Error::InvalidArgument(format!(
                "N < K (population {population}, sample size {})",
                params.k
            )));
        }
        Ok(Self {
            model,
            params,
            population,
            policy,
            forced_coin: None,
            stage: 0,
            phase: Phase::PreIntervention,
            pending: None,
            last_reward: None,
            history: Vec::with_capacity(population.min(1 << 20) as usize),
            coin: None,
            entry_event: None,
            exploit_flag: false,
            deviation_flag: false,
            exploit_value: None,
            exploit_route: None,
            exploit_stage: None,
            deviation_stage: None,
            pre_all_risky: true,
            pre_successes: 0,
            switching_count: 0,
            r_count: 0,
            r_sum: 0,
            failure_switches: 0,
            safe_switches: 0,
            risky_pulls: 0,
            risky_successes: 0,
        })
    }

    /// Fixes the coin outcome instead of flipping it at stage K+1.
    pub fn force_coin(&mut self, cf: bool) {
        self.forced_coin = Some(cf);
    }

    /// Message for the next stage. The coin is flipped with `rng` at the
    /// K+1 transition unless forced.
    pub fn next_message<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Message> {
        let stage = self.stage + 1;
        if self.pending.is_some() {
            return Err(Error::AwaitingRecord { stage });
        }
        if stage > self.population {
            return Err(Error::PopulationExhausted {
                population: self.population,
            });
        }
        let k = self.params.k;
        if self.phase == Phase::PreIntervention && stage == k + 1 {
            self.leave_preintervention(stage, rng);
        }
        if self.phase == Phase::Switching && self.switching_count >= self.params.switch_target() {
            let value = exploit_decision(self.r_sum, k, &self.model);
            self.enter_exploit(value, ExploitRoute::Switching, stage);
        }
        let obs = Observation::from_predecessor(self.last_reward);
        let msg = match self.phase {
            Phase::PreIntervention => {
                let arm = if stage == 1 {
                    Arm::R
                } else {
                    self.policy.arm(stage, obs)
                };
                Message::new(arm, PhaseSignal::S1, 0.0)
            }
            Phase::Switching => match obs {
                Observation::Success => Message::new(Arm::R, PhaseSignal::S2, 0.0),
                Observation::Failure => Message::new(Arm::S, PhaseSignal::S2, self.params.subsidy),
                Observation::Safe => Message::new(Arm::R, PhaseSignal::S2, self.params.subsidy),
                Observation::Start => unreachable!("switching starts after stage K >= 1"),
            },
            Phase::Exploit => {
                let arm = self.exploit_value.expect("exploit phase has a value");
                Message::new(arm, PhaseSignal::S3, 0.0)
            }
            Phase::Deviation => Message::new(self.history_best_response(), PhaseSignal::S4, 0.0),
        };
        self.pending = Some(msg);
        Ok(msg)
    }

    fn leave_preintervention<R: Rng + ?Sized>(&mut self, stage: u64, rng: &mut R) {
        let k = self.params.k;
        let cf = match self.forced_coin {
            Some(cf) => cf,
            None => rng.gen::<f64>() < self.params.delta,
        };
        self.coin = Some(cf);
        let high = self.model.mean_reaches_midpoint(self.pre_successes, k);
        let event = match (self.pre_all_risky, high) {
            (true, true) => EntryEvent::R1,
            (true, false) => EntryEvent::R2,
            (false, _) => EntryEvent::S,
        };
        self.entry_event = Some(event);
        if event == EntryEvent::R1 && !cf {
            self.enter_exploit(Arm::R, ExploitRoute::Direct, stage);
        } else {
            self.phase = Phase::Switching;
            self.switching_count = 0;
        }
    }

    fn enter_exploit(&mut self, value: Arm, route: ExploitRoute, stage: u64) {
        self.phase = Phase::Exploit;
        self.exploit_flag = true;
        self.exploit_value = Some(value);
        self.exploit_route = Some(route);
        self.exploit_stage = Some(stage);
    }

    /// R iff the posterior mean from every risky pull recorded so far beats b.
    fn history_best_response(&self) -> Arm {
        let posterior =
            beliefs::posterior_from_counts(&self.model, self.risky_successes, self.risky_pulls)
                .unwrap_or(self.model.q);
        if self.model.expected_risky(posterior) > self.model.b {
            Arm::R
        } else {
            Arm::S
        }
    }

    /// Records the agent's action for the pending message and the reward it
    /// produced.
    pub fn record(&mut self, action: Arm, reward: Reward) -> Result<()> {
        let stage = self.stage + 1;
        let msg = self.pending.ok_or(Error::NoPendingMessage { stage })?;
        if reward.arm() != action {
            return Err(Error::InconsistentReward { action, reward });
        }
        self.pending = None;
        self.stage = stage;
        self.last_reward = Some(reward);
        self.history.push(HistoryEntry {
            recommended: msg.arm,
            action,
            reward,
        });
        if action == Arm::R {
            self.risky_pulls += 1;
            self.risky_successes += u64::from(reward == Reward::One);
        }
        if stage <= self.params.k {
            self.pre_all_risky &= action == Arm::R;
            self.pre_successes += u64::from(reward == Reward::One);
        }

        if action != msg.arm && !self.exploit_flag {
            if !self.deviation_flag {
                self.deviation_stage = Some(stage);
            }
            self.deviation_flag = true;
            self.phase = Phase::Deviation;
            return Ok(());
        }
        if self.phase == Phase::Switching {
            if self.r_count < self.params.k && action == Arm::R {
                self.r_count += 1;
                self.r_sum += u64::from(reward == Reward::One);
            }
            if msg.is_subsidized() {
                self.switching_count += 1;
                match msg.arm {
                    Arm::S => self.failure_switches += 1,
                    Arm::R => self.safe_switches += 1,
                }
            }
        }
        Ok(())
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn params(&self) -> &MediatorParams {
        &self.params
    }

    pub fn population(&self) -> u64 {
        self.population
    }

    pub fn policy(&self) -> &Arc<PolicyTable> {
        &self.policy
    }

    /// Number of completed (recorded) stages.
    pub fn stage(&self) -> u64 {
        self.stage
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn coin(&self) -> Option<bool> {
        self.coin
    }

    pub fn entry_event(&self) -> Option<EntryEvent> {
        self.entry_event
    }

    pub fn exploit_value(&self) -> Option<Arm> {
        self.exploit_value
    }

    pub fn exploit_route(&self) -> Option<ExploitRoute> {
        self.exploit_route
    }

    /// Stage whose message first carried s3.
    pub fn exploit_stage(&self) -> Option<u64> {
        self.exploit_stage
    }

    pub fn deviation_stage(&self) -> Option<u64> {
        self.deviation_stage
    }

    pub fn switching_count(&self) -> u64 {
        self.switching_count
    }

    pub fn r_count(&self) -> u64 {
        self.r_count
    }

    pub fn r_sum(&self) -> u64 {
        self.r_sum
    }

    /// X: switching stages that followed a risky failure.
    pub fn failure_switches(&self) -> u64 {
        self.failure_switches
    }

    /// Switching stages that followed a safe pull.
    pub fn safe_switches(&self) -> u64 {
        self.safe_switches
    }

    /// Subsidized messages issued and recorded so far.
    pub fn subsidy_units(&self) -> u64 {
        self.failure_switches + self.safe_switches
    }

    pub fn promised_subsidy(&self) -> f64 {
        self.params.promised_amount(self.subsidy_units())
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn snapshot(&self) -> MediatorSnapshot {
        MediatorSnapshot {
            stage: self.stage,
            phase: self.phase,
            coin: self.coin,
            exploit_flag: self.exploit_flag,
            deviation_flag: self.deviation_flag,
            exploit_value: self.exploit_value,
            switching_count: self.switching_count,
            r_count: self.r_count,
            r_sum: self.r_sum,
            subsidy_units: self.subsidy_units(),
            promised_subsidy: self.promised_subsidy(),
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::rngs::mock::StepRng;

    use super::*;
    use crate::calibration;

    const CANONICAL: ModelParams = ModelParams::new(0.5, 0.8, 0.3, 0.5);

    fn params(k: u64, beta: f64) -> MediatorParams {
        calibration::calibrate_with_k(&CANONICAL, k, 0.1, beta)
            .unwrap()
            .params
    }

    fn rng() -> StepRng {
        StepRng::new(0, 0)
    }

    fn play(m: &mut Mediator, action: Arm, draw: bool) -> Message {
        let msg = m.next_message(&mut rng()).unwrap();
        m.record(action, Reward::realize(action, draw)).unwrap();
        msg
    }

    #[test]
    fn first_message_is_risky_preintervention() {
        let mut m = Mediator::new(CANONICAL, params(3, 1.0), 10).unwrap();
        let msg = m.next_message(&mut rng()).unwrap();
        assert_eq!(msg, Message::new(Arm::R, PhaseSignal::S1, 0.0));
    }

    #[test]
    fn direct_exploit_after_high_sample_and_coin_zero() {
        let mut m = Mediator::new(CANONICAL, params(1, 1.0), 4).unwrap();
        m.force_coin(false);
        play(&mut m, Arm::R, true);
        let msg = m.next_message(&mut rng()).unwrap();
        assert_eq!(msg, Message::new(Arm::R, PhaseSignal::S3, 0.0));
        assert_eq!(m.exploit_route(), Some(ExploitRoute::Direct));
        assert_eq!(m.entry_event(), Some(EntryEvent::R1));
    }

    #[test]
    fn switching_messages_follow_predecessor() {
        let p = params(2, 1.0);
        let mut m = Mediator::new(CANONICAL, p, 20).unwrap();
        m.force_coin(true);
        play(&mut m, Arm::R, true);
        play(&mut m, Arm::R, true);
        // R1 with coin 1: switching
        let msg = play(&mut m, Arm::R, false);
        assert_eq!(msg, Message::new(Arm::R, PhaseSignal::S2, 0.0));
        let msg = play(&mut m, Arm::S, false);
        assert_eq!(msg, Message::new(Arm::S, PhaseSignal::S2, p.subsidy));
        let msg = m.next_message(&mut rng()).unwrap();
        assert_eq!(msg, Message::new(Arm::R, PhaseSignal::S2, p.subsidy));
    }

    #[test]
    fn exploit_ignores_deviations() {
        let mut m = Mediator::new(CANONICAL, params(1, 1.0), 5).unwrap();
        m.force_coin(false);
        play(&mut m, Arm::R, true);
        let before = m.snapshot();
        play(&mut m, Arm::S, false);
        let after = m.snapshot();
        assert_eq!(after.phase, Phase::Exploit);
        assert!(!after.deviation_flag);
        assert_eq!(
            (after.switching_count, after.r_count),
            (before.switching_count, before.r_count)
        );
        assert_eq!(m.history().len(), 2);
        assert_eq!(m.deviation_stage(), None);
    }

    #[test]
    fn preintervention_deviation_switches_to_s4() {
        let mut m = Mediator::new(CANONICAL, params(3, 1.0), 10).unwrap();
        play(&mut m, Arm::S, false);
        assert_eq!(m.phase(), Phase::Deviation);
        assert_eq!(m.deviation_stage(), Some(1));
        let msg = m.next_message(&mut rng()).unwrap();
        assert_eq!(msg.signal, PhaseSignal::S4);
        assert_eq!(msg.subsidy, 0.0);
        // no risky pulls yet: prior mean beats b
        assert_eq!(msg.arm, Arm::R);
        assert_eq!(m.coin(), None);
    }

    #[test]
    fn completion_enters_exploit_on_next_message() {
        let p = params(1, 1.0);
        let mut m = Mediator::new(CANONICAL, p, 10).unwrap();
        m.force_coin(true);
        play(&mut m, Arm::R, false); // R2
        play(&mut m, Arm::S, false); // (S, s2, sub)
        assert_eq!(m.phase(), Phase::Switching);
        play(&mut m, Arm::R, true); // (R, s2, sub): 2K-th switch, counted pull
        assert_eq!(m.phase(), Phase::Switching);
        assert_eq!(m.switching_count(), 2);
        assert_eq!((m.r_count(), m.r_sum()), (1, 1));
        let msg = m.next_message(&mut rng()).unwrap();
        assert_eq!(msg, Message::new(Arm::R, PhaseSignal::S3, 0.0));
        assert_eq!(m.exploit_route(), Some(ExploitRoute::Switching));
        assert_eq!(m.promised_subsidy(), 1.0);
    }

    #[test]
    fn exploit_decision_boundaries() {
        assert_eq!(exploit_decision(20, 20, &CANONICAL), Arm::R);
        assert_eq!(exploit_decision(0, 20, &CANONICAL), Arm::S);
        assert_eq!(exploit_decision(11, 20, &CANONICAL), Arm::R);
        assert_eq!(exploit_decision(10, 20, &CANONICAL), Arm::S);
    }

    #[test]
    fn protocol_errors() {
        let mut m = Mediator::new(CANONICAL, params(1, 1.0), 1).unwrap();
        assert!(matches!(
            m.record(Arm::R, Reward::One),
            Err(Error::NoPendingMessage { stage: 1 })
        ));
        m.next_message(&mut rng()).unwrap();
        assert!(matches!(
            m.next_message(&mut rng()),
            Err(Error::AwaitingRecord { stage: 1 })
        ));
        assert!(matches!(
            m.record(Arm::R, Reward::Safe),
            Err(Error::InconsistentReward { .. })
        ));
        m.record(Arm::R, Reward::One).unwrap();
        assert!(matches!(
            m.record(Arm::R, Reward::One),
            Err(Error::NoPendingMessage { stage: 2 })
        ));
        assert!(matches!(
            m.next_message(&mut rng()),
            Err(Error::PopulationExhausted { population: 1 })
        ));
    }

    #[test]
    fn population_below_sample_size_is_rejected() {
        assert!(Mediator::new(CANONICAL, params(135, 1.0), 10).is_err());
    }
}
