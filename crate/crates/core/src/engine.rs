//! Single-run execution: world state, risky draws, and the mediator/agent loop.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64(seed)`. Stream 0 draws the world state and then one
//! uniform per stage for the risky draw; stream 1 is reserved for the
//! mediator's coin. The algorithm is portable, so a seed pins the trace
//! bit-for-bit on every platform.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::StrategyProfile;
use crate::beliefs::{EntryEvent, PolicyTable};
use crate::calibration::MediatorParams;
use crate::error::{Error, Result};
use crate::mediator::{ExploitRoute, Mediator};
use crate::model::{
    realized_utility, Arm, Message, ModelParams, Observation, PhaseSignal, Reward, WorldState,
};

const DRAW_STREAM: u64 = 0;
const COIN_STREAM: u64 = 1;

/// Seed of run `index` in an experiment with `master` seed (SplitMix64 finalizer).
pub fn run_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelParams,
    pub params: MediatorParams,
    /// Number of agents N.
    pub population: u64,
    #[serde(default)]
    pub profile: StrategyProfile,
    pub seed: u64,
    #[serde(default)]
    pub forced_state: Option<WorldState>,
    /// Risky draws for the first stages; later stages are sampled.
    #[serde(default)]
    pub forced_rewards: Option<Vec<bool>>,
    #[serde(default)]
    pub forced_coin: Option<bool>,
}

impl RunConfig {
    pub fn new(model: ModelParams, params: MediatorParams, population: u64, seed: u64) -> Self {
        Self {
            model,
            params,
            population,
            profile: StrategyProfile::Compliant,
            seed,
            forced_state: None,
            forced_rewards: None,
            forced_coin: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let p = &self.params;
        if p.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if self.population < p.k {
            return Err(Error::Config(format!(
                "N < K (population {} smaller than sample size {})",
                self.population, p.k
            )));
        }
        if !(0.0..=1.0).contains(&p.delta) {
            return Err(Error::Config(format!("delta {} outside [0, 1]", p.delta)));
        }
        if !(p.beta > 0.0 && p.beta.is_finite()) {
            return Err(Error::Config(format!(
                "beta must be positive, got {}",
                p.beta
            )));
        }
        let expected = p.beta / (2.0 * p.k as f64);
        if (p.subsidy - expected).abs() > 1e-12 * expected {
            return Err(Error::Config(format!(
                "subsidy {} is not beta/(2K) = {expected}",
                p.subsidy
            )));
        }
        if let StrategyProfile::ScriptedDeviant { stages, .. } = &self.profile {
            if let Some(&bad) = stages.iter().find(|&&s| s == 0 || s > self.population) {
                return Err(Error::Config(format!(
                    "deviation stage {bad} outside 1..=N"
                )));
            }
        }
        Ok(())
    }
}

/// One stage of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: u64,
    pub observation: Observation,
    pub message: Message,
    pub action: Arm,
    pub reward: Reward,
    /// Risky draw t; realized even when the agent pulls S.
    pub risky_draw: bool,
    pub subsidy_paid: f64,
}

impl StageRecord {
    pub fn complied(&self) -> bool {
        self.action == self.message.arm
    }

    /// (comply, deviate) payoffs on this stage's draw.
    pub fn counterfactual_payoffs(&self, b: f64) -> (f64, f64) {
        let msg = &self.message;
        (
            realized_utility(msg.arm, msg, self.risky_draw, b),
            realized_utility(msg.arm.other(), msg, self.risky_draw, b),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mean_reward: f64,
    pub total_subsidy_promised: f64,
    pub total_subsidy_paid: f64,
    pub subsidy_units: u64,
    pub exploit_entered: bool,
    pub exploit_stage: Option<u64>,
    pub exploit_value: Option<Arm>,
    pub exploit_route: Option<ExploitRoute>,
    pub entry_event: Option<EntryEvent>,
    /// Whether any s2 message was issued.
    pub switching_entered: bool,
    /// X: s2 stages whose predecessor got a risky 0.
    pub x: u64,
    pub switch_to_s_count: u64,
    pub switch_to_r_count: u64,
    pub r_sum: u64,
    pub deviation_stage: Option<u64>,
}

impl RunSummary {
    pub fn exploit_via_switching(&self) -> bool {
        self.exploit_route == Some(ExploitRoute::Switching)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub config: RunConfig,
    pub world_state: WorldState,
    pub coin: Option<bool>,
    pub records: Vec<StageRecord>,
    pub summary: RunSummary,
}

impl RunTrace {
    /// (comply, deviate) payoffs for 1-based `stage`.
    pub fn counterfactual_payoffs(&self, stage: u64) -> Result<(f64, f64)> {
        let rec = stage
            .checked_sub(1)
            .and_then(|i| self.records.get(i as usize))
            .ok_or_else(|| Error::InvalidArgument(format!("stage {stage} outside the trace")))?;
        Ok(rec.counterfactual_payoffs(self.config.model.b))
    }

    /// Writes the stage table as CSV (without header comments).
    pub fn write_csv<W: Write>(&self, run_id: u64, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_COLUMNS)?;
        let b = self.config.model.b;
        for r in &self.records {
            w.write_record([
                run_id.to_string(),
                self.world_state.to_string(),
                r.stage.to_string(),
                r.message.signal.to_string(),
                r.message.arm.to_string(),
                r.message.subsidy.to_string(),
                r.action.to_string(),
                r.reward.value(b).to_string(),
                u8::from(r.risky_draw).to_string(),
                r.subsidy_paid.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const TRACE_COLUMNS: [&str; 10] = [
    "run_id",
    "state",
    "stage",
    "phase_signal",
    "rec_arm",
    "subsidy_offered",
    "action",
    "reward",
    "risky_draw",
    "subsidy_paid",
];

/// Executes one run, passing each stage to `visit` as it completes.
/// Returns the world state, the coin and the run summary.
pub fn run_with<F>(config: &RunConfig, visit: F) -> Result<(WorldState, Option<bool>, RunSummary)>
where
    F: FnMut(&StageRecord),
{
    config.validate()?;
    let mediator = Mediator::new(config.model, config.params, config.population)?;
    drive(config, mediator, visit)
}

/// As [`run_with`], reusing a policy table shared across runs with the same model and K.
pub fn run_with_policy<F>(
    config: &RunConfig,
    policy: &Arc<PolicyTable>,
    visit: F,
) -> Result<(WorldState, Option<bool>, RunSummary)>
where
    F: FnMut(&StageRecord),
{
    config.validate()?;
    let mediator = Mediator::with_policy(
        config.model,
        config.params,
        config.population,
        Arc::clone(policy),
    )?;
    drive(config, mediator, visit)
}

/// Executes one run and keeps every stage.
pub fn run(config: &RunConfig) -> Result<RunTrace> {
    let mut records = Vec::with_capacity(config.population.min(1 << 24) as usize);
    let (world_state, coin, summary) = run_with(config, |r| records.push(*r))?;
    Ok(RunTrace {
        config: config.clone(),
        world_state,
        coin,
        records,
        summary,
    })
}

fn drive<F>(
    config: &RunConfig,
    mut mediator: Mediator,
    mut visit: F,
) -> Result<(WorldState, Option<bool>, RunSummary)>
where
    F: FnMut(&StageRecord),
{
    let model = &config.model;
    let mut draws = ChaCha8Rng::seed_from_u64(config.seed);
    draws.set_stream(DRAW_STREAM);
    let mut coin_rng = ChaCha8Rng::seed_from_u64(config.seed);
    coin_rng.set_stream(COIN_STREAM);

    let state_draw: f64 = draws.gen();
    let world_state = config.forced_state.unwrap_or(if state_draw < model.q {
        WorldState::H
    } else {
        WorldState::L
    });
    let p = model.success_prob(world_state);
    if let Some(cf) = config.forced_coin {
        mediator.force_coin(cf);
    }
    let forced = config.forced_rewards.as_deref().unwrap_or(&[]);

    let mut total_reward = 0.0;
    let mut promised_units = 0u64;
    let mut paid_units = 0u64;
    let mut x = 0u64;
    let mut to_s = 0u64;
    let mut to_r = 0u64;
    let mut switching_entered = false;
    let mut prev: Option<Reward> = None;

    for stage in 1..=config.population {
        let obs = Observation::from_predecessor(prev);
        let message = mediator.next_message(&mut coin_rng)?;
        let risky_draw = match forced.get(stage as usize - 1) {
            Some(&t) => t,
            None => draws.gen::<f64>() < p,
        };
        let action = config.profile.choose(model, stage, obs, &message);
        let reward = Reward::realize(action, risky_draw);
        mediator.record(action, reward)?;

        if message.is_subsidized() {
            promised_units += 1;
            if action == message.arm {
                paid_units += 1;
            }
        }
        if message.signal == PhaseSignal::S2 {
            switching_entered = true;
            match obs {
                Observation::Failure => {
                    x += 1;
                    to_s += u64::from(message.is_subsidized());
                }
                Observation::Safe => to_r += u64::from(message.is_subsidized()),
                _ => {}
            }
        }
        total_reward += reward.value(model.b);
        let subsidy_paid = if action == message.arm {
            message.subsidy
        } else {
            0.0
        };
        visit(&StageRecord {
            stage,
            observation: obs,
            message,
            action,
            reward,
            risky_draw,
            subsidy_paid,
        });
        prev = Some(reward);
    }

    let params = &config.params;
    let summary = RunSummary {
        mean_reward: total_reward / config.population as f64,
        total_subsidy_promised: params.promised_amount(promised_units),
        total_subsidy_paid: params.promised_amount(paid_units),
        subsidy_units: promised_units,
        exploit_entered: mediator.exploit_stage().is_some(),
        exploit_stage: mediator.exploit_stage(),
        exploit_value: mediator.exploit_value(),
        exploit_route: mediator.exploit_route(),
        entry_event: mediator.entry_event(),
        switching_entered,
        x,
        switch_to_s_count: to_s,
        switch_to_r_count: to_r,
        r_sum: mediator.r_sum(),
        deviation_stage: mediator.deviation_stage(),
    };
    Ok((world_state, mediator.coin(), summary))
}
