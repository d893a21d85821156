//! Monte Carlo driver and statistical audit.
//!
//! Runs are independent clusters: every stage of a run shares the same world
//! state, so per-class standard errors are computed with the cluster-robust
//! ratio estimator over runs rather than treating stages as independent.
//! Runs execute in parallel chunks; results are folded in run-index order, so
//! a report depends only on `(template, runs, master_seed, sampling)`.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beliefs::{self, EntryEvent};
use crate::calibration::{horizon_tail, MediatorParams};
use crate::engine::{self, run_seed, RunConfig, RunSummary, StageRecord};
use crate::error::{Error, Result};
use crate::model::{Arm, ModelParams, Observation, PhaseSignal, WorldState};

const CHUNK: usize = 64;

/// Conditioning set of an agent: phase signal, recommendation, what it saw
/// of its predecessor, and whether a subsidy was offered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InfoClass {
    pub signal: PhaseSignal,
    pub arm: Arm,
    pub observation: Observation,
    pub subsidized: bool,
}

const FINE_SLOTS: usize = 64;
/// Signal × arm, pooled over observation and subsidy.
const COARSE_SLOTS: usize = 8;

impl InfoClass {
    pub fn of(rec: &StageRecord) -> Self {
        Self {
            signal: rec.message.signal,
            arm: rec.message.arm,
            observation: rec.observation,
            subsidized: rec.message.is_subsidized(),
        }
    }

    fn slot(&self) -> usize {
        self.signal.index() * 16
            + arm_index(self.arm) * 8
            + self.observation.index() * 2
            + usize::from(self.subsidized)
    }

    fn from_slot(slot: usize) -> Self {
        Self {
            signal: PhaseSignal::ALL[slot / 16],
            arm: [Arm::R, Arm::S][(slot / 8) % 2],
            observation: Observation::ALL[(slot / 2) % 4],
            subsidized: slot % 2 == 1,
        }
    }
}

fn arm_index(arm: Arm) -> usize {
    match arm {
        Arm::R => 0,
        Arm::S => 1,
    }
}

fn coarse_slot(signal: PhaseSignal, arm: Arm) -> usize {
    signal.index() * 2 + arm_index(arm)
}

fn state_index(state: WorldState) -> usize {
    match state {
        WorldState::H => 0,
        WorldState::L => 1,
    }
}

/// How each run's world state is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSampling {
    /// Drawn from the prior q inside each run.
    #[default]
    Prior,
    /// Fixed for every run.
    Forced(WorldState),
    /// The first round(q·runs) runs in H, the rest in L.
    Stratified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub template: RunConfig,
    pub runs: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub sampling: StateSampling,
    /// Width of stage buckets for the stage-resolved class table.
    #[serde(default)]
    pub stage_bucket: Option<u64>,
}

impl MonteCarloConfig {
    pub fn new(template: RunConfig, runs: u64, master_seed: u64) -> Self {
        Self {
            template,
            runs,
            master_seed,
            sampling: StateSampling::Prior,
            stage_bucket: None,
        }
    }

    fn forced_state(&self, index: u64) -> Option<WorldState> {
        match self.sampling {
            StateSampling::Prior => self.template.forced_state,
            StateSampling::Forced(w) => Some(w),
            StateSampling::Stratified => {
                let high = (self.template.model.q * self.runs as f64).round() as u64;
                Some(if index < high {
                    WorldState::H
                } else {
                    WorldState::L
                })
            }
        }
    }

    fn run_config(&self, index: u64) -> RunConfig {
        let mut cfg = self.template.clone();
        cfg.seed = run_seed(self.master_seed, index);
        cfg.forced_state = self.forced_state(index);
        cfg
    }
}

// Per-run quantities tracked per class: t, 1{H}, comply payoff, deviate payoff, margin.
const Q_T: usize = 0;
const Q_H: usize = 1;
const Q_COMPLY: usize = 2;
const Q_DEVIATE: usize = 3;
const Q_MARGIN: usize = 4;
const QUANTITIES: usize = 5;

#[derive(Debug, Clone, Copy, Default)]
struct RunTotals {
    n: f64,
    y: [f64; QUANTITIES],
}

impl RunTotals {
    fn add(&mut self, t: bool, high: bool, comply: f64, deviate: f64) {
        self.n += 1.0;
        self.y[Q_T] += f64::from(u8::from(t));
        self.y[Q_H] += f64::from(u8::from(high));
        self.y[Q_COMPLY] += comply;
        self.y[Q_DEVIATE] += deviate;
        self.y[Q_MARGIN] += comply - deviate;
    }
}

/// Sums over runs of per-run class totals, enough for ratio means and
/// cluster-robust standard errors.
#[derive(Debug, Clone, Copy, Default)]
struct ClusterSums {
    n: f64,
    n_sq: f64,
    y: [f64; QUANTITIES],
    y_sq: [f64; QUANTITIES],
    y_n: [f64; QUANTITIES],
}

impl ClusterSums {
    fn add_run(&mut self, t: &RunTotals) {
        if t.n == 0.0 {
            return;
        }
        self.n += t.n;
        self.n_sq += t.n * t.n;
        for q in 0..QUANTITIES {
            self.y[q] += t.y[q];
            self.y_sq[q] += t.y[q] * t.y[q];
            self.y_n[q] += t.y[q] * t.n;
        }
    }

    fn mean(&self, q: usize) -> f64 {
        self.y[q] / self.n
    }

    fn se(&self, q: usize, runs: u64) -> f64 {
        if runs < 2 || self.n == 0.0 {
            return f64::NAN;
        }
        let mu = self.mean(q);
        let resid = (self.y_sq[q] - 2.0 * mu * self.y_n[q] + mu * mu * self.n_sq).max(0.0);
        let r = runs as f64;
        (resid * r / (r - 1.0)).sqrt() / self.n
    }
}

/// One row of the class table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: InfoClass,
    /// Subsidy offered in this class (0 or β/2K).
    pub subsidy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage_bucket: Option<u64>,
    pub count: u64,
    pub p_h_hat: f64,
    pub e_t_hat: f64,
    pub se: f64,
    pub comply_mean: f64,
    pub deviate_mean: f64,
    pub margin: f64,
    pub margin_se: f64,
}

/// A class pooled over observation and subsidy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseClassReport {
    pub signal: PhaseSignal,
    pub arm: Arm,
    pub count: u64,
    pub e_t_hat: f64,
    pub se: f64,
    pub margin: f64,
    pub margin_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub state: WorldState,
    pub runs: u64,
    pub mean_reward: f64,
    pub mean_reward_se: f64,
    pub max_total_subsidy: f64,
    pub max_subsidy_units: u64,
    pub budget_violations: u64,
    /// Runs that issued at least one s2 message.
    pub switching_runs: u64,
    /// Switching runs with fewer than K failure-switches.
    pub x_below_k: u64,
    /// `x_below_k / switching_runs`.
    pub p_x_below_k: f64,
    pub exploit_runs: u64,
    pub misclassified: u64,
    pub misclassification_rate: f64,
    pub completed_runs: u64,
    pub deviation_runs: u64,
}

/// Runs that finished the switching phase, with the paired comparison of
/// risky draws at switch-to-S versus switch-to-R stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingReport {
    pub completed_runs: u64,
    /// Completed runs with exactly K switches of each kind.
    pub exact_count_runs: u64,
    pub mean_t_switch_to_s: f64,
    pub mean_t_switch_to_r: f64,
    pub gap: f64,
    pub gap_se: f64,
}

/// Risky draw at stage K+1 in runs that entered switching, by entry event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryBlendReport {
    pub r1_count: u64,
    pub r1_mean: f64,
    pub r2_count: u64,
    pub r2_mean: f64,
    pub s_count: u64,
    pub s_mean: f64,
    pub blend: f64,
    pub blend_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub config: MonteCarloConfig,
    pub total_stages: u64,
    pub classes: Vec<ClassReport>,
    pub coarse_classes: Vec<CoarseClassReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bucketed_classes: Vec<ClassReport>,
    pub per_state: Vec<StateReport>,
    pub max_total_subsidy: f64,
    pub switching: SwitchingReport,
    pub entry_blend: EntryBlendReport,
}

impl AuditReport {
    pub fn class(&self, class: InfoClass) -> Option<&ClassReport> {
        self.classes.iter().find(|c| c.class == class)
    }

    pub fn coarse(&self, signal: PhaseSignal, arm: Arm) -> Option<&CoarseClassReport> {
        self.coarse_classes
            .iter()
            .find(|c| c.signal == signal && c.arm == arm)
    }

    pub fn state(&self, state: WorldState) -> Option<&StateReport> {
        self.per_state.iter().find(|s| s.state == state)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes the class table as CSV.
    pub fn write_classes_csv<W: Write>(&self, out: W) -> Result<()> {
        let bucketed = !self.bucketed_classes.is_empty();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = CLASS_COLUMNS.to_vec();
        if bucketed {
            header.push("stage_bucket");
        }
        w.write_record(&header)?;
        let rows = self.classes.iter().chain(self.bucketed_classes.iter());
        for c in rows {
            let mut row = vec![
                c.class.signal.to_string(),
                c.class.arm.to_string(),
                c.class.observation.to_string(),
                c.subsidy.to_string(),
                c.count.to_string(),
                c.p_h_hat.to_string(),
                c.e_t_hat.to_string(),
                c.se.to_string(),
                c.comply_mean.to_string(),
                c.deviate_mean.to_string(),
                c.margin.to_string(),
            ];
            if bucketed {
                row.push(c.stage_bucket.map(|b| b.to_string()).unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const CLASS_COLUMNS: [&str; 11] = [
    "class_phase",
    "class_rec",
    "class_obs",
    "class_subsidy",
    "count",
    "p_h_hat",
    "e_t_hat",
    "se",
    "comply_mean",
    "deviate_mean",
    "margin",
];

/// Everything one run contributes to the report.
struct RunResult {
    state: WorldState,
    summary: RunSummary,
    fine: [RunTotals; FINE_SLOTS],
    coarse: [RunTotals; COARSE_SLOTS],
    bucketed: BTreeMap<(u64, usize), RunTotals>,
    /// Sums of t at switch-to-S / switch-to-R stages.
    t_to_s: f64,
    t_to_r: f64,
    /// t at stage K+1 when it carried s2.
    entry_draw: Option<bool>,
}

fn simulate_one(
    cfg: &MonteCarloConfig,
    index: u64,
    policy: &Arc<beliefs::PolicyTable>,
) -> Result<RunResult> {
    let run_cfg = cfg.run_config(index);
    let b = run_cfg.model.b;
    let entry_stage = run_cfg.params.k + 1;
    let mut fine = [RunTotals::default(); FINE_SLOTS];
    let mut coarse = [RunTotals::default(); COARSE_SLOTS];
    let mut bucketed = BTreeMap::new();
    let mut t_to_s = 0.0;
    let mut t_to_r = 0.0;
    let mut entry_draw = None;
    // The world state is known only after the run; record the class
    // occurrences first and attach the state indicator afterwards.
    let (state, _, summary) = engine::run_with_policy(&run_cfg, policy, |rec| {
        let class = InfoClass::of(rec);
        let (comply, deviate) = rec.counterfactual_payoffs(b);
        fine[class.slot()].add(rec.risky_draw, false, comply, deviate);
        coarse[coarse_slot(class.signal, class.arm)].add(rec.risky_draw, false, comply, deviate);
        if let Some(width) = cfg.stage_bucket {
            let bucket = (rec.stage - 1) / width.max(1);
            bucketed
                .entry((bucket, class.slot()))
                .or_insert_with(RunTotals::default)
                .add(rec.risky_draw, false, comply, deviate);
        }
        if rec.message.signal == PhaseSignal::S2 && rec.message.is_subsidized() {
            match rec.message.arm {
                Arm::S => t_to_s += f64::from(u8::from(rec.risky_draw)),
                Arm::R => t_to_r += f64::from(u8::from(rec.risky_draw)),
            }
        }
        if rec.stage == entry_stage && rec.message.signal == PhaseSignal::S2 {
            entry_draw = Some(rec.risky_draw);
        }
    })?;
    if state == WorldState::H {
        let totals = fine
            .iter_mut()
            .chain(coarse.iter_mut())
            .chain(bucketed.values_mut());
        for t in totals {
            t.y[Q_H] = t.n;
        }
    }
    Ok(RunResult {
        state,
        summary,
        fine,
        coarse,
        bucketed,
        t_to_s,
        t_to_r,
        entry_draw,
    })
}

#[derive(Default)]
struct StateAcc {
    runs: u64,
    reward_sum: f64,
    reward_sq: f64,
    max_subsidy: f64,
    max_units: u64,
    budget_violations: u64,
    switching_runs: u64,
    x_below_k: u64,
    exploit_runs: u64,
    misclassified: u64,
    completed: u64,
    deviation_runs: u64,
}

#[derive(Default)]
struct MeanAcc {
    n: u64,
    sum: f64,
    sq: f64,
}

impl MeanAcc {
    fn add(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sq += v * v;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Standard error of the mean.
    fn se(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        let n = self.n as f64;
        let var = ((self.sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

struct Aggregate {
    runs: u64,
    stages: u64,
    fine: [ClusterSums; FINE_SLOTS],
    coarse: [ClusterSums; COARSE_SLOTS],
    bucketed: BTreeMap<(u64, usize), ClusterSums>,
    states: [StateAcc; 2],
    gap: MeanAcc,
    to_s: MeanAcc,
    to_r: MeanAcc,
    exact_count_runs: u64,
    entry: [MeanAcc; 3],
    entry_all: MeanAcc,
}

impl Aggregate {
    fn new() -> Self {
        Self {
            runs: 0,
            stages: 0,
            fine: [ClusterSums::default(); FINE_SLOTS],
            coarse: [ClusterSums::default(); COARSE_SLOTS],
            bucketed: BTreeMap::new(),
            states: Default::default(),
            gap: MeanAcc::default(),
            to_s: MeanAcc::default(),
            to_r: MeanAcc::default(),
            exact_count_runs: 0,
            entry: Default::default(),
            entry_all: MeanAcc::default(),
        }
    }

    fn fold(&mut self, r: &RunResult, params: &MediatorParams, population: u64) {
        self.runs += 1;
        self.stages += population;
        for (acc, t) in self.fine.iter_mut().zip(&r.fine) {
            acc.add_run(t);
        }
        for (acc, t) in self.coarse.iter_mut().zip(&r.coarse) {
            acc.add_run(t);
        }
        for (key, t) in &r.bucketed {
            self.bucketed.entry(*key).or_default().add_run(t);
        }

        let s = &r.summary;
        let st = &mut self.states[state_index(r.state)];
        st.runs += 1;
        st.reward_sum += s.mean_reward;
        st.reward_sq += s.mean_reward * s.mean_reward;
        if s.total_subsidy_promised > st.max_subsidy || st.runs == 1 {
            st.max_subsidy = st.max_subsidy.max(s.total_subsidy_promised);
        }
        st.max_units = st.max_units.max(s.subsidy_units);
        if s.subsidy_units > params.switch_target() || s.total_subsidy_promised > params.beta {
            st.budget_violations += 1;
        }
        if s.switching_entered {
            st.switching_runs += 1;
            if s.x < params.k {
                st.x_below_k += 1;
            }
        }
        if let Some(value) = s.exploit_value {
            st.exploit_runs += 1;
            let correct = match r.state {
                WorldState::H => Arm::R,
                WorldState::L => Arm::S,
            };
            if value != correct {
                st.misclassified += 1;
            }
        }
        if s.deviation_stage.is_some() {
            st.deviation_runs += 1;
        }
        if s.exploit_via_switching() {
            st.completed += 1;
            if s.switch_to_s_count == params.k && s.switch_to_r_count == params.k {
                self.exact_count_runs += 1;
            }
            let k = params.k as f64;
            let (ms, mr) = (
                r.t_to_s / s.switch_to_s_count.max(1) as f64,
                r.t_to_r / s.switch_to_r_count.max(1) as f64,
            );
            self.to_s.add(ms);
            self.to_r.add(mr);
            self.gap.add((r.t_to_s - r.t_to_r) / k);
        }
        if let (Some(t), Some(event)) = (r.entry_draw, s.entry_event) {
            let v = f64::from(u8::from(t));
            let slot = match event {
                EntryEvent::R1 => 0,
                EntryEvent::R2 => 1,
                EntryEvent::S => 2,
            };
            self.entry[slot].add(v);
            self.entry_all.add(v);
        }
    }

    fn class_report(
        &self,
        slot: usize,
        sums: &ClusterSums,
        params: &MediatorParams,
        stage_bucket: Option<u64>,
    ) -> ClassReport {
        let class = InfoClass::from_slot(slot);
        ClassReport {
            class,
            subsidy: if class.subsidized {
                params.subsidy
            } else {
                0.0
            },
            stage_bucket,
            count: sums.n as u64,
            p_h_hat: sums.mean(Q_H),
            e_t_hat: sums.mean(Q_T),
            se: sums.se(Q_T, self.runs),
            comply_mean: sums.mean(Q_COMPLY),
            deviate_mean: sums.mean(Q_DEVIATE),
            margin: sums.mean(Q_MARGIN),
            margin_se: sums.se(Q_MARGIN, self.runs),
        }
    }

    fn finish(self, config: MonteCarloConfig) -> AuditReport {
        let params = config.template.params;
        let classes = (0..FINE_SLOTS)
            .filter(|&s| self.fine[s].n > 0.0)
            .map(|s| self.class_report(s, &self.fine[s], &params, None))
            .collect();
        let bucketed_classes = self
            .bucketed
            .iter()
            .map(|(&(bucket, slot), sums)| self.class_report(slot, sums, &params, Some(bucket)))
            .collect();
        let coarse_classes = (0..COARSE_SLOTS)
            .filter(|&s| self.coarse[s].n > 0.0)
            .map(|s| {
                let sums = &self.coarse[s];
                CoarseClassReport {
                    signal: PhaseSignal::ALL[s / 2],
                    arm: [Arm::R, Arm::S][s % 2],
                    count: sums.n as u64,
                    e_t_hat: sums.mean(Q_T),
                    se: sums.se(Q_T, self.runs),
                    margin: sums.mean(Q_MARGIN),
                    margin_se: sums.se(Q_MARGIN, self.runs),
                }
            })
            .collect();
        let per_state: Vec<StateReport> = [WorldState::H, WorldState::L]
            .iter()
            .filter_map(|&w| {
                let st = &self.states[state_index(w)];
                (st.runs > 0).then(|| {
                    let n = st.runs as f64;
                    let mean = st.reward_sum / n;
                    let var = if st.runs > 1 {
                        ((st.reward_sq - st.reward_sum * mean) / (n - 1.0)).max(0.0)
                    } else {
                        f64::NAN
                    };
                    StateReport {
                        state: w,
                        runs: st.runs,
                        mean_reward: mean,
                        mean_reward_se: (var / n).sqrt(),
                        max_total_subsidy: st.max_subsidy,
                        max_subsidy_units: st.max_units,
                        budget_violations: st.budget_violations,
                        switching_runs: st.switching_runs,
                        x_below_k: st.x_below_k,
                        p_x_below_k: if st.switching_runs > 0 {
                            st.x_below_k as f64 / st.switching_runs as f64
                        } else {
                            0.0
                        },
                        exploit_runs: st.exploit_runs,
                        misclassified: st.misclassified,
                        misclassification_rate: if st.exploit_runs > 0 {
                            st.misclassified as f64 / st.exploit_runs as f64
                        } else {
                            0.0
                        },
                        completed_runs: st.completed,
                        deviation_runs: st.deviation_runs,
                    }
                })
            })
            .collect();
        let max_total_subsidy = per_state
            .iter()
            .map(|s| s.max_total_subsidy)
            .fold(0.0_f64, f64::max);
        let switching = SwitchingReport {
            completed_runs: self.gap.n,
            exact_count_runs: self.exact_count_runs,
            mean_t_switch_to_s: self.to_s.mean(),
            mean_t_switch_to_r: self.to_r.mean(),
            gap: self.gap.mean(),
            gap_se: self.gap.se(),
        };
        let entry_blend = EntryBlendReport {
            r1_count: self.entry[0].n,
            r1_mean: self.entry[0].mean(),
            r2_count: self.entry[1].n,
            r2_mean: self.entry[1].mean(),
            s_count: self.entry[2].n,
            s_mean: self.entry[2].mean(),
            blend: self.entry_all.mean(),
            blend_se: self.entry_all.se(),
        };
        AuditReport {
            config,
            total_stages: self.stages,
            classes,
            coarse_classes,
            bucketed_classes,
            per_state,
            max_total_subsidy,
            switching,
            entry_blend,
        }
    }
}

/// Executes `config.runs` independent runs and aggregates the audit report.
pub fn monte_carlo(config: &MonteCarloConfig) -> Result<AuditReport> {
    if config.runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    let template = &config.template;
    template.validate()?;
    let policy = Arc::new(beliefs::preintervention_policy(
        &template.model,
        template.params.k,
    )?);
    let mut agg = Aggregate::new();
    let mut start = 0u64;
    while start < config.runs {
        let end = (start + CHUNK as u64).min(config.runs);
        let results: Vec<Result<RunResult>> = (start..end)
            .into_par_iter()
            .map(|i| simulate_one(config, i, &policy))
            .collect();
        for r in results {
            agg.fold(&r?, &template.params, template.population);
        }
        start = end;
    }
    Ok(agg.finish(config.clone()))
}

/// Pass, fail, or not enough data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// One statistical assertion with the numbers behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub estimate: f64,
    pub bound: f64,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, estimate: f64, bound: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            estimate,
            bound,
            detail,
        }
    }

    fn inconclusive(name: impl Into<String>, detail: String) -> Self {
        Self {
            name: name.into(),
            verdict: Verdict::Inconclusive,
            estimate: f64::NAN,
            bound: f64::NAN,
            detail,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// `PASS name: detail`, for console summaries.
    pub fn line(&self) -> String {
        let tag = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        };
        format!("{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Confidence multiplier on standard errors.
    pub z: f64,
    /// Classes with fewer occurrences are inconclusive.
    pub min_count: u64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            z: 3.0,
            min_count: 30,
        }
    }
}

fn class_name(c: &InfoClass) -> String {
    format!(
        "({}, {}, {}, {})",
        c.signal,
        c.arm,
        c.observation,
        if c.subsidized { "β/2K" } else { "0" }
    )
}

/// One-shot deviation audit: per class, mean comply payoff must be at least
/// the mean deviate payoff minus `z·SE` (plus β/2K for subsidized switch
/// classes). Followed by the per-class expectation bounds for the
/// switching and exploitation signals.
pub fn ic_audit(report: &AuditReport, tol: &Tolerances) -> Vec<Check> {
    let params = &report.config.template.params;
    let b = report.config.template.model.b;
    let mut out = Vec::new();
    for c in &report.classes {
        let name = format!("ic {}", class_name(&c.class));
        if c.count < tol.min_count || !c.margin_se.is_finite() {
            out.push(Check::inconclusive(
                name,
                format!("{} occurrences", c.count),
            ));
            continue;
        }
        let extra = if c.class.signal == PhaseSignal::S2 && c.class.subsidized {
            params.subsidy
        } else {
            0.0
        };
        let slack = tol.z * c.margin_se + extra;
        out.push(Check::new(
            name,
            c.margin >= -slack,
            c.margin,
            -slack,
            format!(
                "comply {:.6} vs deviate {:.6}, margin {:.6} ≥ -{:.6} (n={})",
                c.comply_mean, c.deviate_mean, c.margin, slack, c.count
            ),
        ));
    }

    let cls = |arm, observation, subsidized| InfoClass {
        signal: PhaseSignal::S2,
        arm,
        observation,
        subsidized,
    };
    let mut bound_check =
        |name: &str, class: Option<(u64, f64, f64)>, test: &dyn Fn(f64, f64) -> (bool, f64)| {
            match class {
                Some((count, e, se)) if count >= tol.min_count && se.is_finite() => {
                    let (pass, bound) = test(e, se);
                    out.push(Check::new(
                        name,
                        pass,
                        e,
                        bound,
                        format!("E(t)={e:.6}, bound {bound:.6}, se {se:.6}, n={count}"),
                    ));
                }
                Some((count, ..)) => {
                    out.push(Check::inconclusive(name, format!("{count} occurrences")))
                }
                None => out.push(Check::inconclusive(name, "class never occurred".into())),
            }
        };
    let fine = |c: InfoClass| report.class(c).map(|r| (r.count, r.e_t_hat, r.se));
    let z = tol.z;
    let sub = params.subsidy;
    bound_check(
        "stay after success: E(t|s2,R,r=1) ≥ b - z·se",
        fine(cls(Arm::R, Observation::Success, false)),
        &|e, se| (e >= b - z * se, b - z * se),
    );
    bound_check(
        "switch to S: E(t|s2,S,r=0) ≤ b + β/2K + z·se",
        fine(cls(Arm::S, Observation::Failure, true)),
        &|e, se| (e <= b + sub + z * se, b + sub + z * se),
    );
    bound_check(
        "switch to R: E(t|s2,R,r=b) + β/2K ≥ b - z·se",
        fine(cls(Arm::R, Observation::Safe, true)),
        &|e, se| (e + sub >= b - z * se, b - z * se),
    );
    bound_check(
        "exploit S: E(t|s3,S) ≤ b + z·se",
        report
            .coarse(PhaseSignal::S3, Arm::S)
            .map(|c| (c.count, c.e_t_hat, c.se)),
        &|e, se| (e <= b + z * se, b + z * se),
    );
    out
}

/// Mean per-stage reward per state against (1−ε)·p_H (H) and (1−ε)·b (L).
pub fn epsilon_optimality(report: &AuditReport, tol: &Tolerances) -> Vec<Check> {
    let model = &report.config.template.model;
    let eps = report.config.template.params.eps;
    report
        .per_state
        .iter()
        .map(|s| {
            let target = match s.state {
                WorldState::H => model.p_h,
                WorldState::L => model.b,
            };
            let bound = (1.0 - eps) * target - tol.z * s.mean_reward_se;
            let name = format!("epsilon-optimality {}", s.state);
            if s.runs < 2 {
                return Check::inconclusive(name, format!("{} runs", s.runs));
            }
            Check::new(
                name,
                s.mean_reward >= bound,
                s.mean_reward,
                bound,
                format!(
                    "mean reward {:.6} ≥ (1-{eps})·{target} - {}·{:.2e} = {:.6} over {} runs",
                    s.mean_reward, tol.z, s.mean_reward_se, bound, s.runs
                ),
            )
        })
        .collect()
}

/// Total promised subsidy never above β; exact, no tolerance.
pub fn budget_check(report: &AuditReport) -> Check {
    let beta = report.config.template.params.beta;
    let violations: u64 = report.per_state.iter().map(|s| s.budget_violations).sum();
    let runs: u64 = report.per_state.iter().map(|s| s.runs).sum();
    Check::new(
        "budget",
        violations == 0 && report.max_total_subsidy <= beta,
        report.max_total_subsidy,
        beta,
        format!(
            "max promised {} ≤ β={beta}, {violations} violating runs of {runs}",
            report.max_total_subsidy
        ),
    )
}

/// Switch counts exact and the paired switch-direction gap within z·se.
pub fn switching_checks(report: &AuditReport, tol: &Tolerances) -> Vec<Check> {
    let sw = &report.switching;
    let counts = Check::new(
        "switch counts",
        sw.exact_count_runs == sw.completed_runs,
        sw.exact_count_runs as f64,
        sw.completed_runs as f64,
        format!(
            "{} of {} completed runs had K switches each way",
            sw.exact_count_runs, sw.completed_runs
        ),
    );
    let gap = if sw.completed_runs < 2 || !sw.gap_se.is_finite() {
        Check::inconclusive(
            "switch direction gap",
            format!("{} completed runs", sw.completed_runs),
        )
    } else {
        Check::new(
            "switch direction gap",
            sw.gap.abs() <= tol.z * sw.gap_se,
            sw.gap,
            tol.z * sw.gap_se,
            format!(
                "E(t|to S)={:.6}, E(t|to R)={:.6}, |gap| {:.6} ≤ {:.6}",
                sw.mean_t_switch_to_s,
                sw.mean_t_switch_to_r,
                sw.gap.abs(),
                tol.z * sw.gap_se
            ),
        )
    };
    vec![counts, gap]
}

/// Risky draw at the first switching stage averages to b.
pub fn indifference_check(report: &AuditReport, tol: &Tolerances) -> Check {
    let b = report.config.template.model.b;
    let e = &report.entry_blend;
    let n = e.r1_count + e.r2_count + e.s_count;
    if n < tol.min_count || !e.blend_se.is_finite() {
        return Check::inconclusive("blind indifference", format!("{n} switching entries"));
    }
    Check::new(
        "blind indifference",
        (e.blend - b).abs() <= tol.z * e.blend_se,
        e.blend,
        b,
        format!(
            "E(t|s2 at K+1)={:.6} vs b={b}, |gap| ≤ {:.6} (n={n})",
            e.blend,
            tol.z * e.blend_se
        ),
    )
}

/// Every assertion derivable from a compliant-profile report.
pub fn audit_checks(report: &AuditReport, tol: &Tolerances) -> Vec<Check> {
    let mut out = vec![budget_check(report)];
    out.extend(epsilon_optimality(report, tol));
    out.extend(switching_checks(report, tol));
    out.push(indifference_check(report, tol));
    out.extend(ic_audit(report, tol));
    out
}

/// Runs needed so that a z-sigma binomial band at rate `p` is narrower than `p`.
pub fn required_runs(p: f64, z: f64) -> u64 {
    (z * z * (1.0 - p) / p).ceil() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Population used for the switching-horizon runs: K + n̂.
    pub horizon_population: u64,
    /// Direct K-sample draws per state for (a).
    pub samples_per_state: u64,
    /// Mediator runs per state (H, L) for (b)-(d).
    pub horizon_runs: [u64; 2],
    /// Switching runs needed per state to resolve the tail bound.
    pub required_runs: u64,
    pub checks: Vec<Check>,
}

/// Statistical checks of the sample-size and switching-horizon claims.
///
/// (a) K-sample mean misclassification ≤ ε/4 per state; (b) P(X<K) ≤
/// min(β/4K, ε/4) per state over runs of K + n̂ stages; (c) switch-direction
/// gap within z·se; (d) exactly K switches each way in completed runs.
pub fn bound_checks(
    model: &ModelParams,
    params: &MediatorParams,
    runs: u64,
    master_seed: u64,
    tol: &Tolerances,
) -> Result<BoundReport> {
    model.validate()?;
    let gamma = horizon_tail(params.k, params.beta, params.eps);
    let accuracy = params.eps / 4.0;
    let required = required_runs(gamma, tol.z).max(required_runs(accuracy, tol.z));
    let per_state = runs.max(required);
    let mut checks = Vec::new();

    // (a) direct K-sample draws
    for (i, state) in [WorldState::H, WorldState::L].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(run_seed(master_seed, u64::MAX - i as u64));
        let p = model.success_prob(state);
        let binom = Binomial::new(params.k, p)
            .map_err(|e| Error::InvalidArgument(format!("binomial({}, {p}): {e}", params.k)))?;
        let wrong = (0..per_state)
            .filter(|_| {
                let high = model.mean_reaches_midpoint(binom.sample(&mut rng), params.k);
                high != (state == WorldState::H)
            })
            .count() as f64;
        let rate = wrong / per_state as f64;
        checks.push(Check::new(
            format!("sample mean misclassification {state}"),
            rate <= accuracy,
            rate,
            accuracy,
            format!(
                "{rate:.6} ≤ ε/4 = {accuracy} over {per_state} samples of K={}",
                params.k
            ),
        ));
    }

    // (b)-(d) mediator runs truncated at K + n̂. Only runs that enter the
    // switching phase count toward (b), so each state gets enough runs for
    // `required` of them to do so.
    let horizon = params.k + params.n_hat;
    let template = RunConfig::new(*model, *params, horizon, 0);
    let probs = beliefs::event_probabilities(model, params.k)?;
    let mut switching = Vec::new();
    let mut horizon_runs = [0u64; 2];
    for (i, state) in [WorldState::H, WorldState::L].into_iter().enumerate() {
        let p_switch = 1.0 - (1.0 - params.delta) * probs.given(state).r1;
        let target = required as f64 + tol.z * (required as f64).sqrt();
        let n = runs.max((target / p_switch.max(1e-9)).ceil() as u64);
        horizon_runs[i] = n;
        let mut mc = MonteCarloConfig::new(template.clone(), n, master_seed);
        mc.sampling = StateSampling::Forced(state);
        let report = monte_carlo(&mc)?;
        let st = report.state(state).expect("forced state has runs");
        let name = format!("switching horizon P(X<K) {state}");
        let detail = format!(
            "{} of {} switching runs short ({:.6}) ≤ min(β/4K, ε/4) = {gamma:.6}",
            st.x_below_k, st.switching_runs, st.p_x_below_k
        );
        checks.push(if st.switching_runs < required {
            Check::inconclusive(
                name,
                format!("{detail}; fewer than {required} switching runs"),
            )
        } else {
            Check::new(name, st.p_x_below_k <= gamma, st.p_x_below_k, gamma, detail)
        });
        switching.push(report.switching);
    }
    let completed: u64 = switching.iter().map(|s| s.completed_runs).sum();
    let exact: u64 = switching.iter().map(|s| s.exact_count_runs).sum();
    // pool the paired gaps of both states, weighted by completed runs
    let gap_sum: f64 = switching
        .iter()
        .map(|s| s.gap * s.completed_runs as f64)
        .sum();
    let gap = gap_sum / completed.max(1) as f64;
    let var_sum: f64 = switching
        .iter()
        .filter(|s| s.completed_runs > 1)
        .map(|s| {
            let n = s.completed_runs as f64;
            s.gap_se * s.gap_se * n * n
        })
        .sum();
    let gap_se = var_sum.sqrt() / completed.max(1) as f64;
    checks.push(if completed < 2 {
        Check::inconclusive(
            "switch direction gap",
            format!("{completed} completed runs"),
        )
    } else {
        Check::new(
            "switch direction gap",
            gap.abs() <= tol.z * gap_se,
            gap,
            tol.z * gap_se,
            format!(
                "|gap| {:.6} ≤ {:.6} over {completed} completed runs",
                gap.abs(),
                tol.z * gap_se
            ),
        )
    });
    checks.push(Check::new(
        "switch counts",
        exact == completed,
        exact as f64,
        completed as f64,
        format!("{exact} of {completed} completed runs had K switches each way"),
    ));
    Ok(BoundReport {
        horizon_population: horizon,
        samples_per_state: per_state,
        horizon_runs,
        required_runs: required,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::calibrate_with_k;

    const CANONICAL: ModelParams = ModelParams::new(0.5, 0.8, 0.3, 0.5);

    fn template(k: u64, n: u64) -> RunConfig {
        let params = calibrate_with_k(&CANONICAL, k, 0.1, 1.0).unwrap().params;
        RunConfig::new(CANONICAL, params, n, 0)
    }

    #[test]
    fn slots_round_trip() {
        for slot in 0..FINE_SLOTS {
            assert_eq!(InfoClass::from_slot(slot).slot(), slot);
        }
    }

    #[test]
    fn zero_runs_is_an_error() {
        let mc = MonteCarloConfig::new(template(3, 50), 0, 1);
        assert!(monte_carlo(&mc).is_err());
    }

    #[test]
    fn counts_sum_to_runs_times_population() {
        let mc = MonteCarloConfig::new(template(3, 80), 40, 5);
        let report = monte_carlo(&mc).unwrap();
        let total: u64 = report.classes.iter().map(|c| c.count).sum();
        assert_eq!(total, 40 * 80);
        assert_eq!(report.total_stages, 40 * 80);
        for c in &report.classes {
            assert!((0.0..=1.0).contains(&c.p_h_hat));
            assert!((0.0..=1.0).contains(&c.e_t_hat));
        }
    }

    #[test]
    fn report_is_deterministic() {
        let mut mc = MonteCarloConfig::new(template(3, 120), 70, 11);
        mc.stage_bucket = Some(40);
        let a = monte_carlo(&mc).unwrap().to_json().unwrap();
        let b = monte_carlo(&mc).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stratified_sampling_splits_by_prior() {
        let mut mc = MonteCarloConfig::new(template(2, 30), 10, 3);
        mc.sampling = StateSampling::Stratified;
        let report = monte_carlo(&mc).unwrap();
        assert_eq!(report.state(WorldState::H).unwrap().runs, 5);
        assert_eq!(report.state(WorldState::L).unwrap().runs, 5);
    }

    #[test]
    fn cluster_se_matches_iid_when_one_occurrence_per_run() {
        let mut sums = ClusterSums::default();
        let values = [1.0, 0.0, 1.0, 1.0, 0.0];
        for v in values {
            let mut t = RunTotals::default();
            t.add(v == 1.0, false, 0.0, 0.0);
            sums.add_run(&t);
        }
        let mean = 0.6;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
        assert!((sums.se(Q_T, 5) - (var / 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn required_runs_resolves_bound() {
        assert_eq!(required_runs(1.0 / 540.0, 3.0), 4851);
    }
}
