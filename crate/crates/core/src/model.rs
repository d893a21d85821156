//! Environment primitives: the two-state world, the two arms, the mediator's
//! message triple and the realized-utility rule.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Prior and reward parameters of the two-armed environment.
///
/// The risky arm pays 1 with probability `p_h` in state H and `p_l` in state
/// L; the safe arm pays `b` deterministically. H occurs with probability `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub q: f64,
    pub p_h: f64,
    pub p_l: f64,
    pub b: f64,
}

/// A single violated validity constraint of [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelViolation {
    NonFinite,
    PriorOutOfRange,
    ProbabilityOutOfRange,
    HighNotAboveSafe,
    SafeNotAboveLow,
    PriorMeanNotAboveSafe,
}

impl fmt::Display for ModelViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            Self::NonFinite => "all parameters must be finite",
            Self::PriorOutOfRange => "q must lie strictly between 0 and 1",
            Self::ProbabilityOutOfRange => "p_H and p_L must lie in [0, 1]",
            Self::HighNotAboveSafe => "p_H ≤ b",
            Self::SafeNotAboveLow => "b ≤ p_L",
            Self::PriorMeanNotAboveSafe => "prior mean ≤ b",
        };
        f.write_str(msg)
    }
}

/// Every violated constraint of a rejected model, in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid model: {}", join_violations(.0))]
pub struct InvalidModel(pub Vec<ModelViolation>);

fn join_violations(v: &[ModelViolation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl ModelParams {
    pub const fn new(q: f64, p_h: f64, p_l: f64, b: f64) -> Self {
        Self { q, p_h, p_l, b }
    }

    /// Expected risky reward under the prior.
    pub fn prior_mean(&self) -> f64 {
        self.q * self.p_h + (1.0 - self.q) * self.p_l
    }

    /// Success probability of the risky arm in `state`.
    pub fn success_prob(&self, state: WorldState) -> f64 {
        match state {
            WorldState::H => self.p_h,
            WorldState::L => self.p_l,
        }
    }

    /// Expected risky reward when P(H) = `posterior`.
    pub fn expected_risky(&self, posterior: f64) -> f64 {
        posterior * self.p_h + (1.0 - posterior) * self.p_l
    }

    /// `p_h + p_l`; a K-sample mean is "high" iff `2 * successes >= K * midpoint_sum`.
    pub fn midpoint_sum(&self) -> f64 {
        self.p_h + self.p_l
    }

    /// Whether `successes` out of `k` risky pulls reach the midpoint `(p_H+p_L)/2`.
    pub fn mean_reaches_midpoint(&self, successes: u64, k: u64) -> bool {
        2.0 * successes as f64 >= k as f64 * self.midpoint_sum()
    }

    /// Checks the model's validity constraints, collecting every violation.
    pub fn validate(&self) -> Result<(), InvalidModel> {
        let fields = [self.q, self.p_h, self.p_l, self.b];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(InvalidModel(vec![ModelViolation::NonFinite]));
        }
        let mut out = Vec::new();
        if !(self.q > 0.0 && self.q < 1.0) {
            out.push(ModelViolation::PriorOutOfRange);
        }
        if !(0.0..=1.0).contains(&self.p_h) || !(0.0..=1.0).contains(&self.p_l) {
            out.push(ModelViolation::ProbabilityOutOfRange);
        }
        if self.p_h <= self.b {
            out.push(ModelViolation::HighNotAboveSafe);
        }
        if self.b <= self.p_l {
            out.push(ModelViolation::SafeNotAboveLow);
        }
        if self.prior_mean() <= self.b {
            out.push(ModelViolation::PriorMeanNotAboveSafe);
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(InvalidModel(out))
        }
    }
}

/// Hidden state of nature, fixed for a whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WorldState {
    H,
    L,
}

impl WorldState {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::H => "H",
            Self::L => "L",
        }
    }
}

impl fmt::Display for WorldState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    /// Risky arm.
    R,
    /// Safe arm.
    S,
}

impl Arm {
    pub fn other(self) -> Self {
        match self {
            Self::R => Self::S,
            Self::S => Self::R,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::R => "R",
            Self::S => "S",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Phase information attached to every recommendation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhaseSignal {
    /// Pre-intervention.
    S1,
    /// Switching.
    S2,
    /// Exploitation.
    S3,
    /// Deviation treatment.
    S4,
}

impl PhaseSignal {
    pub const ALL: [PhaseSignal; 4] = [Self::S1, Self::S2, Self::S3, Self::S4];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::S1 => "s1",
            Self::S2 => "s2",
            Self::S3 => "s3",
            Self::S4 => "s4",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PhaseSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The mediator's private message to one agent: recommended arm, phase
/// signal and the subsidy paid if the agent complies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub arm: Arm,
    pub signal: PhaseSignal,
    pub subsidy: f64,
}

impl Message {
    pub const fn new(arm: Arm, signal: PhaseSignal, subsidy: f64) -> Self {
        Self {
            arm,
            signal,
            subsidy,
        }
    }

    /// A switching-phase message carrying a payment.
    pub fn is_subsidized(&self) -> bool {
        self.subsidy > 0.0
    }
}

/// A realized reward, drawn from the three-symbol alphabet {0, 1, b}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Reward {
    Zero,
    One,
    Safe,
}

impl Reward {
    pub fn risky(success: bool) -> Self {
        if success {
            Self::One
        } else {
            Self::Zero
        }
    }

    /// The reward an agent receives for pulling `arm` when the risky draw is `draw`.
    pub fn realize(arm: Arm, draw: bool) -> Self {
        match arm {
            Arm::R => Self::risky(draw),
            Arm::S => Self::Safe,
        }
    }

    pub fn value(self, b: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::One => 1.0,
            Self::Safe => b,
        }
    }

    /// The arm that produces this symbol.
    pub fn arm(self) -> Arm {
        match self {
            Self::Zero | Self::One => Arm::R,
            Self::Safe => Arm::S,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Zero => "0",
            Self::One => "1",
            Self::Safe => "b",
        }
    }
}

/// What an agent sees of the immediately preceding stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Observation {
    /// First stage; no predecessor.
    Start,
    /// Predecessor pulled R and got 1.
    Success,
    /// Predecessor pulled R and got 0.
    Failure,
    /// Predecessor pulled S.
    Safe,
}

impl Observation {
    pub const ALL: [Observation; 4] = [Self::Start, Self::Success, Self::Failure, Self::Safe];

    pub fn from_predecessor(prev: Option<Reward>) -> Self {
        match prev {
            None => Self::Start,
            Some(Reward::One) => Self::Success,
            Some(Reward::Zero) => Self::Failure,
            Some(Reward::Safe) => Self::Safe,
        }
    }

    pub fn predecessor_arm(self) -> Option<Arm> {
        match self {
            Self::Start => None,
            Self::Success | Self::Failure => Some(Arm::R),
            Self::Safe => Some(Arm::S),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Start => "start",
            Self::Success => "r=1",
            Self::Failure => "r=0",
            Self::Safe => "r=b",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Utility of an agent who pulled `action` after receiving `message`.
///
/// The subsidy is collected only when the action matches the recommendation.
/// `risky_draw` is ignored when `action` is S.
pub fn realized_utility(action: Arm, message: &Message, risky_draw: bool, b: f64) -> f64 {
    let base = Reward::realize(action, risky_draw).value(b);
    if action == message.arm {
        base + message.subsidy
    } else {
        base
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> ModelParams {
        ModelParams::new(0.5, 0.8, 0.3, 0.5)
    }

    #[test]
    fn canonical_model_is_valid() {
        assert_eq!(canonical().validate(), Ok(()));
    }

    #[test]
    fn prior_mean_below_safe_is_rejected() {
        let m = ModelParams {
            b: 0.6,
            ..canonical()
        };
        assert_eq!(
            m.validate(),
            Err(InvalidModel(vec![ModelViolation::PriorMeanNotAboveSafe]))
        );
        assert!(m
            .validate()
            .unwrap_err()
            .to_string()
            .contains("prior mean ≤ b"));
    }

    #[test]
    fn high_state_not_above_safe_is_rejected() {
        let m = ModelParams {
            p_h: 0.4,
            ..canonical()
        };
        let err = m.validate().unwrap_err();
        assert!(err.0.contains(&ModelViolation::HighNotAboveSafe));
        assert!(err.to_string().contains("p_H ≤ b"));
    }

    #[test]
    fn several_violations_are_all_reported() {
        let m = ModelParams::new(1.0, 0.2, 0.9, 0.5);
        let err = m.validate().unwrap_err();
        assert!(err.0.contains(&ModelViolation::PriorOutOfRange));
        assert!(err.0.contains(&ModelViolation::HighNotAboveSafe));
        assert!(err.0.contains(&ModelViolation::SafeNotAboveLow));
        assert!(err.0.contains(&ModelViolation::PriorMeanNotAboveSafe));
    }

    #[test]
    fn non_finite_fields_are_rejected() {
        let m = ModelParams {
            q: f64::NAN,
            ..canonical()
        };
        assert_eq!(
            m.validate(),
            Err(InvalidModel(vec![ModelViolation::NonFinite]))
        );
    }

    #[test]
    fn utility_cases() {
        let b = 0.5;
        let s_msg = Message::new(Arm::S, PhaseSignal::S2, 0.004);
        let r_msg = Message::new(Arm::R, PhaseSignal::S2, 0.004);
        assert!((realized_utility(Arm::S, &s_msg, true, b) - 0.504).abs() < 1e-15);
        assert_eq!(realized_utility(Arm::S, &r_msg, false, b), 0.5);
        assert!((realized_utility(Arm::R, &r_msg, true, b) - 1.004).abs() < 1e-15);
        assert_eq!(realized_utility(Arm::R, &s_msg, false, b), 0.0);
    }

    #[test]
    fn subsidy_collected_iff_compliant() {
        let b = 0.5;
        for rec in [Arm::R, Arm::S] {
            for action in [Arm::R, Arm::S] {
                for draw in [false, true] {
                    let paid = Message::new(rec, PhaseSignal::S2, 0.25);
                    let free = Message::new(rec, PhaseSignal::S2, 0.0);
                    let gap = realized_utility(action, &paid, draw, b)
                        - realized_utility(action, &free, draw, b);
                    if action == rec {
                        assert_eq!(gap, 0.25);
                    } else {
                        assert_eq!(gap, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn model_json_keys() {
        let json = serde_json::to_value(canonical()).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"q": 0.5, "p_h": 0.8, "p_l": 0.3, "b": 0.5})
        );
        let back: ModelParams = serde_json::from_value(json).unwrap();
        assert_eq!(back, canonical());
    }
}
