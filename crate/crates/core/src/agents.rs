//! Agent strategies: the compliant equilibrium strategy plus scripted
//! deviations for off-path and incentive tests.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{Arm, Message, ModelParams, Observation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationRule {
    /// Pull the arm that was not recommended.
    #[default]
    Flip,
    AlwaysS,
    AlwaysR,
}

impl DeviationRule {
    fn apply(self, recommended: Arm) -> Arm {
        match self {
            Self::Flip => recommended.other(),
            Self::AlwaysS => Arm::S,
            Self::AlwaysR => Arm::R,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum StrategyProfile {
    /// Always pulls the recommended arm.
    #[default]
    Compliant,
    /// Applies `rule` at the listed (1-based) stages and complies elsewhere.
    ScriptedDeviant {
        stages: BTreeSet<u64>,
        rule: DeviationRule,
    },
    /// Ignores the mediator and pulls the prior-optimal arm.
    MyopicPrior,
}

impl StrategyProfile {
    pub fn deviant(stages: impl IntoIterator<Item = u64>, rule: DeviationRule) -> Self {
        Self::ScriptedDeviant {
            stages: stages.into_iter().collect(),
            rule,
        }
    }

    pub fn is_compliant(&self) -> bool {
        matches!(self, Self::Compliant)
    }

    /// The arm pulled at `stage` after observing `obs` and receiving `msg`.
    pub fn choose(&self, model: &ModelParams, stage: u64, _obs: Observation, msg: &Message) -> Arm {
        match self {
            Self::Compliant => msg.arm,
            Self::ScriptedDeviant { stages, rule } => {
                if stages.contains(&stage) {
                    rule.apply(msg.arm)
                } else {
                    msg.arm
                }
            }
            Self::MyopicPrior => {
                if model.prior_mean() > model.b {
                    Arm::R
                } else {
                    Arm::S
                }
            }
        }
    }
}

/// JSON form of a profile:
/// `{"strategy": "compliant" | "deviant" | "myopic", "deviation_stages": [...], "rule": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub strategy: StrategyKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deviation_stages: Vec<u64>,
    #[serde(default)]
    pub rule: DeviationRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Compliant,
    Deviant,
    Myopic,
}

impl From<ProfileConfig> for StrategyProfile {
    fn from(cfg: ProfileConfig) -> Self {
        match cfg.strategy {
            StrategyKind::Compliant => Self::Compliant,
            StrategyKind::Deviant => Self::deviant(cfg.deviation_stages, cfg.rule),
            StrategyKind::Myopic => Self::MyopicPrior,
        }
    }
}

impl From<&StrategyProfile> for ProfileConfig {
    fn from(p: &StrategyProfile) -> Self {
        match p {
            StrategyProfile::Compliant => ProfileConfig {
                strategy: StrategyKind::Compliant,
                deviation_stages: Vec::new(),
                rule: DeviationRule::Flip,
            },
            StrategyProfile::ScriptedDeviant { stages, rule } => ProfileConfig {
                strategy: StrategyKind::Deviant,
                deviation_stages: stages.iter().copied().collect(),
                rule: *rule,
            },
            StrategyProfile::MyopicPrior => ProfileConfig {
                strategy: StrategyKind::Myopic,
                deviation_stages: Vec::new(),
                rule: DeviationRule::Flip,
            },
        }
    }
}

impl Serialize for StrategyProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ProfileConfig::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for StrategyProfile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        ProfileConfig::deserialize(d).map(Into::into)
    }
}
