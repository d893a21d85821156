use crate::model::{Arm, InvalidModel, Reward};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    InvalidModel(#[from] InvalidModel),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("successes ({successes}) exceed trials ({trials})")]
    SuccessesExceedTrials { successes: u64, trials: u64 },

    #[error("observed counts have zero likelihood in both states")]
    ZeroLikelihood,

    #[error("degenerate calibration: {0}")]
    DegenerateDelta(String),

    #[error("all {population} stages have already been played")]
    PopulationExhausted { population: u64 },

    #[error("stage {stage} has a pending message that was not recorded")]
    AwaitingRecord { stage: u64 },

    #[error("no message was issued for stage {stage}")]
    NoPendingMessage { stage: u64 },

    #[error("reward {} cannot come from arm {action}", .reward.as_str())]
    InconsistentReward { action: Arm, reward: Reward },

    #[error("invalid run config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
