pub mod adam;
pub mod backward;
pub mod fit;
pub mod loss;
pub mod schedule;

pub use adam::{adam_step, AdamState};
pub use backward::{backward, backward_from_logits};
pub use fit::{
    batch_gradient, checkpoint_path, evaluate_loss, fit, fit_from, EpochRecord, Example, FitOptions, FitOutcome,
    InMemoryData, TrainConfig, TrainingData,
};
pub use loss::bce_loss;
pub use schedule::{EpochDecision, PlateauScheduler};
