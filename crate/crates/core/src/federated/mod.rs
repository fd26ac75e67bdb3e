//! Federated averaging on a synthetic task with simulated over-the-air
//! aggregation.

pub mod partition;
pub mod task;
pub mod train;

pub use partition::{partition_iid, partition_shards, Partition};
pub use task::{make_synthetic_task, LearningTask, TaskParams};
pub use train::{
    global_update, local_update, nmse, to_db, train, LrSchedule, RoundMetrics, Scheme, TrainOutcome, TrainSetup,
    TrainStreams,
};
