//! Split neural training on MNIST, FedAvg, and the DSFL and SFL protocols.

pub mod error;
pub mod fedavg;
pub mod idx;
pub mod nn;
pub mod protocol;
pub mod shard;
pub mod split;

pub use error::{Error, Result};
pub use fedavg::fedavg;
pub use idx::{load_dataset, Dataset, Mnist};
pub use nn::{Activation, Dense, Network};
pub use protocol::{accuracy, run_dsfl, run_sfl, write_metrics_csv, RoundMetrics, TrainHyper};
pub use shard::{shard_iid, shard_non_iid, ShardedDataset};
pub use split::{split_training_step, SplitModel};
