//! Batched model evaluation over TCP.
//!
//! Clients send one JSON request per line; each connection is served by a
//! thread that places requests on one shared queue. `workers` threads take
//! requests off the queue in batches of up to `batch_size`, waiting `wait`
//! seconds first whenever fewer are queued, and score them with the loaded
//! model.

mod client;
mod protocol;
mod queue;
mod serve;

pub use client::{ClientError, EvalClient};
pub use protocol::{ErrorRecord, EvalRequest, EvalResponse, BAD_REQUEST, BAD_VECTOR};
pub use queue::BatchQueue;
pub use serve::{start, start_from_file, ServerConfig, ServerError, ServerHandle, ServerStats};
