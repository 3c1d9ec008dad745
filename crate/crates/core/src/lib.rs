//! Functional and cost-model simulator for bulk bitwise operations executed
//! inside DRAM subarrays.
//!
//! The crate is layered bottom-up:
//!
//! * [`analog`]: charge-sharing deviation, triple-row majority outcome, and
//!   calibrated activation latencies under process variation.
//! * [`subarray`]: the functional state machine of one subarray (designated
//!   rows, dual-contact cells, control rows, sense-amplifier latch).
//! * [`command`]: the B/C/D row address map, the `AAP`/`AP` primitives, and
//!   compilation of bitwise operations into command traces.
//! * [`controller`]: `bop` request validation, placement analysis, RowClone-PSM
//!   counting, CPU fallback, and dispatch across subarrays.
//! * [`cost`]: latency, energy, and throughput accounting plus a
//!   bandwidth-bound baseline.
//! * [`workloads`]: bitmap-index queries, bit-sliced column scans, and set
//!   operations expressed as `bop` streams.
//! * [`cli`]: the batch runner behind the `buddysim` binary.

pub mod analog;
pub mod bits;
pub mod cli;
pub mod command;
pub mod controller;
pub mod cost;
pub mod error;
pub mod ops;
pub mod subarray;
pub mod workloads;

pub use bits::BitRow;
pub use command::{CommandTrace, RowAddress};
pub use error::{Error, Result};
pub use ops::BitwiseOp;
pub use subarray::SubarrayState;

/// Version tag written into every JSON/CSV artifact the crate emits.
pub const SCHEMA_VERSION: u32 = 1;
