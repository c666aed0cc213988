//! Exhaustive 2-way and 3-way proportional similarity (Czekanowski) metrics.
//!
//! The 2-way metric of nonnegative vectors `u`, `v` is
//! `2 * sum_q min(u_q, v_q) / (sum_q u_q + sum_q v_q)`; the 3-way metric
//! extends it to triples. Numerators are computed with a min-product GEMM
//! ([`mingemm`]); the work is split over a grid of ranks ([`grid`],
//! [`schedule`]) that exchange vector blocks through a message-passing
//! runtime ([`engine`]) so every unique pair or triple is computed exactly
//! once.

pub mod block;
pub mod element;
pub mod engine;
pub mod error;
pub mod grid;
pub mod io;
pub mod metrics2;
pub mod metrics3;
pub mod mingemm;
pub mod model;
pub mod run;
pub mod schedule;
pub mod tuple;
pub mod verify;

pub use block::VectorBlock;
pub use element::{Element, Precision};
pub use error::{Error, Result};
pub use grid::{DecompGrid, RankCoords};
pub use mingemm::{DenseMatrix, Kernel, MatRef, OpCounts, Tile};
pub use tuple::{unique_tuple_count, Arity, MetricRecord, TupleId};
pub use verify::Checksum128;
