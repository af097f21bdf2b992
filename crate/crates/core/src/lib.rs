//! Model order reduction on matrix Lie groups.
//!
//! High-dimensional trajectories are approximated by the orbit of an initial
//! state under a low-dimensional group action, `x̄(t) = Φ(g(t), x₀)`, with the
//! group path driven by a reduced vector field `ġ = ρ(t)·g`. This crate holds
//! the pure numerical pieces:
//!
//! - [`lie`]: matrix Lie algebra / group elements, `exp`/`log`, brackets and bases.
//! - [`actions`]: concrete group actions on point clouds, polar charts and periodic grids.
//! - [`fitting`]: reduced vector fields from velocities or from one-step transitions.
//! - [`subalgebra`]: PCA of the reduced snapshot matrix plus bracket closure.
//! - [`clustering`]: splitting particle data into affinely moving clusters.
//! - [`rom`]: integration on the group (Lie–Euler, RKMK4) and reconstruction.
//! - [`baselines`]: POD baselines, trajectory errors and empirical orbit widths.
//! - [`datagen`]: deterministic synthetic benchmarks.
//!
//! The crate is `no_std` and only needs `alloc`; file formats and the command
//! line driver live in the `morlie-cli` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod actions;
pub mod baselines;
pub mod clustering;
pub mod datagen;
mod error;
pub mod fft;
pub mod fitting;
pub mod hermite;
pub mod lie;
pub mod lm;
pub mod matfun;
pub mod metric;
pub mod rom;
pub mod snapshots;
pub mod subalgebra;

pub use error::{Error, Result};

pub use actions::{ActionKind, ActionSpec, Chart, ChartTag, StatePoint};
pub use lie::{AlgebraBasis, AlgebraElement, GroupElement, Subalgebra};
pub use snapshots::{Snapshot, SnapshotSet};
