//! Patient-specific glioblastoma growth simulation.
//!
//! Tumor cell density `u` follows the Fisher-Kolmogorov equation
//!
//! ```text
//! ∂u/∂t = ∇·(D(x)∇u) + ρ·u·(1 − u),   ∇u·n = 0 on the boundary,
//! ```
//!
//! with `D(x)` taken from white/gray matter labels segmented out of a
//! grayscale image stack. Space is discretized by finite differences on a
//! regular lattice ([`operator`]); time is advanced by exponential Euler
//! ([`integrator`]) whose φ₁ actions come from a scaled truncated Taylor
//! kernel ([`expact`]).
//!
//! Units: millimetres and days.

pub mod analysis;
pub mod config;
pub mod error;
pub mod expact;
pub mod grid;
pub mod imaging;
pub mod integrator;
pub mod io;
pub mod operator;

pub use config::{Preset, SimConfig};
pub use error::{Error, Result};
pub use grid::{Grid, ScalarField};
pub use imaging::{DiffusionField, ImageStack, Material, MaterialVolume, Thresholds};
pub use integrator::{RunOutput, StepMetrics, TimeGrid};
pub use operator::{LinearOperator, SparseOperator};
