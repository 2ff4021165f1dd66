//! A pseudospectral laboratory for ground states of the fractional Kirchhoff
//! equation
//!
//! ```text
//! (a + b ∫|(-Δ)^{s/2}u|²) (-Δ)^s u + m u = u^p     in ℝ^N,  N ∈ {1, 2},
//! ```
//!
//! and for its singularly perturbed version with a potential `V(x)` in the
//! semiclassical regime.
//!
//! The pipeline is:
//!
//! 1. [`ground_state`] — the base ground state `Q` of `(-Δ)^s Q + Q = Q^p`
//!    (Petviashvili iteration plus Newton polish) and its certificates.
//! 2. [`scaling`] — the scalar equation `f(E) = 0`, its root `E₀`, and the
//!    rescaling `Q ↦ U` onto the Kirchhoff ground state.
//! 3. [`linearized`] — the linearized operators `T₊`, `L₊`, their low
//!    spectrum and the identities behind nondegeneracy.
//! 4. [`semiclassical`] — the Lyapunov–Schmidt reduction around `U` in
//!    rescaled coordinates and the concentration/energy diagnostics.
//!
//! Everything is discretized on uniform grids ([`grid`]) with the fractional
//! Laplacian realized as a Fourier multiplier ([`spectral`]).

pub mod error;
pub mod fft;
pub mod grid;
pub mod ground_state;
pub mod io;
pub mod krylov;
pub mod linearized;
pub mod manifest;
pub mod scaling;
pub mod semiclassical;
pub mod spectral;

pub use error::{FklError, Result};
pub use grid::{integrate, make_grid, Field, Grid};
pub use spectral::{Exterior, FracOperator};

/// Version string mixed into content hashes of cached artifacts.
pub const CODE_VERSION: &str = concat!("fkl-core/", env!("CARGO_PKG_VERSION"));
