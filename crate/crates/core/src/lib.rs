//! Numerical laboratory for randomly kicked circle maps
//! `x ↦ a + x + L·ψ(x) + ω (mod 1)` with kicks `ω` uniform on `[-ε, ε]`.
//!
//! The crate is generic over the floating-point type through [`Scalar`]
//! (`f32` and `f64`); the `*64` aliases below fix the common double-precision
//! case.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arcset;
pub mod atlas;
pub mod circle_map;
pub mod error;
pub mod lyapunov;
pub mod noise;
pub mod quadrature;
pub mod scalar;
pub mod transfer;
pub mod trig;

pub use arcset::{ArcSet, CircleArc};
pub use atlas::{ParameterWindow, ScheduleSpec};
pub use circle_map::{CriticalPoint, MapParams, PsiCoeffs, PsiSpec};
pub use error::{Error, Result};
pub use lyapunov::{LyapunovEstimate, SinkCertificate};
pub use noise::{KickStream, NoiseConfig};
pub use scalar::Scalar;
pub use transfer::{DensityVector, Grid, UlamMatrix};

pub type ArcSet64 = ArcSet<f64>;
pub type PsiSpec64 = PsiSpec<f64>;
pub type MapParams64 = MapParams<f64>;
pub type UlamMatrix64 = UlamMatrix<f64>;
pub type DensityVector64 = DensityVector<f64>;
pub type LyapunovEstimate64 = LyapunovEstimate<f64>;
pub type SinkCertificate64 = SinkCertificate<f64>;
pub type ParameterWindow64 = ParameterWindow<f64>;

pub type ArcSet32 = ArcSet<f32>;
pub type PsiSpec32 = PsiSpec<f32>;
pub type MapParams32 = MapParams<f32>;
