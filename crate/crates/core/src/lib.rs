//! Symbolic and numerical verification kernels for Darboux-covariant Lax pairs.
//!
//! The crate is organized around the objects it checks:
//!
//! - [`scalar`]: exact rational-function coefficients in declared parameters.
//! - [`diffring`]: commutative differential polynomials over jet variables,
//!   with x/t derivatives, formal antiderivatives and substitution.
//! - [`lindop`]: linear differential operators, Bell polynomials, Darboux
//!   transforms of coefficients, Ore right division and Miura residuals.
//! - [`covariance`]: the jointly covariant third-order/second-order pair in
//!   one potential, joint-covariance and compatibility residuals, and the
//!   Boussinesq-type reductions.
//! - [`dressing`]: zero-seed dressed solutions, dressing chains and grid
//!   residual verification of the reduced PDE.
//! - [`freealg`]: exact free noncommutative polynomials and the covariance
//!   identities for symmetric potentials.
//! - [`zs`]: dense-matrix realizations — Zakharov-Shabat transforms, the
//!   Euler-top flow, projector Darboux transforms and Fréchet derivatives.

pub mod scalar;
pub mod diffring;
pub mod covariance;
pub mod dressing;
pub mod freealg;
pub mod lindop;
pub mod zs;
