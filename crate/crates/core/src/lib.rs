//! Correlation-consistency laboratory.
//!
//! * [`dist`]: exact joint tables over ±1 variables.
//! * [`realizability`]: decide whether marginal tables share one joint law.
//! * [`inequalities`]: Bell and CHSH families, evaluated exactly.
//! * [`aspect`]: Monte Carlo sampling of Aspect-style runs and source models.
//! * [`ghz`]: the three-station Rademacher construction for GHZ products.
//! * [`net`]: the same GHZ experiment run over local TCP between processes.

pub mod aspect;
pub mod dist;
pub mod ghz;
pub mod inequalities;
pub mod net;
pub mod rational;
pub mod realizability;
pub mod rng;
