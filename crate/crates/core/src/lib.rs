//! Ruin and survival probabilities for the discrete-time risk model with `N`
//! periodically varying claim laws and integer premium rate `κ`.
//!
//! The surplus is `W(n) = u + κn − Σ_{i≤n} X_i`, where `X_i` follows the law of
//! season `((i−1) mod N) + 1`. Survival means `W(n) > 0` for every `n ≥ 1`.

pub mod boundary;
pub mod dist;
pub mod error;
pub mod genfun;
pub mod io;
pub mod model;
pub mod montecarlo;
pub mod precise;
pub mod random;
pub mod roots;
pub mod survival;

pub use dist::DiscreteDist;
pub use error::{Error, Result};
pub use model::{classify_regime, Regime, RiskModel};
