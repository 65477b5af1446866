//! Detection of multipartite entanglement from product-moment inequalities.
//!
//! For `n` subsystems with local operators `A_1 … A_n`, a state is certified
//! entangled when either
//!
//! ```text
//! (1)  |⟨∏ A_k⟩| > ∏ ⟨(A_k† A_k)^{n/2}⟩^{1/n}
//! (2)  |⟨∏ A_k⟩| > ⟨((1/n) Σ A_k† A_k)^{n/2}⟩
//! ```
//!
//! holds. Every fully separable state satisfies the reverse (non-strict)
//! inequalities, so a violation is a sufficient, never a necessary, signal.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense complex matrices, Kronecker embedding, PSD powers.
//! - [`states`]: sum-of-products pure states, mixtures, and the example families.
//! - [`witness`]: evaluation of both conditions, factorized and dense.
//! - [`analytic`]: closed forms used as cross-check oracles.
//! - [`oracle`]: randomized separable-state and operator-power checks.
//! - [`scan`]: parameter sweeps, threshold bisection, CSV/JSON tables.
//! - [`reproduction`]: the numeric-versus-closed-form verification table.
//!
//! Subsystem ordering is fixed throughout: subsystem 0 is the leftmost
//! Kronecker factor, so `|q_0 q_1 … q_{n-1}⟩` has flat index
//! `q_0 d_1 ⋯ d_{n-1} + … + q_{n-1}`.

pub mod analytic;
pub mod error;
pub mod oracle;
pub mod reproduction;
pub mod scan;
pub mod states;
pub mod tensor;
pub mod witness;

pub use error::{Error, Result};
pub use states::{build_state, MixedEnsemble, NoiseKind, ProductTerm, PureSOP, State, StateFamily};
pub use tensor::{Ket, LocalOp, SubsystemDims, C64};
pub use witness::{evaluate, Engine, EvalPath, OperatorAssignment, OperatorChoice, WitnessReport};
