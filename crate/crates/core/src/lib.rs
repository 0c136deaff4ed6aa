//! Segregated-network PINN laboratory for coupled PDE benchmarks.
//!
//! The crate trains one independent tanh MLP per physical field on a set of
//! coupled PDE systems (linear thermoelasticity, a three-species
//! reaction-diffusion network, the 1D Nernst-Planck-Poisson system, a 2D
//! electroosmotic Nernst-Planck-Poisson-Stokes channel, and a symmetric model
//! problem used for kernel analysis), under interchangeable optimizers (Adam,
//! SOAP) and loss-balancing schemes (none, inverse-gradient-norm, learning
//! rate annealing).
//!
//! Alongside training it provides direct spectral diagnostics of the residual
//! Jacobian: the Gram kernel `K = J Jᵀ`, its block-diagonal Gauss-Newton
//! preconditioned counterpart `K_P = J H⁺ Jᵀ` assembled via per-network
//! orthogonal projectors, and the associated coupling bounds.
//!
//! Module map:
//! - [`mlp`] — fixed-architecture tanh networks with exact spatial jets
//!   (value/gradient/Hessian) and exact parameter gradients.
//! - [`pde`] — the benchmark systems: residuals, manufactured solutions,
//!   boundary conditions and collocation sampling.
//! - [`pb`] — high-accuracy Poisson-Boltzmann two-point BVP solver used as
//!   the reference solution for the electrokinetic benchmarks.
//! - [`optim`] — Adam and SOAP (Kronecker-factored preconditioning with
//!   rotated-space Adam).
//! - [`balance`] — loss-weight schedulers.
//! - [`ntk`] — Jacobian assembly and kernel spectra.
//! - [`harness`] — training loop, sweeps, aggregation and reporting.

pub mod balance;
pub mod dual;
pub mod harness;
pub mod linalg;
pub mod mlp;
pub mod ntk;
pub mod optim;
pub mod pb;
pub mod pde;
pub mod rng;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("eigendecomposition did not converge")]
    EigFailure,
    #[error("boundary-layer profile unavailable (eps={eps}, zeta={zeta}); run `oracle` first")]
    MissingOracle { eps: f64, zeta: f64 },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("query point {0} outside [0, 1]")]
    OutOfDomain(f64),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
