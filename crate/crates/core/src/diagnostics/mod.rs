//! Boundary variables, regularity-event rates and MCMC samplers.

pub mod boundary;
pub mod events;
pub mod mcmc;

pub use boundary::{boundary_exact, boundary_partial, BoundaryLocation, BoundaryState};
pub use events::{event_rates, sample_posterior_enumeration, EventRates, PosteriorSampler, SiteRates};
pub use mcmc::{
    mcmc_marginals_exact, mcmc_marginals_partial, mcmc_sample_exact, mcmc_sample_partial, ChainOptions, ExactChain,
    PartialChain, PartialMove,
};
