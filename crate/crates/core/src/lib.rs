pub mod costs;
pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod harness;
pub mod local;
pub mod exact;
pub mod io;
pub mod model;
pub mod numeric;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod partial;
pub mod ppp;
pub mod ppp_gibbs;
