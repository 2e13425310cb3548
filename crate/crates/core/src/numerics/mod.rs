//! Special functions and reproducible random streams.

mod binomial;
mod rng;
mod special;

pub use binomial::{binom_cdf, binom_pmf, binom_sf, ln_choose};
pub use rng::{binomial_draw, RngStream, StreamPath};
pub(crate) use special::log_beta_unchecked;
pub use special::{beta_tails, ln_gamma, log_beta, log_sum_exp, reg_inc_beta, LogValue};
