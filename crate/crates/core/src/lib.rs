//! Simulation library for online set cover with delay.

pub mod adversary;
pub mod cli;
pub mod counter;
pub mod engine;
pub mod error;
pub mod model;
pub mod onf;
pub mod onr;
pub mod opt;

pub use error::{Error, Result};

use adversary::{Eager, Idle};
use engine::OnlineAlgorithm;

/// Online algorithms by their command-line id. `declared_requests` is only
/// used by `onr-request`.
pub fn algorithm_by_name(name: &str, declared_requests: usize) -> Result<Box<dyn OnlineAlgorithm>> {
    Ok(match name {
        "onf" => Box::new(onf::Onf::new()),
        "onr-request" => Box::new(onr::Onr::request_variant(declared_requests)),
        "onr-element" => Box::new(onr::Onr::element_variant()),
        "counter" => Box::new(counter::Counter::new()),
        "linear-buying-test" => Box::new(onf::LinearBuying),
        "idle" => Box::new(Idle),
        "eager" => Box::<Eager>::default(),
        other => return Err(Error::Domain(format!("unknown online algorithm {other:?}"))),
    })
}
