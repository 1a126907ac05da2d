//! Voltage-sensitive linear load flow ("DC+") for AC transmission grids.
//!
//! The crate linearizes the AC load-flow equations around a reference state,
//! updates the inverse of the linear model with low-rank corrections for
//! branch outages, line modifications, switch closings and busbar splits, and
//! screens N-1 contingencies against a full Newton-Raphson AC oracle.
//!
//! ```no_run
//! use dcplus_core::{acref, dcplus, gridio, linearizer};
//!
//! let text = std::fs::read_to_string("case14.m").unwrap();
//! let grid = gridio::index_grid(&gridio::parse_matpower(&text).unwrap()).unwrap();
//! let ac = acref::ac_solve(&grid, acref::Init::Flat, 1e-8, 30).unwrap();
//! let model = linearizer::assemble(&grid, &linearizer::hot_ref(&grid, &ac).unwrap()).unwrap();
//! let state = dcplus::solve(&model, &grid.p_injections(), &grid.q_injections()).unwrap();
//! println!("{:?}", state.theta);
//! ```

pub mod acref;
pub mod contingency;
pub mod dcplus;
pub mod error;
pub mod exec;
pub mod gridio;
pub mod indexing;
pub mod linalg;
pub mod linearizer;
#[doc(hidden)]
pub mod testing;
pub mod topoupdate;

pub use error::{Error, Result};
pub use faer;
