//! Retrodicted pre-measurement states and measurement-quality metrics for
//! optical detectors, with simulated detector tomography.
//!
//! Operators live on a truncated Fock space ([`fock::FockSpace`]). Detector
//! models build [`fock::Povm`]s; [`retrodiction`] turns POVM elements into
//! the states a detector "measures"; [`metrics`] and [`wigner`] quantify
//! them; [`tomography`] closes the loop from simulated counts.
//!
//! ```
//! use qretro::detectors::ApdParams;
//! use qretro::fock::FockSpace;
//! use qretro::metrics::projectivity;
//! use qretro::detectors::apd_povm;
//!
//! let space = FockSpace::new(48)?;
//! let apd = ApdParams::new(0.6, 0.05)?;
//! let povm = apd_povm(apd, space);
//! let p = projectivity(povm.element("off").unwrap())?;
//! assert!((p - 0.6 / 1.4).abs() < 1e-9);
//! # Ok::<(), qretro::Error>(())
//! ```

pub mod detectors;
pub mod error;
pub mod fock;
pub mod metrics;
pub mod quadrature;
pub mod retrodiction;
pub mod tomography;
pub mod wigner;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Library version, as reported by the command-line tool.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
