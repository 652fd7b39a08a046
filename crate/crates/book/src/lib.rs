//! The guide in `book/` is plain mdbook, which cannot run listings that
//! depend on this workspace. Each chapter is pulled in as module docs so
//! `cargo test --doc` compiles and runs every listing against the current
//! library. One module per chapter keeps failures traceable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/conventions.md")]
pub mod conventions {}

#[doc = include_str!("../../../book/src/detectors.md")]
pub mod detectors {}

#[doc = include_str!("../../../book/src/retrodiction.md")]
pub mod retrodiction {}

#[doc = include_str!("../../../book/src/phase-space.md")]
pub mod phase_space {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/heralding.md")]
pub mod heralding {}

#[doc = include_str!("../../../book/src/tomography.md")]
pub mod tomography {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
