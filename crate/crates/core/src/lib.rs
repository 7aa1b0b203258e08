//! Compiles declarative mission facts into per-agent utility rasters,
//! costed seams and deconflicted multi-window plans, and replans
//! incrementally when facts change.
//!
//! The guide in `book/` walks through the pipeline; its snippets run as
//! doctests.

// `!(x >= 0.0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control_plane;
pub mod coordinator;
pub mod data_plane;
pub mod export;
pub mod facts;
pub mod grid;
pub mod planner;
pub mod scenario;
mod error;
pub mod pipeline;
pub mod world;

pub use error::Error;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/facts.md")]
    mod facts {}
    #[doc = include_str!("../../../book/src/tensors.md")]
    mod tensors {}
    #[doc = include_str!("../../../book/src/seams.md")]
    mod seams {}
    #[doc = include_str!("../../../book/src/stitching.md")]
    mod stitching {}
    #[doc = include_str!("../../../book/src/team.md")]
    mod team {}
    #[doc = include_str!("../../../book/src/replanning.md")]
    mod replanning {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
}
