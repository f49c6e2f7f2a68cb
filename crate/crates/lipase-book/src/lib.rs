//! Compiles the guide in `book/` as rustdoc so that `cargo test --doc`
//! executes every fenced code block in the chapters. The book stays a
//! normal mdbook (`mdbook build book/`); this crate only keeps its
//! snippets honest.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/geometry.md")]
pub mod geometry {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/detection.md")]
pub mod detection {}

#[doc = include_str!("../../../book/src/tracking.md")]
pub mod tracking {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
