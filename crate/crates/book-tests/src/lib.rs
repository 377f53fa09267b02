//! mdbook cannot run snippets against a library with dependencies, so each
//! chapter is pulled in as a module doc and checked by `cargo test --doc`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/problems.md")]
pub mod problems {}

#[doc = include_str!("../../../book/src/selection.md")]
pub mod selection {}

#[doc = include_str!("../../../book/src/features.md")]
pub mod features {}

#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}

#[doc = include_str!("../../../book/src/server.md")]
pub mod server {}

#[doc = include_str!("../../../book/src/training-data.md")]
pub mod training_data {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
