//! Compiles the guide's code snippets as doc-tests so the book stays in
//! sync with the library (`cargo test --doc`).

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/data-model.md")]
pub mod data_model {}

#[doc = include_str!("../../../book/src/net-benefit.md")]
pub mod net_benefit {}

#[doc = include_str!("../../../book/src/standardization.md")]
pub mod standardization {}

#[doc = include_str!("../../../book/src/censoring.md")]
pub mod censoring {}

#[doc = include_str!("../../../book/src/inference.md")]
pub mod inference {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
