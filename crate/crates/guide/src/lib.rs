//! Every chapter of `book/` as a module doc, so `cargo test -p qzero-guide`
//! runs each listing as a doc-test. Edit the Markdown, not this file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/instances.md")]
pub mod instances {}
#[doc = include_str!("../../../book/src/schedules.md")]
pub mod schedules {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/mcts.md")]
pub mod mcts {}
#[doc = include_str!("../../../book/src/descent.md")]
pub mod descent {}
#[doc = include_str!("../../../book/src/qzero.md")]
pub mod qzero {}
#[doc = include_str!("../../../book/src/digitizer.md")]
pub mod digitizer {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
