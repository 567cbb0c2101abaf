//! mdbook cannot test snippets that depend on workspace crates, so every
//! chapter is pulled in as a module doc and checked by `cargo test --doc`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/rf-model.md")]
pub mod rf_model {}
#[doc = include_str!("../../../book/src/objectives.md")]
pub mod objectives {}
#[doc = include_str!("../../../book/src/pareto.md")]
pub mod pareto {}
#[doc = include_str!("../../../book/src/gp.md")]
pub mod gp {}
#[doc = include_str!("../../../book/src/ehvi.md")]
pub mod ehvi {}
#[doc = include_str!("../../../book/src/bo.md")]
pub mod bo {}
#[doc = include_str!("../../../book/src/ddpg.md")]
pub mod ddpg {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
