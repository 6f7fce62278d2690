//! The guide's chapters are compiled as doctests so their code samples
//! stay in sync with the library.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/master-equation.md")]
mod master_equation {}

#[doc = include_str!("../../../book/src/eigenframe-tracking.md")]
mod eigenframe_tracking {}

#[doc = include_str!("../../../book/src/rate-compensation.md")]
mod rate_compensation {}

#[doc = include_str!("../../../book/src/jaynes-cummings.md")]
mod jaynes_cummings {}

#[doc = include_str!("../../../book/src/cli-and-formats.md")]
mod cli_and_formats {}
