//! File formats, command line, remote inference client and the synthetic desk
//! experiment built on `lexnorm-core`.

pub mod cli;
pub mod desk;
pub mod formats;
pub mod remote;
pub mod selector;
