//! Library side of the `countreg` command-line tool: report documents and
//! subcommand drivers.

pub mod commands;
pub mod report;
