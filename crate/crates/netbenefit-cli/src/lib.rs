//! Configuration and file formats of the `netbenefit` command-line tool.

pub mod config;
pub mod data_io;
