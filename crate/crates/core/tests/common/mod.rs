#![allow(dead_code)] // each test crate uses a subset of these helpers

use std::path::Path;
use std::process::{Command, Output};

/// Runs the compiled CLI binary with the given arguments.
pub fn run_cli(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csts-reward"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to spawn the csts-reward binary")
}

pub fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

pub fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}
