//! Command-line entry point. Thin argument parsing over the library.

use std::ffi::OsString;

/// Run the CLI; returns the process exit code.
/// 0 = success, 2 = input error, 3 = numeric failure.
pub fn run<I, T>(_args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    eprintln!("not yet implemented");
    2
}
