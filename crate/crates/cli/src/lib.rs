//! Shared plumbing for the command-line tools.

use std::process::ExitCode;

use mav_core::Error;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical { .. } | Error::NoConvergence { .. } => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

/// Prints the error and maps it to the process exit status.
pub fn finish(r: mav_core::Result<()>) -> ExitCode {
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn print_pairs<K: AsRef<str>, V: AsRef<str>>(pairs: impl IntoIterator<Item = (K, V)>) {
    for (k, v) in pairs {
        println!("{}={}", k.as_ref(), v.as_ref());
    }
}
