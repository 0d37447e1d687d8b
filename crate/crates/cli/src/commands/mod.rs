pub mod apo;
pub mod build;
pub mod extract;
pub mod mcd;
pub mod plan;
pub mod pref;

use std::io::Write;
use std::path::Path;

use crate::CmdError;

/// Writes text to a file, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, text: &str) -> Result<(), CmdError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CmdError::input(format!("cannot write {}: {e}", path.display()))),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
                .and_then(|_| lock.write_all(b"\n"))
                .map_err(|e| CmdError::input(format!("cannot write to stdout: {e}")))
        }
    }
}
