pub mod dataset;
pub mod evaluate;
pub mod generate;
pub mod serve;

use std::io::Write;
use std::path::Path;

use crate::CliError;

/// Writes to the path, or to stdout when the path is "-" or absent.
pub fn write_output(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) if path.as_os_str() != "-" => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(path, content)?;
            Ok(())
        }
        _ => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            Ok(())
        }
    }
}
