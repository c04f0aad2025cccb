//! Shared helpers for result files.

use std::io::Write;

use crate::error::Result;

/// Writes `# key=value` lines so every result file carries its own
/// configuration and seeds.
pub fn write_header_lines<W: Write>(w: &mut W, header: &[(String, String)]) -> Result<()> {
    for (k, v) in header {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

/// Parses the `# key=value` header of a result file.
pub fn read_header_lines(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map_while(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
