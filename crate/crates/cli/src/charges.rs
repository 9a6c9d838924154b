use std::fs;
use std::path::Path;

use ellipsoidal::solvation::PointCharge;

use crate::error::CliError;

/// Parses `x y z q` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_charges(text: &str) -> Result<Vec<PointCharge>, CliError> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::validation("InvalidInput", format!("charge file line {}: {e}", lineno + 1)))?;
        let [x, y, z, q] = fields[..] else {
            return Err(CliError::validation(
                "InvalidInput",
                format!("charge file line {}: expected 4 fields, got {}", lineno + 1, fields.len()),
            ));
        };
        if ![x, y, z, q].iter().all(|v| v.is_finite()) {
            return Err(CliError::validation(
                "InvalidInput",
                format!("charge file line {}: non-finite value", lineno + 1),
            ));
        }
        out.push(PointCharge::new([x, y, z], q));
    }
    if out.is_empty() {
        return Err(CliError::validation("InvalidInput", "charge file contains no charges"));
    }
    Ok(out)
}

pub fn read_charges(path: &Path) -> Result<Vec<PointCharge>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation("InvalidInput", format!("{}: {e}", path.display())))?;
    parse_charges(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blanks() {
        let c = parse_charges("# header\n\n3 4 5 1.0  # off-axis\n0 0 0 -1\n").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].position, [3.0, 4.0, 5.0]);
        assert_eq!(c[1].q, -1.0);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(parse_charges("1 2 3").is_err());
        assert!(parse_charges("1 2 3 x").is_err());
        assert!(parse_charges("# nothing\n").is_err());
        assert!(parse_charges("1 2 3 NaN").is_err());
    }
}
