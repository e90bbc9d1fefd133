//! Flag values with unit suffixes. Each parser returns the canonical unit
//! stored in manifests: seconds, picoseconds, nanometres, decibels, metres.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitError(String);

impl fmt::Display for UnitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UnitError {}

/// Split `"12.5ms"` into `(12.5, "ms")`.
fn split(raw: &str) -> Result<(f64, &str), UnitError> {
    let s = raw.trim();
    let at = s
        .char_indices()
        .find(|&(i, c)| c.is_ascii_alphabetic() && !(matches!(c, 'e' | 'E') && i > 0 && exponent_follows(&s[i + 1..])))
        .map_or(s.len(), |(i, _)| i);
    let (num, unit) = s.split_at(at);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| UnitError(format!("`{raw}`: expected a number with an optional unit")))?;
    if !value.is_finite() {
        return Err(UnitError(format!("`{raw}`: value must be finite")));
    }
    Ok((value, unit.trim()))
}

fn exponent_follows(rest: &str) -> bool {
    let rest = rest.strip_prefix(['+', '-']).unwrap_or(rest);
    rest.starts_with(|c: char| c.is_ascii_digit())
}

fn scaled(raw: &str, table: &[(&str, f64)], default: &str) -> Result<f64, UnitError> {
    let (value, unit) = split(raw)?;
    let unit = if unit.is_empty() { default } else { unit };
    table
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, k)| value * k)
        .ok_or_else(|| {
            let known: Vec<&str> = table.iter().map(|(u, _)| *u).collect();
            UnitError(format!(
                "`{raw}`: unknown unit `{unit}` (expected one of {})",
                known.join(", ")
            ))
        })
}

const TIME_IN_S: [(&str, f64); 6] = [
    ("s", 1.0),
    ("ms", 1e-3),
    ("us", 1e-6),
    ("ns", 1e-9),
    ("ps", 1e-12),
    ("min", 60.0),
];

/// Duration in seconds; a bare number is seconds.
pub fn seconds(raw: &str) -> Result<f64, UnitError> {
    scaled(raw, &TIME_IN_S, "s")
}

/// Time in whole picoseconds; a bare number is picoseconds.
pub fn picoseconds(raw: &str) -> Result<u64, UnitError> {
    let s = scaled(raw, &TIME_IN_S, "ps")?;
    let ps = s * 1e12;
    let rounded = ps.round();
    if rounded < 0.0 || (ps - rounded).abs() > 1e-6 * ps.abs().max(1.0) {
        return Err(UnitError(format!(
            "`{raw}`: must be a non-negative whole number of picoseconds"
        )));
    }
    Ok(rounded as u64)
}

/// Wavelength in nanometres; a bare number is nanometres.
pub fn nanometres(raw: &str) -> Result<f64, UnitError> {
    scaled(raw, &[("nm", 1.0), ("um", 1e3), ("pm", 1e-3)], "nm")
}

/// Level in dB; a bare number is dB.
pub fn decibels(raw: &str) -> Result<f64, UnitError> {
    scaled(raw, &[("dB", 1.0), ("db", 1.0)], "dB")
}

/// Distance in metres; a bare number is metres.
pub fn metres(raw: &str) -> Result<f64, UnitError> {
    scaled(raw, &[("m", 1.0), ("km", 1e3), ("cm", 1e-2), ("mm", 1e-3)], "m")
}

/// `lo:hi` picosecond window.
pub fn ps_window(raw: &str) -> Result<(u64, u64), UnitError> {
    let (lo, hi) = raw
        .split_once(':')
        .ok_or_else(|| UnitError(format!("`{raw}`: expected lo:hi")))?;
    Ok((picoseconds(lo)?, picoseconds(hi)?))
}

/// Wavelength grid points, nm.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

/// `lo:hi:step` wavelength grid, both ends included.
pub fn nm_grid(raw: &str) -> Result<Grid, UnitError> {
    let parts: Vec<&str> = raw.split(':').collect();
    let [lo, hi, step] = parts[..] else {
        return Err(UnitError(format!("`{raw}`: expected lo:hi:step")));
    };
    let (lo, hi, step) = (nanometres(lo)?, nanometres(hi)?, nanometres(step)?);
    if !(step > 0.0 && hi >= lo) {
        return Err(UnitError(format!("`{raw}`: need hi >= lo and step > 0")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    if n > 10_000_000 {
        return Err(UnitError(format!("`{raw}`: grid has more than 10^7 points")));
    }
    Ok(Grid((0..=n).map(|i| lo + step * i as f64).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn durations() {
        assert_eq!(seconds("60s").unwrap(), 60.0);
        assert_eq!(seconds("60").unwrap(), 60.0);
        assert_eq!(seconds("250ms").unwrap(), 0.25);
        assert_eq!(seconds("2min").unwrap(), 120.0);
        assert_eq!(seconds("1e-3s").unwrap(), 1e-3);
        assert!(seconds("5 parsecs").is_err());
        assert!(seconds("abc").is_err());
    }

    #[test]
    fn picos() {
        assert_eq!(picoseconds("100ps").unwrap(), 100);
        assert_eq!(picoseconds("100").unwrap(), 100);
        assert_eq!(picoseconds("1ns").unwrap(), 1000);
        assert_eq!(picoseconds("2.5e3ps").unwrap(), 2500);
        assert_eq!(picoseconds("20us").unwrap(), 20_000_000);
        assert!(picoseconds("0.5ps").is_err());
        assert!(picoseconds("-1ps").is_err());
        assert_eq!(ps_window("0:30us").unwrap(), (0, 30_000_000));
    }

    #[test]
    fn others() {
        assert_eq!(nanometres("1310nm").unwrap(), 1310.0);
        assert_eq!(nanometres("1.55um").unwrap(), 1550.0);
        assert_eq!(decibels("-50dB").unwrap(), -50.0);
        assert_eq!(decibels("-50").unwrap(), -50.0);
        assert_eq!(metres("1.5km").unwrap(), 1500.0);
        let g = nm_grid("1260nm:1560nm:1nm").unwrap().0;
        assert_eq!(g.len(), 301);
        assert_eq!(*g.last().unwrap(), 1560.0);
        assert_eq!(nm_grid("1310:1310:0.1").unwrap().0, vec![1310.0]);
        assert!(nm_grid("1310:1300:1").is_err());
        assert!(nm_grid("1310:1320").is_err());
    }
}
