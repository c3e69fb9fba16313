//! Flat `key = value` configuration text and `start:stop:count` grid specs.
//!
//! Blank lines and lines starting with `#` are ignored; a `#` after a value
//! starts a comment. Keys are `[a-z0-9_]+` and may appear once.

use std::collections::BTreeMap;

use crate::ansatz::BasisFamily;
use crate::error::{Error, Result};
use crate::optimizer::SearchConfig;

pub type KeyValues = BTreeMap<String, (usize, String)>;

fn parse_error<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, msg: msg.into() })
}

pub fn parse_key_values(text: &str) -> Result<KeyValues> {
    let mut out = KeyValues::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return parse_error(line, "expected key = value");
        };
        let key = k.trim();
        let value = v.trim();
        if key.is_empty() || !key.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_') {
            return parse_error(line, format!("invalid key {key:?}"));
        }
        if value.is_empty() {
            return parse_error(line, format!("missing value for {key}"));
        }
        if out.insert(key.to_string(), (line, value.to_string())).is_some() {
            return parse_error(line, format!("duplicate key {key}"));
        }
    }
    Ok(out)
}

fn number<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().or_else(|_| parse_error(line, format!("{key}: cannot parse {v:?}")))
}

fn finite(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = number(line, key, v)?;
    if !x.is_finite() {
        return parse_error(line, format!("{key} must be finite"));
    }
    Ok(x)
}

fn boolean(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => parse_error(line, format!("{key}: expected true or false, got {v:?}")),
    }
}

/// Keys accepted by [`search_config_from_text`]; frequencies in MHz, times in μs.
pub const SEARCH_KEYS: &[&str] = &[
    "cutoff",
    "distance",
    "diagonals",
    "kappa_mhz",
    "kappa_q_mhz",
    "t_us",
    "bound_mhz",
    "lr",
    "lr_final",
    "iters",
    "seed",
    "steps_per_us",
    "checkpoint_every",
    "modified",
];

/// Applies key-values on top of `base`. `distance = all` selects the all-to-all family.
pub fn apply_search_keys(base: &SearchConfig, kv: &KeyValues) -> Result<SearchConfig> {
    let mut c = base.clone();
    let mut diagonals = None;
    let mut all_to_all = matches!(c.family, BasisFamily::AllToAll { .. });
    let mut distance = match c.family {
        BasisFamily::Distance { d } => d,
        BasisFamily::AllToAll { .. } => 2,
    };
    for (key, (line, v)) in kv {
        let (line, v) = (*line, v.as_str());
        match key.as_str() {
            "cutoff" => c.cutoff = number(line, key, v)?,
            "distance" => {
                if v == "all" {
                    all_to_all = true;
                } else {
                    all_to_all = false;
                    distance = number(line, key, v)?;
                }
            }
            "diagonals" => diagonals = Some(boolean(line, key, v)?),
            "kappa_mhz" => c.kappa_mhz = finite(line, key, v)?,
            "kappa_q_mhz" => c.kappa_q_mhz = finite(line, key, v)?,
            "t_us" => c.t_final = finite(line, key, v)?,
            "bound_mhz" => c.bound_mhz = finite(line, key, v)?,
            "lr" => c.lr = finite(line, key, v)?,
            "lr_final" => c.lr_final = finite(line, key, v)?,
            "iters" => c.iters = number(line, key, v)?,
            "seed" => c.seed = number(line, key, v)?,
            "steps_per_us" => c.steps_per_unit = number(line, key, v)?,
            "checkpoint_every" => c.checkpoint_every = number(line, key, v)?,
            "modified" => c.modified = boolean(line, key, v)?,
            _ => return parse_error(line, format!("unknown key {key}")),
        }
    }
    c.family = if all_to_all {
        let base_diag = matches!(base.family, BasisFamily::AllToAll { diagonals: true });
        BasisFamily::AllToAll { diagonals: diagonals.unwrap_or(base_diag) }
    } else {
        BasisFamily::Distance { d: distance }
    };
    Ok(c)
}

pub fn search_config_from_text(text: &str) -> Result<SearchConfig> {
    apply_search_keys(&SearchConfig::default(), &parse_key_values(text)?)
}

/// Renders a config in the same key-value form.
pub fn search_config_to_text(c: &SearchConfig) -> String {
    let (distance, diagonals) = match c.family {
        BasisFamily::Distance { d } => (d.to_string(), false),
        BasisFamily::AllToAll { diagonals } => ("all".to_string(), diagonals),
    };
    format!(
        "cutoff = {}\ndistance = {distance}\ndiagonals = {diagonals}\nkappa_mhz = {:?}\nkappa_q_mhz = {:?}\n\
         t_us = {:?}\nbound_mhz = {:?}\nlr = {:?}\nlr_final = {:?}\niters = {}\nseed = {}\n\
         steps_per_us = {}\ncheckpoint_every = {}\nmodified = {}\n",
        c.cutoff,
        c.kappa_mhz,
        c.kappa_q_mhz,
        c.t_final,
        c.bound_mhz,
        c.lr,
        c.lr_final,
        c.iters,
        c.seed,
        c.steps_per_unit,
        c.checkpoint_every,
        c.modified
    )
}

/// `start:stop:count` → `count` evenly spaced values including both ends.
/// A bare number is a one-point grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.trim().split(':').collect();
    let val = |s: &str| -> Result<f64> {
        let x: f64 = s.trim().parse().or_else(|_| parse_error(1, format!("bad number {s:?}")))?;
        if x.is_finite() {
            Ok(x)
        } else {
            parse_error(1, "grid values must be finite")
        }
    };
    match parts.as_slice() {
        [one] => Ok(vec![val(one)?]),
        [a, b, n] => {
            let (a, b) = (val(a)?, val(b)?);
            let n: usize = n.trim().parse().or_else(|_| parse_error(1, format!("bad count {n:?}")))?;
            match n {
                0 => parse_error(1, "count must be at least 1"),
                1 if a != b => parse_error(1, "a one-point grid needs start = stop"),
                1 => Ok(vec![a]),
                _ if n > 1_000_000 => parse_error(1, "count above 1e6"),
                _ => Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()),
            }
        }
        _ => parse_error(1, "expected start:stop:count"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let c = SearchConfig { family: BasisFamily::AllToAll { diagonals: true }, seed: 17, lr: 0.0025, ..SearchConfig::default() };
        assert_eq!(search_config_from_text(&search_config_to_text(&c)).unwrap(), c);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = search_config_from_text("# c\ncutoff = 4\nbogus = 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
        assert!(search_config_from_text("cutoff = 4\ncutoff = 5").is_err());
        assert!(search_config_from_text("cutoff 4").is_err());
        assert!(search_config_from_text("t_us = inf").is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("2.5").unwrap(), vec![2.5]);
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("a:1:2").is_err());
    }
}
