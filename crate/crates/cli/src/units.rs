//! Parsing of numbers with unit suffixes (`250us`, `-20k`, `100uG`, `3.9Hz`).

use std::f64::consts::PI;

use anyhow::{anyhow, bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    /// seconds
    Time,
    /// hertz
    Frequency,
    /// gauss
    Field,
    /// rad/s; a `Hz` suffix is converted with 2 pi
    Rate,
    Plain,
}

fn suffixes(dim: Dim) -> &'static [(&'static str, f64)] {
    match dim {
        Dim::Time => &[
            ("ns", 1e-9),
            ("us", 1e-6),
            ("µs", 1e-6),
            ("ms", 1e-3),
            ("s", 1.0),
        ],
        Dim::Frequency => &[
            ("kHz", 1e3),
            ("MHz", 1e6),
            ("GHz", 1e9),
            ("Hz", 1.0),
            ("k", 1e3),
            ("M", 1e6),
        ],
        Dim::Field => &[("uG", 1e-6), ("µG", 1e-6), ("mG", 1e-3), ("G", 1.0)],
        Dim::Rate => &[
            ("rad/s", 1.0),
            ("/s", 1.0),
            ("kHz", 2e3 * PI),
            ("Hz", 2.0 * PI),
        ],
        Dim::Plain => &[],
    }
}

/// Parses one value into the SI-like base unit of `dim`.
pub fn parse_quantity(text: &str, dim: Dim) -> Result<f64> {
    let t = text.trim();
    let (number, scale) = suffixes(dim)
        .iter()
        .find_map(|(suffix, scale)| t.strip_suffix(suffix).map(|n| (n.trim(), *scale)))
        .unwrap_or((t, 1.0));
    let value: f64 = number
        .parse()
        .map_err(|_| anyhow!("cannot parse {text:?} as a number{}", unit_hint(dim)))?;
    // Sub-unit prefixes divide by an exact power of ten so `250us == 250e-6`.
    let v = if scale < 1.0 {
        value / (1.0 / scale).round()
    } else {
        value * scale
    };
    if !v.is_finite() {
        bail!("{text:?} is not finite");
    }
    Ok(v)
}

fn unit_hint(dim: Dim) -> &'static str {
    match dim {
        Dim::Time => " with optional unit s/ms/us/ns",
        Dim::Frequency => " with optional unit Hz/kHz/MHz or k/M",
        Dim::Field => " with optional unit G/mG/uG",
        Dim::Rate => " with optional unit rad/s or Hz (times 2 pi)",
        Dim::Plain => "",
    }
}

/// Value list: `a,b,c`, `lo..hi` (with `default_step`) or `lo..hi:step`.
pub fn parse_list(text: &str, dim: Dim, default_step: f64) -> Result<Vec<f64>> {
    let t = text.trim();
    if let Some((lo, rest)) = t.split_once("..") {
        let (hi, step) = match rest.split_once(':') {
            Some((hi, step)) => (hi, parse_quantity(step, dim)?),
            None => (rest, default_step),
        };
        let (lo, hi) = (parse_quantity(lo, dim)?, parse_quantity(hi, dim)?);
        if !(step > 0.0) {
            bail!("range step must be > 0 in {text:?}");
        }
        if hi < lo {
            bail!("range {text:?} has hi < lo");
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        if n > 10_000_000 {
            bail!("range {text:?} has too many points ({n})");
        }
        return Ok((0..n).map(|k| lo + k as f64 * step).collect());
    }
    let values = t
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_quantity(s, dim))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        bail!("empty list");
    }
    Ok(values)
}
