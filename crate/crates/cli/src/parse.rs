//! Flag-value parsers: comma lists, `start:stop:step` ranges, (n,m)
//! pairs, and the flat key=value config file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use rlnc_core::simnet::SweepStrategy;

/// Step fudge for float ranges so `0:0.9:0.05` lands on 0.90 despite
/// binary rounding of the ratio.
const RANGE_EPS: f64 = 1e-6;

pub fn scalar<T>(s: &str) -> Result<T, String>
where
    T: FromStr,
    T::Err: Display,
{
    s.trim().parse().map_err(|e| format!("'{s}': {e}"))
}

/// Comma list of floats where each item is a value or `start:stop:step`
/// (both ends inclusive).
pub fn f64_list(s: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        let parts: Vec<&str> = item.split(':').collect();
        match parts.len() {
            1 => out.push(scalar(parts[0])?),
            3 => {
                let start: f64 = scalar(parts[0])?;
                let stop: f64 = scalar(parts[1])?;
                let step: f64 = scalar(parts[2])?;
                if !(step > 0.0) {
                    return Err(format!("'{item}': step must be positive"));
                }
                if stop < start {
                    return Err(format!("'{item}': stop is below start"));
                }
                let count = ((stop - start) / step + RANGE_EPS).floor() as usize;
                out.extend((0..=count).map(|i| start + i as f64 * step));
            }
            _ => return Err(format!("'{item}': expected value or start:stop:step")),
        }
    }
    Ok(out)
}

/// Comma list of unsigned integers where each item is a value, `a:b`
/// (inclusive, step 1), or `a:b:step`.
pub fn u32_list(s: &str) -> Result<Vec<u32>, String> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        let parts: Vec<&str> = item.split(':').collect();
        match parts.len() {
            1 => out.push(scalar(parts[0])?),
            2 | 3 => {
                let start: u32 = scalar(parts[0])?;
                let stop: u32 = scalar(parts[1])?;
                let step: u32 = if parts.len() == 3 { scalar(parts[2])? } else { 1 };
                if step == 0 {
                    return Err(format!("'{item}': step must be positive"));
                }
                if stop < start {
                    return Err(format!("'{item}': stop is below start"));
                }
                out.extend((start..=stop).step_by(step as usize));
            }
            _ => return Err(format!("'{item}': expected value, a:b, or a:b:step")),
        }
    }
    Ok(out)
}

pub fn u16_list(s: &str) -> Result<Vec<u16>, String> {
    u32_list(s)?
        .into_iter()
        .map(|v| u16::try_from(v).map_err(|_| format!("{v} does not fit in 16 bits")))
        .collect()
}

/// Comma list of `n:m` pairs, e.g. `1:2,9:10`. Enforces m >= n >= 1.
pub fn nm_list(s: &str) -> Result<Vec<(u16, u16)>, String> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        let (n, m) = item
            .split_once(':')
            .ok_or_else(|| format!("'{item}': expected n:m"))?;
        let n: u16 = scalar(n)?;
        let m: u16 = scalar(m)?;
        if n == 0 {
            return Err(format!("'{item}': n must be at least 1"));
        }
        if m < n {
            return Err(format!("'{item}': m must be at least n"));
        }
        out.push((n, m));
    }
    Ok(out)
}

/// Comma list of strategy names: `frag`, `nc` (recoding relays, the
/// default network-coded mode), `nc-forward`.
pub fn strategy_list(s: &str) -> Result<Vec<SweepStrategy>, String> {
    s.split(',')
        .map(|item| match item.trim() {
            "frag" => Ok(SweepStrategy::Fragmentation),
            "nc" | "nc-recode" => Ok(SweepStrategy::NcRecode),
            "nc-forward" => Ok(SweepStrategy::NcForward),
            other => Err(format!("'{other}': expected frag, nc, nc-recode, or nc-forward")),
        })
        .collect()
}

/// Maps a field order q = 2^f to its bit width. Anything else is a
/// usage error.
pub fn field_width_for(q: u32) -> Result<u8, String> {
    if q.is_power_of_two() && (2..=65536).contains(&u64::from(q)) {
        Ok(q.trailing_zeros() as u8)
    } else {
        Err(format!("q={q} is not a supported field order (needs 2^f, f in 1..=16)"))
    }
}

/// Keys a config file may set; every entry mirrors a long flag of some
/// subcommand. Unknown keys are rejected so typos do not silently
/// become no-ops.
const ALLOWED_KEYS: &[&str] = &[
    "n", "N", "m", "M", "q", "f", "delta0", "delta1", "delta2", "erasure", "nm",
    "strategies", "packets", "sinks", "reps", "gens-per-rep", "seed", "fragment-size",
    "input", "output", "out",
];

/// Flat `key = value` defaults loaded from --config. Explicit flags
/// always win over these.
#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("{}:{}: expected key=value", path.display(), idx + 1))?;
            let key = key.trim();
            if !ALLOWED_KEYS.contains(&key) {
                return Err(format!("{}:{}: unknown key '{key}'", path.display(), idx + 1));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Effective textual value for one flag: explicit flag, else config
/// entry, else built-in default.
pub fn pick<'a>(flag: &'a Option<String>, cfg: &'a FileConfig, key: &'static str, default: &'a str) -> &'a str {
    flag.as_deref().or_else(|| cfg.get(key)).unwrap_or(default)
}
