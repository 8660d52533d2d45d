//! Flat `key = value` configuration files and command-line value syntax.
//!
//! One pair per line; `#` starts a comment. Grids are written
//! `start:stop:count`, sets `lo:hi`, lists `v1,v2,...`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::affine::AffineDiffusion;
use crate::heston::HestonParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("unknown key `{0}`")]
    Unknown(String),
    #[error("key `{key}`: cannot parse `{value}`")]
    BadValue { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
    /// Well-formed values that the model rejects.
    #[error("rejected parameters: {0}")]
    Rejected(String),
}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

fn valid_key(k: &str) -> bool {
    !k.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_number(key: &str, s: &str) -> ConfigResult<f64> {
    let bad = || ConfigError::BadValue { key: key.to_string(), value: s.to_string() };
    let v: f64 = s.trim().parse().map_err(|_| bad())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

impl KeyValues {
    pub fn parse(text: &str) -> ConfigResult<Self> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(ConfigError::Syntax { line, message: format!("expected `key = value`, got `{content}`") });
            };
            let (k, v) = (k.trim(), v.trim());
            if !valid_key(k) {
                return Err(ConfigError::Syntax { line, message: format!("invalid key `{k}`") });
            }
            if v.is_empty() {
                return Err(ConfigError::Syntax { line, message: format!("empty value for `{k}`") });
            }
            if entries.iter().any(|(e, _)| e == k) {
                return Err(ConfigError::Duplicate { line, key: k.to_string() });
            }
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn f64(&self, key: &str) -> ConfigResult<f64> {
        let v = self.get(key).ok_or_else(|| ConfigError::Missing(key.to_string()))?;
        parse_number(key, v)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> ConfigResult<f64> {
        match self.get(key) {
            Some(v) => parse_number(key, v),
            None => Ok(default),
        }
    }

    pub fn usize(&self, key: &str) -> ConfigResult<usize> {
        let v = self.get(key).ok_or_else(|| ConfigError::Missing(key.to_string()))?;
        v.parse().map_err(|_| ConfigError::BadValue { key: key.to_string(), value: v.to_string() })
    }

    pub fn numbers(&self, key: &str) -> ConfigResult<Option<Vec<f64>>> {
        self.get(key).map(|v| v.split(',').map(|s| parse_number(key, s)).collect()).transpose()
    }

    fn reject_unknown(&self, allowed: impl Fn(&str) -> bool) -> ConfigResult<()> {
        match self.keys().find(|k| !allowed(k)) {
            Some(k) => Err(ConfigError::Unknown(k.to_string())),
            None => Ok(()),
        }
    }
}

const HESTON_KEYS: [&str; 8] = ["r", "k", "a", "b", "sigma", "rho", "x0", "v0"];

pub fn heston_from(kv: &KeyValues) -> ConfigResult<HestonParams> {
    kv.reject_unknown(|k| HESTON_KEYS.contains(&k))?;
    let p = HestonParams {
        r: kv.f64("r")?,
        k: kv.f64("k")?,
        a: kv.f64("a")?,
        b: kv.f64("b")?,
        sigma: kv.f64("sigma")?,
        rho: kv.f64("rho")?,
        x0: kv.f64("x0")?,
        v0: kv.f64("v0")?,
    };
    p.validate().map_err(|e| ConfigError::Rejected(e.to_string()))
}

pub fn parse_heston(text: &str) -> ConfigResult<HestonParams> {
    heston_from(&KeyValues::parse(text)?)
}

/// Renders parameters in the format [`parse_heston`] reads.
pub fn heston_to_string(p: &HestonParams) -> String {
    let vals = [p.r, p.k, p.a, p.b, p.sigma, p.rho, p.x0, p.v0];
    HESTON_KEYS.iter().zip(vals).map(|(k, v)| format!("{k} = {v:?}\n")).collect()
}

fn indexed(k: &str, prefix: &str, d: usize) -> bool {
    k.strip_prefix(prefix).and_then(|s| s.parse::<usize>().ok()).is_some_and(|i| (1..=d).contains(&i))
}

/// Model file: `m`, `n`, then optional `a`, `b`, `c`, `alpha<i>`, `beta<i>`,
/// `gamma<i>` (1-based `i`, matrices row-major). Missing entries are zero.
pub fn affine_from(kv: &KeyValues) -> ConfigResult<AffineDiffusion> {
    let m = kv.usize("m")?;
    let n = kv.usize("n")?;
    let d = m + n;
    if d == 0 || d > 64 {
        return Err(ConfigError::Invalid(format!("dimension m + n = {d} must be in 1..=64")));
    }
    kv.reject_unknown(|k| {
        matches!(k, "m" | "n" | "a" | "b" | "c")
            || indexed(k, "alpha", d)
            || indexed(k, "beta", d)
            || indexed(k, "gamma", d)
    })?;
    let matrix = |key: &str| -> ConfigResult<DMatrix<f64>> {
        match kv.numbers(key)? {
            None => Ok(DMatrix::zeros(d, d)),
            Some(v) if v.len() == d * d => Ok(DMatrix::from_row_slice(d, d, &v)),
            Some(v) => Err(ConfigError::Invalid(format!("`{key}` has {} entries, expected {}", v.len(), d * d))),
        }
    };
    let vector = |key: &str| -> ConfigResult<DVector<f64>> {
        match kv.numbers(key)? {
            None => Ok(DVector::zeros(d)),
            Some(v) if v.len() == d => Ok(DVector::from_vec(v)),
            Some(v) => Err(ConfigError::Invalid(format!("`{key}` has {} entries, expected {d}", v.len()))),
        }
    };
    let model = AffineDiffusion {
        m,
        n,
        a: matrix("a")?,
        b: vector("b")?,
        c: kv.f64_or("c", 0.0)?,
        alpha: (1..=d).map(|i| matrix(&format!("alpha{i}"))).collect::<ConfigResult<_>>()?,
        beta: (1..=d).map(|i| vector(&format!("beta{i}"))).collect::<ConfigResult<_>>()?,
        gamma: (1..=d).map(|i| kv.f64_or(&format!("gamma{i}"), 0.0)).collect::<ConfigResult<_>>()?,
    };
    model.validated().map_err(|e| ConfigError::Rejected(e.to_string()))
}

pub fn parse_affine(text: &str) -> ConfigResult<AffineDiffusion> {
    affine_from(&KeyValues::parse(text)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn parse(s: &str) -> ConfigResult<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(ConfigError::Invalid(format!("grid `{s}` is not start:stop:count")));
        };
        let start = parse_number("grid", a)?;
        let stop = parse_number("grid", b)?;
        let count: usize =
            n.trim().parse().map_err(|_| ConfigError::BadValue { key: "grid".into(), value: n.to_string() })?;
        if !(2..=10_000_000).contains(&count) {
            return Err(ConfigError::Invalid(format!("grid count {count} must be in 2..=10^7")));
        }
        if !(start < stop) {
            return Err(ConfigError::Invalid(format!("grid start {start} must be below stop {stop}")));
        }
        Ok(Self { start, stop, count })
    }

    pub fn points(&self) -> Vec<f64> {
        let h = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.stop } else { self.start + h * i as f64 }).collect()
    }
}

pub fn parse_list(s: &str) -> ConfigResult<Vec<f64>> {
    if s.trim().is_empty() {
        return Err(ConfigError::Invalid("empty list".into()));
    }
    s.split(',').map(|v| parse_number("list", v)).collect()
}

pub fn parse_set(s: &str) -> ConfigResult<(f64, f64)> {
    let Some((a, b)) = s.split_once(':') else {
        return Err(ConfigError::Invalid(format!("set `{s}` is not lo:hi")));
    };
    let (lo, hi) = (parse_number("set", a)?, parse_number("set", b)?);
    if lo > hi {
        return Err(ConfigError::Invalid(format!("set bounds {lo} > {hi}")));
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_values_with_comments() {
        let kv = KeyValues::parse("# header\nr = 0.0\n\nk=-0.5 # trailing\n").unwrap();
        assert_eq!(kv.get("r"), Some("0.0"));
        assert_eq!(kv.f64("k").unwrap(), -0.5);
        assert!(matches!(kv.f64("a"), Err(ConfigError::Missing(_))));
    }

    #[test]
    fn syntax_errors_carry_lines() {
        assert!(matches!(KeyValues::parse("a = 1\nbroken\n"), Err(ConfigError::Syntax { line: 2, .. })));
        assert!(matches!(KeyValues::parse("a = 1\na = 2\n"), Err(ConfigError::Duplicate { line: 2, .. })));
        assert!(matches!(KeyValues::parse("a b = 1"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(KeyValues::parse("a ="), Err(ConfigError::Syntax { .. })));
    }

    #[test]
    fn heston_round_trip() {
        let p = HestonParams { rho: -0.3, ..HestonParams::toy() };
        assert_eq!(parse_heston(&heston_to_string(&p)).unwrap(), p);
        let bad = heston_to_string(&p).replace("sigma = 1.0", "sigma = -1.0");
        assert!(matches!(parse_heston(&bad), Err(ConfigError::Rejected(_))));
        let extra = format!("{}theta = 2\n", heston_to_string(&p));
        assert!(matches!(parse_heston(&extra), Err(ConfigError::Unknown(_))));
        let nan = heston_to_string(&p).replace("r = 0.0", "r = NaN");
        assert!(matches!(parse_heston(&nan), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn affine_model_file() {
        let text = "m = 1\nn = 1\nb = 0.5, 0.0\nalpha1 = 1, 0.2, 0.2, 1\nbeta1 = -1, 0\n";
        let m = parse_affine(text).unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.alpha[0][(0, 1)], 0.2);
        assert_eq!(m.alpha[1], DMatrix::zeros(2, 2));
        assert!(parse_affine("m = 1\nn = 0\nalpha2 = 1\n").is_err());
        assert!(parse_affine("m = 1\nn = 0\nb = 1, 2\n").is_err());
    }

    #[test]
    fn grids_lists_sets() {
        let g = GridSpec::parse("-2:2:101").unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 101);
        assert_eq!(pts[0], -2.0);
        assert_eq!(pts[100], 2.0);
        assert!((pts[50]).abs() < 1e-15);
        assert!(GridSpec::parse("1:0:5").is_err());
        assert!(GridSpec::parse("0:1:1").is_err());
        assert!(GridSpec::parse("0:1").is_err());
        assert_eq!(parse_list("0.1,0.05").unwrap(), vec![0.1, 0.05]);
        assert!(parse_list("").is_err());
        assert_eq!(parse_set("0.9:1.1").unwrap(), (0.9, 1.1));
        assert!(parse_set("1.1:0.9").is_err());
    }
}
