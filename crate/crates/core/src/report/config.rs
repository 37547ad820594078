use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::spectral::ensure_noncritical;

/// Parameters shared by all commands. The text form is one `key = value`
/// pair per line with `#` comments.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub length: f64,
    pub lambda: f64,
    pub modes: usize,
    pub nx: usize,
    pub dt: f64,
    pub t_final: f64,
    pub theta: f64,
    pub amplitude: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub cache: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            length: 3.0,
            lambda: 1.0,
            modes: 30,
            nx: 512,
            dt: 1e-3,
            t_final: 10.0,
            theta: 0.5,
            amplitude: 0.01,
            seed: 7,
            out: PathBuf::from("out"),
            cache: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {key} = {value:?}")))
}

impl RunConfig {
    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "length" | "L" => self.length = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "modes" | "N" => self.modes = parse(key, value)?,
            "nx" => self.nx = parse(key, value)?,
            "dt" => self.dt = parse(key, value)?,
            "tfinal" | "t_final" => self.t_final = parse(key, value)?,
            "theta" => self.theta = parse(key, value)?,
            "amplitude" => self.amplitude = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "cache" => self.cache = Some(PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Overlays the pairs in `text` on `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got {raw:?}", no + 1))
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "length = {}\nlambda = {}\nmodes = {}\nnx = {}\ndt = {}\ntfinal = {}\ntheta = {}\namplitude = {}\nseed = {}\nout = {}\n",
            self.length,
            self.lambda,
            self.modes,
            self.nx,
            self.dt,
            self.t_final,
            self.theta,
            self.amplitude,
            self.seed,
            self.out.display()
        );
        if let Some(c) = &self.cache {
            s.push_str(&format!("cache = {}\n", c.display()));
        }
        s
    }

    /// Range checks that do not involve the critical set.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("lambda", self.lambda),
            ("dt", self.dt),
            ("tfinal", self.t_final),
            ("amplitude", self.amplitude),
        ];
        for (k, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{k} must be positive, got {v}")));
            }
        }
        if self.modes == 0 {
            return Err(Error::Config("modes must be at least 1".into()));
        }
        if self.nx < 6 || self.nx % 2 != 0 {
            return Err(Error::Config(format!("nx must be even and at least 6, got {}", self.nx)));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("theta must lie in [1/2, 1], got {}", self.theta)));
        }
        Ok(())
    }

    /// [`Self::validate`] plus the distance to the critical set.
    pub fn validate_noncritical(&self) -> Result<()> {
        self.validate()?;
        ensure_noncritical(self.length, 1e-9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_with_comments_and_overrides() {
        let c = RunConfig::from_text("# reference\nlength = 3.5\nmodes=12 # trailing\n\nlambda = 2\n").unwrap();
        assert_eq!(c.length, 3.5);
        assert_eq!(c.modes, 12);
        assert_eq!(c.lambda, 2.0);
        assert_eq!(c.nx, 512);
    }

    #[test]
    fn bad_lines_rejected() {
        assert!(RunConfig::from_text("length 3").is_err());
        assert!(RunConfig::from_text("colour = red").is_err());
        assert!(RunConfig::from_text("nx = many").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.cache = Some("k.cache".into());
        c.dt = 2.5e-4;
        assert_eq!(RunConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        c.validate_noncritical().unwrap();
        c.length = 2.0 * std::f64::consts::PI;
        c.validate().unwrap();
        assert!(matches!(c.validate_noncritical(), Err(Error::CriticalLength { .. })));
        c.nx = 7;
        assert!(c.validate().is_err());
    }
}
