//! Seeded synthetic classification data.
//!
//! Nonzeros are standard normal; every row keeps at least one entry. Labels
//! come from a planted unit-norm hyperplane, each flipped independently with
//! probability `noise`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    /// Probability that an entry is nonzero.
    pub density: f64,
    pub seed: u64,
    /// Label flip probability.
    pub noise: f64,
    /// Repeat the first example `n` times.
    pub identical: bool,
}

impl SyntheticSpec {
    pub fn new(n: usize, d: usize, density: f64, seed: u64) -> Self {
        SyntheticSpec {
            n,
            d,
            density,
            seed,
            noise: 0.0,
            identical: false,
        }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::Config("synthetic n and d must be at least 1".into()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::Config(format!("synthetic density must be in (0, 1], got {}", self.density)));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::Config(format!("synthetic noise must be in [0, 1], got {}", self.noise)));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Dataset> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut plane: Vec<f64> = (0..self.d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = plane.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            plane.iter_mut().for_each(|x| *x /= norm);
        }
        let distinct = if self.identical { 1 } else { self.n };
        let mut rows = Vec::with_capacity(self.n);
        let mut labels = Vec::with_capacity(self.n);
        for _ in 0..distinct {
            let mut row: Vec<(usize, f64)> = Vec::new();
            for j in 0..self.d {
                if self.density >= 1.0 || rng.random::<f64>() < self.density {
                    row.push((j, rng.sample(StandardNormal)));
                }
            }
            row.retain(|&(_, x)| x != 0.0);
            if row.is_empty() {
                let j = rng.random_range(0..self.d);
                let mut x: f64 = rng.sample(StandardNormal);
                if x == 0.0 {
                    x = 1.0;
                }
                row.push((j, x));
            }
            let score: f64 = row.iter().map(|&(j, x)| plane[j] * x).sum();
            let mut y = if score >= 0.0 { 1.0 } else { -1.0 };
            if self.noise > 0.0 && rng.random::<f64>() < self.noise {
                y = -y;
            }
            rows.push(row);
            labels.push(y);
        }
        if self.identical {
            rows = vec![rows[0].clone(); self.n];
            labels = vec![labels[0]; self.n];
        }
        Dataset::from_rows(rows, labels, Some(self.d))
    }
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={},d={},density={},seed={},noise={}",
            self.n, self.d, self.density, self.seed, self.noise
        )?;
        if self.identical {
            write!(f, ",identical=1")?;
        }
        Ok(())
    }
}

impl FromStr for SyntheticSpec {
    type Err = Error;

    /// Parses `n=..,d=..[,density=..][,seed=..][,noise=..][,identical=0|1]`.
    fn from_str(s: &str) -> Result<Self> {
        let mut n = None;
        let mut d = None;
        let mut spec = SyntheticSpec::new(0, 0, 1.0, 0);
        let bad = |k: &str, v: &str| Error::Config(format!("synthetic spec: bad value '{v}' for '{k}'"));
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("synthetic spec: expected key=value, got '{part}'")))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "n" => n = Some(v.parse().map_err(|_| bad(k, v))?),
                "d" => d = Some(v.parse().map_err(|_| bad(k, v))?),
                "density" => spec.density = v.parse().map_err(|_| bad(k, v))?,
                "seed" => spec.seed = v.parse().map_err(|_| bad(k, v))?,
                "noise" => spec.noise = v.parse().map_err(|_| bad(k, v))?,
                "identical" => {
                    spec.identical = match v {
                        "1" | "true" | "yes" => true,
                        "0" | "false" | "no" => false,
                        _ => return Err(bad(k, v)),
                    }
                }
                _ => return Err(Error::Config(format!("synthetic spec: unknown key '{k}'"))),
            }
        }
        spec.n = n.ok_or_else(|| Error::Config("synthetic spec: missing n".into()))?;
        spec.d = d.ok_or_else(|| Error::Config("synthetic spec: missing d".into()))?;
        spec.validate()?;
        Ok(spec)
    }
}
