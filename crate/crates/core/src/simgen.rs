//! Synthetic mean/variance structures driven by shared baseline errors.
//!
//! One set of standard-normal baseline errors is drawn per replication and
//! reused for every structure: the response at `x` is
//! `mu(x) + sigma(x) * e(x)`, so structures differ only in how the same
//! errors are scaled and shifted (common random numbers).
//!
//! Each replication draws from its own ChaCha stream keyed by
//! `(seed, replication)`, so any replication can be regenerated alone.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanStructure {
    /// `mu(x) = 0`.
    Flat,
    /// `mu(x) = ceil(x / segment_len)`.
    Step,
}

impl MeanStructure {
    pub fn letter(self) -> char {
        match self {
            MeanStructure::Flat => 'F',
            MeanStructure::Step => 'S',
        }
    }
}

impl fmt::Display for MeanStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeanStructure::Flat => "flat",
            MeanStructure::Step => "step",
        })
    }
}

impl FromStr for MeanStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(MeanStructure::Flat),
            "step" => Ok(MeanStructure::Step),
            other => Err(Error::Config(format!(
                "unknown mean structure {other:?} (expected `flat` or `step`)"
            ))),
        }
    }
}

/// A mean structure plus a two-piece standard deviation: `c1` for
/// `x <= break_x` and `c2` above it, over `x = 1..=n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StructureSpec {
    pub mean: MeanStructure,
    pub c1: f64,
    pub c2: f64,
    pub n: usize,
    pub break_x: usize,
    pub segment_len: usize,
}

impl StructureSpec {
    pub fn new(mean: MeanStructure, c1: f64, c2: f64) -> Self {
        StructureSpec {
            mean,
            c1,
            c2,
            n: 1000,
            break_x: 500,
            segment_len: 100,
        }
    }

    /// Standard deviations may be zero (noiseless halves) but not negative.
    pub fn validate(&self) -> Result<()> {
        if !(self.c1.is_finite() && self.c1 >= 0.0 && self.c2.is_finite() && self.c2 >= 0.0) {
            return Err(Error::Config(format!(
                "standard deviations must be finite and non-negative, got c1={} c2={}",
                self.c1, self.c2
            )));
        }
        if self.n < 2 {
            return Err(Error::Config("n must be at least 2".into()));
        }
        if self.break_x < 1 || self.break_x >= self.n {
            return Err(Error::Config(format!(
                "break_x must lie in 1..{}, got {}",
                self.n, self.break_x
            )));
        }
        if self.segment_len < 1 {
            return Err(Error::Config("segment_len must be at least 1".into()));
        }
        Ok(())
    }

    pub fn mu(&self, x: usize) -> f64 {
        match self.mean {
            MeanStructure::Flat => 0.0,
            MeanStructure::Step => x.div_ceil(self.segment_len) as f64,
        }
    }

    pub fn sigma(&self, x: usize) -> f64 {
        if x <= self.break_x {
            self.c1
        } else {
            self.c2
        }
    }

    /// Midpoint thresholds between adjacent segments of the step mean; empty
    /// for the flat mean.
    pub fn jump_boundaries(&self) -> Vec<f64> {
        match self.mean {
            MeanStructure::Flat => Vec::new(),
            MeanStructure::Step => (1..)
                .map(|k| k * self.segment_len)
                .take_while(|&b| b < self.n)
                .map(|b| b as f64 + 0.5)
                .collect(),
        }
    }

    pub fn is_homoscedastic(&self) -> bool {
        self.c1 == self.c2
    }
}

/// Standard-normal errors, one row of `n` values per replication.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineErrors {
    pub seed: u64,
    pub n: usize,
    pub errors: Vec<Vec<f64>>,
}

/// The baseline errors of a single replication.
pub fn baseline_replication(seed: u64, n: usize, replication: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn generate_baseline(seed: u64, n: usize, replications: usize) -> Result<BaselineErrors> {
    if n < 1 || replications < 1 {
        return Err(Error::invalid(
            "baseline needs at least one point and one replication",
        ));
    }
    Ok(BaselineErrors {
        seed,
        n,
        errors: (0..replications)
            .map(|j| baseline_replication(seed, n, j))
            .collect(),
    })
}

/// Dataset for `spec` built from one row of baseline errors.
pub fn realize_errors(errors: &[f64], spec: &StructureSpec) -> Result<Dataset> {
    spec.validate()?;
    if errors.len() != spec.n {
        return Err(Error::invalid(format!(
            "{} baseline errors for a structure with n = {}",
            errors.len(),
            spec.n
        )));
    }
    let x: Vec<f64> = (1..=spec.n).map(|i| i as f64).collect();
    let mu: Vec<f64> = (1..=spec.n).map(|i| spec.mu(i)).collect();
    let y: Vec<f64> = errors
        .iter()
        .enumerate()
        .map(|(i, e)| mu[i] + spec.sigma(i + 1) * e)
        .collect();
    Dataset::new(x, y)?.with_mu(mu)
}

pub fn realize(baseline: &BaselineErrors, spec: &StructureSpec, replication: usize) -> Result<Dataset> {
    let row = baseline.errors.get(replication).ok_or_else(|| {
        Error::invalid(format!(
            "replication {replication} out of range (have {})",
            baseline.errors.len()
        ))
    })?;
    realize_errors(row, spec)
}

/// Homoscedastic standard deviation whose variance, `(1 + c2^2) / 2`, equals
/// the average variance of the structure with `c1 = 1`.
pub fn compromise_sigma(c2: f64) -> f64 {
    ((1.0 + c2 * c2) / 2.0).sqrt()
}

/// Writes a realized dataset as CSV with columns `x,y,mu,sigma`.
pub fn export_csv<W: Write>(dataset: &Dataset, spec: &StructureSpec, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["x", "y", "mu", "sigma"])?;
    for (i, (&x, &y)) in dataset.x().iter().zip(dataset.y()).enumerate() {
        let mu = dataset.mu().map_or(spec.mu(x as usize), |m| m[i]);
        w.write_record([
            x.to_string(),
            y.to_string(),
            mu.to_string(),
            spec.sigma(x as usize).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv export>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_substreams() {
        let a = generate_baseline(42, 50, 8).unwrap();
        let b = generate_baseline(42, 50, 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(baseline_replication(42, 50, 5), a.errors[5]);
        assert_ne!(a.errors[0], a.errors[1]);
        assert_ne!(generate_baseline(43, 50, 1).unwrap().errors[0], a.errors[0]);
        assert!(generate_baseline(1, 0, 1).is_err());
        assert!(generate_baseline(1, 1, 0).is_err());
    }

    #[test]
    fn standard_normal_moments() {
        let b = generate_baseline(2024, 1000, 1000).unwrap();
        let all: Vec<f64> = b.errors.concat();
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4e-3, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn flat_unit_is_identity() {
        let b = generate_baseline(1, 1000, 1).unwrap();
        let d = realize(&b, &StructureSpec::new(MeanStructure::Flat, 1.0, 1.0), 0).unwrap();
        assert_eq!(d.y(), b.errors[0].as_slice());
    }

    #[test]
    fn step_means() {
        let s = StructureSpec::new(MeanStructure::Step, 1.0, 1.0);
        assert_eq!(s.mu(1), 1.0);
        assert_eq!(s.mu(100), 1.0);
        assert_eq!(s.mu(101), 2.0);
        assert_eq!(s.mu(1000), 10.0);
        let mut counts = [0usize; 11];
        for x in 1..=1000 {
            counts[s.mu(x) as usize] += 1;
        }
        assert_eq!(counts[0], 0);
        assert!(counts[1..].iter().all(|&c| c == 100));
        assert_eq!(s.jump_boundaries().len(), 9);
        assert_eq!(s.jump_boundaries()[0], 100.5);
    }

    #[test]
    fn heteroscedastic_scaling() {
        let b = generate_baseline(3, 1000, 1).unwrap();
        let d = realize(&b, &StructureSpec::new(MeanStructure::Flat, 1.0, 3.0), 0).unwrap();
        assert_eq!(d.y()[699], 3.0 * b.errors[0][699]);
        assert_eq!(d.y()[299], b.errors[0][299]);
        // FC(k) = k * FC(1)
        let k1 = realize(&b, &StructureSpec::new(MeanStructure::Flat, 1.0, 1.0), 0).unwrap();
        let k7 = realize(&b, &StructureSpec::new(MeanStructure::Flat, 7.0, 7.0), 0).unwrap();
        for (a, b) in k1.y().iter().zip(k7.y()) {
            assert_eq!(7.0 * a, *b);
        }
    }

    #[test]
    fn realize_out_of_range() {
        let b = generate_baseline(3, 1000, 2).unwrap();
        let s = StructureSpec::new(MeanStructure::Flat, 1.0, 1.0);
        assert!(matches!(realize(&b, &s, 2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn compromise_values() {
        assert_eq!(compromise_sigma(1.0), 1.0);
        assert!((compromise_sigma(10.0) - 7.1063352).abs() < 1e-6);
        for c2 in 1..=10 {
            let c2 = c2 as f64;
            let s = StructureSpec::new(MeanStructure::Flat, 1.0, c2);
            let avg = (1..=1000).map(|x| s.sigma(x).powi(2)).sum::<f64>() / 1000.0;
            assert!((avg - compromise_sigma(c2).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(StructureSpec::new(MeanStructure::Step, 0.0, 0.0).validate().is_ok());
        assert!(StructureSpec::new(MeanStructure::Step, -1.0, 1.0).validate().is_err());
        let mut s = StructureSpec::new(MeanStructure::Flat, 1.0, 1.0);
        s.break_x = 1000;
        assert!(s.validate().is_err());
    }

    #[test]
    fn export_has_header_and_rows() {
        let s = StructureSpec {
            n: 3,
            break_x: 1,
            ..StructureSpec::new(MeanStructure::Step, 1.0, 2.0)
        };
        let d = realize_errors(&[0.5, -1.0, 0.0], &s).unwrap();
        let mut buf = Vec::new();
        export_csv(&d, &s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "x,y,mu,sigma\n1,1.5,1,1\n2,-1,1,2\n3,1,1,2\n");
    }
}
