//! Replica statistics and pass/fail checks.
//!
//! Moments are accumulated in one pass with the pairwise update formulas of
//! Chan et al. and Pébay (central sums up to fourth order), so partial
//! summaries from parallel workers merge exactly as if computed serially.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean check width in standard errors.
pub const MEAN_Z: f64 = 3.0;
/// Relative band for variance checks.
pub const VARIANCE_BAND: f64 = 0.15;
/// Shape statistics must stay below this many null standard errors.
pub const SHAPE_Z: f64 = 4.0;
/// Minimum sample size for the shape diagnostics.
pub const SHAPE_MIN_SAMPLES: usize = 100;

/// Running central moments of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryStats {
    count: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl SummaryStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.count as f64;
        self.count += 1;
        let n = self.count as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let term1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += term1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += term1;
    }

    /// Combines two disjoint samples.
    pub fn merge(&self, other: &SummaryStats) -> SummaryStats {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let d4 = d2 * d2;
        let mean = self.mean + delta * nb / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 =
            self.m3 + other.m3 + d3 * na * nb * (na - nb) / (n * n) + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        SummaryStats {
            count: self.count + other.count,
            mean,
            m2,
            m3,
            m4,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn var(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        (self.m2 / (self.count as f64 - 1.0)).max(0.0)
    }

    /// `sqrt(var / R)`.
    pub fn stderr(&self) -> f64 {
        (self.var() / self.count as f64).sqrt()
    }

    /// Standard error of the sample variance from the fourth central moment.
    pub fn var_stderr(&self) -> f64 {
        let r = self.count as f64;
        let m4 = self.m4 / r;
        let s2 = self.var();
        ((m4 - (r - 3.0) / (r - 1.0) * s2 * s2) / r).max(0.0).sqrt()
    }

    /// Sample skewness `g1`.
    pub fn skewness(&self) -> f64 {
        let r = self.count as f64;
        r.sqrt() * self.m3 / self.m2.powf(1.5)
    }

    /// Sample excess kurtosis `g2`.
    pub fn excess_kurtosis(&self) -> f64 {
        let r = self.count as f64;
        r * self.m4 / (self.m2 * self.m2) - 3.0
    }

    pub fn skew_z(&self) -> f64 {
        self.skewness() / (6.0 / self.count as f64).sqrt()
    }

    pub fn kurt_z(&self) -> f64 {
        self.excess_kurtosis() / (24.0 / self.count as f64).sqrt()
    }
}

/// Summary of a sample of at least two values.
pub fn summarize(values: &[f64]) -> Result<SummaryStats> {
    if values.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: values.len(),
        });
    }
    let mut s = SummaryStats::new();
    for &v in values {
        s.push(v);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianityResult {
    pub skew_z: f64,
    pub kurt_z: f64,
    pub pass: bool,
}

/// Skewness and excess-kurtosis z-scores against their normal-null errors.
pub fn gaussianity_check(summary: &SummaryStats) -> Result<GaussianityResult> {
    let r = summary.count() as usize;
    if r < SHAPE_MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: SHAPE_MIN_SAMPLES,
            got: r,
        });
    }
    if !(summary.var() > 0.0) {
        return Err(Error::DegenerateSample);
    }
    let skew_z = summary.skew_z();
    let kurt_z = summary.kurt_z();
    Ok(GaussianityResult {
        skew_z,
        kurt_z,
        pass: skew_z.abs() < SHAPE_Z && kurt_z.abs() < SHAPE_Z,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `|mean - ref| <= max(atol, z se)`.
    Mean,
    /// `|mean - ref| >= z se`: the reference is excluded.
    Reject,
    /// `|var - target| <= band * target`.
    Variance,
    /// `|var - alt| >= z se(var)`: the alternative variance is excluded.
    VarianceReject,
    /// Skewness and kurtosis z-scores below the shape threshold.
    Gaussian,
    /// `mean <= bound + z se`.
    UpperBound,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Mean => "mean",
            CheckKind::Reject => "reject",
            CheckKind::Variance => "variance",
            CheckKind::VarianceReject => "variance_reject",
            CheckKind::Gaussian => "gaussian",
            CheckKind::UpperBound => "upper_bound",
        }
    }
}

/// Outcome of one check with every operand kept for the report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub kind: CheckKind,
    /// Sample statistic under test (mean or variance; max |z| for shape).
    pub estimate: f64,
    pub reference: f64,
    /// Standard error of `estimate`.
    pub stderr: f64,
    /// `|estimate - reference|`.
    pub margin: f64,
    /// Allowed (or, for rejections, required) margin.
    pub tolerance: f64,
    pub pass: bool,
}

/// Passes iff `|mean - reference| <= max(atol, z * stderr)`.
pub fn compare_to_reference(summary: &SummaryStats, reference: f64, atol: f64, z: f64) -> CheckRecord {
    let margin = (summary.mean() - reference).abs();
    let tolerance = atol.max(z * summary.stderr());
    CheckRecord {
        kind: CheckKind::Mean,
        estimate: summary.mean(),
        reference,
        stderr: summary.stderr(),
        margin,
        tolerance,
        pass: margin <= tolerance,
    }
}

/// Passes iff the mean lies at least `z` standard errors from `reference`.
pub fn reject_reference(summary: &SummaryStats, reference: f64, z: f64) -> CheckRecord {
    let margin = (summary.mean() - reference).abs();
    let tolerance = z * summary.stderr();
    CheckRecord {
        kind: CheckKind::Reject,
        estimate: summary.mean(),
        reference,
        stderr: summary.stderr(),
        margin,
        tolerance,
        pass: margin >= tolerance,
    }
}

/// Passes iff the sample variance is within `band * target` of `target`.
pub fn check_variance(summary: &SummaryStats, target: f64, band: f64) -> CheckRecord {
    let margin = (summary.var() - target).abs();
    let tolerance = band * target.abs();
    CheckRecord {
        kind: CheckKind::Variance,
        estimate: summary.var(),
        reference: target,
        stderr: summary.var_stderr(),
        margin,
        tolerance,
        pass: margin <= tolerance,
    }
}

/// Passes iff the sample variance lies at least `z` of its standard errors from `alternative`.
pub fn reject_variance(summary: &SummaryStats, alternative: f64, z: f64) -> CheckRecord {
    let margin = (summary.var() - alternative).abs();
    let tolerance = z * summary.var_stderr();
    CheckRecord {
        kind: CheckKind::VarianceReject,
        estimate: summary.var(),
        reference: alternative,
        stderr: summary.var_stderr(),
        margin,
        tolerance,
        pass: margin >= tolerance,
    }
}

/// Passes iff `mean <= bound + z * stderr`.
pub fn check_upper_bound(summary: &SummaryStats, bound: f64, z: f64) -> CheckRecord {
    let tolerance = z * summary.stderr();
    CheckRecord {
        kind: CheckKind::UpperBound,
        estimate: summary.mean(),
        reference: bound,
        stderr: summary.stderr(),
        margin: summary.mean() - bound,
        tolerance,
        pass: summary.mean() <= bound + tolerance,
    }
}

/// Gaussianity as a check record (`estimate` is the larger |z|).
pub fn gaussian_record(summary: &SummaryStats) -> Result<CheckRecord> {
    let g = gaussianity_check(summary)?;
    let worst = g.skew_z.abs().max(g.kurt_z.abs());
    Ok(CheckRecord {
        kind: CheckKind::Gaussian,
        estimate: worst,
        reference: 0.0,
        stderr: 1.0,
        margin: worst,
        tolerance: SHAPE_Z,
        pass: g.pass,
    })
}
