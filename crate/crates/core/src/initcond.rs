//! Slowly varying Bernoulli product initial law.
//!
//! Site `x` is occupied independently with probability
//! `n * int_{B_eps(x)} rho_0`, where `B_eps(x)` is the axis-aligned box of
//! side `eps` centred at `x`. The cell integral is taken in closed form for
//! each Fourier mode, so the expected particle number is exactly
//! `n * ||rho_0||_{L^1}`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::Configuration;
use crate::error::{Error, Result};
use crate::series::Series;
use crate::testfn::TermDescriptor;
use crate::torus::TorusGeometry;

/// Rounding slack accepted on the equality case `parameter == 1`.
const FEASIBILITY_SLACK: f64 = 1e-12;

/// JSON form: `{"a0": 0.5, "terms": [{"axis":0,"freq":1,"phase":"cos","amp":0.25}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityDescriptor {
    pub a0: f64,
    #[serde(default)]
    pub terms: Vec<TermDescriptor>,
}

/// Nonnegative initial density `rho_0 = a0 + sum_j a_j trig(2 pi k_j . x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    series: Series,
    l1_norm: f64,
    sup_bound: f64,
}

impl DensityProfile {
    /// Validates `a0 > 0` and `a0 >= sum |a_j|` (which certifies `rho_0 >= 0`).
    pub fn new(series: Series) -> Result<Self> {
        let a0 = series.mean();
        let osc = series.oscillation_bound();
        if series.modes().iter().any(|m| m.decay != 0) {
            return Err(Error::InvalidProfile("initial density must be static".into()));
        }
        if !(a0 > 0.0) {
            return Err(Error::InvalidProfile(format!("a0 = {a0} must be positive")));
        }
        if a0 < osc {
            return Err(Error::InvalidProfile(format!(
                "a0 = {a0} < sum |a_j| = {osc}; nonnegativity not certified"
            )));
        }
        Ok(Self {
            sup_bound: series.sup_bound(),
            l1_norm: a0,
            series,
        })
    }

    pub fn uniform(dim: usize, c: f64) -> Result<Self> {
        Self::new(Series::constant(dim, c))
    }

    pub fn from_descriptor(desc: &DensityDescriptor, dim: usize) -> Result<Self> {
        let mut s = Series::constant(dim, desc.a0);
        for t in &desc.terms {
            s = s.add(&t.to_series(dim).map_err(|e| Error::InvalidProfile(e.to_string()))?);
        }
        Self::new(s)
    }

    pub fn series(&self) -> &Series {
        &self.series
    }

    pub fn dim(&self) -> usize {
        self.series.dim()
    }

    /// `||rho_0||_{L^1} = a0`.
    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    /// `a0 + sum |a_j| >= ||rho_0||_C`.
    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.series.eval(x)
    }

    /// Unchecked `n * int_{B_eps(x)} rho_0`.
    pub fn cell_mass(&self, n: usize, geom: &TorusGeometry, site: usize) -> f64 {
        n as f64 * self.series.box_integral(&geom.point(site), geom.spacing())
    }

    /// Occupation probability of `site`; errors when it exceeds one.
    pub fn bernoulli_parameter(&self, n: usize, geom: &TorusGeometry, site: usize) -> Result<f64> {
        let value = self.cell_mass(n, geom, site);
        if value > 1.0 + FEASIBILITY_SLACK {
            return Err(Error::ParameterExceedsOne { site, value });
        }
        Ok(value.clamp(0.0, 1.0))
    }

    /// Occupation probabilities for every site in site order.
    pub fn parameter_field(&self, n: usize, geom: &TorusGeometry) -> Result<Vec<f64>> {
        self.check_dim(geom)?;
        (0..geom.site_count())
            .map(|x| self.bernoulli_parameter(n, geom, x))
            .collect()
    }

    fn check_dim(&self, geom: &TorusGeometry) -> Result<()> {
        if self.dim() != geom.dim() {
            return Err(Error::usage(format!(
                "profile has dimension {}, torus has {}",
                self.dim(),
                geom.dim()
            )));
        }
        Ok(())
    }
}

/// Draws `eta(0)` site by site in index order.
pub fn sample_initial<R: Rng + ?Sized>(
    profile: &DensityProfile,
    n: usize,
    geom: &TorusGeometry,
    rng: &mut R,
) -> Result<Configuration> {
    let params = profile.parameter_field(n, geom)?;
    Ok(sample_from_parameters(&params, geom, rng))
}

/// Independent Bernoulli draws from a precomputed parameter field.
pub fn sample_from_parameters<R: Rng + ?Sized>(params: &[f64], geom: &TorusGeometry, rng: &mut R) -> Configuration {
    let mut config = Configuration::empty(geom);
    for (site, &p) in params.iter().enumerate() {
        // random::<f64>() lies in [0, 1), so p = 1 always and p = 0 never occupies
        if rng.random::<f64>() < p {
            config.insert(site);
        }
    }
    config
}
