//! Closed-form hydrodynamic references.
//!
//! `rho` solves the heat equation on `T^d` from a finite Fourier series, so
//! `rho`, `rho^2`, their gradients and their pairings with trigonometric
//! test functions are finite sums of decaying modes. Every time integral
//! below is taken mode by mode in closed form.

use crate::error::{Error, Result};
use crate::initcond::DensityProfile;
use crate::regimes::ScalingRegime;
use crate::series::Series;
use crate::testfn::{TableShape, TestFunction};
use crate::torus::Sign;

/// `rho(x, t)` together with the regime's limiting occupied fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitField {
    rho: Series,
    alpha: f64,
    l1_norm: f64,
}

impl LimitField {
    pub fn new(rho0: &DensityProfile, alpha: f64) -> Self {
        Self {
            rho: rho0.series().heat_evolved(),
            alpha,
            l1_norm: rho0.l1_norm(),
        }
    }

    pub fn for_regime(rho0: &DensityProfile, regime: &ScalingRegime) -> Self {
        Self::new(rho0, regime.limit_alpha())
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `rho` as a time-dependent series.
    pub fn rho(&self) -> &Series {
        &self.rho
    }

    pub fn eval_rho(&self, x: &[f64], t: f64) -> f64 {
        self.rho.eval_at(x, t)
    }

    /// `rho - (alpha / ||rho_0||_1) rho^2`, the unidirectional flux rate.
    pub fn uniflux_rate(&self) -> Series {
        self.rho.add(&self.rho.square().scale(-self.alpha / self.l1_norm))
    }

    /// `rho^2`, the unidirectional collision rate.
    pub fn unicol_rate(&self) -> Series {
        self.rho.square()
    }

    /// `-d_l rho`, the net flux rate along `axis`.
    pub fn netflux_rate(&self, axis: usize) -> Series {
        self.rho.derivative(axis).scale(-1.0)
    }

    /// `int_0^T (rho - (alpha/||rho_0||_1) rho^2)(x, t) dt`.
    pub fn limit_uniflux(&self, x: &[f64], horizon: f64) -> f64 {
        self.uniflux_rate().time_integrated(horizon).eval(x)
    }

    /// `int_0^T rho^2(x, t) dt`.
    pub fn limit_unicol(&self, x: &[f64], horizon: f64) -> f64 {
        self.unicol_rate().time_integrated(horizon).eval(x)
    }

    /// `-int_0^T d_l rho(x, t) dt`.
    pub fn limit_netflux(&self, x: &[f64], horizon: f64, axis: usize) -> f64 {
        self.netflux_rate(axis).time_integrated(horizon).eval(x)
    }

    /// `<phi, rho(t)>`.
    pub fn pair_rho(&self, phi: &TestFunction, t: f64) -> Result<f64> {
        phi.require_scalar()?;
        let f = phi.component_series(self.dim(), None, None)?;
        Ok(f.mul(&self.rho).space_integral_at(t))
    }

    /// `sum_{l,±} int_0^T int phi_{l,±} (rho - (alpha/||rho_0||) rho^2)`.
    pub fn pair_uniflux(&self, phi: &TestFunction, horizon: f64) -> Result<f64> {
        self.pair_components(phi, TableShape::Signed, |_| self.uniflux_rate(), horizon)
    }

    /// `sum_{l,±} int_0^T int phi_{l,±} rho^2`.
    pub fn pair_unicol(&self, phi: &TestFunction, horizon: f64) -> Result<f64> {
        self.pair_components(phi, TableShape::Signed, |_| self.unicol_rate(), horizon)
    }

    /// `sum_l int_0^T int phi_l (-d_l rho)`.
    pub fn pair_netflux(&self, phi: &TestFunction, horizon: f64) -> Result<f64> {
        self.pair_components(phi, TableShape::Axis, |axis| self.netflux_rate(axis), horizon)
    }

    /// `sum_l int phi_l rho^2(t)`, the limit of `<phi, Lambda^n(t)>`.
    pub fn pair_nn(&self, phi: &TestFunction, t: f64) -> Result<f64> {
        let rho2 = self.rho.square();
        let mut acc = 0.0;
        for f in components(phi, TableShape::Axis, self.dim())? {
            acc += f.mul(&rho2).space_integral_at(t);
        }
        Ok(acc)
    }

    /// Quadratic-variation target of `<phi, C̄^n(T)>`: `2 sum_l int_0^T int phi_l^2 rho^2`.
    pub fn netcol_variance_target(&self, phi: &TestFunction, horizon: f64) -> Result<f64> {
        let rho2 = self.rho.square();
        let mut acc = 0.0;
        for f in components(phi, TableShape::Axis, self.dim())? {
            acc += f.square().mul(&rho2).space_time_integral(horizon);
        }
        Ok(2.0 * acc)
    }

    fn pair_components(
        &self,
        phi: &TestFunction,
        shape: TableShape,
        rate: impl Fn(usize) -> Series,
        horizon: f64,
    ) -> Result<f64> {
        let mut acc = 0.0;
        for (axis, f) in indexed_components(phi, shape, self.dim())? {
            acc += f.mul(&rate(axis)).space_time_integral(horizon);
        }
        Ok(acc)
    }
}

/// Component series of `phi` for a field of the given shape, with their axes.
fn indexed_components(phi: &TestFunction, shape: TableShape, dim: usize) -> Result<Vec<(usize, Series)>> {
    phi.require_shape(shape)?;
    let signs: &[Option<Sign>] = match shape {
        TableShape::Signed => &[Some(Sign::Plus), Some(Sign::Minus)],
        TableShape::Axis => &[None],
    };
    let mut out = Vec::new();
    for axis in 0..dim {
        for &sign in signs {
            let s = match phi {
                TestFunction::Const(_) => phi.component_series(dim, None, None)?,
                _ => phi.component_series(dim, Some(axis), sign)?,
            };
            if !s.modes().is_empty() {
                out.push((axis, s));
            }
        }
    }
    if out.is_empty() && matches!(phi, TestFunction::Trig(_)) {
        return Err(Error::usage("scalar test function for a component pairing"));
    }
    Ok(out)
}

fn components(phi: &TestFunction, shape: TableShape, dim: usize) -> Result<Vec<Series>> {
    Ok(indexed_components(phi, shape, dim)?
        .into_iter()
        .map(|(_, s)| s)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Phase;
    use std::f64::consts::PI;

    fn fixture() -> DensityProfile {
        DensityProfile::new(Series::constant(1, 0.5).add(&Series::mode(vec![1], Phase::Cos, 0.25))).unwrap()
    }

    /// Composite Simpson on `[a, b]` with `m` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
        let h = (b - a) / m as f64;
        let mut s = f(a) + f(b);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    /// `rho` by direct summation of the decaying single mode, independent of `Series`.
    fn rho_direct(x: f64, t: f64) -> f64 {
        0.5 + 0.25 * (-4.0 * PI * PI * t).exp() * (2.0 * PI * x).cos()
    }

    #[test]
    fn rho_examples() {
        let f = LimitField::new(&fixture(), 0.0);
        for t in [0.0, 0.01, 0.3] {
            assert!((f.eval_rho(&[0.0], t) - (0.5 + 0.25 * (-4.0 * PI * PI * t).exp())).abs() < 1e-15);
        }
        let flat = LimitField::new(&DensityProfile::uniform(1, 0.7).unwrap(), 0.0);
        assert_eq!(flat.eval_rho(&[0.3], 5.0), 0.7);
        assert_eq!(f.eval_rho(&[0.3], 0.0), fixture().eval(&[0.3]));
    }

    #[test]
    fn constant_density_limits() {
        let rho0 = DensityProfile::uniform(1, 0.5).unwrap();
        let classic = LimitField::new(&rho0, 0.5);
        assert!((classic.limit_uniflux(&[0.2], 1.0) - 0.25).abs() < 1e-15);
        let sparse = LimitField::new(&rho0, 0.0);
        assert!((sparse.limit_uniflux(&[0.2], 1.0) - 0.5).abs() < 1e-15);
        assert!((sparse.limit_unicol(&[0.2], 1.0) - 0.25).abs() < 1e-15);
        assert_eq!(sparse.limit_unicol(&[0.2], 0.0), 0.0);
        assert_eq!(sparse.limit_netflux(&[0.2], 1.0, 0), 0.0);
        let one = TestFunction::constant(1.0);
        assert!((sparse.netcol_variance_target(&one, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(sparse.netcol_variance_target(&one, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn pointwise_limits_match_simpson() {
        let f = LimitField::new(&fixture(), 0.4);
        let horizon = 0.1;
        let x = 0.0;
        let quad = simpson(
            |t| rho_direct(x, t) - 0.4 / 0.5 * rho_direct(x, t).powi(2),
            0.0,
            horizon,
            1024,
        );
        assert!((f.limit_uniflux(&[x], horizon) - quad).abs() < 1e-8);
        let x = 0.25;
        let quad = simpson(|t| rho_direct(x, t).powi(2), 0.0, horizon, 1024);
        assert!((f.limit_unicol(&[x], horizon) - quad).abs() < 1e-8);
    }

    #[test]
    fn netflux_examples() {
        let f = LimitField::new(&fixture(), 0.0);
        for horizon in [0.01, 0.1, 1.0] {
            let expect = -(-4.0 * PI * PI * horizon).exp_m1() / (8.0 * PI);
            assert!((f.limit_netflux(&[0.25], horizon, 0) - expect).abs() < 1e-15);
            assert_eq!(f.limit_netflux(&[0.0], horizon, 0), 0.0);
        }
    }

    #[test]
    fn netcol_variance_target_fixture() {
        let f = LimitField::new(&fixture(), 0.4);
        let one = TestFunction::constant(1.0);
        let got = f.netcol_variance_target(&one, 0.1).unwrap();
        let quad = 2.0
            * simpson(
                |t| simpson(|x| rho_direct(x, t).powi(2), 0.0, 1.0, 1024),
                0.0,
                0.1,
                1024,
            );
        assert!((got - quad).abs() < 1e-8, "{got} vs {quad}");
        // 2 (0.25 T + 0.03125 (1 - e^{-8 pi^2 T}) / (8 pi^2 / 1) ...) with the decay kept
        let r = 8.0 * PI * PI;
        let exact = 2.0 * (0.25 * 0.1 + 0.03125 * (-(-r * 0.1).exp_m1()) / r);
        assert!((got - exact).abs() < 1e-15);
        assert!((got - 0.0507913).abs() < 1e-6);
    }

    #[test]
    fn paired_limits_match_simpson() {
        let f = LimitField::new(&fixture(), 0.4);
        let horizon = 0.1;
        let sin = Series::mode(vec![1], Phase::Sin, 1.0);
        let phi = TestFunction::table(vec![(crate::testfn::Component { axis: 0, sign: None }, sin)]).unwrap();
        let got = f.pair_netflux(&phi, horizon).unwrap();
        let drho = |x: f64, t: f64| -0.25 * 2.0 * PI * (-4.0 * PI * PI * t).exp() * (2.0 * PI * x).sin();
        let quad = simpson(
            |t| simpson(|x| (2.0 * PI * x).sin() * -drho(x, t), 0.0, 1.0, 1024),
            0.0,
            horizon,
            1024,
        );
        assert!((got - quad).abs() < 1e-8);
        assert!((got - 0.0195105).abs() < 1e-6);

        let plus = TestFunction::on_component(1, 1.0, 0, Some(Sign::Plus)).unwrap();
        let got = f.pair_uniflux(&plus, horizon).unwrap();
        let quad = simpson(
            |t| simpson(|x| rho_direct(x, t) - 0.8 * rho_direct(x, t).powi(2), 0.0, 1.0, 1024),
            0.0,
            horizon,
            1024,
        );
        assert!((got - quad).abs() < 1e-8);
        assert!((got - 0.0296835).abs() < 1e-6);
        // a constant feeds both signs
        let both = f.pair_uniflux(&TestFunction::constant(1.0), horizon).unwrap();
        assert!((both - 2.0 * got).abs() < 1e-15);

        let col = f.pair_unicol(&plus, horizon).unwrap();
        assert!((col - 0.0253956).abs() < 1e-6);

        let cos = TestFunction::Trig(Series::mode(vec![1], Phase::Cos, 1.0));
        assert!((f.pair_rho(&cos, 0.05).unwrap() - 0.125 * (-4.0 * PI * PI * 0.05).exp()).abs() < 1e-15);
        let axis_one = TestFunction::on_component(1, 1.0, 0, None).unwrap();
        let expect = 0.25 + 0.03125 * (-8.0 * PI * PI * 0.05).exp();
        assert!((f.pair_nn(&axis_one, 0.05).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn shape_errors() {
        let f = LimitField::new(&fixture(), 0.4);
        let scalar = TestFunction::Trig(Series::mode(vec![1], Phase::Sin, 1.0));
        assert!(f.pair_uniflux(&scalar, 0.1).is_err());
        assert!(f
            .pair_netflux(&TestFunction::on_component(1, 1.0, 0, Some(Sign::Plus)).unwrap(), 0.1)
            .is_err());
        assert!(f
            .pair_rho(&TestFunction::on_component(1, 1.0, 0, None).unwrap(), 0.1)
            .is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn profile(a1: f64, b2: f64) -> DensityProfile {
            let s = Series::constant(1, 1.0)
                .add(&Series::mode(vec![1], Phase::Cos, a1))
                .add(&Series::mode(vec![2], Phase::Sin, b2));
            DensityProfile::new(s).unwrap()
        }

        proptest! {
            #[test]
            fn mass_is_conserved(a1 in -0.5f64..0.5, b2 in -0.5f64..0.5, t in 0.0f64..2.0) {
                let f = LimitField::new(&profile(a1, b2), 0.0);
                prop_assert!((f.rho().space_integral_at(t) - 1.0).abs() < 1e-15);
            }

            #[test]
            fn maximum_principle(a1 in -0.5f64..0.5, b2 in -0.5f64..0.5, t in 0.0f64..0.5, x in 0.0f64..1.0) {
                let p = profile(a1, b2);
                let f = LimitField::new(&p, 0.0);
                let grid: Vec<f64> = (0..2048).map(|i| p.eval(&[i as f64 / 2048.0])).collect();
                let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let v = f.eval_rho(&[x], t);
                prop_assert!(v >= lo - 1e-4 && v <= hi + 1e-4);
            }

            #[test]
            fn unicol_nondecreasing_in_horizon(a1 in -0.5f64..0.5, t1 in 0.0f64..0.5, dt in 0.0f64..0.5, x in 0.0f64..1.0) {
                let f = LimitField::new(&profile(a1, 0.1), 0.5);
                prop_assert!(f.limit_unicol(&[x], t1 + dt) >= f.limit_unicol(&[x], t1) - 1e-15);
            }

            #[test]
            fn uniflux_nonnegative_under_density_bound(a1 in -0.5f64..0.5, alpha in 0.01f64..0.5, horizon in 0.0f64..1.0, x in 0.0f64..1.0) {
                // rho <= 1.5 <= ||rho_0||_1 / alpha whenever alpha <= 2/3
                let f = LimitField::new(&profile(a1, 0.0), alpha);
                prop_assert!(f.limit_uniflux(&[x], horizon) >= -1e-15);
            }

            #[test]
            fn sparse_uniflux_is_independent_walker_flux(a1 in -0.5f64..0.5, horizon in 0.0f64..1.0, x in 0.0f64..1.0) {
                let f = LimitField::new(&profile(a1, 0.2), 0.0);
                let irw = f.rho().time_integrated(horizon).eval(&[x]);
                prop_assert!((f.limit_uniflux(&[x], horizon) - irw).abs() < 1e-15);
            }
        }
    }
}
