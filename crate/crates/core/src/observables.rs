//! Rescaled macroscopic fields paired against test functions.
//!
//! | kind | prefactor | support |
//! |------|-----------|---------|
//! | empirical `rho^n` | `1/n` | sites |
//! | unidirectional flux `W^n_{l,±}` | `eps^2/n` | edge midpoints |
//! | unidirectional collisions `C^n_{l,±}` | `eps^2/(eps^d n^2)` | edge midpoints |
//! | net flux `W̄^n_l` | `eps/n` | positive edge midpoints |
//! | net collisions `C̄^n_l` | `eps/(sqrt(eps^d) n)` | positive edge midpoints |
//! | nearest-neighbour `Lambda^n_l` | `1/(eps^d n^2)` | positive edge midpoints |
//!
//! `Lambda^n` is indexed by `l` only. When it is paired inside an
//! `(l, ±)`-indexed expression (the drifts of the unidirectional fields),
//! each occupied pair `x ~> y` contributes to both `phi_{l,+}` and
//! `phi_{l,-}`, each evaluated at the pair's midpoint. This is exactly what
//! the generator produces: the pair can be probed from either end.

use serde::{Deserialize, Serialize};

use crate::engine::{Configuration, CounterField};
use crate::error::{Error, Result};
use crate::testfn::{TableShape, TestFunction};
use crate::torus::{Sign, TorusGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservableKind {
    Empirical,
    UniFlux,
    UniCollision,
    NetFlux,
    NetCollision,
    NearestNeighbour,
}

impl ObservableKind {
    pub const ALL: [ObservableKind; 6] = [
        ObservableKind::Empirical,
        ObservableKind::UniFlux,
        ObservableKind::UniCollision,
        ObservableKind::NetFlux,
        ObservableKind::NetCollision,
        ObservableKind::NearestNeighbour,
    ];

    /// Scale factor turning raw counts into the macroscopic field.
    pub fn prefactor(self, geom: &TorusGeometry, n: usize) -> f64 {
        let eps = geom.spacing();
        let vol = geom.cell_volume();
        let n = n as f64;
        match self {
            ObservableKind::Empirical => 1.0 / n,
            ObservableKind::UniFlux => eps * eps / n,
            ObservableKind::UniCollision => eps * eps / (vol * n * n),
            ObservableKind::NetFlux => eps / n,
            ObservableKind::NetCollision => eps / (vol.sqrt() * n),
            ObservableKind::NearestNeighbour => 1.0 / (vol * n * n),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ObservableKind::Empirical => "empirical",
            ObservableKind::UniFlux => "uniflux",
            ObservableKind::UniCollision => "unicollision",
            ObservableKind::NetFlux => "netflux",
            ObservableKind::NetCollision => "netcollision",
            ObservableKind::NearestNeighbour => "nearestneighbour",
        }
    }

    /// Test-function shape this field pairs with (`None` for scalar).
    pub fn shape(self) -> Option<TableShape> {
        match self {
            ObservableKind::Empirical => None,
            ObservableKind::UniFlux | ObservableKind::UniCollision => Some(TableShape::Signed),
            ObservableKind::NetFlux | ObservableKind::NetCollision | ObservableKind::NearestNeighbour => {
                Some(TableShape::Axis)
            }
        }
    }

    /// Whether the field is a cumulative counter with a Dynkin martingale.
    pub fn is_cumulative(self) -> bool {
        !matches!(self, ObservableKind::NearestNeighbour)
    }

    pub fn check_test_function(self, phi: &TestFunction) -> Result<()> {
        match self.shape() {
            None => phi.require_scalar(),
            Some(shape) => phi.require_shape(shape),
        }
    }
}

impl std::fmt::Display for ObservableKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `<phi, rho^n> = (1/n) sum_x eta(x) phi(x)`.
pub fn pair_empirical(phi: &TestFunction, state: &Configuration, n: usize, geom: &TorusGeometry) -> Result<f64> {
    phi.require_scalar()?;
    let mut acc = 0.0;
    for &x in state.particles() {
        acc += phi.eval(&geom.point(x), None, None)?;
    }
    Ok(acc / n as f64)
}

/// Pairs a counter-based field against `phi`.
pub fn pair_counters(
    kind: ObservableKind,
    phi: &TestFunction,
    counters: &CounterField,
    n: usize,
    geom: &TorusGeometry,
) -> Result<f64> {
    kind.check_test_function(phi)?;
    let counts = match kind {
        ObservableKind::UniFlux | ObservableKind::NetFlux => &counters.jumps,
        ObservableKind::UniCollision | ObservableKind::NetCollision => &counters.collisions,
        _ => {
            return Err(Error::usage(format!("{kind} is not a counter field")));
        }
    };
    let mut acc = 0.0;
    match kind {
        ObservableKind::UniFlux | ObservableKind::UniCollision => {
            for (idx, &c) in counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let e = geom.edge(idx);
                acc += c as f64 * phi.eval(&geom.midpoint(e), Some(e.axis), Some(e.sign))?;
            }
        }
        _ => {
            for x in 0..geom.site_count() {
                for axis in 0..geom.dim() {
                    let fwd = counts[geom.edge_index(x, axis, Sign::Plus)];
                    let y = geom.shift(x, axis, Sign::Plus);
                    let back = counts[geom.edge_index(y, axis, Sign::Minus)];
                    if fwd == back {
                        continue;
                    }
                    let net = fwd as i128 - back as i128;
                    let e = geom.edge(geom.edge_index(x, axis, Sign::Plus));
                    acc += net as f64 * phi.eval(&geom.midpoint(e), Some(axis), None)?;
                }
            }
        }
    }
    Ok(kind.prefactor(geom, n) * acc)
}

/// Visits every occupied positive pair `x ~>_l y` with its midpoint.
fn for_each_occupied_pair(
    state: &Configuration,
    geom: &TorusGeometry,
    mut f: impl FnMut(usize, usize, &[f64]) -> Result<()>,
) -> Result<()> {
    for &x in state.particles() {
        for axis in 0..geom.dim() {
            let y = geom.shift(x, axis, Sign::Plus);
            if state.is_occupied(y) {
                let mid = geom.midpoint(geom.edge(geom.edge_index(x, axis, Sign::Plus)));
                f(x, axis, &mid)?;
            }
        }
    }
    Ok(())
}

/// `sum_{x ~>_l y} eta(x) eta(y) phi_l((x+y)/2)^power`, unscaled.
fn pair_sum_power(phi: &TestFunction, state: &Configuration, geom: &TorusGeometry, power: i32) -> Result<f64> {
    phi.require_shape(TableShape::Axis)?;
    let mut acc = 0.0;
    for_each_occupied_pair(state, geom, |_, axis, mid| {
        acc += phi.eval(mid, Some(axis), None)?.powi(power);
        Ok(())
    })?;
    Ok(acc)
}

/// `<phi, Lambda^n> = (1/(eps^d n^2)) sum_{x ~>_l y} eta(x) eta(y) phi_l((x+y)/2)`.
pub fn pair_nn_measure(phi: &TestFunction, state: &Configuration, n: usize, geom: &TorusGeometry) -> Result<f64> {
    Ok(ObservableKind::NearestNeighbour.prefactor(geom, n) * pair_sum_power(phi, state, geom, 1)?)
}

/// Sum over particles and directions of `blocked?(target) * phi_{l,±}(mid)^power`.
fn directed_probe_sum(
    phi: &TestFunction,
    state: &Configuration,
    geom: &TorusGeometry,
    want_blocked: bool,
    power: i32,
) -> Result<f64> {
    phi.require_shape(TableShape::Signed)?;
    let mut acc = 0.0;
    for &x in state.particles() {
        for axis in 0..geom.dim() {
            for sign in Sign::BOTH {
                let y = geom.shift(x, axis, sign);
                if state.is_occupied(y) == want_blocked {
                    let mid = geom.midpoint(geom.edge(geom.edge_index(x, axis, sign)));
                    acc += phi.eval(&mid, Some(axis), Some(sign))?.powi(power);
                }
            }
        }
    }
    Ok(acc)
}

/// Generator drift of `<phi, W^n>`: `(1/n) sum eta(x)(1 - eta(x±eps e_l)) phi_{l,±}(x ± eps/2 e_l)`.
pub fn drift_uniflux(phi: &TestFunction, state: &Configuration, n: usize, geom: &TorusGeometry) -> Result<f64> {
    Ok(directed_probe_sum(phi, state, geom, false, 1)? / n as f64)
}

/// Carré du champ of `<phi, W^n>`: `(eps^2/n^2) sum eta(x)(1 - eta(y)) phi^2`.
pub fn gamma2_uniflux(phi: &TestFunction, state: &Configuration, n: usize, geom: &TorusGeometry) -> Result<f64> {
    let eps = geom.spacing();
    Ok(eps * eps / (n as f64 * n as f64) * directed_probe_sum(phi, state, geom, false, 2)?)
}

/// Generator drift of `<phi, C^n>`, i.e. `<phi, Lambda^n>` with each pair feeding both signs.
pub fn drift_unicol(phi: &TestFunction, state: &Configuration, n: usize, geom: &TorusGeometry) -> Result<f64> {
    Ok(ObservableKind::NearestNeighbour.prefactor(geom, n) * directed_probe_sum(phi, state, geom, true, 1)?)
}

/// Carré du champ of `<phi, C^n>`: `eps^2/(eps^d n^2) <phi^2, Lambda^n>`.
pub fn gamma2_unicol(phi: &TestFunction, state: &Configuration, n: usize, geom: &TorusGeometry) -> Result<f64> {
    let eps = geom.spacing();
    let vol = geom.cell_volume();
    let nn = ObservableKind::NearestNeighbour.prefactor(geom, n);
    Ok(eps * eps / (vol * (n * n) as f64) * nn * directed_probe_sum(phi, state, geom, true, 2)?)
}

/// `k`-th jump-moment rate `Gamma_k` of `<phi, C̄^n>` for `k` in 2..=4.
///
/// `Gamma_2 = 2 <phi^2, Lambda>`, `Gamma_3 = 0` (the two orientations of a
/// pair cancel), `Gamma_4 = (2 eps^2 / (eps^d n^2)) <phi^4, Lambda>`.
pub fn gamma_k_netcol(
    phi: &TestFunction,
    state: &Configuration,
    n: usize,
    geom: &TorusGeometry,
    k: u32,
) -> Result<f64> {
    let nn = ObservableKind::NearestNeighbour.prefactor(geom, n);
    let eps = geom.spacing();
    let vol = geom.cell_volume();
    match k {
        2 => Ok(2.0 * nn * pair_sum_power(phi, state, geom, 2)?),
        3 => {
            phi.require_shape(TableShape::Axis)?;
            Ok(0.0)
        }
        4 => Ok(2.0 * eps * eps / (vol * (n * n) as f64) * nn * pair_sum_power(phi, state, geom, 4)?),
        _ => Err(Error::usage(format!("Gamma_k is defined here for k in 2..=4, got {k}"))),
    }
}

/// Pairs any field against `phi`.
pub fn pair(
    kind: ObservableKind,
    phi: &TestFunction,
    state: &Configuration,
    counters: &CounterField,
    n: usize,
    geom: &TorusGeometry,
) -> Result<f64> {
    match kind {
        ObservableKind::Empirical => pair_empirical(phi, state, n, geom),
        ObservableKind::NearestNeighbour => pair_nn_measure(phi, state, n, geom),
        _ => pair_counters(kind, phi, counters, n, geom),
    }
}
