//! Linear functionals of `(eta, W~, C~)` and their generator integrals.
//!
//! Every cumulative field paired with a test function is linear in the
//! counters and the occupation:
//! `F = sum_e (a^W_e W~_e + a^C_e C~_e) + sum_x a^eta_x eta(x)`.
//! An attempt on edge `e = (x -> y)` changes `F` by
//! `J_e = a^W_e + a^eta_y - a^eta_x` when it jumps and by `K_e = a^C_e`
//! when it collides, so
//!
//! ```text
//! QF      = L^2 sum_e eta(x) [(1 - eta(y)) J_e   + eta(y) K_e  ]
//! Gamma_2 = L^2 sum_e eta(x) [(1 - eta(y)) J_e^2 + eta(y) K_e^2]
//! ```
//!
//! Both are constant between events and only the `O(d)` edges touching a
//! moved particle change, so the time integrals are exact and cheap.

use crate::engine::{Configuration, CounterField};
use crate::error::{Error, Result};
use crate::observables::ObservableKind;
use crate::testfn::TestFunction;
use crate::torus::{Sign, TorusGeometry};

/// Coefficients of one linear functional.
#[derive(Debug, Clone, PartialEq)]
pub struct DynkinFunctional {
    jump_coef: Vec<f64>,
    collision_coef: Vec<f64>,
    site_coef: Vec<f64>,
    jump_inc: Vec<f64>,
    rate: f64,
}

impl DynkinFunctional {
    /// The functional `<phi, X^n>` for a cumulative field `X`.
    pub fn new(kind: ObservableKind, phi: &TestFunction, n: usize, geom: &TorusGeometry) -> Result<Self> {
        if !kind.is_cumulative() {
            return Err(Error::usage(format!("{kind} has no Dynkin martingale here")));
        }
        kind.check_test_function(phi)?;
        let m = geom.edge_count();
        let mut jump_coef = vec![0.0; m];
        let mut collision_coef = vec![0.0; m];
        let mut site_coef = vec![0.0; geom.site_count()];
        let pref = kind.prefactor(geom, n);
        match kind {
            ObservableKind::Empirical => {
                for (x, a) in site_coef.iter_mut().enumerate() {
                    *a = pref * phi.eval(&geom.point(x), None, None)?;
                }
            }
            _ => {
                let coef = match kind {
                    ObservableKind::UniFlux | ObservableKind::NetFlux => &mut jump_coef,
                    _ => &mut collision_coef,
                };
                let signed = matches!(kind, ObservableKind::UniFlux | ObservableKind::UniCollision);
                for (idx, a) in coef.iter_mut().enumerate() {
                    let e = geom.edge(idx);
                    let mid = geom.midpoint(e);
                    *a = if signed {
                        pref * phi.eval(&mid, Some(e.axis), Some(e.sign))?
                    } else {
                        // (x, l, -) is the backward half of the pair centred at its midpoint
                        let orient = if e.sign == Sign::Plus { 1.0 } else { -1.0 };
                        orient * pref * phi.eval(&mid, Some(e.axis), None)?
                    };
                }
            }
        }
        let jump_inc = (0..m)
            .map(|idx| {
                let e = geom.edge(idx);
                jump_coef[idx] + site_coef[geom.target(e)] - site_coef[e.source]
            })
            .collect();
        let side = geom.side() as f64;
        Ok(Self {
            jump_coef,
            collision_coef,
            site_coef,
            jump_inc,
            rate: side * side,
        })
    }

    /// `F(eta, W~, C~)`.
    pub fn value(&self, state: &Configuration, counters: &CounterField) -> f64 {
        let mut acc = 0.0;
        for e in 0..self.jump_coef.len() {
            if counters.jumps[e] != 0 {
                acc += self.jump_coef[e] * counters.jumps[e] as f64;
            }
            if counters.collisions[e] != 0 {
                acc += self.collision_coef[e] * counters.collisions[e] as f64;
            }
        }
        for &x in state.particles() {
            acc += self.site_coef[x];
        }
        acc
    }

    #[inline]
    fn edge_terms(&self, idx: usize, blocked: bool) -> (f64, f64) {
        let inc = if blocked {
            self.collision_coef[idx]
        } else {
            self.jump_inc[idx]
        };
        (inc, inc * inc)
    }

    /// `(QF, Gamma_2 F)` evaluated from scratch.
    pub fn rates(&self, state: &Configuration, geom: &TorusGeometry) -> (f64, f64) {
        let (mut q, mut g) = (0.0, 0.0);
        for &x in state.particles() {
            for axis in 0..geom.dim() {
                for sign in Sign::BOTH {
                    let y = geom.shift(x, axis, sign);
                    let (a, b) = self.edge_terms(geom.edge_index(x, axis, sign), state.is_occupied(y));
                    q += a;
                    g += b;
                }
            }
        }
        (self.rate * q, self.rate * g)
    }
}

/// Running generator integrals of one functional along a path.
#[derive(Debug, Clone)]
pub struct DynkinTracker {
    functional: DynkinFunctional,
    initial: f64,
    drift: f64,
    gamma: f64,
    drift_integral: f64,
    qv_integral: f64,
}

/// Snapshot of a tracked functional at a sample time.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DynkinSample {
    /// `F(t)`.
    pub value: f64,
    /// `int_0^t QF ds`.
    pub drift_integral: f64,
    /// `int_0^t Gamma_2 F ds`.
    pub qv_integral: f64,
    /// `F(t) - F(0) - int_0^t QF ds`.
    pub martingale: f64,
}

impl DynkinTracker {
    pub fn new(
        functional: DynkinFunctional,
        state: &Configuration,
        counters: &CounterField,
        geom: &TorusGeometry,
    ) -> Self {
        let (drift, gamma) = functional.rates(state, geom);
        Self {
            initial: functional.value(state, counters),
            functional,
            drift,
            gamma,
            drift_integral: 0.0,
            qv_integral: 0.0,
        }
    }

    /// Integrates the current (constant) rates over `dt`.
    #[inline]
    pub(crate) fn hold(&mut self, dt: f64) {
        self.drift_integral += self.drift * dt;
        self.qv_integral += self.gamma * dt;
    }

    /// Adds (`sign = 1`) or removes (`sign = -1`) the terms of the listed edges.
    #[inline]
    pub(crate) fn adjust(&mut self, edges: &[usize], state: &Configuration, geom: &TorusGeometry, sign: f64) {
        let f = &self.functional;
        let (mut q, mut g) = (0.0, 0.0);
        for &idx in edges {
            let e = geom.edge(idx);
            if !state.is_occupied(e.source) {
                continue;
            }
            let (a, b) = f.edge_terms(idx, state.is_occupied(geom.target(e)));
            q += a;
            g += b;
        }
        self.drift += sign * f.rate * q;
        self.gamma += sign * f.rate * g;
    }

    /// Clears accumulated round-off in the running rates.
    pub(crate) fn refresh(&mut self, state: &Configuration, geom: &TorusGeometry) {
        let (q, g) = self.functional.rates(state, geom);
        self.drift = q;
        self.gamma = g;
    }

    pub fn sample(&self, state: &Configuration, counters: &CounterField) -> DynkinSample {
        let value = self.functional.value(state, counters);
        DynkinSample {
            value,
            drift_integral: self.drift_integral,
            qv_integral: self.qv_integral,
            martingale: value - self.initial - self.drift_integral,
        }
    }

    pub fn functional(&self) -> &DynkinFunctional {
        &self.functional
    }

    /// Current `(QF, Gamma_2 F)`.
    pub fn rates(&self) -> (f64, f64) {
        (self.drift, self.gamma)
    }
}

/// Directed edges whose rate terms depend on the occupation of `x` or `y`.
pub(crate) fn edges_touching(geom: &TorusGeometry, sites: [usize; 2], out: &mut Vec<usize>) {
    out.clear();
    for s in sites {
        for axis in 0..geom.dim() {
            for sign in Sign::BOTH {
                let outgoing = geom.edge_index(s, axis, sign);
                let incoming = geom.edge_index(geom.shift(s, axis, sign), axis, sign.flip());
                for e in [outgoing, incoming] {
                    if !out.contains(&e) {
                        out.push(e);
                    }
                }
            }
        }
    }
}
