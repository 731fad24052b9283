//! Finite real Fourier series on `T^d` with heat-kernel decay factors.
//!
//! A term is `amp * exp(-4 pi^2 u t) * trig(2 pi k . x)` where `trig` is
//! `cos` or `sin` and `u` is a non-negative integer decay count. Static
//! functions have `u = 0`; evolving a static series under the heat equation
//! sets `u = |k|^2`. Products of evolved series keep `u` additive, so every
//! quantity built from `rho` and trigonometric test functions stays in closed
//! form, including time integrals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Cos,
    Sin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub freq: Vec<i64>,
    pub phase: Phase,
    pub amp: f64,
    pub decay: u64,
}

impl Mode {
    /// `k . x mod 1`, reducing each product separately to limit cancellation.
    fn turns(&self, x: &[f64]) -> f64 {
        let mut turns = 0.0;
        for (&k, &xi) in self.freq.iter().zip(x) {
            turns += (k as f64 * xi).rem_euclid(1.0);
        }
        turns.rem_euclid(1.0)
    }

    fn trig(&self, x: &[f64]) -> f64 {
        let turns = self.turns(x);
        let quarters = turns * 4.0;
        if quarters == quarters.floor() {
            // exact at multiples of pi/2
            let q = quarters as usize % 4;
            const COS: [f64; 4] = [1.0, 0.0, -1.0, 0.0];
            const SIN: [f64; 4] = [0.0, 1.0, 0.0, -1.0];
            return match self.phase {
                Phase::Cos => COS[q],
                Phase::Sin => SIN[q],
            };
        }
        let a = 2.0 * PI * turns;
        match self.phase {
            Phase::Cos => a.cos(),
            Phase::Sin => a.sin(),
        }
    }

    fn norm_sq(&self) -> u64 {
        self.freq.iter().map(|&k| (k * k) as u64).sum()
    }

    fn is_constant(&self) -> bool {
        self.freq.iter().all(|&k| k == 0)
    }

    fn rate(&self) -> f64 {
        4.0 * PI * PI * self.decay as f64
    }
}

/// Sum of trigonometric modes in dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    dim: usize,
    modes: Vec<Mode>,
}

/// `(1 - e^{-r T}) / r`, continuous at `r = 0`.
fn decay_integral(rate: f64, horizon: f64) -> f64 {
    if rate == 0.0 {
        horizon
    } else {
        -(-rate * horizon).exp_m1() / rate
    }
}

impl Series {
    pub fn zero(dim: usize) -> Self {
        Self { dim, modes: Vec::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut s = Self::zero(dim);
        s.push(vec![0; dim], Phase::Cos, c, 0);
        s
    }

    /// `amp * trig(2 pi k . x)` with a static (undecaying) amplitude.
    pub fn mode(freq: Vec<i64>, phase: Phase, amp: f64) -> Self {
        let mut s = Self::zero(freq.len());
        s.push(freq, phase, amp, 0);
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Adds a term, normalising `k -> -k` so the first nonzero frequency is positive.
    pub fn push(&mut self, mut freq: Vec<i64>, phase: Phase, mut amp: f64, decay: u64) {
        assert_eq!(freq.len(), self.dim, "frequency vector has wrong dimension");
        if amp == 0.0 {
            return;
        }
        match freq.iter().find(|&&k| k != 0) {
            None => {
                if phase == Phase::Sin {
                    return;
                }
            }
            Some(&k) if k < 0 => {
                freq.iter_mut().for_each(|k| *k = -*k);
                if phase == Phase::Sin {
                    amp = -amp;
                }
            }
            Some(_) => {}
        }
        if let Some(m) = self
            .modes
            .iter_mut()
            .find(|m| m.freq == freq && m.phase == phase && m.decay == decay)
        {
            m.amp += amp;
        } else {
            self.modes.push(Mode {
                freq,
                phase,
                amp,
                decay,
            });
        }
    }

    pub fn add(&self, other: &Series) -> Series {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for m in &other.modes {
            out.push(m.freq.clone(), m.phase, m.amp, m.decay);
        }
        out
    }

    pub fn scale(&self, c: f64) -> Series {
        let mut out = Series::zero(self.dim);
        for m in &self.modes {
            out.push(m.freq.clone(), m.phase, c * m.amp, m.decay);
        }
        out
    }

    /// Pointwise product via the product-to-sum identities.
    pub fn mul(&self, other: &Series) -> Series {
        assert_eq!(self.dim, other.dim);
        let mut out = Series::zero(self.dim);
        for a in &self.modes {
            for b in &other.modes {
                let sum: Vec<i64> = a.freq.iter().zip(&b.freq).map(|(x, y)| x + y).collect();
                let diff: Vec<i64> = a.freq.iter().zip(&b.freq).map(|(x, y)| x - y).collect();
                let h = 0.5 * a.amp * b.amp;
                let decay = a.decay + b.decay;
                match (a.phase, b.phase) {
                    (Phase::Cos, Phase::Cos) => {
                        out.push(diff, Phase::Cos, h, decay);
                        out.push(sum, Phase::Cos, h, decay);
                    }
                    (Phase::Sin, Phase::Sin) => {
                        out.push(diff, Phase::Cos, h, decay);
                        out.push(sum, Phase::Cos, -h, decay);
                    }
                    (Phase::Sin, Phase::Cos) => {
                        out.push(sum, Phase::Sin, h, decay);
                        out.push(diff, Phase::Sin, h, decay);
                    }
                    (Phase::Cos, Phase::Sin) => {
                        out.push(sum, Phase::Sin, h, decay);
                        out.push(diff, Phase::Sin, -h, decay);
                    }
                }
            }
        }
        out
    }

    pub fn square(&self) -> Series {
        self.mul(self)
    }

    /// Solution of `d_t u = Laplace u` started from this (static) series.
    pub fn heat_evolved(&self) -> Series {
        let mut out = Series::zero(self.dim);
        for m in &self.modes {
            let decay = m.decay + m.norm_sq();
            out.push(m.freq.clone(), m.phase, m.amp, decay);
        }
        out
    }

    /// Partial derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> Series {
        let mut out = Series::zero(self.dim);
        for m in &self.modes {
            let k = m.freq[axis] as f64;
            if k == 0.0 {
                continue;
            }
            let w = 2.0 * PI * k * m.amp;
            match m.phase {
                Phase::Cos => out.push(m.freq.clone(), Phase::Sin, -w, m.decay),
                Phase::Sin => out.push(m.freq.clone(), Phase::Cos, w, m.decay),
            }
        }
        out
    }

    /// Replaces each time factor `e^{-r t}` by `int_0^T e^{-r t} dt`; the result is static.
    pub fn time_integrated(&self, horizon: f64) -> Series {
        let mut out = Series::zero(self.dim);
        for m in &self.modes {
            out.push(m.freq.clone(), m.phase, m.amp * decay_integral(m.rate(), horizon), 0);
        }
        out
    }

    /// Freezes time at `t`; the result is static.
    pub fn at_time(&self, t: f64) -> Series {
        let mut out = Series::zero(self.dim);
        for m in &self.modes {
            out.push(m.freq.clone(), m.phase, m.amp * (-m.rate() * t).exp(), 0);
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_at(x, 0.0)
    }

    pub fn eval_at(&self, x: &[f64], t: f64) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.modes
            .iter()
            .map(|m| {
                let decay = if m.decay == 0 { 1.0 } else { (-m.rate() * t).exp() };
                m.amp * decay * m.trig(x)
            })
            .sum()
    }

    /// `int_{T^d} f(x, t) dx`.
    pub fn space_integral_at(&self, t: f64) -> f64 {
        self.modes
            .iter()
            .filter(|m| m.is_constant())
            .map(|m| m.amp * (-m.rate() * t).exp())
            .sum()
    }

    /// `int_0^T int_{T^d} f(x, t) dx dt`.
    pub fn space_time_integral(&self, horizon: f64) -> f64 {
        self.modes
            .iter()
            .filter(|m| m.is_constant())
            .map(|m| m.amp * decay_integral(m.rate(), horizon))
            .sum()
    }

    /// Mean over the box of side `h` centred at `x`, times the box volume `h^d`.
    pub fn box_integral(&self, x: &[f64], h: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let factor: f64 = m
                    .freq
                    .iter()
                    .map(|&k| {
                        let z = PI * k as f64 * h;
                        if k == 0 {
                            h
                        } else {
                            h * z.sin() / z
                        }
                    })
                    .product();
                m.amp * factor * m.trig(x)
            })
            .sum()
    }

    /// Constant part (coefficient of the zero mode).
    pub fn mean(&self) -> f64 {
        self.space_integral_at(0.0)
    }

    /// `sum |amp|` over non-constant modes.
    pub fn oscillation_bound(&self) -> f64 {
        self.modes
            .iter()
            .filter(|m| !m.is_constant())
            .map(|m| m.amp.abs())
            .sum()
    }

    /// `|c_0| + sum |amp|`, an upper bound on the sup-norm at any `t >= 0`.
    pub fn sup_bound(&self) -> f64 {
        self.modes.iter().map(|m| m.amp.abs()).sum()
    }
}
