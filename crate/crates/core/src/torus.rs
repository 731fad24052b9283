//! The discrete torus `T_eps^d` with `L` sites per axis and spacing `eps = 1/L`.
//!
//! Sites are encoded row-major: the last axis has stride 1. The spacing is
//! never stored as a float; positions and edge midpoints are formed from
//! integer coordinates so that `midpoint(x, l, +)` and
//! `midpoint(x + eps e_l, l, -)` are bit-identical.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction of a nearest-neighbour step along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }

    #[inline]
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// An ordered nearest-neighbour pair `(x, x ± eps e_l)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DirectedEdge {
    pub source: usize,
    pub axis: usize,
    pub sign: Sign,
}

/// Immutable geometry of `T_eps^d`; cheap to share across replicas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusGeometry {
    dim: usize,
    side: usize,
    sites: usize,
    strides: Vec<usize>,
}

impl TorusGeometry {
    /// Builds the torus, rejecting `L < 3` and site counts that overflow `usize`.
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Range("dimension must be at least 1".into()));
        }
        if side < 3 {
            return Err(Error::DegenerateLattice { side });
        }
        let overflow = || Error::LatticeOverflow { dim, side };
        let exp = u32::try_from(dim).map_err(|_| overflow())?;
        let sites = side.checked_pow(exp).ok_or_else(overflow)?;
        // Directed edge indices must fit as well.
        sites.checked_mul(2 * dim).ok_or_else(overflow)?;
        let mut strides = vec![1usize; dim];
        for axis in (0..dim.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * side;
        }
        Ok(Self {
            dim,
            side,
            sites,
            strides,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sites per axis, `L = 1/eps`.
    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn site_count(&self) -> usize {
        self.sites
    }

    /// `eps = 1/L`, for use in prefactors only.
    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.side as f64
    }

    /// `eps^d = 1/L^d`.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        1.0 / self.sites as f64
    }

    #[inline]
    pub fn coord(&self, site: usize, axis: usize) -> usize {
        (site / self.strides[axis]) % self.side
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        (0..self.dim).map(|a| self.coord(site, a)).collect()
    }

    /// Site code of integer coordinates (each taken mod `L`).
    pub fn site(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dim);
        coords
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| (c % self.side) * s)
            .sum()
    }

    /// Lattice site `x_eps = eps * floor(x / eps)` containing a continuous point.
    pub fn site_of_point(&self, point: &[f64]) -> Result<usize> {
        if point.len() != self.dim {
            return Err(Error::usage(format!(
                "point has {} coordinates, torus has dimension {}",
                point.len(),
                self.dim
            )));
        }
        let mut coords = Vec::with_capacity(self.dim);
        for &x in point {
            if !x.is_finite() {
                return Err(Error::usage("point coordinate is not finite"));
            }
            let wrapped = x.rem_euclid(1.0);
            let c = (wrapped * self.side as f64).floor() as usize;
            coords.push(c.min(self.side - 1));
        }
        Ok(self.site(&coords))
    }

    /// Neighbour `x ± eps e_axis` with periodic wrap.
    #[inline]
    pub fn shift(&self, site: usize, axis: usize, sign: Sign) -> usize {
        let stride = self.strides[axis];
        let c = (site / stride) % self.side;
        match sign {
            Sign::Plus => {
                if c + 1 == self.side {
                    site + stride - self.side * stride
                } else {
                    site + stride
                }
            }
            Sign::Minus => {
                if c == 0 {
                    site + (self.side - 1) * stride
                } else {
                    site - stride
                }
            }
        }
    }

    /// All `2d` nearest neighbours, ordered by axis then `+`, `-`.
    pub fn neighbours(&self, site: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim).flat_map(move |axis| Sign::BOTH.map(|s| self.shift(site, axis, s)))
    }

    /// Position of a site in `[0,1)^d`.
    pub fn point(&self, site: usize) -> Vec<f64> {
        (0..self.dim)
            .map(|a| self.coord(site, a) as f64 / self.side as f64)
            .collect()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        2 * self.dim * self.sites
    }

    /// Index of the directed edge `(site, axis, sign)`: site-major, then axis, then `+`, `-`.
    #[inline]
    pub fn edge_index(&self, site: usize, axis: usize, sign: Sign) -> usize {
        (site * self.dim + axis) * 2 + sign.index()
    }

    #[inline]
    pub fn edge(&self, index: usize) -> DirectedEdge {
        let sign = if index.is_multiple_of(2) {
            Sign::Plus
        } else {
            Sign::Minus
        };
        let rest = index / 2;
        DirectedEdge {
            source: rest / self.dim,
            axis: rest % self.dim,
            sign,
        }
    }

    /// Every directed edge in deterministic index order.
    pub fn directed_edges(&self) -> impl Iterator<Item = DirectedEdge> + '_ {
        (0..self.edge_count()).map(move |i| self.edge(i))
    }

    #[inline]
    pub fn target(&self, edge: DirectedEdge) -> usize {
        self.shift(edge.source, edge.axis, edge.sign)
    }

    /// The same unordered pair traversed the other way.
    pub fn reverse(&self, edge: DirectedEdge) -> DirectedEdge {
        DirectedEdge {
            source: self.target(edge),
            axis: edge.axis,
            sign: edge.sign.flip(),
        }
    }

    /// Edge centre `x ± (eps/2) e_l`, reduced into `[0,1)^d`.
    pub fn midpoint(&self, edge: DirectedEdge) -> Vec<f64> {
        let double = 2 * self.side;
        (0..self.dim)
            .map(|a| {
                let c = 2 * self.coord(edge.source, a);
                let shifted = if a != edge.axis {
                    c
                } else {
                    match edge.sign {
                        Sign::Plus => (c + 1) % double,
                        Sign::Minus => (c + double - 1) % double,
                    }
                };
                shifted as f64 / double as f64
            })
            .collect()
    }
}
