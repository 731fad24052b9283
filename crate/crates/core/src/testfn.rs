//! Test functions paired against the macroscopic fields.
//!
//! Three shapes exist: a constant (valid for every pairing), a scalar
//! trigonometric series, and a component table indexed either by `(l, ±)`
//! (unidirectional fields) or by `l` alone (net fields and the
//! nearest-neighbour measure). Missing table components are identically zero.
//!
//! JSON descriptors:
//!
//! ```json
//! {"kind":"const","c":1.0}
//! {"kind":"trig","terms":[{"axis":0,"freq":1,"phase":"cos","amp":0.25}]}
//! {"kind":"const","c":1.0,"component":{"axis":0,"sign":"+"}}
//! [{"kind":"const","c":1.0,"component":{"axis":0,"sign":"+"}},
//!  {"kind":"const","c":2.0,"component":{"axis":0,"sign":"-"}}]
//! ```
//!
//! A term may give `"freqs": [k_1, .., k_d]` instead of `axis`/`freq` for a
//! plane wave `trig(2 pi k . x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{Phase, Series};
use crate::torus::Sign;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDescriptor {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freqs: Option<Vec<i64>>,
    pub phase: Phase,
    pub amp: f64,
}

impl TermDescriptor {
    pub(crate) fn to_series(&self, dim: usize) -> Result<Series> {
        let freq = match (&self.freqs, self.axis, self.freq) {
            (Some(k), None, None) => {
                if k.len() != dim {
                    return Err(Error::usage(format!(
                        "term has {} frequencies, dimension is {dim}",
                        k.len()
                    )));
                }
                k.clone()
            }
            (None, Some(axis), Some(f)) => {
                if axis >= dim {
                    return Err(Error::usage(format!("axis {axis} out of range for dimension {dim}")));
                }
                let mut k = vec![0; dim];
                k[axis] = f;
                k
            }
            _ => return Err(Error::usage("trig term needs either `axis` and `freq`, or `freqs`")),
        };
        if !self.amp.is_finite() {
            return Err(Error::usage("trig term amplitude is not finite"));
        }
        Ok(Series::mode(freq, self.phase, self.amp))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub axis: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<Sign>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BodyDescriptor {
    Const { c: f64 },
    Trig { terms: Vec<TermDescriptor> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleDescriptor {
    #[serde(flatten)]
    pub body: BodyDescriptor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<Component>,
}

/// Serialized form of a [`TestFunction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TestFunctionDescriptor {
    Single(SingleDescriptor),
    Table(Vec<SingleDescriptor>),
}

/// Whether a component table is indexed by `(l, ±)` or by `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableShape {
    Signed,
    Axis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentTable {
    shape: TableShape,
    entries: Vec<(Component, Series)>,
}

impl ComponentTable {
    pub fn shape(&self) -> TableShape {
        self.shape
    }

    pub fn entries(&self) -> &[(Component, Series)] {
        &self.entries
    }

    fn lookup(&self, axis: usize, sign: Option<Sign>) -> Option<&Series> {
        self.entries
            .iter()
            .find(|(c, _)| c.axis == axis && c.sign == sign)
            .map(|(_, s)| s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    Const(f64),
    Trig(Series),
    Table(ComponentTable),
}

impl TestFunction {
    pub fn constant(c: f64) -> Self {
        TestFunction::Const(c)
    }

    /// Builds a component table; all components must share one shape.
    pub fn table(entries: Vec<(Component, Series)>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::usage("component table is empty"))?;
        let shape = if first.0.sign.is_some() {
            TableShape::Signed
        } else {
            TableShape::Axis
        };
        for (i, (c, s)) in entries.iter().enumerate() {
            if c.sign.is_some() != (shape == TableShape::Signed) {
                return Err(Error::usage(
                    "component table mixes (axis, sign) and axis-only components",
                ));
            }
            if c.axis >= s.dim() {
                return Err(Error::usage(format!(
                    "component axis {} out of range for dimension {}",
                    c.axis,
                    s.dim()
                )));
            }
            if entries[..i].iter().any(|(o, _)| o == c) {
                return Err(Error::usage(format!("duplicate component {c:?}")));
            }
        }
        Ok(TestFunction::Table(ComponentTable { shape, entries }))
    }

    /// `c` on the single component `(axis, sign)`, zero elsewhere.
    pub fn on_component(dim: usize, c: f64, axis: usize, sign: Option<Sign>) -> Result<Self> {
        Self::table(vec![(Component { axis, sign }, Series::constant(dim, c))])
    }

    pub fn from_descriptor(desc: &TestFunctionDescriptor, dim: usize) -> Result<Self> {
        let body_series = |body: &BodyDescriptor| -> Result<Series> {
            match body {
                BodyDescriptor::Const { c } => Ok(Series::constant(dim, *c)),
                BodyDescriptor::Trig { terms } => {
                    let mut s = Series::zero(dim);
                    for t in terms {
                        s = s.add(&t.to_series(dim)?);
                    }
                    Ok(s)
                }
            }
        };
        match desc {
            TestFunctionDescriptor::Single(SingleDescriptor { body, component: None }) => match body {
                BodyDescriptor::Const { c } => {
                    if !c.is_finite() {
                        return Err(Error::usage("constant is not finite"));
                    }
                    Ok(TestFunction::Const(*c))
                }
                BodyDescriptor::Trig { .. } => Ok(TestFunction::Trig(body_series(body)?)),
            },
            TestFunctionDescriptor::Single(SingleDescriptor {
                body,
                component: Some(c),
            }) => Self::table(vec![(*c, body_series(body)?)]),
            TestFunctionDescriptor::Table(items) => {
                let mut entries = Vec::with_capacity(items.len());
                for item in items {
                    let c = item
                        .component
                        .ok_or_else(|| Error::usage("table entries need a `component`"))?;
                    entries.push((c, body_series(&item.body)?));
                }
                Self::table(entries)
            }
        }
    }

    pub fn from_json(json: &str, dim: usize) -> Result<Self> {
        let desc: TestFunctionDescriptor = serde_json::from_str(json)?;
        Self::from_descriptor(&desc, dim)
    }

    /// Evaluates `phi(point)` or `phi_{l,±}(point)`.
    ///
    /// A constant ignores `(axis, sign)`; a scalar series rejects them; a
    /// table requires exactly the indices of its shape.
    pub fn eval(&self, point: &[f64], axis: Option<usize>, sign: Option<Sign>) -> Result<f64> {
        match self {
            TestFunction::Const(c) => Ok(*c),
            TestFunction::Trig(s) => {
                if axis.is_some() || sign.is_some() {
                    return Err(Error::usage("component index supplied for a scalar test function"));
                }
                Ok(s.eval(point))
            }
            TestFunction::Table(t) => {
                let axis = axis.ok_or_else(|| Error::usage("component-indexed test function needs an axis"))?;
                match (t.shape, sign) {
                    (TableShape::Signed, None) => {
                        return Err(Error::usage("(axis, sign)-indexed test function needs a sign"))
                    }
                    (TableShape::Axis, Some(_)) => {
                        return Err(Error::usage("axis-indexed test function takes no sign"))
                    }
                    _ => {}
                }
                Ok(t.lookup(axis, sign).map_or(0.0, |s| s.eval(point)))
            }
        }
    }

    /// The scalar function behind one component, as a series (zero if absent).
    pub fn component_series(&self, dim: usize, axis: Option<usize>, sign: Option<Sign>) -> Result<Series> {
        match self {
            TestFunction::Const(c) => Ok(Series::constant(dim, *c)),
            TestFunction::Trig(s) => {
                if axis.is_some() || sign.is_some() {
                    return Err(Error::usage("component index supplied for a scalar test function"));
                }
                Ok(s.clone())
            }
            TestFunction::Table(t) => {
                let axis = axis.ok_or_else(|| Error::usage("component-indexed test function needs an axis"))?;
                if (t.shape == TableShape::Signed) != sign.is_some() {
                    return Err(Error::usage("test function shape does not match the pairing"));
                }
                Ok(t.lookup(axis, sign).cloned().unwrap_or_else(|| Series::zero(dim)))
            }
        }
    }

    /// Rejects shapes that cannot pair with a scalar field.
    pub fn require_scalar(&self) -> Result<()> {
        match self {
            TestFunction::Table(_) => Err(Error::usage(
                "component-indexed test function cannot pair with a scalar field",
            )),
            _ => Ok(()),
        }
    }

    /// Rejects shapes that cannot pair with a field indexed by `shape`.
    pub fn require_shape(&self, shape: TableShape) -> Result<()> {
        match self {
            TestFunction::Const(_) => Ok(()),
            TestFunction::Trig(_) => Err(Error::usage(
                "scalar trig test function needs a `component` for this pairing",
            )),
            TestFunction::Table(t) if t.shape == shape => Ok(()),
            TestFunction::Table(_) => Err(Error::usage(match shape {
                TableShape::Signed => "pairing needs an (axis, sign)-indexed test function",
                TableShape::Axis => "pairing needs an axis-indexed test function",
            })),
        }
    }

    /// Closed-form bound on `sup |phi|` over all points and components.
    pub fn sup_norm(&self) -> f64 {
        match self {
            TestFunction::Const(c) => c.abs(),
            TestFunction::Trig(s) => s.sup_bound(),
            TestFunction::Table(t) => t.entries.iter().map(|(_, s)| s.sup_bound()).fold(0.0, f64::max),
        }
    }

    /// Componentwise product; both operands must have compatible shapes.
    pub fn mul(&self, other: &TestFunction, dim: usize) -> Result<TestFunction> {
        use TestFunction::*;
        Ok(match (self, other) {
            (Const(a), Const(b)) => Const(a * b),
            (Const(a), Trig(s)) | (Trig(s), Const(a)) => Trig(s.scale(*a)),
            (Trig(a), Trig(b)) => Trig(a.mul(b)),
            (Const(a), Table(t)) | (Table(t), Const(a)) => Table(ComponentTable {
                shape: t.shape,
                entries: t.entries.iter().map(|(c, s)| (*c, s.scale(*a))).collect(),
            }),
            (Table(a), Table(b)) if a.shape == b.shape => {
                let entries = a
                    .entries
                    .iter()
                    .filter_map(|(c, s)| b.lookup(c.axis, c.sign).map(|t| (*c, s.mul(t))))
                    .collect::<Vec<_>>();
                if entries.is_empty() {
                    Table(ComponentTable {
                        shape: a.shape,
                        entries: vec![(a.entries[0].0, Series::zero(dim))],
                    })
                } else {
                    Table(ComponentTable {
                        shape: a.shape,
                        entries,
                    })
                }
            }
            _ => return Err(Error::usage("cannot multiply test functions of different shapes")),
        })
    }

    /// `phi^k` componentwise.
    pub fn powi(&self, k: u32, dim: usize) -> Result<TestFunction> {
        let mut out = TestFunction::Const(1.0);
        for _ in 0..k {
            out = out.mul(self, dim)?;
        }
        Ok(out)
    }
}
