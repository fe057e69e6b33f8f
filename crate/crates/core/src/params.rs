//! Constrained parameter vectors and their unconstrained reparameterization.
//!
//! Gradient ascent runs on the unconstrained image of each coordinate:
//! a scaled logit for bounded intervals, a shifted log for half-lines and
//! the identity for unbounded coordinates.

use crate::error::{Error, Result};

/// Admissible set of a single parameter coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    Unbounded,
    /// `(lo, inf)`, or `[lo, inf)` when `closed`.
    LowerBound { lo: f64, closed: bool },
    /// `(lo, hi)` with optionally closed ends.
    Interval {
        lo: f64,
        hi: f64,
        closed_lo: bool,
        closed_hi: bool,
    },
}

impl Constraint {
    pub const fn open_interval(lo: f64, hi: f64) -> Self {
        Constraint::Interval {
            lo,
            hi,
            closed_lo: false,
            closed_hi: false,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        if !value.is_finite() {
            return false;
        }
        match *self {
            Constraint::Unbounded => true,
            Constraint::LowerBound { lo, closed } => value > lo || (closed && value == lo),
            Constraint::Interval {
                lo,
                hi,
                closed_lo,
                closed_hi,
            } => {
                (value > lo || (closed_lo && value == lo))
                    && (value < hi || (closed_hi && value == hi))
            }
        }
    }

    /// Maps a value strictly inside the constraint set to the real line.
    pub fn to_unconstrained(&self, value: f64) -> Result<f64> {
        if !self.contains(value) {
            return Err(Error::Domain(format!("{value} outside {self:?}")));
        }
        match *self {
            Constraint::Unbounded => Ok(value),
            Constraint::LowerBound { lo, .. } => {
                if value == lo {
                    return Err(Error::Domain(format!(
                        "{value} sits on the boundary of {self:?} and has no unconstrained image"
                    )));
                }
                Ok((value - lo).ln())
            }
            Constraint::Interval { lo, hi, .. } => {
                if value == lo || value == hi {
                    return Err(Error::Domain(format!(
                        "{value} sits on the boundary of {self:?} and has no unconstrained image"
                    )));
                }
                if lo + hi == 0.0 {
                    Ok(2.0 * (value / hi).atanh())
                } else {
                    Ok(((value - lo) / (hi - value)).ln())
                }
            }
        }
    }

    /// Inverse of [`Constraint::to_unconstrained`]; total on finite input and
    /// always lands strictly inside the set.
    pub fn from_unconstrained(&self, v: f64) -> f64 {
        match *self {
            Constraint::Unbounded => v,
            Constraint::LowerBound { lo, .. } => {
                let value = lo + v.exp();
                if value > lo {
                    value.min(f64::MAX)
                } else {
                    lo.next_up()
                }
            }
            Constraint::Interval { lo, hi, .. } => {
                let value = if lo + hi == 0.0 {
                    hi * (0.5 * v).tanh()
                } else if v < 0.0 {
                    let e = v.exp();
                    lo + (hi - lo) * e / (1.0 + e)
                } else {
                    hi - (hi - lo) / (1.0 + v.exp())
                };
                value.clamp(lo.next_up(), hi.next_down())
            }
        }
    }

    /// Derivative of the constrained value with respect to its unconstrained image.
    pub fn jacobian(&self, value: f64) -> f64 {
        match *self {
            Constraint::Unbounded => 1.0,
            Constraint::LowerBound { lo, .. } => value - lo,
            Constraint::Interval { lo, hi, .. } => (value - lo) * (hi - value) / (hi - lo),
        }
    }
}

/// Per-coordinate constraints of a parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    names: Vec<String>,
    constraints: Vec<Constraint>,
}

impl Domain {
    pub fn new<S: Into<String>>(coords: impl IntoIterator<Item = (S, Constraint)>) -> Self {
        let (names, constraints) = coords
            .into_iter()
            .map(|(n, c)| (n.into(), c))
            .unzip();
        Domain { names, constraints }
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn check(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::Domain(format!(
                "expected {} parameters, got {}",
                self.len(),
                values.len()
            )));
        }
        for ((name, c), &v) in self.names.iter().zip(&self.constraints).zip(values) {
            if !c.contains(v) {
                return Err(Error::Domain(format!("{name} = {v} violates {c:?}")));
            }
        }
        Ok(())
    }

    pub fn to_unconstrained(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check(values)?;
        self.constraints
            .iter()
            .zip(values)
            .map(|(c, &v)| c.to_unconstrained(v))
            .collect()
    }

    pub fn from_unconstrained(&self, v: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .zip(v)
            .map(|(c, &x)| c.from_unconstrained(x))
            .collect()
    }

    /// Chain rule: turns a gradient in constrained coordinates into one in
    /// unconstrained coordinates, evaluated at `values`.
    pub fn gradient_to_unconstrained(&self, values: &[f64], grad: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .zip(values)
            .zip(grad)
            .map(|((c, &v), &g)| g * c.jacobian(v))
            .collect()
    }
}

/// A parameter vector guaranteed to lie in its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
    domain: Domain,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>, domain: Domain) -> Result<Self> {
        domain.check(&values)?;
        Ok(ParameterVector { values, domain })
    }

    pub fn from_unconstrained(v: &[f64], domain: Domain) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite unconstrained vector {v:?}")));
        }
        if v.len() != domain.len() {
            return Err(Error::Domain(format!(
                "expected {} coordinates, got {}",
                domain.len(),
                v.len()
            )));
        }
        let values = domain.from_unconstrained(v);
        Ok(ParameterVector { values, domain })
    }

    pub fn to_unconstrained(&self) -> Result<Vec<f64>> {
        self.domain.to_unconstrained(&self.values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}
