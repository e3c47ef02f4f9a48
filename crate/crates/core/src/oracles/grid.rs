use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::bvp::{linspace, BvpSpec, ProblemKind};

/// One axis of a regular grid.
///
/// `closed` axes include both endpoints; half-open axes stop one spacing
/// short of `hi`, which is the natural layout for a periodic direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    #[serde(default = "default_closed")]
    pub closed: bool,
}

fn default_closed() -> bool {
    true
}

impl GridAxis {
    pub fn closed(name: &str, lo: f64, hi: f64, n: usize) -> Self {
        Self { name: name.into(), lo, hi, n, closed: true }
    }

    pub fn periodic(name: &str, lo: f64, hi: f64, n: usize) -> Self {
        Self { name: name.into(), lo, hi, n, closed: false }
    }

    pub fn nodes(&self) -> Vec<f64> {
        if self.closed {
            linspace(self.lo, self.hi, self.n)
        } else {
            (0..self.n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / self.n as f64).collect()
        }
    }
}

/// Regular grid; points are ordered row-major with the first axis slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalGrid {
    pub axes: Vec<GridAxis>,
}

impl EvalGrid {
    pub fn new(axes: Vec<GridAxis>) -> Result<Self, OracleError> {
        let g = Self { axes };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if self.axes.is_empty() {
            return Err(OracleError::InvalidGrid("no axes".into()));
        }
        for a in &self.axes {
            if a.n < 2 {
                return Err(OracleError::InvalidGrid(format!("axis {:?} needs at least 2 nodes", a.name)));
            }
            if !(a.lo.is_finite() && a.hi.is_finite() && a.lo < a.hi) {
                return Err(OracleError::InvalidGrid(format!("axis {:?} needs lo < hi", a.name)));
            }
        }
        Ok(())
    }

    /// Default evaluation grid of a problem's domain: 256 x 100 for the
    /// transient problems (periodic in x), 256 x 256 for Helmholtz and
    /// 384 x 384 for the eikonal box.
    pub fn default_for(spec: &BvpSpec) -> Self {
        let d = &spec.domain;
        let axes = match spec.kind {
            ProblemKind::Convection | ProblemKind::ReactionDiffusion | ProblemKind::Burgers => vec![
                GridAxis::periodic("x", d.space_lo[0], d.space_hi[0], 256),
                GridAxis::closed("t", 0.0, d.time_hi, 100),
            ],
            ProblemKind::Helmholtz => vec![
                GridAxis::closed("x", d.space_lo[0], d.space_hi[0], 256),
                GridAxis::closed("y", d.space_lo[1], d.space_hi[1], 256),
            ],
            ProblemKind::Eikonal => vec![
                GridAxis::closed("x", d.space_lo[0], d.space_hi[0], 384),
                GridAxis::closed("y", d.space_lo[1], d.space_hi[1], 384),
            ],
        };
        Self { axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    /// Flattened points, `len() x dim()` row-major.
    pub fn points(&self) -> Vec<f64> {
        let nodes: Vec<Vec<f64>> = self.axes.iter().map(GridAxis::nodes).collect();
        let d = self.dim();
        let mut out = Vec::with_capacity(self.len() * d);
        let mut idx = vec![0usize; d];
        for _ in 0..self.len() {
            out.extend(idx.iter().zip(&nodes).map(|(&i, n)| n[i]));
            for a in (0..d).rev() {
                idx[a] += 1;
                if idx[a] < nodes[a].len() {
                    break;
                }
                idx[a] = 0;
            }
        }
        out
    }
}
