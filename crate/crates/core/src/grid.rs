//! Intervals, uniform interior grids and grid functions.
//!
//! Grid functions store interior node values only. Values outside the open
//! interval are identically zero, so the two endpoints act as virtual nodes
//! carrying the value 0.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// An open interval `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Domain {
    a: f64,
    b: f64,
}

impl Domain {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::BadDomain { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn unit() -> Self {
        Self { a: 0.0, b: 1.0 }
    }

    pub fn symmetric() -> Self {
        Self { a: -1.0, b: 1.0 }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.length()
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.a && x < self.b
    }

    /// Distance to the boundary, extended by zero outside the closed interval.
    pub fn dist(&self, x: f64) -> f64 {
        if x <= self.a || x >= self.b {
            0.0
        } else {
            (x - self.a).min(self.b - x)
        }
    }

    /// The inner parallel set `{x : dist(x) > eta}`.
    pub fn shrink(&self, eta: f64) -> Result<Self> {
        let max = self.half_width();
        if !(eta >= 0.0 && eta < max) {
            return Err(Error::EtaTooLarge { eta, max });
        }
        Ok(Self {
            a: self.a + eta,
            b: self.b - eta,
        })
    }
}

/// Free-function form of [`Domain::dist`].
pub fn dist(domain: &Domain, x: f64) -> f64 {
    domain.dist(x)
}

/// Free-function form of [`Domain::shrink`].
pub fn shrink(domain: &Domain, eta: f64) -> Result<Domain> {
    domain.shrink(eta)
}

pub const MIN_NODES: usize = 3;

/// Uniform grid of `n` interior nodes `a + i h`, `i = 1..=n`, `h = (b - a)/(n + 1)`.
#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    domain: Domain,
    n: usize,
    h: f64,
    nodes: Vec<f64>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.n == other.n
    }
}

impl Grid {
    pub fn new(domain: Domain, n: usize) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::BadResolution { n, min: MIN_NODES });
        }
        let h = domain.length() / (n + 1) as f64;
        let nodes = (1..=n).map(|i| domain.a + i as f64 * h).collect();
        Ok(Self {
            domain,
            n,
            h,
            nodes,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Distance of node `i` to the boundary, in units of `h` (exact integer).
    pub fn boundary_steps(&self, i: usize) -> usize {
        (i + 1).min(self.n - i)
    }

    pub fn dist(&self, i: usize) -> f64 {
        self.boundary_steps(i) as f64 * self.h
    }

    /// Discrete inner product with weight `h`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.h * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }
}

pub fn make_grid(domain: Domain, n: usize) -> Result<Grid> {
    Grid::new(domain, n)
}

/// Values on the interior nodes of a grid, zero outside the open interval.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                grid.n(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value {v}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.n();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Samples `f` at the interior nodes.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    /// Value including the virtual endpoints: index 0 is `a`, `n + 1` is `b`.
    pub fn extended(&self, k: usize) -> f64 {
        if k == 0 || k > self.values.len() {
            0.0
        } else {
            self.values[k - 1]
        }
    }

    pub fn holder_seminorm(&self, beta: f64) -> f64 {
        linf_seminorm_holder(self, beta)
    }
}

pub fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Hölder seminorm over all node pairs, with the endpoints included as
/// virtual nodes of value 0.
pub fn linf_seminorm_holder(f: &GridFunction, beta: f64) -> f64 {
    let grid = f.grid();
    let n = grid.n();
    let h = grid.h();
    let values: Vec<f64> = (0..n + 2).map(|k| f.extended(k)).collect();
    pair_scan(&values, h, beta)
}

/// Hölder seminorm over interior node pairs only (no virtual endpoints).
pub fn holder_seminorm_interior(f: &GridFunction, beta: f64) -> f64 {
    pair_scan(f.values(), f.grid().h(), beta)
}

fn pair_scan(values: &[f64], h: f64, beta: f64) -> f64 {
    let m = values.len();
    // |x_i - x_j|^beta depends only on the index gap
    let gap_pow: Vec<f64> = (0..m).map(|k| (k as f64 * h).powf(beta)).collect();
    let mut best = 0.0_f64;
    for i in 0..m {
        let vi = values[i];
        for j in i + 1..m {
            let q = (vi - values[j]).abs() / gap_pow[j - i];
            if q > best {
                best = q;
            }
        }
    }
    best
}
