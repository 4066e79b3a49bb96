//! Principal Dirichlet eigenpair of the discrete operator and the boundary
//! estimates built on it: domain monotonicity in the shrink parameter, the
//! Hopf-type lower bound `φ >= c d^s`, the negative-power integral and the
//! `C^s` seminorm.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fraclap::FracLapOperator;
use crate::grid::{linf_seminorm_holder, sup_norm, Domain, Grid, GridFunction};
use crate::table::Table;

pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 1000;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub eta: f64,
    pub s: f64,
    pub lambda1: f64,
    /// Positive, sup-normalized eigenvector on the grid of the shrunken domain.
    pub phi1: GridFunction,
    pub residual: f64,
    pub iterations: usize,
}

impl EigenPair {
    pub fn grid(&self) -> &Arc<Grid> {
        self.phi1.grid()
    }

    /// Zero-extended injection onto a parent grid with the same spacing whose
    /// node set contains this pair's nodes.
    pub fn resample_to(&self, parent: &Arc<Grid>) -> Result<GridFunction> {
        let g = self.grid();
        let offset = (g.domain().a() - parent.domain().a()) / parent.h();
        let shift = offset.round();
        if (offset - shift).abs() > 1e-6
            || (g.h() - parent.h()).abs() > 1e-12 * parent.h()
            || shift < 0.0
        {
            return Err(Error::GridMismatch);
        }
        let shift = shift as usize;
        if shift + g.n() > parent.n() {
            return Err(Error::GridMismatch);
        }
        let mut v = vec![0.0; parent.n()];
        v[shift..shift + g.n()].copy_from_slice(self.phi1.values());
        GridFunction::new(parent.clone(), v)
    }

    /// Rayleigh quotient `<Aφ, φ>_h / <φ, φ>_h`.
    pub fn rayleigh(&self, op: &FracLapOperator) -> Result<f64> {
        let a = op.apply(&self.phi1)?;
        let g = self.grid();
        Ok(g.inner(a.values(), self.phi1.values())
            / g.inner(self.phi1.values(), self.phi1.values()))
    }
}

/// Inverse power iteration with one dense Cholesky factorization.
pub fn principal_eigenpair(op: &FracLapOperator, tol: f64) -> Result<EigenPair> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let n = op.n();
    let chol = DMatrix::from_row_slice(n, n, &op.dense_matrix())
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?;
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda_prev = f64::INFINITY;
    let mut change = f64::INFINITY;
    // residual round-off floor of one product with A
    let floor = 64.0 * f64::EPSILON * 2.0 * op.max_diag();
    let mut residual_prev = f64::INFINITY;
    for it in 1..=MAX_ITERS {
        let x = chol.solve(&v);
        v = &x / x.norm();
        let av = op.apply_slice(v.as_slice());
        let lambda: f64 = av.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        change = (lambda - lambda_prev).abs();
        lambda_prev = lambda;
        // residual measured on the sup-normalized vector
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let residual = av
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a - lambda * b).abs())
            .fold(0.0, f64::max)
            / vmax;
        // the floor is accepted only once the residual stops improving
        let stalled = residual < tol * lambda + floor && residual > 0.5 * residual_prev;
        residual_prev = residual;
        if change < tol * lambda.max(1.0) && (residual < tol * lambda || stalled) {
            let sign = if v.sum() < 0.0 { -1.0 } else { 1.0 };
            let phi: Vec<f64> = v.iter().map(|x| sign * x / vmax).collect();
            return Ok(EigenPair {
                eta: 0.0,
                s: op.s(),
                lambda1: lambda,
                phi1: GridFunction::new(op.grid().clone(), phi)?,
                residual,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        iters: MAX_ITERS,
        change,
    })
}

/// Smallest `n >= n_min` for which every shrink parameter is a whole number
/// of grid spacings on `domain`.
pub fn nested_resolution(domain: &Domain, etas: &[f64], n_min: usize) -> Result<usize> {
    let len = domain.length();
    for n in n_min.max(crate::grid::MIN_NODES)..n_min.max(3) * 64 + 4096 {
        let h = len / (n + 1) as f64;
        if etas.iter().all(|&e| on_lattice(e, h)) {
            return Ok(n);
        }
    }
    Err(Error::InvalidArgument(
        "shrink parameters admit no common grid".into(),
    ))
}

fn on_lattice(eta: f64, h: f64) -> bool {
    let m = eta / h;
    (m - m.round()).abs() < 1e-8 * m.max(1.0)
}

/// Principal eigenpairs on `Ω^η` for each `η`, all on grids sharing the
/// spacing of the `n`-node grid of `Ω`.
pub fn eigen_family(
    domain: &Domain,
    s: f64,
    etas: &[f64],
    n: usize,
    tol: f64,
) -> Result<Vec<EigenPair>> {
    if etas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(
            "shrink parameters must be strictly decreasing".into(),
        ));
    }
    let parent = Grid::new(*domain, n)?;
    let h = parent.h();
    let mut jobs = Vec::with_capacity(etas.len());
    for &eta in etas {
        let sub = domain.shrink(eta)?;
        if !on_lattice(eta, h) {
            return Err(Error::EtaOffGrid { eta, h });
        }
        let m = (eta / h).round() as usize;
        if n < 2 * m + crate::grid::MIN_NODES {
            return Err(Error::EtaTooLarge {
                eta,
                max: domain.half_width(),
            });
        }
        jobs.push((eta, sub, n - 2 * m));
    }
    jobs.into_par_iter()
        .map(|(eta, sub, nk)| {
            let op = FracLapOperator::assemble(Arc::new(Grid::new(sub, nk)?), s)?;
            let mut pair = principal_eigenpair(&op, tol)?;
            pair.eta = eta;
            Ok(pair)
        })
        .collect()
}

/// `min φ(x) / d(x)^s` over nodes with `d(x) < collar`.
pub fn hopf_ratio(f: &GridFunction, s: f64, collar: f64) -> Result<f64> {
    let g = f.grid();
    let mut best = f64::INFINITY;
    for (i, &v) in f.values().iter().enumerate() {
        let d = g.dist(i);
        if d < collar {
            best = best.min(v / d.powf(s));
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::EmptyCollar { collar })
    }
}

pub fn hopf_constant(pair: &EigenPair, collar: f64) -> Result<f64> {
    let half = pair.grid().domain().half_width();
    if !(collar > 0.0 && collar < half) {
        return Err(Error::InvalidArgument(format!(
            "collar {collar} must lie in (0, {half})"
        )));
    }
    hopf_ratio(&pair.phi1, pair.s, collar)
}

/// `∫ φ^{-1/(p-1)}` by the trapezoid rule on interior nodes, with the two
/// boundary cells integrated against `φ ≈ c d^s` in closed form.
pub fn inverse_power_integral(pair: &EigenPair, p: f64) -> Result<f64> {
    let s = pair.s;
    if p <= s + 1.0 {
        return Err(Error::DivergentIntegral { p, limit: s + 1.0 });
    }
    let q = 1.0 / (p - 1.0);
    let g = pair.grid();
    let h = g.h();
    let phi = pair.phi1.values();
    let f: Vec<f64> = phi.iter().map(|v| v.powf(-q)).collect();
    let n = f.len();
    let trap = h * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n - 1]));
    let e = 1.0 - s * q;
    let cell = |v: f64| {
        let c = v / h.powf(s);
        c.powf(-q) * h.powf(e) / e
    };
    Ok(trap + cell(phi[0]) + cell(phi[n - 1]))
}

/// `[φ]_{C^s} / λ`.
pub fn holder_bound_check(pair: &EigenPair) -> f64 {
    linf_seminorm_holder(&pair.phi1, pair.s) / pair.lambda1
}

/// Least-squares slope of `log φ` against `log d` over the nodes with
/// `d < collar` (both sides pooled).
pub fn boundary_exponent(pair: &EigenPair, collar: f64) -> Result<f64> {
    let g = pair.grid();
    let pts: Vec<(f64, f64)> = pair
        .phi1
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| g.dist(*i) < collar)
        .map(|(i, &v)| (g.dist(i).ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::EmptyCollar { collar });
    }
    Ok(slope(&pts))
}

pub(crate) fn slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `sup |φ^η - φ|` on the parent grid for every member of a family whose last
/// entry is the unshrunken domain.
pub fn family_sup_gaps(family: &[EigenPair]) -> Result<Vec<f64>> {
    let base = family
        .iter()
        .find(|p| p.eta == 0.0)
        .ok_or_else(|| Error::InvalidArgument("family lacks the eta = 0 member".into()))?;
    let parent = base.grid().clone();
    family
        .iter()
        .map(|p| {
            let r = p.resample_to(&parent)?;
            let diff: Vec<f64> = r
                .values()
                .iter()
                .zip(base.phi1.values())
                .map(|(a, b)| a - b)
                .collect();
            Ok(sup_norm(&diff))
        })
        .collect()
}

pub const SPECTRAL_COLUMNS: [&str; 6] = [
    "eta",
    "lambda1",
    "hopf_c3",
    "inv_power_integral",
    "holder_ratio",
    "residual",
];

/// One row per family member. The collar is measured in the distance to the
/// shrunken boundary; the integral column is NaN when `p <= s + 1`.
pub fn family_table(family: &[EigenPair], p: f64, collar: f64) -> Result<Table> {
    let mut t = Table::new(SPECTRAL_COLUMNS);
    for pair in family {
        let integral = match inverse_power_integral(pair, p) {
            Ok(v) => v,
            Err(Error::DivergentIntegral { .. }) => f64::NAN,
            Err(e) => return Err(e),
        };
        t.push(vec![
            pair.eta,
            pair.lambda1,
            hopf_constant(pair, collar)?,
            integral,
            holder_bound_check(pair),
            pair.residual,
        ]);
    }
    Ok(t)
}
