//! The one-dimensional fractional Laplacian with zero exterior data.
//!
//! The grid operator integrates the kernel `|z|^{-1-2s}` exactly against the
//! piecewise-linear interpolant of the grid function (extended by zero past
//! the endpoints). In the cell adjacent to the singularity the symmetric
//! second difference `u(x+z) + u(x-z) - 2u(x)` is modelled as `w_1 z^2/h^2`,
//! with a weight chosen so that Taylor-quadratic data is reproduced exactly;
//! this removes the `O(h^{2-2s})` error of plain linear interpolation.
//!
//! Every row of the resulting matrix has the same total mass, and the mass
//! carried by the nodes outside the interval becomes the exterior part of the
//! diagonal.

use std::sync::Arc;

use rayon::prelude::*;
use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::quad::{gauss_legendre, integrate, Adaptive};

pub fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::BadOrder { s })
    }
}

/// `C_{1,s} = 4^s Γ(1/2 + s) s / (√π Γ(1 - s))`.
pub fn normalization_constant(s: f64) -> Result<f64> {
    check_order(s)?;
    Ok(4f64.powf(s) * gamma(0.5 + s) * s / (std::f64::consts::PI.sqrt() * gamma(1.0 - s)))
}

/// `(-Δ)^s (1 - x^2)_+^s = 4^s Γ(s + 1/2) Γ(s + 1) / √π` on `(-1, 1)`.
pub fn getoor_constant(s: f64) -> f64 {
    4f64.powf(s) * gamma(s + 0.5) * gamma(s + 1.0) / std::f64::consts::PI.sqrt()
}

const CELL_RULE: usize = 16;

/// Dimensionless stencil of the operator: `c[k]` is the weight attached to
/// the node at distance `k h` (index 0 unused), and `tail(m)` is
/// `sum_{k >= m} c[k]`, both in units of `h^{-2s}`.
#[derive(Debug, Clone)]
pub struct Stencil {
    s: f64,
    c: Vec<f64>,
    near: f64,
}

struct CellRule {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl CellRule {
    fn new() -> Self {
        let (x, w) = gauss_legendre(CELL_RULE);
        // mapped to [0, 1]
        Self {
            x: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
            w: w.iter().map(|w| 0.5 * w).collect(),
        }
    }

    /// `∫_0^1 g(τ) (k + τ)^{-1-2s} dτ`.
    fn cell(&self, s: f64, k: f64, g: impl Fn(f64) -> f64) -> f64 {
        self.x
            .iter()
            .zip(&self.w)
            .map(|(&t, &w)| w * g(t) * (k + t).powf(-1.0 - 2.0 * s))
            .sum()
    }
}

/// Cells summed explicitly before the asymptotic tail takes over.
const BUBBLE_CELLS: usize = 4096;

impl Stencil {
    pub fn new(s: f64, kmax: usize) -> Result<Self> {
        check_order(s)?;
        let rule = CellRule::new();
        // e = sum_k ∫_k^{k+1} (t-k)(k+1-t) t^{-1-2s} dt: linear-interpolation
        // excess on z^2, subtracted from the first cell.
        let mut bubble = 0.0;
        for k in (1..BUBBLE_CELLS).rev() {
            bubble += rule.cell(s, k as f64, |t| t * (1.0 - t));
        }
        let big_k = BUBBLE_CELLS as f64;
        bubble += big_k.powf(-2.0 * s) / (12.0 * s)
            - (1.0 + 2.0 * s) * big_k.powf(-2.0 - 2.0 * s) / 360.0;
        let near = 1.0 / (2.0 - 2.0 * s) - bubble;

        let rising = |k: usize| rule.cell(s, k as f64, |t| t); // ∫_k^{k+1} (t-k) t^{-1-2s}
        let falling = |k: usize| rule.cell(s, k as f64, |t| 1.0 - t); // ∫_k^{k+1} (k+1-t) t^{-1-2s}
        let mut c = vec![0.0; kmax + 1];
        let vals: Vec<f64> = (1..=kmax)
            .into_par_iter()
            .map(|k| {
                if k == 1 {
                    near + falling(1)
                } else {
                    rising(k - 1) + falling(k)
                }
            })
            .collect();
        c[1..].copy_from_slice(&vals);
        Ok(Self { s, c, near })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.c[k]
    }

    pub fn near_cell(&self) -> f64 {
        self.near
    }

    /// `sum_{k >= m} c[k]` in closed form.
    pub fn tail(&self, m: usize) -> f64 {
        let s = self.s;
        if m <= 1 {
            return self.near + 1.0 / (2.0 * s);
        }
        let rule = CellRule::new();
        rule.cell(s, (m - 1) as f64, |t| t) + (m as f64).powf(-2.0 * s) / (2.0 * s)
    }
}

/// Dense discretization of `(-Δ)^s` on one grid.
pub struct FracLapOperator {
    grid: Arc<Grid>,
    s: f64,
    normalization: f64,
    /// row-major `n x n`, zero diagonal
    weights: Vec<f64>,
    diag: Vec<f64>,
    exterior: Vec<f64>,
    stencil: Stencil,
    fft: Arc<FftKernel>,
}

struct FftKernel {
    len: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    spectrum: Vec<Complex<f64>>,
}

impl std::fmt::Debug for FracLapOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FracLapOperator")
            .field("n", &self.grid.n())
            .field("s", &self.s)
            .field("normalization", &self.normalization)
            .finish()
    }
}

impl FracLapOperator {
    pub fn assemble(grid: Arc<Grid>, s: f64) -> Result<Self> {
        let normalization = normalization_constant(s)?;
        let n = grid.n();
        let stencil = Stencil::new(s, n + 1)?;
        let scale = normalization * grid.h().powf(-2.0 * s);
        let toeplitz: Vec<f64> = (0..=n)
            .map(|k| {
                if k == 0 {
                    0.0
                } else {
                    -scale * stencil.weight(k)
                }
            })
            .collect();
        let mut weights = vec![0.0; n * n];
        weights.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, w) in row.iter_mut().enumerate() {
                *w = toeplitz[i.abs_diff(j)];
            }
        });
        let diag = vec![2.0 * scale * stencil.tail(1); n];
        let rule_tail: Vec<f64> = (1..=n).map(|m| stencil.tail(m)).collect();
        let exterior = (0..n)
            .map(|i| scale * (rule_tail[i] + rule_tail[n - 1 - i]))
            .collect();
        let fft = Arc::new(FftKernel::new(&toeplitz, n));
        Ok(Self {
            grid,
            s,
            normalization,
            weights,
            diag,
            exterior,
            stencil,
            fft,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n() + j]
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn max_diag(&self) -> f64 {
        self.diag.iter().copied().fold(0.0, f64::max)
    }

    /// Part of `diag` carried by the nodes outside the interval.
    pub fn exterior_mass(&self) -> &[f64] {
        &self.exterior
    }

    /// Full matrix (diagonal included), row-major.
    pub fn dense_matrix(&self) -> Vec<f64> {
        let n = self.n();
        let mut m = self.weights.clone();
        for i in 0..n {
            m[i * n + i] = self.diag[i];
        }
        m
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        if *f.grid().as_ref() == *self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check(f)?;
        let out = self.apply_slice(f.values());
        GridFunction::new(self.grid.clone(), out)
    }

    /// Row-by-row dense product.
    pub fn apply_slice(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(u.len(), n);
        let row = |i: usize| {
            let w = &self.weights[i * n..(i + 1) * n];
            let off: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
            off + self.diag[i] * u[i]
        };
        if n >= 512 {
            (0..n).into_par_iter().map(row).collect()
        } else {
            (0..n).map(row).collect()
        }
    }

    /// Evaluates the symmetric second-difference form
    /// `-C sum_k c_k (u_{i+k} + u_{i-k} - 2u_i)` with the all-exterior tail
    /// summed in closed form.
    pub fn apply_symmetric_form(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check(f)?;
        let n = self.n();
        let u = f.values();
        let scale = self.normalization * self.grid.h().powf(-2.0 * self.s);
        let at = |j: isize| -> f64 {
            if j < 0 || j >= n as isize {
                0.0
            } else {
                u[j as usize]
            }
        };
        let out = (0..n)
            .map(|i| {
                let reach = (i + 1).max(n - i);
                let ui = u[i];
                let mut acc = 0.0;
                for k in 1..=reach {
                    let w = at(i as isize + k as isize) + at(i as isize - k as isize) - 2.0 * ui;
                    acc += self.stencil.weight(k) * w;
                }
                acc -= 2.0 * ui * self.stencil.tail(reach + 1);
                -scale * acc
            })
            .collect();
        GridFunction::new(self.grid.clone(), out)
    }

    /// FFT-backed evaluator for repeated products (time stepping).
    pub fn fast(&self) -> FastApply {
        FastApply::new(self)
    }
}

impl FftKernel {
    fn new(toeplitz: &[f64], n: usize) -> Self {
        let len = (2 * n).next_power_of_two();
        let mut planner = RealFftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        // circulant embedding of the symmetric Toeplitz off-diagonal part
        let mut col = vec![0.0; len];
        for k in 1..n {
            col[k] = toeplitz[k];
            col[len - k] = toeplitz[k];
        }
        let mut spectrum = forward.make_output_vec();
        forward
            .process(&mut col, &mut spectrum)
            .expect("buffer lengths match the plan");
        let inv_len = 1.0 / len as f64;
        for c in &mut spectrum {
            *c *= inv_len;
        }
        Self {
            len,
            forward,
            inverse,
            spectrum,
        }
    }
}

/// Reusable buffers for O(n log n) operator products.
pub struct FastApply {
    kernel: Arc<FftKernel>,
    diag: f64,
    n: usize,
    real: Vec<f64>,
    freq: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl FastApply {
    fn new(op: &FracLapOperator) -> Self {
        let kernel = op.fft.clone();
        let scratch_len = kernel
            .forward
            .get_scratch_len()
            .max(kernel.inverse.get_scratch_len());
        Self {
            diag: op.diag[0],
            n: op.n(),
            real: vec![0.0; kernel.len],
            freq: kernel.forward.make_output_vec(),
            scratch: vec![Complex::new(0.0, 0.0); scratch_len],
            kernel,
        }
    }

    pub fn apply(&mut self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        self.real[..n].copy_from_slice(&u[..n]);
        self.real[n..].fill(0.0);
        let k = &self.kernel;
        k.forward
            .process_with_scratch(&mut self.real, &mut self.freq, &mut self.scratch)
            .expect("buffer lengths match the plan");
        for (b, c) in self.freq.iter_mut().zip(&k.spectrum) {
            *b *= c;
        }
        // the DC and Nyquist bins of a real signal's transform are real
        self.freq[0].im = 0.0;
        self.freq[k.len / 2].im = 0.0;
        k.inverse
            .process_with_scratch(&mut self.freq, &mut self.real, &mut self.scratch)
            .expect("buffer lengths match the plan");
        for i in 0..n {
            out[i] = self.real[i] + self.diag * u[i];
        }
    }
}

/// Behaviour of `f(x+z) + f(x-z)` beyond the outer radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    /// The sum is the given constant.
    Constant(f64),
    /// The sum is `coef * z^exponent + constant` (needs `exponent < 2s`).
    PowerLaw {
        coef: f64,
        exponent: f64,
        constant: f64,
    },
}

/// Options for [`quad_pointwise`].
#[derive(Debug, Clone)]
pub struct PointwiseOptions {
    /// `f` is smooth on `(x - inner_radius, x + inner_radius)`.
    pub inner_radius: f64,
    /// Radius beyond which `tail` describes `f(x+z) + f(x-z)` exactly.
    pub outer_radius: f64,
    /// Bound on `|f''|` inside the inner radius.
    pub second_deriv_bound: f64,
    pub tol: f64,
    /// Offsets `z > 0` where `f(x ± z)` has a kink or singularity.
    pub breakpoints: Vec<f64>,
    pub tail: Tail,
    pub max_panels: usize,
}

impl PointwiseOptions {
    pub fn new(inner_radius: f64, outer_radius: f64, second_deriv_bound: f64) -> Self {
        Self {
            inner_radius,
            outer_radius,
            second_deriv_bound,
            tol: 1e-8,
            breakpoints: Vec::new(),
            tail: Tail::Constant(0.0),
            max_panels: 20_000,
        }
    }

    pub fn breakpoints(mut self, b: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(b);
        self
    }

    pub fn tail(mut self, tail: Tail) -> Self {
        self.tail = tail;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PointwiseValue {
    pub value: f64,
    pub error_estimate: f64,
    /// `C_{1,s} |f''|_max r0^{2-2s} / (2-2s)`: bounds the whole singular cell.
    pub remainder_bound: f64,
    pub r0: f64,
}

/// Evaluates `(-Δ)^s f(x)` for a closed-form `f` on the whole line.
///
/// Splits the symmetric form at `r0 < inner_radius` and `outer_radius`:
/// the singular cell uses the even Taylor model `a z^2 + b z^4` fitted to the
/// second differences at `r0` and `r0/2`; the band is integrated adaptively in
/// `log z`; the tail is integrated exactly against the given asymptotics.
pub fn quad_pointwise(
    s: f64,
    f: impl Fn(f64) -> f64,
    x: f64,
    opts: &PointwiseOptions,
) -> Result<PointwiseValue> {
    check_order(s)?;
    let c = normalization_constant(s)?;
    let inner = opts.inner_radius;
    let outer = opts.outer_radius;
    if !(inner > 0.0 && outer > inner) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < inner_radius < outer_radius, got {inner}, {outer}"
        )));
    }
    let fx = f(x);
    let w = |z: f64| f(x + z) + f(x - z) - 2.0 * fx;
    let two_s = 2.0 * s;

    let tail_sum_at_outer = match opts.tail {
        Tail::Constant(k) => k,
        Tail::PowerLaw {
            coef,
            exponent,
            constant,
        } => coef * outer.powf(exponent) + constant,
    };
    let mut scale = fx
        .abs()
        .max(w(inner).abs())
        .max((tail_sum_at_outer - 2.0 * fx).abs() * 0.5);
    scale *= inner.powf(-two_s);
    let abs_tol = if scale > 0.0 {
        opts.tol * scale
    } else {
        opts.tol
    };

    // singular cell
    let mut r0 = inner / 64.0;
    let (mut singular, mut singular_err);
    let mut halvings = 0;
    loop {
        let w1 = w(r0);
        let w2 = w(0.5 * r0);
        let b = (w1 - 4.0 * w2) / (0.75 * r0.powi(4));
        let a = (w1 - b * r0.powi(4)) / (r0 * r0);
        let quad_part = a * r0.powf(2.0 - two_s) / (2.0 - two_s);
        let quart_part = b * r0.powf(4.0 - two_s) / (4.0 - two_s);
        singular = quad_part + quart_part;
        singular_err = quart_part.abs() / 16.0 + f64::EPSILON * fx.abs() * r0.powf(-two_s) * 64.0;
        if singular_err <= 0.1 * abs_tol.max(opts.tol * singular.abs()) || halvings >= 12 {
            break;
        }
        r0 *= 0.5;
        halvings += 1;
    }

    // band, in v = ln z
    let (lo, hi) = (r0.ln(), outer.ln());
    let mut breaks = vec![lo];
    let mut pts: Vec<f64> = opts
        .breakpoints
        .iter()
        .copied()
        .filter(|&z| z > r0 && z < outer)
        .map(f64::ln)
        .collect();
    let mut v = lo + 2.0;
    while v < hi {
        pts.push(v);
        v += 2.0;
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    breaks.extend(pts);
    breaks.push(hi);
    let band = integrate(
        |v| {
            let z = v.exp();
            w(z) * (-two_s * v).exp()
        },
        &breaks,
        Adaptive {
            abs_tol: 0.5 * abs_tol,
            rel_tol: 0.5 * opts.tol,
            max_panels: opts.max_panels,
        },
    )?;

    let tail = match opts.tail {
        Tail::Constant(k) => (k - 2.0 * fx) * outer.powf(-two_s) / two_s,
        Tail::PowerLaw {
            coef,
            exponent,
            constant,
        } => {
            if exponent >= two_s {
                return Err(Error::InvalidArgument(format!(
                    "tail exponent {exponent} must be below 2s = {two_s}"
                )));
            }
            coef * outer.powf(exponent - two_s) / (two_s - exponent)
                + (constant - 2.0 * fx) * outer.powf(-two_s) / two_s
        }
    };

    let total = singular + band.value + tail;
    let err = singular_err + band.error;
    let target = abs_tol.max(opts.tol * total.abs());
    if err > target {
        return Err(Error::QuadratureNoConverge {
            tol: target,
            err,
            panels: band.panels,
        });
    }
    Ok(PointwiseValue {
        value: -c * total,
        error_estimate: c * err,
        remainder_bound: c * opts.second_deriv_bound * r0.powf(2.0 - two_s) / (2.0 - two_s),
        r0,
    })
}
