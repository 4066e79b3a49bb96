//! Quadratic inf/sup convolutions of space-time grid data.
//!
//! All extrema are exact minimizations over grid nodes and time slices. The
//! quadratic penalty is separable, so the space-time infimum is taken one
//! variable at a time; candidate windows are cut at the radii beyond which
//! the penalty exceeds the oscillation `2 ||f||_∞` of the data.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fraclap::FracLapOperator;
use crate::grid::{sup_norm, Grid};

/// Values `u(x_i, t_k)`, stored slice by slice (row `k` is time `t_k`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeFunction {
    grid: Arc<Grid>,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SpaceTimeFunction {
    pub fn new(grid: Arc<Grid>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::BadTimes(
                "times must be nonempty and strictly increasing".into(),
            ));
        }
        if values.len() != times.len() * grid.n() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                times.len() * grid.n(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("values must be finite".into()));
        }
        Ok(Self {
            grid,
            times,
            values,
        })
    }

    pub fn from_fn(grid: Arc<Grid>, times: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(times.len() * grid.n());
        for &t in &times {
            values.extend(grid.nodes().iter().map(|&x| f(x, t)));
        }
        Self::new(grid, times, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn m(&self) -> usize {
        self.times.len()
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.grid.n();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn at(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.grid.n() + i]
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            grid: self.grid.clone(),
            times: self.times.clone(),
            values,
        }
    }

    /// Largest space difference quotient over all slices.
    pub fn space_lipschitz(&self) -> f64 {
        let h = self.grid.h();
        (0..self.m())
            .flat_map(|k| {
                self.slice(k)
                    .windows(2)
                    .map(move |w| (w[1] - w[0]).abs() / h)
            })
            .fold(0.0, f64::max)
    }

    /// Largest time difference quotient over all nodes.
    pub fn time_lipschitz(&self) -> f64 {
        let mut best = 0.0f64;
        for k in 1..self.m() {
            let dt = self.times[k] - self.times[k - 1];
            for (a, b) in self.slice(k).iter().zip(self.slice(k - 1)) {
                best = best.max((a - b).abs() / dt);
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegParams {
    pub eps: f64,
    pub kappa: f64,
    pub delta: f64,
}

impl RegParams {
    pub fn new(eps: f64, kappa: f64, delta: f64) -> Result<Self> {
        if !(eps > 0.0 && kappa > 0.0 && delta > 0.0) {
            return Err(Error::BadRegParams(format!(
                "eps, kappa, delta must be positive, got {eps}, {kappa}, {delta}"
            )));
        }
        if delta > eps {
            return Err(Error::BadRegParams(format!(
                "delta = {delta} exceeds eps = {eps}"
            )));
        }
        Ok(Self { eps, kappa, delta })
    }
}

/// `2 sqrt(scale ||f||_∞)`: no minimizer lies farther than this.
pub fn search_radius(scale: f64, norm: f64) -> f64 {
    2.0 * (scale * norm).sqrt()
}

#[derive(Clone, Copy)]
enum Extremum {
    Min,
    Max,
}

/// One-dimensional lattice envelope of `f_j ± (x_i - x_j)^2 / (2 scale)`
/// over nodes within `reach` steps.
fn envelope_1d(f: &[f64], h: f64, scale: f64, reach: usize, kind: Extremum, out: &mut [f64]) {
    let n = f.len();
    let c = h * h / (2.0 * scale);
    for i in 0..n {
        let lo = i.saturating_sub(reach);
        let hi = (i + reach).min(n - 1);
        let mut best = f[i];
        for (j, &fj) in f.iter().enumerate().take(hi + 1).skip(lo) {
            let d = i.abs_diff(j) as f64;
            match kind {
                Extremum::Min => best = best.min(fj + c * d * d),
                Extremum::Max => best = best.max(fj - c * d * d),
            }
        }
        out[i] = best;
    }
}

fn reach_steps(radius: f64, h: f64) -> usize {
    (radius / h).floor() as usize + 1
}

fn space_envelope(f: &SpaceTimeFunction, scale: f64, kind: Extremum) -> SpaceTimeFunction {
    let n = f.grid.n();
    let h = f.grid.h();
    let reach = reach_steps(search_radius(scale, f.sup_norm()), h);
    let mut out = vec![0.0; f.values.len()];
    out.par_chunks_mut(n)
        .zip(f.values.par_chunks(n))
        .for_each(|(o, row)| envelope_1d(row, h, scale, reach, kind, o));
    f.with_values(out)
}

/// `min_l g(x, t_l) + |t - t_l|^2 / (2 kappa)`, per node.
fn time_infimum(g: &SpaceTimeFunction, kappa: f64, norm: f64) -> Vec<f64> {
    let n = g.grid.n();
    let m = g.m();
    let radius = search_radius(kappa, norm);
    let t = &g.times;
    let mut out = g.values.clone();
    for k in 0..m {
        let mut lo = k;
        while lo > 0 && t[k] - t[lo - 1] <= radius * (1.0 + 1e-12) {
            lo -= 1;
        }
        let mut hi = k;
        while hi + 1 < m && t[hi + 1] - t[k] <= radius * (1.0 + 1e-12) {
            hi += 1;
        }
        for l in lo..=hi {
            if l == k {
                continue;
            }
            let pen = (t[k] - t[l]).powi(2) / (2.0 * kappa);
            for i in 0..n {
                let cand = g.values[l * n + i] + pen;
                if cand < out[k * n + i] {
                    out[k * n + i] = cand;
                }
            }
        }
    }
    out
}

/// `inf_{(y,s)} f(y,s) + |x-y|^2/(2 eps) + |t-s|^2/(2 kappa)` over all
/// nodes and slices.
pub fn inf_conv(f: &SpaceTimeFunction, eps: f64, kappa: f64) -> Result<SpaceTimeFunction> {
    if !(eps > 0.0 && kappa > 0.0) {
        return Err(Error::BadRegParams(format!("eps = {eps}, kappa = {kappa}")));
    }
    let norm = f.sup_norm();
    let g = space_envelope(f, eps, Extremum::Min);
    let v = time_infimum(&g, kappa, norm);
    Ok(f.with_values(v))
}

/// Space-only inf-convolution of each slice.
pub fn inf_conv_space(f: &SpaceTimeFunction, delta: f64) -> Result<SpaceTimeFunction> {
    if !(delta > 0.0) {
        return Err(Error::BadRegParams(format!("delta = {delta}")));
    }
    Ok(space_envelope(f, delta, Extremum::Min))
}

/// Space-only sup-convolution of each slice.
pub fn sup_conv_space(f: &SpaceTimeFunction, delta: f64) -> Result<SpaceTimeFunction> {
    if !(delta > 0.0) {
        return Err(Error::BadRegParams(format!("delta = {delta}")));
    }
    Ok(space_envelope(f, delta, Extremum::Max))
}

/// `(f_{eps,kappa})_delta` with the intermediate point optimized exactly:
/// for each pair of nodes the penalty is evaluated at the minimizer
/// `z* = (delta y + eps x)/(eps + delta)` of
/// `|z-y|^2/(2 eps) + |x-z|^2/(2 delta)`, which lies between `x` and `y`.
pub fn inf_conv_composed(
    f: &SpaceTimeFunction,
    eps: f64,
    kappa: f64,
    delta: f64,
) -> Result<SpaceTimeFunction> {
    if !(eps > 0.0 && kappa > 0.0 && delta > 0.0) {
        return Err(Error::BadRegParams(format!(
            "eps = {eps}, kappa = {kappa}, delta = {delta}"
        )));
    }
    let norm = f.sup_norm();
    let grid = f.grid.clone();
    let n = grid.n();
    let nodes = grid.nodes();
    let reach = reach_steps(search_radius(eps + delta, norm), grid.h());
    let mut g = vec![0.0; f.values.len()];
    g.par_chunks_mut(n)
        .zip(f.values.par_chunks(n))
        .for_each(|(o, row)| {
            for i in 0..n {
                let x = nodes[i];
                let lo = i.saturating_sub(reach);
                let hi = (i + reach).min(n - 1);
                let mut best = f64::INFINITY;
                for j in lo..=hi {
                    let y = nodes[j];
                    let z = (delta * y + eps * x) / (eps + delta);
                    let pen = (z - y).powi(2) / (2.0 * eps) + (x - z).powi(2) / (2.0 * delta);
                    best = best.min(row[j] + pen);
                }
                o[i] = best;
            }
        });
    let g = f.with_values(g);
    Ok(f.with_values(time_infimum(&g, kappa, norm)))
}

/// `((f_{eps,kappa})_delta)^delta`, checked against `(f_{eps+delta,kappa})^delta`.
pub fn double_regularize(f: &SpaceTimeFunction, params: RegParams) -> Result<SpaceTimeFunction> {
    let RegParams { eps, kappa, delta } = params;
    let left = sup_conv_space(&inf_conv_composed(f, eps, kappa, delta)?, delta)?;
    let right = sup_conv_space(&inf_conv(f, eps + delta, kappa)?, delta)?;
    let tol = 1e-12 * f.sup_norm().max(1.0);
    let gap = left
        .values
        .iter()
        .zip(&right.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if gap > tol {
        return Err(Error::SemigroupViolation { gap, tol });
    }
    Ok(right)
}

/// Space Lipschitz bound for `f_{eps,kappa}` on a grid of spacing `h`:
/// `2 max(||f||, sqrt(||f||)) / sqrt(eps) + h / (2 eps)`.
pub fn lipschitz_bound(norm: f64, scale: f64, step: f64) -> f64 {
    2.0 * norm.max(norm.sqrt()) / scale.sqrt() + step / (2.0 * scale)
}

/// `(min, max)` of the centered second difference over interior nodes of slice `k`.
pub fn second_diff_extremes(f: &SpaceTimeFunction, slice_index: usize) -> Result<(f64, f64)> {
    if slice_index >= f.m() {
        return Err(Error::InvalidArgument(format!(
            "slice {slice_index} out of range (have {})",
            f.m()
        )));
    }
    let d = second_differences(f.slice(slice_index), f.grid.h());
    Ok(d.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        }))
}

/// `(f_{i-1} - 2 f_i + f_{i+1}) / h^2` for `i = 1..n-1`.
pub fn second_differences(f: &[f64], h: f64) -> Vec<f64> {
    f.windows(3)
        .map(|w| (w[0] - 2.0 * w[1] + w[2]) / (h * h))
        .collect()
}

/// `w_t + (-Δ)^s w - |Dw|^p` at interior times, with centered differences in
/// time and space (zero exterior in space).
pub fn supersolution_residual(
    w: &SpaceTimeFunction,
    op: &FracLapOperator,
    p: f64,
) -> Result<SpaceTimeFunction> {
    if **w.grid() != **op.grid() {
        return Err(Error::GridMismatch);
    }
    let m = w.m();
    if m < 3 {
        return Err(Error::BadTimes(format!("need at least 3 slices, have {m}")));
    }
    let n = w.grid.n();
    let h = w.grid.h();
    let ext = |row: &[f64], j: isize| {
        if j < 0 || j >= n as isize {
            0.0
        } else {
            row[j as usize]
        }
    };
    let mut out = Vec::with_capacity((m - 2) * n);
    for k in 1..m - 1 {
        let dt = w.times[k + 1] - w.times[k - 1];
        let row = w.slice(k);
        let lap = op.apply_slice(row);
        for i in 0..n {
            let wt = (w.at(k + 1, i) - w.at(k - 1, i)) / dt;
            let grad = (ext(row, i as isize + 1) - ext(row, i as isize - 1)) / (2.0 * h);
            out.push(wt + lap[i] - grad.abs().powf(p));
        }
    }
    SpaceTimeFunction::new(w.grid.clone(), w.times[1..m - 1].to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Domain;
    use proptest::prelude::*;

    fn grid(n: usize) -> Arc<Grid> {
        Arc::new(Grid::new(Domain::unit(), n).unwrap())
    }

    fn times(m: usize) -> Vec<f64> {
        (0..m).map(|k| k as f64 / (m - 1) as f64).collect()
    }

    /// exhaustive oracle without windows or separability
    fn brute_inf(f: &SpaceTimeFunction, eps: f64, kappa: f64) -> Vec<f64> {
        let g = f.grid();
        let (n, m) = (g.n(), f.m());
        let mut out = vec![0.0; n * m];
        for k in 0..m {
            for i in 0..n {
                let mut best = f64::INFINITY;
                for l in 0..m {
                    for j in 0..n {
                        let v = f.at(l, j)
                            + (g.node(i) - g.node(j)).powi(2) / (2.0 * eps)
                            + (f.times()[k] - f.times()[l]).powi(2) / (2.0 * kappa);
                        best = best.min(v);
                    }
                }
                out[k * n + i] = best;
            }
        }
        out
    }

    #[test]
    fn constant_fixed_point() {
        let f = SpaceTimeFunction::from_fn(grid(20), times(5), |_, _| 0.7).unwrap();
        for v in inf_conv(&f, 0.01, 0.01).unwrap().values() {
            assert!((v - 0.7).abs() < 1e-15);
        }
        for v in sup_conv_space(&f, 0.01).unwrap().values() {
            assert!((v - 0.7).abs() < 1e-15);
        }
        let z = SpaceTimeFunction::from_fn(grid(20), times(5), |_, _| 0.0).unwrap();
        let w = double_regularize(&z, RegParams::new(0.01, 0.01, 0.005).unwrap()).unwrap();
        assert!(w.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_brute_force() {
        let f = SpaceTimeFunction::from_fn(grid(30), times(9), |x, t| {
            (7.0 * x + 3.0 * t).sin() + x * t
        })
        .unwrap();
        let fast = inf_conv(&f, 0.003, 0.02).unwrap();
        let slow = brute_inf(&f, 0.003, 0.02);
        for (a, b) in fast.values().iter().zip(&slow) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn moreau_envelope_of_cone() {
        // frozen in time, kappa huge
        let x0 = 0.5;
        let eps = 0.01;
        let f = SpaceTimeFunction::from_fn(grid(199), times(3), |x, _| (x - x0).abs()).unwrap();
        let v = inf_conv(&f, eps, 1e12).unwrap();
        let g = f.grid();
        for i in 0..g.n() {
            let d = (g.node(i) - x0).abs();
            let exact = if d <= eps {
                d * d / (2.0 * eps)
            } else {
                d - eps / 2.0
            };
            // lattice minimizers sit within h of the continuum ones
            assert!(
                v.at(1, i) - exact >= -1e-14
                    && v.at(1, i) - exact <= g.h() * g.h() / (2.0 * eps) + 1e-14
            );
        }
    }

    #[test]
    fn opening_of_hat_has_parabolic_cap() {
        let (x0, delta) = (0.5, 0.05);
        let f =
            SpaceTimeFunction::from_fn(grid(399), times(1), |x, _| 1.0 - (x - x0).abs()).unwrap();
        let w = sup_conv_space(&inf_conv_space(&f, delta).unwrap(), delta).unwrap();
        let g = f.grid();
        let h = g.h();
        for i in 0..g.n() {
            let d = (g.node(i) - x0).abs();
            let exact = if d < delta {
                1.0 - delta / 2.0 - d * d / (2.0 * delta)
            } else {
                1.0 - d
            };
            assert!((w.at(0, i) - exact).abs() < 2.0 * h, "i={i}");
        }
        let sd = second_differences(w.slice(0), h);
        for (k, v) in sd.iter().enumerate() {
            let d = (g.node(k + 1) - x0).abs();
            if d < delta - 3.0 * h {
                assert!((v + 1.0 / delta).abs() < 1e-6 / delta, "{v}");
            }
        }
    }

    #[test]
    fn semigroup_composition_matches_direct() {
        let f = SpaceTimeFunction::from_fn(grid(80), times(11), |x, t| (5.0 * x).cos() * (1.0 + t))
            .unwrap();
        let a = inf_conv_composed(&f, 0.004, 0.01, 0.001).unwrap();
        let b = inf_conv(&f, 0.005, 0.01).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-13);
        }
        // restricting the intermediate point to nodes can only raise the value
        let lattice = inf_conv_space(&inf_conv(&f, 0.004, 0.01).unwrap(), 0.001).unwrap();
        for (x, y) in lattice.values().iter().zip(b.values()) {
            assert!(*x >= y - 1e-14);
        }
    }

    #[test]
    fn uniform_convergence_with_modulus_rate() {
        // Lipschitz data: |f_{eps,kappa} - f| <= Lx eps* + Lt kappa*
        let f = SpaceTimeFunction::from_fn(grid(200), times(41), |x, t| {
            (1.0 - (2.0 * x - 1.0).abs()) * (1.0 + t)
        })
        .unwrap();
        let (lx, lt) = (4.0, 1.0);
        let norm = f.sup_norm();
        let mut prev = f64::INFINITY;
        for scale in [1e-2, 1e-3, 1e-4, 1e-5] {
            let v = inf_conv(&f, scale, scale).unwrap();
            let gap = v
                .values()
                .iter()
                .zip(f.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let bound = lx * search_radius(scale, norm) + lt * search_radius(scale, norm);
            assert!(
                gap <= bound && gap <= prev,
                "scale={scale}: {gap} vs {bound}"
            );
            prev = gap;
        }
        // lattice resolution reached: the envelope is the identity
        assert_eq!(prev, 0.0);
    }

    #[test]
    fn opening_preserves_semiconcavity() {
        let eps = 2e-3;
        let f = SpaceTimeFunction::from_fn(grid(300), times(3), |x, t| {
            (9.0 * x + t).sin() + 0.5 * (23.0 * x).cos() - (x - 0.4).abs()
        })
        .unwrap();
        let u = inf_conv(&f, eps, 1e-3).unwrap();
        let h = u.grid().h();
        for delta in [eps / 2.0, eps / 10.0] {
            let w = sup_conv_space(&inf_conv_space(&u, delta).unwrap(), delta).unwrap();
            let margin = reach_steps(search_radius(delta, u.sup_norm()), h);
            for k in 0..w.m() {
                let (_, before) = second_diff_extremes(&u, k).unwrap();
                assert!(before <= 1.0 / eps * (1.0 + 1e-9));
                let sd = second_differences(w.slice(k), h);
                let inner = &sd[margin..sd.len() - margin];
                let hi = inner.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                assert!(
                    hi <= 1.0 / eps * (1.0 + 1e-9),
                    "delta={delta}: {hi} vs {}",
                    1.0 / eps
                );
            }
        }
    }

    #[test]
    fn reg_params_validated() {
        assert!(RegParams::new(0.01, 0.01, 0.02).is_err());
        assert!(RegParams::new(0.0, 0.01, 0.0).is_err());
        assert!(RegParams::new(0.01, 0.01, 0.01).is_ok());
    }

    #[test]
    fn negative_control_decreasing_in_time() {
        let g = grid(40);
        let op = FracLapOperator::assemble(g.clone(), 0.75).unwrap();
        let w = SpaceTimeFunction::from_fn(g, times(6), |_, t| -t).unwrap();
        let r = supersolution_residual(&w, &op, 2.0).unwrap();
        assert!(r.values().iter().all(|&v| v <= -1.0));
        // at t = 0 the grid function vanishes and the residual is exactly -1
        let w0 = SpaceTimeFunction::new(
            w.grid().clone(),
            vec![-1.0, 0.0, 1.0],
            [vec![1.0; 40], vec![0.0; 40], vec![-1.0; 40]].concat(),
        )
        .unwrap();
        let r0 = supersolution_residual(&w0, &op, 2.0).unwrap();
        assert!(r0.values().iter().all(|&v| v == -1.0));
    }

    fn field(n: usize, m: usize, seed: &[f64]) -> SpaceTimeFunction {
        SpaceTimeFunction::from_fn(grid(n), times(m), |x, t| {
            seed.iter()
                .enumerate()
                .map(|(k, a)| a * ((k as f64 + 1.0) * (3.0 * x + 2.0 * t)).sin())
                .sum()
        })
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn bounds_and_order(seed in prop::collection::vec(-1.0f64..1.0, 4), shift in 0.0f64..0.5,
                            eps in 1e-4f64..1e-2, kappa in 1e-4f64..1e-1) {
            let f = field(40, 7, &seed);
            let g = f.with_values(f.values().iter().map(|v| v + shift).collect());
            let fi = inf_conv(&f, eps, kappa).unwrap();
            let gi = inf_conv(&g, eps, kappa).unwrap();
            let fs = sup_conv_space(&f, eps).unwrap();
            for k in 0..f.values().len() {
                prop_assert!(fi.values()[k] <= f.values()[k] + 1e-15);
                prop_assert!(fi.values()[k] >= f.min() - 1e-15);
                prop_assert!(fs.values()[k] >= f.values()[k] - 1e-15);
                prop_assert!(fs.values()[k] <= f.max() + 1e-15);
                prop_assert!(fi.values()[k] <= gi.values()[k] + 1e-15);
            }
        }

        #[test]
        fn lipschitz_and_semiconcavity(seed in prop::collection::vec(-2.0f64..2.0, 4),
                                       eps in 1e-4f64..1e-2, kappa in 1e-4f64..1e-1) {
            let f = field(60, 9, &seed);
            let fi = inf_conv(&f, eps, kappa).unwrap();
            let norm = f.sup_norm();
            let dt = f.times()[1] - f.times()[0];
            prop_assert!(fi.space_lipschitz() <= lipschitz_bound(norm, eps, f.grid().h()) + 1e-9);
            prop_assert!(fi.time_lipschitz() <= lipschitz_bound(norm, kappa, dt) + 1e-9);
            for k in 0..fi.m() {
                let (_, hi) = second_diff_extremes(&fi, k).unwrap();
                prop_assert!(hi <= 1.0 / eps * (1.0 + 1e-9));
            }
        }

        #[test]
        fn iterated_inequality(seed in prop::collection::vec(-1.0f64..1.0, 4),
                               eps in 1e-3f64..1e-2, frac in 0.05f64..1.0) {
            let f = field(50, 6, &seed);
            let delta = eps * frac;
            let p = RegParams::new(eps, 0.01, delta).unwrap();
            let w = double_regularize(&f, p).unwrap();
            let u = inf_conv(&f, eps, 0.01).unwrap();
            for (a, b) in w.values().iter().zip(u.values()) {
                prop_assert!(*a <= b + 1e-14);
            }
        }
    }
}
