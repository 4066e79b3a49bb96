//! Boundary barriers for the short-time problem: the exponent window, the
//! sign function `F`, empirical constants for the distance and cone powers,
//! and the supersolution `v_y = λM|x-y|^α + μM d(x)^α`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fraclap::{normalization_constant, quad_pointwise, PointwiseOptions, Tail};
use crate::grid::Domain;
use crate::quad::{integrate, Adaptive};

/// `(√5 - 1)/2`: below this order the exponent window `s+1 < p < s/(1-s)` is empty.
pub const GOLDEN_ORDER: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    /// `p <= 2s`
    Classical,
    /// `2s < p <= s + 1`
    OpenStrip,
    /// `s + 1 < p < s/(1-s)`
    Inside,
    /// `p >= s/(1-s)` (and `p > s + 1`)
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentWindow {
    pub s: f64,
    pub p: f64,
    pub zone: Zone,
    pub window_lo: f64,
    pub window_hi: f64,
    pub window_empty: bool,
}

pub fn validate_exponents(s: f64, p: f64) -> ExponentWindow {
    let lo = s + 1.0;
    let hi = if s < 1.0 {
        s / (1.0 - s)
    } else {
        f64::INFINITY
    };
    let zone = if p <= 2.0 * s {
        Zone::Classical
    } else if p <= lo {
        Zone::OpenStrip
    } else if p < hi {
        Zone::Inside
    } else {
        Zone::Above
    };
    ExponentWindow {
        s,
        p,
        zone,
        window_lo: lo,
        window_hi: hi,
        window_empty: hi <= lo,
    }
}

/// `β* = (p - 2s)/(p - 1)`.
pub fn critical_beta(s: f64, p: f64) -> Result<f64> {
    if p <= 1.0 {
        return Err(Error::BadExponents(format!("p = {p} must exceed 1")));
    }
    Ok((p - 2.0 * s) / (p - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentConfig {
    pub s: f64,
    pub p: f64,
    pub beta: f64,
    pub alpha: f64,
}

impl ExponentConfig {
    /// Checks the full hypotheses: `(s, p)` inside the window and
    /// `β* < α < min(β, s)`.
    pub fn new(s: f64, p: f64, beta: f64, alpha: f64) -> Result<Self> {
        let cfg = Self { s, p, beta, alpha };
        cfg.check_basic()?;
        let w = validate_exponents(s, p);
        if w.zone != Zone::Inside {
            return Err(Error::BadExponents(format!(
                "(s, p) = ({s}, {p}) is outside the window ({}, {})",
                w.window_lo, w.window_hi
            )));
        }
        let bstar = critical_beta(s, p)?;
        if !(alpha > bstar && alpha < beta.min(s)) {
            return Err(Error::BadExponents(format!(
                "need beta* = {bstar} < alpha = {alpha} < min(beta, s) = {}",
                beta.min(s)
            )));
        }
        Ok(cfg)
    }

    /// Only the range conditions the construction itself needs; used for
    /// negative controls outside the hypotheses.
    pub fn unchecked(s: f64, p: f64, beta: f64, alpha: f64) -> Result<Self> {
        let cfg = Self { s, p, beta, alpha };
        cfg.check_basic()?;
        Ok(cfg)
    }

    fn check_basic(&self) -> Result<()> {
        let Self { s, p, beta, alpha } = *self;
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::BadOrder { s });
        }
        if !(p > 1.0) {
            return Err(Error::BadExponents(format!("p = {p} must exceed 1")));
        }
        if !(alpha > 0.0 && alpha < s && alpha < beta && beta <= 1.0) {
            return Err(Error::BadExponents(format!(
                "need 0 < alpha < min(beta, s) and beta <= 1, got alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(())
    }

    /// `p(α - 1) - (α - 2s)`, the collar exponent.
    pub fn collar_exponent(&self) -> f64 {
        self.p * (self.alpha - 1.0) - (self.alpha - 2.0 * self.s)
    }
}

fn binomial(beta: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (beta - j as f64) / (j as f64 + 1.0))
}

/// `F(β) = ∫_ℝ ((1+t)_+^β + (1-t)_+^β - 2) |t|^{-1-2s} dt`, so that
/// `(-Δ)^s (x_+^β) = -(C_{1,s}/2) F(β) x^{β-2s}` for `x > 0`.
///
/// `[0, 1/2]` is summed from the even binomial series term by term,
/// `[1/2, 1]` integrated adaptively, and `[1, ∞)` mapped to `(0, 1]` by `t = 1/u`.
/// Needs `0 < β < 2s`.
pub fn f_of_beta(s: f64, beta: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::BadOrder { s });
    }
    if !(beta > 0.0 && beta < 2.0 * s) {
        return Err(Error::BadExponents(format!(
            "F needs 0 < beta < 2s, got beta = {beta}"
        )));
    }
    let two_s = 2.0 * s;
    let mut series = 0.0;
    for k in 1..200 {
        let e = 2.0 * k as f64 - two_s;
        let term = 2.0 * binomial(beta, 2 * k) * 0.5f64.powf(e) / e;
        series += term;
        if term.abs() < 1e-18 * series.abs().max(1e-300) {
            break;
        }
    }
    let opts = Adaptive {
        abs_tol: 1e-14,
        rel_tol: 1e-13,
        max_panels: 20_000,
    };
    let mid = integrate(
        |t| ((1.0 + t).powf(beta) + (1.0 - t).max(0.0).powf(beta) - 2.0) * t.powf(-1.0 - two_s),
        &[0.5, 0.75, 1.0],
        opts,
    )?;
    let far = integrate(
        |u| (1.0 + u).powf(beta) * u.powf(two_s - beta - 1.0),
        &[0.0, 0.5, 1.0],
        opts,
    )?;
    Ok(2.0 * (series + mid.value + far.value - 1.0 / s))
}

/// Bisection for the sign change of `F(·)` on `[lo, hi]`.
pub fn f_zero(s: f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let fa = f_of_beta(s, a)?;
    let fb = f_of_beta(s, b)?;
    if fa.signum() == fb.signum() {
        return Err(Error::InvalidArgument(format!(
            "F has the same sign at {lo} and {hi}"
        )));
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if f_of_beta(s, m)?.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// `per_decade` log-spaced points on `[lo, hi]`, both ends included.
pub fn log_samples(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let m = ((decades * per_decade as f64).round() as usize).max(1);
    (0..=m)
        .map(|k| lo * 10f64.powf(decades * k as f64 / m as f64))
        .collect()
}

pub const SAMPLES_PER_DECADE: usize = 64;
pub const SAMPLE_DECADES: f64 = 4.0;

/// `(-Δ)^s (d^α)` at distance `d` from the left end of an interval of length `len`.
pub fn dist_power_laplacian(s: f64, alpha: f64, len: f64, d: f64) -> Result<f64> {
    let dom = Domain::new(0.0, len)?;
    let f = |x: f64| dom.dist(x).powf(alpha);
    let half = 0.5 * d;
    let opts = PointwiseOptions::new(half, len, alpha * (1.0 - alpha) * half.powf(alpha - 2.0))
        .breakpoints([d, 0.5 * len - d, len - d]);
    Ok(quad_pointwise(s, f, d, &opts)?.value)
}

/// `(-Δ)^s |·|^α` at `r > 0`.
pub fn cone_laplacian(s: f64, alpha: f64, r: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0 * s) {
        return Err(Error::BadExponents(format!(
            "cone needs 0 < alpha < 2s, got {alpha}"
        )));
    }
    let half = 0.5 * r;
    let opts = PointwiseOptions::new(
        half,
        1e4 * r,
        alpha * (1.0 - alpha).abs() * half.powf(alpha - 2.0),
    )
    .breakpoints([r])
    .tail(Tail::PowerLaw {
        coef: 2.0,
        exponent: alpha,
        constant: 0.0,
    });
    Ok(quad_pointwise(s, |x: f64| x.abs().powf(alpha), r, &opts)?.value)
}

/// Empirical `c_1`: the minimum of `(-Δ)^s(d^α)(x) d(x)^{2s-α}` over
/// log-spaced distances in `[δ 10^{-4}, δ]`.
pub fn lemma31_constant(s: f64, alpha: f64, domain: &Domain, delta: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= s) {
        return Err(Error::BadExponents(format!(
            "need 0 < alpha <= s, got alpha = {alpha}"
        )));
    }
    if !(delta > 0.0 && delta < domain.half_width()) {
        return Err(Error::InvalidArgument(format!(
            "collar {delta} must lie in (0, half width)"
        )));
    }
    let len = domain.length();
    let mut worst = (f64::INFINITY, delta);
    for d in log_samples(
        delta * 10f64.powf(-SAMPLE_DECADES),
        delta,
        SAMPLES_PER_DECADE,
    ) {
        let v = dist_power_laplacian(s, alpha, len, d)? * d.powf(2.0 * s - alpha);
        if v < worst.0 {
            worst = (v, d);
        }
    }
    if worst.0 <= 0.0 {
        return Err(Error::NonPositiveC1 {
            c1: worst.0,
            at: worst.1,
        });
    }
    Ok(worst.0)
}

/// `(-Δ)^s|·|^α(x) x^{2s-α}`; constant in `x` by homogeneity.
pub fn lemma32_profile(s: f64, alpha: f64, x: f64) -> Result<f64> {
    Ok(cone_laplacian(s, alpha, x)? * x.powf(2.0 * s - alpha))
}

/// Empirical `c_2 >= 0`: the largest negative part of the scaled cone
/// profile over `x` in `[10^{-2}, 10^2]`.
pub fn lemma32_constant(s: f64, alpha: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for x in log_samples(1e-2, 1e2, SAMPLES_PER_DECADE) {
        worst = worst.max(-lemma32_profile(s, alpha, x)?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Barrier {
    pub config: ExponentConfig,
    pub domain: Domain,
    pub y: f64,
    pub lambda_coef: f64,
    pub mu_coef: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub delta_collar: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Barrier {
    /// `v_y` at a point given by its distance `r` from `y` and its distance
    /// `d` to the boundary.
    pub fn value_at(&self, r: f64, d: f64) -> f64 {
        let a = self.config.alpha;
        self.lambda_coef * self.m * r.powf(a) + self.mu_coef * self.m * d.powf(a)
    }

    /// `v_y(x)` on the whole line (`d = 0` outside the interval).
    pub fn value(&self, x: f64) -> f64 {
        self.value_at((x - self.y).abs(), self.domain.dist(x))
    }

    /// Same barrier with a rescaled `μ`.
    pub fn with_mu(&self, mu: f64) -> Self {
        Self {
            mu_coef: mu,
            ..*self
        }
    }
}

/// `min(v_a, v_b)`.
pub fn envelope(left: &Barrier, right: &Barrier, x: f64) -> f64 {
    left.value(x).min(right.value(x))
}

/// The constructive coefficient choice: `λ` from the largest distance to `y`,
/// `μ = max(1, 2λc₂/c₁ + 1)`, then `δ` halved until
/// `M^{p-1}(μ+λ)^p δ^{p(α-1)-(α-2s)} < μ c₁/4`.
pub fn build_barrier(cfg: ExponentConfig, domain: Domain, y: f64, m: f64) -> Result<Barrier> {
    if y != domain.a() && y != domain.b() {
        return Err(Error::InvalidArgument(format!(
            "y = {y} is not an endpoint of the domain"
        )));
    }
    if !(m > 0.0) {
        return Err(Error::InvalidArgument(format!("M = {m} must be positive")));
    }
    let ExponentConfig { s, p, beta, alpha } = cfg;
    let len = domain.length();
    let delta0 = (0.25 * len).min(1.0);
    let c1 = lemma31_constant(s, alpha, &domain, delta0)?;
    let c2 = lemma32_constant(s, alpha)?;
    let lambda = len.powf(beta - alpha).max(1.0) * (1.0 + 1e-6);
    let mu = (2.0 * lambda * c2 / c1 + 1.0).max(1.0);
    let e = cfg.collar_exponent();
    let target = (mu * c1 / 4.0).ln();
    let base = (p - 1.0) * m.ln() + p * (mu + lambda).ln();
    let mut delta = delta0;
    while base + e * delta.ln() >= target {
        delta *= 0.5;
        if delta < 1e-300 {
            return Err(Error::CollarCollapse { delta });
        }
    }
    Ok(Barrier {
        config: cfg,
        domain,
        y,
        lambda_coef: lambda,
        mu_coef: mu,
        m,
        delta_collar: delta,
        c1,
        c2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// the end at `y`
    Near,
    /// the opposite end
    Far,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlackSample {
    pub side: Side,
    /// distance to the boundary
    pub d: f64,
    pub x: f64,
    pub laplacian: f64,
    pub gradient_term: f64,
    pub slack: f64,
    /// `slack / (M d^{α-2s})`, to compare with `μ c₁ / 4`
    pub scaled_slack: f64,
    pub dominates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierReport {
    pub s: f64,
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub lambda: f64,
    pub mu: f64,
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
    pub min_slack: f64,
    pub min_scaled_slack: f64,
    pub samples: Vec<SlackSample>,
}

impl BarrierReport {
    pub fn worst(&self) -> Option<&SlackSample> {
        self.samples
            .iter()
            .min_by(|a, b| a.slack.total_cmp(&b.slack))
    }
}

/// Evaluates `(-Δ)^s v_y - |v_y'|^p` and `v_y >= M d^β` at log-spaced
/// distances in `[δ 10^{-4}, δ]` next to both ends. The operator is linear,
/// so the cone and distance parts are integrated separately, each in its own
/// well-conditioned frame.
pub fn supersolution_report(bar: &Barrier) -> Result<BarrierReport> {
    let ExponentConfig { s, p, beta, alpha } = bar.config;
    let len = bar.domain.length();
    let delta = bar.delta_collar;
    let (lam, mu, m) = (bar.lambda_coef, bar.mu_coef, bar.m);
    let inward = if bar.y == bar.domain.a() { 1.0 } else { -1.0 };
    let mut samples = Vec::new();
    for side in [Side::Near, Side::Far] {
        for d in log_samples(
            delta * 10f64.powf(-SAMPLE_DECADES),
            delta,
            SAMPLES_PER_DECADE,
        ) {
            let r = match side {
                Side::Near => d,
                Side::Far => len - d,
            };
            let lap = lam * m * cone_laplacian(s, alpha, r)?
                + mu * m * dist_power_laplacian(s, alpha, len, d)?;
            let cone_slope = lam * m * alpha * r.powf(alpha - 1.0);
            let dist_slope = mu * m * alpha * d.powf(alpha - 1.0);
            let grad = match side {
                Side::Near => cone_slope + dist_slope,
                Side::Far => (dist_slope - cone_slope).abs(),
            };
            let gradient_term = grad.powf(p);
            let slack = lap - gradient_term;
            let x = bar.y + inward * r;
            samples.push(SlackSample {
                side,
                d,
                x,
                laplacian: lap,
                gradient_term,
                slack,
                scaled_slack: slack / (m * d.powf(alpha - 2.0 * s)),
                dominates: bar.value_at(r, d) >= m * d.powf(beta),
            });
        }
    }
    let min_slack = samples
        .iter()
        .map(|s| s.slack)
        .fold(f64::INFINITY, f64::min);
    let min_scaled_slack = samples
        .iter()
        .map(|s| s.scaled_slack)
        .fold(f64::INFINITY, f64::min);
    Ok(BarrierReport {
        s,
        p,
        alpha,
        beta,
        m,
        lambda: lam,
        mu,
        delta,
        c1: bar.c1,
        c2: bar.c2,
        min_slack,
        min_scaled_slack,
        samples,
    })
}

/// [`supersolution_report`], failing on the worst violated sample.
pub fn verify_supersolution(bar: &Barrier) -> Result<BarrierReport> {
    let report = supersolution_report(bar)?;
    if let Some(bad) = report.samples.iter().find(|s| !s.dominates) {
        return Err(Error::SupersolutionViolated {
            slack: bad.slack,
            x: bad.x,
        });
    }
    if let Some(w) = report.worst() {
        if w.slack < 0.0 {
            return Err(Error::SupersolutionViolated {
                slack: w.slack,
                x: w.x,
            });
        }
    }
    Ok(report)
}

/// Limit of the `c_1` profile at the boundary: `-(C_{1,s}/2) F(α)`.
pub fn lemma31_limit(s: f64, alpha: f64) -> Result<f64> {
    Ok(-0.5 * normalization_constant(s)? * f_of_beta(s, alpha)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    /// `(-Δ)^s |x|^α = G |x|^{α-2s}` in closed form.
    fn cone_exact(s: f64, a: f64) -> f64 {
        2f64.powf(2.0 * s) * gamma((1.0 + a) / 2.0) * gamma((2.0 * s - a) / 2.0)
            / (gamma(-a / 2.0) * gamma((1.0 + a - 2.0 * s) / 2.0))
    }

    #[test]
    fn window_classification() {
        let w = validate_exponents(0.75, 2.5);
        assert_eq!(w.zone, Zone::Inside);
        assert!((w.window_lo - 1.75).abs() < 1e-15 && (w.window_hi - 3.0).abs() < 1e-15);
        assert!(validate_exponents(0.5, 1.7).window_empty);
        assert!(validate_exponents(0.6, 1.7).window_empty);
        assert!(!validate_exponents(0.62, 1.7).window_empty);
        assert_eq!(validate_exponents(0.8, 1.5).zone, Zone::Classical);
        assert_eq!(validate_exponents(0.75, 1.7).zone, Zone::OpenStrip);
        assert_eq!(validate_exponents(0.75, 3.5).zone, Zone::Above);
    }

    #[test]
    fn critical_beta_examples() {
        assert!((critical_beta(0.75, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(critical_beta(0.8, 1.6).unwrap(), 0.0);
        let b = critical_beta(0.8, 3.9).unwrap();
        assert!((b - 2.3 / 2.9).abs() < 1e-15 && b < 0.8);
        assert!(critical_beta(0.8, 1.0).is_err());
    }

    #[test]
    fn f_vanishes_at_order_and_matches_closed_form_at_one() {
        for s in [0.65, 0.7, 0.75, 0.8, 0.9] {
            assert!(f_of_beta(s, s).unwrap().abs() < 1e-10, "s={s}");
            let exact = 2.0 * (1.0 / (2.0 * s - 1.0) - 1.0 / (2.0 * s));
            assert!((f_of_beta(s, 1.0).unwrap() - exact).abs() < 1e-10);
        }
        assert!(f_of_beta(0.75, 0.5).unwrap() < 0.0);
    }

    #[test]
    fn f_agrees_with_pointwise_operator() {
        // (-Δ)^s x_+^β at x = 1 through the generic quadrature
        let (s, b) = (0.75, 0.4);
        let opts = PointwiseOptions::new(0.5, 1e6, b * (1.0 - b) * 0.5f64.powf(b - 2.0))
            .breakpoints([1.0])
            .tail(Tail::PowerLaw {
                coef: 1.0,
                exponent: b,
                constant: 0.0,
            });
        let q = quad_pointwise(s, |x: f64| x.max(0.0).powf(b), 1.0, &opts)
            .unwrap()
            .value;
        let via_f = lemma31_limit(s, b).unwrap();
        assert!((q - via_f).abs() < 1e-5 * via_f.abs(), "{q} vs {via_f}");
    }

    #[test]
    fn cone_matches_closed_form() {
        for (s, a) in [
            (0.75, 0.3),
            (0.75, 0.55),
            (0.75, 1.2),
            (0.6, 0.5),
            (0.9, 1.0),
        ] {
            let q = lemma32_profile(s, a, 0.37).unwrap();
            let g = cone_exact(s, a);
            assert!(
                (q - g).abs() < 1e-6 * g.abs().max(1e-3),
                "s={s} a={a}: {q} vs {g}"
            );
        }
        // zero of the profile at α = 2s - 1
        assert!(lemma32_profile(0.75, 0.5, 1.0).unwrap().abs() < 1e-7);
        assert_eq!(lemma32_constant(0.75, 0.3).unwrap(), 0.0);
        let c2 = lemma32_constant(0.75, 0.55).unwrap();
        assert!((c2 + cone_exact(0.75, 0.55)).abs() < 1e-6 * c2);
        // near the integrability edge
        assert!(lemma32_constant(0.75, 1.45).unwrap().is_finite());
    }

    #[test]
    fn distance_power_constant_positive_and_decaying() {
        let d = Domain::unit();
        let mut prev = f64::INFINITY;
        for a in [0.5, 0.6, 0.7, 0.74] {
            let c1 = lemma31_constant(0.75, a, &d, 0.1).unwrap();
            assert!(c1 > 0.0 && c1 < prev, "alpha={a}: {c1}");
            prev = c1;
        }
        assert!(prev < 0.05);
        // at α = s the profile is nearly harmonic at the boundary
        let at_s = dist_power_laplacian(0.75, 0.75, 1.0, 1e-5).unwrap() * 1e-5f64.powf(0.75);
        assert!(at_s.abs() < 1e-2, "{at_s}");
    }

    fn fixture() -> Barrier {
        let cfg = ExponentConfig::new(0.75, 2.0, 0.6, 0.55).unwrap();
        build_barrier(cfg, Domain::unit(), 0.0, 1.0).unwrap()
    }

    #[test]
    fn fixture_barrier_is_supersolution() {
        let bar = fixture();
        assert!(bar.lambda_coef >= 1.0 && bar.mu_coef >= 1.0 && bar.delta_collar <= 1.0);
        let rep = verify_supersolution(&bar).unwrap();
        assert!(rep.min_slack > 0.0);
        assert!(rep.min_scaled_slack >= bar.mu_coef * bar.c1 / 4.0 * (1.0 - 1e-6));
        let bad = bar.with_mu(bar.mu_coef / 100.0);
        assert!(matches!(
            verify_supersolution(&bad),
            Err(Error::SupersolutionViolated { .. })
        ));
    }

    #[test]
    fn right_endpoint_barrier_mirrors_left() {
        let cfg = ExponentConfig::new(0.75, 2.0, 0.6, 0.55).unwrap();
        let left = build_barrier(cfg, Domain::unit(), 0.0, 1.0).unwrap();
        let right = build_barrier(cfg, Domain::unit(), 1.0, 1.0).unwrap();
        assert_eq!(left.delta_collar, right.delta_collar);
        assert_eq!(envelope(&left, &right, 0.0), 0.0);
        assert_eq!(envelope(&left, &right, 1.0), 0.0);
        assert!(envelope(&left, &right, 0.5) > 0.0);
    }

    #[test]
    fn collar_monotone_in_m_and_collapse_below_critical() {
        let cfg = ExponentConfig::new(0.75, 2.0, 0.6, 0.55).unwrap();
        let small = build_barrier(cfg, Domain::unit(), 0.0, 1e-30).unwrap();
        let big = build_barrier(cfg, Domain::unit(), 0.0, 1.0).unwrap();
        assert!(small.delta_collar >= big.delta_collar);
        assert_eq!(small.delta_collar, 0.25);
        let sub = ExponentConfig::unchecked(0.75, 2.0, 0.6, 0.45).unwrap();
        assert!(ExponentConfig::new(0.75, 2.0, 0.6, 0.45).is_err());
        assert!(matches!(
            build_barrier(sub, Domain::unit(), 0.0, 1.0),
            Err(Error::CollarCollapse { .. })
        ));
    }

    #[test]
    fn report_serializes() {
        let rep = supersolution_report(&fixture()).unwrap();
        let v = serde_json::to_value(&rep).unwrap();
        for key in [
            "s",
            "p",
            "alpha",
            "beta",
            "M",
            "lambda",
            "mu",
            "delta",
            "c1",
            "c2",
            "min_slack",
            "samples",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
