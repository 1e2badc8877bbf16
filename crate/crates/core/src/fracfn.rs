//! Special functions used throughout the crate.
//!
//! Gamma and log-gamma (Lanczos, g = 7), generalized binomial coefficients and
//! Grünwald-Letnikov weights, the normalizer of the power-law waiting-time law
//! `psi_alpha(n) = d_alpha * n^-(1 + alpha)`, a series Mittag-Leffler function
//! used as an analytic reference for linear problems, and a quadrature
//! evaluator for the Marchaud-Weyl derivative of sampled data.

use std::f64::consts::PI;

use crate::error::{DragonError, Result};

/// A derivative order in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AlphaOrder(f64);

impl AlphaOrder {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value <= 1.0 {
            Ok(Self(value))
        } else {
            Err(DragonError::Domain(format!(
                "derivative order must lie in (0, 1], got {value}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for AlphaOrder {
    type Error = DragonError;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (z - 1)
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    acc
}

/// Gamma function for real arguments away from the poles `0, -1, -2, ...`.
pub fn gamma(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(DragonError::Domain("gamma of NaN".into()));
    }
    if x <= 0.0 && x == x.floor() {
        return Err(DragonError::Domain(format!("gamma has a pole at {x}")));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        PI / ((PI * x).sin() * gamma_unchecked(1.0 - x))
    } else {
        let z = x - 1.0;
        let t = z + LANCZOS_G + 0.5;
        let half = t.powf(0.5 * (z + 0.5));
        (2.0 * PI).sqrt() * half * ((-t).exp() * half) * lanczos_sum(z)
    }
}

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(DragonError::Domain(format!(
            "ln_gamma requires a positive finite argument, got {x}"
        )));
    }
    if x < 0.5 {
        // ln Γ(x) = ln π − ln sin(πx) − ln Γ(1 − x)
        return Ok(PI.ln() - (PI * x).sin().ln() - ln_gamma(1.0 - x)?);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln())
}

/// `|Γ(-α)|` for `α ∈ (0, 1)`, evaluated as `Γ(1 - α) / α`.
pub fn abs_gamma_neg(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(DragonError::Domain(format!(
            "|Γ(-α)| is evaluated for α in (0, 1), got {alpha}"
        )));
    }
    Ok(gamma_unchecked(1.0 - alpha) / alpha)
}

/// Generalized binomial coefficient `C(α, k)` by the product recurrence.
pub fn frac_binomial(alpha: f64, k: usize) -> f64 {
    let mut c = 1.0;
    for j in 1..=k {
        c *= (alpha - j as f64 + 1.0) / j as f64;
    }
    c
}

/// Grünwald-Letnikov weights `(-1)^k C(α, k)` for `k = 0..=n`.
pub fn gl_weights(alpha: f64, n: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n + 1);
    let mut g = 1.0;
    w.push(g);
    for k in 1..=n {
        g *= (k as f64 - 1.0 - alpha) / k as f64;
        w.push(g);
    }
    w
}

// B_2j / (2j)! for j = 1..=6
const BERNOULLI_OVER_FACT: [f64; 6] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30_240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
    -691.0 / 1_307_674_368_000.0,
];

/// Tail `Σ_{k > n} k^{-s}` of the zeta series for `s > 1`.
///
/// Terms up to `max(n, 16)` are summed directly; the remainder uses the
/// Euler-Maclaurin expansion with six Bernoulli corrections, which is
/// accurate to well below `1e-15` relative once the start index is >= 16.
pub fn zeta_tail(s: f64, n: u64) -> Result<f64> {
    if !(s > 1.0) {
        return Err(DragonError::Domain(format!(
            "zeta series diverges for s = {s}"
        )));
    }
    let start = n.max(16) + 1;
    let mut direct = 0.0;
    // sum small terms first
    for k in (n + 1..start).rev() {
        direct += (k as f64).powf(-s);
    }
    let big_n = start as f64;
    let mut em = big_n.powf(1.0 - s) / (s - 1.0) + 0.5 * big_n.powf(-s);
    let mut rising = s; // s (s+1) ... (s + 2j - 2)
    let mut power = big_n.powf(-s - 1.0);
    let n2 = big_n * big_n;
    for (j, b) in BERNOULLI_OVER_FACT.iter().enumerate() {
        em += b * rising * power;
        let j = j as f64 + 1.0;
        rising *= (s + 2.0 * j - 1.0) * (s + 2.0 * j);
        power /= n2;
    }
    Ok(direct + em)
}

/// `ζ(s)` for `s > 1`.
pub fn zeta(s: f64) -> Result<f64> {
    zeta_tail(s, 0)
}

/// Normalizer `d_α = 1 / ζ(1 + α)` making `Σ_{n>=1} d_α n^-(1+α) = 1`.
pub fn waiting_normalizer(alpha: AlphaOrder) -> f64 {
    // s = 1 + α > 1 always holds for a valid order
    1.0 / zeta(1.0 + alpha.value()).expect("1 + alpha > 1")
}

/// Waiting-time probability `ψ_α(n) = d_α n^-(1+α)` for `n >= 1`.
pub fn waiting_prob(alpha: AlphaOrder, normalizer: f64, n: u64) -> f64 {
    debug_assert!(n >= 1);
    normalizer * (n as f64).powf(-(1.0 + alpha.value()))
}

const ML_MAX_TERMS: usize = 10_000;
/// Largest tolerated ratio between the biggest series term and the result.
const ML_CANCELLATION_LIMIT: f64 = 1e8;

/// One-parameter Mittag-Leffler function `E_α(z) = Σ z^k / Γ(αk + 1)` for real `z`.
///
/// Series evaluation only. For large negative `z` the alternating series loses
/// digits to cancellation; when the peak term exceeds the result by more than
/// `1e8` the call fails instead of returning a value with fewer than eight
/// trustworthy digits.
pub fn mittag_leffler(alpha: f64, z: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(DragonError::Domain(format!(
            "Mittag-Leffler order must lie in (0, 1], got {alpha}"
        )));
    }
    if !z.is_finite() {
        return Err(DragonError::Domain(format!("non-finite argument {z}")));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let ln_abs_z = z.abs().ln();
    let negative = z < 0.0;
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    let mut peak = 0.0_f64;
    let mut prev_ln = f64::INFINITY;
    for k in 0..ML_MAX_TERMS {
        let arg = alpha * k as f64 + 1.0;
        let ln_mag = k as f64 * ln_abs_z - ln_gamma(arg)?;
        let mag = if arg < 170.0 && k as f64 * ln_abs_z < 700.0 {
            z.abs().powi(k as i32) / gamma_unchecked(arg)
        } else {
            ln_mag.exp()
        };
        let term = if negative && k % 2 == 1 { -mag } else { mag };
        // Neumaier summation
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        peak = peak.max(mag);
        let decreasing = ln_mag < prev_ln;
        prev_ln = ln_mag;
        if k > 0 && decreasing && mag < 1e-16 * (sum + comp).abs() {
            let value = sum + comp;
            if peak > ML_CANCELLATION_LIMIT * value.abs() {
                return Err(DragonError::Numeric(format!(
                    "Mittag-Leffler series for z = {z} cancels: peak term {peak:.3e} vs result {value:.3e}"
                )));
            }
            return Ok(value);
        }
        if !mag.is_finite() {
            break;
        }
    }
    Err(DragonError::Numeric(format!(
        "Mittag-Leffler series for alpha = {alpha}, z = {z} did not converge"
    )))
}

/// Result of a truncated Marchaud-Weyl quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchaudWeyl {
    /// Estimate of the derivative from history inside the horizon.
    pub value: f64,
    /// Bound on the magnitude of the dropped history beyond the horizon.
    pub tail_bound: f64,
}

/// Piecewise-linear interpolant of sampled data on an increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFn {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SampledFn {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(DragonError::Input(format!(
                "{} sample times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(DragonError::Input("need at least two samples".into()));
        }
        if times.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(DragonError::Input("samples must be finite".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DragonError::Input(
                "sample times must be strictly increasing".into(),
            ));
        }
        Ok(Self { times, values })
    }

    /// Samples `f` on `n + 1` equally spaced points of `[start, end]`.
    pub fn from_fn(start: f64, end: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n == 0 || !(end > start) {
            return Err(DragonError::Input("empty sampling interval".into()));
        }
        let dt = (end - start) / n as f64;
        let times: Vec<f64> = (0..=n)
            .map(|i| if i == n { end } else { start + i as f64 * dt })
            .collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> Option<f64> {
        let first = self.times[0];
        let last = *self.times.last().unwrap();
        if t < first || t > last {
            return None;
        }
        let idx = self.times.partition_point(|&x| x <= t);
        if idx == self.times.len() {
            return Some(*self.values.last().unwrap());
        }
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let (v0, v1) = (self.values[idx - 1], self.values[idx]);
        Some(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
    }
}

/// `∫_{a}^{b} (p + q τ) τ^{-1-α} dτ` for `0 < a < b`, `α ∈ (0, 1)`.
fn linear_kernel_moment(p: f64, q: f64, a: f64, b: f64, alpha: f64) -> f64 {
    p * (a.powf(-alpha) - b.powf(-alpha)) / alpha
        + q * (b.powf(1.0 - alpha) - a.powf(1.0 - alpha)) / (1.0 - alpha)
}

/// Truncated Marchaud-Weyl derivative of sampled data at time `t`.
///
/// The history window is `[t - horizon, t]`. On `[0, eps]` the increment
/// `f(t) - f(t - τ)` is taken as linear in `τ` and integrated in closed form;
/// on `[eps, horizon]` the piecewise-linear interpolant of the samples is
/// integrated exactly against the kernel `τ^{-1-α}`. History older than the
/// horizon is dropped and bounded by `2 sup|f| / (Γ(1 - α) horizon^α)`.
pub fn marchaud_weyl(
    f: &SampledFn,
    alpha: AlphaOrder,
    t: f64,
    horizon: f64,
    eps: f64,
) -> Result<MarchaudWeyl> {
    let a = alpha.value();
    if a >= 1.0 {
        return Err(DragonError::Domain(
            "Marchaud-Weyl quadrature needs alpha < 1".into(),
        ));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(DragonError::Input(format!(
            "history horizon must be positive, got {horizon}"
        )));
    }
    if !(eps > 0.0) || eps >= horizon {
        return Err(DragonError::Input(format!(
            "small-lag cutoff must satisfy 0 < eps < horizon, got {eps}"
        )));
    }
    let ft = f
        .eval(t)
        .ok_or_else(|| DragonError::Input(format!("t = {t} is outside the sampled range")))?;
    let history_start = t - horizon;
    if history_start < f.times()[0] * (1.0 + 1e-14) - 1e-14 {
        return Err(DragonError::Input(format!(
            "samples start at {} but the horizon reaches back to {history_start}",
            f.times()[0]
        )));
    }
    let at_lag = |tau: f64| -> f64 {
        let s = (t - tau).max(f.times()[0]);
        ft - f.eval(s).expect("lag inside sampled range")
    };

    // [0, eps]: f(t) - f(t - τ) ≈ slope · τ
    let slope = at_lag(eps) / eps;
    let mut integral = slope * eps.powf(1.0 - a) / (1.0 - a);

    // breakpoints in lag space: eps, every sample lag in (eps, horizon), horizon
    let mut lags = vec![eps];
    lags.extend(
        f.times()
            .iter()
            .rev()
            .map(|&s| t - s)
            .filter(|&tau| tau > eps && tau < horizon),
    );
    lags.push(horizon);
    let mut g_prev = at_lag(lags[0]);
    for w in lags.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let g_next = at_lag(tb);
        let q = (g_next - g_prev) / (tb - ta);
        let p = g_prev - q * ta;
        integral += linear_kernel_moment(p, q, ta, tb, a);
        g_prev = g_next;
    }

    let g1ma = gamma_unchecked(1.0 - a);
    let sup = f.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(MarchaudWeyl {
        value: a / g1ma * integral,
        tail_bound: 2.0 * sup / (g1ma * horizon.powf(a)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_values() {
        assert_relative_eq!(gamma(1.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(5.0).unwrap(), 24.0, max_relative = 1e-13);
        assert_relative_eq!(gamma(0.5).unwrap(), PI.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(gamma(-0.5).unwrap(), -2.0 * PI.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(
            gamma(10.3).unwrap(),
            716_430.689_062_376_4,
            max_relative = 1e-12
        );
    }

    #[test]
    fn gamma_poles_rejected() {
        for x in [0.0, -1.0, -2.0, -17.0] {
            assert!(matches!(gamma(x), Err(DragonError::Domain(_))));
        }
    }

    #[test]
    fn ln_gamma_matches_gamma() {
        for x in [0.1, 0.5, 1.5, 3.7, 20.0, 150.0] {
            assert_relative_eq!(
                ln_gamma(x).unwrap(),
                gamma(x).unwrap().ln(),
                max_relative = 1e-12,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn abs_gamma_neg_matches_direct() {
        for a in [0.1, 0.3, 0.5, 0.9] {
            assert_relative_eq!(
                abs_gamma_neg(a).unwrap(),
                gamma(-a).unwrap().abs(),
                max_relative = 1e-12
            );
        }
        assert!(abs_gamma_neg(1.0).is_err());
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(frac_binomial(0.5, 0), 1.0);
        assert_eq!(frac_binomial(0.5, 1), 0.5);
        assert_eq!(frac_binomial(0.5, 2), -0.125);
        assert_eq!(frac_binomial(1.0, 2), 0.0);
        let w = gl_weights(0.5, 4);
        for (k, wk) in w.iter().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert_relative_eq!(*wk, sign * frac_binomial(0.5, k), max_relative = 1e-15);
        }
    }

    #[test]
    fn binomial_partial_sums_match_closed_form() {
        // Σ_{k≤n} (-1)^k C(α,k) = Γ(n+1-α) / (Γ(1-α) Γ(n+1))
        for a in [0.2, 0.5, 0.8] {
            let n = 10_000;
            let s: f64 = gl_weights(a, n).iter().sum();
            let exact = (ln_gamma(n as f64 + 1.0 - a).unwrap()
                - ln_gamma(1.0 - a).unwrap()
                - ln_gamma(n as f64 + 1.0).unwrap())
            .exp();
            assert_relative_eq!(s, exact, max_relative = 1e-9);
        }
    }

    #[test]
    fn normalizer_examples() {
        let d1 = waiting_normalizer(AlphaOrder::new(1.0).unwrap());
        assert_relative_eq!(d1, 6.0 / (PI * PI), max_relative = 1e-12);
    }

    #[test]
    fn zeta_rejects_divergent() {
        assert!(zeta(1.0).is_err());
        assert!(zeta(0.5).is_err());
    }

    #[test]
    fn mittag_leffler_basics() {
        assert_eq!(mittag_leffler(0.7, 0.0).unwrap(), 1.0);
        assert_relative_eq!(
            mittag_leffler(1.0, 1.0).unwrap(),
            1f64.exp(),
            max_relative = 1e-13
        );
        assert!(mittag_leffler(0.0, 1.0).is_err());
        assert!(mittag_leffler(1.5, 1.0).is_err());
    }

    #[test]
    fn mittag_leffler_refuses_cancellation() {
        // E_{1/2}(-10) = e^100 erfc(10) ~ 0.056 while the largest term is ~1e42
        assert!(matches!(
            mittag_leffler(0.5, -10.0),
            Err(DragonError::Numeric(_))
        ));
    }

    #[test]
    fn alpha_order_bounds() {
        assert!(AlphaOrder::new(0.0).is_err());
        assert!(AlphaOrder::new(1.0 + 1e-12).is_err());
        assert!(AlphaOrder::new(f64::NAN).is_err());
        assert_eq!(AlphaOrder::new(1.0).unwrap().value(), 1.0);
    }

    #[test]
    fn sampled_fn_rejects_bad_grids() {
        assert!(SampledFn::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(SampledFn::new(vec![0.0, 1.0, 0.5], vec![1.0; 3]).is_err());
        assert!(SampledFn::new(vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn marchaud_weyl_of_constant_is_zero() {
        let f = SampledFn::from_fn(-10.0, 0.0, 1000, |_| 3.0).unwrap();
        let a = AlphaOrder::new(0.4).unwrap();
        let r = marchaud_weyl(&f, a, 0.0, 10.0, 1e-3).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.tail_bound > 0.0);
    }

    #[test]
    fn marchaud_weyl_input_errors() {
        let f = SampledFn::from_fn(-1.0, 0.0, 100, |t| t).unwrap();
        let a = AlphaOrder::new(0.4).unwrap();
        assert!(marchaud_weyl(&f, a, 0.0, 0.0, 1e-3).is_err());
        assert!(marchaud_weyl(&f, a, 0.0, 2.0, 1e-3).is_err());
        assert!(marchaud_weyl(&f, AlphaOrder::new(1.0).unwrap(), 0.0, 1.0, 1e-3).is_err());
    }
}
