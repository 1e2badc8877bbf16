//! Time steppers for multi-term Caputo equations `Σ_j w_j D^{α_j} X = F(t, X)`
//! with orders in `(0, 1]` and initial value `X(0) = X0`.
//!
//! Two backends are provided:
//!
//! * **Strategy I**: rational orders are rewritten as a chain of equations of
//!   a single order `γ = 1/M` (`M` the lcm of the order denominators) and the
//!   chain is integrated with the fractional Adams-Bashforth predictor.
//! * **Grünwald-Letnikov**: each `D^{α_j}` is replaced by its GL sum and the
//!   resulting explicit recursion is marched with the drift lagged one step.
//!
//! Both cache the history they need, so each solve evaluates `F` exactly once
//! per step and costs `O(E·C + E²)` for `E` steps.

use serde::{Deserialize, Serialize};

use crate::error::{input, DragonError, Result};
use crate::fracfn::{gamma, gl_weights, AlphaOrder};
use crate::measure::MultiTermSpec;

/// Right-hand side `F(t, X)` writing into `out` (same length as `x`).
pub trait Dynamics {
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]);
}

impl<F> Dynamics for F
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self(t, x, out)
    }
}

/// Solver backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Chain conversion plus fractional Adams-Bashforth predictor.
    Strategy1,
    /// Grünwald-Letnikov recursion.
    Gl,
    /// Adams-Bashforth predictor applied directly to a single-order problem.
    Abm,
}

impl std::str::FromStr for Backend {
    type Err = DragonError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strategy1" => Ok(Backend::Strategy1),
            "gl" => Ok(Backend::Gl),
            "abm" => Ok(Backend::Abm),
            other => input(format!(
                "unknown backend `{other}` (expected strategy1, gl or abm)"
            )),
        }
    }
}

/// Number of steps `T / h`, requiring `h` to divide `T`.
pub fn step_count(t_end: f64, h: f64) -> Result<usize> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return input(format!("final time must be positive, got {t_end}"));
    }
    if !(h > 0.0) || !h.is_finite() {
        return input(format!("step size must be positive, got {h}"));
    }
    let ratio = t_end / h;
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > 1e-9 * steps.max(1.0) {
        return input(format!("step {h} does not divide final time {t_end}"));
    }
    if steps > 1e8 {
        return input(format!("{steps} steps exceed the supported grid size"));
    }
    Ok(steps as usize)
}

/// Initial value problem for a multi-term equation.
#[derive(Debug, Clone)]
pub struct FdeProblem<F> {
    pub spec: MultiTermSpec,
    pub rhs: F,
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub h: f64,
}

impl<F: Dynamics> FdeProblem<F> {
    pub fn new(spec: MultiTermSpec, rhs: F, x0: Vec<f64>, t_end: f64, h: f64) -> Result<Self> {
        let p = Self {
            spec,
            rhs,
            x0,
            t_end,
            h,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<usize> {
        if self.x0.is_empty() {
            return input("initial state is empty");
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return input("initial state must be finite");
        }
        let steps = step_count(self.t_end, self.h)?;
        self.spec.check_step(self.h)?;
        Ok(steps)
    }

    /// Same problem on a different step size.
    pub fn with_step(&self, h: f64) -> FdeProblem<impl Dynamics + '_> {
        FdeProblem {
            spec: self.spec.clone(),
            rhs: move |t: f64, x: &[f64], out: &mut [f64]| self.rhs.eval(t, x, out),
            x0: self.x0.clone(),
            t_end: self.t_end,
            h,
        }
    }

    pub fn solve(&self, backend: Backend) -> Result<Trajectory> {
        match backend {
            Backend::Gl => gl_solve(self),
            Backend::Strategy1 => solve_strategy1(self),
            Backend::Abm => {
                let [(alpha, w)] = self.spec.terms() else {
                    return input("the direct predictor needs a single-order specification");
                };
                if *w != 1.0 {
                    return input("the direct predictor needs a unit weight");
                }
                abm_solve_single(
                    AlphaOrder::new(*alpha)?,
                    &self.rhs,
                    &self.x0,
                    self.t_end,
                    self.h,
                )
            }
        }
    }
}

/// Uniform time grid with one state vector per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    h: f64,
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
}

impl Trajectory {
    fn with_capacity(h: f64, dim: usize, steps: usize) -> Self {
        Self {
            h,
            dim,
            times: Vec::with_capacity(steps + 1),
            states: Vec::with_capacity((steps + 1) * dim),
        }
    }

    /// Builds a trajectory from a flat row-major state buffer.
    pub fn from_states(h: f64, dim: usize, states: Vec<f64>) -> Result<Self> {
        if dim == 0 || states.is_empty() || !states.len().is_multiple_of(dim) {
            return input("state buffer length must be a positive multiple of the dimension");
        }
        let n = states.len() / dim;
        Ok(Self {
            h,
            dim,
            times: (0..n).map(|i| i as f64 * h).collect(),
            states,
        })
    }

    fn push(&mut self, state: &[f64]) {
        let i = self.times.len();
        self.times.push(i as f64 * self.h);
        self.states.extend_from_slice(state);
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of grid points, `E + 1`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    /// Component `c` over time.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.states().map(|s| s[c]).collect()
    }

    /// Largest absolute componentwise difference over all grid points.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        if self.len() != other.len() || self.dim != other.dim {
            return input("trajectories live on different grids");
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Restriction to every `stride`-th grid point.
    pub fn subsample(&self, stride: usize) -> Result<Trajectory> {
        if stride == 0 || !(self.len() - 1).is_multiple_of(stride) {
            return input(format!("stride {stride} does not align with the grid"));
        }
        let states = self
            .states()
            .step_by(stride)
            .flat_map(|s| s.iter().copied())
            .collect();
        Trajectory::from_states(self.h * stride as f64, self.dim, states)
    }
}

fn check_finite(step: usize, state: &[f64]) -> Result<()> {
    if let Some(c) = state.iter().position(|v| !v.is_finite()) {
        return Err(DragonError::Diverged {
            step,
            reason: format!("component {c} is {}", state[c]),
        });
    }
    Ok(())
}

/// Fractional Adams-Bashforth predictor for `D^α y = f(t, y)`, `α ∈ (0, 1]`:
///
/// `y_{k+1} = y_0 + 1/Γ(α) Σ_{j<=k} b_{j,k+1} f(t_j, y_j)` with
/// `b_{j,k+1} = h^α/α ((k+1-j)^α - (k-j)^α)`.
///
/// No corrector is applied.
pub fn abm_solve_single<F: Dynamics + ?Sized>(
    alpha: AlphaOrder,
    rhs: &F,
    x0: &[f64],
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    if x0.is_empty() {
        return input("initial state is empty");
    }
    let steps = step_count(t_end, h)?;
    abm_march(alpha.value(), x0, steps, h, |t, y, out| rhs.eval(t, y, out))
}

fn abm_march(
    alpha: f64,
    y0: &[f64],
    steps: usize,
    h: f64,
    mut f: impl FnMut(f64, &[f64], &mut [f64]),
) -> Result<Trajectory> {
    let dim = y0.len();
    // b_{j,k+1} depends only on m = k - j: scale * ((m+1)^α - m^α)
    let scale = h.powf(alpha) / (alpha * gamma(alpha)?);
    let coef: Vec<f64> = (0..steps)
        .map(|m| scale * ((m as f64 + 1.0).powf(alpha) - (m as f64).powf(alpha)))
        .collect();
    let mut traj = Trajectory::with_capacity(h, dim, steps);
    traj.push(y0);
    let mut history = vec![0.0; steps * dim];
    let mut next = vec![0.0; dim];
    for k in 0..steps {
        let fk = &mut history[k * dim..(k + 1) * dim];
        f(k as f64 * h, traj.state(k), fk);
        next.copy_from_slice(y0);
        for j in 0..=k {
            let c = coef[k - j];
            let fj = &history[j * dim..(j + 1) * dim];
            for (n, v) in next.iter_mut().zip(fj) {
                *n += c * v;
            }
        }
        check_finite(k + 1, &next)?;
        traj.push(&next);
    }
    Ok(traj)
}

/// Chain structure for rewriting a rational multi-term equation as a system
/// of equations of the single order `γ = 1/M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    /// Least common multiple of the order denominators.
    pub m: u64,
    /// Chain order `1/M`.
    pub gamma: f64,
    /// Chain length `M · α_max`.
    pub n: usize,
    /// `α_j / γ` for every order, ascending; the last entry equals `n`.
    pub chain_index: Vec<usize>,
    /// Weights aligned with `chain_index`.
    pub weights: Vec<f64>,
}

/// Largest accepted denominator of a rational order.
pub const MAX_DENOMINATOR: u64 = 100;
const MAX_CHAIN: usize = 10_000;

fn rational_denominator(alpha: f64) -> Option<u64> {
    (1..=MAX_DENOMINATOR).find(|&q| {
        let p = alpha * q as f64;
        (p - p.round()).abs() <= 1e-9 * q as f64
    })
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Builds the single-order chain for a spec whose orders are rationals with
/// denominators at most [`MAX_DENOMINATOR`].
pub fn convert_to_system(spec: &MultiTermSpec) -> Result<SystemSpec> {
    let mut m = 1_u64;
    for alpha in spec.orders() {
        let q = rational_denominator(alpha).ok_or_else(|| DragonError::UnsupportedOrder {
            order: alpha,
            reason: format!("not a rational with denominator <= {MAX_DENOMINATOR}"),
        })?;
        m = m / gcd(m, q) * q;
        if m as usize > MAX_CHAIN {
            return Err(DragonError::UnsupportedOrder {
                order: alpha,
                reason: format!("common denominator {m} exceeds the chain limit"),
            });
        }
    }
    let chain_index: Vec<usize> = spec
        .orders()
        .map(|a| (a * m as f64).round() as usize)
        .collect();
    let n = *chain_index.last().expect("spec is non-empty");
    Ok(SystemSpec {
        m,
        gamma: 1.0 / m as f64,
        n,
        chain_index,
        weights: spec.weights().collect(),
    })
}

/// Strategy I: isolate the top order, rewrite as a `γ`-order chain
/// `D^γ y_k = y_{k+1}`, `D^γ y_{N-1} = (F(t, y_0) - Σ_{j<n} w_j y_{α_j/γ}) / w_n`
/// with `y_0(0) = X0` and the remaining chain components starting at zero,
/// integrate with the predictor and return `y_0`.
pub fn solve_strategy1<F: Dynamics>(problem: &FdeProblem<F>) -> Result<Trajectory> {
    let steps = problem.validate()?;
    let sys = convert_to_system(&problem.spec)?;
    let top_w = *sys.weights.last().unwrap();
    if top_w == 0.0 {
        return input("the highest order carries zero weight");
    }
    let dim = problem.x0.len();
    let n = sys.n;
    let mut y0 = vec![0.0; n * dim];
    y0[..dim].copy_from_slice(&problem.x0);
    let lower: Vec<(usize, f64)> = sys.chain_index[..sys.chain_index.len() - 1]
        .iter()
        .copied()
        .zip(sys.weights.iter().copied())
        .collect();
    let mut fbuf = vec![0.0; dim];
    let chain = abm_march(sys.gamma, &y0, steps, problem.h, |t, y, out| {
        out[..(n - 1) * dim].copy_from_slice(&y[dim..]);
        problem.rhs.eval(t, &y[..dim], &mut fbuf);
        let last = &mut out[(n - 1) * dim..];
        for (c, o) in last.iter_mut().enumerate() {
            let mut v = fbuf[c];
            for &(idx, w) in &lower {
                v -= w * y[idx * dim + c];
            }
            *o = v / top_w;
        }
    })?;
    let states = chain
        .states()
        .flat_map(|s| s[..dim].iter().copied())
        .collect();
    Trajectory::from_states(problem.h, dim, states)
}

/// Grünwald-Letnikov recursion
///
/// `y_i = [f(t_{i-1}, y_{i-1}) + S y_0 - Σ_j w_j h^{-α_j} Σ_{k=1}^{i} (-1)^k C(α_j, k)(y_{i-k} - y_0)] / S`
/// with `S = Σ_j w_j h^{-α_j}`.
///
/// For the single first-order term the recursion telescopes to explicit Euler
/// and is evaluated as `y_i = y_{i-1} + (h / w) f(t_{i-1}, y_{i-1})`.
pub fn gl_solve<F: Dynamics>(problem: &FdeProblem<F>) -> Result<Trajectory> {
    let steps = problem.validate()?;
    let mut traj = Trajectory::with_capacity(problem.h, problem.x0.len(), steps);
    traj.push(&problem.x0);
    gl_march(&problem.spec, &problem.rhs, problem.h, traj, steps)
}

/// Continues the GL recursion from an observed history.
///
/// `history` holds `y_0, ..., y_{p}` on the solver grid (with `y_0` the
/// initial value); `extra` further steps are appended using `F`.
pub fn gl_continue<F: Dynamics + ?Sized>(
    spec: &MultiTermSpec,
    rhs: &F,
    history: Trajectory,
    extra: usize,
) -> Result<Trajectory> {
    if history.is_empty() {
        return input("history is empty");
    }
    spec.check_step(history.step())?;
    let total = history.len() - 1 + extra;
    gl_march(spec, rhs, history.step(), history, total)
}

fn gl_march<F: Dynamics + ?Sized>(
    spec: &MultiTermSpec,
    rhs: &F,
    h: f64,
    mut traj: Trajectory,
    steps: usize,
) -> Result<Trajectory> {
    let dim = traj.dim();
    let start = traj.len();
    let y0 = traj.state(0).to_vec();
    let mut f = vec![0.0; dim];
    let mut next = vec![0.0; dim];

    if let [(alpha, w)] = spec.terms() {
        if *alpha == 1.0 {
            let dt = h / w;
            for i in start..=steps {
                rhs.eval((i - 1) as f64 * h, traj.state(i - 1), &mut f);
                for ((n, y), fv) in next.iter_mut().zip(traj.state(i - 1)).zip(&f) {
                    *n = y + dt * fv;
                }
                check_finite(i, &next)?;
                traj.push(&next);
            }
            return Ok(traj);
        }
    }

    let scale = spec.check_step(h)?;
    // g_k = Σ_j w_j h^{-α_j} (-1)^k C(α_j, k), k = 1..=steps
    let mut g = vec![0.0; steps + 1];
    for &(alpha, w) in spec.terms() {
        let c = w * h.powf(-alpha);
        for (gk, bk) in g.iter_mut().zip(gl_weights(alpha, steps)).skip(1) {
            *gk += c * bk;
        }
    }
    // d_k = y_k - y_0
    let mut diffs: Vec<f64> = traj
        .states()
        .flat_map(|s| s.iter().zip(&y0).map(|(a, b)| a - b).collect::<Vec<_>>())
        .collect();
    diffs.reserve((steps + 1).saturating_sub(start) * dim);
    let mut acc = vec![0.0; dim];
    for i in start..=steps {
        rhs.eval((i - 1) as f64 * h, traj.state(i - 1), &mut f);
        acc.iter_mut().for_each(|a| *a = 0.0);
        // k = i contributes y_0 - y_0 = 0
        for k in 1..i {
            let gk = g[k];
            let d = &diffs[(i - k) * dim..(i - k + 1) * dim];
            for (a, dv) in acc.iter_mut().zip(d) {
                *a += gk * dv;
            }
        }
        for c in 0..dim {
            next[c] = y0[c] + (f[c] - acc[c]) / scale;
        }
        check_finite(i, &next)?;
        diffs.extend(next.iter().zip(&y0).map(|(a, b)| a - b));
        traj.push(&next);
    }
    Ok(traj)
}

/// GL approximation of `D^α` applied to samples `y_0..y_n` on step `h`:
/// `h^{-α} Σ_{k=0}^{i} (-1)^k C(α, k) (y_{i-k} - y_0)` for every `i`.
pub fn gl_derivative(alpha: f64, h: f64, y: &[f64]) -> Vec<f64> {
    if y.is_empty() {
        return Vec::new();
    }
    let w = gl_weights(alpha, y.len() - 1);
    let scale = h.powf(-alpha);
    (0..y.len())
        .map(|i| {
            let s: f64 = (0..=i).map(|k| w[k] * (y[i - k] - y[0])).sum();
            scale * s
        })
        .collect()
}

/// Reference solution for [`estimate_order`].
pub enum Reference<'a> {
    /// Exact state as a function of time.
    Analytic(&'a dyn Fn(f64) -> Vec<f64>),
    /// Trajectory on a grid that refines every tested step.
    Fine(&'a Trajectory),
}

/// Observed convergence of a solver over a step-size ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderEstimate {
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log(error)` against `log(h)`.
    pub slope: f64,
    /// False when errors do not decrease monotonically with `h`.
    pub confident: bool,
}

/// Checks that `h_list` has at least three strictly decreasing entries in
/// geometric progression.
pub fn check_geometric_ladder(h_list: &[f64]) -> Result<()> {
    if h_list.len() < 3 {
        return input("convergence estimation needs at least three step sizes");
    }
    if h_list.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
        return input("step sizes must be positive");
    }
    let r0 = h_list[0] / h_list[1];
    if !(r0 > 1.0) {
        return input("step sizes must decrease");
    }
    for w in h_list.windows(2) {
        let r = w[0] / w[1];
        if (r - r0).abs() > 1e-9 * r0 {
            return input("step sizes must form a geometric progression");
        }
    }
    Ok(())
}

/// Solves `problem` for every step in `h_list` with `backend`, measures the
/// max-norm error against `reference` and fits the observed order.
pub fn estimate_order<F: Dynamics>(
    problem: &FdeProblem<F>,
    backend: Backend,
    h_list: &[f64],
    reference: Reference<'_>,
) -> Result<OrderEstimate> {
    check_geometric_ladder(h_list)?;
    let h_min = *h_list.last().unwrap();
    let mut errors = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let sol = problem.with_step(h).solve(backend)?;
        let err = match &reference {
            Reference::Analytic(exact) => sol
                .states()
                .zip(sol.times())
                .map(|(s, &t)| {
                    s.iter()
                        .zip(exact(t))
                        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
                })
                .fold(0.0_f64, f64::max),
            Reference::Fine(fine) => {
                let ratio = h / fine.step();
                let stride = ratio.round();
                if (ratio - stride).abs() > 1e-9 * stride {
                    return input("reference grid does not refine the tested step");
                }
                if h_min / fine.step() < 4.0 - 1e-9 {
                    return input("reference must be at least 4x finer than the smallest step");
                }
                sol.sup_distance(&fine.subsample(stride as usize)?)?
            }
        };
        errors.push(err);
    }
    if errors.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(DragonError::Numeric(
            "errors must be positive and finite to fit an order".into(),
        ));
    }
    let xs: Vec<f64> = h_list.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let confident = errors.windows(2).all(|w| w[1] < w[0]);
    Ok(OrderEstimate {
        h: h_list.to_vec(),
        errors,
        slope: sxy / sxx,
        confident,
    })
}
