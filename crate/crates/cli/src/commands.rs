//! Subcommand implementations. Each returns the paths it wrote.

use std::path::{Path, PathBuf};

use dragon_core::fracfn::{mittag_leffler, waiting_normalizer, waiting_prob, AlphaOrder};
use dragon_core::graphdyn::{solve_dragon_diffusion, total_variation};
use dragon_core::io::{parse_dataset_csv, to_json_string, write_dataset_csv, write_trajectory_csv};
use dragon_core::measure::dirac;
use dragon_core::randwalk::{fit_waiting_span, simulate, FitNorm, SpanFit, WalkConfig};
use dragon_core::solvers::{estimate_order, OrderEstimate, Reference};
use dragon_core::visco::{
    decimal_grid, fine_grid, fit_distributed, fit_single_order, generate, FitReport,
};
use dragon_core::{Backend, FdeProblem};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::*;
use crate::error::CliError;
use crate::output::{write_atomic, write_text};

/// Flag overrides and file locations shared by all commands.
#[derive(Debug, Clone, Default)]
pub struct RunContext {
    /// Directory against which relative paths in the configuration resolve.
    pub base_dir: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub backend: Option<Backend>,
    pub compare: bool,
}

impl RunContext {
    fn out_path(&self, from_config: &Option<PathBuf>) -> Result<PathBuf, CliError> {
        if let Some(p) = &self.out {
            return Ok(p.clone());
        }
        match from_config {
            Some(p) => Ok(self.base_dir.join(p)),
            None => Err(CliError::Config(
                "no output path: set `out` or pass --out".into(),
            )),
        }
    }
}

fn json_out<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    write_text(path, &to_json_string(value)?)
}

/// SHA-256 of the canonical JSON form of `value`, in hex.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String, CliError> {
    let text = to_json_string(value)?;
    Ok(Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

pub fn solve(cfg: SolveConfig, ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let out = ctx.out_path(&cfg.out)?;
    let backend = ctx.backend.unwrap_or(cfg.backend);
    check_grid(cfg.t_end, cfg.h)?;
    let spec = measure_spec(&cfg.measure)?;
    let traj = match (&cfg.graph, cfg.rhs) {
        (Some(g), None) => {
            let g = g.build(&ctx.base_dir)?;
            solve_dragon_diffusion(&g, &spec, &cfg.x0, cfg.channels, cfg.t_end, cfg.h, backend)?
        }
        (None, Some(rhs)) => {
            if cfg.channels != 1 {
                return Err(CliError::Config(
                    "`channels` applies to graph runs only".into(),
                ));
            }
            let f = move |t: f64, y: &[f64], o: &mut [f64]| rhs.eval(t, y, o);
            FdeProblem::new(spec, f, cfg.x0.clone(), cfg.t_end, cfg.h)?.solve(backend)?
        }
        _ => {
            return Err(CliError::Config(
                "give exactly one of `graph` and `rhs`".into(),
            ))
        }
    };
    write_atomic(&out, |w| write_trajectory_csv(&traj, w))?;
    Ok(vec![out])
}

#[derive(Serialize)]
struct WalkOutput<'a> {
    occupancy: &'a [f64],
    n_jumps: u64,
    mean_wait: f64,
    config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    tv_distance: Option<f64>,
}

pub fn walk(cfg: WalkRunConfig, ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let out = ctx.out_path(&cfg.out)?;
    let seed = ctx.seed.or(cfg.seed).ok_or_else(|| {
        CliError::Config("missing `seed`: walks need an explicit seed (config or --seed)".into())
    })?;
    let mut effective = cfg.clone();
    effective.seed = Some(seed);
    effective.backend = ctx.backend.unwrap_or(cfg.backend);
    effective.out = None;
    let hash = config_hash(&effective)?;

    let graph = cfg.graph.build(&ctx.base_dir)?;
    let start = cfg.start_distribution(graph.node_count())?;
    let alpha = AlphaOrder::new(cfg.alpha)?;
    let walk_cfg = WalkConfig {
        graph: graph.clone(),
        alpha,
        delta_tau: cfg.delta_tau,
        t_end: cfg.t_end,
        n_walkers: cfg.n_walkers,
        seed,
        start: start.clone(),
        n_max: cfg.n_max,
    };
    let result = simulate(&walk_cfg)?;

    let mut written = Vec::new();
    let mut tv = None;
    if ctx.compare {
        let h = cfg.compare_h.unwrap_or(cfg.delta_tau);
        check_grid(cfg.t_end, h)?;
        let traj = solve_dragon_diffusion(
            &graph,
            &dirac(alpha),
            &start,
            1,
            cfg.t_end,
            h,
            effective.backend,
        )?;
        tv = Some(total_variation(&result.occupancy, traj.last()));
        let traj_path = out.with_extension("trajectory.csv");
        write_atomic(&traj_path, |w| write_trajectory_csv(&traj, w))?;
        written.push(traj_path);
    }
    json_out(
        &out,
        &WalkOutput {
            occupancy: &result.occupancy,
            n_jumps: result.n_jumps,
            mean_wait: result.mean_wait,
            config_hash: hash,
            tv_distance: tv,
        },
    )?;
    written.insert(0, out);
    Ok(written)
}

#[derive(Serialize)]
struct ConvergenceOutput {
    backend: Backend,
    #[serde(flatten)]
    estimate: OrderEstimate,
}

pub fn convergence(cfg: ConvergenceConfig, ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let out = ctx.out_path(&cfg.out)?;
    let backend = ctx.backend.unwrap_or(cfg.backend);
    let spec = measure_spec(&cfg.measure)?;
    let h0 = *cfg
        .h_list
        .first()
        .ok_or_else(|| CliError::Config("`h_list` is empty".into()))?;
    let rhs = cfg.rhs;
    let f = move |t: f64, y: &[f64], o: &mut [f64]| rhs.eval(t, y, o);
    let problem = FdeProblem::new(spec.clone(), f, cfg.x0.clone(), cfg.t_end, h0)?;
    dragon_core::solvers::check_geometric_ladder(&cfg.h_list)?;
    let estimate = match cfg.reference {
        ReferenceConfig::MittagLeffler {} => {
            let (alpha, w, rate) =
                match (spec.terms(), rhs) {
                    ([(a, w)], ScalarRhs::Linear { rate }) => (*a, *w, rate),
                    _ => return Err(CliError::Config(
                        "the Mittag-Leffler reference needs a single-term measure and a linear rhs"
                            .into(),
                    )),
                };
            let lambda = rate / w;
            // the series is hardest at the largest |z|
            mittag_leffler(alpha, lambda * cfg.t_end.powf(alpha))?;
            let x0 = cfg.x0.clone();
            let exact = move |t: f64| {
                let e = mittag_leffler(alpha, lambda * t.powf(alpha)).unwrap_or(f64::NAN);
                x0.iter().map(|x| x * e).collect()
            };
            estimate_order(&problem, backend, &cfg.h_list, Reference::Analytic(&exact))?
        }
        ReferenceConfig::Fine { h } => {
            let fine = problem.with_step(h).solve(backend)?;
            estimate_order(&problem, backend, &cfg.h_list, Reference::Fine(&fine))?
        }
    };
    json_out(&out, &ConvergenceOutput { backend, estimate })?;
    Ok(vec![out])
}

pub fn visco_gen(cfg: ViscoGenConfig, ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let out = ctx.out_path(&cfg.out)?;
    let backend = ctx.backend.unwrap_or(cfg.backend);
    check_grid(cfg.t_end, cfg.h)?;
    let data = generate(&cfg.model, cfg.t_end, cfg.h, backend)?;
    write_atomic(&out, |w| write_dataset_csv(&data, w))?;
    Ok(vec![out])
}

#[derive(Serialize)]
struct FitOutput {
    /// Features, fits and forecasts use the Grünwald-Letnikov operator.
    backend: Backend,
    h: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_with: Option<Backend>,
    #[serde(skip_serializing_if = "Option::is_none")]
    single_order: Option<FitReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    distributed: Option<FitReport>,
}

pub fn visco_fit(cfg: ViscoFitConfig, ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let out = ctx.out_path(&cfg.out)?;
    let (data, generated_with) = match (&cfg.data, &cfg.model) {
        (Some(path), None) => {
            let path = ctx.base_dir.join(path);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            (parse_dataset_csv(&text)?, None)
        }
        (None, Some(model)) => {
            let backend = ctx.backend.unwrap_or(cfg.backend);
            check_grid(cfg.t_end, cfg.h)?;
            (generate(model, cfg.t_end, cfg.h, backend)?, Some(backend))
        }
        _ => {
            return Err(CliError::Config(
                "give exactly one of `data` and `model`".into(),
            ))
        }
    };
    let grid = cfg.alpha_grid.clone().unwrap_or_else(fine_grid);
    let nodes = cfg.alpha_nodes.clone().unwrap_or_else(decimal_grid);
    let single = match cfg.class {
        FitClass::SingleOrder | FitClass::Both => Some(fit_single_order(&data, &grid)?),
        FitClass::Distributed => None,
    };
    let distributed = match cfg.class {
        FitClass::Distributed | FitClass::Both => Some(fit_distributed(&data, &nodes, cfg.ridge)?),
        FitClass::SingleOrder => None,
    };
    json_out(
        &out,
        &FitOutput {
            backend: Backend::Gl,
            h: data.h,
            generated_with,
            single_order: single,
            distributed,
        },
    )?;
    Ok(vec![out])
}

#[derive(Serialize)]
struct FitWaitOutput {
    norm: FitNorm,
    n_fit: usize,
    #[serde(flatten)]
    fit: SpanFit,
}

pub fn fit_wait(cfg: FitWaitConfig, ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let out = ctx.out_path(&cfg.out)?;
    let target: Vec<f64> = match &cfg.target {
        TargetConfig::Values { values } => {
            if cfg.n_fit.is_some_and(|n| n != values.len()) {
                return Err(CliError::Config(
                    "`n_fit` disagrees with the length of `values`".into(),
                ));
            }
            values.clone()
        }
        other => {
            let n = cfg.n_fit.unwrap_or(50);
            match *other {
                TargetConfig::ExpDecay { rate } => {
                    (1..=n).map(|k| (-rate * k as f64).exp()).collect()
                }
                TargetConfig::Waiting { alpha } => {
                    let a = AlphaOrder::new(alpha)?;
                    let d = waiting_normalizer(a);
                    (1..=n as u64).map(|k| waiting_prob(a, d, k)).collect()
                }
                TargetConfig::Zero {} => vec![0.0; n],
                TargetConfig::Values { .. } => unreachable!(),
            }
        }
    };
    let alphas = cfg
        .alphas
        .clone()
        .unwrap_or_else(|| (1..=9).map(|k| k as f64 / 10.0).collect());
    let fit = fit_waiting_span(&target, &alphas, cfg.norm)?;
    json_out(
        &out,
        &FitWaitOutput {
            norm: cfg.norm,
            n_fit: target.len(),
            fit,
        },
    )?;
    Ok(vec![out])
}
