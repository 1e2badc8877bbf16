//! JSON run configurations.
//!
//! Every command reads one JSON document. Unknown fields are rejected.
//! `t_end` may also be spelled `T`. Relative file paths inside a
//! configuration resolve against the configuration file's directory.

use std::path::{Path, PathBuf};

use dragon_core::graphdyn::GraphSpec;
use dragon_core::measure::{MeasureJson, OrderMeasure};
use dragon_core::randwalk::FitNorm;
use dragon_core::visco::ViscoModel;
use dragon_core::{Backend, MultiTermSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Graph source: exactly one of `file`, `edges`, `path` or `cycle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize, f64)>>,
    /// Node count for `edges`; inferred from the largest index when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle: Option<usize>,
}

impl GraphConfig {
    pub fn build(&self, base: &Path) -> Result<GraphSpec, CliError> {
        let sources = [
            self.file.is_some(),
            self.edges.is_some(),
            self.path.is_some(),
            self.cycle.is_some(),
        ];
        if sources.iter().filter(|s| **s).count() != 1 {
            return Err(CliError::Config(
                "graph needs exactly one of `file`, `edges`, `path`, `cycle`".into(),
            ));
        }
        if self.nodes.is_some() && self.edges.is_none() {
            return Err(CliError::Config(
                "graph `nodes` only applies to `edges`".into(),
            ));
        }
        let g = if let Some(file) = &self.file {
            let path = base.join(file);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            dragon_core::io::parse_edge_list(&text)?
        } else if let Some(edges) = &self.edges {
            let n = match self.nodes {
                Some(n) => n,
                None => edges.iter().map(|e| e.0.max(e.1) + 1).max().unwrap_or(0),
            };
            GraphSpec::new(n, edges.clone())?
        } else if let Some(n) = self.path {
            GraphSpec::path(n)?
        } else {
            GraphSpec::cycle(self.cycle.unwrap_or(0))?
        };
        Ok(g)
    }
}

/// Scalar right-hand side applied componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarRhs {
    /// `F(t, y) = rate · y`
    Linear { rate: f64 },
    /// `F(t, y) = amplitude · cos t`
    Cosine { amplitude: f64 },
}

impl ScalarRhs {
    pub fn eval(self, t: f64, y: &[f64], out: &mut [f64]) {
        match self {
            ScalarRhs::Linear { rate } => {
                for (o, v) in out.iter_mut().zip(y) {
                    *o = rate * v;
                }
            }
            ScalarRhs::Cosine { amplitude } => {
                out.iter_mut().for_each(|o| *o = amplitude * t.cos())
            }
        }
    }
}

pub fn measure_spec(m: &MeasureJson) -> Result<MultiTermSpec, CliError> {
    Ok(OrderMeasure::try_from(m.clone())?.to_spec()?)
}

/// `solve`: either graph diffusion or a scalar right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub measure: MeasureJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs: Option<ScalarRhs>,
    pub x0: Vec<f64>,
    /// Feature channels per node for graph runs (`x0` is row-major `N × channels`).
    #[serde(default = "one")]
    pub channels: usize,
    #[serde(alias = "T")]
    pub t_end: f64,
    pub h: f64,
    #[serde(default = "gl")]
    pub backend: Backend,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// `walk`: Monte-Carlo graph walker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkRunConfig {
    pub graph: GraphConfig,
    pub alpha: f64,
    pub delta_tau: f64,
    #[serde(alias = "T")]
    pub t_end: f64,
    pub n_walkers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Initial distribution; defaults to all mass on `start_node`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_node: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u64>,
    /// Step of the comparison solve; defaults to `delta_tau`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_h: Option<f64>,
    #[serde(default = "gl")]
    pub backend: Backend,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl WalkRunConfig {
    pub fn start_distribution(&self, n: usize) -> Result<Vec<f64>, CliError> {
        match (&self.start, self.start_node) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "give either `start` or `start_node`, not both".into(),
            )),
            (Some(p), None) => Ok(p.clone()),
            (None, node) => {
                let node = node.unwrap_or(0);
                if node >= n {
                    return Err(CliError::Config(format!(
                        "start_node {node} is outside the {n}-node graph"
                    )));
                }
                let mut p = vec![0.0; n];
                p[node] = 1.0;
                Ok(p)
            }
        }
    }
}

/// Reference solution for `convergence`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceConfig {
    /// `x0 · E_α((rate / w) t^α)`; needs a single-term measure and a linear rhs.
    MittagLeffler {},
    /// Same solver at step `h`.
    Fine { h: f64 },
}

/// `convergence`: observed order over a geometric step ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub measure: MeasureJson,
    pub rhs: ScalarRhs,
    pub x0: Vec<f64>,
    #[serde(alias = "T")]
    pub t_end: f64,
    pub h_list: Vec<f64>,
    #[serde(default = "gl")]
    pub backend: Backend,
    pub reference: ReferenceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// `visco-gen`: strain under `σ = cos t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViscoGenConfig {
    pub model: ViscoModel,
    #[serde(alias = "T", default = "ten")]
    pub t_end: f64,
    #[serde(default = "hundredth")]
    pub h: f64,
    #[serde(default = "gl")]
    pub backend: Backend,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Which fits `visco-fit` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitClass {
    SingleOrder,
    Distributed,
    Both,
}

/// `visco-fit`: identification from a dataset file or a generated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViscoFitConfig {
    /// `t,epsilon,sigma` CSV; exclusive with `model`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ViscoModel>,
    #[serde(alias = "T", default = "ten")]
    pub t_end: f64,
    #[serde(default = "hundredth")]
    pub h: f64,
    #[serde(default = "gl")]
    pub backend: Backend,
    #[serde(default = "both")]
    pub class: FitClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_nodes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Target sequence for `fit-wait`, indexed `n = 1..=n_fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    Values {
        values: Vec<f64>,
    },
    /// `e^{-rate · n}`
    ExpDecay {
        rate: f64,
    },
    /// The waiting law of order `alpha`.
    Waiting {
        alpha: f64,
    },
    Zero {},
}

/// `fit-wait`: approximation by a combination of waiting laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitWaitConfig {
    pub target: TargetConfig,
    /// Number of target points; defaults to 50 (or the length of `values`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_fit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default = "sup")]
    pub norm: FitNorm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn one() -> usize {
    1
}
fn gl() -> Backend {
    Backend::Gl
}
fn ten() -> f64 {
    10.0
}
fn hundredth() -> f64 {
    0.01
}
fn both() -> FitClass {
    FitClass::Both
}
fn sup() -> FitNorm {
    FitNorm::Sup
}

/// Parses a configuration document.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
}

/// Checks that `h` divides `t_end` to 1e-12 relative tolerance.
pub fn check_grid(t_end: f64, h: f64) -> Result<(), CliError> {
    if !(h > 0.0) || !(t_end >= 0.0) || !h.is_finite() || !t_end.is_finite() {
        return Err(CliError::Config(format!(
            "need h > 0 and T >= 0, got h = {h}, T = {t_end}"
        )));
    }
    let ratio = t_end / h;
    if (ratio - ratio.round()).abs() > 1e-12 * ratio.max(1.0) {
        return Err(CliError::Config(format!(
            "h = {h} does not divide T = {t_end}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_divisibility() {
        assert!(check_grid(1.0, 0.1).is_ok());
        assert!(check_grid(10.0, 2f64.powi(-10)).is_ok());
        assert!(check_grid(1.0, 0.3).is_err());
        assert!(check_grid(1.0, 0.0).is_err());
        assert!(check_grid(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn horizon_alias() {
        let a: ViscoGenConfig = parse(r#"{"model":{"kind":"maxwell"},"T":5.0}"#).unwrap();
        let b: ViscoGenConfig = parse(r#"{"model":{"kind":"maxwell"},"t_end":5.0}"#).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.h, 0.01);
        assert_eq!(a.backend, Backend::Gl);
    }

    #[test]
    fn graph_sources_are_exclusive() {
        let base = Path::new(".");
        let both: GraphConfig = parse(r#"{"path":3,"cycle":4}"#).unwrap();
        assert!(matches!(both.build(base), Err(CliError::Config(_))));
        let none: GraphConfig = parse("{}").unwrap();
        assert!(none.build(base).is_err());
        let stray: GraphConfig = parse(r#"{"path":3,"nodes":3}"#).unwrap();
        assert!(stray.build(base).is_err());
        let inferred: GraphConfig = parse(r#"{"edges":[[0,1,1.0],[1,3,2.0]]}"#).unwrap();
        assert_eq!(inferred.build(base).unwrap().node_count(), 4);
    }

    #[test]
    fn walk_start_defaults_to_first_node() {
        let mut cfg: WalkRunConfig =
            parse(r#"{"graph":{"path":3},"alpha":0.5,"delta_tau":0.01,"T":1.0,"n_walkers":10}"#)
                .unwrap();
        assert_eq!(cfg.start_distribution(3).unwrap(), vec![1.0, 0.0, 0.0]);
        cfg.start_node = Some(2);
        assert_eq!(cfg.start_distribution(3).unwrap(), vec![0.0, 0.0, 1.0]);
        cfg.start_node = Some(3);
        assert!(cfg.start_distribution(3).is_err());
        cfg.start = Some(vec![0.5, 0.5, 0.0]);
        assert!(cfg.start_distribution(3).is_err());
    }

    #[test]
    fn rhs_kinds() {
        let mut out = [0.0; 2];
        ScalarRhs::Linear { rate: -2.0 }.eval(0.0, &[1.0, 3.0], &mut out);
        assert_eq!(out, [-2.0, -6.0]);
        ScalarRhs::Cosine { amplitude: 2.0 }.eval(0.0, &[1.0, 3.0], &mut out);
        assert_eq!(out, [2.0, 2.0]);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse::<FitWaitConfig>(r#"{"target":{"kind":"zero"},"extra":1}"#).is_err());
        assert!(parse::<FitWaitConfig>(r#"{"target":{"kind":"zero","rate":1}}"#).is_err());
        assert!(parse::<ReferenceConfig>(r#"{"kind":"mittag_leffler","h":0.1}"#).is_err());
        assert!(parse::<ReferenceConfig>(r#"{"kind":"mittag_leffler"}"#).is_ok());
    }
}
