//! Order measures and their quadrature into multi-term specifications.
//!
//! A distributed-order operator `∫ D^α X dμ(α)` is replaced by the finite sum
//! `Σ_j w_j D^{α_j} X`. Measures are either a list of atoms or a density on a
//! sub-interval of `(0, 1]` discretized by the composite trapezoid rule.

use serde::{Deserialize, Serialize};

use crate::error::{input, DragonError, Result};
use crate::fracfn::AlphaOrder;

/// Smallest order a quadrature node may take. Nodes that would fall at or
/// below this value (a support touching 0) are moved to it.
pub const ALPHA_MIN: f64 = 0.05;

/// Default number of trapezoid intervals.
pub const DEFAULT_NODES: usize = 10;
/// Largest accepted number of trapezoid intervals.
pub const MAX_INTERVALS: usize = 10_000;

/// Sorted, distinct orders in `(0, 1]` with real weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiTermSpec {
    terms: Vec<(f64, f64)>,
}

impl MultiTermSpec {
    /// Builds a spec from `(alpha, weight)` pairs, sorting by order.
    pub fn new(mut terms: Vec<(f64, f64)>) -> Result<Self> {
        if terms.is_empty() {
            return input("a multi-term specification needs at least one order");
        }
        for &(a, w) in &terms {
            AlphaOrder::new(a)?;
            if !w.is_finite() {
                return input(format!("weight for order {a} is not finite"));
            }
        }
        terms.sort_by(|x, y| x.0.total_cmp(&y.0));
        if terms.windows(2).any(|p| p[0].0 == p[1].0) {
            return input("orders in a multi-term specification must be distinct");
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn orders(&self) -> impl Iterator<Item = f64> + '_ {
        self.terms.iter().map(|t| t.0)
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.terms.iter().map(|t| t.1)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_order(&self) -> f64 {
        self.terms.last().map(|t| t.0).unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.weights().sum()
    }

    /// `Σ_j w_j h^{-α_j}`, the leading coefficient of the discrete operator.
    pub fn step_scale(&self, h: f64) -> f64 {
        self.terms.iter().map(|&(a, w)| w * h.powf(-a)).sum()
    }

    /// Fails unless `Σ_j w_j h^{-α_j} > 0`.
    pub fn check_step(&self, h: f64) -> Result<f64> {
        let s = self.step_scale(h);
        if s > 0.0 && s.is_finite() {
            Ok(s)
        } else {
            Err(DragonError::Input(format!(
                "Σ w_j h^-α_j = {s} must be positive for step h = {h}"
            )))
        }
    }

    /// True when the spec is the single first-order term with unit weight.
    pub fn is_first_order(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].0 == 1.0
    }
}

/// Point mass at `alpha_o`.
pub fn dirac(alpha_o: AlphaOrder) -> MultiTermSpec {
    MultiTermSpec {
        terms: vec![(alpha_o.value(), 1.0)],
    }
}

/// Rescales weights to unit total mass.
pub fn normalize_mass(spec: &MultiTermSpec) -> Result<MultiTermSpec> {
    let total = spec.total_mass();
    if total == 0.0 || !total.is_finite() {
        return input("cannot normalize a measure with zero total mass");
    }
    Ok(MultiTermSpec {
        terms: spec.terms.iter().map(|&(a, w)| (a, w / total)).collect(),
    })
}

/// Density `w(α) = dμ/dα` on a support interval.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    /// Constant density 1.
    Uniform,
    /// Linear interpolation through `(alpha, value)` points.
    Table(Vec<(f64, f64)>),
}

impl Density {
    pub fn eval(&self, alpha: f64) -> f64 {
        match self {
            Density::Uniform => 1.0,
            Density::Table(points) => {
                let idx = points.partition_point(|p| p.0 <= alpha);
                if idx == 0 {
                    points[0].1
                } else if idx == points.len() {
                    points[idx - 1].1
                } else {
                    let (a0, v0) = points[idx - 1];
                    let (a1, v1) = points[idx];
                    v0 + (v1 - v0) * (alpha - a0) / (a1 - a0)
                }
            }
        }
    }
}

/// A measure over derivative orders.
#[derive(Debug, Clone, PartialEq)]
pub enum OrderMeasure {
    /// Finitely many atoms `(alpha, mass)`.
    Atoms(Vec<(f64, f64)>),
    /// Density on `[a, b] ⊆ (0, 1]`, discretized with `n` trapezoid intervals.
    Density {
        density: Density,
        support: (f64, f64),
        n: usize,
    },
}

impl OrderMeasure {
    /// Uniform density on `support` with `n` trapezoid intervals.
    pub fn uniform(support: (f64, f64), n: usize) -> Result<Self> {
        let m = OrderMeasure::Density {
            density: Density::Uniform,
            support,
            n,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OrderMeasure::Atoms(atoms) => {
                if atoms.is_empty() {
                    return input("atom list is empty");
                }
                for w in atoms.windows(2) {
                    if !(w[0].0 < w[1].0) {
                        return input("atom orders must be distinct and sorted ascending");
                    }
                }
                for &(a, m) in atoms {
                    AlphaOrder::new(a)?;
                    if !m.is_finite() {
                        return input(format!("mass of atom {a} is not finite"));
                    }
                }
                Ok(())
            }
            OrderMeasure::Density {
                density,
                support,
                n,
            } => {
                if *n > MAX_INTERVALS {
                    return input(format!(
                        "{n} trapezoid intervals exceed the limit {MAX_INTERVALS}"
                    ));
                }
                let (a, b) = *support;
                // a = 0 is accepted and clamped at discretization
                if !(a >= 0.0 && a <= b && b <= 1.0) || !(b > 0.0) {
                    return input(format!(
                        "density support [{a}, {b}] must satisfy 0 <= a <= b <= 1, b > 0"
                    ));
                }
                if let Density::Table(points) = density {
                    if points.is_empty() {
                        return input("density table is empty");
                    }
                    if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                        return input("density table orders must be strictly increasing");
                    }
                    if points.iter().any(|p| !(p.1 >= 0.0) || !p.0.is_finite()) {
                        return input("density values must be finite and non-negative");
                    }
                }
                Ok(())
            }
        }
    }

    /// Multi-term image of the measure: atoms verbatim, densities by trapezoid.
    pub fn to_spec(&self) -> Result<MultiTermSpec> {
        self.validate()?;
        match self {
            OrderMeasure::Atoms(atoms) => MultiTermSpec::new(atoms.clone()),
            OrderMeasure::Density { n, .. } => discretize(self, *n),
        }
    }
}

/// Composite trapezoid discretization of a density measure with `n` intervals.
///
/// Nodes are `a + jΔα`, `Δα = (b - a)/n`, with halved endpoint weights. A node
/// at or below [`ALPHA_MIN`] is moved to `ALPHA_MIN` (its weight is kept). For
/// a degenerate support `a = b` and `n = 0` the result is a point mass with
/// weight `w(a)`.
pub fn discretize(m: &OrderMeasure, n: usize) -> Result<MultiTermSpec> {
    let OrderMeasure::Density {
        density, support, ..
    } = m
    else {
        return input("only density measures are discretized; atoms map directly");
    };
    m.validate()?;
    if n > MAX_INTERVALS {
        return input(format!(
            "{n} trapezoid intervals exceed the limit {MAX_INTERVALS}"
        ));
    }
    let (a, b) = *support;
    if n == 0 {
        if a != b {
            return input("zero trapezoid intervals on a non-degenerate support");
        }
        return MultiTermSpec::new(vec![(a.max(ALPHA_MIN), density.eval(a))]);
    }
    if a == b {
        return input("a degenerate support needs n = 0");
    }
    let da = (b - a) / n as f64;
    let mut terms = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let node = if j == n { b } else { a + j as f64 * da };
        let half = if j == 0 || j == n { 0.5 } else { 1.0 };
        terms.push((node.max(ALPHA_MIN), half * da * density.eval(node)));
    }
    // clamping can collide the first two nodes only if Δα <= ALPHA_MIN - a
    if terms.len() > 1 && terms[0].0 >= terms[1].0 {
        return input(format!(
            "trapezoid step {da} too fine: clamped first node collides with the second"
        ));
    }
    MultiTermSpec::new(terms)
}

/// JSON form of an order measure.
///
/// `{"atoms": [[alpha, w], ...]}` or
/// `{"density": "uniform"|"table", "support": [a, b], "n": int, "points": [[alpha, w], ...]}`
/// (`points` only for tables).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum MeasureJson {
    Atoms {
        atoms: Vec<(f64, f64)>,
    },
    Density {
        density: String,
        support: (f64, f64),
        #[serde(default = "default_nodes")]
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        points: Option<Vec<(f64, f64)>>,
    },
}

fn default_nodes() -> usize {
    DEFAULT_NODES
}

impl TryFrom<MeasureJson> for OrderMeasure {
    type Error = DragonError;

    fn try_from(j: MeasureJson) -> Result<Self> {
        let m = match j {
            MeasureJson::Atoms { atoms } => OrderMeasure::Atoms(atoms),
            MeasureJson::Density {
                density,
                support,
                n,
                points,
            } => {
                let density = match (density.as_str(), points) {
                    ("uniform", None) => Density::Uniform,
                    ("uniform", Some(_)) => {
                        return input("uniform density takes no `points`");
                    }
                    ("table", Some(p)) => Density::Table(p),
                    ("table", None) => return input("table density requires `points`"),
                    (other, _) => {
                        return input(format!(
                            "unknown density kind `{other}` (expected uniform or table)"
                        ))
                    }
                };
                OrderMeasure::Density {
                    density,
                    support,
                    n,
                }
            }
        };
        m.validate()?;
        Ok(m)
    }
}

/// Parses the JSON measure format.
pub fn parse_measure_json(text: &str) -> Result<OrderMeasure> {
    let j: MeasureJson =
        serde_json::from_str(text).map_err(|e| DragonError::Input(format!("measure JSON: {e}")))?;
    OrderMeasure::try_from(j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_count_is_capped() {
        assert!(OrderMeasure::uniform((0.5, 1.0), MAX_INTERVALS + 1).is_err());
        let m = OrderMeasure::uniform((0.5, 1.0), 4).unwrap();
        assert!(discretize(&m, MAX_INTERVALS + 1).is_err());
        assert!(
            parse_measure_json(r#"{"density":"uniform","support":[0,1.0],"n":5550000156}"#)
                .is_err()
        );
    }
    use approx::assert_relative_eq;

    fn a(v: f64) -> AlphaOrder {
        AlphaOrder::new(v).unwrap()
    }

    #[test]
    fn uniform_on_unit_interval_clamps_zero() {
        let m = OrderMeasure::uniform((0.0, 1.0), 2).unwrap();
        let s = discretize(&m, 2).unwrap();
        assert_eq!(s.terms(), &[(ALPHA_MIN, 0.25), (0.5, 0.5), (1.0, 0.25)]);
    }

    #[test]
    fn uniform_tenth_grid() {
        let m = OrderMeasure::uniform((0.1, 1.0), 9).unwrap();
        let s = discretize(&m, 9).unwrap();
        assert_eq!(s.len(), 10);
        for (j, &(alpha, w)) in s.terms().iter().enumerate() {
            assert_relative_eq!(alpha, 0.1 + 0.1 * j as f64, epsilon = 1e-12);
            let expect = if j == 0 || j == 9 { 0.05 } else { 0.1 };
            assert_relative_eq!(w, expect, epsilon = 1e-12);
        }
        assert_relative_eq!(s.total_mass(), 0.9, epsilon = 1e-14);
    }

    #[test]
    fn discretize_errors() {
        let m = OrderMeasure::Density {
            density: Density::Uniform,
            support: (0.2, 0.8),
            n: 0,
        };
        assert!(discretize(&m, 0).is_err());
        assert!(discretize(&OrderMeasure::Atoms(vec![(0.5, 1.0)]), 3).is_err());
    }

    #[test]
    fn degenerate_support_is_point_mass() {
        let m = OrderMeasure::Density {
            density: Density::Uniform,
            support: (0.5, 0.5),
            n: 0,
        };
        assert_eq!(discretize(&m, 0).unwrap(), dirac(a(0.5)));
    }

    #[test]
    fn linear_density_mass_is_exact() {
        // trapezoid integrates linear densities exactly
        let m = OrderMeasure::Density {
            density: Density::Table(vec![(0.0, 0.0), (1.0, 1.0)]),
            support: (0.2, 1.0),
            n: 8,
        };
        let s = m.to_spec().unwrap();
        assert_relative_eq!(s.total_mass(), 0.48, epsilon = 1e-14);
    }

    #[test]
    fn dirac_examples() {
        assert_eq!(dirac(a(1.0)).terms(), &[(1.0, 1.0)]);
        assert_eq!(dirac(a(0.5)).terms(), &[(0.5, 1.0)]);
        assert_eq!(dirac(a(0.3)).terms(), &[(0.3, 1.0)]);
        assert!(dirac(a(1.0)).is_first_order());
    }

    #[test]
    fn normalize_examples() {
        let s = MultiTermSpec::new(vec![(0.5, 2.0)]).unwrap();
        assert_eq!(normalize_mass(&s).unwrap().terms(), &[(0.5, 1.0)]);
        let s = MultiTermSpec::new(vec![(0.7, 3.0), (0.3, 1.0)]).unwrap();
        assert_eq!(
            normalize_mass(&s).unwrap().terms(),
            &[(0.3, 0.25), (0.7, 0.75)]
        );
        let n = normalize_mass(&s).unwrap();
        assert_eq!(normalize_mass(&n).unwrap(), n);
        let z = MultiTermSpec::new(vec![(0.3, 1.0), (0.7, -1.0)]).unwrap();
        assert!(normalize_mass(&z).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(MultiTermSpec::new(vec![]).is_err());
        assert!(MultiTermSpec::new(vec![(0.0, 1.0)]).is_err());
        assert!(MultiTermSpec::new(vec![(1.2, 1.0)]).is_err());
        assert!(MultiTermSpec::new(vec![(0.5, 1.0), (0.5, 2.0)]).is_err());
        // negative weights allowed, positivity checked per step
        let s = MultiTermSpec::new(vec![(0.3, -10.0), (0.9, 1.0)]).unwrap();
        assert!(s.check_step(0.1).is_err());
        assert!(s.check_step(1e-3).is_ok());
    }

    #[test]
    fn json_forms() {
        let m = parse_measure_json(r#"{"atoms": [[0.3, 1.0], [0.7, 2.0]]}"#).unwrap();
        assert_eq!(m, OrderMeasure::Atoms(vec![(0.3, 1.0), (0.7, 2.0)]));
        let m =
            parse_measure_json(r#"{"density": "uniform", "support": [0.1, 1.0], "n": 9}"#).unwrap();
        assert_eq!(m.to_spec().unwrap().len(), 10);
        let m = parse_measure_json(r#"{"density": "uniform", "support": [0.1, 1.0]}"#).unwrap();
        assert_eq!(m.to_spec().unwrap().len(), DEFAULT_NODES + 1);
        let m = parse_measure_json(
            r#"{"density": "table", "support": [0.2, 0.8], "n": 3, "points": [[0.0, 1.0], [1.0, 3.0]]}"#,
        )
        .unwrap();
        assert_eq!(m.to_spec().unwrap().len(), 4);
        assert!(parse_measure_json(r#"{"atoms": [[0.7, 1.0], [0.3, 1.0]]}"#).is_err());
        assert!(parse_measure_json(r#"{"density": "gauss", "support": [0.1, 1.0]}"#).is_err());
        assert!(parse_measure_json(r#"{"density": "table", "support": [0.1, 1.0]}"#).is_err());
        assert!(parse_measure_json(r#"{"density": "uniform", "support": [0.5, 1.5]}"#).is_err());
        assert!(parse_measure_json("[1, 2").is_err());
    }
}
