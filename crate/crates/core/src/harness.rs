//! Family runs: exact distances next to bound shapes, one record per instance.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::bounds::{BoundContext, BoundEvaluation, FreeParams, Target, TheoremId};
use crate::error::Result;
use crate::families::{generate, FamilyKind};
use crate::metrics::kolmogorov_rho;
use crate::model::{LawOptions, RareEventModel};
use crate::simulator::{verify_sandwich_exact, SandwichReport};

/// The family each theorem is checked on by default.
pub fn default_family(theorem: TheoremId) -> FamilyKind {
    match theorem {
        TheoremId::T0 => FamilyKind::Degenerate,
        TheoremId::Bernstein => FamilyKind::Centered,
        _ => FamilyKind::General,
    }
}

/// Rows with a fixed column order: the first-seen order across rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn from_records(records: Vec<Vec<(String, Value)>>) -> Self {
        let mut columns: Vec<String> = Vec::new();
        for r in &records {
            for (k, _) in r {
                if !columns.contains(k) {
                    columns.push(k.clone());
                }
            }
        }
        let rows = records
            .into_iter()
            .map(|r| {
                columns
                    .iter()
                    .map(|c| {
                        r.iter()
                            .find(|(k, _)| k == c)
                            .map_or(Value::Null, |(_, v)| v.clone())
                    })
                    .collect()
            })
            .collect();
        Self { columns, rows }
    }

    /// Array of objects, one per row.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .cloned()
                        .zip(row.iter().cloned())
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[j]).collect())
    }
}

/// Distances and one bound evaluation for one model.
#[derive(Debug, Clone, Serialize)]
pub struct InstanceResult {
    pub id: u64,
    pub n: usize,
    pub p: f64,
    pub b2: f64,
    pub rho_h1h2: f64,
    pub rho_h1h3: f64,
    /// The quantity the evaluated bound controls.
    pub distance: f64,
    pub evaluation: BoundEvaluation,
    /// `distance / total_with_c1`, 0 when both vanish.
    pub ratio: f64,
}

fn ratio(distance: f64, total: f64) -> f64 {
    if distance == 0.0 {
        0.0
    } else {
        distance / total
    }
}

/// `τ` used when the caller gives none: the `U` radius, at least one step.
pub fn default_tau(model: &RareEventModel) -> f64 {
    model.u_radius().max(model.step())
}

pub fn evaluate_instance(
    id: u64,
    model: &RareEventModel,
    theorem: TheoremId,
    params: &FreeParams,
    options: LawOptions,
) -> Result<InstanceResult> {
    let ctx = BoundContext::new(model.clone(), options)?;
    let mut params = params.clone();
    if params.tau.is_none() {
        params.tau = Some(default_tau(model));
    }
    let evaluation = ctx.evaluate(theorem, &params)?;
    let rho_h1h2 = kolmogorov_rho(&ctx.laws.h1, &ctx.laws.h2)?;
    let rho_h1h3 = kolmogorov_rho(&ctx.laws.h1, &ctx.laws.h3)?;
    let distance = match evaluation.target {
        Target::RhoH1H2 => rho_h1h2,
        Target::RhoH1H3 => rho_h1h3,
        Target::DeltaTail => {
            ctx.delta_tail(evaluation.free_params["gamma"], &params)?
                .estimate
        }
    };
    Ok(InstanceResult {
        id,
        n: model.len(),
        p: ctx.summary.p,
        b2: ctx.summary.b2,
        rho_h1h2,
        rho_h1h3,
        distance,
        ratio: ratio(distance, evaluation.total_with_c1),
        evaluation,
    })
}

impl InstanceResult {
    pub fn record(&self, family: Option<FamilyKind>) -> Vec<(String, Value)> {
        let e = &self.evaluation;
        let mut r: Vec<(String, Value)> = vec![
            ("id".into(), json!(self.id)),
            ("family".into(), json!(family.map(FamilyKind::as_str))),
            ("theorem".into(), json!(e.theorem.as_str())),
            ("n".into(), json!(self.n)),
            ("p".into(), json!(self.p)),
            ("B2".into(), json!(self.b2)),
            ("rho_h1h2".into(), json!(self.rho_h1h2)),
            ("rho_h1h3".into(), json!(self.rho_h1h3)),
            ("distance".into(), json!(self.distance)),
            ("total_with_c1".into(), json!(e.total_with_c1)),
            ("ratio".into(), json!(self.ratio)),
            ("error_budget".into(), json!(e.error_budget)),
            ("g".into(), json!(e.g)),
        ];
        r.extend(e.terms.iter().map(|(k, v)| (format!("term.{k}"), json!(v))));
        r.extend(e.factors.iter().map(|(k, v)| (format!("factor.{k}"), json!(v))));
        r.extend(e.free_params.iter().map(|(k, v)| (format!("param.{k}"), json!(v))));
        r
    }
}

/// One theorem over `count` instances of a family.
#[derive(Debug, Clone)]
pub struct FamilyRun {
    pub theorem: TheoremId,
    pub family: FamilyKind,
    pub seed: u64,
    pub results: Vec<InstanceResult>,
    pub max_ratio: f64,
}

impl FamilyRun {
    pub fn table(&self) -> Table {
        Table::from_records(
            self.results
                .iter()
                .map(|r| {
                    let mut rec = r.record(Some(self.family));
                    rec.push(("family_max_ratio".into(), json!(self.max_ratio)));
                    rec
                })
                .collect(),
        )
    }
}

pub fn run_family(
    family: FamilyKind,
    theorem: TheoremId,
    count: usize,
    seed: u64,
    params: &FreeParams,
    options: LawOptions,
) -> Result<FamilyRun> {
    let results = (0..count as u64)
        .into_par_iter()
        .map(|id| evaluate_instance(id, &generate(family, seed, id), theorem, params, options))
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = results.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(FamilyRun {
        theorem,
        family,
        seed,
        results,
        max_ratio,
    })
}

/// `start·factor^k` for `k < count`.
pub fn geometric_grid(start: f64, factor: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start * factor.powi(k as i32)).collect()
}

/// Exact sandwich reports for every `λ` in `lambdas`.
pub fn sandwich_sweep(
    ctx: &BoundContext,
    lambdas: &[f64],
    tau: Option<f64>,
) -> Result<Vec<SandwichReport>> {
    lambdas
        .iter()
        .map(|&l| verify_sandwich_exact(ctx, l, tau))
        .collect()
}

pub fn sandwich_record(id: u64, rep: &SandwichReport) -> Vec<(String, Value)> {
    vec![
        ("id".into(), json!(id)),
        ("method".into(), json!(rep.method)),
        ("dim".into(), json!(rep.dim)),
        ("lambda".into(), json!(rep.lambda)),
        ("tau".into(), json!(rep.tau)),
        ("p".into(), json!(rep.p)),
        ("tau_term".into(), json!(rep.tau_term)),
        ("delta_term".into(), json!(rep.delta_term)),
        ("delta_exact".into(), json!(rep.delta_exact)),
        ("additive".into(), json!(rep.additive)),
        ("worst_slack_upper".into(), json!(rep.worst_slack_upper)),
        ("worst_slack_lower".into(), json!(rep.worst_slack_lower)),
        ("worst_slack".into(), json!(rep.worst_slack)),
        ("tolerance".into(), json!(rep.tolerance)),
        ("passed".into(), json!(rep.passed)),
        ("probes".into(), json!(rep.probes)),
        ("gap_independent".into(), json!(rep.gap.estimate)),
        ("gap_bound".into(), json!(rep.gap.bound)),
        ("gap_coupled".into(), json!(rep.gap.coupled)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_union_of_columns() {
        let t = Table::from_records(vec![
            vec![("a".into(), json!(1)), ("b".into(), json!(2))],
            vec![("a".into(), json!(3)), ("c".into(), json!(4))],
        ]);
        assert_eq!(t.columns, ["a", "b", "c"]);
        assert_eq!(t.rows[1], vec![json!(3), Value::Null, json!(4)]);
        assert_eq!(t.column("c").unwrap(), vec![&Value::Null, &json!(4)]);
    }

    #[test]
    fn family_run_is_deterministic() {
        let params = FreeParams::default();
        let a = run_family(FamilyKind::Degenerate, TheoremId::T0, 12, 7, &params, LawOptions::default())
            .unwrap();
        let b = run_family(FamilyKind::Degenerate, TheoremId::T0, 12, 7, &params, LawOptions::default())
            .unwrap();
        assert_eq!(a.table(), b.table());
        assert!(a.max_ratio.is_finite());
        for r in &a.results {
            assert_eq!(r.evaluation.total_with_c1, r.p);
        }
    }

    #[test]
    fn every_theorem_runs_on_the_general_family() {
        for t in TheoremId::ALL {
            let run = run_family(
                default_family(t),
                t,
                4,
                1,
                &FreeParams::default(),
                LawOptions::default(),
            )
            .unwrap();
            assert_eq!(run.results.len(), 4, "{t}");
        }
    }

    #[test]
    fn grid() {
        assert_eq!(geometric_grid(1.0, 2.0, 4), vec![1.0, 2.0, 4.0, 8.0]);
    }
}
