//! Right-hand sides of the approximation bounds, evaluated with `c = 1`.
//!
//! Every evaluation is itemized: `terms` holds the additive pieces whose sum is
//! `total_with_c1`, `factors` the intermediate quantities they were built from.

mod delta;
mod gfunc;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::LatticeDistribution;
use crate::error::{Error, Result};
use crate::metrics::concentration_q;
use crate::model::{
    build_laws, d2_tau, d2_tau_centered, LawOptions, Laws, ModelSummary, RareEventModel,
};

pub use delta::{
    bernstein_coordinatewise, bernstein_delta_tail, bernstein_parts, bernstein_tail,
    delta_lattice_law, delta_tail_mc, delta_tail_mc_grid, lattice_tail, sample_delta, McEstimate,
    MIN_MC_REPS,
};
pub use gfunc::{beta_lambda, beta_lambda_formula, GFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoremId {
    T0,
    LeCam,
    Cor1,
    T2,
    T3,
    T4,
    T5,
    T6,
    Bernstein,
}

impl TheoremId {
    pub const ALL: [TheoremId; 9] = [
        TheoremId::T0,
        TheoremId::LeCam,
        TheoremId::Cor1,
        TheoremId::T2,
        TheoremId::T3,
        TheoremId::T4,
        TheoremId::T5,
        TheoremId::T6,
        TheoremId::Bernstein,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremId::T0 => "t0",
            TheoremId::LeCam => "lecam",
            TheoremId::Cor1 => "cor1",
            TheoremId::T2 => "t2",
            TheoremId::T3 => "t3",
            TheoremId::T4 => "t4",
            TheoremId::T5 => "t5",
            TheoremId::T6 => "t6",
            TheoremId::Bernstein => "bernstein",
        }
    }

    /// The quantity the bound controls.
    pub fn target(self) -> Target {
        match self {
            TheoremId::Cor1 | TheoremId::T2 => Target::RhoH1H3,
            TheoremId::Bernstein => Target::DeltaTail,
            _ => Target::RhoH1H2,
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        TheoremId::ALL
            .into_iter()
            .find(|t| t.as_str() == lower)
            .ok_or_else(|| Error::InvalidParam(format!("unknown theorem `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    RhoH1H2,
    RhoH1H3,
    DeltaTail,
}

/// Caller-chosen free parameters. Unset `γ`/`ϰ` fall back to [`default_gamma`].
#[derive(Debug, Clone)]
pub struct FreeParams {
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub kappa: Option<f64>,
    /// Defaults to `|x|` where a `g` is needed.
    pub g: Option<GFunction>,
    pub mc_reps: usize,
    pub seed: u64,
}

impl Default for FreeParams {
    fn default() -> Self {
        Self {
            tau: None,
            gamma: None,
            kappa: None,
            g: None,
            mc_reps: 20_000,
            seed: 0,
        }
    }
}

impl FreeParams {
    fn g(&self) -> GFunction {
        self.g.clone().unwrap_or_else(GFunction::abs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEvaluation {
    pub theorem: TheoremId,
    pub target: Target,
    pub terms: BTreeMap<String, f64>,
    pub factors: BTreeMap<String, f64>,
    pub free_params: BTreeMap<String, f64>,
    pub g: Option<String>,
    pub total_with_c1: f64,
    pub error_budget: f64,
}

impl BoundEvaluation {
    fn new(theorem: TheoremId) -> Self {
        Self {
            theorem,
            target: theorem.target(),
            terms: BTreeMap::new(),
            factors: BTreeMap::new(),
            free_params: BTreeMap::new(),
            g: None,
            total_with_c1: 0.0,
            error_budget: 0.0,
        }
    }

    fn term(mut self, name: &str, value: f64) -> Self {
        self.terms.insert(name.to_owned(), value);
        self
    }

    fn factor(mut self, name: &str, value: f64) -> Self {
        self.factors.insert(name.to_owned(), value);
        self
    }

    fn param(mut self, name: &str, value: f64) -> Self {
        self.free_params.insert(name.to_owned(), value);
        self
    }

    fn finish(mut self, error_budget: f64) -> Self {
        self.total_with_c1 = self.terms.values().sum();
        self.error_budget = error_budget;
        self
    }
}

/// `max{λ, |a|₂·√(8 ln(1/p)), 8|a|_∞·ln(1/p)}`, which keeps the Bernstein term at most `2p²`.
///
/// Falls back to `λ` when `p ∈ {0, 1}` or `a = 0`.
pub fn default_gamma(summary: &ModelSummary, lambda: f64) -> f64 {
    if summary.a_l2 == 0.0 || summary.p <= 0.0 || summary.p >= 1.0 {
        return lambda;
    }
    let log = (1.0 / summary.p).ln();
    lambda
        .max(summary.a_l2 * (8.0 * log).sqrt())
        .max(8.0 * summary.a_linf * log)
}

/// A model with its summary and exact laws, reused across theorem arms.
#[derive(Debug, Clone)]
pub struct BoundContext {
    pub model: RareEventModel,
    pub summary: ModelSummary,
    pub laws: Laws,
    pub options: LawOptions,
}

impl BoundContext {
    pub fn new(model: RareEventModel, options: LawOptions) -> Result<Self> {
        let summary = model.summary();
        let laws = build_laws(&model, &options)?;
        Ok(Self {
            model,
            summary,
            laws,
            options,
        })
    }

    fn min_q(&self, b: f64) -> (f64, [f64; 3]) {
        let q = [
            concentration_q(&self.laws.h1, b),
            concentration_q(&self.laws.h2, b),
            concentration_q(&self.laws.h3, b),
        ];
        (q.iter().copied().fold(f64::INFINITY, f64::min), q)
    }

    fn tau(&self, params: &FreeParams) -> Result<f64> {
        let tau = params.tau.ok_or(Error::MissingParam("tau"))?;
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParam(format!(
                "tau must be positive, got {tau}"
            )));
        }
        self.model.check_u_support(tau)?;
        Ok(tau)
    }

    fn lambda(&self, g: &GFunction) -> Result<(f64, f64)> {
        beta_lambda(&self.model, &self.summary, g)
    }

    /// `P{|Δ| ≥ γ}`: exact on the lattice when every `a_i` is a lattice point,
    /// Monte Carlo plus three standard errors otherwise, never above the
    /// Bernstein bound.
    pub fn delta_tail(&self, gamma: f64, params: &FreeParams) -> Result<DeltaTail> {
        let bernstein = bernstein_delta_tail(&self.summary, gamma).min(1.0);
        if let Some(law) =
            delta_lattice_law(&self.summary, self.model.step(), self.options.tail_tol)
        {
            let exact = lattice_tail(&law, gamma).min(1.0);
            return Ok(DeltaTail {
                value: bernstein.min(exact),
                bernstein,
                estimate: exact,
                std_error: 0.0,
                exact: true,
            });
        }
        let mc = delta_tail_mc(&self.summary, gamma, params.mc_reps, params.seed)?;
        Ok(DeltaTail {
            value: bernstein.min(mc.upper(3.0)),
            bernstein,
            estimate: mc.estimate,
            std_error: mc.std_error,
            exact: false,
        })
    }

    pub fn evaluate(&self, theorem: TheoremId, params: &FreeParams) -> Result<BoundEvaluation> {
        let s = &self.summary;
        let p = s.p;
        let budget = self.laws.error_budget;
        let eval = BoundEvaluation::new(theorem);
        Ok(match theorem {
            TheoremId::T0 => eval.term("p", p).finish(0.0),

            TheoremId::LeCam => {
                let tau = self.tau(params)?;
                let d2 = d2_tau(&self.model, tau)?;
                let ratio = (1.0 + s.a_l2 * s.a_l2 / (tau * tau)) / d2;
                eval.param("tau", tau)
                    .factor("D2", d2)
                    .term("p_cbrt", p.cbrt())
                    .term("d_term", ratio.cbrt())
                    .finish(0.0)
            }

            TheoremId::Cor1 => {
                // Centered laws live in [−2τ, 2τ] and have zero U-mean.
                let tau = self.tau(params)?;
                let d2 = d2_tau_centered(&self.model, 2.0 * tau)?;
                eval.param("tau", tau)
                    .factor("D2_centered_2tau", d2)
                    .term("p_cbrt", p.cbrt())
                    .term("d_term", d2.powf(-1.0 / 3.0))
                    .finish(0.0)
            }

            TheoremId::T2 => {
                let g = params.g();
                let (beta, lambda) = self.lambda(&g)?;
                let mut eval = eval.param("lambda", lambda).factor("beta", beta);
                eval.g = Some(g.name().to_owned());
                if s.b2 == 0.0 {
                    eval.factor("q_h1", f64::NAN)
                        .factor("q_h3", f64::NAN)
                        .factor("equivalent_shape", p)
                        .factor("shape_ratio", 1.0)
                        .term("p", p)
                        .finish(budget)
                } else {
                    let q1 = concentration_q(&self.laws.h1, lambda);
                    let q3 = concentration_q(&self.laws.h3, lambda);
                    let b = s.b2.sqrt();
                    let rare = self.rare_accompanying()?;
                    let equivalent = p + lambda / b * concentration_q(&rare, b);
                    let total = p + q1.min(q3);
                    eval.factor("q_h1", q1)
                        .factor("q_h3", q3)
                        .factor("equivalent_shape", equivalent)
                        .factor("shape_ratio", total / equivalent)
                        .term("p", p)
                        .term("min_q", q1.min(q3))
                        .finish(budget + rare.lost_mass())
                }
            }

            TheoremId::T3 => {
                let g = params.g();
                let (_, lambda) = self.lambda(&g)?;
                let gamma = self.checked_param("gamma", params.gamma, lambda)?;
                let tail = self.delta_tail(gamma, params)?;
                let (q, [q1, q2, q3]) = self.min_q(gamma);
                let mut eval = eval
                    .param("gamma", gamma)
                    .param("lambda", lambda)
                    .factor("delta_bernstein", tail.bernstein)
                    .factor("delta_estimate", tail.estimate)
                    .factor("delta_std_error", tail.std_error)
                    .factor("delta_exact", if tail.exact { 1.0 } else { 0.0 })
                    .factor("q_h1", q1)
                    .factor("q_h2", q2)
                    .factor("q_h3", q3)
                    .term("p", p)
                    .term("delta_tail", tail.value)
                    .term("min_q", q);
                eval.g = Some(g.name().to_owned());
                eval.finish(budget)
            }

            TheoremId::T4 => {
                let g = params.g();
                let (_, lambda) = self.lambda(&g)?;
                let kappa = self.checked_param("kappa", params.kappa, lambda)?;
                if kappa <= 0.0 {
                    return Err(Error::InvalidParam("kappa must be positive".into()));
                }
                let (q, _) = self.min_q(kappa);
                let (log, mult) = log_multiplier(s, kappa, q);
                let mut eval = eval
                    .param("kappa", kappa)
                    .param("lambda", lambda)
                    .factor("q", q)
                    .factor("delta", log)
                    .factor("multiplier", mult)
                    .term("p", p)
                    .term("q_term", mult * q);
                eval.g = Some(g.name().to_owned());
                eval.finish(budget)
            }

            TheoremId::T5 => {
                let tau = self.tau(params)?;
                let (q, _) = self.min_q(tau);
                let (log, mult) = log_multiplier(s, tau, q);
                eval.param("tau", tau)
                    .factor("Q", q)
                    .factor("s", log)
                    .factor("multiplier", mult)
                    .term("p", p)
                    .term("q_term", mult * q)
                    .finish(budget)
            }

            TheoremId::T6 => {
                let tau = self.tau(params)?;
                let d = d2_tau(&self.model, tau)?.sqrt();
                let inv_d = 1.0 / d;
                let (log, mult) = log_multiplier(s, tau, inv_d);
                eval.param("tau", tau)
                    .factor("D", d)
                    .factor("r", log)
                    .factor("multiplier", mult)
                    .term("p", p)
                    .term("d_term", mult * inv_d)
                    .finish(0.0)
            }

            TheoremId::Bernstein => {
                let g = params.g();
                let lambda = self.lambda(&g).map(|x| x.1).unwrap_or(0.0);
                let gamma = params.gamma.unwrap_or_else(|| default_gamma(s, lambda));
                if !(gamma >= 0.0) {
                    return Err(Error::InvalidParam(format!(
                        "gamma must be >= 0, got {gamma}"
                    )));
                }
                let (gauss, expo) = bernstein_parts(s, gamma);
                let raw = bernstein_delta_tail(s, gamma);
                eval.param("gamma", gamma)
                    .factor("gaussian", gauss)
                    .factor("exponential", expo)
                    .factor("raw", raw)
                    .term("bound", raw.min(1.0))
                    .finish(0.0)
            }
        })
    }

    fn checked_param(&self, name: &'static str, value: Option<f64>, lambda: f64) -> Result<f64> {
        let v = value.unwrap_or_else(|| default_gamma(&self.summary, lambda));
        if !v.is_finite() {
            return Err(Error::InvalidParam(format!("{name} must be finite")));
        }
        if v < lambda - 1e-12 * lambda.max(1.0) {
            return Err(Error::ParamBelowLambda {
                name,
                value: v,
                lambda,
            });
        }
        Ok(v)
    }

    /// `∏ e(p_i V_i E_{−a_i})` on the model lattice.
    pub fn rare_accompanying(&self) -> Result<LatticeDistribution> {
        let step = self.model.step();
        let cap = self.options.support_cap;
        let mut acc = LatticeDistribution::dirac_index(step, 0);
        for (c, &a) in self.model.components().iter().zip(&self.summary.a) {
            if c.p == 0.0 {
                continue;
            }
            let (shifted, _) = c.v.shift(-a);
            let factor = shifted
                .compound_poisson(c.p, self.options.tail_tol)?
                .truncate_support(self.options.tail_tol)?;
            let size = acc.len() + factor.len() - 1;
            if size > cap {
                return Err(Error::SupportOverflow { size, cap });
            }
            acc = acc.convolve(&factor)?;
        }
        Ok(acc)
    }

    pub fn diagnostics(&self, tau: f64) -> Result<Diagnostics> {
        let params = FreeParams {
            tau: Some(tau),
            ..FreeParams::default()
        };
        let lecam = self.evaluate(TheoremId::LeCam, &params)?.total_with_c1;
        let t6 = self.evaluate(TheoremId::T6, &params)?.total_with_c1;
        let d = d2_tau(&self.model, tau)?.sqrt();
        let (_, lambda) = self.lambda(&GFunction::abs())?;
        let applicable = self.summary.p <= 0.125 && d >= 2.0;
        Ok(Diagnostics {
            t6_total: t6,
            lecam_total: lecam,
            t6_not_above_lecam: t6 <= lecam,
            ordering_applicable: applicable,
            q_h3_lambda: concentration_q(&self.laws.h3, lambda),
            p_plus_inv_d: self.summary.p + 1.0 / d,
        })
    }
}

/// Outcome of [`BoundContext::delta_tail`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaTail {
    pub value: f64,
    pub bernstein: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub exact: bool,
}

/// Order comparisons that are logged rather than asserted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub t6_total: f64,
    pub lecam_total: f64,
    pub t6_not_above_lecam: bool,
    /// Whether `p ≤ 1/8` and `D(τ) ≥ 2`.
    pub ordering_applicable: bool,
    pub q_h3_lambda: f64,
    pub p_plus_inv_d: f64,
}

/// `L = log(1 + scale/(x·|a|₂))` and `1 + |a|₂·√L/scale + |a|_∞·L/scale`.
///
/// With `|a|₂ = 0` the products vanish and the multiplier is 1.
fn log_multiplier(s: &ModelSummary, scale: f64, x: f64) -> (f64, f64) {
    if s.a_l2 == 0.0 {
        return (f64::INFINITY, 1.0);
    }
    let log = (scale / (x * s.a_l2)).ln_1p();
    (
        log,
        1.0 + s.a_l2 * log.sqrt() / scale + s.a_linf * log / scale,
    )
}

/// One-shot evaluation.
pub fn theorem_rhs(
    theorem: TheoremId,
    model: &RareEventModel,
    params: &FreeParams,
) -> Result<BoundEvaluation> {
    BoundContext::new(model.clone(), LawOptions::default())?.evaluate(theorem, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Component;
    use approx::assert_abs_diff_eq;

    fn e(a: f64) -> LatticeDistribution {
        LatticeDistribution::point_mass(a, 1.0).unwrap()
    }

    fn two_point(lo: i64, hi: i64) -> LatticeDistribution {
        LatticeDistribution::from_atoms(1.0, &[(lo, 0.5), (hi, 0.5)]).unwrap()
    }

    fn ctx(parts: Vec<(f64, LatticeDistribution, LatticeDistribution)>) -> BoundContext {
        let comps = parts
            .into_iter()
            .map(|(p, u, v)| Component::new(p, u, v).unwrap())
            .collect();
        BoundContext::new(
            RareEventModel::new(1.0, comps).unwrap(),
            LawOptions::default(),
        )
        .unwrap()
    }

    fn tau(t: f64) -> FreeParams {
        FreeParams {
            tau: Some(t),
            ..FreeParams::default()
        }
    }

    #[test]
    fn theorem_ids_round_trip() {
        for t in TheoremId::ALL {
            assert_eq!(t.as_str().parse::<TheoremId>().unwrap(), t);
            assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{t}\""));
        }
        assert!("t7".parse::<TheoremId>().is_err());
    }

    #[test]
    fn t0_reads_off_p() {
        let c = ctx(vec![(0.05, e(0.0), e(3.0)), (0.12, e(0.0), e(1.0))]);
        let ev = c.evaluate(TheoremId::T0, &FreeParams::default()).unwrap();
        assert_eq!(ev.total_with_c1, 0.12);
    }

    #[test]
    fn t2_degenerate_b_is_p() {
        let c = ctx(vec![(0.05, e(1.0), e(7.0)), (0.02, e(-2.0), e(4.0))]);
        let ev = c.evaluate(TheoremId::T2, &FreeParams::default()).unwrap();
        assert_eq!(ev.total_with_c1, 0.05);
        assert_eq!(ev.free_params["lambda"], 0.0);
    }

    #[test]
    fn cor1_is_lecam_on_centered_model_at_double_tau() {
        let c = ctx(vec![
            (
                0.02,
                LatticeDistribution::from_atoms(1.0, &[(-1, 0.25), (1, 0.5), (3, 0.25)]).unwrap(),
                e(9.0),
            ),
            (0.01, two_point(1, 3), e(-6.0)),
            (0.03, e(1.0), e(5.0)),
        ]);
        let cor1 = c.evaluate(TheoremId::Cor1, &tau(3.0)).unwrap();
        let (centered, _) = c.model.centered();
        let cc = BoundContext::new(centered, LawOptions::default()).unwrap();
        assert!(cc.summary.a_l2 < 1e-12);
        let lecam = cc.evaluate(TheoremId::LeCam, &tau(6.0)).unwrap();
        assert_abs_diff_eq!(cor1.total_with_c1, lecam.total_with_c1, epsilon = 1e-12);
    }

    #[test]
    fn support_violation_and_missing_tau() {
        let c = ctx(vec![(0.1, two_point(-2, 2), e(5.0))]);
        assert!(matches!(
            c.evaluate(TheoremId::LeCam, &tau(1.0)),
            Err(Error::SupportViolation { component: 0, .. })
        ));
        assert!(matches!(
            c.evaluate(TheoremId::T5, &FreeParams::default()),
            Err(Error::MissingParam("tau"))
        ));
    }

    #[test]
    fn param_below_lambda() {
        let parts = (0..4).map(|_| (0.01, two_point(-1, 1), e(5.0))).collect();
        let c = ctx(parts);
        let params = FreeParams {
            gamma: Some(0.1),
            kappa: Some(0.1),
            ..FreeParams::default()
        };
        for t in [TheoremId::T3, TheoremId::T4] {
            assert!(matches!(
                c.evaluate(t, &params),
                Err(Error::ParamBelowLambda { .. })
            ));
        }
    }

    #[test]
    fn totals_are_sums_of_terms() {
        let parts = (0..6)
            .map(|i| {
                (
                    0.01 * (i + 1) as f64,
                    two_point(0, 1 + i % 2),
                    e(4.0 + i as f64),
                )
            })
            .collect();
        let c = ctx(parts);
        let params = tau(2.0);
        for t in TheoremId::ALL {
            let ev = c.evaluate(t, &params).unwrap();
            let sum: f64 = ev.terms.values().sum();
            assert_eq!(ev.total_with_c1, sum, "{t}");
            assert!(ev.error_budget >= 0.0);
            assert!(ev.total_with_c1.is_finite(), "{t}: {ev:?}");
        }
    }

    #[test]
    fn zero_centering_limits() {
        let parts = (0..4).map(|_| (0.02, two_point(-1, 1), e(6.0))).collect();
        let c = ctx(parts);
        for t in [TheoremId::T4, TheoremId::T5, TheoremId::T6] {
            let ev = c.evaluate(t, &tau(1.0)).unwrap();
            assert_eq!(ev.factors["multiplier"], 1.0, "{t}");
        }
    }

    #[test]
    fn default_gamma_keeps_bernstein_small() {
        let parts = (0..10)
            .map(|i| (0.03, two_point(0, 1 + (i % 3) as i64), e(8.0)))
            .collect();
        let c = ctx(parts);
        let g = default_gamma(&c.summary, 0.0);
        let p = c.summary.p;
        assert!(bernstein_delta_tail(&c.summary, g) <= 2.0 * p * p * (1.0 + 1e-12));
    }

    #[test]
    fn delta_tail_prefers_exact_law_on_lattice() {
        let parts = (0..5).map(|_| (0.02, two_point(0, 2), e(6.0))).collect();
        let c = ctx(parts);
        let tail = c.delta_tail(2.0, &FreeParams::default()).unwrap();
        assert!(tail.exact);
        assert!(tail.value <= tail.bernstein);
    }

    #[test]
    fn t2_shapes_agree_on_symmetric_model() {
        let parts = (0..8).map(|_| (0.02, two_point(-1, 1), e(5.0))).collect();
        let c = ctx(parts);
        let ev = c.evaluate(TheoremId::T2, &FreeParams::default()).unwrap();
        let ratio = ev.factors["shape_ratio"];
        assert!(ratio > 0.0 && ratio.is_finite());
    }

    #[test]
    fn lecam_monotone_in_d2() {
        let small = ctx(vec![(0.05, two_point(-1, 1), e(4.0)); 3]);
        let large = ctx(vec![(0.05, two_point(-1, 1), e(4.0)); 12]);
        let a = small.evaluate(TheoremId::LeCam, &tau(1.0)).unwrap();
        let b = large.evaluate(TheoremId::LeCam, &tau(1.0)).unwrap();
        assert!(b.factors["D2"] > a.factors["D2"]);
        assert!(b.total_with_c1 <= a.total_with_c1);
    }
}
