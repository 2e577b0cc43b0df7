//! The rare-event mixture model and its three sum laws.
//!
//! Component `i` has law `F_i = (1 − p_i)·U_i + p_i·V_i`, where `U_i` is the
//! law of the mark when the rare event does not occur. From the components
//! we build
//!
//! * `H1 = ∏ F_i` (the sum over the raw sample),
//! * `H2 = ∏ e(F_i)` (the sum over the Poissonized sample),
//! * `H3 = ∏ E_{a_i} e(F_i E_{−a_i})` (the centered accompanying law),
//!
//! with `a_i` the mean of `U_i`.

use serde::Serialize;

use crate::dist::{check_same_step, LatticeDistribution, MAX_TRUNCATION_TOLERANCE};
use crate::error::{Error, Result};

/// One observation: rare-event probability `p` and the two conditional laws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub p: f64,
    pub u: LatticeDistribution,
    pub v: LatticeDistribution,
}

impl Component {
    pub fn new(p: f64, u: LatticeDistribution, v: LatticeDistribution) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidModel(format!("p = {p} outside [0, 1]")));
        }
        check_same_step(u.step(), v.step())?;
        Ok(Self { p, u, v })
    }

    /// `F = (1 − p)·U + p·V`.
    pub fn mixture(&self) -> LatticeDistribution {
        LatticeDistribution::mixture(self.p, &self.u, &self.v).expect("validated component")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RareEventModel {
    step: f64,
    components: Vec<Component>,
}

impl RareEventModel {
    pub fn new(step: f64, components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidModel("model has no components".into()));
        }
        for (i, c) in components.iter().enumerate() {
            if !(0.0..=1.0).contains(&c.p) {
                return Err(Error::InvalidModel(format!(
                    "component {i}: p = {} outside [0, 1]",
                    c.p
                )));
            }
            check_same_step(step, c.u.step())
                .and_then(|_| check_same_step(step, c.v.step()))
                .map_err(|_| {
                    Error::InvalidModel(format!("component {i}: lattice step differs from {step}"))
                })?;
        }
        Ok(Self { step, components })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn summary(&self) -> ModelSummary {
        summarize(self)
    }

    /// Smallest `τ` with `U_i{[−τ, τ]} = 1` for every component.
    pub fn u_radius(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.u.max_abs_atom())
            .fold(0.0, f64::max)
    }

    /// Fails with `SupportViolation` unless every `U_i` lives in `[−τ, τ]`.
    pub fn check_u_support(&self, tau: f64) -> Result<()> {
        let slack = 1e-9 * self.step;
        match self
            .components
            .iter()
            .position(|c| c.u.max_abs_atom() > tau + slack)
        {
            Some(component) => Err(Error::SupportViolation { component, tau }),
            None => Ok(()),
        }
    }

    /// Components `(p_i, U_i E_{−a_i}, V_i E_{−a_i})`, with the snapping residuals.
    pub fn centered(&self) -> (Self, Vec<f64>) {
        let mut residuals = Vec::with_capacity(self.len());
        let components = self
            .components
            .iter()
            .map(|c| {
                let a = c.u.moments().mean;
                let (u, r) = c.u.shift(-a);
                let (v, _) = c.v.shift(-a);
                residuals.push(r);
                Component { p: c.p, u, v }
            })
            .collect();
        (
            Self {
                step: self.step,
                components,
            },
            residuals,
        )
    }
}

/// Scalar characteristics of a model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    /// `max p_i`.
    pub p: f64,
    /// Means of the `U_i`.
    pub a: Vec<f64>,
    pub a_l2: f64,
    pub a_linf: f64,
    /// `σ_i² = (1 − p_i)·Var(U_i)`.
    pub sigma2: Vec<f64>,
    #[serde(rename = "B2")]
    pub b2: f64,
    /// `Σ p_i²`.
    pub sum_p2: f64,
}

pub fn summarize(model: &RareEventModel) -> ModelSummary {
    let mut a = Vec::with_capacity(model.len());
    let mut sigma2 = Vec::with_capacity(model.len());
    for c in model.components() {
        let m = c.u.moments();
        a.push(m.mean);
        sigma2.push((1.0 - c.p) * m.variance);
    }
    ModelSummary {
        p: model.components().iter().map(|c| c.p).fold(0.0, f64::max),
        a_l2: a.iter().map(|x| x * x).sum::<f64>().sqrt(),
        a_linf: a.iter().map(|x| x.abs()).fold(0.0, f64::max),
        b2: sigma2.iter().sum(),
        sum_p2: model.components().iter().map(|c| c.p * c.p).sum(),
        a,
        sigma2,
    }
}

/// Numerical knobs for [`build_laws`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LawOptions {
    /// Poisson series cutoff and per-factor truncation tolerance.
    pub tail_tol: f64,
    /// Largest support, in lattice cells, of any intermediate law.
    pub support_cap: usize,
}

impl Default for LawOptions {
    fn default() -> Self {
        Self {
            tail_tol: 1e-12,
            support_cap: 1 << 20,
        }
    }
}

/// `H1`, `H2`, `H3` together with their error budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Laws {
    pub h1: LatticeDistribution,
    pub h2: LatticeDistribution,
    pub h3: LatticeDistribution,
    /// `Σ |a_i − snapped a_i|` in mark units.
    pub snap_residual: f64,
    /// Lost mass of the three laws plus `snap_residual / step`.
    pub error_budget: f64,
}

fn capped_product(
    acc: LatticeDistribution,
    factor: &LatticeDistribution,
    cap: usize,
) -> Result<LatticeDistribution> {
    let size = acc.len() + factor.len() - 1;
    if size > cap {
        return Err(Error::SupportOverflow { size, cap });
    }
    acc.convolve(factor)
}

pub fn build_laws(model: &RareEventModel, opts: &LawOptions) -> Result<Laws> {
    if !(opts.tail_tol > 0.0 && opts.tail_tol <= MAX_TRUNCATION_TOLERANCE) {
        return Err(Error::InvalidTolerance(opts.tail_tol));
    }
    let step = model.step();
    let identity = LatticeDistribution::dirac_index(step, 0);
    let (mut h1, mut h2, mut h3) = (identity.clone(), identity.clone(), identity);
    let mut snap_residual = 0.0;
    for c in model.components() {
        let f = c.mixture();
        let a = c.u.moments().mean;

        let accompanying = f
            .compound_poisson(1.0, opts.tail_tol)?
            .truncate_support(opts.tail_tol)?;

        let (centered, residual) = f.shift(-a);
        let back = (a / step).round() as i64;
        let centered_accompanying = centered
            .compound_poisson(1.0, opts.tail_tol)?
            .truncate_support(opts.tail_tol)?
            .shift_index(back);
        snap_residual += residual;

        for law in [&accompanying, &centered_accompanying] {
            if law.len() > opts.support_cap {
                return Err(Error::SupportOverflow {
                    size: law.len(),
                    cap: opts.support_cap,
                });
            }
        }
        h1 = capped_product(h1, &f, opts.support_cap)?;
        h2 = capped_product(h2, &accompanying, opts.support_cap)?;
        h3 = capped_product(h3, &centered_accompanying, opts.support_cap)?;
    }
    let error_budget = h1.lost_mass() + h2.lost_mass() + h3.lost_mass() + snap_residual / step;
    Ok(Laws {
        h1,
        h2,
        h3,
        snap_residual,
        error_budget,
    })
}

/// `D²(τ) = Σ_i ∫ min{1, x²/τ²} F_i{dx}`.
pub fn d2_tau(model: &RareEventModel, tau: f64) -> Result<f64> {
    d2_tau_shifted(model, tau, None)
}

/// `D²(τ)` of the centered laws `F_i E_{−a_i}`, using the exact (unsnapped) `a_i`.
pub fn d2_tau_centered(model: &RareEventModel, tau: f64) -> Result<f64> {
    let a = model.summary().a;
    d2_tau_shifted(model, tau, Some(&a))
}

fn d2_tau_shifted(model: &RareEventModel, tau: f64, shifts: Option<&[f64]>) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidModel(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let kernel = |x: f64| (x * x / (tau * tau)).min(1.0);
    Ok(model
        .components()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let s = shifts.map_or(0.0, |a| a[i]);
            let over = |law: &LatticeDistribution| {
                law.atoms().map(|(x, w)| kernel(x - s) * w).sum::<f64>()
            };
            (1.0 - c.p) * over(&c.u) + c.p * over(&c.v)
        })
        .sum())
}
