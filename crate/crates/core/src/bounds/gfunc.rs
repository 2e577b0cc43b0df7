use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{ModelSummary, RareEventModel};

/// A weight function `g` for the moment functional `β(g)`.
///
/// Admissible functions are even, strictly positive off zero, non-decreasing
/// on `[0, ∞)`, and have `x/g(x)` non-decreasing on `(0, ∞)`. Membership is
/// checked numerically on a probe grid by [`GFunction::validate`].
#[derive(Clone)]
pub struct GFunction {
    name: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for GFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GFunction")
            .field("name", &self.name)
            .finish()
    }
}

impl GFunction {
    pub fn new(name: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    /// `g(x) = |x|`.
    pub fn abs() -> Self {
        Self::new("abs", f64::abs)
    }

    /// `g(x) = x²`. Not admissible: `x/g(x) = 1/x` decreases.
    pub fn square() -> Self {
        Self::new("square", |x| x * x)
    }

    /// `g ≡ 1`.
    pub fn unit() -> Self {
        Self::new("unit", |_| 1.0)
    }

    /// `g(x) = |x|^{1/2}`.
    pub fn sqrt_abs() -> Self {
        Self::new("sqrt", |x: f64| x.abs().sqrt())
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "abs" => Ok(Self::abs()),
            "square" => Ok(Self::square()),
            "unit" => Ok(Self::unit()),
            "sqrt" => Ok(Self::sqrt_abs()),
            other => Err(Error::InvalidParam(format!(
                "unknown g `{other}` (expected abs, square, unit or sqrt)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::NotClassG {
                name: self.name.clone(),
                reason,
            })
        };
        let mut grid: Vec<f64> = (0..=240)
            .map(|k| 10f64.powf(-6.0 + k as f64 / 20.0))
            .collect();
        grid.extend((1..=200).map(|k| k as f64 * 0.05));
        grid.sort_by(f64::total_cmp);
        grid.dedup();

        let rel = |a: f64, b: f64| 1e-12 * a.abs().max(b.abs());
        let g0 = self.eval(0.0);
        if !(g0.is_finite() && g0 >= 0.0) {
            return fail(format!("g(0) = {g0} is not a non-negative number"));
        }
        let mut prev_g = g0;
        let mut prev_ratio = 0.0f64;
        for &x in &grid {
            let (gp, gm) = (self.eval(x), self.eval(-x));
            if !(gp.is_finite() && gp > 0.0) {
                return fail(format!("g({x}) = {gp} is not strictly positive"));
            }
            if (gp - gm).abs() > rel(gp, gm) {
                return fail(format!("g({x}) = {gp} but g(-{x}) = {gm}: not even"));
            }
            if gp < prev_g - rel(gp, prev_g) {
                return fail(format!("g decreases before x = {x}"));
            }
            let ratio = x / gp;
            if ratio < prev_ratio - rel(ratio, prev_ratio) {
                return fail(format!("x/g(x) decreases before x = {x}"));
            }
            prev_g = gp;
            prev_ratio = ratio;
        }
        Ok(())
    }
}

/// `β(g)` and `λ(g)` without checking that `g` is admissible.
///
/// `β = Σ (1 − p_i)·∫ (x − a_i)²·g(x − a_i) U_i{dx}`, and
/// `λ = min{B, β / (B·g(B))}` when `B² > 0`, otherwise `0`.
pub fn beta_lambda_formula(
    model: &RareEventModel,
    summary: &ModelSummary,
    g: &GFunction,
) -> (f64, f64) {
    let beta: f64 = model
        .components()
        .iter()
        .zip(&summary.a)
        .map(|(c, &a)| {
            (1.0 - c.p)
                * c.u
                    .atoms()
                    .map(|(x, w)| {
                        let d = x - a;
                        d * d * g.eval(d) * w
                    })
                    .sum::<f64>()
        })
        .sum();
    let lambda = if summary.b2 > 0.0 {
        let b = summary.b2.sqrt();
        b.min(beta / (b * g.eval(b)))
    } else {
        0.0
    };
    (beta, lambda)
}

/// `β(g)` and `λ(g)` for an admissible `g`.
pub fn beta_lambda(
    model: &RareEventModel,
    summary: &ModelSummary,
    g: &GFunction,
) -> Result<(f64, f64)> {
    g.validate()?;
    Ok(beta_lambda_formula(model, summary, g))
}
