//! The λ-sandwich between the distribution functions of `S` and `T`:
//!
//! `H1(x) ≤ H2(x + 2λ·1) + p + exp(−λ/τ) + P{‖Δ‖_∞ ≥ λ}` and the same with
//! `H1`, `H2` swapped, with the unspecified constant set to 1.

use serde::Serialize;

use super::sampler::{norm2, Mark, MarkSampler, Sums};
use crate::bounds::{
    bernstein_coordinatewise, bernstein_delta_tail, delta_lattice_law, lattice_tail, BoundContext,
    McEstimate,
};
use crate::dist::LatticeDistribution;
use crate::error::{Error, Result};
use crate::metrics::{LatticeCdf, DEFAULT_DKW_ALPHA};
use crate::rng;

/// Replications required by [`verify_sandwich_mc`].
pub const MIN_SANDWICH_REPS: usize = 100_000;
/// Quantile probes per axis.
pub const DEFAULT_GRID_POINTS: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SandwichMethod {
    Exact,
    MonteCarlo,
}

/// `P{‖S − T‖₂ > 2λ}` for independent `S` and `T`, next to the closeness bound.
///
/// The bound concerns a coupled pair, which is not constructed here, so this
/// is a proxy only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapReport {
    pub estimate: f64,
    /// `p + exp(−λ/τ) + Σ p_i² + P{‖Δ‖₂ ≥ λ}`.
    pub bound: f64,
    pub coupled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub method: SandwichMethod,
    pub dim: usize,
    pub lambda: f64,
    pub tau: f64,
    pub p: f64,
    /// `exp(−λ/τ)`, 0 when `τ = 0`.
    pub tau_term: f64,
    /// Upper value used for `P{‖Δ‖_∞ ≥ λ}`.
    pub delta_term: f64,
    pub delta_bernstein: f64,
    /// Whether `delta_term` came from the exact lattice law of `Δ`.
    pub delta_exact: bool,
    pub additive: f64,
    /// Minimum over probes of `H2(x + 2λ) + additive − H1(x)`.
    pub worst_slack_upper: f64,
    /// Minimum over probes of `H1(x + 2λ) + additive − H2(x)`.
    pub worst_slack_lower: f64,
    pub worst_slack: f64,
    pub worst_point: Vec<f64>,
    pub probes: usize,
    /// Allowed negative slack: the error budget (exact) or the confidence band (Monte Carlo).
    pub tolerance: f64,
    pub passed: bool,
    pub gap: GapReport,
}

fn tau_term(lambda: f64, tau: f64) -> f64 {
    if tau > 0.0 {
        (-lambda / tau).exp()
    } else {
        0.0
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParam(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(())
}

/// Exact check for lattice marks: every lattice point is probed.
pub fn verify_sandwich_exact(
    ctx: &BoundContext,
    lambda: f64,
    tau: Option<f64>,
) -> Result<SandwichReport> {
    check_lambda(lambda)?;
    let model = &ctx.model;
    let tau = tau.unwrap_or_else(|| model.u_radius());
    model.check_u_support(tau)?;
    let step = model.step();
    let (h1, h2) = (&ctx.laws.h1, &ctx.laws.h2);

    let bernstein = bernstein_delta_tail(&ctx.summary, lambda).min(1.0);
    let (delta_term, delta_exact) =
        match delta_lattice_law(&ctx.summary, step, ctx.options.tail_tol) {
            Some(law) => (lattice_tail(&law, lambda).min(bernstein), true),
            None => (bernstein, false),
        };
    let p = ctx.summary.p;
    let tt = tau_term(lambda, tau);
    let additive = p + tt + delta_term;

    let (c1, c2) = (LatticeCdf::new(h1), LatticeCdf::new(h2));
    let shift = 2.0 * lambda;
    let lo = h1.start().min(h2.start()) - (shift / step).ceil() as i64 - 1;
    let hi = h1.end().max(h2.end()) + 1;
    let (mut upper, mut lower) = (f64::INFINITY, f64::INFINITY);
    let (mut worst, mut worst_x) = (f64::INFINITY, 0.0);
    for k in lo..=hi {
        let x = k as f64 * step;
        let su = c2.eval(x + shift) + additive - c1.at_index(k);
        let sl = c1.eval(x + shift) + additive - c2.at_index(k);
        upper = upper.min(su);
        lower = lower.min(sl);
        if su.min(sl) < worst {
            worst = su.min(sl);
            worst_x = x;
        }
    }

    let gap = GapReport {
        estimate: independent_gap_exact(h1, h2, shift)?,
        bound: p + tt + ctx.summary.sum_p2 + delta_term,
        coupled: false,
    };
    let tolerance = ctx.laws.error_budget;
    Ok(SandwichReport {
        method: SandwichMethod::Exact,
        dim: 1,
        lambda,
        tau,
        p,
        tau_term: tt,
        delta_term,
        delta_bernstein: bernstein,
        delta_exact,
        additive,
        worst_slack_upper: upper,
        worst_slack_lower: lower,
        worst_slack: worst,
        worst_point: vec![worst_x],
        probes: (hi - lo + 1) as usize,
        tolerance,
        passed: worst >= -tolerance,
        gap,
    })
}

/// `P{|S − T| > gap}` for independent `S ~ H1`, `T ~ H2`.
fn independent_gap_exact(
    h1: &LatticeDistribution,
    h2: &LatticeDistribution,
    gap: f64,
) -> Result<f64> {
    let reflected: Vec<f64> = h2.weights().iter().rev().copied().collect();
    let minus_t = LatticeDistribution::from_parts(h2.step(), -h2.end(), reflected, h2.lost_mass())
        .expect("non-empty law");
    let diff = h1.convolve(&minus_t)?;
    let slack = 1e-9 * h1.step();
    Ok(diff
        .atoms()
        .filter(|(x, _)| x.abs() > gap + slack)
        .map(|(_, w)| w)
        .sum())
}

/// Joint distribution function on a tensor grid, evaluated at `grid + shift·1`.
fn grid_cdf(points: &[Mark], axes: &[Vec<f64>], shift: f64) -> Vec<f64> {
    let sizes: Vec<usize> = axes.iter().map(Vec::len).collect();
    let total: usize = sizes.iter().product();
    let mut hist = vec![0u64; total];
    'points: for x in points {
        let mut flat = 0;
        for (j, axis) in axes.iter().enumerate() {
            let b = axis.partition_point(|g| g + shift < x[j]);
            if b == sizes[j] {
                continue 'points;
            }
            flat = flat * sizes[j] + b;
        }
        hist[flat] += 1;
    }
    // Prefix sums along each axis turn cell counts into orthant counts.
    let mut stride = 1;
    for j in (0..axes.len()).rev() {
        let len = sizes[j];
        for flat in 0..total {
            if (flat / stride) % len != 0 {
                hist[flat] += hist[flat - stride];
            }
        }
        stride *= len;
    }
    let n = points.len() as f64;
    hist.into_iter().map(|c| c as f64 / n).collect()
}

fn quantile_axis(values: &mut [f64], points: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let last = values.len() - 1;
    let mut axis: Vec<f64> = (0..points)
        .map(|k| values[(k * last + (points - 1) / 2) / (points - 1).max(1)])
        .collect();
    axis.dedup();
    axis
}

/// Monte-Carlo check on a quantile grid, for marks of any dimension.
///
/// `S` and `T` come from independent streams. Each probe compares two
/// empirical distribution functions; the tolerance is twice the
/// Hoeffding radius for all evaluations jointly at level 0.01.
pub fn verify_sandwich_mc(
    sampler: &MarkSampler,
    lambda: f64,
    tau: Option<f64>,
    reps: usize,
    seed: u64,
    grid_points: usize,
) -> Result<SandwichReport> {
    check_lambda(lambda)?;
    if reps < MIN_SANDWICH_REPS {
        return Err(Error::InvalidParam(format!(
            "reps = {reps} below the minimum of {MIN_SANDWICH_REPS}"
        )));
    }
    if grid_points < 2 {
        return Err(Error::InvalidParam("need at least 2 grid points".into()));
    }
    let tau = tau.unwrap_or_else(|| sampler.u_radius());
    sampler.check_u_support(tau)?;
    let d = sampler.dim();

    let draws: Vec<(Mark, Sums)> = rng::chunked(reps, |range| {
        range
            .map(|rep| (sampler.s_sum(seed, rep as u64), sampler.t_sums(seed, rep as u64)))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let s: Vec<Mark> = draws.iter().map(|d| d.0).collect();
    let t: Vec<Mark> = draws.iter().map(|d| d.1.value).collect();

    let axes: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut pooled: Vec<f64> = s.iter().chain(&t).map(|x| x[j]).collect();
            quantile_axis(&mut pooled, grid_points)
        })
        .collect();
    let shift = 2.0 * lambda;
    let (fs, ft) = (grid_cdf(&s, &axes, 0.0), grid_cdf(&t, &axes, 0.0));
    let (fs_shift, ft_shift) = (grid_cdf(&s, &axes, shift), grid_cdf(&t, &axes, shift));

    let scale = lambda.max(1.0);
    let inf_hits = draws
        .iter()
        .filter(|x| x.1.delta[..d].iter().any(|v| v.abs() >= lambda - 1e-12 * scale))
        .count();
    let l2_hits = draws
        .iter()
        .filter(|x| norm2(&x.1.delta) >= lambda - 1e-12 * scale)
        .count();
    let delta_inf = McEstimate::from_counts(inf_hits as u64, reps);
    let delta_l2 = McEstimate::from_counts(l2_hits as u64, reps);
    let bernstein = bernstein_coordinatewise(&sampler.center_norms(), lambda);
    let delta_term = bernstein.min(delta_inf.upper(3.0));

    let p = sampler.p();
    let tt = tau_term(lambda, tau);
    let additive = p + tt + delta_term;

    let (mut upper, mut lower) = (f64::INFINITY, f64::INFINITY);
    let (mut worst, mut worst_flat) = (f64::INFINITY, 0);
    for flat in 0..fs.len() {
        let su = ft_shift[flat] + additive - fs[flat];
        let sl = fs_shift[flat] + additive - ft[flat];
        upper = upper.min(su);
        lower = lower.min(sl);
        if su.min(sl) < worst {
            worst = su.min(sl);
            worst_flat = flat;
        }
    }
    let mut worst_point = vec![0.0; d];
    let mut rest = worst_flat;
    for j in (0..d).rev() {
        worst_point[j] = axes[j][rest % axes[j].len()];
        rest /= axes[j].len();
    }

    let evaluations = 4 * fs.len();
    let radius = ((2.0 * evaluations as f64 / DEFAULT_DKW_ALPHA).ln() / (2.0 * reps as f64)).sqrt();
    let tolerance = 2.0 * radius;

    let gap_hits = s
        .iter()
        .zip(&t)
        .filter(|(a, b)| {
            let diff: Mark = std::array::from_fn(|j| a[j] - b[j]);
            norm2(&diff) > shift
        })
        .count();
    let gap = GapReport {
        estimate: gap_hits as f64 / reps as f64,
        bound: p + tt + sampler.sum_p2() + delta_l2.upper(3.0).min(1.0),
        coupled: false,
    };

    Ok(SandwichReport {
        method: SandwichMethod::MonteCarlo,
        dim: d,
        lambda,
        tau,
        p,
        tau_term: tt,
        delta_term,
        delta_bernstein: bernstein,
        delta_exact: false,
        additive,
        worst_slack_upper: upper,
        worst_slack_lower: lower,
        worst_slack: worst,
        worst_point,
        probes: fs.len(),
        tolerance,
        passed: worst >= -tolerance,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{MarkComponent, VectorLaw};
    use super::*;
    use crate::model::{Component, LawOptions, RareEventModel};

    fn e(a: f64) -> LatticeDistribution {
        LatticeDistribution::point_mass(a, 1.0).unwrap()
    }

    fn theorem0_ctx() -> BoundContext {
        let comps = (0..8)
            .map(|i| Component::new(0.02 + 0.01 * i as f64, e(0.0), e(1.0 + (i % 3) as f64)).unwrap())
            .collect();
        BoundContext::new(RareEventModel::new(1.0, comps).unwrap(), LawOptions::default()).unwrap()
    }

    #[test]
    fn grid_cdf_counts_orthants() {
        let pts = vec![[0.0, 0.0, 0.0], [1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [5.0, 5.0, 0.0]];
        let axes = vec![vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]];
        let f = grid_cdf(&pts, &axes, 0.0);
        let brute = |gx: f64, gy: f64| {
            pts.iter().filter(|p| p[0] <= gx && p[1] <= gy).count() as f64 / 4.0
        };
        for (i, gx) in axes[0].iter().enumerate() {
            for (j, gy) in axes[1].iter().enumerate() {
                assert_eq!(f[i * 3 + j], brute(*gx, *gy), "({gx}, {gy})");
            }
        }
        let g = grid_cdf(&pts, &axes, 1.0);
        assert_eq!(g[0], brute(1.0, 1.0));
    }

    #[test]
    fn exact_theorem0_fixture_passes_at_unit_lambda() {
        let ctx = theorem0_ctx();
        let rep = verify_sandwich_exact(&ctx, 1.0, None).unwrap();
        assert_eq!(rep.tau, 0.0);
        assert_eq!(rep.tau_term, 0.0);
        assert_eq!(rep.delta_term, 0.0);
        assert!(rep.passed, "{rep:?}");
        assert!(rep.worst_slack >= 0.0, "{rep:?}");
        assert!(!rep.gap.coupled);
    }

    #[test]
    fn exact_rejects_small_tau() {
        let u = LatticeDistribution::from_atoms(1.0, &[(-2, 0.5), (2, 0.5)]).unwrap();
        let m = RareEventModel::new(1.0, vec![Component::new(0.1, u, e(4.0)).unwrap()]).unwrap();
        let ctx = BoundContext::new(m, LawOptions::default()).unwrap();
        assert!(matches!(
            verify_sandwich_exact(&ctx, 1.0, Some(1.0)),
            Err(Error::SupportViolation { .. })
        ));
    }

    #[test]
    fn mc_agrees_with_exact_in_one_dimension() {
        let ctx = theorem0_ctx();
        let sampler = MarkSampler::from_model(&ctx.model);
        let exact = verify_sandwich_exact(&ctx, 1.0, None).unwrap();
        let mc = verify_sandwich_mc(&sampler, 1.0, None, MIN_SANDWICH_REPS, 3, 17).unwrap();
        assert!(mc.passed, "{mc:?}");
        assert!((mc.worst_slack - exact.worst_slack).abs() <= mc.tolerance + 0.02);
    }

    #[test]
    fn mc_two_dimensional() {
        let u = VectorLaw::new(2, vec![(vec![-0.5, 0.0], 0.5), (vec![0.5, 0.5], 0.5)]).unwrap();
        let v = VectorLaw::new(2, vec![(vec![3.0, -2.0], 0.5), (vec![-4.0, 1.0], 0.5)]).unwrap();
        let comps = (0..6)
            .map(|_| MarkComponent {
                p: 0.05,
                u: u.clone(),
                v: v.clone(),
            })
            .collect();
        let s = MarkSampler::new(2, comps).unwrap();
        let rep = verify_sandwich_mc(&s, 2.0, None, MIN_SANDWICH_REPS, 5, 9).unwrap();
        assert_eq!(rep.worst_point.len(), 2);
        assert!(rep.probes <= 81);
        assert!(rep.passed, "{rep:?}");
        let again = verify_sandwich_mc(&s, 2.0, None, MIN_SANDWICH_REPS, 5, 9).unwrap();
        assert_eq!(rep, again);
    }
}
