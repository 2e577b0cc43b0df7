//! The centering defect `Δ = Σ a_i·(ν_i − 1)` with `ν_i` i.i.d. Poisson(1).

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::dist::{lattice_index, poisson_cutoff, LatticeDistribution};
use crate::error::{Error, Result};
use crate::model::ModelSummary;
use crate::rng::{self, purpose};

/// Smallest replication count accepted by the Monte-Carlo estimators.
pub const MIN_MC_REPS: usize = 10_000;

/// `2·max{exp(−γ²/4|a|₂²), exp(−γ/4|a|_∞)}`, the Bernstein-type bound on `P{|Δ| ≥ γ}`.
///
/// The raw value lies in `[0, 2]`; callers clamp to 1 when reporting a
/// probability. With `a = 0`, `Δ ≡ 0` and the exact tail (1 at `γ = 0`, else 0) is returned.
pub fn bernstein_delta_tail(summary: &ModelSummary, gamma: f64) -> f64 {
    bernstein_tail(summary.a_l2, summary.a_linf, gamma)
}

/// [`bernstein_delta_tail`] from the two norms of `a`.
pub fn bernstein_tail(a_l2: f64, a_linf: f64, gamma: f64) -> f64 {
    if a_l2 == 0.0 {
        return if gamma <= 0.0 { 1.0 } else { 0.0 };
    }
    let (gaussian, exponential) = bernstein_exponentials(a_l2, a_linf, gamma);
    2.0 * gaussian.max(exponential)
}

/// The two exponentials inside [`bernstein_delta_tail`].
pub fn bernstein_parts(summary: &ModelSummary, gamma: f64) -> (f64, f64) {
    if summary.a_l2 == 0.0 {
        return (0.0, 0.0);
    }
    bernstein_exponentials(summary.a_l2, summary.a_linf, gamma)
}

fn bernstein_exponentials(a_l2: f64, a_linf: f64, gamma: f64) -> (f64, f64) {
    (
        (-gamma * gamma / (4.0 * a_l2 * a_l2)).exp(),
        (-gamma / (4.0 * a_linf)).exp(),
    )
}

/// `P{‖Δ‖_∞ ≥ γ} ≤ Σ_j bound_j(γ)` for vector `a_i`, with `(|a^{(j)}|₂, |a^{(j)}|_∞)` per coordinate.
pub fn bernstein_coordinatewise(norms: &[(f64, f64)], gamma: f64) -> f64 {
    norms
        .iter()
        .map(|&(l2, linf)| bernstein_tail(l2, linf, gamma).min(1.0))
        .sum::<f64>()
        .min(1.0)
}

/// Exact law of `Δ` when every `a_i` is a multiple of `step`.
///
/// Each `a_i·(ν_i − 1)` is a scaled, shifted Poisson(1) law cut where its
/// tail drops below `tail_tol`.
pub fn delta_lattice_law(
    summary: &ModelSummary,
    step: f64,
    tail_tol: f64,
) -> Option<LatticeDistribution> {
    let indices: Option<Vec<i64>> = summary.a.iter().map(|&a| lattice_index(a, step)).collect();
    let indices = indices?;
    let cutoff = poisson_cutoff(1.0, tail_tol);
    let mut law = LatticeDistribution::dirac_index(step, 0);
    for k in indices.into_iter().filter(|&k| k != 0) {
        let atoms: Vec<(i64, f64)> = cutoff
            .pmf
            .iter()
            .enumerate()
            .map(|(m, &w)| (k * (m as i64 - 1), w))
            .collect();
        let lo = atoms.iter().map(|a| a.0).min()?;
        let hi = atoms.iter().map(|a| a.0).max()?;
        let mut weights = vec![0.0; (hi - lo + 1) as usize];
        for (idx, w) in atoms {
            weights[(idx - lo) as usize] += w;
        }
        let term = LatticeDistribution::from_parts(step, lo, weights, cutoff.tail)?;
        law = law.convolve(&term).ok()?;
    }
    Some(law)
}

/// `P{|Δ| ≥ γ}` read off an exact lattice law. The upper value adds the lost mass.
pub fn lattice_tail(law: &LatticeDistribution, gamma: f64) -> f64 {
    let slack = 1e-9 * law.step();
    law.atoms()
        .filter(|(x, _)| x.abs() >= gamma - slack)
        .map(|(_, w)| w)
        .sum::<f64>()
        + law.lost_mass()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl McEstimate {
    pub fn from_counts(hits: u64, reps: usize) -> Self {
        let p = hits as f64 / reps as f64;
        Self {
            estimate: p,
            std_error: (p * (1.0 - p) / reps as f64).sqrt(),
        }
    }

    /// `estimate + k·std_error`.
    pub fn upper(&self, k: f64) -> f64 {
        self.estimate + k * self.std_error
    }
}

/// One draw of `Σ a_i·(ν_i − 1)`.
pub fn sample_delta<R: Rng + ?Sized>(a: &[f64], poisson: &Poisson<f64>, rng: &mut R) -> f64 {
    a.iter()
        .map(|&ai| {
            let nu: f64 = poisson.sample(rng);
            ai * (nu - 1.0)
        })
        .sum()
}

/// Monte-Carlo `P{|Δ| ≥ γ}` for several thresholds from one set of draws.
pub fn delta_tail_mc_grid(
    summary: &ModelSummary,
    gammas: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    if reps < MIN_MC_REPS {
        return Err(Error::InvalidParam(format!(
            "reps = {reps} below the minimum of {MIN_MC_REPS}"
        )));
    }
    let poisson = Poisson::new(1.0).expect("unit rate");
    let slack = 1e-12 * summary.a_linf.max(1.0);
    let chunks = rng::chunked(reps, |range| {
        let mut hits = vec![0u64; gammas.len()];
        for rep in range {
            let mut r = rng::stream(seed, purpose::DELTA, rep as u64);
            let d = sample_delta(&summary.a, &poisson, &mut r).abs();
            for (h, &g) in hits.iter_mut().zip(gammas) {
                if d >= g - slack {
                    *h += 1;
                }
            }
        }
        hits
    });
    let mut hits = vec![0u64; gammas.len()];
    for chunk in chunks {
        for (h, c) in hits.iter_mut().zip(chunk) {
            *h += c;
        }
    }
    Ok(hits
        .into_iter()
        .map(|h| McEstimate::from_counts(h, reps))
        .collect())
}

/// Monte-Carlo `P{|Δ| ≥ γ}` with its binomial standard error.
pub fn delta_tail_mc(
    summary: &ModelSummary,
    gamma: f64,
    reps: usize,
    seed: u64,
) -> Result<McEstimate> {
    Ok(delta_tail_mc_grid(summary, &[gamma], reps, seed)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn summary(a: Vec<f64>) -> ModelSummary {
        ModelSummary {
            p: 0.0,
            a_l2: a.iter().map(|x| x * x).sum::<f64>().sqrt(),
            a_linf: a.iter().map(|x| x.abs()).fold(0.0, f64::max),
            sigma2: vec![0.0; a.len()],
            b2: 0.0,
            sum_p2: 0.0,
            a,
        }
    }

    #[test]
    fn bernstein_examples() {
        assert_eq!(bernstein_delta_tail(&summary(vec![1.0, -2.0]), 0.0), 2.0);
        assert_eq!(bernstein_delta_tail(&summary(vec![0.0, 0.0]), 0.5), 0.0);
        assert_eq!(bernstein_delta_tail(&summary(vec![0.0]), 0.0), 1.0);
        let b = bernstein_delta_tail(&summary(vec![1.0]), 2.0);
        assert_abs_diff_eq!(b, 2.0 * (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(b, 1.2131, epsilon = 1e-4);
    }

    #[test]
    fn mc_zero_centering() {
        let est = delta_tail_mc(&summary(vec![0.0; 3]), 0.5, MIN_MC_REPS, 1).unwrap();
        assert_eq!(est.estimate, 0.0);
    }

    #[test]
    fn mc_single_unit_centering() {
        // P{|ν − 1| ≥ 1} = P{ν ≠ 1} = 1 − e^{−1}
        let est = delta_tail_mc(&summary(vec![1.0]), 0.5, 200_000, 11).unwrap();
        let exact = 1.0 - (-1.0f64).exp();
        assert!(
            (est.estimate - exact).abs() <= 3.0 * est.std_error,
            "{est:?}"
        );
    }

    #[test]
    fn mc_rejects_few_reps() {
        assert!(delta_tail_mc(&summary(vec![1.0]), 0.5, 100, 1).is_err());
    }

    #[test]
    fn mc_is_deterministic() {
        let s = summary(vec![1.0, 2.0, -1.0]);
        let a = delta_tail_mc_grid(&s, &[0.5, 2.0, 4.0], 20_000, 5).unwrap();
        let b = delta_tail_mc_grid(&s, &[0.5, 2.0, 4.0], 20_000, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lattice_law_of_single_centering() {
        let s = summary(vec![2.0]);
        let law = delta_lattice_law(&s, 1.0, 1e-15).unwrap();
        // Δ = 2(ν − 1) ∈ {−2, 0, 2, …}
        assert_eq!(law.start(), -2);
        assert_abs_diff_eq!(law.weight_at(-2), (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(law.weight_at(0), (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(law.weight_at(-1), 0.0);
        assert_abs_diff_eq!(law.moments().mean, 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(
            lattice_tail(&law, 1.0),
            1.0 - (-1.0f64).exp(),
            epsilon = 1e-14
        );
        assert!(delta_lattice_law(&summary(vec![0.5]), 1.0, 1e-15).is_none());
    }

    #[test]
    fn lattice_law_matches_mc() {
        let s = summary(vec![1.0, -2.0, 3.0]);
        let law = delta_lattice_law(&s, 1.0, 1e-15).unwrap();
        assert_abs_diff_eq!(law.moments().variance, 14.0, epsilon = 1e-10);
        let gammas = [0.0, 1.0, 3.0, 6.0, 10.0];
        let mc = delta_tail_mc_grid(&s, &gammas, 100_000, 3).unwrap();
        for (g, est) in gammas.iter().zip(mc) {
            let exact = lattice_tail(&law, *g);
            assert!(
                (est.estimate - exact).abs() <= 4.0 * est.std_error + 1e-12,
                "gamma={g}: mc {est:?} exact {exact}"
            );
        }
    }
}
