use serde::Serialize;

use super::{MarkSampler, Region};
use crate::bounds::McEstimate;
use crate::error::{Error, Result};
use crate::rng::{self, purpose};

fn check_reps(reps: usize) -> Result<()> {
    if reps < 2 {
        return Err(Error::InvalidParam(format!("reps = {reps}, need at least 2")));
    }
    Ok(())
}

/// Per-component frequency of the rare branch over `reps` raw samples.
pub fn rare_frequencies(sampler: &MarkSampler, reps: usize, seed: u64) -> Result<Vec<McEstimate>> {
    check_reps(reps)?;
    let n = sampler.len();
    let chunks = rng::chunked(reps, |range| {
        let mut hits = vec![0u64; n];
        for rep in range {
            let mut r = rng::stream(seed, purpose::RAW_SAMPLE, rep as u64);
            sampler.visit_x(&mut r, |i, _, rare| hits[i] += rare as u64);
        }
        hits
    });
    let mut hits = vec![0u64; n];
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

/// Moments of the total count `Σ ν_i` of the Poissonized sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountReport {
    pub reps: usize,
    /// Expected mean and variance, both `n`.
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
}

impl CountReport {
    pub fn mean_within(&self, k: f64) -> bool {
        (self.mean - self.n as f64).abs() <= k * self.se_mean
    }

    pub fn variance_within(&self, k: f64) -> bool {
        (self.variance - self.n as f64).abs() <= k * self.se_variance
    }
}

pub fn count_check(sampler: &MarkSampler, reps: usize, seed: u64) -> Result<CountReport> {
    check_reps(reps)?;
    let chunks = rng::chunked(reps, |range| {
        let mut raw = [0u128; 4];
        for rep in range {
            let mut r = rng::stream(seed, purpose::POISSONIZED, rep as u64);
            let mut total = 0u128;
            sampler.visit_y(&mut r, |_, nu| total += nu as u128, |_, _| {});
            let mut pow = 1u128;
            for m in raw.iter_mut() {
                pow *= total;
                *m += pow;
            }
        }
        raw
    });
    let mut raw = [0u128; 4];
    for chunk in chunks {
        for (a, c) in raw.iter_mut().zip(chunk) {
            *a += c;
        }
    }
    let r = reps as f64;
    let [m1, m2, m3, m4] = raw.map(|s| s as f64 / r);
    let var_pop = m2 - m1 * m1;
    let central4 = m4 - 4.0 * m3 * m1 + 6.0 * m2 * m1 * m1 - 3.0 * m1.powi(4);
    let variance = var_pop * r / (r - 1.0);
    Ok(CountReport {
        reps,
        n: sampler.len(),
        mean: m1,
        variance,
        se_mean: (variance / r).sqrt(),
        se_variance: ((central4 - var_pop * var_pop).max(0.0) / r).sqrt(),
    })
}

/// Count statistics for two boxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountStats {
    pub mean_a: f64,
    pub mean_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub covariance: f64,
    /// `None` when either count is constant.
    pub correlation: Option<f64>,
    pub se_mean_a: f64,
    pub se_mean_b: f64,
}

impl CountStats {
    fn from_sums(s: [u64; 5], reps: usize) -> Self {
        let r = reps as f64;
        let [sa, sb, saa, sbb, sab] = s.map(|v| v as f64);
        let (ma, mb) = (sa / r, sb / r);
        let unbiased = |sxy: f64, mx: f64, my: f64| (sxy - r * mx * my) / (r - 1.0);
        let (va, vb, cov) = (unbiased(saa, ma, ma), unbiased(sbb, mb, mb), unbiased(sab, ma, mb));
        let correlation = (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt());
        Self {
            mean_a: ma,
            mean_b: mb,
            var_a: va,
            var_b: vb,
            covariance: cov,
            correlation,
            se_mean_a: (va / r).sqrt(),
            se_mean_b: (vb / r).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub reps: usize,
    pub poissonized: CountStats,
    pub raw: CountStats,
    /// `Σ_i F_i(A)` and `Σ_i F_i(B)`, the intensity of each box.
    pub expected_a: f64,
    pub expected_b: f64,
    /// `3/√reps`.
    pub band: f64,
    /// `|corr(N(Y∩A), N(Y∩B))| ≤ band`.
    pub poissonized_within_band: bool,
    /// Both box means of `Y` within three standard errors of the intensity.
    pub intensity_matches: bool,
}

/// Count correlation between two disjoint boxes, for the Poissonized and the raw sample.
pub fn independence_check(
    sampler: &MarkSampler,
    a: &Region,
    b: &Region,
    reps: usize,
    seed: u64,
) -> Result<IndependenceReport> {
    check_reps(reps)?;
    for region in [a, b] {
        if region.dim() != sampler.dim() {
            return Err(Error::InvalidParam(format!(
                "box of dimension {} for marks of dimension {}",
                region.dim(),
                sampler.dim()
            )));
        }
    }
    if !a.is_disjoint(b) {
        return Err(Error::OverlappingRegions);
    }
    let accumulate = |acc: &mut [u64; 5], na: u64, nb: u64| {
        acc[0] += na;
        acc[1] += nb;
        acc[2] += na * na;
        acc[3] += nb * nb;
        acc[4] += na * nb;
    };
    let chunks = rng::chunked(reps, |range| {
        let (mut y, mut x) = ([0u64; 5], [0u64; 5]);
        for rep in range {
            let mut r = rng::stream(seed, purpose::POISSONIZED, rep as u64);
            let (mut na, mut nb) = (0u64, 0u64);
            sampler.visit_y(&mut r, |_, _| {}, |_, m| {
                na += a.contains(m) as u64;
                nb += b.contains(m) as u64;
            });
            accumulate(&mut y, na, nb);

            let mut r = rng::stream(seed, purpose::RAW_SAMPLE, rep as u64);
            let (mut na, mut nb) = (0u64, 0u64);
            sampler.visit_x(&mut r, |_, m, _| {
                na += a.contains(m) as u64;
                nb += b.contains(m) as u64;
            });
            accumulate(&mut x, na, nb);
        }
        (y, x)
    });
    let (mut y, mut x) = ([0u64; 5], [0u64; 5]);
    for (cy, cx) in chunks {
        for k in 0..5 {
            y[k] += cy[k];
            x[k] += cx[k];
        }
    }
    let poissonized = CountStats::from_sums(y, reps);
    let raw = CountStats::from_sums(x, reps);
    let expected_a: f64 = sampler.components().iter().map(|c| c.probability(a)).sum();
    let expected_b: f64 = sampler.components().iter().map(|c| c.probability(b)).sum();
    let band = 3.0 / (reps as f64).sqrt();
    Ok(IndependenceReport {
        reps,
        poissonized,
        raw,
        expected_a,
        expected_b,
        band,
        poissonized_within_band: poissonized.correlation.is_none_or(|c| c.abs() <= band),
        intensity_matches: (poissonized.mean_a - expected_a).abs()
            <= 3.0 * poissonized.se_mean_a
            && (poissonized.mean_b - expected_b).abs() <= 3.0 * poissonized.se_mean_b,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{MarkComponent, VectorLaw};
    use super::*;

    fn two_cell(n: usize, q: f64) -> MarkSampler {
        let u = VectorLaw::new(1, vec![(vec![0.0], q), (vec![1.0], 1.0 - q)]).unwrap();
        let v = VectorLaw::new(1, vec![(vec![5.0], 1.0)]).unwrap();
        let comps = (0..n)
            .map(|_| MarkComponent {
                p: 0.0,
                u: u.clone(),
                v: v.clone(),
            })
            .collect();
        MarkSampler::new(1, comps).unwrap()
    }

    fn cell(x: f64) -> Region {
        Region::new(vec![x - 0.25], vec![x + 0.25]).unwrap()
    }

    #[test]
    fn overlapping_boxes_rejected() {
        let s = two_cell(1, 0.5);
        let a = Region::new(vec![0.0], vec![1.0]).unwrap();
        let b = Region::new(vec![1.0], vec![2.0]).unwrap();
        assert_eq!(
            independence_check(&s, &a, &b, 100, 1),
            Err(Error::OverlappingRegions)
        );
    }

    #[test]
    fn raw_single_component_is_negatively_correlated() {
        let s = two_cell(1, 0.4);
        let rep = independence_check(&s, &cell(0.0), &cell(1.0), 50_000, 2).unwrap();
        let raw = rep.raw.correlation.unwrap();
        assert!((raw + 1.0).abs() < 1e-9, "{raw}");
        assert!(rep.poissonized_within_band, "{rep:?}");
        assert!(rep.intensity_matches, "{rep:?}");
        assert!((rep.expected_a - 0.4).abs() < 1e-15);
    }

    #[test]
    fn counts_have_poisson_moments() {
        let s = two_cell(7, 0.5);
        let c = count_check(&s, 100_000, 4).unwrap();
        assert!(c.mean_within(3.0), "{c:?}");
        assert!(c.variance_within(3.0), "{c:?}");
    }

    #[test]
    fn rare_frequency_tracks_p() {
        let u = VectorLaw::new(1, vec![(vec![0.0], 1.0)]).unwrap();
        let comps = [0.05, 0.3]
            .iter()
            .map(|&p| MarkComponent {
                p,
                u: u.clone(),
                v: u.clone(),
            })
            .collect();
        let s = MarkSampler::new(1, comps).unwrap();
        let reps = 200_000;
        let f = rare_frequencies(&s, reps, 8).unwrap();
        for (est, p) in f.iter().zip([0.05, 0.3]) {
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            assert!((est.estimate - p).abs() <= 3.0 * se, "{est:?}");
        }
    }
}
