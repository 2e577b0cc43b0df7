//! Distances and concentration functionals.
//!
//! Exact versions work on [`LatticeDistribution`]s that share a step; both
//! CDFs are then right-continuous step functions that only jump on the common
//! lattice, so every supremum is attained at a lattice point of the union
//! support. Empirical versions work on sorted Monte-Carlo samples.

use serde::Serialize;

use crate::dist::{check_same_step, LatticeDistribution, LATTICE_TOLERANCE};
use crate::error::{Error, Result};

/// Default DKW confidence parameter.
pub const DEFAULT_DKW_ALPHA: f64 = 0.01;

/// A value together with an additive uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub uncertainty: f64,
}

/// Distribution function of a lattice law with O(1) evaluation.
#[derive(Debug, Clone)]
pub struct LatticeCdf {
    step: f64,
    start: i64,
    cumulative: Vec<f64>,
}

impl LatticeCdf {
    pub fn new(law: &LatticeDistribution) -> Self {
        Self {
            step: law.step(),
            start: law.start(),
            cumulative: law.cumulative(),
        }
    }

    /// `F(x)`, right-continuous; points within a hair of a lattice point count as on it.
    pub fn eval(&self, x: f64) -> f64 {
        let k = (x / self.step + LATTICE_TOLERANCE).floor();
        self.at_index_f(k)
    }

    fn at_index_f(&self, k: f64) -> f64 {
        if k < self.start as f64 {
            0.0
        } else {
            let i = k - self.start as f64;
            if i >= (self.cumulative.len() - 1) as f64 {
                *self.cumulative.last().expect("non-empty law")
            } else {
                self.cumulative[i as usize]
            }
        }
    }

    /// `F` at lattice index `k`.
    pub fn at_index(&self, k: i64) -> f64 {
        self.at_index_f(k as f64)
    }
}

pub fn cdf_at(law: &LatticeDistribution, x: f64) -> f64 {
    LatticeCdf::new(law).eval(x)
}

/// Kolmogorov distance `sup_x |F(x) − H(x)|`.
pub fn kolmogorov_rho(f: &LatticeDistribution, h: &LatticeDistribution) -> Result<f64> {
    check_same_step(f.step(), h.step())?;
    let lo = f.start().min(h.start());
    let hi = f.end().max(h.end());
    let (mut cf, mut ch, mut best) = (0.0f64, 0.0f64, 0.0f64);
    for k in lo..=hi {
        cf += f.weight_at(k);
        ch += h.weight_at(k);
        best = best.max((cf - ch).abs());
    }
    Ok(best.min(1.0))
}

/// Total variation `½·Σ|F{x} − H{x}|`; the uncertainty is half the combined lost mass.
pub fn total_variation(f: &LatticeDistribution, h: &LatticeDistribution) -> Result<Estimate> {
    check_same_step(f.step(), h.step())?;
    let lo = f.start().min(h.start());
    let hi = f.end().max(h.end());
    let sum: f64 = (lo..=hi)
        .map(|k| (f.weight_at(k) - h.weight_at(k)).abs())
        .sum();
    Ok(Estimate {
        value: (0.5 * sum).min(1.0),
        uncertainty: 0.5 * (f.lost_mass() + h.lost_mass()),
    })
}

fn levy_holds(
    f: &LatticeDistribution,
    h: &LatticeDistribution,
    fc: &LatticeCdf,
    hc: &LatticeCdf,
    eps: f64,
) -> bool {
    const SLACK: f64 = 1e-14;
    // F(x − ε) − ε ≤ H(x): both sides jump only at atoms of H or at atoms of F shifted by ε.
    let lower_ok = h
        .atoms()
        .map(|(x, _)| x)
        .chain(f.atoms().map(|(x, _)| x + eps))
        .all(|x| fc.eval(x - eps) - eps <= hc.eval(x) + SLACK);
    if !lower_ok {
        return false;
    }
    // H(x) ≤ F(x + ε) + ε
    h.atoms()
        .map(|(x, _)| x)
        .chain(f.atoms().map(|(x, _)| x - eps))
        .all(|x| hc.eval(x) <= fc.eval(x + eps) + eps + SLACK)
}

/// Lévy distance: bisection on `ε`, then snapped to the exact critical value.
pub fn levy_distance(f: &LatticeDistribution, h: &LatticeDistribution) -> Result<f64> {
    let step = check_same_step(f.step(), h.step())?;
    let (fc, hc) = (LatticeCdf::new(f), LatticeCdf::new(h));
    if levy_holds(f, h, &fc, &hc, 0.0) {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let resolution = 1e-9 * step;
    for _ in 0..200 {
        if hi - lo <= resolution {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if levy_holds(f, h, &fc, &hc, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(snap_levy(f, h, &fc, &hc, lo, hi, step))
}

/// Inside a bracket narrower than the lattice step, the binding constraint is linear in `ε`,
/// so the exact value is either a CDF gap or a multiple of the step.
fn snap_levy(
    f: &LatticeDistribution,
    h: &LatticeDistribution,
    fc: &LatticeCdf,
    hc: &LatticeCdf,
    lo: f64,
    hi: f64,
    step: f64,
) -> f64 {
    let lower = h
        .atoms()
        .map(|(x, _)| x)
        .chain(f.atoms().map(|(x, _)| x + hi))
        .map(|x| fc.eval(x - hi) - hc.eval(x));
    let upper = h
        .atoms()
        .map(|(x, _)| x)
        .chain(f.atoms().map(|(x, _)| x - hi))
        .map(|x| hc.eval(x) - fc.eval(x + hi));
    let gap = lower.chain(upper).fold(0.0f64, f64::max);
    let multiple = (hi / step).floor() * step;
    [gap, multiple]
        .into_iter()
        .filter(|&c| c >= lo && c <= hi && levy_holds(f, h, fc, hc, c))
        .fold(hi, f64::min)
}

/// Concentration function `Q(F, b) = sup_x F{[x, x + b]}`.
///
/// Closed windows: a window of length `b` covers `floor(b/h) + 1` lattice cells.
pub fn concentration_q(law: &LatticeDistribution, b: f64) -> f64 {
    let b = b.max(0.0);
    let cells = (b / law.step() + LATTICE_TOLERANCE).floor();
    let w = law.weights();
    if cells >= (w.len() - 1) as f64 {
        return law.mass();
    }
    let width = cells as usize + 1;
    let mut window: f64 = w[..width].iter().sum();
    let mut best = window;
    for i in width..w.len() {
        window += w[i] - w[i - width];
        best = best.max(window);
    }
    best
}

/// Sorted sample with its Dvoretzky–Kiefer–Wolfowitz band radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCdf {
    values: Vec<f64>,
    alpha: f64,
    dkw_radius: f64,
}

impl EmpiricalCdf {
    pub fn new(mut values: Vec<f64>, alpha: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidTolerance(alpha));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite sample value".into()));
        }
        values.sort_by(f64::total_cmp);
        let dkw_radius = dkw_radius(values.len(), alpha);
        Ok(Self {
            values,
            alpha,
            dkw_radius,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sample_size(&self) -> usize {
        self.values.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dkw_radius(&self) -> f64 {
        self.dkw_radius
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v <= x) as f64 / self.values.len() as f64
    }
}

/// `sqrt(ln(2/α) / 2m)`.
pub fn dkw_radius(sample_size: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * sample_size as f64)).sqrt()
}

/// Two-sample Kolmogorov–Smirnov statistic with the sum of the DKW radii.
pub fn empirical_ks(a: &EmpiricalCdf, b: &EmpiricalCdf) -> Estimate {
    let (xa, xb) = (a.values(), b.values());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = 0.0f64;
    while i < xa.len() || j < xb.len() {
        let t = match (xa.get(i), xb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < xa.len() && xa[i] <= t {
            i += 1;
        }
        while j < xb.len() && xb[j] <= t {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    Estimate {
        value: best,
        uncertainty: a.dkw_radius() + b.dkw_radius(),
    }
}

/// One-sample statistic `sup_x |F̂(x) − F(x)|` against an exact lattice law.
pub fn ks_against_law(sample: &EmpiricalCdf, law: &LatticeDistribution) -> f64 {
    let cdf = LatticeCdf::new(law);
    let mut points: Vec<f64> = law.atoms().map(|(x, _)| x).collect();
    points.extend(sample.values().iter().copied());
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
        .iter()
        .map(|&t| (sample.eval(t) - cdf.eval(t)).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn e(a: f64) -> LatticeDistribution {
        LatticeDistribution::point_mass(a, 1.0).unwrap()
    }

    fn poisson_one() -> LatticeDistribution {
        e(1.0).compound_poisson(1.0, 1e-15).unwrap()
    }

    #[test]
    fn cdf_is_right_continuous() {
        assert_eq!(cdf_at(&e(1.0), 0.999), 0.0);
        assert_eq!(cdf_at(&e(1.0), 1.0), 1.0);
        assert_abs_diff_eq!(
            cdf_at(&poisson_one(), 0.0),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(cdf_at(&poisson_one(), -0.5), 0.0);
    }

    #[test]
    fn rho_of_identical_laws_is_zero() {
        let p = poisson_one();
        assert_eq!(kolmogorov_rho(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn rho_point_mass_against_its_accompanying_law() {
        let rho = kolmogorov_rho(&e(1.0), &poisson_one()).unwrap();
        assert_abs_diff_eq!(rho, 0.367_879_441_171_442_3, epsilon = 1e-12);
    }

    #[test]
    fn rho_single_rare_component() {
        let h1 = LatticeDistribution::mixture(0.1, &e(0.0), &e(1.0)).unwrap();
        let h2 = h1.compound_poisson(1.0, 1e-15).unwrap();
        let rho = kolmogorov_rho(&h1, &h2).unwrap();
        assert_abs_diff_eq!(rho, 0.004_837_418_035_959_5, epsilon = 1e-12);
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(total_variation(&e(0.0), &e(1.0)).unwrap().value, 1.0);
        assert_eq!(total_variation(&e(3.0), &e(3.0)).unwrap().value, 0.0);
        let h1 = LatticeDistribution::mixture(0.1, &e(0.0), &e(1.0)).unwrap();
        let h2 = h1.compound_poisson(1.0, 1e-15).unwrap();
        let tv = total_variation(&h1, &h2).unwrap();
        // Only the atom at 1 gains mass: 0.1 − 0.1·e^{−0.1}.
        let expected = 0.1 - 0.1 * (-0.1f64).exp();
        assert_abs_diff_eq!(tv.value, expected, epsilon = 1e-12);
        assert!(tv.value <= 0.01);
        assert!(tv.uncertainty <= 1e-15);
    }

    #[test]
    fn levy_examples() {
        let p = poisson_one();
        assert_eq!(levy_distance(&p, &p).unwrap(), 0.0);
        for a in [1.0, 2.0, 5.0] {
            let d = levy_distance(&e(0.0), &e(a)).unwrap();
            assert_abs_diff_eq!(d, a.min(1.0), epsilon = 1e-8);
        }
        let fine = |a: f64| LatticeDistribution::point_mass(a, 0.125).unwrap();
        for a in [0.125, 0.25, 0.5, 0.875] {
            let d = levy_distance(&fine(0.0), &fine(a)).unwrap();
            assert_abs_diff_eq!(d, a, epsilon = 1e-8);
        }
    }

    #[test]
    fn levy_is_exact_below_one_step() {
        let f = LatticeDistribution::new(1.0, 0, vec![0.7, 0.3], 0.0).unwrap();
        let d = levy_distance(&f, &e(0.0)).unwrap();
        assert_abs_diff_eq!(d, 0.3, epsilon = 1e-15);
        assert!(d <= kolmogorov_rho(&f, &e(0.0)).unwrap());
    }

    #[test]
    fn concentration_examples() {
        assert_eq!(concentration_q(&e(0.0), 0.0), 1.0);
        let b = LatticeDistribution::new(1.0, 0, vec![0.5, 0.5], 0.0).unwrap();
        assert_eq!(concentration_q(&b, 0.0), 0.5);
        let uniform = LatticeDistribution::new(1.0, 0, vec![0.1; 10], 0.0).unwrap();
        assert_abs_diff_eq!(concentration_q(&uniform, 4.5), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(concentration_q(&uniform, 4.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(concentration_q(&uniform, 3.999), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(concentration_q(&uniform, 100.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn dkw_radius_formula() {
        let s = EmpiricalCdf::new(vec![1.0; 200], 0.01).unwrap();
        assert_abs_diff_eq!(
            s.dkw_radius(),
            ((200.0f64).ln() / 400.0).sqrt(),
            epsilon = 1e-15
        );
        assert!(matches!(
            EmpiricalCdf::new(vec![], 0.01),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn ks_of_identical_and_disjoint_samples() {
        let a = EmpiricalCdf::new(vec![3.0, 1.0, 2.0, 2.0], 0.01).unwrap();
        let same = empirical_ks(&a, &a.clone());
        assert_eq!(same.value, 0.0);
        assert_abs_diff_eq!(same.uncertainty, 2.0 * a.dkw_radius());

        let zeros = EmpiricalCdf::new(vec![0.0; 1_000_000], 0.01).unwrap();
        let ones = EmpiricalCdf::new(vec![1.0; 1_000_000], 0.01).unwrap();
        assert_eq!(empirical_ks(&zeros, &ones).value, 1.0);
    }

    #[test]
    fn ks_against_own_law() {
        let b = LatticeDistribution::new(1.0, 0, vec![0.5, 0.5], 0.0).unwrap();
        let s = EmpiricalCdf::new(vec![0.0, 1.0, 0.0, 1.0], 0.01).unwrap();
        assert_eq!(ks_against_law(&s, &b), 0.0);
        let s = EmpiricalCdf::new(vec![0.0, 0.0, 0.0, 1.0], 0.01).unwrap();
        assert_abs_diff_eq!(ks_against_law(&s, &b), 0.25);
    }
}
