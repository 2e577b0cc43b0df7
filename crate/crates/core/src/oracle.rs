//! Slow brute-force references for the fast paths.
//!
//! Nothing here shares code with [`crate::dist`]'s kernels: convolution is a
//! plain double loop, the compound Poisson law is the literal truncated
//! series, and small models are solved by exhaustive enumeration.

use std::collections::BTreeMap;

use crate::dist::LatticeDistribution;
use crate::error::{Error, Result};
use crate::model::RareEventModel;

/// Largest `|F|·|G|` accepted by [`convolve_direct_reference`].
pub const MAX_ATOM_PAIRS: usize = 10_000_000;
/// Largest series index accepted by [`compound_poisson_series`].
pub const MAX_SERIES_TERMS: u32 = 200;
/// Enumeration caps for [`exact_rho_small`].
pub const MAX_SMALL_COMPONENTS: usize = 6;
pub const MAX_SMALL_ATOMS: usize = 4;

fn raw(step: f64, start: i64, weights: Vec<f64>, lost: f64) -> LatticeDistribution {
    LatticeDistribution::from_parts(step, start, weights, lost).expect("non-empty oracle law")
}

pub fn convolve_direct_reference(
    f: &LatticeDistribution,
    g: &LatticeDistribution,
) -> Result<LatticeDistribution> {
    if f.len().saturating_mul(g.len()) > MAX_ATOM_PAIRS {
        return Err(Error::TooLarge(format!(
            "{} x {} atom pairs",
            f.len(),
            g.len()
        )));
    }
    if (f.step() - g.step()).abs() > 1e-12 * f.step().max(g.step()) {
        return Err(Error::IncompatibleLattice {
            left: f.step(),
            right: g.step(),
        });
    }
    let mut out = vec![0.0; f.len() + g.len() - 1];
    for i in 0..f.len() {
        for j in 0..g.len() {
            out[i + j] += f.weights()[i] * g.weights()[j];
        }
    }
    let lost = 1.0 - (1.0 - f.lost_mass()) * (1.0 - g.lost_mass());
    Ok(raw(f.step(), f.start() + g.start(), out, lost))
}

/// Literal partial sum of `e(αH)` plus its Poisson tail.
#[derive(Debug, Clone)]
pub struct SeriesResult {
    pub law: LatticeDistribution,
    /// `P{Poisson(α) > M}`.
    pub remainder: f64,
}

pub fn compound_poisson_series(
    alpha: f64,
    h: &LatticeDistribution,
    max_terms: u32,
) -> Result<SeriesResult> {
    if max_terms > MAX_SERIES_TERMS {
        return Err(Error::TooLarge(format!("{max_terms} series terms")));
    }
    let step = h.step();
    let mut terms: BTreeMap<i64, f64> = BTreeMap::new();
    let mut coef = (-alpha).exp();
    let mut power = LatticeDistribution::point_mass(0.0, step)?;
    let mut kept = 0.0;
    for m in 0..=max_terms {
        if m > 0 {
            coef *= alpha / m as f64;
            power = convolve_direct_reference(&power, h)?;
        }
        kept += coef;
        for (i, w) in power.weights().iter().enumerate() {
            *terms.entry(power.start() + i as i64).or_insert(0.0) += coef * w;
        }
    }
    // Tail summed forward rather than as 1 − kept.
    let mut remainder = 0.0;
    let mut t = coef;
    let mut m = max_terms as f64;
    loop {
        m += 1.0;
        t *= alpha / m;
        remainder += t;
        if t < 1e-300 || (m > alpha && t < remainder * 1e-17) {
            break;
        }
    }
    let start = *terms.keys().next().expect("at least one term");
    let end = *terms.keys().next_back().expect("at least one term");
    let mut weights = vec![0.0; (end - start + 1) as usize];
    for (k, w) in terms {
        weights[(k - start) as usize] = w;
    }
    let mass: f64 = weights.iter().sum();
    let lost = (1.0 - mass).max(0.0).max(1.0 - kept);
    Ok(SeriesResult {
        law: raw(step, start, weights, lost),
        remainder,
    })
}

fn cdf_sup_distance(a: &BTreeMap<i64, f64>, b: &BTreeMap<i64, f64>) -> f64 {
    let keys: std::collections::BTreeSet<i64> = a.keys().chain(b.keys()).copied().collect();
    let (mut ca, mut cb, mut best) = (0.0f64, 0.0f64, 0.0f64);
    for k in keys {
        ca += a.get(&k).copied().unwrap_or(0.0);
        cb += b.get(&k).copied().unwrap_or(0.0);
        best = best.max((ca - cb).abs());
    }
    best
}

/// `ρ(H1, H2)` for a small model without transforms or per-factor truncation.
///
/// `H1` is enumerated over every branch and atom choice. `H2` uses the identity
/// `∏ e(F_i) = e(n·F̄)` with `F̄ = (1/n)·Σ F_i`, summed until the Poisson(n)
/// tail is far below double precision.
pub fn exact_rho_small(model: &RareEventModel) -> Result<f64> {
    let n = model.len();
    if n > MAX_SMALL_COMPONENTS {
        return Err(Error::TooLarge(format!("{n} components")));
    }
    for c in model.components() {
        let atoms = c.u.atoms().count().max(c.v.atoms().count());
        if atoms > MAX_SMALL_ATOMS {
            return Err(Error::TooLarge(format!("law with {atoms} atoms")));
        }
    }
    let index = |law: &LatticeDistribution| -> Vec<(i64, f64)> {
        law.weights()
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, &w)| (law.start() + i as i64, w))
            .collect()
    };

    let mut h1: BTreeMap<i64, f64> = BTreeMap::from([(0, 1.0)]);
    for c in model.components() {
        let mut choices: Vec<(i64, f64)> = index(&c.u)
            .into_iter()
            .map(|(k, w)| (k, (1.0 - c.p) * w))
            .collect();
        choices.extend(index(&c.v).into_iter().map(|(k, w)| (k, c.p * w)));
        let mut next = BTreeMap::new();
        for (&s, &ws) in &h1 {
            for &(k, w) in &choices {
                *next.entry(s + k).or_insert(0.0) += ws * w;
            }
        }
        h1 = next;
    }

    let mut mean_law: BTreeMap<i64, f64> = BTreeMap::new();
    for c in model.components() {
        for (k, w) in index(&c.u) {
            *mean_law.entry(k).or_insert(0.0) += (1.0 - c.p) * w / n as f64;
        }
        for (k, w) in index(&c.v) {
            *mean_law.entry(k).or_insert(0.0) += c.p * w / n as f64;
        }
    }
    let rate = n as f64;
    let mut h2: BTreeMap<i64, f64> = BTreeMap::new();
    let mut power: BTreeMap<i64, f64> = BTreeMap::from([(0, 1.0)]);
    let mut coef = (-rate).exp();
    let mut m = 0u32;
    loop {
        for (&k, &w) in &power {
            *h2.entry(k).or_insert(0.0) += coef * w;
        }
        m += 1;
        coef *= rate / m as f64;
        if m as f64 > rate && coef < 1e-20 {
            break;
        }
        let mut next = BTreeMap::new();
        for (&s, &ws) in &power {
            for (&k, &w) in &mean_law {
                *next.entry(s + k).or_insert(0.0) += ws * w;
            }
        }
        power = next;
    }
    Ok(cdf_sup_distance(&h1, &h2))
}
