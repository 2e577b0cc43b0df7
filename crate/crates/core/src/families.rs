//! Seeded random model families.
//!
//! Rare-branch laws `V_i` come in two regimes: heavy (atoms spread over a
//! wide window) and light (a few atoms near the origin). Instance `id` of a
//! family depends only on `(seed, id)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dist::LatticeDistribution;
use crate::error::{Error, Result};
use crate::model::{Component, RareEventModel};
use crate::rng::{self, purpose};
use crate::simulator::{MarkComponent, MarkSampler, VectorLaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// `U_i = E_0`, `n ≤ 50`, `p_i ≤ 0.1`.
    Degenerate,
    /// General `U_i`: mostly symmetric about a lattice center, some skewed;
    /// about one instance in ten has only point masses for `U_i` (`B² = 0`).
    General,
    /// Like `General`, never with `B² = 0`.
    Centered,
}

impl FamilyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FamilyKind::Degenerate => "degenerate",
            FamilyKind::General => "general",
            FamilyKind::Centered => "centered",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degenerate" => Ok(FamilyKind::Degenerate),
            "general" => Ok(FamilyKind::General),
            "centered" => Ok(FamilyKind::Centered),
            other => Err(Error::InvalidParam(format!("unknown family `{other}`"))),
        }
    }
}

fn law(atoms: &[(i64, f64)]) -> LatticeDistribution {
    LatticeDistribution::from_atoms(1.0, atoms).expect("generated law")
}

fn normalized(raw: Vec<(i64, f64)>) -> Vec<(i64, f64)> {
    let total: f64 = raw.iter().map(|a| a.1).sum();
    raw.into_iter().map(|(k, w)| (k, w / total)).collect()
}

fn rare_law(rng: &mut ChaCha8Rng, heavy: bool) -> LatticeDistribution {
    let (count, reach) = if heavy { (1..=6, 40) } else { (1..=3, 4) };
    let m = rng.random_range(count);
    let raw = (0..m)
        .map(|_| {
            let mut k = rng.random_range(-reach..=reach);
            if k == 0 {
                k = 1;
            }
            (k, rng.random_range(0.1..1.0))
        })
        .collect();
    law(&normalized(raw))
}

fn regular_law(rng: &mut ChaCha8Rng, point_mass: bool) -> LatticeDistribution {
    let center = rng.random_range(-3i64..=3);
    if point_mass {
        return law(&[(center, 1.0)]);
    }
    if rng.random_bool(0.3) {
        let m = rng.random_range(2..=4);
        let raw = (0..m)
            .map(|_| (rng.random_range(-3i64..=3), rng.random_range(0.1..1.0)))
            .collect();
        return law(&normalized(raw));
    }
    let half = rng.random_range(1i64..=3);
    let mut raw = Vec::new();
    for k in 1..=half {
        let w = rng.random_range(0.1..1.0);
        raw.push((center - k, w));
        raw.push((center + k, w));
    }
    if rng.random_bool(0.5) {
        raw.push((center, rng.random_range(0.1..1.0)));
    }
    law(&normalized(raw))
}

/// Instance `id` of a family.
pub fn generate(kind: FamilyKind, seed: u64, id: u64) -> RareEventModel {
    let mut rng = rng::stream(seed, purpose::FAMILY, id);
    let heavy = rng.random_bool(0.5);
    let (n_max, point_masses) = match kind {
        FamilyKind::Degenerate => (50, true),
        FamilyKind::General => (30, rng.random_bool(0.1)),
        FamilyKind::Centered => (30, false),
    };
    let n = rng.random_range(1..=n_max);
    let components = (0..n)
        .map(|_| {
            let p = rng.random_range(0.0..=0.1);
            let u = match kind {
                FamilyKind::Degenerate => law(&[(0, 1.0)]),
                _ => regular_law(&mut rng, point_masses),
            };
            let v = rare_law(&mut rng, heavy);
            Component::new(p, u, v).expect("generated component")
        })
        .collect();
    RareEventModel::new(1.0, components).expect("generated model")
}

/// A random vector-mark model in dimension `dim`, `U_i` inside the unit cube.
pub fn generate_vector(dim: usize, seed: u64, id: u64) -> Result<MarkSampler> {
    let mut rng = rng::stream(seed, purpose::FAMILY, id);
    let n = rng.random_range(2..=12);
    let point = |rng: &mut ChaCha8Rng, reach: f64| -> Vec<f64> {
        (0..dim).map(|_| rng.random_range(-reach..=reach)).collect()
    };
    let components = (0..n)
        .map(|_| {
            let p = rng.random_range(0.0..=0.1);
            let u_atoms = (0..3).map(|_| (point(&mut rng, 1.0), 1.0 / 3.0)).collect();
            let v_atoms = vec![(point(&mut rng, 8.0), 0.5), (point(&mut rng, 8.0), 0.5)];
            Ok(MarkComponent {
                p,
                u: VectorLaw::new(dim, u_atoms)?,
                v: VectorLaw::new(dim, v_atoms)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MarkSampler::new(dim, components)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        for id in 0..50 {
            let a = generate(FamilyKind::Degenerate, 3, id);
            assert_eq!(a, generate(FamilyKind::Degenerate, 3, id));
            assert!(a.len() <= 50);
            for c in a.components() {
                assert!(c.p <= 0.1);
                assert_eq!(c.u.max_abs_atom(), 0.0);
            }
        }
    }

    #[test]
    fn general_family_has_both_regimes() {
        let models: Vec<_> = (0..200).map(|id| generate(FamilyKind::General, 1, id)).collect();
        let degenerate = models.iter().filter(|m| m.summary().b2 == 0.0).count();
        assert!(degenerate > 0 && degenerate < 60, "{degenerate}");
        let skewed = models
            .iter()
            .filter(|m| m.summary().a.iter().any(|a| a.fract() != 0.0))
            .count();
        assert!(skewed > 0);
        assert!((0..100).all(|id| generate(FamilyKind::Centered, 1, id).summary().b2 > 0.0));
    }

    #[test]
    fn vector_models() {
        let s = generate_vector(3, 2, 0).unwrap();
        assert_eq!(s.dim(), 3);
        assert!(s.u_radius() <= 3f64.sqrt());
    }
}
