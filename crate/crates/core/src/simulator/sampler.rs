use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::dist::{LatticeDistribution, MASS_TOLERANCE};
use crate::error::{Error, Result};
use crate::model::RareEventModel;
use crate::rng::{self, purpose};

/// Largest supported mark dimension.
pub const MAX_DIM: usize = 3;

/// A mark in `R^d`, `d ≤ 3`; unused trailing coordinates stay 0.
pub type Mark = [f64; MAX_DIM];

pub(crate) fn add(acc: &mut Mark, x: &Mark) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

pub(crate) fn norm2(x: &Mark) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Finite discrete law on `R^d`.
#[derive(Debug, Clone)]
pub struct VectorLaw {
    dim: usize,
    atoms: Vec<Mark>,
    weights: Vec<f64>,
    index: Option<WeightedIndex<f64>>,
}

impl VectorLaw {
    pub fn new(dim: usize, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidModel(format!(
                "dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        let mut marks = Vec::with_capacity(atoms.len());
        let mut weights = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            if x.len() != dim {
                return Err(Error::InvalidDistribution(format!(
                    "atom with {} coordinates in dimension {dim}",
                    x.len()
                )));
            }
            if !(w.is_finite() && w >= 0.0) || x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDistribution(format!(
                    "atom {x:?} with weight {w}"
                )));
            }
            let mut m = [0.0; MAX_DIM];
            m[..dim].copy_from_slice(&x);
            marks.push(m);
            weights.push(w);
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}"
            )));
        }
        Ok(Self::from_parts(dim, marks, weights))
    }

    fn from_parts(dim: usize, atoms: Vec<Mark>, weights: Vec<f64>) -> Self {
        let index = if atoms.len() > 1 {
            Some(WeightedIndex::new(&weights).expect("validated weights"))
        } else {
            None
        };
        Self {
            dim,
            atoms,
            weights,
            index,
        }
    }

    /// The positive atoms of a lattice law as a one-dimensional law.
    pub fn from_lattice(law: &LatticeDistribution) -> Self {
        let (atoms, weights) = law.atoms().map(|(x, w)| ([x, 0.0, 0.0], w)).unzip();
        Self::from_parts(1, atoms, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&Mark, f64)> + '_ {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    pub fn mean(&self) -> Mark {
        let total: f64 = self.weights.iter().sum();
        let mut m = [0.0; MAX_DIM];
        for (x, w) in self.atoms() {
            for (mj, xj) in m.iter_mut().zip(x) {
                *mj += w * xj / total;
            }
        }
        m
    }

    /// Largest Euclidean norm over the atoms.
    pub fn radius(&self) -> f64 {
        self.atoms.iter().map(norm2).fold(0.0, f64::max)
    }

    pub fn probability(&self, region: &super::Region) -> f64 {
        self.atoms()
            .filter(|(x, _)| region.contains(x))
            .map(|(_, w)| w)
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Mark {
        match &self.index {
            Some(idx) => self.atoms[idx.sample(rng)],
            None => self.atoms[0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct MarkComponent {
    pub p: f64,
    pub u: VectorLaw,
    pub v: VectorLaw,
}

impl MarkComponent {
    /// `F_i(A) = (1 − p_i)·U_i(A) + p_i·V_i(A)`.
    pub fn probability(&self, region: &super::Region) -> f64 {
        (1.0 - self.p) * self.u.probability(region) + self.p * self.v.probability(region)
    }

    /// Mean of `F_i`.
    pub fn mean(&self) -> Mark {
        let (mu, mv) = (self.u.mean(), self.v.mean());
        std::array::from_fn(|j| (1.0 - self.p) * mu[j] + self.p * mv[j])
    }

    /// One draw from `F_i`, with whether the rare branch was taken.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Mark, bool) {
        let rare = rng.random::<f64>() < self.p;
        let law = if rare { &self.v } else { &self.u };
        (law.sample(rng), rare)
    }
}

/// The mark model: independent components with vector-valued marks.
#[derive(Debug, Clone)]
pub struct MarkSampler {
    dim: usize,
    components: Vec<MarkComponent>,
    a: Vec<Mark>,
}

impl MarkSampler {
    pub fn new(dim: usize, components: Vec<MarkComponent>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidModel(format!(
                "dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        if components.is_empty() {
            return Err(Error::InvalidModel("no components".into()));
        }
        for (i, c) in components.iter().enumerate() {
            if !(0.0..=1.0).contains(&c.p) {
                return Err(Error::InvalidModel(format!("component {i}: p = {}", c.p)));
            }
            if c.u.dim() != dim || c.v.dim() != dim {
                return Err(Error::InvalidModel(format!(
                    "component {i}: laws not of dimension {dim}"
                )));
            }
        }
        let a = components.iter().map(|c| c.u.mean()).collect();
        Ok(Self {
            dim,
            components,
            a,
        })
    }

    pub fn from_model(model: &RareEventModel) -> Self {
        let components = model
            .components()
            .iter()
            .map(|c| MarkComponent {
                p: c.p,
                u: VectorLaw::from_lattice(&c.u),
                v: VectorLaw::from_lattice(&c.v),
            })
            .collect();
        Self::new(1, components).expect("lattice model is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[MarkComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// `a_i`, the means of the `U_i`.
    pub fn centers(&self) -> &[Mark] {
        &self.a
    }

    pub fn p(&self) -> f64 {
        self.components.iter().map(|c| c.p).fold(0.0, f64::max)
    }

    pub fn sum_p2(&self) -> f64 {
        self.components.iter().map(|c| c.p * c.p).sum()
    }

    /// `Σ_i mean(F_i)`.
    pub fn total_mean(&self) -> Mark {
        let mut m = [0.0; MAX_DIM];
        for c in &self.components {
            add(&mut m, &c.mean());
        }
        m
    }

    /// Smallest `τ` with every `U_i` inside the Euclidean `τ`-ball.
    pub fn u_radius(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.u.radius())
            .fold(0.0, f64::max)
    }

    pub fn check_u_support(&self, tau: f64) -> Result<()> {
        let slack = 1e-9 * tau.max(1.0);
        match self
            .components
            .iter()
            .position(|c| c.u.radius() > tau + slack)
        {
            Some(component) => Err(Error::SupportViolation { component, tau }),
            None => Ok(()),
        }
    }

    /// `(|a^{(j)}|₂, |a^{(j)}|_∞)` for each coordinate `j`.
    pub fn center_norms(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|j| {
                let l2 = self.a.iter().map(|a| a[j] * a[j]).sum::<f64>().sqrt();
                let linf = self.a.iter().map(|a| a[j].abs()).fold(0.0, f64::max);
                (l2, linf)
            })
            .collect()
    }

    /// Draws `X_1, …, X_n`, calling `visit(i, mark, rare)` in component order.
    pub fn visit_x<R: Rng + ?Sized>(&self, rng: &mut R, mut visit: impl FnMut(usize, &Mark, bool)) {
        for (i, c) in self.components.iter().enumerate() {
            let (x, rare) = c.draw(rng);
            visit(i, &x, rare);
        }
    }

    /// Draws the Poissonized sample, calling `start(i, ν_i)` for each group and
    /// `visit(i, mark)` for each of its marks.
    pub fn visit_y<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        mut start: impl FnMut(usize, u64),
        mut visit: impl FnMut(usize, &Mark),
    ) {
        let poisson = Poisson::new(1.0).expect("unit rate");
        for (i, c) in self.components.iter().enumerate() {
            let nu = poisson.sample(rng) as u64;
            start(i, nu);
            for _ in 0..nu {
                let (x, _) = c.draw(rng);
                visit(i, &x);
            }
        }
    }

    /// Replication `rep` of the raw sample.
    pub fn sample_x(&self, seed: u64, rep: u64) -> RawSample {
        let mut rng = rng::stream(seed, purpose::RAW_SAMPLE, rep);
        let mut out = RawSample {
            marks: Vec::with_capacity(self.len()),
            rare: Vec::with_capacity(self.len()),
        };
        self.visit_x(&mut rng, |_, x, rare| {
            out.marks.push(*x);
            out.rare.push(rare);
        });
        out
    }

    /// Replication `rep` of the Poissonized sample.
    pub fn poissonize(&self, seed: u64, rep: u64) -> PointProcessSample {
        let mut rng = rng::stream(seed, purpose::POISSONIZED, rep);
        let mut counts = Vec::with_capacity(self.len());
        let mut marks = Vec::new();
        self.visit_y(&mut rng, |_, nu| counts.push(nu), |_, x| marks.push(*x));
        let mut rest = marks.into_iter();
        let groups = counts
            .into_iter()
            .map(|nu| Group {
                nu,
                marks: rest.by_ref().take(nu as usize).collect(),
            })
            .collect();
        PointProcessSample { groups }
    }

    /// `S` from replication `rep` of the raw sample.
    pub fn s_sum(&self, seed: u64, rep: u64) -> Mark {
        let mut rng = rng::stream(seed, purpose::RAW_SAMPLE, rep);
        let mut s = [0.0; MAX_DIM];
        self.visit_x(&mut rng, |_, x, _| add(&mut s, x));
        s
    }

    /// `T` and `Δ` from replication `rep` of the Poissonized sample.
    pub fn t_sums(&self, seed: u64, rep: u64) -> Sums {
        let mut rng = rng::stream(seed, purpose::POISSONIZED, rep);
        let mut sums = Sums::default();
        self.visit_y(
            &mut rng,
            |i, nu| {
                let k = nu as f64 - 1.0;
                for (d, a) in sums.delta.iter_mut().zip(&self.a[i]) {
                    *d += k * a;
                }
            },
            |_, x| add(&mut sums.value, x),
        );
        sums
    }
}

/// One draw of `(X_1, …, X_n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawSample {
    pub marks: Vec<Mark>,
    /// Whether `X_i` took the rare branch.
    pub rare: Vec<bool>,
}

impl RawSample {
    /// `S = X_1 + ⋯ + X_n`.
    pub fn sum(&self) -> Mark {
        let mut s = [0.0; MAX_DIM];
        for x in &self.marks {
            add(&mut s, x);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Group {
    pub nu: u64,
    pub marks: Vec<Mark>,
}

/// One draw of `Y = {X_{i,j} : j ≤ ν_i}`, grouped by component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointProcessSample {
    pub groups: Vec<Group>,
}

/// `T = Σ_i Σ_{j ≤ ν_i} X_{i,j}` and `Δ = Σ_i (ν_i − 1)·a_i` from one draw.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Sums {
    pub value: Mark,
    pub delta: Mark,
}

impl PointProcessSample {
    pub fn total_count(&self) -> u64 {
        self.groups.iter().map(|g| g.nu).sum()
    }

    pub fn count_in(&self, region: &super::Region) -> u64 {
        self.groups
            .iter()
            .flat_map(|g| &g.marks)
            .filter(|x| region.contains(x))
            .count() as u64
    }

    /// `T` and `Δ` for centers `a`.
    pub fn sums(&self, a: &[Mark]) -> Sums {
        let mut sums = Sums::default();
        for (g, ai) in self.groups.iter().zip(a) {
            for x in &g.marks {
                add(&mut sums.value, x);
            }
            let k = g.nu as f64 - 1.0;
            for (d, aj) in sums.delta.iter_mut().zip(ai) {
                *d += k * aj;
            }
        }
        sums
    }
}
