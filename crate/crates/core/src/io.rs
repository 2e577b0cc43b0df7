//! JSON model files.
//!
//! ```json
//! { "step": 0.5,
//!   "components": [
//!     { "p": 0.05, "U": { "atoms": [[0, 1.0]] }, "V": { "atoms": [[-4, 0.5], [6, 0.5]] } } ] }
//! ```
//!
//! One-dimensional atoms are `[k, w]` with `k` a lattice index (or, with
//! `"quantize": true`, a location that is snapped to the lattice). Vector
//! models set `"dim"` and write atoms as `[[x_1, …, x_d], w]` in mark units.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dist::LatticeDistribution;
use crate::error::{Error, Result};
use crate::model::{Component, RareEventModel};
use crate::simulator::{MarkComponent, MarkSampler, VectorLaw};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AtomSpec {
    Scalar(f64, f64),
    Vector(Vec<f64>, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSpec {
    pub atoms: Vec<AtomSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub p: f64,
    #[serde(rename = "U")]
    pub u: LawSpec,
    #[serde(rename = "V")]
    pub v: LawSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub step: f64,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub dim: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub quantize: bool,
    pub components: Vec<ComponentSpec>,
}

fn one() -> usize {
    1
}

fn is_one(d: &usize) -> bool {
    *d == 1
}

fn field_error(field: &str, e: Error) -> Error {
    Error::InvalidModel(format!("{field}: {e}"))
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidModel(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidModel(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    pub fn from_model(model: &RareEventModel) -> Self {
        let law = |l: &LatticeDistribution| LawSpec {
            atoms: l
                .weights()
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > 0.0)
                .map(|(i, &w)| AtomSpec::Scalar((l.start() + i as i64) as f64, w))
                .collect(),
        };
        Self {
            step: model.step(),
            dim: 1,
            quantize: false,
            components: model
                .components()
                .iter()
                .map(|c| ComponentSpec {
                    p: c.p,
                    u: law(&c.u),
                    v: law(&c.v),
                })
                .collect(),
        }
    }

    fn check_step(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidModel(format!(
                "step: must be positive, got {}",
                self.step
            )));
        }
        Ok(())
    }

    /// The lattice model, with the largest snapping residual when quantizing.
    pub fn to_model(&self) -> Result<(RareEventModel, f64)> {
        self.check_step()?;
        if self.dim != 1 {
            return Err(Error::InvalidModel(format!(
                "dim: lattice laws need dim = 1, got {}",
                self.dim
            )));
        }
        let mut residual = 0.0f64;
        let mut components = Vec::with_capacity(self.components.len());
        for (i, c) in self.components.iter().enumerate() {
            let mut laws = Vec::with_capacity(2);
            for (name, spec) in [("U", &c.u), ("V", &c.v)] {
                let field = format!("components[{i}].{name}");
                let (law, r) = self.lattice_law(spec, &field)?;
                residual = residual.max(r);
                laws.push(law);
            }
            let v = laws.pop().expect("two laws");
            let u = laws.pop().expect("two laws");
            components.push(
                Component::new(c.p, u, v).map_err(|e| field_error(&format!("components[{i}]"), e))?,
            );
        }
        let model = RareEventModel::new(self.step, components)?;
        Ok((model, residual))
    }

    fn lattice_law(&self, spec: &LawSpec, field: &str) -> Result<(LatticeDistribution, f64)> {
        let mut points = Vec::with_capacity(spec.atoms.len());
        for (j, atom) in spec.atoms.iter().enumerate() {
            match *atom {
                AtomSpec::Scalar(k, w) => points.push((k, w)),
                AtomSpec::Vector(..) => {
                    return Err(Error::InvalidModel(format!(
                        "{field}.atoms[{j}]: expected [k, w]"
                    )))
                }
            }
        }
        if self.quantize {
            return LatticeDistribution::quantize(self.step, &points)
                .map_err(|e| field_error(field, e));
        }
        let mut atoms = Vec::with_capacity(points.len());
        for (j, (k, w)) in points.into_iter().enumerate() {
            if k.fract() != 0.0 || !k.is_finite() || k.abs() > 1e15 {
                return Err(Error::InvalidModel(format!(
                    "{field}.atoms[{j}]: index {k} is not an integer"
                )));
            }
            atoms.push((k as i64, w));
        }
        let law = LatticeDistribution::from_atoms(self.step, &atoms).map_err(|e| field_error(field, e))?;
        Ok((law, 0.0))
    }

    /// The mark sampler for any dimension.
    pub fn to_sampler(&self) -> Result<MarkSampler> {
        self.check_step()?;
        if self.dim == 1 {
            return Ok(MarkSampler::from_model(&self.to_model()?.0));
        }
        let mut components = Vec::with_capacity(self.components.len());
        for (i, c) in self.components.iter().enumerate() {
            let law = |name: &str, spec: &LawSpec| -> Result<VectorLaw> {
                let field = format!("components[{i}].{name}");
                let mut atoms = Vec::with_capacity(spec.atoms.len());
                for (j, atom) in spec.atoms.iter().enumerate() {
                    match atom {
                        AtomSpec::Vector(x, w) => atoms.push((x.clone(), *w)),
                        AtomSpec::Scalar(..) => {
                            return Err(Error::InvalidModel(format!(
                                "{field}.atoms[{j}]: expected [[x_1, ..., x_d], w]"
                            )))
                        }
                    }
                }
                VectorLaw::new(self.dim, atoms).map_err(|e| field_error(&field, e))
            };
            components.push(MarkComponent {
                p: c.p,
                u: law("U", &c.u)?,
                v: law("V", &c.v)?,
            });
        }
        MarkSampler::new(self.dim, components)
    }
}
