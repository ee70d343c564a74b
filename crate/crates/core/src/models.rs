//! Spin-1/2 chains built from tensor products of Pauli matrices.
//!
//! Convention (open boundary, sites `0..L`):
//! `H = (Jxy/2) sum_i (X_i X_{i+1} + Y_i Y_{i+1}) + (Jz/2) sum_i Z_i Z_{i+1} + h sum_i Z_i`.
//! With this choice the two-site XX chain at `Jxy = 1` has spectrum `{-1, 0, 0, 1}`
//! and a single site is exactly `h Z`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{QaError, Result};
use crate::operator::{c64, Operator, C64, HERMITIAN_RTOL};

pub const DEFAULT_MAX_SITES: usize = 8;

pub fn pauli_x() -> Operator {
    Operator::from_fn(2, |i, j| if i != j { c64(1.0, 0.0) } else { C64::default() })
}

pub fn pauli_y() -> Operator {
    Operator::from_fn(2, |i, j| match (i, j) {
        (0, 1) => c64(0.0, -1.0),
        (1, 0) => c64(0.0, 1.0),
        _ => C64::default(),
    })
}

pub fn pauli_z() -> Operator {
    Operator::from_real_diagonal(&[1.0, -1.0])
}

/// `op` acting on `site` of an `sites`-spin chain (site 0 is the leftmost factor).
pub fn site_operator(op: &Operator, site: usize, sites: usize) -> Operator {
    let mut out = Operator::identity(1);
    for k in 0..sites {
        out = if k == site { out.kron(op) } else { out.kron(&Operator::identity(2)) };
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    XxChain,
    XxzChain,
    Custom,
}

/// Description of a model Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default = "default_sites")]
    pub sites: usize,
    #[serde(default = "one")]
    pub jxy: f64,
    /// Ignored by `xx_chain`.
    #[serde(default)]
    pub jz: f64,
    #[serde(default)]
    pub field: f64,
    /// Required for `custom`, rejected otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<Operator>,
    #[serde(default = "default_max_sites")]
    pub max_sites: usize,
}

fn default_sites() -> usize {
    2
}
fn one() -> f64 {
    1.0
}
fn default_max_sites() -> usize {
    DEFAULT_MAX_SITES
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::xx_chain(2, 1.0, 0.0)
    }
}

impl ModelSpec {
    pub fn xx_chain(sites: usize, jxy: f64, field: f64) -> Self {
        ModelSpec { kind: ModelKind::XxChain, sites, jxy, jz: 0.0, field, hamiltonian: None, max_sites: DEFAULT_MAX_SITES }
    }

    pub fn xxz_chain(sites: usize, jxy: f64, jz: f64, field: f64) -> Self {
        ModelSpec { kind: ModelKind::XxzChain, sites, jxy, jz, field, hamiltonian: None, max_sites: DEFAULT_MAX_SITES }
    }

    pub fn custom(h: Operator) -> Self {
        ModelSpec {
            kind: ModelKind::Custom,
            sites: 0,
            jxy: 0.0,
            jz: 0.0,
            field: 0.0,
            hamiltonian: Some(h),
            max_sites: DEFAULT_MAX_SITES,
        }
    }

    pub fn dim(&self) -> usize {
        match (&self.kind, &self.hamiltonian) {
            (ModelKind::Custom, Some(h)) => h.dim(),
            _ => 1usize << self.sites.min(usize::BITS as usize - 1),
        }
    }
}

/// A Hamiltonian together with named observables.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub hamiltonian: Operator,
    pub observables: BTreeMap<String, Operator>,
}

impl Model {
    pub fn observable(&self, name: &str) -> Result<&Operator> {
        self.observables.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.observables.keys().map(String::as_str).collect();
            QaError::InvalidArgument(format!("unknown observable {name:?}; known: {}", known.join(", ")))
        })
    }
}

/// Builds the Hamiltonian and the observables `H`, `sz_total`, `sx_i`,
/// `sy_i`, `sz_i` (per site) and `current_i` (spin current on bond `i, i+1`).
pub fn build_model(spec: &ModelSpec) -> Result<Model> {
    let mut observables = BTreeMap::new();
    if spec.kind == ModelKind::Custom {
        let h = spec
            .hamiltonian
            .clone()
            .ok_or_else(|| QaError::InvalidArgument("custom model needs a hamiltonian".into()))?;
        h.check_hermitian(HERMITIAN_RTOL)?;
        let cap = 1usize << spec.max_sites;
        if h.dim() > cap {
            return Err(QaError::DimensionCap { dim: h.dim(), cap });
        }
        observables.insert("H".to_string(), h.clone());
        return Ok(Model { hamiltonian: h, observables });
    }
    if spec.hamiltonian.is_some() {
        return Err(QaError::InvalidArgument("only custom models take an explicit hamiltonian".into()));
    }
    let l = spec.sites;
    if l == 0 {
        return Err(QaError::InvalidArgument("a spin chain needs at least one site".into()));
    }
    if l > spec.max_sites {
        let dim = if l < usize::BITS as usize { 1usize << l } else { usize::MAX };
        return Err(QaError::DimensionCap { dim, cap: 1usize << spec.max_sites });
    }
    let jz = if spec.kind == ModelKind::XxChain { 0.0 } else { spec.jz };
    let x: Vec<Operator> = (0..l).map(|i| site_operator(&pauli_x(), i, l)).collect();
    let y: Vec<Operator> = (0..l).map(|i| site_operator(&pauli_y(), i, l)).collect();
    let z: Vec<Operator> = (0..l).map(|i| site_operator(&pauli_z(), i, l)).collect();
    let d = 1usize << l;
    let mut h = Operator::zeros(d);
    let mut sz_total = Operator::zeros(d);
    for i in 0..l {
        h += &z[i].scale_real(spec.field);
        sz_total += &z[i];
        if i + 1 < l {
            let hop = &x[i] * &x[i + 1] + &y[i] * &y[i + 1];
            h += &hop.scale_real(0.5 * spec.jxy);
            h += &(&z[i] * &z[i + 1]).scale_real(0.5 * jz);
            let current = (&x[i] * &y[i + 1] - &y[i] * &x[i + 1]).scale_real(spec.jxy);
            observables.insert(format!("current_{i}"), current);
        }
        observables.insert(format!("sx_{i}"), x[i].clone());
        observables.insert(format!("sy_{i}"), y[i].clone());
        observables.insert(format!("sz_{i}"), z[i].clone());
    }
    observables.insert("sz_total".to_string(), sz_total);
    observables.insert("H".to_string(), h.clone());
    Ok(Model { hamiltonian: h, observables })
}
