//! Pointwise information and entropy densities (base-2) with extended-real
//! values.
//!
//! `info(x; y | z) = log p(x,y|z) / (p(x|z) p(y|z))` and
//! `entropy(x | z) = -log p(x|z)`. A zero numerator gives `-inf`, a zero
//! denominator with non-zero numerator gives `+inf`. NaN is never produced.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::pmf::{next_outcome, JointPmf, PmfError, Projection};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error(transparent)]
    Pmf(#[from] PmfError),
    #[error("conditioning outcome has zero probability")]
    ZeroConditioning,
    #[error("variable `{0}` appears in more than one argument of the density")]
    OverlappingArguments(String),
    #[error("density argument is empty")]
    EmptyArgument,
}

pub type Result<T> = std::result::Result<T, DensityError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DensityKind {
    Information,
    Entropy,
}

/// Which density to evaluate and over which variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DensitySpec {
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub given: Vec<String>,
    pub kind: DensityKind,
}

fn owned(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

impl DensitySpec {
    /// `info(left; right)`.
    pub fn info(left: &[&str], right: &[&str]) -> Self {
        Self {
            left: owned(left),
            right: owned(right),
            given: Vec::new(),
            kind: DensityKind::Information,
        }
    }

    /// `entropy(left)`.
    pub fn entropy(left: &[&str]) -> Self {
        Self {
            left: owned(left),
            right: Vec::new(),
            given: Vec::new(),
            kind: DensityKind::Entropy,
        }
    }

    pub fn given(mut self, given: &[&str]) -> Self {
        self.given = owned(given);
        self
    }

    /// Variables the density reads, in the order left, right, given.
    pub fn scope(&self) -> Vec<&str> {
        self.left
            .iter()
            .chain(&self.right)
            .chain(&self.given)
            .map(String::as_str)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.left.is_empty() || (self.kind == DensityKind::Information && self.right.is_empty())
        {
            return Err(DensityError::EmptyArgument);
        }
        if self.kind == DensityKind::Entropy && !self.right.is_empty() {
            return Err(DensityError::OverlappingArguments(self.right[0].clone()));
        }
        let mut seen = HashSet::new();
        for name in self.scope() {
            if !seen.insert(name) {
                return Err(DensityError::OverlappingArguments(name.to_string()));
            }
        }
        Ok(())
    }
}

/// Density value in bits on the extended real line. Never NaN.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DensityValue(f64);

impl DensityValue {
    pub const NEG_INFINITY: Self = Self(f64::NEG_INFINITY);
    pub const INFINITY: Self = Self(f64::INFINITY);

    pub fn new(bits: f64) -> Option<Self> {
        (!bits.is_nan()).then_some(Self(bits))
    }

    #[inline]
    pub fn bits(self) -> f64 {
        self.0
    }

    /// `2^value`, with `2^-inf = 0`.
    #[inline]
    pub fn exp2(self) -> f64 {
        self.0.exp2()
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl std::ops::Add for DensityValue {
    type Output = Self;
    /// Sum on the extended reals; `+inf + -inf` is resolved to `-inf` since
    /// a zero-probability factor dominates.
    fn add(self, rhs: Self) -> Self {
        let s = self.0 + rhs.0;
        if s.is_nan() {
            Self::NEG_INFINITY
        } else {
            Self(s)
        }
    }
}

fn log2_ratio(num_a: f64, num_b: f64, den_a: f64, den_b: f64) -> f64 {
    let num = num_a * num_b;
    let den = den_a * den_b;
    if num.is_normal() && den.is_normal() {
        (num / den).log2()
    } else {
        num_a.log2() + num_b.log2() - den_a.log2() - den_b.log2()
    }
}

/// Density value from the four marginal masses
/// `p(x,y,z), p(z), p(x,z), p(y,z)` (information) or `p(x,z), p(z)` (entropy).
#[inline]
fn info_from_masses(xyz: f64, z: f64, xz: f64, yz: f64) -> Result<DensityValue> {
    if z <= 0.0 {
        return Err(DensityError::ZeroConditioning);
    }
    if xyz <= 0.0 {
        return Ok(DensityValue::NEG_INFINITY);
    }
    if xz <= 0.0 || yz <= 0.0 {
        return Ok(DensityValue::INFINITY);
    }
    Ok(DensityValue(log2_ratio(xyz, z, xz, yz)))
}

#[inline]
fn entropy_from_masses(xz: f64, z: f64) -> Result<DensityValue> {
    if z <= 0.0 {
        return Err(DensityError::ZeroConditioning);
    }
    if xz <= 0.0 {
        return Ok(DensityValue::INFINITY);
    }
    Ok(DensityValue(-(xz / z).log2()))
}

/// Shared cache of marginal tables of one pmf, keyed by sorted host positions.
/// Safe to share across worker threads.
pub struct DensityContext<'a> {
    pmf: &'a JointPmf,
    cache: Mutex<HashMap<Vec<usize>, Arc<Vec<f64>>>>,
}

impl<'a> DensityContext<'a> {
    pub fn new(pmf: &'a JointPmf) -> Self {
        Self {
            pmf,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn pmf(&self) -> &JointPmf {
        self.pmf
    }

    fn projection(&self, names: &[&str]) -> Result<Projection> {
        let mut positions = names
            .iter()
            .map(|n| self.pmf.position(n))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        positions.sort_unstable();
        let table = {
            let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
            Arc::clone(
                cache
                    .entry(positions.clone())
                    .or_insert_with(|| Arc::new(self.pmf.table_at(&positions))),
            )
        };
        Ok(self.pmf.projection_at(&positions, table))
    }

    /// Prepare a density for repeated evaluation on full outcomes.
    pub fn compile(&self, spec: &DensitySpec) -> Result<CompiledDensity> {
        spec.validate()?;
        let left: Vec<&str> = spec.left.iter().map(String::as_str).collect();
        let right: Vec<&str> = spec.right.iter().map(String::as_str).collect();
        let given: Vec<&str> = spec.given.iter().map(String::as_str).collect();
        let cat = |a: &[&str], b: &[&str]| -> Vec<String> {
            a.iter().chain(b).map(|s| s.to_string()).collect()
        };
        let refs = |v: &[String]| -> Vec<String> { v.to_vec() };
        let proj = |names: Vec<String>| -> Result<Projection> {
            let r: Vec<&str> = names.iter().map(String::as_str).collect();
            self.projection(&r)
        };
        let scope: Vec<usize> = spec
            .scope()
            .iter()
            .map(|n| self.pmf.position(n))
            .collect::<std::result::Result<_, _>>()?;
        let inner = match spec.kind {
            DensityKind::Information => {
                let mut xyz = cat(&left, &right);
                xyz.extend(refs(&spec.given));
                Compiled::Info {
                    xyz: proj(xyz)?,
                    z: proj(refs(&spec.given))?,
                    xz: proj(cat(&left, &given))?,
                    yz: proj(cat(&right, &given))?,
                }
            }
            DensityKind::Entropy => Compiled::Entropy {
                xz: proj(cat(&left, &given))?,
                z: proj(refs(&spec.given))?,
            },
        };
        Ok(CompiledDensity { inner, scope })
    }

    /// Dense table of the density over every outcome of its scope.
    pub fn table(&self, spec: &DensitySpec) -> Result<DensityTable> {
        let compiled = self.compile(spec)?;
        let shape: Vec<usize> = compiled
            .scope
            .iter()
            .map(|&p| self.pmf.shape()[p])
            .collect();
        let cells: usize = shape.iter().product();
        let mut host = vec![0; self.pmf.shape().len()];
        let mut local = vec![0; shape.len()];
        let mut values = Vec::with_capacity(cells);
        for _ in 0..cells {
            for (&pos, &s) in compiled.scope.iter().zip(&local) {
                host[pos] = s;
            }
            values.push(match compiled.eval(&host) {
                Ok(v) => Some(v),
                Err(DensityError::ZeroConditioning) => None,
                Err(e) => return Err(e),
            });
            next_outcome(&mut local, &shape);
        }
        Ok(DensityTable {
            scope: spec.scope().iter().map(|s| s.to_string()).collect(),
            shape,
            values,
        })
    }
}

#[derive(Debug, Clone)]
enum Compiled {
    Info {
        xyz: Projection,
        z: Projection,
        xz: Projection,
        yz: Projection,
    },
    Entropy {
        xz: Projection,
        z: Projection,
    },
}

/// A density bound to one pmf, evaluated on full host outcomes.
#[derive(Debug, Clone)]
pub struct CompiledDensity {
    inner: Compiled,
    scope: Vec<usize>,
}

impl CompiledDensity {
    /// Evaluate on a full outcome of the host pmf.
    #[inline]
    pub fn eval(&self, outcome: &[usize]) -> Result<DensityValue> {
        match &self.inner {
            Compiled::Info { xyz, z, xz, yz } => {
                info_from_masses(xyz.at(outcome), z.at(outcome), xz.at(outcome), yz.at(outcome))
            }
            Compiled::Entropy { xz, z } => entropy_from_masses(xz.at(outcome), z.at(outcome)),
        }
    }

    /// Host positions of the scope variables (left, right, given).
    pub fn scope_positions(&self) -> &[usize] {
        &self.scope
    }
}

/// Density values over the product alphabet of a density's scope.
#[derive(Debug, Clone)]
pub struct DensityTable {
    scope: Vec<String>,
    shape: Vec<usize>,
    values: Vec<Option<DensityValue>>,
}

impl DensityTable {
    pub fn scope(&self) -> &[String] {
        &self.scope
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Value at scope symbols listed in scope order.
    #[inline]
    pub fn get(&self, symbols: &[usize]) -> Result<DensityValue> {
        let idx = symbols
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&s, &n)| acc * n + s);
        self.values[idx].ok_or(DensityError::ZeroConditioning)
    }

    /// Raw values in row-major scope order; `None` where the conditioning
    /// outcome has zero mass.
    pub fn values(&self) -> &[Option<DensityValue>] {
        &self.values
    }
}

fn check_full_outcome(p: &JointPmf, outcome: &[usize]) -> Result<()> {
    p.flat_index(outcome)?;
    Ok(())
}

/// Information density at a full outcome of `p`.
pub fn info_density(p: &JointPmf, spec: &DensitySpec, outcome: &[usize]) -> Result<DensityValue> {
    check_full_outcome(p, outcome)?;
    if spec.kind != DensityKind::Information {
        return Err(DensityError::EmptyArgument);
    }
    DensityContext::new(p).compile(spec)?.eval(outcome)
}

/// Entropy density at a full outcome of `p`.
pub fn entropy_density(
    p: &JointPmf,
    spec: &DensitySpec,
    outcome: &[usize],
) -> Result<DensityValue> {
    check_full_outcome(p, outcome)?;
    if spec.kind != DensityKind::Entropy {
        return Err(DensityError::EmptyArgument);
    }
    DensityContext::new(p).compile(spec)?.eval(outcome)
}

/// Dense table of a density over its scope.
pub fn density_table(p: &JointPmf, spec: &DensitySpec) -> Result<DensityTable> {
    DensityContext::new(p).table(spec)
}

/// Expected value of a density under `p` (mutual information or
/// conditional entropy in bits).
pub fn mean_density(p: &JointPmf, spec: &DensitySpec) -> Result<f64> {
    let d = DensityContext::new(p).compile(spec)?;
    let mut err = None;
    let v = p.expectation(|o| match d.eval(o) {
        Ok(v) => v.bits(),
        Err(e) => {
            err = Some(e);
            0.0
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}
