//! Finite joint distributions over named discrete variables, conditional
//! kernels, and the common-part labeling of a pair of variables.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

/// Largest number of cells a dense joint table may hold.
pub const SIZE_LIMIT: usize = 10_000_000;
/// Accepted deviation of a pmf's total mass from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
/// Accepted deviation of a kernel row's total mass from one.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmfError {
    #[error("negative mass {value} in cell {index}")]
    NegativeMass { index: usize, value: f64 },
    #[error("non-finite mass in cell {index}")]
    NonFiniteMass { index: usize },
    #[error("masses sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("table has {actual} cells, expected {expected}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` already present")]
    VariableCollision(String),
    #[error("variable `{0}` listed more than once")]
    DuplicateVariable(String),
    #[error("functional evaluated to NaN")]
    NanFunctional,
    #[error("outcome has {actual} symbols, expected {expected}")]
    WrongArity { expected: usize, actual: usize },
    #[error("symbol {symbol} out of range for variable `{variable}`")]
    SymbolOutOfRange { variable: String, symbol: usize },
    #[error("joint table would have {cells} cells, limit is {limit}")]
    SizeLimit { cells: u128, limit: usize },
    #[error("alphabet `{0}` is empty")]
    EmptyAlphabet(String),
    #[error("alphabet `{alphabet}` repeats symbol `{symbol}`")]
    DuplicateSymbol { alphabet: String, symbol: String },
    #[error("kernel row {row} sums to {sum}, expected 1")]
    NotStochastic { row: usize, sum: f64 },
    #[error("variable `{name}` has {actual} symbols here but {expected} in the distribution")]
    AlphabetMismatch { name: String, expected: usize, actual: usize },
}

pub type Result<T> = std::result::Result<T, PmfError>;

/// An ordered, finite, non-empty set of distinct symbol labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    name: String,
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new(name: impl Into<String>, symbols: Vec<String>) -> Result<Self> {
        let name = name.into();
        if symbols.is_empty() {
            return Err(PmfError::EmptyAlphabet(name));
        }
        let mut seen = HashSet::new();
        for s in &symbols {
            if !seen.insert(s.as_str()) {
                return Err(PmfError::DuplicateSymbol {
                    alphabet: name,
                    symbol: s.clone(),
                });
            }
        }
        Ok(Self { name, symbols })
    }

    /// Alphabet with labels `0..size`.
    pub fn indexed(name: impl Into<String>, size: usize) -> Result<Self> {
        Self::new(name, (0..size).map(|i| i.to_string()).collect())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Source,
    State,
    Input,
    Output,
    Auxiliary,
    TimeSharing,
    CommonPart,
    Reconstruction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    name: String,
    alphabet: Arc<Alphabet>,
    role: Role,
}

impl Variable {
    pub fn new(name: impl Into<String>, alphabet: Arc<Alphabet>, role: Role) -> Self {
        Self {
            name: name.into(),
            alphabet,
            role,
        }
    }

    /// Variable over the alphabet `0..size`, named after itself.
    pub fn indexed(name: &str, size: usize, role: Role) -> Result<Self> {
        Ok(Self::new(name, Arc::new(Alphabet::indexed(name, size)?), role))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn alphabet_arc(&self) -> Arc<Alphabet> {
        Arc::clone(&self.alphabet)
    }

    pub fn size(&self) -> usize {
        self.alphabet.size()
    }

    pub fn role(&self) -> Role {
        self.role
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

fn checked_cells(vars: &[Variable]) -> Result<usize> {
    let mut cells: u128 = 1;
    for v in vars {
        cells = cells.saturating_mul(v.size() as u128);
        if cells > SIZE_LIMIT as u128 {
            return Err(PmfError::SizeLimit {
                cells,
                limit: SIZE_LIMIT,
            });
        }
    }
    Ok(cells as usize)
}

fn check_unique(vars: &[Variable]) -> Result<()> {
    let mut seen = HashSet::new();
    for v in vars {
        if !seen.insert(v.name()) {
            return Err(PmfError::DuplicateVariable(v.name.clone()));
        }
    }
    Ok(())
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

/// Advance a multi-index in row-major order. Returns false after the last one.
pub fn next_outcome(outcome: &mut [usize], shape: &[usize]) -> bool {
    for i in (0..shape.len()).rev() {
        outcome[i] += 1;
        if outcome[i] < shape[i] {
            return true;
        }
        outcome[i] = 0;
    }
    false
}

fn check_masses(mass: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for (index, &value) in mass.iter().enumerate() {
        if !value.is_finite() {
            return Err(PmfError::NonFiniteMass { index });
        }
        if value < 0.0 {
            return Err(PmfError::NegativeMass { index, value });
        }
        sum += value;
    }
    Ok(sum)
}

/// Marginal table of a joint pmf over an ordered subset of its variables,
/// addressable directly by a full outcome of the parent pmf.
#[derive(Debug, Clone)]
pub struct Projection {
    picks: Vec<(usize, usize)>,
    table: Arc<Vec<f64>>,
}

impl Projection {
    pub(crate) fn new(picks: Vec<(usize, usize)>, table: Arc<Vec<f64>>) -> Self {
        Self { picks, table }
    }

    /// Mass of the projected outcome.
    #[inline]
    pub fn at(&self, outcome: &[usize]) -> f64 {
        let mut idx = 0;
        for &(pos, stride) in &self.picks {
            idx += outcome[pos] * stride;
        }
        self.table[idx]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }
}

/// A pmf over the Cartesian product of the alphabets of an ordered list of
/// distinct variables, stored densely in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    vars: Vec<Variable>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    mass: Vec<f64>,
}

impl JointPmf {
    /// Build a joint pmf. The total mass must be within 1e-9 of one and is
    /// renormalized exactly.
    pub fn new(vars: Vec<Variable>, mass: Vec<f64>) -> Result<Self> {
        check_unique(&vars)?;
        let cells = checked_cells(&vars)?;
        if mass.len() != cells {
            return Err(PmfError::ShapeMismatch {
                expected: cells,
                actual: mass.len(),
            });
        }
        let sum = check_masses(&mass)?;
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(PmfError::NotNormalized { sum });
        }
        let mass = mass.into_iter().map(|m| m / sum).collect();
        Ok(Self::from_parts(vars, mass))
    }

    fn from_parts(vars: Vec<Variable>, mass: Vec<f64>) -> Self {
        let shape: Vec<usize> = vars.iter().map(Variable::size).collect();
        let strides = row_major_strides(&shape);
        Self {
            vars,
            shape,
            strides,
            mass,
        }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn variable_names(&self) -> Vec<&str> {
        self.vars.iter().map(Variable::name).collect()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| PmfError::UnknownVariable(name.to_string()))
    }

    pub fn variable(&self, name: &str) -> Result<&Variable> {
        Ok(&self.vars[self.position(name)?])
    }

    pub fn has_variable(&self, name: &str) -> bool {
        self.vars.iter().any(|v| v.name == name)
    }

    fn check_outcome(&self, outcome: &[usize]) -> Result<()> {
        if outcome.len() != self.vars.len() {
            return Err(PmfError::WrongArity {
                expected: self.vars.len(),
                actual: outcome.len(),
            });
        }
        for (v, &s) in self.vars.iter().zip(outcome) {
            if s >= v.size() {
                return Err(PmfError::SymbolOutOfRange {
                    variable: v.name.clone(),
                    symbol: s,
                });
            }
        }
        Ok(())
    }

    /// Flat cell index of a full outcome.
    pub fn flat_index(&self, outcome: &[usize]) -> Result<usize> {
        self.check_outcome(outcome)?;
        Ok(outcome.iter().zip(&self.strides).map(|(s, st)| s * st).sum())
    }

    /// Outcome stored at a flat cell index.
    pub fn outcome_at(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.shape.len()];
        for (i, &st) in self.strides.iter().enumerate() {
            out[i] = flat / st;
            flat %= st;
        }
        out
    }

    pub fn prob(&self, outcome: &[usize]) -> Result<f64> {
        Ok(self.mass[self.flat_index(outcome)?])
    }

    /// Call `f` on every outcome with positive mass, in row-major order.
    pub fn for_each_support(&self, mut f: impl FnMut(&[usize], f64)) {
        let mut outcome = vec![0; self.shape.len()];
        for &p in &self.mass {
            if p > 0.0 {
                f(&outcome, p);
            }
            next_outcome(&mut outcome, &self.shape);
        }
    }

    /// Fallible variant of [`JointPmf::for_each_support`].
    pub fn try_for_each_support<E>(
        &self,
        mut f: impl FnMut(&[usize], f64) -> std::result::Result<(), E>,
    ) -> std::result::Result<(), E> {
        let mut outcome = vec![0; self.shape.len()];
        for &p in &self.mass {
            if p > 0.0 {
                f(&outcome, p)?;
            }
            next_outcome(&mut outcome, &self.shape);
        }
        Ok(())
    }

    fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut seen = HashSet::new();
        names
            .iter()
            .map(|n| {
                if !seen.insert(*n) {
                    return Err(PmfError::DuplicateVariable(n.to_string()));
                }
                self.position(n)
            })
            .collect()
    }

    /// Marginal table over the given host positions, in the listed order.
    pub(crate) fn table_at(&self, positions: &[usize]) -> Vec<f64> {
        let sub_shape: Vec<usize> = positions.iter().map(|&p| self.shape[p]).collect();
        let sub_strides = row_major_strides(&sub_shape);
        let mut host_strides = vec![0; self.shape.len()];
        for (&p, &s) in positions.iter().zip(&sub_strides) {
            host_strides[p] = s;
        }
        let mut table = vec![0.0; sub_shape.iter().product()];
        let mut outcome = vec![0; self.shape.len()];
        for &p in &self.mass {
            if p > 0.0 {
                let idx: usize = outcome
                    .iter()
                    .zip(&host_strides)
                    .map(|(s, st)| s * st)
                    .sum();
                table[idx] += p;
            }
            next_outcome(&mut outcome, &self.shape);
        }
        table
    }

    /// Marginal mass table over `names`, laid out row-major in the listed order.
    pub fn table_over(&self, names: &[&str]) -> Result<Vec<f64>> {
        let positions = self.positions(names)?;
        Ok(self.table_at(&positions))
    }

    /// Marginal over `names` that can be read off with full outcomes of `self`.
    pub fn projection(&self, names: &[&str]) -> Result<Projection> {
        let positions = self.positions(names)?;
        Ok(self.projection_at(&positions, Arc::new(self.table_at(&positions))))
    }

    pub(crate) fn projection_at(&self, positions: &[usize], table: Arc<Vec<f64>>) -> Projection {
        let sub_shape: Vec<usize> = positions.iter().map(|&p| self.shape[p]).collect();
        let strides = row_major_strides(&sub_shape);
        Projection::new(positions.iter().copied().zip(strides).collect(), table)
    }

    /// Marginal pmf on `keep`; variables stay in their original order.
    pub fn marginalize(&self, keep: &[&str]) -> Result<JointPmf> {
        let mut positions = self.positions(keep)?;
        positions.sort_unstable();
        let vars = positions.iter().map(|&p| self.vars[p].clone()).collect();
        Ok(Self::from_parts(vars, self.table_at(&positions)))
    }

    /// Marginal pmf on `names`, with variables in the listed order.
    pub fn reorder(&self, names: &[&str]) -> Result<JointPmf> {
        let positions = self.positions(names)?;
        let vars = positions.iter().map(|&p| self.vars[p].clone()).collect();
        Ok(Self::from_parts(vars, self.table_at(&positions)))
    }

    /// Product of this pmf with a kernel whose conditioning variables are
    /// already present. The produced variables are appended.
    pub fn compose(&self, kernel: &ConditionalKernel) -> Result<JointPmf> {
        let mut given_pos = Vec::with_capacity(kernel.given.len());
        for v in &kernel.given {
            let pos = self.position(v.name())?;
            if self.shape[pos] != v.size() {
                return Err(PmfError::AlphabetMismatch {
                    name: v.name.clone(),
                    expected: self.shape[pos],
                    actual: v.size(),
                });
            }
            given_pos.push(pos);
        }
        for v in &kernel.produced {
            if self.has_variable(v.name()) {
                return Err(PmfError::VariableCollision(v.name.clone()));
            }
        }
        let mut vars = self.vars.clone();
        vars.extend(kernel.produced.iter().cloned());
        checked_cells(&vars)?;
        let given_strides = row_major_strides(&kernel.given_shape());
        let width = kernel.produced_cells;
        let mut mass = Vec::with_capacity(self.mass.len() * width);
        let mut outcome = vec![0; self.shape.len()];
        for &p in &self.mass {
            let row: usize = given_pos
                .iter()
                .zip(&given_strides)
                .map(|(&pos, st)| outcome[pos] * st)
                .sum();
            mass.extend(kernel.row(row).iter().map(|k| p * k));
            next_outcome(&mut outcome, &self.shape);
        }
        Ok(Self::from_parts(vars, mass))
    }

    /// Conditional kernel `p(produced | given)`. Rows whose conditioning
    /// outcome has zero mass are set uniform.
    pub fn conditional(&self, produced: &[&str], given: &[&str]) -> Result<ConditionalKernel> {
        let mut names: Vec<&str> = given.to_vec();
        names.extend_from_slice(produced);
        let table = self.table_over(&names)?;
        let given_vars: Vec<Variable> = given
            .iter()
            .map(|n| self.variable(n).cloned())
            .collect::<Result<_>>()?;
        let produced_vars: Vec<Variable> = produced
            .iter()
            .map(|n| self.variable(n).cloned())
            .collect::<Result<_>>()?;
        let width: usize = produced_vars.iter().map(Variable::size).product();
        let mut rows = table;
        for row in rows.chunks_mut(width) {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|v| *v /= total);
            } else {
                row.iter_mut().for_each(|v| *v = 1.0 / width as f64);
            }
        }
        ConditionalKernel::from_rows(given_vars, produced_vars, rows)
    }

    /// Expectation of `f` over the support. NaN values are rejected.
    pub fn expectation(&self, mut f: impl FnMut(&[usize]) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        let mut nan = false;
        self.for_each_support(|o, p| {
            let v = f(o);
            if v.is_nan() {
                nan = true;
            } else if v != 0.0 {
                acc += p * v;
            }
        });
        if nan || acc.is_nan() {
            return Err(PmfError::NanFunctional);
        }
        Ok(acc)
    }

    /// Probability of an event given as a predicate on outcomes.
    pub fn probability(&self, mut event: impl FnMut(&[usize]) -> bool) -> f64 {
        let mut acc = 0.0;
        self.for_each_support(|o, p| {
            if event(o) {
                acc += p;
            }
        });
        acc
    }

    /// Largest absolute gap between this pmf and the product of its own
    /// conditionals `p(produced_i | given_i)` over the listed factors.
    pub fn factorization_gap(&self, factors: &[(&[&str], &[&str])]) -> Result<f64> {
        let mut parts = Vec::with_capacity(factors.len());
        for (produced, given) in factors {
            let mut joint: Vec<&str> = given.to_vec();
            joint.extend_from_slice(produced);
            parts.push((self.projection(&joint)?, self.projection(given)?));
        }
        let mut gap: f64 = 0.0;
        let mut outcome = vec![0; self.shape.len()];
        for &p in &self.mass {
            let mut prod = 1.0;
            for (joint, given) in &parts {
                let g = given.at(&outcome);
                if g <= 0.0 {
                    prod = 0.0;
                    break;
                }
                prod *= joint.at(&outcome) / g;
            }
            gap = gap.max((prod - p).abs());
            next_outcome(&mut outcome, &self.shape);
        }
        Ok(gap)
    }

    /// Draw a full outcome by inverse CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        self.outcome_at(sample_index(&self.mass, 1.0, rng))
    }

    /// Precomputed sampler over flat cell indices.
    pub fn sampler(&self) -> Sampler {
        Sampler::new(&self.mass)
    }
}

/// Inverse-CDF draw from non-negative weights with known total.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if acc > target {
                return i;
            }
        }
    }
    last
}

/// Inverse-CDF sampler with a precomputed cumulative table.
#[derive(Debug, Clone)]
pub struct Sampler {
    cumulative: Vec<f64>,
}

impl Sampler {
    pub fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Self { cumulative }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap_or(&0.0);
        let target = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= target);
        // guard the rounding edge where target lands on the total
        let mut i = i.min(self.cumulative.len() - 1);
        while i > 0 && self.cumulative[i] == self.cumulative[i - 1] {
            i -= 1;
        }
        i
    }
}

/// Row-stochastic map from outcomes of `given` to a pmf over `produced`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalKernel {
    given: Vec<Variable>,
    produced: Vec<Variable>,
    produced_cells: usize,
    table: Vec<f64>,
}

impl ConditionalKernel {
    /// Rows are indexed by `given` outcomes, columns by `produced` outcomes,
    /// both row-major. Each row must sum to one within 1e-12.
    pub fn new(given: Vec<Variable>, produced: Vec<Variable>, table: Vec<f64>) -> Result<Self> {
        let mut all = given.clone();
        all.extend(produced.iter().cloned());
        check_unique(&all)?;
        let cells = checked_cells(&all)?;
        if table.len() != cells {
            return Err(PmfError::ShapeMismatch {
                expected: cells,
                actual: table.len(),
            });
        }
        check_masses(&table)?;
        let width: usize = produced.iter().map(Variable::size).product();
        let mut table = table;
        for (row, chunk) in table.chunks_mut(width).enumerate() {
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(PmfError::NotStochastic { row, sum });
            }
            chunk.iter_mut().for_each(|v| *v /= sum);
        }
        Ok(Self {
            given,
            produced,
            produced_cells: width,
            table,
        })
    }

    fn from_rows(given: Vec<Variable>, produced: Vec<Variable>, table: Vec<f64>) -> Result<Self> {
        let produced_cells = produced.iter().map(Variable::size).product();
        Ok(Self {
            given,
            produced,
            produced_cells,
            table,
        })
    }

    /// Kernel putting all mass on `map(given outcome)`.
    pub fn deterministic(
        given: Vec<Variable>,
        produced: Variable,
        map: impl Fn(&[usize]) -> usize,
    ) -> Result<Self> {
        let shape: Vec<usize> = given.iter().map(Variable::size).collect();
        let rows: usize = shape.iter().product();
        let width = produced.size();
        let mut table = vec![0.0; rows * width];
        let mut outcome = vec![0; shape.len()];
        for r in 0..rows {
            let s = map(&outcome);
            if s >= width {
                return Err(PmfError::SymbolOutOfRange {
                    variable: produced.name.clone(),
                    symbol: s,
                });
            }
            table[r * width + s] = 1.0;
            next_outcome(&mut outcome, &shape);
        }
        Self::new(given, vec![produced], table)
    }

    pub fn given(&self) -> &[Variable] {
        &self.given
    }

    pub fn produced(&self) -> &[Variable] {
        &self.produced
    }

    pub fn given_shape(&self) -> Vec<usize> {
        self.given.iter().map(Variable::size).collect()
    }

    pub fn rows(&self) -> usize {
        self.table.len() / self.produced_cells
    }

    pub fn width(&self) -> usize {
        self.produced_cells
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    #[inline]
    pub fn row(&self, given_flat: usize) -> &[f64] {
        let w = self.produced_cells;
        &self.table[given_flat * w..(given_flat + 1) * w]
    }

    /// Flat row index of a `given` outcome.
    pub fn row_index(&self, given: &[usize]) -> usize {
        given
            .iter()
            .zip(&self.given)
            .fold(0, |acc, (&s, v)| acc * v.size() + s)
    }

    /// Draw a flat `produced` index from the row of `given_flat`.
    #[inline]
    pub fn sample_row<R: Rng + ?Sized>(&self, given_flat: usize, rng: &mut R) -> usize {
        sample_index(self.row(given_flat), 1.0, rng)
    }

    /// The map each row collapses to, if every row is a point mass.
    pub fn deterministic_map(&self) -> Option<Vec<usize>> {
        (0..self.rows())
            .map(|r| {
                let row = self.row(r);
                let hit = row.iter().position(|&v| v == 1.0)?;
                row.iter()
                    .enumerate()
                    .all(|(i, &v)| i == hit || v == 0.0)
                    .then_some(hit)
            })
            .collect()
    }
}

/// Labels of the maximal common function of two variables: symbols connected
/// through positive-mass pairs share a label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommonPart {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub count: usize,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Connected components of the support graph between `first` and `second`.
/// Labels are numbered in order of first appearance over `first` then
/// `second`; zero-mass symbols end up as singletons.
pub fn common_part(p: &JointPmf, first: &str, second: &str) -> Result<CommonPart> {
    let a = p.variable(first)?.size();
    let b = p.variable(second)?.size();
    let table = p.table_over(&[first, second])?;
    let mut uf = UnionFind::new(a + b);
    for i in 0..a {
        for j in 0..b {
            if table[i * b + j] > 0.0 {
                uf.union(i, a + j);
            }
        }
    }
    let mut label_of_root = vec![usize::MAX; a + b];
    let mut count = 0;
    let mut labels = Vec::with_capacity(a + b);
    for x in 0..a + b {
        let r = uf.find(x);
        if label_of_root[r] == usize::MAX {
            label_of_root[r] = count;
            count += 1;
        }
        labels.push(label_of_root[r]);
    }
    let second_labels = labels.split_off(a);
    Ok(CommonPart {
        first: labels,
        second: second_labels,
        count,
    })
}

impl CommonPart {
    /// Deterministic kernel `name = label(first)` for adjoining the common
    /// part to a pmf.
    pub fn kernel(&self, first: &Variable, name: &str) -> Result<ConditionalKernel> {
        let k = Variable::indexed(name, self.count, Role::CommonPart)?;
        let labels = self.first.clone();
        ConditionalKernel::deterministic(vec![first.clone()], k, move |o| labels[o[0]])
    }
}
