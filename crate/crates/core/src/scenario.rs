//! Scenario descriptions: code sizes, lossy reconstruction targets, and the
//! variable layout each coding problem expects of its test distribution.
//!
//! Variables are looked up by fixed names:
//!
//! | scenario | variables |
//! |---|---|
//! | point-to-point | `X Y` |
//! | Gelfand-Pinsker | `U S X Y` |
//! | Marton (private) | `U1 U2 X Y1 Y2` |
//! | Marton (common) | `U0 U1 U2 X Y1 Y2` |
//! | Berger-Tung | `S1 S2 U1 U2` |
//! | Heegard-Berger / Kaspi | `S Y W U` |
//! | multiple descriptions | `S U0 U1 U2` |
//! | JSCC over a MAC | `S1 S2 T X1 X2 Y` |

use thiserror::Error;

use crate::pmf::{next_outcome, ConditionalKernel, JointPmf, Variable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("distribution has variables [{found}], scenario needs [{expected}]")]
    Shape { expected: String, found: String },
    #[error("size `{0}` must be a positive integer")]
    ZeroSize(&'static str),
    #[error("{0}")]
    SizeConstraint(String),
    #[error("{0}")]
    Divisibility(String),
    #[error("reconstruction: {0}")]
    Reconstruction(String),
    #[error("distortion: {0}")]
    Distortion(String),
}

pub type Result<T> = std::result::Result<T, ScenarioError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct P2pSizes {
    pub m: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GpSizes {
    pub m: u64,
    pub j: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Marton2Sizes {
    pub m1: u64,
    pub m2: u64,
    pub j1: u64,
    pub j2: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Marton3Sizes {
    pub m0: u64,
    pub m1: u64,
    pub m2: u64,
    pub j1: u64,
    pub j2: u64,
}

/// Berger-Tung: `j_k` codewords per encoder, binned into `m_k` messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BtSizes {
    pub m1: u64,
    pub m2: u64,
    pub j1: u64,
    pub j2: u64,
}

/// Heegard-Berger / Kaspi: `m1` coarse codewords, `j2` fine codewords per
/// coarse one, binned into `m2` messages. The total message count is `m1 * m2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HbSizes {
    pub m1: u64,
    pub m2: u64,
    pub j2: u64,
}

/// Multiple descriptions: `j0` base codewords shared by both descriptions;
/// `j0` must divide `m1` and `m2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MdSizes {
    pub m1: u64,
    pub m2: u64,
    pub j0: u64,
}

impl MdSizes {
    /// Refinement codewords per base codeword for each description.
    pub fn refinements(&self) -> (u64, u64) {
        (self.m1 / self.j0, self.m2 / self.j0)
    }
}

fn positive(v: u64, name: &'static str) -> Result<()> {
    if v == 0 {
        Err(ScenarioError::ZeroSize(name))
    } else {
        Ok(())
    }
}

/// Per-symbol distortion table (rows: source symbols, columns: reconstruction
/// symbols) and the admissible level.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionSpec {
    pub measure: Vec<Vec<f64>>,
    pub level: f64,
}

impl DistortionSpec {
    pub fn hamming(size: usize, level: f64) -> Self {
        let measure = (0..size)
            .map(|i| (0..size).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        Self { measure, level }
    }

    fn validate(&self, source: usize, recon: usize) -> Result<()> {
        if self.measure.len() != source || self.measure.iter().any(|r| r.len() != recon) {
            return Err(ScenarioError::Distortion(format!(
                "table must be {source} x {recon}"
            )));
        }
        if self.measure.iter().flatten().any(|d| !d.is_finite()) || !self.level.is_finite() {
            return Err(ScenarioError::Distortion(
                "table entries and level must be finite".into(),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn within(&self, source: usize, recon: usize) -> bool {
        self.measure[source][recon] <= self.level
    }
}

/// Deterministic reconstruction map from named variables to a reconstruction
/// alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    given: Vec<Variable>,
    alphabet_size: usize,
    map: Vec<usize>,
}

impl Reconstruction {
    /// `map` lists the reconstruction symbol for every outcome of `given`,
    /// row-major.
    pub fn new(given: Vec<Variable>, alphabet_size: usize, map: Vec<usize>) -> Result<Self> {
        let rows: usize = given.iter().map(Variable::size).product();
        if map.len() != rows {
            return Err(ScenarioError::Reconstruction(format!(
                "map has {} entries, expected {rows}",
                map.len()
            )));
        }
        if alphabet_size == 0 || map.iter().any(|&s| s >= alphabet_size) {
            return Err(ScenarioError::Reconstruction(
                "map symbol outside reconstruction alphabet".into(),
            ));
        }
        Ok(Self {
            given,
            alphabet_size,
            map,
        })
    }

    /// From a 0/1 kernel with a single produced variable.
    pub fn from_kernel(kernel: &ConditionalKernel) -> Result<Self> {
        if kernel.produced().len() != 1 {
            return Err(ScenarioError::Reconstruction(
                "kernel must produce exactly one variable".into(),
            ));
        }
        let map = kernel.deterministic_map().ok_or_else(|| {
            ScenarioError::Reconstruction("kernel is not deterministic".into())
        })?;
        Self::new(kernel.given().to_vec(), kernel.produced()[0].size(), map)
    }

    /// Build by evaluating `f` on every outcome of `given`.
    pub fn from_fn(
        given: Vec<Variable>,
        alphabet_size: usize,
        f: impl Fn(&[usize]) -> usize,
    ) -> Result<Self> {
        let shape: Vec<usize> = given.iter().map(Variable::size).collect();
        let rows: usize = shape.iter().product();
        let mut outcome = vec![0; shape.len()];
        let mut map = Vec::with_capacity(rows);
        for _ in 0..rows {
            map.push(f(&outcome));
            next_outcome(&mut outcome, &shape);
        }
        Self::new(given, alphabet_size, map)
    }

    pub fn given(&self) -> &[Variable] {
        &self.given
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Resolve against an ordered list of available variables. Every
    /// conditioning variable must be among `names` with a matching alphabet.
    pub fn bind(&self, vars: &[&Variable]) -> Result<BoundReconstruction> {
        let mut picks = Vec::with_capacity(self.given.len());
        let mut stride = 1;
        for g in self.given.iter().rev() {
            let pos = vars
                .iter()
                .position(|v| v.name() == g.name())
                .ok_or_else(|| {
                    ScenarioError::Reconstruction(format!(
                        "`{}` is not available to this decoder",
                        g.name()
                    ))
                })?;
            if vars[pos].size() != g.size() {
                return Err(ScenarioError::Reconstruction(format!(
                    "`{}` alphabet size mismatch",
                    g.name()
                )));
            }
            picks.push((pos, stride));
            stride *= g.size();
        }
        Ok(BoundReconstruction {
            picks,
            map: self.map.clone(),
        })
    }
}

/// Reconstruction map addressed by positions in a caller-defined symbol list.
#[derive(Debug, Clone)]
pub struct BoundReconstruction {
    picks: Vec<(usize, usize)>,
    map: Vec<usize>,
}

impl BoundReconstruction {
    #[inline]
    pub fn apply(&self, symbols: &[usize]) -> usize {
        let idx: usize = self.picks.iter().map(|&(p, s)| symbols[p] * s).sum();
        self.map[idx]
    }
}

/// A reconstruction together with the fidelity criterion it must meet.
#[derive(Debug, Clone, PartialEq)]
pub struct LossyTarget {
    pub recon: Reconstruction,
    pub distortion: DistortionSpec,
}

impl LossyTarget {
    pub fn new(recon: Reconstruction, distortion: DistortionSpec) -> Self {
        Self { recon, distortion }
    }
}

/// Bound target resolved against a specific list of variables and a source
/// position in that list.
#[derive(Debug, Clone)]
pub(crate) struct BoundTarget {
    pub source: usize,
    pub recon: BoundReconstruction,
    pub distortion: DistortionSpec,
}

impl BoundTarget {
    pub fn bind(
        target: &LossyTarget,
        source: &str,
        available: &[&str],
        vars: &[&Variable],
    ) -> Result<Self> {
        for g in target.recon.given() {
            if !available.contains(&g.name()) {
                return Err(ScenarioError::Reconstruction(format!(
                    "`{}` is not available to this decoder",
                    g.name()
                )));
            }
        }
        let source_pos = vars
            .iter()
            .position(|v| v.name() == source)
            .ok_or_else(|| ScenarioError::Reconstruction(format!("no source `{source}`")))?;
        target
            .distortion
            .validate(vars[source_pos].size(), target.recon.alphabet_size())?;
        Ok(Self {
            source: source_pos,
            recon: target.recon.bind(vars)?,
            distortion: target.distortion.clone(),
        })
    }

    #[inline]
    pub fn distortion_ok(&self, symbols: &[usize]) -> bool {
        let shat = self.recon.apply(symbols);
        self.distortion.within(symbols[self.source], shat)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    PointToPoint(P2pSizes),
    GelfandPinsker(GpSizes),
    Marton2(Marton2Sizes),
    Marton3(Marton3Sizes),
    BergerTung(BtSizes, [LossyTarget; 2]),
    HeegardBergerKaspi(HbSizes, [LossyTarget; 2]),
    MultipleDescriptions(MdSizes, [LossyTarget; 3]),
    JsccMac,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::PointToPoint(_) => "p2p",
            Scenario::GelfandPinsker(_) => "gp",
            Scenario::Marton2(_) => "marton2",
            Scenario::Marton3(_) => "marton3",
            Scenario::BergerTung(..) => "berger_tung",
            Scenario::HeegardBergerKaspi(..) => "hb_kaspi",
            Scenario::MultipleDescriptions(..) => "md",
            Scenario::JsccMac => "jscc_mac",
        }
    }

    /// Variable names the test distribution must consist of.
    pub fn variables(&self) -> &'static [&'static str] {
        match self {
            Scenario::PointToPoint(_) => &["X", "Y"],
            Scenario::GelfandPinsker(_) => &["U", "S", "X", "Y"],
            Scenario::Marton2(_) => &["U1", "U2", "X", "Y1", "Y2"],
            Scenario::Marton3(_) => &["U0", "U1", "U2", "X", "Y1", "Y2"],
            Scenario::BergerTung(..) => &["S1", "S2", "U1", "U2"],
            Scenario::HeegardBergerKaspi(..) => &["S", "Y", "W", "U"],
            Scenario::MultipleDescriptions(..) => &["S", "U0", "U1", "U2"],
            Scenario::JsccMac => &["S1", "S2", "T", "X1", "X2", "Y"],
        }
    }

    /// Conditional-independence structure the distribution must have, as a
    /// chain of `(produced, given)` factors.
    pub fn factorization(&self) -> &'static [(&'static [&'static str], &'static [&'static str])] {
        match self {
            Scenario::PointToPoint(_) | Scenario::MultipleDescriptions(..) => &[],
            Scenario::GelfandPinsker(_) => &[
                (&["S"], &[]),
                (&["U"], &["S"]),
                (&["X"], &["U", "S"]),
                (&["Y"], &["X", "S"]),
            ],
            Scenario::Marton2(_) => &[
                (&["U1", "U2"], &[]),
                (&["X"], &["U1", "U2"]),
                (&["Y1", "Y2"], &["X"]),
            ],
            Scenario::Marton3(_) => &[
                (&["U0", "U1", "U2"], &[]),
                (&["X"], &["U0", "U1", "U2"]),
                (&["Y1", "Y2"], &["X"]),
            ],
            Scenario::BergerTung(..) => &[
                (&["S1", "S2"], &[]),
                (&["U1"], &["S1"]),
                (&["U2"], &["S2"]),
            ],
            Scenario::HeegardBergerKaspi(..) => &[(&["S", "Y"], &[]), (&["W", "U"], &["S"])],
            Scenario::JsccMac => &[
                (&["S1", "S2"], &[]),
                (&["T"], &[]),
                (&["X1"], &["S1", "T"]),
                (&["X2"], &["S2", "T"]),
                (&["Y"], &["X1", "X2"]),
            ],
        }
    }

    /// Check the variable set and code sizes.
    pub fn validate(&self, q: &JointPmf) -> Result<()> {
        let expected = self.variables();
        let found = q.variable_names();
        let same = found.len() == expected.len() && expected.iter().all(|e| found.contains(e));
        if !same {
            return Err(ScenarioError::Shape {
                expected: expected.join(" "),
                found: found.join(" "),
            });
        }
        match self {
            Scenario::PointToPoint(s) => positive(s.m, "M"),
            Scenario::GelfandPinsker(s) => {
                positive(s.m, "M")?;
                positive(s.j, "J")
            }
            Scenario::Marton2(s) => {
                positive(s.m1, "M1")?;
                positive(s.m2, "M2")?;
                positive(s.j1, "J1")?;
                positive(s.j2, "J2")
            }
            Scenario::Marton3(s) => {
                positive(s.m0, "M0")?;
                positive(s.m1, "M1")?;
                positive(s.m2, "M2")?;
                positive(s.j1, "J1")?;
                positive(s.j2, "J2")
            }
            Scenario::BergerTung(s, _) => {
                positive(s.m1, "M1")?;
                positive(s.m2, "M2")?;
                positive(s.j1, "J1")?;
                positive(s.j2, "J2")?;
                if s.j1 < s.m1 || s.j2 < s.m2 {
                    return Err(ScenarioError::SizeConstraint(
                        "codebook sizes must be at least the bin counts (J1 >= M1, J2 >= M2)"
                            .into(),
                    ));
                }
                Ok(())
            }
            Scenario::HeegardBergerKaspi(s, _) => {
                positive(s.m1, "M1")?;
                positive(s.m2, "M2")?;
                positive(s.j2, "J2")?;
                if s.j2 < s.m2 {
                    return Err(ScenarioError::SizeConstraint(
                        "fine codebook size must be at least the bin count (J2 >= M2)".into(),
                    ));
                }
                Ok(())
            }
            Scenario::MultipleDescriptions(s, _) => {
                positive(s.m1, "M1")?;
                positive(s.m2, "M2")?;
                positive(s.j0, "J0")?;
                if s.m1 % s.j0 != 0 || s.m2 % s.j0 != 0 {
                    return Err(ScenarioError::Divisibility(format!(
                        "J0 = {} must divide M1 = {} and M2 = {}",
                        s.j0, s.m1, s.m2
                    )));
                }
                Ok(())
            }
            Scenario::JsccMac => Ok(()),
        }
    }
}
