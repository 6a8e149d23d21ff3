//! Scenario configuration files: parsing, validation, and assembly of the
//! joint distribution and scenario description.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use oneshot::pmf::{Alphabet, ConditionalKernel, JointPmf, Role, Variable};
use oneshot::scenario::{
    BtSizes, DistortionSpec, GpSizes, HbSizes, LossyTarget, Marton2Sizes, Marton3Sizes, MdSizes,
    P2pSizes, Reconstruction, Scenario,
};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Real number written either as a JSON number or a decimal string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Real(v)),
            Raw::Text(s) => s
                .trim()
                .parse::<f64>()
                .map(Real)
                .map_err(|_| D::Error::custom(format!("`{s}` is not a decimal number"))),
        }
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

/// Symbol reference: a label from the alphabet or a zero-based index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Symbol {
    Index(usize),
    Label(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDecl {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbols: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
}

/// One factor of the joint distribution: a pmf (no `given`), a conditional
/// kernel, or a deterministic map of a single variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub given: Vec<String>,
    pub variables: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<Real>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<Vec<Symbol>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Measure {
    Named(String),
    Table(Vec<Vec<Real>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionDecl {
    /// Variables the reconstruction reads, in the order the map is laid out.
    pub given: Vec<String>,
    /// Reconstruction symbol for every outcome of `given`, row-major.
    pub map: Vec<Symbol>,
    /// Reconstruction alphabet; defaults to the source alphabet.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbols: Option<Vec<String>>,
    pub measure: Measure,
    pub level: Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McDecl {
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateDecl {
    pub n: u64,
    pub epsilon: Real,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<[Real; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_coefficient: Option<Real>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: String,
    pub variables: Vec<VariableDecl>,
    pub distributions: Vec<Block>,
    #[serde(default)]
    pub sizes: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distortions: Vec<DistortionDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<Real>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_query: Option<RateDecl>,
}

/// Validated configuration ready to run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub name: &'static str,
    pub scenario: Scenario,
    pub q: JointPmf,
    pub gammas: Vec<f64>,
    pub mc: Option<McDecl>,
    pub rate_query: Option<RateDecl>,
    pub digest: String,
}

pub fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn parse(text: &str) -> std::result::Result<Config, serde_json::Error> {
    serde_json::from_str(text)
}

/// Canonical scenario name for any accepted spelling.
fn canonical_name(name: &str) -> Option<&'static str> {
    Some(match name {
        "p2p" | "point_to_point" => "p2p",
        "gelfand_pinsker" | "gp" => "gelfand_pinsker",
        "marton2" => "marton2",
        "marton3" => "marton3",
        "berger_tung" | "bt" => "berger_tung",
        "hb_kaspi" | "heegard_berger_kaspi" => "hb_kaspi",
        "multiple_description" | "multiple_descriptions" | "md" => "multiple_description",
        "jscc_mac" | "jscc" => "jscc_mac",
        _ => return None,
    })
}

fn parse_role(role: Option<&str>) -> Result<Role> {
    Ok(match role.unwrap_or("auxiliary") {
        "source" => Role::Source,
        "state" => Role::State,
        "input" => Role::Input,
        "output" => Role::Output,
        "auxiliary" => Role::Auxiliary,
        "time_sharing" => Role::TimeSharing,
        "common_part" => Role::CommonPart,
        "reconstruction" => Role::Reconstruction,
        other => return Err(CliError::invalid(format!("unknown role `{other}`"))),
    })
}

fn finite(v: Real, what: &str) -> Result<f64> {
    if v.0.is_finite() {
        Ok(v.0)
    } else {
        Err(CliError::invalid(format!("{what} must be finite")))
    }
}

fn resolve_symbol(alphabet: &[String], s: &Symbol, what: &str) -> Result<usize> {
    match s {
        Symbol::Index(i) if *i < alphabet.len() => Ok(*i),
        Symbol::Label(l) => alphabet
            .iter()
            .position(|a| a == l)
            .ok_or_else(|| CliError::invalid(format!("{what}: unknown symbol `{l}`"))),
        Symbol::Index(i) => Err(CliError::invalid(format!("{what}: symbol index {i} out of range"))),
    }
}

impl Config {
    /// Apply command-line overrides.
    pub fn override_with(&mut self, trials: Option<u64>, seed: Option<u64>, gammas: Option<Vec<f64>>) {
        if trials.is_some() || seed.is_some() {
            let base = self.mc.unwrap_or(McDecl { trials: 0, seed: 0 });
            self.mc = Some(McDecl {
                trials: trials.unwrap_or(base.trials),
                seed: seed.unwrap_or(base.seed),
            });
        }
        if let Some(g) = gammas {
            self.gammas = Some(g.into_iter().map(Real).collect());
        }
    }

    /// Validate, normalize symbol references to indices, and assemble the
    /// scenario. The digest covers the normalized configuration.
    pub fn prepare(mut self) -> Result<Prepared> {
        let name = canonical_name(&self.scenario)
            .ok_or_else(|| CliError::invalid(format!("unknown scenario `{}`", self.scenario)))?;
        self.scenario = name.to_string();

        let mut vars: BTreeMap<String, Variable> = BTreeMap::new();
        for decl in &mut self.variables {
            let symbols = match (&decl.symbols, decl.size) {
                (Some(s), None) => s.clone(),
                (None, Some(n)) => (0..n).map(|i| i.to_string()).collect(),
                (Some(s), Some(n)) if s.len() == n => s.clone(),
                _ => {
                    return Err(CliError::invalid(format!(
                        "variable `{}` needs exactly one of `symbols` or a matching `size`",
                        decl.name
                    )))
                }
            };
            let role = parse_role(decl.role.as_deref())?;
            let alphabet = Arc::new(Alphabet::new(decl.name.clone(), symbols.clone())?);
            if vars
                .insert(decl.name.clone(), Variable::new(decl.name.clone(), alphabet, role))
                .is_some()
            {
                return Err(CliError::invalid(format!("variable `{}` declared twice", decl.name)));
            }
            decl.role = Some(decl.role.clone().unwrap_or_else(|| "auxiliary".into()));
            decl.symbols = Some(symbols);
            decl.size = None;
        }
        let lookup = |n: &str| -> Result<Variable> {
            vars.get(n)
                .cloned()
                .ok_or_else(|| CliError::invalid(format!("undeclared variable `{n}`")))
        };

        let q = self.assemble(&lookup)?;
        let scenario = self.build_scenario(name, &q, &lookup)?;
        let q = q.reorder(scenario.variables())?;
        scenario.validate(&q)?;

        let gammas = match &self.gammas {
            Some(g) => g
                .iter()
                .map(|&v| finite(v, "gamma"))
                .collect::<Result<Vec<_>>>()?,
            None => {
                let mut g: Vec<f64> = (1..=20).map(f64::from).collect();
                if let Some(rq) = self.rate_query.as_ref().filter(|rq| rq.n > 1) {
                    g.push(0.5 * (rq.n as f64).log2());
                }
                g
            }
        };
        self.gammas = Some(gammas.iter().copied().map(Real).collect());
        if let Some(rq) = &self.rate_query {
            finite(rq.epsilon, "epsilon")?;
            for v in rq.point.iter().flatten().chain(&rq.grid).chain(&rq.log_coefficient) {
                finite(*v, "rate query value")?;
            }
        }

        let canonical = serde_json::to_vec(&self).expect("config serializes");
        let digest = hex::encode(Sha256::digest(&canonical));
        Ok(Prepared {
            name,
            scenario,
            q,
            gammas,
            mc: self.mc,
            rate_query: self.rate_query,
            digest,
        })
    }

    fn assemble(&mut self, lookup: &impl Fn(&str) -> Result<Variable>) -> Result<JointPmf> {
        let mut joint: Option<JointPmf> = None;
        for (i, block) in self.distributions.iter_mut().enumerate() {
            let what = format!("distributions[{i}]");
            let given: Vec<Variable> = block.given.iter().map(|n| lookup(n)).collect::<Result<_>>()?;
            let produced: Vec<Variable> = block
                .variables
                .iter()
                .map(|n| lookup(n))
                .collect::<Result<_>>()?;
            let kernel = match (&block.probabilities, &block.map) {
                (Some(p), None) => {
                    let table = p
                        .iter()
                        .map(|&v| finite(v, &what))
                        .collect::<Result<Vec<_>>>()?;
                    if joint.is_none() {
                        if !given.is_empty() {
                            return Err(CliError::invalid(format!(
                                "{what}: the first block must be an unconditional pmf"
                            )));
                        }
                        joint = Some(
                            JointPmf::new(produced, table)
                                .map_err(|e| CliError::invalid(format!("{what}: {e}")))?,
                        );
                        continue;
                    }
                    ConditionalKernel::new(given, produced, table)
                        .map_err(|e| CliError::invalid(format!("{what}: {e}")))?
                }
                (None, Some(map)) => {
                    if produced.len() != 1 {
                        return Err(CliError::invalid(format!(
                            "{what}: a map block produces exactly one variable"
                        )));
                    }
                    let target = produced.into_iter().next().unwrap();
                    let indices = map
                        .iter()
                        .map(|s| resolve_symbol(target.alphabet().symbols(), s, &what))
                        .collect::<Result<Vec<_>>>()?;
                    let rows: usize = given.iter().map(Variable::size).product();
                    if indices.len() != rows {
                        return Err(CliError::invalid(format!(
                            "{what}: map has {} entries, expected {rows}",
                            indices.len()
                        )));
                    }
                    block.map = Some(indices.iter().map(|&i| Symbol::Index(i)).collect());
                    let shape: Vec<usize> = given.iter().map(Variable::size).collect();
                    ConditionalKernel::deterministic(given, target, |o| {
                        indices[o.iter().zip(&shape).fold(0, |acc, (&s, &n)| acc * n + s)]
                    })
                    .map_err(|e| CliError::invalid(format!("{what}: {e}")))?
                }
                _ => {
                    return Err(CliError::invalid(format!(
                        "{what}: give exactly one of `probabilities` or `map`"
                    )))
                }
            };
            let Some(j) = joint.as_ref() else {
                return Err(CliError::invalid(format!(
                    "{what}: the first block must be an unconditional pmf"
                )));
            };
            joint = Some(
                j.compose(&kernel)
                    .map_err(|e| CliError::invalid(format!("{what}: {e}")))?,
            );
        }
        joint.ok_or_else(|| CliError::invalid("no distributions given"))
    }

    fn size(&self, key: &'static str) -> Result<u64> {
        let v = *self
            .sizes
            .get(key)
            .ok_or_else(|| CliError::invalid(format!("missing size `{key}`")))?;
        if v == 0 {
            return Err(CliError::invalid(format!("size `{key}` must be positive")));
        }
        Ok(v)
    }

    fn check_size_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.sizes.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(CliError::invalid(format!(
                "unexpected size `{k}`; this scenario takes {allowed:?}"
            ))),
            None => Ok(()),
        }
    }

    fn targets<const N: usize>(
        &mut self,
        sources: [&str; N],
        lookup: &impl Fn(&str) -> Result<Variable>,
    ) -> Result<[LossyTarget; N]> {
        if self.distortions.len() != N {
            return Err(CliError::invalid(format!(
                "this scenario needs {N} distortion blocks, got {}",
                self.distortions.len()
            )));
        }
        let mut out = Vec::with_capacity(N);
        for (k, (decl, source)) in self.distortions.iter_mut().zip(sources).enumerate() {
            let what = format!("distortions[{k}]");
            let source = lookup(source)?;
            let symbols = decl
                .symbols
                .clone()
                .unwrap_or_else(|| source.alphabet().symbols().to_vec());
            let given: Vec<Variable> = decl.given.iter().map(|n| lookup(n)).collect::<Result<_>>()?;
            let map = decl
                .map
                .iter()
                .map(|s| resolve_symbol(&symbols, s, &what))
                .collect::<Result<Vec<_>>>()?;
            decl.map = map.iter().map(|&i| Symbol::Index(i)).collect();
            decl.symbols = Some(symbols.clone());
            let measure = match &decl.measure {
                Measure::Named(n) if n == "hamming" => {
                    if symbols.len() != source.size() {
                        return Err(CliError::invalid(format!(
                            "{what}: hamming distortion needs a reconstruction alphabet the size of the source"
                        )));
                    }
                    DistortionSpec::hamming(source.size(), 0.0).measure
                }
                Measure::Named(n) => {
                    return Err(CliError::invalid(format!("{what}: unknown measure `{n}`")))
                }
                Measure::Table(rows) => rows
                    .iter()
                    .map(|r| r.iter().map(|&v| finite(v, &what)).collect())
                    .collect::<Result<_>>()?,
            };
            decl.measure = Measure::Table(
                measure
                    .iter()
                    .map(|r: &Vec<f64>| r.iter().map(|&v| Real(v)).collect())
                    .collect(),
            );
            let level = finite(decl.level, &what)?;
            let recon = Reconstruction::new(given, symbols.len(), map)?;
            out.push(LossyTarget::new(recon, DistortionSpec { measure, level }));
        }
        Ok(out.try_into().unwrap_or_else(|_| unreachable!("length checked")))
    }

    fn no_distortions(&self) -> Result<()> {
        if self.distortions.is_empty() {
            Ok(())
        } else {
            Err(CliError::invalid("this scenario takes no distortion blocks"))
        }
    }

    fn build_scenario(
        &mut self,
        name: &str,
        q: &JointPmf,
        lookup: &impl Fn(&str) -> Result<Variable>,
    ) -> Result<Scenario> {
        let _ = q;
        Ok(match name {
            "p2p" => {
                self.check_size_keys(&["M"])?;
                self.no_distortions()?;
                Scenario::PointToPoint(P2pSizes { m: self.size("M")? })
            }
            "gelfand_pinsker" => {
                self.check_size_keys(&["M", "J"])?;
                self.no_distortions()?;
                Scenario::GelfandPinsker(GpSizes {
                    m: self.size("M")?,
                    j: self.size("J")?,
                })
            }
            "marton2" => {
                self.check_size_keys(&["M1", "M2", "J1", "J2"])?;
                self.no_distortions()?;
                Scenario::Marton2(Marton2Sizes {
                    m1: self.size("M1")?,
                    m2: self.size("M2")?,
                    j1: self.size("J1")?,
                    j2: self.size("J2")?,
                })
            }
            "marton3" => {
                self.check_size_keys(&["M0", "M1", "M2", "J1", "J2"])?;
                self.no_distortions()?;
                Scenario::Marton3(Marton3Sizes {
                    m0: self.size("M0")?,
                    m1: self.size("M1")?,
                    m2: self.size("M2")?,
                    j1: self.size("J1")?,
                    j2: self.size("J2")?,
                })
            }
            "berger_tung" => {
                self.check_size_keys(&["M1", "M2", "J1", "J2"])?;
                let sizes = BtSizes {
                    m1: self.size("M1")?,
                    m2: self.size("M2")?,
                    j1: self.size("J1")?,
                    j2: self.size("J2")?,
                };
                Scenario::BergerTung(sizes, self.targets(["S1", "S2"], lookup)?)
            }
            "hb_kaspi" => {
                self.check_size_keys(&["M1", "M2", "J2"])?;
                let sizes = HbSizes {
                    m1: self.size("M1")?,
                    m2: self.size("M2")?,
                    j2: self.size("J2")?,
                };
                Scenario::HeegardBergerKaspi(sizes, self.targets(["S", "S"], lookup)?)
            }
            "multiple_description" => {
                self.check_size_keys(&["M1", "M2", "J0"])?;
                let sizes = MdSizes {
                    m1: self.size("M1")?,
                    m2: self.size("M2")?,
                    j0: self.size("J0")?,
                };
                Scenario::MultipleDescriptions(sizes, self.targets(["S", "S", "S"], lookup)?)
            }
            "jscc_mac" => {
                self.check_size_keys(&[])?;
                self.no_distortions()?;
                Scenario::JsccMac
            }
            _ => unreachable!("name is canonical"),
        })
    }
}
