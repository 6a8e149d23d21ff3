//! One-shot achievability bounds evaluated by exhaustive summation over the
//! support of the test distribution.
//!
//! Every evaluator returns a lower bound on the probability of correct
//! decoding (or of meeting all distortion levels) and, where a loosened form
//! exists, an upper bound on the error probability for each requested
//! threshold `gamma`: the probability that some density falls on the wrong
//! side of its rate threshold by less than `gamma`, plus a constant multiple
//! of `2^-gamma`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::densities::{CompiledDensity, DensityContext, DensityError, DensitySpec};
use crate::pmf::{common_part, JointPmf, PmfError, Variable};
use crate::scenario::{
    BoundTarget, BtSizes, GpSizes, HbSizes, LossyTarget, Marton2Sizes, Marton3Sizes, MdSizes,
    P2pSizes, Scenario, ScenarioError,
};

/// Default tolerance on the factorization check.
pub const FACTORIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error(transparent)]
    Pmf(#[from] PmfError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("distribution violates the required factorization (max gap {gap:e} > {tolerance:e})")]
    FactorizationViolation { gap: f64, tolerance: f64 },
    #[error("threshold gamma must not be NaN")]
    InvalidGamma,
}

pub type Result<T> = std::result::Result<T, BoundError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    pub factorization_tolerance: f64,
    /// When false, a factorization violation is reported as a warning.
    pub enforce_factorization: bool,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            factorization_tolerance: FACTORIZATION_TOLERANCE,
            enforce_factorization: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaBound {
    pub gamma: f64,
    pub error_ub: f64,
}

/// Mean of one denominator factor, reported for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundTerm {
    pub name: &'static str,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub correct_lb: f64,
    pub error_ub_by_gamma: Vec<GammaBound>,
    pub terms: Vec<BoundTerm>,
    pub warnings: Vec<String>,
}

/// Per-outcome contribution of a bound.
struct Point {
    integrand: f64,
    /// Smallest event margin; the loosened error event fires when it is below
    /// gamma. `-inf` marks a distortion excess.
    margin: f64,
    terms: [f64; 4],
}

struct Plan<'n> {
    term_names: &'n [&'static str],
    /// Multiplier of `2^-gamma`, absent when no loosened form exists.
    slack: Option<f64>,
}

fn sum_points(
    q: &JointPmf,
    plan: Plan<'_>,
    gammas: &[f64],
    mut point: impl FnMut(&[usize]) -> Result<Point>,
) -> Result<BoundResult> {
    let mut lb = 0.0;
    let mut terms = [0.0; 4];
    let mut margins = Vec::new();
    q.try_for_each_support(|o, p| -> Result<()> {
        let pt = point(o)?;
        lb += p * pt.integrand;
        for (acc, t) in terms.iter_mut().zip(pt.terms) {
            *acc += p * t;
        }
        margins.push((pt.margin, p));
        Ok(())
    })?;
    let error_ub_by_gamma = match plan.slack {
        None => Vec::new(),
        Some(c) => gammas
            .iter()
            .map(|&gamma| {
                let prob: f64 = margins
                    .iter()
                    .filter(|(m, _)| *m < gamma)
                    .map(|(_, p)| p)
                    .sum();
                GammaBound {
                    gamma,
                    error_ub: (prob + c * (-gamma).exp2()).clamp(0.0, 1.0),
                }
            })
            .collect(),
    };
    Ok(BoundResult {
        correct_lb: lb.clamp(0.0, 1.0),
        error_ub_by_gamma,
        terms: plan
            .term_names
            .iter()
            .zip(terms)
            .map(|(&name, mean)| BoundTerm { name, mean })
            .collect(),
        warnings: Vec::new(),
    })
}

fn min_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

struct Densities<'a> {
    ctx: DensityContext<'a>,
}

impl<'a> Densities<'a> {
    fn new(q: &'a JointPmf) -> Self {
        Self {
            ctx: DensityContext::new(q),
        }
    }

    fn info(&self, left: &[&str], right: &[&str], given: &[&str]) -> Result<CompiledDensity> {
        Ok(self
            .ctx
            .compile(&DensitySpec::info(left, right).given(given))?)
    }

    fn entropy(&self, left: &[&str], given: &[&str]) -> Result<CompiledDensity> {
        Ok(self.ctx.compile(&DensitySpec::entropy(left).given(given))?)
    }
}

#[inline]
fn bits(d: &CompiledDensity, o: &[usize]) -> Result<f64> {
    Ok(d.eval(o)?.bits())
}

fn host_vars(q: &JointPmf) -> Vec<&Variable> {
    q.variables().iter().collect()
}

fn check_gammas(gammas: &[f64]) -> Result<()> {
    if gammas.iter().any(|g| g.is_nan()) {
        return Err(BoundError::InvalidGamma);
    }
    Ok(())
}

/// Evaluate the bound of `scenario` under the test distribution `q`.
pub fn evaluate(
    scenario: &Scenario,
    q: &JointPmf,
    gammas: &[f64],
    options: &BoundOptions,
) -> Result<BoundResult> {
    scenario.validate(q)?;
    check_gammas(gammas)?;
    let mut warnings = Vec::new();
    let factors = scenario.factorization();
    if !factors.is_empty() {
        let gap = q.factorization_gap(factors)?;
        if gap > options.factorization_tolerance {
            if options.enforce_factorization {
                return Err(BoundError::FactorizationViolation {
                    gap,
                    tolerance: options.factorization_tolerance,
                });
            }
            let msg = format!("factorization gap {gap:e} exceeds {:e}", options.factorization_tolerance);
            log::warn!("{}: {msg}", scenario.name());
            warnings.push(msg);
        }
    }
    let mut result = match scenario {
        Scenario::PointToPoint(s) => p2p(q, *s)?,
        Scenario::GelfandPinsker(s) => gelfand_pinsker(q, *s, gammas)?,
        Scenario::Marton2(s) => marton2(q, *s, gammas)?,
        Scenario::Marton3(s) => marton3(q, *s, gammas)?,
        Scenario::BergerTung(s, t) => berger_tung(q, *s, t, gammas)?,
        Scenario::HeegardBergerKaspi(s, t) => hb_kaspi(q, *s, t, gammas)?,
        Scenario::MultipleDescriptions(s, t) => multiple_descriptions(q, *s, t, gammas)?,
        Scenario::JsccMac => jscc_mac(q, gammas)?,
    };
    result.warnings.extend(warnings);
    Ok(result)
}

fn p2p(q: &JointPmf, s: P2pSizes) -> Result<BoundResult> {
    let d = Densities::new(q);
    let i_xy = d.info(&["X"], &["Y"], &[])?;
    let m = s.m as f64;
    let plan = Plan {
        term_names: &["confusion"],
        slack: None,
    };
    sum_points(q, plan, &[], |o| {
        let confusion = (m - 1.0) * (-bits(&i_xy, o)?).exp2();
        Ok(Point {
            integrand: 1.0 / (1.0 + confusion),
            margin: f64::INFINITY,
            terms: [confusion, 0.0, 0.0, 0.0],
        })
    })
}

fn gelfand_pinsker(q: &JointPmf, s: GpSizes, gammas: &[f64]) -> Result<BoundResult> {
    let d = Densities::new(q);
    let i_us = d.info(&["U"], &["S"], &[])?;
    let i_uy = d.info(&["U"], &["Y"], &[])?;
    let (m, j) = (s.m as f64, s.j as f64);
    let (log_j, log_mj) = (j.log2(), (m * j).log2());
    let plan = Plan {
        term_names: &["covering", "packing"],
        slack: Some(3.0),
    };
    sum_points(q, plan, gammas, |o| {
        let a = bits(&i_us, o)?;
        let b = bits(&i_uy, o)?;
        let cover = 1.0 + a.exp2() / j;
        let pack = 1.0 + m * j * (-b).exp2();
        Ok(Point {
            integrand: 1.0 / (cover * pack),
            margin: min_of(&[log_j - a, b - log_mj]),
            terms: [cover, pack, 0.0, 0.0],
        })
    })
}

fn marton2(q: &JointPmf, s: Marton2Sizes, gammas: &[f64]) -> Result<BoundResult> {
    let d = Densities::new(q);
    let i_12 = d.info(&["U1"], &["U2"], &[])?;
    let i_1 = d.info(&["U1"], &["Y1"], &[])?;
    let i_2 = d.info(&["U2"], &["Y2"], &[])?;
    let (m1, m2, j1, j2) = (s.m1 as f64, s.m2 as f64, s.j1 as f64, s.j2 as f64);
    let plan = Plan {
        term_names: &["covering", "packing_1", "packing_2"],
        slack: Some(7.0),
    };
    sum_points(q, plan, gammas, |o| {
        let a = bits(&i_12, o)?;
        let b1 = bits(&i_1, o)?;
        let b2 = bits(&i_2, o)?;
        let cover = 1.0 + a.exp2() / (j1 * j2);
        let pack1 = 1.0 + m1 * j1 * (-b1).exp2();
        let pack2 = 1.0 + m2 * j2 * (-b2).exp2();
        Ok(Point {
            integrand: 1.0 / (cover * pack1 * pack2),
            margin: min_of(&[
                (j1 * j2).log2() - a,
                b1 - (m1 * j1).log2(),
                b2 - (m2 * j2).log2(),
            ]),
            terms: [cover, pack1, pack2, 0.0],
        })
    })
}

fn marton3(q: &JointPmf, s: Marton3Sizes, gammas: &[f64]) -> Result<BoundResult> {
    let d = Densities::new(q);
    let i_12 = d.info(&["U1"], &["U2"], &["U0"])?;
    let i_1 = d.info(&["U1"], &["Y1"], &["U0"])?;
    let i_2 = d.info(&["U2"], &["Y2"], &["U0"])?;
    let i_01 = d.info(&["U0", "U1"], &["Y1"], &[])?;
    let i_02 = d.info(&["U0", "U2"], &["Y2"], &[])?;
    let (m0, m1, m2, j1, j2) = (
        s.m0 as f64,
        s.m1 as f64,
        s.m2 as f64,
        s.j1 as f64,
        s.j2 as f64,
    );
    let plan = Plan {
        term_names: &["covering", "packing_1", "packing_2"],
        slack: Some(17.0),
    };
    sum_points(q, plan, gammas, |o| {
        let a = bits(&i_12, o)?;
        let (b1, b2) = (bits(&i_1, o)?, bits(&i_2, o)?);
        let (c1, c2) = (bits(&i_01, o)?, bits(&i_02, o)?);
        let cover = 1.0 + a.exp2() / (j1 * j2);
        let pack1 = 1.0 + m1 * j1 * (-b1).exp2() + m0 * j1 * m1 * (-c1).exp2();
        let pack2 = 1.0 + m2 * j2 * (-b2).exp2() + m0 * j2 * m2 * (-c2).exp2();
        Ok(Point {
            integrand: 1.0 / (cover * pack1 * pack2),
            margin: min_of(&[
                (j1 * j2).log2() - a,
                b1 - (m1 * j1).log2(),
                b2 - (m2 * j2).log2(),
                c1 - (m0 * m1 * j1).log2(),
                c2 - (m0 * m2 * j2).log2(),
            ]),
            terms: [cover, pack1, pack2, 0.0],
        })
    })
}

fn berger_tung(
    q: &JointPmf,
    s: BtSizes,
    targets: &[LossyTarget; 2],
    gammas: &[f64],
) -> Result<BoundResult> {
    let vars = host_vars(q);
    let decoder = ["U1", "U2"];
    let t1 = BoundTarget::bind(&targets[0], "S1", &decoder, &vars)?;
    let t2 = BoundTarget::bind(&targets[1], "S2", &decoder, &vars)?;
    let d = Densities::new(q);
    let i_1 = d.info(&["S1"], &["U1"], &[])?;
    let i_2 = d.info(&["S2"], &["U2"], &[])?;
    let i_12 = d.info(&["U1"], &["U2"], &[])?;
    let (m1, m2, j1, j2) = (s.m1 as f64, s.m2 as f64, s.j1 as f64, s.j2 as f64);
    let bin_load = j2 / m2 + j1 / m1 + j1 * j2 / (m1 * m2);
    let plan = Plan {
        term_names: &["covering_1", "covering_2", "binning"],
        slack: Some(15.0),
    };
    sum_points(q, plan, gammas, |o| {
        let a1 = bits(&i_1, o)?;
        let a2 = bits(&i_2, o)?;
        let c = bits(&i_12, o)?;
        let cover1 = 1.0 + a1.exp2() / j1;
        let cover2 = 1.0 + a2.exp2() / j2;
        let bins = 1.0 + bin_load * (-c).exp2();
        let ok = t1.distortion_ok(o) && t2.distortion_ok(o);
        let margin = if ok {
            min_of(&[
                j1.log2() - a1,
                j2.log2() - a2,
                c - (j1 * j2 / (m1 * m2)).log2(),
            ])
        } else {
            f64::NEG_INFINITY
        };
        Ok(Point {
            integrand: if ok { 1.0 / (cover1 * cover2 * bins) } else { 0.0 },
            margin,
            terms: [cover1, cover2, bins, 0.0],
        })
    })
}

fn hb_kaspi(
    q: &JointPmf,
    s: HbSizes,
    targets: &[LossyTarget; 2],
    gammas: &[f64],
) -> Result<BoundResult> {
    let vars = host_vars(q);
    let t1 = BoundTarget::bind(&targets[0], "S", &["W"], &vars)?;
    let t2 = BoundTarget::bind(&targets[1], "S", &["W", "U", "Y"], &vars)?;
    let d = Densities::new(q);
    let i_sw = d.info(&["S"], &["W"], &[])?;
    let i_swu = d.info(&["S"], &["W", "U"], &[])?;
    let i_yu = d.info(&["Y"], &["U"], &["W"])?;
    let (m1, m2, j2) = (s.m1 as f64, s.m2 as f64, s.j2 as f64);
    let plan = Plan {
        term_names: &["covering", "binning"],
        slack: Some(5.0),
    };
    sum_points(q, plan, gammas, |o| {
        let a = bits(&i_sw, o)?;
        let b = bits(&i_swu, o)?;
        let c = bits(&i_yu, o)?;
        let cover = 1.0 + a.exp2() / m1 + b.exp2() / (m1 * j2);
        let bins = 1.0 + j2 / m2 * (-c).exp2();
        let ok = t1.distortion_ok(o) && t2.distortion_ok(o);
        let margin = if ok {
            min_of(&[m1.log2() - a, (m1 * j2).log2() - b, c - (j2 / m2).log2()])
        } else {
            f64::NEG_INFINITY
        };
        Ok(Point {
            integrand: if ok { 1.0 / (cover * bins) } else { 0.0 },
            margin,
            terms: [cover, bins, 0.0, 0.0],
        })
    })
}

fn multiple_descriptions(
    q: &JointPmf,
    s: MdSizes,
    targets: &[LossyTarget; 3],
    gammas: &[f64],
) -> Result<BoundResult> {
    let vars = host_vars(q);
    let t0 = BoundTarget::bind(&targets[0], "S", &["U0", "U1", "U2"], &vars)?;
    let t1 = BoundTarget::bind(&targets[1], "S", &["U0", "U1"], &vars)?;
    let t2 = BoundTarget::bind(&targets[2], "S", &["U0", "U2"], &vars)?;
    let d = Densities::new(q);
    let i_0 = d.info(&["S"], &["U0"], &[])?;
    let i_01 = d.info(&["S"], &["U0", "U1"], &[])?;
    let i_02 = d.info(&["S"], &["U0", "U2"], &[])?;
    let i_012 = d.info(&["S"], &["U0", "U1", "U2"], &[])?;
    let i_12 = d.info(&["U1"], &["U2"], &["U0"])?;
    let (m1, m2, j0) = (s.m1 as f64, s.m2 as f64, s.j0 as f64);
    let plan = Plan {
        term_names: &["covering"],
        slack: Some(4.0),
    };
    sum_points(q, plan, gammas, |o| {
        let a0 = bits(&i_0, o)?;
        let a1 = bits(&i_01, o)?;
        let a2 = bits(&i_02, o)?;
        let a012 = bits(&i_012, o)?;
        let c = bits(&i_12, o)?;
        let cover = 1.0
            + a0.exp2() / j0
            + a1.exp2() / m1
            + a2.exp2() / m2
            + j0 / (m1 * m2) * (a012 + c).exp2();
        let ok = t0.distortion_ok(o) && t1.distortion_ok(o) && t2.distortion_ok(o);
        let margin = if ok {
            min_of(&[
                j0.log2() - a0,
                m1.log2() - a1,
                m2.log2() - a2,
                (m1 * m2 / j0).log2() - a012 - c,
            ])
        } else {
            f64::NEG_INFINITY
        };
        Ok(Point {
            integrand: if ok { 1.0 / cover } else { 0.0 },
            margin,
            terms: [cover, 0.0, 0.0, 0.0],
        })
    })
}

/// Name under which the common part of `S1` and `S2` is adjoined.
pub const COMMON_PART: &str = "K";

/// `q` extended with the common part `K = k(S1)` of the two sources.
pub fn with_common_part(q: &JointPmf) -> Result<JointPmf> {
    let cp = common_part(q, "S1", "S2")?;
    let kernel = cp.kernel(q.variable("S1")?, COMMON_PART)?;
    Ok(q.compose(&kernel)?)
}

fn jscc_mac(q: &JointPmf, gammas: &[f64]) -> Result<BoundResult> {
    let qk = with_common_part(q)?;
    let d = Densities::new(&qk);
    let h_1 = d.entropy(&["S1"], &["S2"])?;
    let h_2 = d.entropy(&["S2"], &["S1"])?;
    let h_k = d.entropy(&["S1", "S2"], &[COMMON_PART])?;
    let h_12 = d.entropy(&["S1", "S2"], &[])?;
    let i_1 = d.info(&["Y"], &["X1"], &["X2", "S2", "T"])?;
    let i_2 = d.info(&["Y"], &["X2"], &["X1", "S1", "T"])?;
    let i_k = d.info(&["Y"], &["X1", "X2"], &[COMMON_PART, "T"])?;
    let i_12 = d.info(&["Y"], &["X1", "X2"], &[])?;
    let plan = Plan {
        term_names: &["only_1", "only_2", "within_common", "full"],
        slack: Some(4.0),
    };
    sum_points(&qk, plan, gammas, |o| {
        let e = [
            bits(&h_1, o)? - bits(&i_1, o)?,
            bits(&h_2, o)? - bits(&i_2, o)?,
            bits(&h_k, o)? - bits(&i_k, o)?,
            bits(&h_12, o)? - bits(&i_12, o)?,
        ];
        let t = e.map(f64::exp2);
        Ok(Point {
            integrand: 1.0 / (1.0 + t.iter().sum::<f64>()),
            margin: min_of(&e.map(|x| -x)),
            terms: t,
        })
    })
}

/// Monte-Carlo estimate of the loosened error bound for the `n`-fold i.i.d.
/// extension of a Gelfand-Pinsker test distribution, with `log2 J` and
/// `log2 M` given in bits for the whole block.
pub fn gp_iid_error_estimate(
    q: &JointPmf,
    n: usize,
    log_m: f64,
    log_j: f64,
    gamma: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    Scenario::GelfandPinsker(GpSizes { m: 1, j: 1 }).validate(q)?;
    let d = Densities::new(q);
    let i_us = d.info(&["U"], &["S"], &[])?;
    let i_uy = d.info(&["U"], &["Y"], &[])?;
    let mut cells = Vec::with_capacity(q.len());
    for flat in 0..q.len() {
        let o = q.outcome_at(flat);
        if q.mass()[flat] > 0.0 {
            cells.push((bits(&i_us, &o)?, bits(&i_uy, &o)?));
        } else {
            cells.push((0.0, 0.0));
        }
    }
    let sampler = q.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let (mut a, mut b) = (0.0, 0.0);
        for _ in 0..n {
            let (x, y) = cells[sampler.sample(&mut rng)];
            a += x;
            b += y;
        }
        if log_j - a < gamma || b - (log_m + log_j) < gamma {
            hits += 1;
        }
    }
    Ok((hits as f64 / samples as f64 + 3.0 * (-gamma).exp2()).min(1.0))
}
