//! Monte-Carlo simulation of the random-coding constructions behind the
//! bounds: random codebooks, random binning, and likelihood encoders and
//! decoders that pick an index with probability proportional to
//! `2^score` (soft matching / soft covering).
//!
//! Each trial draws its own codebook from a per-trial random stream derived
//! from `(seed, trial index)`, so results do not depend on the number of
//! worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::densities::{DensityContext, DensityError, DensitySpec, DensityTable};
use crate::pmf::{common_part, ConditionalKernel, JointPmf, PmfError, Sampler, Variable};
use crate::scenario::{
    BoundTarget, BtSizes, GpSizes, HbSizes, LossyTarget, Marton2Sizes, Marton3Sizes, MdSizes,
    P2pSizes, Scenario, ScenarioError,
};

/// Largest number of candidates a single encoder or decoder may score.
pub const CANDIDATE_LIMIT: u64 = 10_000_000;
/// Largest number of source pairs the JSCC decoder may score.
pub const SOURCE_PAIR_LIMIT: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Pmf(#[from] PmfError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("every candidate has zero weight")]
    AllZero,
    #[error("score is NaN")]
    NanScore,
    #[error("{count} candidates exceed the limit of {limit}")]
    TooManyCandidates { count: u64, limit: u64 },
    #[error("number of trials must be positive")]
    NoTrials,
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Normalized selection probabilities for log2-domain scores. `-inf` scores
/// get probability zero; if any score is `+inf` the mass is spread evenly
/// over those.
pub fn smc_weights(scores: &[f64]) -> Result<Vec<f64>> {
    let top = top_score(scores)?;
    let w: Vec<f64> = scores.iter().map(|&s| weight(s, top)).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

fn top_score(scores: &[f64]) -> Result<f64> {
    let mut top = f64::NEG_INFINITY;
    for &s in scores {
        if s.is_nan() {
            return Err(SimError::NanScore);
        }
        top = top.max(s);
    }
    if top == f64::NEG_INFINITY {
        return Err(SimError::AllZero);
    }
    Ok(top)
}

#[inline]
fn weight(score: f64, top: f64) -> f64 {
    if top == f64::INFINITY {
        if score == f64::INFINITY {
            1.0
        } else {
            0.0
        }
    } else {
        (score - top).exp2()
    }
}

/// Draw an index with probability proportional to `2^score` by inverse CDF
/// over the candidates in order. A `-inf` score is never selected.
pub fn smc_draw<R: Rng + ?Sized>(scores: &[f64], rng: &mut R) -> Result<usize> {
    let top = top_score(scores)?;
    let total: f64 = scores.iter().map(|&s| weight(s, top)).sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &s) in scores.iter().enumerate() {
        let w = weight(s, top);
        if w > 0.0 {
            acc += w;
            last = i;
            if acc > target {
                return Ok(i);
            }
        }
    }
    Ok(last)
}

/// Draw as [`smc_draw`] but treat an all-zero candidate set as an erasure.
fn draw_or_erase<R: Rng + ?Sized>(scores: &[f64], rng: &mut R) -> Result<Option<usize>> {
    match smc_draw(scores, rng) {
        Ok(i) => Ok(Some(i)),
        Err(SimError::AllZero) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CodebookMode {
    /// A new codebook and binning for every trial (ensemble average).
    #[default]
    Fresh,
    /// One codebook drawn up front and reused by all trials.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationOptions {
    pub trials: u64,
    pub seed: u64,
    /// Worker thread cap; `None` uses the global pool.
    pub threads: Option<usize>,
    pub codebook: CodebookMode,
}

impl SimulationOptions {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            threads: None,
            codebook: CodebookMode::Fresh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub success: bool,
    /// Some encoder or decoder found no candidate with positive weight.
    pub erased: bool,
}

impl TrialOutcome {
    fn of(success: bool) -> Self {
        Self {
            success,
            erased: false,
        }
    }

    fn erasure() -> Self {
        Self {
            success: false,
            erased: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationReport {
    pub trials: u64,
    pub successes: u64,
    pub erasures: u64,
    pub estimate: f64,
    pub std_error: f64,
}

impl SimulationReport {
    fn from_counts(trials: u64, successes: u64, erasures: u64) -> Self {
        let estimate = successes as f64 / trials as f64;
        let std_error = (estimate * (1.0 - estimate) / trials as f64).sqrt();
        Self {
            trials,
            successes,
            erasures,
            estimate,
            std_error,
        }
    }

    /// Whether `estimate + sigmas * std_error >= bound`.
    pub fn dominates(&self, bound: f64, sigmas: f64) -> bool {
        self.estimate + sigmas * self.std_error >= bound
    }
}

/// Per-trial random stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Stream reserved for the shared codebook in [`CodebookMode::Fixed`].
fn codebook_rng(seed: u64) -> ChaCha8Rng {
    trial_rng(seed, u64::MAX)
}

fn check_candidates(count: u64) -> Result<()> {
    if count > CANDIDATE_LIMIT {
        Err(SimError::TooManyCandidates {
            count,
            limit: CANDIDATE_LIMIT,
        })
    } else {
        Ok(())
    }
}

fn product(sizes: &[u64]) -> Result<u64> {
    let mut acc: u64 = 1;
    for &s in sizes {
        acc = acc.checked_mul(s).ok_or(SimError::TooManyCandidates {
            count: u64::MAX,
            limit: CANDIDATE_LIMIT,
        })?;
    }
    check_candidates(acc)?;
    Ok(acc)
}

/// Density lookup table with `-inf` where the conditioning has zero mass.
struct Lut {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Lut {
    fn new(ctx: &DensityContext<'_>, spec: DensitySpec) -> Result<Self> {
        let table: DensityTable = ctx.table(&spec)?;
        Ok(Self {
            shape: table.shape().to_vec(),
            values: table
                .values()
                .iter()
                .map(|v| v.map_or(f64::NEG_INFINITY, |v| v.bits()))
                .collect(),
        })
    }

    fn info(ctx: &DensityContext<'_>, left: &[&str], right: &[&str], given: &[&str]) -> Result<Self> {
        Self::new(ctx, DensitySpec::info(left, right).given(given))
    }

    #[inline]
    fn at(&self, symbols: &[usize]) -> f64 {
        let idx = symbols
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&s, &n)| acc * n + s);
        self.values[idx]
    }
}

fn marginal_sampler(q: &JointPmf, names: &[&str]) -> Result<Sampler> {
    Ok(Sampler::new(&q.table_over(names)?))
}

fn size_of(q: &JointPmf, name: &str) -> Result<usize> {
    Ok(q.variable(name)?.size())
}

/// Independent uniform bin in `0..bins` for each of `count` indices.
pub fn random_binning<R: Rng + ?Sized>(count: u64, bins: u64, rng: &mut R) -> Vec<u64> {
    (0..count).map(|_| rng.random_range(0..bins)).collect()
}

/// Index pairs `(a, c)` with `bin1[a] == msg.0` and `bin2[c] == msg.1`, in
/// row-major order.
pub fn bin_consistent_pairs(bin1: &[u64], bin2: &[u64], msg: (u64, u64)) -> Vec<(usize, usize)> {
    let in2: Vec<usize> = (0..bin2.len()).filter(|&c| bin2[c] == msg.1).collect();
    (0..bin1.len())
        .filter(|&a| bin1[a] == msg.0)
        .flat_map(|a| in2.iter().map(move |&c| (a, c)))
        .collect()
}

/// One random-coding construction: how to draw a codebook and how to run one
/// transmission with it.
trait Codec: Sync {
    type Book: Send + Sync;
    fn codebook(&self, rng: &mut ChaCha8Rng) -> Self::Book;
    fn trial(&self, book: &Self::Book, rng: &mut ChaCha8Rng) -> Result<TrialOutcome>;
}

fn run<C: Codec>(codec: &C, options: &SimulationOptions) -> Result<SimulationReport> {
    if options.trials == 0 {
        return Err(SimError::NoTrials);
    }
    let fixed = match options.codebook {
        CodebookMode::Fixed => Some(codec.codebook(&mut codebook_rng(options.seed))),
        CodebookMode::Fresh => None,
    };
    let one = |t: u64| -> Result<(u64, u64)> {
        let mut rng = trial_rng(options.seed, t);
        let out = match &fixed {
            Some(book) => codec.trial(book, &mut rng)?,
            None => {
                let book = codec.codebook(&mut rng);
                codec.trial(&book, &mut rng)?
            }
        };
        Ok((out.success as u64, out.erased as u64))
    };
    let sum = || {
        (0..options.trials)
            .into_par_iter()
            .map(one)
            .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))
    };
    let (successes, erasures) = match options.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| SimError::ThreadPool(e.to_string()))?
            .install(sum)?,
        None => sum()?,
    };
    Ok(SimulationReport::from_counts(options.trials, successes, erasures))
}

/// Simulate the construction of `scenario` with test distribution `q`.
pub fn simulate(
    scenario: &Scenario,
    q: &JointPmf,
    options: &SimulationOptions,
) -> Result<SimulationReport> {
    scenario.validate(q)?;
    match scenario {
        Scenario::PointToPoint(s) => run(&P2pCodec::new(q, *s)?, options),
        Scenario::GelfandPinsker(s) => run(&GpCodec::new(q, *s)?, options),
        Scenario::Marton2(s) => run(&Marton2Codec::new(q, *s)?, options),
        Scenario::Marton3(s) => run(&Marton3Codec::new(q, *s)?, options),
        Scenario::BergerTung(s, t) => run(&BtCodec::new(q, *s, t)?, options),
        Scenario::HeegardBergerKaspi(s, t) => run(&HbCodec::new(q, *s, t)?, options),
        Scenario::MultipleDescriptions(s, t) => run(&MdCodec::new(q, *s, t)?, options),
        Scenario::JsccMac => run(&JsccCodec::new(q)?, options),
    }
}

/// A drawn codebook, with codeword symbols laid out row-major over the
/// codebook indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Codebook {
    PointToPoint { x: Vec<usize> },
    GelfandPinsker { u: Vec<usize> },
    Marton2 { u1: Vec<usize>, u2: Vec<usize> },
    Marton3 { u0: Vec<usize>, u1: Vec<usize>, u2: Vec<usize> },
    BergerTung { u1: Vec<usize>, u2: Vec<usize>, bin1: Vec<u64>, bin2: Vec<u64> },
    HeegardBergerKaspi { w: Vec<usize>, u: Vec<usize>, bin: Vec<u64> },
    MultipleDescriptions { u0: Vec<usize>, u1: Vec<usize>, u2: Vec<usize> },
    JsccMac { t: Vec<usize>, x1: Vec<usize>, x2: Vec<usize> },
}

/// Draw one codebook of `scenario` from `rng`.
pub fn build_codebook(scenario: &Scenario, q: &JointPmf, rng: &mut ChaCha8Rng) -> Result<Codebook> {
    scenario.validate(q)?;
    Ok(match scenario {
        Scenario::PointToPoint(s) => Codebook::PointToPoint {
            x: P2pCodec::new(q, *s)?.codebook(rng),
        },
        Scenario::GelfandPinsker(s) => Codebook::GelfandPinsker {
            u: GpCodec::new(q, *s)?.codebook(rng),
        },
        Scenario::Marton2(s) => {
            let (u1, u2) = Marton2Codec::new(q, *s)?.codebook(rng);
            Codebook::Marton2 { u1, u2 }
        }
        Scenario::Marton3(s) => {
            let b = Marton3Codec::new(q, *s)?.codebook(rng);
            Codebook::Marton3 {
                u0: b.u0,
                u1: b.u1,
                u2: b.u2,
            }
        }
        Scenario::BergerTung(s, t) => {
            let b = BtCodec::new(q, *s, t)?.codebook(rng);
            Codebook::BergerTung {
                u1: b.u1,
                u2: b.u2,
                bin1: b.bin1,
                bin2: b.bin2,
            }
        }
        Scenario::HeegardBergerKaspi(s, t) => {
            let b = HbCodec::new(q, *s, t)?.codebook(rng);
            Codebook::HeegardBergerKaspi {
                w: b.w,
                u: b.u,
                bin: b.bin,
            }
        }
        Scenario::MultipleDescriptions(s, t) => {
            let b = MdCodec::new(q, *s, t)?.codebook(rng);
            Codebook::MultipleDescriptions {
                u0: b.u0,
                u1: b.u1,
                u2: b.u2,
            }
        }
        Scenario::JsccMac => {
            let b = JsccCodec::new(q)?.codebook(rng);
            Codebook::JsccMac {
                t: b.t,
                x1: b.x1,
                x2: b.x2,
            }
        }
    })
}

struct P2pCodec {
    m: usize,
    px: Sampler,
    channel: ConditionalKernel,
    i_xy: Lut,
}

impl P2pCodec {
    fn new(q: &JointPmf, s: P2pSizes) -> Result<Self> {
        let ctx = DensityContext::new(q);
        Ok(Self {
            m: product(&[s.m])? as usize,
            px: marginal_sampler(q, &["X"])?,
            channel: q.conditional(&["Y"], &["X"])?,
            i_xy: Lut::info(&ctx, &["X"], &["Y"], &[])?,
        })
    }
}

impl Codec for P2pCodec {
    type Book = Vec<usize>;

    fn codebook(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        (0..self.m).map(|_| self.px.sample(rng)).collect()
    }

    fn trial(&self, x: &Vec<usize>, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let msg = rng.random_range(0..self.m);
        let y = self.channel.sample_row(x[msg], rng);
        let scores: Vec<f64> = x.iter().map(|&c| self.i_xy.at(&[c, y])).collect();
        Ok(match draw_or_erase(&scores, rng)? {
            Some(d) => TrialOutcome::of(d == msg),
            None => TrialOutcome::erasure(),
        })
    }
}

/// Exact ensemble success probability of the point-to-point construction,
/// by enumerating every codebook, message and channel output.
pub fn p2p_exact_success(q: &JointPmf, sizes: P2pSizes) -> Result<f64> {
    Scenario::PointToPoint(sizes).validate(q)?;
    let codec = P2pCodec::new(q, sizes)?;
    let px = q.table_over(&["X"])?;
    let nx = px.len();
    let ny = size_of(q, "Y")?;
    let m = codec.m;
    check_candidates((nx as u64).saturating_pow(m as u32))?;
    let mut book = vec![0usize; m];
    let mut total = 0.0;
    loop {
        let p_book: f64 = book.iter().map(|&x| px[x]).product();
        if p_book > 0.0 {
            for msg in 0..m {
                for y in 0..ny {
                    let p_y = codec.channel.row(book[msg])[y];
                    if p_y == 0.0 {
                        continue;
                    }
                    let scores: Vec<f64> = book.iter().map(|&c| codec.i_xy.at(&[c, y])).collect();
                    let w = smc_weights(&scores)?;
                    total += p_book * p_y * w[msg] / m as f64;
                }
            }
        }
        if !crate::pmf::next_outcome(&mut book, &vec![nx; m]) {
            break;
        }
    }
    Ok(total)
}

struct GpCodec {
    m: usize,
    j: usize,
    ns: usize,
    pu: Sampler,
    ps: Sampler,
    kx: ConditionalKernel,
    ky: ConditionalKernel,
    i_us: Lut,
    i_uy: Lut,
}

impl GpCodec {
    fn new(q: &JointPmf, s: GpSizes) -> Result<Self> {
        product(&[s.m, s.j])?;
        let ctx = DensityContext::new(q);
        Ok(Self {
            m: s.m as usize,
            j: s.j as usize,
            ns: size_of(q, "S")?,
            pu: marginal_sampler(q, &["U"])?,
            ps: marginal_sampler(q, &["S"])?,
            kx: q.conditional(&["X"], &["U", "S"])?,
            ky: q.conditional(&["Y"], &["X", "S"])?,
            i_us: Lut::info(&ctx, &["U"], &["S"], &[])?,
            i_uy: Lut::info(&ctx, &["U"], &["Y"], &[])?,
        })
    }
}

impl Codec for GpCodec {
    type Book = Vec<usize>;

    fn codebook(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        (0..self.m * self.j).map(|_| self.pu.sample(rng)).collect()
    }

    fn trial(&self, u: &Vec<usize>, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let msg = rng.random_range(0..self.m);
        let s = self.ps.sample(rng);
        let row = &u[msg * self.j..(msg + 1) * self.j];
        let scores: Vec<f64> = row.iter().map(|&c| self.i_us.at(&[c, s])).collect();
        let Some(j) = draw_or_erase(&scores, rng)? else {
            return Ok(TrialOutcome::erasure());
        };
        let sent = msg * self.j + j;
        let x = self.kx.sample_row(u[sent] * self.ns + s, rng);
        let y = self.ky.sample_row(x * self.ns + s, rng);
        let scores: Vec<f64> = u.iter().map(|&c| self.i_uy.at(&[c, y])).collect();
        Ok(match draw_or_erase(&scores, rng)? {
            Some(d) => TrialOutcome::of(d == sent),
            None => TrialOutcome::erasure(),
        })
    }
}

/// Decode a flat index of a pair of outputs into its two symbols.
#[inline]
fn split(flat: usize, second: usize) -> (usize, usize) {
    (flat / second, flat % second)
}

struct Marton2Codec {
    sizes: [usize; 4],
    nu2: usize,
    ny2: usize,
    pu1: Sampler,
    pu2: Sampler,
    kx: ConditionalKernel,
    ky: ConditionalKernel,
    i_12: Lut,
    i_1: Lut,
    i_2: Lut,
}

impl Marton2Codec {
    fn new(q: &JointPmf, s: Marton2Sizes) -> Result<Self> {
        product(&[s.j1, s.j2])?;
        product(&[s.m1, s.j1])?;
        product(&[s.m2, s.j2])?;
        let ctx = DensityContext::new(q);
        Ok(Self {
            sizes: [s.m1 as usize, s.m2 as usize, s.j1 as usize, s.j2 as usize],
            nu2: size_of(q, "U2")?,
            ny2: size_of(q, "Y2")?,
            pu1: marginal_sampler(q, &["U1"])?,
            pu2: marginal_sampler(q, &["U2"])?,
            kx: q.conditional(&["X"], &["U1", "U2"])?,
            ky: q.conditional(&["Y1", "Y2"], &["X"])?,
            i_12: Lut::info(&ctx, &["U1"], &["U2"], &[])?,
            i_1: Lut::info(&ctx, &["U1"], &["Y1"], &[])?,
            i_2: Lut::info(&ctx, &["U2"], &["Y2"], &[])?,
        })
    }
}

fn decode_index(lut: &Lut, book: &[usize], y: usize, rng: &mut ChaCha8Rng) -> Result<Option<usize>> {
    let scores: Vec<f64> = book.iter().map(|&c| lut.at(&[c, y])).collect();
    draw_or_erase(&scores, rng)
}

impl Codec for Marton2Codec {
    type Book = (Vec<usize>, Vec<usize>);

    fn codebook(&self, rng: &mut ChaCha8Rng) -> Self::Book {
        let [m1, m2, j1, j2] = self.sizes;
        let u1 = (0..m1 * j1).map(|_| self.pu1.sample(rng)).collect();
        let u2 = (0..m2 * j2).map(|_| self.pu2.sample(rng)).collect();
        (u1, u2)
    }

    fn trial(&self, (u1, u2): &Self::Book, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let [m1, m2, j1, j2] = self.sizes;
        let msg1 = rng.random_range(0..m1);
        let msg2 = rng.random_range(0..m2);
        let row1 = &u1[msg1 * j1..(msg1 + 1) * j1];
        let row2 = &u2[msg2 * j2..(msg2 + 1) * j2];
        let mut scores = Vec::with_capacity(j1 * j2);
        for &a in row1 {
            for &b in row2 {
                scores.push(self.i_12.at(&[a, b]));
            }
        }
        let Some(pick) = draw_or_erase(&scores, rng)? else {
            return Ok(TrialOutcome::erasure());
        };
        let (k1, k2) = split(pick, j2);
        let (sent1, sent2) = (msg1 * j1 + k1, msg2 * j2 + k2);
        let x = self.kx.sample_row(u1[sent1] * self.nu2 + u2[sent2], rng);
        let (y1, y2) = split(self.ky.sample_row(x, rng), self.ny2);
        let d1 = decode_index(&self.i_1, u1, y1, rng)?;
        let d2 = decode_index(&self.i_2, u2, y2, rng)?;
        Ok(match (d1, d2) {
            (Some(a), Some(b)) => TrialOutcome::of(a == sent1 && b == sent2),
            _ => TrialOutcome::erasure(),
        })
    }
}

/// Superposition codebook: `u0[m0]`, and `u_k[(m0 * M_k + m_k) * J_k + j_k]`
/// drawn given `u0[m0]`.
struct Marton3Book {
    u0: Vec<usize>,
    u1: Vec<usize>,
    u2: Vec<usize>,
}

struct Marton3Codec {
    s: Marton3Sizes,
    shape_u: [usize; 3],
    ny2: usize,
    pu0: Sampler,
    ku1: ConditionalKernel,
    ku2: ConditionalKernel,
    kx: ConditionalKernel,
    ky: ConditionalKernel,
    i_12: Lut,
    i_01: Lut,
    i_02: Lut,
}

impl Marton3Codec {
    fn new(q: &JointPmf, s: Marton3Sizes) -> Result<Self> {
        product(&[s.j1, s.j2])?;
        product(&[s.m0, s.m1, s.j1])?;
        product(&[s.m0, s.m2, s.j2])?;
        let ctx = DensityContext::new(q);
        Ok(Self {
            s,
            shape_u: [size_of(q, "U0")?, size_of(q, "U1")?, size_of(q, "U2")?],
            ny2: size_of(q, "Y2")?,
            pu0: marginal_sampler(q, &["U0"])?,
            ku1: q.conditional(&["U1"], &["U0"])?,
            ku2: q.conditional(&["U2"], &["U0"])?,
            kx: q.conditional(&["X"], &["U0", "U1", "U2"])?,
            ky: q.conditional(&["Y1", "Y2"], &["X"])?,
            i_12: Lut::info(&ctx, &["U1"], &["U2"], &["U0"])?,
            i_01: Lut::info(&ctx, &["U0", "U1"], &["Y1"], &[])?,
            i_02: Lut::info(&ctx, &["U0", "U2"], &["Y2"], &[])?,
        })
    }

    fn decode(
        &self,
        lut: &Lut,
        u0: &[usize],
        uk: &[usize],
        per_m0: usize,
        y: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Option<usize>> {
        let scores: Vec<f64> = uk
            .iter()
            .enumerate()
            .map(|(i, &c)| lut.at(&[u0[i / per_m0], c, y]))
            .collect();
        draw_or_erase(&scores, rng)
    }
}

impl Codec for Marton3Codec {
    type Book = Marton3Book;

    fn codebook(&self, rng: &mut ChaCha8Rng) -> Marton3Book {
        let s = &self.s;
        let u0: Vec<usize> = (0..s.m0).map(|_| self.pu0.sample(rng)).collect();
        let per1 = (s.m1 * s.j1) as usize;
        let per2 = (s.m2 * s.j2) as usize;
        let u1 = (0..u0.len() * per1)
            .map(|i| self.ku1.sample_row(u0[i / per1], rng))
            .collect();
        let u2 = (0..u0.len() * per2)
            .map(|i| self.ku2.sample_row(u0[i / per2], rng))
            .collect();
        Marton3Book { u0, u1, u2 }
    }

    fn trial(&self, b: &Marton3Book, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let s = &self.s;
        let (m1, m2, j1, j2) = (s.m1 as usize, s.m2 as usize, s.j1 as usize, s.j2 as usize);
        let msg0 = rng.random_range(0..s.m0 as usize);
        let msg1 = rng.random_range(0..m1);
        let msg2 = rng.random_range(0..m2);
        let u0 = b.u0[msg0];
        let base1 = (msg0 * m1 + msg1) * j1;
        let base2 = (msg0 * m2 + msg2) * j2;
        let mut scores = Vec::with_capacity(j1 * j2);
        for &a in &b.u1[base1..base1 + j1] {
            for &c in &b.u2[base2..base2 + j2] {
                scores.push(self.i_12.at(&[a, c, u0]));
            }
        }
        let Some(pick) = draw_or_erase(&scores, rng)? else {
            return Ok(TrialOutcome::erasure());
        };
        let (k1, k2) = split(pick, j2);
        let (sent1, sent2) = (base1 + k1, base2 + k2);
        let [_, n1, n2] = self.shape_u;
        let x = self
            .kx
            .sample_row((u0 * n1 + b.u1[sent1]) * n2 + b.u2[sent2], rng);
        let (y1, y2) = split(self.ky.sample_row(x, rng), self.ny2);
        let d1 = self.decode(&self.i_01, &b.u0, &b.u1, m1 * j1, y1, rng)?;
        let d2 = self.decode(&self.i_02, &b.u0, &b.u2, m2 * j2, y2, rng)?;
        Ok(match (d1, d2) {
            (Some(a), Some(c)) => TrialOutcome::of(a == sent1 && c == sent2),
            _ => TrialOutcome::erasure(),
        })
    }
}

fn local_vars<'a>(q: &'a JointPmf, names: &[&str]) -> Result<Vec<&'a Variable>> {
    names.iter().map(|n| Ok(q.variable(n)?)).collect()
}

struct BtBook {
    u1: Vec<usize>,
    u2: Vec<usize>,
    bin1: Vec<u64>,
    bin2: Vec<u64>,
}

struct BtCodec {
    s: BtSizes,
    ns2: usize,
    sources: Sampler,
    pu1: Sampler,
    pu2: Sampler,
    i_1: Lut,
    i_2: Lut,
    i_12: Lut,
    targets: [BoundTarget; 2],
}

impl BtCodec {
    /// Local symbol order used by the reconstructions.
    const LOCAL: [&'static str; 4] = ["S1", "S2", "U1", "U2"];

    fn new(q: &JointPmf, s: BtSizes, t: &[LossyTarget; 2]) -> Result<Self> {
        product(&[s.j1, s.j2])?;
        let ctx = DensityContext::new(q);
        let vars = local_vars(q, &Self::LOCAL)?;
        let dec = ["U1", "U2"];
        Ok(Self {
            s,
            ns2: size_of(q, "S2")?,
            sources: marginal_sampler(q, &["S1", "S2"])?,
            pu1: marginal_sampler(q, &["U1"])?,
            pu2: marginal_sampler(q, &["U2"])?,
            i_1: Lut::info(&ctx, &["S1"], &["U1"], &[])?,
            i_2: Lut::info(&ctx, &["S2"], &["U2"], &[])?,
            i_12: Lut::info(&ctx, &["U1"], &["U2"], &[])?,
            targets: [
                BoundTarget::bind(&t[0], "S1", &dec, &vars)?,
                BoundTarget::bind(&t[1], "S2", &dec, &vars)?,
            ],
        })
    }
}

impl Codec for BtCodec {
    type Book = BtBook;

    fn codebook(&self, rng: &mut ChaCha8Rng) -> BtBook {
        let s = &self.s;
        BtBook {
            u1: (0..s.j1).map(|_| self.pu1.sample(rng)).collect(),
            u2: (0..s.j2).map(|_| self.pu2.sample(rng)).collect(),
            bin1: random_binning(s.j1, s.m1, rng),
            bin2: random_binning(s.j2, s.m2, rng),
        }
    }

    fn trial(&self, b: &BtBook, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let (s1, s2) = split(self.sources.sample(rng), self.ns2);
        let scores: Vec<f64> = b.u1.iter().map(|&c| self.i_1.at(&[s1, c])).collect();
        let Some(e1) = draw_or_erase(&scores, rng)? else {
            return Ok(TrialOutcome::erasure());
        };
        let scores: Vec<f64> = b.u2.iter().map(|&c| self.i_2.at(&[s2, c])).collect();
        let Some(e2) = draw_or_erase(&scores, rng)? else {
            return Ok(TrialOutcome::erasure());
        };
        let pairs = bin_consistent_pairs(&b.bin1, &b.bin2, (b.bin1[e1], b.bin2[e2]));
        let scores: Vec<f64> = pairs
            .iter()
            .map(|&(a, c)| self.i_12.at(&[b.u1[a], b.u2[c]]))
            .collect();
        let Some(pick) = draw_or_erase(&scores, rng)? else {
            return Ok(TrialOutcome::erasure());
        };
        let (a, c) = pairs[pick];
        let symbols = [s1, s2, b.u1[a], b.u2[c]];
        Ok(TrialOutcome::of(
            self.targets.iter().all(|t| t.distortion_ok(&symbols)),
        ))
    }
}

struct HbBook {
    w: Vec<usize>,
    u: Vec<usize>,
    bin: Vec<u64>,
}

struct HbCodec {
    s: HbSizes,
    ny: usize,
    sources: Sampler,
    pw: Sampler,
    ku: ConditionalKernel,
    i_swu: Lut,
    i_yu: Lut,
    targets: [BoundTarget; 2],
}

impl HbCodec {
    const LOCAL: [&'static str; 4] = ["S", "Y", "W", "U"];

    fn new(q: &JointPmf, s: HbSizes, t: &[LossyTarget; 2]) -> Result<Self> {
        product(&[s.m1, s.j2])?;
        let ctx = DensityContext::new(q);
        let vars = local_vars(q, &Self::LOCAL)?;
        Ok(Self {
            s,
            ny: size_of(q, "Y")?,
            sources: marginal_sampler(q, &["S", "Y"])?,
            pw: marginal_sampler(q, &["W"])?,
            ku: q.conditional(&["U"], &["W"])?,
            i_swu: Lut::info(&ctx, &["S"], &["W", "U"], &[])?,
            i_yu: Lut::info(&ctx, &["Y"], &["U"], &["W"])?,
            targets: [
                BoundTarget::bind(&t[0], "S", &["W"], &vars)?,
                BoundTarget::bind(&t[1], "S", &["W", "U", "Y"], &vars)?,
            ],
        })
    }
}

impl Codec for HbCodec {
    type Book = HbBook;

    fn codebook(&self, rng: &mut ChaCha8Rng) -> HbBook {
        let j2 = self.s.j2 as usize;
        let w: Vec<usize> = (0..self.s.m1).map(|_| self.pw.sample(rng)).collect();
        let u = (0..w.len() * j2)
            .map(|i| self.ku.sample_row(w[i / j2], rng))
            .collect();
        HbBook {
            w,
            u,
            bin: random_binning(self.s.j2, self.s.m2, rng),
        }
    }

    fn trial(&self, b: &HbBook, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let j2 = self.s.j2 as usize;
        let (s, y) = split(self.sources.sample(rng), self.ny);
        let scores: Vec<f64> = b
            .u
            .iter()
            .enumerate()
            .map(|(i, &c)| self.i_swu.at(&[s, b.w[i / j2], c]))
            .collect();
        let Some(pick) = draw_or_erase(&scores, rng)? else {
            return Ok(TrialOutcome::erasure());
        };
        let (m1, k) = split(pick, j2);
        let msg2 = b.bin[k];
        let w = b.w[m1];
        let cands: Vec<usize> = (0..j2).filter(|&c| b.bin[c] == msg2).collect();
        let scores: Vec<f64> = cands
            .iter()
            .map(|&c| self.i_yu.at(&[y, b.u[m1 * j2 + c], w]))
            .collect();
        let Some(d) = draw_or_erase(&scores, rng)? else {
            return Ok(TrialOutcome::erasure());
        };
        let symbols = [s, y, w, b.u[m1 * j2 + cands[d]]];
        Ok(TrialOutcome::of(
            self.targets.iter().all(|t| t.distortion_ok(&symbols)),
        ))
    }
}

struct MdBook {
    u0: Vec<usize>,
    u1: Vec<usize>,
    u2: Vec<usize>,
}

struct MdCodec {
    j: [usize; 3],
    ps: Sampler,
    pu0: Sampler,
    ku1: ConditionalKernel,
    ku2: ConditionalKernel,
    i_s: Lut,
    i_12: Lut,
    targets: [BoundTarget; 3],
}

impl MdCodec {
    const LOCAL: [&'static str; 4] = ["S", "U0", "U1", "U2"];

    fn new(q: &JointPmf, s: MdSizes, t: &[LossyTarget; 3]) -> Result<Self> {
        let (j1, j2) = s.refinements();
        product(&[s.j0, j1, j2])?;
        let ctx = DensityContext::new(q);
        let vars = local_vars(q, &Self::LOCAL)?;
        Ok(Self {
            j: [s.j0 as usize, j1 as usize, j2 as usize],
            ps: marginal_sampler(q, &["S"])?,
            pu0: marginal_sampler(q, &["U0"])?,
            ku1: q.conditional(&["U1"], &["U0"])?,
            ku2: q.conditional(&["U2"], &["U0"])?,
            i_s: Lut::info(&ctx, &["S"], &["U0", "U1", "U2"], &[])?,
            i_12: Lut::info(&ctx, &["U1"], &["U2"], &["U0"])?,
            targets: [
                BoundTarget::bind(&t[0], "S", &["U0", "U1", "U2"], &vars)?,
                BoundTarget::bind(&t[1], "S", &["U0", "U1"], &vars)?,
                BoundTarget::bind(&t[2], "S", &["U0", "U2"], &vars)?,
            ],
        })
    }
}

impl Codec for MdCodec {
    type Book = MdBook;

    fn codebook(&self, rng: &mut ChaCha8Rng) -> MdBook {
        let [j0, j1, j2] = self.j;
        let u0: Vec<usize> = (0..j0).map(|_| self.pu0.sample(rng)).collect();
        let u1 = (0..j0 * j1)
            .map(|i| self.ku1.sample_row(u0[i / j1], rng))
            .collect();
        let u2 = (0..j0 * j2)
            .map(|i| self.ku2.sample_row(u0[i / j2], rng))
            .collect();
        MdBook { u0, u1, u2 }
    }

    fn trial(&self, b: &MdBook, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let [j0, j1, j2] = self.j;
        let s = self.ps.sample(rng);
        let mut scores = Vec::with_capacity(j0 * j1 * j2);
        for k0 in 0..j0 {
            let u0 = b.u0[k0];
            for &u1 in &b.u1[k0 * j1..(k0 + 1) * j1] {
                for &u2 in &b.u2[k0 * j2..(k0 + 1) * j2] {
                    let a = self.i_s.at(&[s, u0, u1, u2]);
                    let c = self.i_12.at(&[u1, u2, u0]);
                    let sum = a + c;
                    scores.push(if sum.is_nan() { f64::NEG_INFINITY } else { sum });
                }
            }
        }
        let Some(pick) = draw_or_erase(&scores, rng)? else {
            return Ok(TrialOutcome::erasure());
        };
        let k0 = pick / (j1 * j2);
        let k1 = (pick / j2) % j1;
        let k2 = pick % j2;
        let symbols = [s, b.u0[k0], b.u1[k0 * j1 + k1], b.u2[k0 * j2 + k2]];
        Ok(TrialOutcome::of(
            self.targets.iter().all(|t| t.distortion_ok(&symbols)),
        ))
    }
}

struct JsccBook {
    t: Vec<usize>,
    x1: Vec<usize>,
    x2: Vec<usize>,
}

struct JsccCodec {
    labels1: Vec<usize>,
    labels2: Vec<usize>,
    parts: usize,
    nt: usize,
    ns2: usize,
    nx2: usize,
    ps1: Vec<f64>,
    ps2: Vec<f64>,
    sources: Sampler,
    pt: Sampler,
    kx1: ConditionalKernel,
    kx2: ConditionalKernel,
    ky: ConditionalKernel,
    support: Vec<(usize, usize, f64)>,
    i_y: Lut,
}

impl JsccCodec {
    fn new(q: &JointPmf) -> Result<Self> {
        let (ns1, ns2) = (size_of(q, "S1")?, size_of(q, "S2")?);
        if ns1 * ns2 > SOURCE_PAIR_LIMIT {
            return Err(SimError::TooManyCandidates {
                count: (ns1 * ns2) as u64,
                limit: SOURCE_PAIR_LIMIT as u64,
            });
        }
        let cp = common_part(q, "S1", "S2")?;
        let joint = q.table_over(&["S1", "S2"])?;
        let support = (0..ns1 * ns2)
            .filter(|&i| joint[i] > 0.0)
            .map(|i| (i / ns2, i % ns2, joint[i].log2()))
            .collect();
        let ctx = DensityContext::new(q);
        Ok(Self {
            labels1: cp.first,
            labels2: cp.second,
            parts: cp.count,
            nt: size_of(q, "T")?,
            ns2,
            nx2: size_of(q, "X2")?,
            ps1: q.table_over(&["S1"])?,
            ps2: q.table_over(&["S2"])?,
            sources: Sampler::new(&joint),
            pt: marginal_sampler(q, &["T"])?,
            kx1: q.conditional(&["X1"], &["S1", "T"])?,
            kx2: q.conditional(&["X2"], &["S2", "T"])?,
            ky: q.conditional(&["Y"], &["X1", "X2"])?,
            support,
            i_y: Lut::info(&ctx, &["Y"], &["X1", "X2"], &[])?,
        })
    }

    fn channel_inputs(
        &self,
        probs: &[f64],
        labels: &[usize],
        t: &[usize],
        kernel: &ConditionalKernel,
        rng: &mut ChaCha8Rng,
    ) -> Vec<usize> {
        probs
            .iter()
            .enumerate()
            .map(|(s, &p)| {
                if p > 0.0 {
                    kernel.sample_row(s * self.nt + t[labels[s]], rng)
                } else {
                    0
                }
            })
            .collect()
    }
}

impl Codec for JsccCodec {
    type Book = JsccBook;

    fn codebook(&self, rng: &mut ChaCha8Rng) -> JsccBook {
        let t: Vec<usize> = (0..self.parts).map(|_| self.pt.sample(rng)).collect();
        let x1 = self.channel_inputs(&self.ps1, &self.labels1, &t, &self.kx1, rng);
        let x2 = self.channel_inputs(&self.ps2, &self.labels2, &t, &self.kx2, rng);
        JsccBook { t, x1, x2 }
    }

    fn trial(&self, b: &JsccBook, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let (s1, s2) = split(self.sources.sample(rng), self.ns2);
        let y = self.ky.sample_row(b.x1[s1] * self.nx2 + b.x2[s2], rng);
        let scores: Vec<f64> = self
            .support
            .iter()
            .map(|&(a, c, logp)| logp + self.i_y.at(&[y, b.x1[a], b.x2[c]]))
            .collect();
        Ok(match draw_or_erase(&scores, rng)? {
            Some(d) => TrialOutcome::of(self.support[d].0 == s1 && self.support[d].1 == s2),
            None => TrialOutcome::erasure(),
        })
    }
}
