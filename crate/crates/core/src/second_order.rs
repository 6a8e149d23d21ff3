//! Normal-approximation rates: moments of density vectors, the multivariate
//! normal CDF in up to three dimensions, the inverse complementary CDF region
//! `Q^-1(V, eps) = { x : P(N(0, V) <= x) >= 1 - eps }`, and rate / region
//! queries built on them.

#![allow(clippy::needless_range_loop)]

use statrs::function::erf::{erfc, erfc_inv};
use thiserror::Error;

use crate::densities::{DensityContext, DensityError, DensitySpec};
use crate::pmf::{JointPmf, PmfError};

/// Largest supported dimension of [`mvn_cdf`].
pub const MAX_DIMENSION: usize = 3;
/// Variances (and eigenvalues) below this, relative to the covariance scale,
/// are treated as exact zeros.
pub const DEGENERATE_VARIANCE: f64 = 1e-10;
/// Slack on the `>= 1 - eps` test in region membership.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;
/// Absolute tolerance of the inner quadratures.
const QUADRATURE_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SecondOrderError {
    #[error(transparent)]
    Pmf(#[from] PmfError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error("dimension {0} exceeds the supported maximum of 3")]
    DimensionLimit(usize),
    #[error("covariance is not symmetric positive semidefinite")]
    NotPsd,
    #[error("covariance and point dimensions differ")]
    ShapeMismatch,
    #[error("density is infinite on the support")]
    InfiniteDensity,
    #[error("invalid query: {0}")]
    InvalidQuery(String),
}

pub type Result<T> = std::result::Result<T, SecondOrderError>;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    // polish with Newton steps on the lower tail, which erfc resolves well
    for _ in 0..2 {
        let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if density <= 0.0 {
            break;
        }
        let err = if x <= 0.0 {
            normal_cdf(x) - p
        } else {
            (1.0 - p) - normal_cdf(-x)
        };
        x -= err / density;
    }
    x
}

/// A density with a sign, one coordinate of a density vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDensity {
    pub spec: DensitySpec,
    pub negate: bool,
}

impl SignedDensity {
    pub fn plus(spec: DensitySpec) -> Self {
        Self {
            spec,
            negate: false,
        }
    }

    pub fn minus(spec: DensitySpec) -> Self {
        Self { spec, negate: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

/// Mean vector and covariance matrix of a vector of densities under `q`.
pub fn density_moments(q: &JointPmf, coords: &[SignedDensity]) -> Result<Moments> {
    let ctx = DensityContext::new(q);
    let compiled = coords
        .iter()
        .map(|c| ctx.compile(&c.spec))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let d = coords.len();
    let mut samples: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut failure = None;
    q.for_each_support(|o, p| {
        let mut v = Vec::with_capacity(d);
        for (c, dens) in coords.iter().zip(&compiled) {
            match dens.eval(o) {
                Ok(x) if x.is_finite() => v.push(if c.negate { -x.bits() } else { x.bits() }),
                Ok(_) => failure = Some(SecondOrderError::InfiniteDensity),
                Err(e) => failure = Some(e.into()),
            }
        }
        samples.push((p, v));
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let mut mean = vec![0.0; d];
    for (p, v) in &samples {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += p * x;
        }
    }
    let mut cov = vec![vec![0.0; d]; d];
    for (p, v) in &samples {
        for i in 0..d {
            for j in 0..=i {
                cov[i][j] += p * (v[i] - mean[i]) * (v[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[j][i] = cov[i][j];
        }
    }
    Ok(Moments { mean, cov })
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1], positive half.
const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = 0.0;
    let mut g = 0.0;
    for i in 0..8 {
        if i == 7 {
            let v = f(c);
            k += K15_WEIGHTS[7] * v;
            g += G7_WEIGHTS[3] * v;
        } else {
            let v = f(c - h * GK_NODES[i]) + f(c + h * GK_NODES[i]);
            k += K15_WEIGHTS[i] * v;
            if i % 2 == 1 {
                g += G7_WEIGHTS[i / 2] * v;
            }
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod quadrature with an absolute tolerance.
fn integrate(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gauss_kronrod(f, a, b);
        if err <= tol || depth == 0 || (b - a).abs() < 1e-15 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    rec(f, a, b, tol, 40)
}

/// `P(X <= h, Y <= k)` for standard normals with correlation `rho`, |rho| < 1.
fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> f64 {
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return normal_cdf(k);
    }
    if k == f64::INFINITY {
        return normal_cdf(h);
    }
    let base = normal_cdf(h) * normal_cdf(k);
    if rho == 0.0 {
        return base;
    }
    let upper = rho.clamp(-1.0, 1.0).asin();
    let hh = h * h + k * k;
    let hk = 2.0 * h * k;
    let mut f = |t: f64| {
        let c = t.cos();
        let c2 = c * c;
        if c2 <= 0.0 {
            return 0.0;
        }
        (-(hh - hk * t.sin()) / (2.0 * c2)).exp()
    };
    let corr = if upper > 0.0 {
        integrate(&mut f, 0.0, upper, QUADRATURE_TOLERANCE)
    } else {
        -integrate(&mut f, upper, 0.0, QUADRATURE_TOLERANCE)
    };
    (base + corr / (2.0 * std::f64::consts::PI)).clamp(0.0, 1.0)
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
fn symmetric_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

fn validate_cov(cov: &[Vec<f64>], x: &[f64]) -> Result<f64> {
    let d = cov.len();
    if d > MAX_DIMENSION {
        return Err(SecondOrderError::DimensionLimit(d));
    }
    if x.len() != d || cov.iter().any(|r| r.len() != d) {
        return Err(SecondOrderError::ShapeMismatch);
    }
    if x.iter().any(|v| v.is_nan()) || cov.iter().flatten().any(|v| !v.is_finite()) {
        return Err(SecondOrderError::InvalidQuery("non-finite input".into()));
    }
    let scale = cov
        .iter()
        .enumerate()
        .map(|(i, r)| r[i].abs())
        .fold(1.0, f64::max);
    for i in 0..d {
        for j in 0..i {
            if (cov[i][j] - cov[j][i]).abs() > 1e-12 * scale {
                return Err(SecondOrderError::NotPsd);
            }
        }
    }
    if symmetric_eigenvalues(cov)
        .iter()
        .any(|&e| e < -DEGENERATE_VARIANCE * scale)
    {
        return Err(SecondOrderError::NotPsd);
    }
    Ok(scale)
}

/// `P(G <= x)` for `G ~ N(0, cov)` with `cov` symmetric PSD of dimension at
/// most three. Degenerate directions are handled as exact constraints.
pub fn mvn_cdf(cov: &[Vec<f64>], x: &[f64]) -> Result<f64> {
    let scale = validate_cov(cov, x)?;
    let d = cov.len();
    Ok(orthant(
        &vec![0.0; d],
        cov.to_vec(),
        x,
        DEGENERATE_VARIANCE * scale,
    ))
}

/// `P(G <= x)` for `G ~ N(mean, cov)`.
fn orthant(mean: &[f64], cov: Vec<Vec<f64>>, x: &[f64], tiny: f64) -> f64 {
    // deterministic coordinates become exact checks
    let mut keep = Vec::with_capacity(mean.len());
    for i in 0..mean.len() {
        if cov[i][i] <= tiny {
            if mean[i] > x[i] {
                return 0.0;
            }
        } else {
            keep.push(i);
        }
    }
    let mean: Vec<f64> = keep.iter().map(|&i| mean[i]).collect();
    let x: Vec<f64> = keep.iter().map(|&i| x[i]).collect();
    let cov: Vec<Vec<f64>> = keep
        .iter()
        .map(|&i| keep.iter().map(|&j| cov[i][j]).collect())
        .collect();
    match mean.len() {
        0 => 1.0,
        1 => normal_cdf((x[0] - mean[0]) / cov[0][0].sqrt()),
        2 => {
            let (s0, s1) = (cov[0][0].sqrt(), cov[1][1].sqrt());
            let cond = cov[1][1] - cov[0][1] * cov[0][1] / cov[0][0];
            if cond > tiny {
                let rho = (cov[0][1] / (s0 * s1)).clamp(-1.0, 1.0);
                return bivariate_normal_cdf((x[0] - mean[0]) / s0, (x[1] - mean[1]) / s1, rho);
            }
            condition_on_pivot(&mean, &cov, &x, tiny)
        }
        _ => condition_on_pivot(&mean, &cov, &x, tiny),
    }
}

/// Integrate over the coordinate with the largest variance, conditioning the
/// rest on it.
fn condition_on_pivot(mean: &[f64], cov: &[Vec<f64>], x: &[f64], tiny: f64) -> f64 {
    let d = mean.len();
    let p = (0..d)
        .max_by(|&a, &b| cov[a][a].total_cmp(&cov[b][b]))
        .unwrap_or(0);
    let rest: Vec<usize> = (0..d).filter(|&i| i != p).collect();
    let var_p = cov[p][p];
    let sd_p = var_p.sqrt();
    let slope: Vec<f64> = rest.iter().map(|&i| cov[i][p] / var_p).collect();
    let cond_cov: Vec<Vec<f64>> = rest
        .iter()
        .enumerate()
        .map(|(a, &i)| {
            rest.iter()
                .enumerate()
                .map(|(b, &j)| cov[i][j] - slope[a] * slope[b] * var_p)
                .collect()
        })
        .collect();
    // coordinates that are affine in the pivot restrict its range
    let (mut lo, mut hi) = (f64::NEG_INFINITY, x[p]);
    let mut free = Vec::new();
    for (a, &i) in rest.iter().enumerate() {
        if cond_cov[a][a] > tiny {
            free.push(a);
            continue;
        }
        // mean[i] + slope * (g - mean[p]) <= x[i]
        let b = slope[a];
        if b.abs() < 1e-14 {
            if mean[i] > x[i] {
                return 0.0;
            }
        } else if b > 0.0 {
            hi = hi.min(mean[p] + (x[i] - mean[i]) / b);
        } else {
            lo = lo.max(mean[p] + (x[i] - mean[i]) / b);
        }
    }
    if lo >= hi {
        return 0.0;
    }
    let (u_lo, u_hi) = (
        normal_cdf((lo - mean[p]) / sd_p),
        normal_cdf((hi - mean[p]) / sd_p),
    );
    if free.is_empty() {
        return (u_hi - u_lo).max(0.0);
    }
    let sub_cov: Vec<Vec<f64>> = free
        .iter()
        .map(|&a| free.iter().map(|&b| cond_cov[a][b]).collect())
        .collect();
    let sub_x: Vec<f64> = free.iter().map(|&a| x[rest[a]]).collect();
    let mut f = |u: f64| {
        let g = mean[p] + sd_p * normal_quantile(u);
        if !g.is_finite() {
            return 0.0;
        }
        let sub_mean: Vec<f64> = free
            .iter()
            .map(|&a| mean[rest[a]] + slope[a] * (g - mean[p]))
            .collect();
        orthant(&sub_mean, sub_cov.clone(), &sub_x, tiny)
    };
    integrate(&mut f, u_lo, u_hi, QUADRATURE_TOLERANCE).clamp(0.0, 1.0)
}

/// Whether `x` lies in `Q^-1(cov, eps)`, with boundary slack 1e-9.
pub fn qinv_contains(cov: &[Vec<f64>], epsilon: f64, x: &[f64]) -> Result<bool> {
    check_epsilon(epsilon)?;
    Ok(mvn_cdf(cov, x)? >= 1.0 - epsilon - BOUNDARY_TOLERANCE)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SecondOrderError::InvalidQuery(format!(
            "epsilon = {epsilon} must lie in (0, 1)"
        )));
    }
    Ok(())
}

/// Blocklength and target error probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateQuery {
    pub n: u64,
    pub epsilon: f64,
}

impl RateQuery {
    fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        if self.n == 0 {
            return Err(SecondOrderError::InvalidQuery("n must be positive".into()));
        }
        Ok(())
    }

    fn log_term(&self, c: f64) -> f64 {
        let n = self.n as f64;
        c * n.log2() / n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    /// Achievable rate in bits per channel use.
    pub rate: f64,
    /// Smallest `R` with a split `[w, R - w]` inside `Q^-1(V, eps)`.
    pub dispersion_offset: f64,
    /// The split coordinate `w` attaining it.
    pub witness: f64,
    pub moments: Moments,
}

fn golden_min(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        // infeasible prefix: both infinite means the minimum lies to the right
        if fc < fd || (fc == fd && fc.is_finite()) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let (fa, fb) = (f(a), f(b));
    [(a, fa), (c, fc), (d, fd), (b, fb)]
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap_or((a, fa))
}

/// Smallest `t` in `[lo, hi]` with `ok(t)`, assuming `ok` is monotone and
/// `ok(hi)` holds.
fn bisect_threshold(mut ok: impl FnMut(f64) -> bool, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    if ok(lo) {
        return lo;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `min { a + b : [a, b] in Q^-1(cov, eps) }` and the minimizing `a`.
fn min_split(cov: &[Vec<f64>], epsilon: f64) -> Result<(f64, f64)> {
    let target = 1.0 - epsilon - BOUNDARY_TOLERANCE;
    let scale = validate_cov(cov, &[0.0, 0.0])?;
    let tiny = DEGENERATE_VARIANCE * scale;
    let sd = |i: usize| if cov[i][i] > tiny { cov[i][i].sqrt() } else { 0.0 };
    let (s0, s1) = (sd(0), sd(1));
    let z = normal_quantile(1.0 - epsilon);
    let spread = 10.0 * s0.max(s1).max(1.0);
    let ok = |a: f64, b: f64| mvn_cdf(cov, &[a, b]).map(|p| p >= target).unwrap_or(false);
    // smallest b with [a, b] admissible, or +inf
    let b_of = |a: f64| -> f64 {
        let lo = s1 * z - 1.0;
        let hi = s1 * normal_quantile(1.0 - 1e-15) + spread;
        if !ok(a, hi) {
            return f64::INFINITY;
        }
        bisect_threshold(|b| ok(a, b), lo, hi, 1e-11)
    };
    let a_lo = s0 * z;
    let a_ref = s0 * normal_quantile(1.0 - epsilon / 2.0);
    let h_ref = a_ref + b_of(a_ref);
    let a_hi = (h_ref - s1 * z).max(a_lo);
    let (a, h) = golden_min(|a| a + b_of(a), a_lo, a_hi, 1e-10);
    if h.is_finite() && h <= h_ref {
        Ok((h, a))
    } else {
        Ok((h_ref, a_ref))
    }
}

/// Normal-approximation achievable rate for Gelfand-Pinsker coding:
/// `I(U;Y) - I(U;S) - R_D / sqrt(n) - c log2(n) / n`, where `R_D` is the
/// smallest `R` admitting a split `[w, R - w]` in `Q^-1(V, eps)` and `V` is
/// the covariance of `(info(U;S), -info(U;Y))`.
pub fn gp_rate(q: &JointPmf, query: RateQuery, log_coefficient: f64) -> Result<RateResult> {
    query.validate()?;
    let moments = density_moments(
        q,
        &[
            SignedDensity::plus(DensitySpec::info(&["U"], &["S"])),
            SignedDensity::minus(DensitySpec::info(&["U"], &["Y"])),
        ],
    )?;
    rate_from_moments(moments, query, log_coefficient)
}

fn rate_from_moments(moments: Moments, query: RateQuery, c: f64) -> Result<RateResult> {
    let (offset, witness) = min_split(&moments.cov, query.epsilon)?;
    let n = query.n as f64;
    let mutual = -moments.mean[1] - moments.mean[0];
    Ok(RateResult {
        rate: mutual - offset / n.sqrt() - query.log_term(c),
        dispersion_offset: offset,
        witness,
        moments,
    })
}

/// Normal-approximation achievable rate for a point-to-point channel,
/// `I(X;Y) - sqrt(V/n) Qinv(eps) - c log2(n) / n`.
pub fn p2p_rate(q: &JointPmf, query: RateQuery, log_coefficient: f64) -> Result<RateResult> {
    query.validate()?;
    let m = density_moments(q, &[SignedDensity::minus(DensitySpec::info(&["X"], &["Y"]))])?;
    let var = m.cov[0][0];
    let z = normal_quantile(1.0 - query.epsilon);
    let offset = var.sqrt() * z;
    let n = query.n as f64;
    Ok(RateResult {
        rate: -m.mean[0] - offset / n.sqrt() - query.log_term(log_coefficient),
        dispersion_offset: offset,
        witness: 0.0,
        moments: Moments {
            mean: vec![0.0, m.mean[0]],
            cov: vec![vec![0.0, 0.0], vec![0.0, var]],
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionOptions {
    /// Spacing of the binning-rate witness lattice, in bits.
    pub grid: f64,
    /// Coefficient of the `log2(n) / n` correction on every coordinate.
    pub log_coefficient: f64,
}

impl Default for RegionOptions {
    fn default() -> Self {
        Self {
            grid: 1e-3,
            log_coefficient: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipResult {
    pub member: bool,
    /// Binning rates `(w1, w2)` on the witness lattice, when admissible.
    pub witness: Option<(f64, f64)>,
    pub moments: Moments,
}

/// Densities whose mean is the Marton corner vector
/// `(I(U1;U2), -I(U1;Y1), -I(U2;Y2))`.
pub fn marton_coordinates() -> [SignedDensity; 3] {
    [
        SignedDensity::plus(DensitySpec::info(&["U1"], &["U2"])),
        SignedDensity::minus(DensitySpec::info(&["U1"], &["Y1"])),
        SignedDensity::minus(DensitySpec::info(&["U2"], &["Y2"])),
    ]
}

/// Whether the rate pair `(r1, r2)` passes the normal-approximation test for
/// two-receiver Marton coding at blocklength `n` and error `eps`: some
/// binning rates `w1, w2 >= 0` on the witness lattice satisfy
/// `sqrt(n) * ([w1 + w2, -r1 - w1, -r2 - w2] - mean - c log2(n)/n) in Q^-1(V, eps)`.
pub fn bc_region_membership(
    q: &JointPmf,
    query: RateQuery,
    rates: (f64, f64),
    options: RegionOptions,
) -> Result<MembershipResult> {
    query.validate()?;
    if !(options.grid > 0.0 && options.grid.is_finite()) {
        return Err(SecondOrderError::InvalidQuery("grid must be positive".into()));
    }
    let moments = density_moments(q, &marton_coordinates())?;
    let cov = moments.cov.clone();
    let scale = validate_cov(&cov, &[0.0; 3])?;
    let tiny = DEGENERATE_VARIANCE * scale;
    let target = 1.0 - query.epsilon - BOUNDARY_TOLERANCE;
    let root_n = (query.n as f64).sqrt();
    let delta = query.log_term(options.log_coefficient);
    let mean = &moments.mean;
    let a1 = -mean[1] - rates.0 - delta;
    let a2 = -mean[2] - rates.1 - delta;
    let total = a1 + a2 - mean[0] - delta;
    let not_member = |moments: Moments| MembershipResult {
        member: false,
        witness: None,
        moments,
    };
    let admissible = |w1: f64, w2: f64| -> bool {
        let x = [
            root_n * (w1 + w2 - mean[0] - delta),
            root_n * (a1 - w1),
            root_n * (a2 - w2),
        ];
        mvn_cdf(&cov, &x).map(|p| p >= target).unwrap_or(false)
    };

    // work in scaled coordinates y_k = sqrt(n) (a_k - w_k); w_k >= 0 caps y_k
    let (cap1, cap2) = (root_n * a1, root_n * a2);
    let sd = |i: usize| if cov[i][i] > tiny { cov[i][i].sqrt() } else { 0.0 };
    let z = normal_quantile(1.0 - query.epsilon);
    let spread = 10.0 * sd(0).max(sd(1)).max(sd(2)).max(1.0);
    let pair_cov = vec![
        vec![cov[1][1], cov[1][2]],
        vec![cov[2][1], cov[2][2]],
    ];
    let pair_ok = |y1: f64, y2: f64| {
        mvn_cdf(&pair_cov, &[y1, y2])
            .map(|p| p >= target)
            .unwrap_or(false)
    };
    if !pair_ok(cap1, cap2) {
        return Ok(not_member(moments));
    }
    let y1_lo = bisect_threshold(|y| pair_ok(y, cap2), sd(1) * z - 1.0, cap1, 1e-9);
    let b_of = |y1: f64, y2: f64| -> f64 {
        let full = |y0: f64| {
            mvn_cdf(&cov, &[y0, y1, y2])
                .map(|p| p >= target)
                .unwrap_or(false)
        };
        let hi = sd(0) * normal_quantile(1.0 - 1e-15) + spread;
        if !full(hi) {
            return f64::INFINITY;
        }
        bisect_threshold(full, sd(0) * z - 1.0, hi, 1e-7)
    };
    // best y2 and objective for a given y1
    let inner = |y1: f64| -> (f64, f64) {
        if !pair_ok(y1, cap2) {
            return (cap2, f64::INFINITY);
        }
        let y2_lo = bisect_threshold(|y| pair_ok(y1, y), sd(2) * z - 1.0, cap2, 1e-9);
        let (y2, v) = golden_min(|y2| y2 + b_of(y1, y2), y2_lo, cap2, 1e-5);
        (y2, y1 + v)
    };
    // a feasible corner often settles it without the full search
    let mut y1 = cap1;
    let (mut y2, mut obj) = inner(cap1);
    if obj > root_n * total {
        let (t1, _) = golden_min(|t| inner(t).1, y1_lo, cap1, 1e-5);
        let (t2, o) = inner(t1);
        if o < obj {
            (y1, y2, obj) = (t1, t2, o);
        }
    }
    if !obj.is_finite() || obj > root_n * total {
        return Ok(not_member(moments));
    }
    // spread the slack over the free coordinates before snapping to the lattice
    let slack = root_n * total - obj;
    let y1c = (y1 + slack / 3.0).min(cap1);
    let y2c = (y2 + slack / 3.0).min(cap2);
    let (w1, w2) = (a1 - y1c / root_n, a2 - y2c / root_n);
    let g = options.grid;
    let (c1, c2) = ((w1 / g).round(), (w2 / g).round());
    let mut lattice: Vec<(f64, f64)> = Vec::new();
    for d1 in -3..=3 {
        for d2 in -3..=3 {
            let (k1, k2) = (c1 + d1 as f64, c2 + d2 as f64);
            if k1 >= 0.0 && k2 >= 0.0 {
                lattice.push((k1 * g, k2 * g));
            }
        }
    }
    lattice.sort_by(|p, r| {
        let dp = (p.0 - w1).powi(2) + (p.1 - w2).powi(2);
        let dr = (r.0 - w1).powi(2) + (r.1 - w2).powi(2);
        dp.total_cmp(&dr)
    });
    let witness = lattice.into_iter().find(|&(v1, v2)| admissible(v1, v2));
    Ok(MembershipResult {
        member: witness.is_some(),
        witness,
        moments,
    })
}
