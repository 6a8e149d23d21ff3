//! Random test instances for every scenario, and a brute-force reference
//! evaluator that recomputes every marginal by scanning the full joint table.
#![allow(dead_code)]

use std::sync::Arc;

use oneshot::pmf::{Alphabet, JointPmf, Role, Variable};
use oneshot::scenario::{
    BtSizes, DistortionSpec, GpSizes, HbSizes, LossyTarget, Marton2Sizes, Marton3Sizes, MdSizes,
    P2pSizes, Reconstruction, Scenario,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    P2p,
    Gp,
    Marton2,
    Marton3,
    BergerTung,
    HbKaspi,
    Md,
    Jscc,
}

pub const ALL: [Kind; 8] = [
    Kind::P2p,
    Kind::Gp,
    Kind::Marton2,
    Kind::Marton3,
    Kind::BergerTung,
    Kind::HbKaspi,
    Kind::Md,
    Kind::Jscc,
];

/// Reconstruction target as plain data for the reference evaluator.
#[derive(Debug, Clone)]
pub struct RefTarget {
    pub source: &'static str,
    pub given: Vec<&'static str>,
    pub map: Vec<usize>,
    pub measure: Vec<Vec<f64>>,
    pub level: f64,
}

/// Dense joint table with brute-force marginals.
#[derive(Debug, Clone)]
pub struct Brute {
    pub names: Vec<&'static str>,
    pub shape: Vec<usize>,
    pub mass: Vec<f64>,
    pub cells: Vec<Vec<usize>>,
}

impl Brute {
    pub fn new(names: Vec<&'static str>, shape: Vec<usize>, mass: Vec<f64>) -> Self {
        let mut cells = Vec::with_capacity(mass.len());
        let mut o = vec![0; shape.len()];
        for _ in 0..mass.len() {
            cells.push(o.clone());
            for i in (0..shape.len()).rev() {
                o[i] += 1;
                if o[i] < shape[i] {
                    break;
                }
                o[i] = 0;
            }
        }
        Self {
            names,
            shape,
            mass,
            cells,
        }
    }

    pub fn pos(&self, name: &str) -> usize {
        self.names.iter().position(|n| *n == name).unwrap()
    }

    /// Probability that the listed variables agree with `o`.
    pub fn marg(&self, o: &[usize], vars: &[&str]) -> f64 {
        let ps: Vec<usize> = vars.iter().map(|v| self.pos(v)).collect();
        self.prob(|c| ps.iter().all(|&p| c[p] == o[p]))
    }

    pub fn prob(&self, event: impl Fn(&[usize]) -> bool) -> f64 {
        self.cells
            .iter()
            .zip(&self.mass)
            .filter(|(c, _)| event(c))
            .map(|(_, m)| m)
            .sum()
    }

    pub fn iota(&self, o: &[usize], x: &[&str], y: &[&str], z: &[&str]) -> f64 {
        let xz: Vec<&str> = x.iter().chain(z).copied().collect();
        let yz: Vec<&str> = y.iter().chain(z).copied().collect();
        let xyz: Vec<&str> = x.iter().chain(y).chain(z).copied().collect();
        let num = self.marg(o, &xyz) * self.marg(o, z);
        let den = self.marg(o, &xz) * self.marg(o, &yz);
        (num / den).log2()
    }

    pub fn h(&self, o: &[usize], x: &[&str], z: &[&str]) -> f64 {
        let mut xz: Vec<&str> = x.to_vec();
        xz.extend_from_slice(z);
        -(self.marg(o, &xz) / self.marg(o, z)).log2()
    }

    pub fn expect(&self, f: impl Fn(&[usize]) -> f64) -> f64 {
        self.cells
            .iter()
            .zip(&self.mass)
            .filter(|(_, &m)| m > 0.0)
            .map(|(c, m)| m * f(c))
            .sum()
    }

    pub fn target_ok(&self, o: &[usize], t: &RefTarget) -> bool {
        let mut row = 0;
        for g in &t.given {
            let p = self.pos(g);
            row = row * self.shape[p] + o[p];
        }
        t.measure[o[self.pos(t.source)]][t.map[row]] <= t.level
    }
}

pub struct Instance {
    pub kind: Kind,
    pub scenario: Scenario,
    pub q: JointPmf,
    pub brute: Brute,
    pub targets: Vec<RefTarget>,
}

/// Random pmf; with `sparse`, some entries are zeroed.
pub fn rand_pmf(rng: &mut ChaCha8Rng, n: usize, sparse: bool) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n)
            .map(|_| {
                if sparse && rng.random::<f64>() < 0.2 {
                    0.0
                } else {
                    rng.random::<f64>() + 0.05
                }
            })
            .collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            return v.into_iter().map(|x| x / s).collect();
        }
    }
}

/// Random row-stochastic table with `rows` rows of width `cols`.
pub fn rand_kernel(rng: &mut ChaCha8Rng, rows: usize, cols: usize, sparse: bool) -> Vec<Vec<f64>> {
    (0..rows).map(|_| rand_pmf(rng, cols, sparse)).collect()
}

fn rand_map(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<usize> {
    (0..rows).map(|_| rng.random_range(0..cols)).collect()
}

fn size(rng: &mut ChaCha8Rng) -> usize {
    rng.random_range(2..=3)
}

struct Layout {
    names: Vec<&'static str>,
    shape: Vec<usize>,
}

impl Layout {
    fn new(vars: &[(&'static str, usize)]) -> Self {
        Self {
            names: vars.iter().map(|v| v.0).collect(),
            shape: vars.iter().map(|v| v.1).collect(),
        }
    }

    fn p(&self, name: &str) -> usize {
        self.names.iter().position(|n| *n == name).unwrap()
    }

    fn n(&self, name: &str) -> usize {
        self.shape[self.p(name)]
    }

    /// Flat row index of the listed variables within a full outcome.
    fn row(&self, o: &[usize], vars: &[&str]) -> usize {
        vars.iter()
            .fold(0, |acc, v| acc * self.n(v) + o[self.p(v)])
    }

    fn build(&self, mass_of: impl Fn(&[usize]) -> f64) -> (Vec<f64>, Brute) {
        let probe = Brute::new(self.names.clone(), self.shape.clone(), vec![0.0; self.shape.iter().product()]);
        let mass: Vec<f64> = probe.cells.iter().map(|c| mass_of(c)).collect();
        let total: f64 = mass.iter().sum();
        let mass: Vec<f64> = mass.into_iter().map(|m| m / total).collect();
        let brute = Brute::new(self.names.clone(), self.shape.clone(), mass.clone());
        (mass, brute)
    }

    fn variables(&self, role: impl Fn(&str) -> Role) -> Vec<Variable> {
        self.names
            .iter()
            .zip(&self.shape)
            .map(|(n, &s)| {
                Variable::new(*n, Arc::new(Alphabet::indexed(*n, s).unwrap()), role(n))
            })
            .collect()
    }

    fn var(&self, name: &str) -> Variable {
        Variable::new(
            name,
            Arc::new(Alphabet::indexed(name, self.n(name)).unwrap()),
            Role::Auxiliary,
        )
    }
}

fn role_of(name: &str) -> Role {
    match name {
        n if n.starts_with('S') => Role::Source,
        n if n.starts_with('U') || n == "W" => Role::Auxiliary,
        n if n.starts_with('X') => Role::Input,
        "T" => Role::TimeSharing,
        _ => Role::Output,
    }
}

fn target(
    rng: &mut ChaCha8Rng,
    l: &Layout,
    source: &'static str,
    given: &[&'static str],
) -> (LossyTarget, RefTarget) {
    let ns = l.n(source);
    let rows: usize = given.iter().map(|g| l.n(g)).product();
    let map = rand_map(rng, rows, ns);
    let measure: Vec<Vec<f64>> = (0..ns)
        .map(|i| {
            (0..ns)
                .map(|j| if i == j { 0.0 } else { rng.random_range(0.2..1.0) })
                .collect()
        })
        .collect();
    let level = [0.0, 0.5, 1.0][rng.random_range(0..3)];
    let vars: Vec<Variable> = given.iter().map(|g| l.var(g)).collect();
    let recon = Reconstruction::new(vars, ns, map.clone()).unwrap();
    (
        LossyTarget::new(
            recon,
            DistortionSpec {
                measure: measure.clone(),
                level,
            },
        ),
        RefTarget {
            source,
            given: given.to_vec(),
            map,
            measure,
            level,
        },
    )
}

fn finish(kind: Kind, scenario: Scenario, l: &Layout, mass_of: impl Fn(&[usize]) -> f64, targets: Vec<RefTarget>) -> Instance {
    let (mass, brute) = l.build(mass_of);
    let q = JointPmf::new(l.variables(role_of), mass).unwrap();
    Instance {
        kind,
        scenario,
        q,
        brute,
        targets,
    }
}

/// Seeded random instance of a scenario with alphabets of size 2 or 3 and
/// small code sizes.
pub fn instance(kind: Kind, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (kind as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let r = &mut rng;
    match kind {
        Kind::P2p => {
            let l = Layout::new(&[("X", size(r)), ("Y", size(r))]);
            let px = rand_pmf(r, l.n("X"), true);
            let ch = rand_kernel(r, l.n("X"), l.n("Y"), true);
            let m = r.random_range(1..=4);
            finish(
                kind,
                Scenario::PointToPoint(P2pSizes { m }),
                &l,
                |o| px[o[0]] * ch[o[0]][o[1]],
                vec![],
            )
        }
        Kind::Gp => {
            let l = Layout::new(&[("U", size(r)), ("S", size(r)), ("X", size(r)), ("Y", size(r))]);
            let ps = rand_pmf(r, l.n("S"), false);
            let pu = rand_kernel(r, l.n("S"), l.n("U"), true);
            let fx = rand_map(r, l.n("U") * l.n("S"), l.n("X"));
            let ch = rand_kernel(r, l.n("X") * l.n("S"), l.n("Y"), true);
            let sizes = GpSizes {
                m: r.random_range(1..=3),
                j: r.random_range(1..=3),
            };
            finish(
                kind,
                Scenario::GelfandPinsker(sizes),
                &l,
                |o| {
                    let (u, s, x, y) = (o[0], o[1], o[2], o[3]);
                    let det = (fx[l.row(o, &["U", "S"])] == x) as u8 as f64;
                    ps[s] * pu[s][u] * det * ch[l.row(o, &["X", "S"])][y]
                },
                vec![],
            )
        }
        Kind::Marton2 => {
            let l = Layout::new(&[
                ("U1", size(r)),
                ("U2", size(r)),
                ("X", size(r)),
                ("Y1", size(r)),
                ("Y2", size(r)),
            ]);
            let pu = rand_pmf(r, l.n("U1") * l.n("U2"), true);
            let fx = rand_map(r, l.n("U1") * l.n("U2"), l.n("X"));
            let ch = rand_kernel(r, l.n("X"), l.n("Y1") * l.n("Y2"), true);
            let sizes = Marton2Sizes {
                m1: r.random_range(1..=2),
                m2: r.random_range(1..=2),
                j1: r.random_range(1..=2),
                j2: r.random_range(1..=2),
            };
            finish(
                kind,
                Scenario::Marton2(sizes),
                &l,
                |o| {
                    let u = l.row(o, &["U1", "U2"]);
                    let det = (fx[u] == o[2]) as u8 as f64;
                    pu[u] * det * ch[o[2]][l.row(o, &["Y1", "Y2"])]
                },
                vec![],
            )
        }
        Kind::Marton3 => {
            let l = Layout::new(&[
                ("U0", 2),
                ("U1", size(r)),
                ("U2", 2),
                ("X", size(r)),
                ("Y1", size(r)),
                ("Y2", 2),
            ]);
            let nu = l.n("U0") * l.n("U1") * l.n("U2");
            let pu = rand_pmf(r, nu, true);
            let fx = rand_map(r, nu, l.n("X"));
            let ch = rand_kernel(r, l.n("X"), l.n("Y1") * l.n("Y2"), true);
            let sizes = Marton3Sizes {
                m0: r.random_range(1..=2),
                m1: r.random_range(1..=2),
                m2: r.random_range(1..=2),
                j1: r.random_range(1..=2),
                j2: r.random_range(1..=2),
            };
            finish(
                kind,
                Scenario::Marton3(sizes),
                &l,
                |o| {
                    let u = l.row(o, &["U0", "U1", "U2"]);
                    let det = (fx[u] == o[3]) as u8 as f64;
                    pu[u] * det * ch[o[3]][l.row(o, &["Y1", "Y2"])]
                },
                vec![],
            )
        }
        Kind::BergerTung => {
            let l = Layout::new(&[("S1", size(r)), ("S2", size(r)), ("U1", size(r)), ("U2", size(r))]);
            let ps = rand_pmf(r, l.n("S1") * l.n("S2"), true);
            let k1 = rand_kernel(r, l.n("S1"), l.n("U1"), true);
            let k2 = rand_kernel(r, l.n("S2"), l.n("U2"), true);
            let (m1, m2) = (r.random_range(1..=2), r.random_range(1..=2));
            let sizes = BtSizes {
                m1,
                m2,
                j1: r.random_range(m1..=3),
                j2: r.random_range(m2..=3),
            };
            let (t1, r1) = target(r, &l, "S1", &["U1", "U2"]);
            let (t2, r2) = target(r, &l, "S2", &["U1", "U2"]);
            finish(
                kind,
                Scenario::BergerTung(sizes, [t1, t2]),
                &l,
                |o| ps[l.row(o, &["S1", "S2"])] * k1[o[0]][o[2]] * k2[o[1]][o[3]],
                vec![r1, r2],
            )
        }
        Kind::HbKaspi => {
            let l = Layout::new(&[("S", size(r)), ("Y", size(r)), ("W", size(r)), ("U", size(r))]);
            let psy = rand_pmf(r, l.n("S") * l.n("Y"), true);
            let kwu = rand_kernel(r, l.n("S"), l.n("W") * l.n("U"), true);
            let m2 = r.random_range(1..=2);
            let sizes = HbSizes {
                m1: r.random_range(1..=2),
                m2,
                j2: r.random_range(m2..=3),
            };
            let (t1, r1) = target(r, &l, "S", &["W"]);
            let (t2, r2) = target(r, &l, "S", &["W", "U", "Y"]);
            finish(
                kind,
                Scenario::HeegardBergerKaspi(sizes, [t1, t2]),
                &l,
                |o| psy[l.row(o, &["S", "Y"])] * kwu[o[0]][l.row(o, &["W", "U"])],
                vec![r1, r2],
            )
        }
        Kind::Md => {
            let l = Layout::new(&[("S", size(r)), ("U0", 2), ("U1", size(r)), ("U2", size(r))]);
            let ps = rand_pmf(r, l.n("S"), false);
            let ku = rand_kernel(r, l.n("S"), l.n("U0") * l.n("U1") * l.n("U2"), true);
            let j0 = r.random_range(1..=2);
            let sizes = MdSizes {
                m1: j0 * r.random_range(1..=2),
                m2: j0 * r.random_range(1..=2),
                j0,
            };
            let (t0, r0) = target(r, &l, "S", &["U0", "U1", "U2"]);
            let (t1, r1) = target(r, &l, "S", &["U0", "U1"]);
            let (t2, r2) = target(r, &l, "S", &["U0", "U2"]);
            finish(
                kind,
                Scenario::MultipleDescriptions(sizes, [t0, t1, t2]),
                &l,
                |o| ps[o[0]] * ku[o[0]][l.row(o, &["U0", "U1", "U2"])],
                vec![r0, r1, r2],
            )
        }
        Kind::Jscc => {
            let l = Layout::new(&[
                ("S1", size(r)),
                ("S2", size(r)),
                ("T", size(r)),
                ("X1", 2),
                ("X2", 2),
                ("Y", size(r)),
            ]);
            let ps = rand_pmf(r, l.n("S1") * l.n("S2"), true);
            let pt = rand_pmf(r, l.n("T"), false);
            let k1 = rand_kernel(r, l.n("S1") * l.n("T"), 2, true);
            let k2 = rand_kernel(r, l.n("S2") * l.n("T"), 2, true);
            let ch = rand_kernel(r, 4, l.n("Y"), false);
            finish(
                kind,
                Scenario::JsccMac,
                &l,
                |o| {
                    ps[l.row(o, &["S1", "S2"])]
                        * pt[o[2]]
                        * k1[l.row(o, &["S1", "T"])][o[3]]
                        * k2[l.row(o, &["S2", "T"])][o[4]]
                        * ch[l.row(o, &["X1", "X2"])][o[5]]
                },
                vec![],
            )
        }
    }
}

/// Labels of the common part by brute-force transitive closure of the
/// support relation on `a + b` nodes.
pub fn closure_labels(support: &[Vec<bool>]) -> Vec<usize> {
    let a = support.len();
    let b = support.first().map_or(0, Vec::len);
    let n = a + b;
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for i in 0..a {
        for j in 0..b {
            if support[i][j] {
                reach[i][a + j] = true;
                reach[a + j][i] = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    // label = smallest node in the class
    (0..n).map(|i| (0..n).find(|&j| reach[i][j]).unwrap()).collect()
}

fn sizes_f(s: &Scenario) -> Vec<f64> {
    match s {
        Scenario::PointToPoint(s) => vec![s.m as f64],
        Scenario::GelfandPinsker(s) => vec![s.m as f64, s.j as f64],
        Scenario::Marton2(s) => vec![s.m1 as f64, s.m2 as f64, s.j1 as f64, s.j2 as f64],
        Scenario::Marton3(s) => vec![
            s.m0 as f64,
            s.m1 as f64,
            s.m2 as f64,
            s.j1 as f64,
            s.j2 as f64,
        ],
        Scenario::BergerTung(s, _) => vec![s.m1 as f64, s.m2 as f64, s.j1 as f64, s.j2 as f64],
        Scenario::HeegardBergerKaspi(s, _) => vec![s.m1 as f64, s.m2 as f64, s.j2 as f64],
        Scenario::MultipleDescriptions(s, _) => vec![s.m1 as f64, s.m2 as f64, s.j0 as f64],
        Scenario::JsccMac => vec![],
    }
}

/// Reference value of the correct-decoding lower bound, written out term by
/// term from brute-force marginals.
pub fn reference_bound(inst: &Instance) -> f64 {
    let b = &inst.brute;
    let z = sizes_f(&inst.scenario);
    let ok = |o: &[usize]| inst.targets.iter().all(|t| b.target_ok(o, t));
    match inst.kind {
        Kind::P2p => {
            let m = z[0];
            b.expect(|o| 1.0 / (1.0 + (m - 1.0) * 2f64.powf(-b.iota(o, &["X"], &["Y"], &[]))))
        }
        Kind::Gp => {
            let (m, j) = (z[0], z[1]);
            b.expect(|o| {
                let a = 1.0 + 2f64.powf(b.iota(o, &["U"], &["S"], &[])) / j;
                let c = 1.0 + m * j * 2f64.powf(-b.iota(o, &["U"], &["Y"], &[]));
                1.0 / (a * c)
            })
        }
        Kind::Marton2 => {
            let (m1, m2, j1, j2) = (z[0], z[1], z[2], z[3]);
            b.expect(|o| {
                let a = 1.0 + 2f64.powf(b.iota(o, &["U1"], &["U2"], &[])) / (j1 * j2);
                let c1 = 1.0 + m1 * j1 * 2f64.powf(-b.iota(o, &["U1"], &["Y1"], &[]));
                let c2 = 1.0 + m2 * j2 * 2f64.powf(-b.iota(o, &["U2"], &["Y2"], &[]));
                1.0 / (a * c1 * c2)
            })
        }
        Kind::Marton3 => {
            let (m0, m1, m2, j1, j2) = (z[0], z[1], z[2], z[3], z[4]);
            b.expect(|o| {
                let a = 1.0 + 2f64.powf(b.iota(o, &["U1"], &["U2"], &["U0"])) / (j1 * j2);
                let c1 = 1.0
                    + m1 * j1 * 2f64.powf(-b.iota(o, &["U1"], &["Y1"], &["U0"]))
                    + m0 * j1 * m1 * 2f64.powf(-b.iota(o, &["U0", "U1"], &["Y1"], &[]));
                let c2 = 1.0
                    + m2 * j2 * 2f64.powf(-b.iota(o, &["U2"], &["Y2"], &["U0"]))
                    + m0 * j2 * m2 * 2f64.powf(-b.iota(o, &["U0", "U2"], &["Y2"], &[]));
                1.0 / (a * c1 * c2)
            })
        }
        Kind::BergerTung => {
            let (m1, m2, j1, j2) = (z[0], z[1], z[2], z[3]);
            b.expect(|o| {
                if !ok(o) {
                    return 0.0;
                }
                let a1 = 1.0 + 2f64.powf(b.iota(o, &["S1"], &["U1"], &[])) / j1;
                let a2 = 1.0 + 2f64.powf(b.iota(o, &["S2"], &["U2"], &[])) / j2;
                let c = 1.0
                    + (j2 / m2 + j1 / m1 + j1 * j2 / (m1 * m2))
                        * 2f64.powf(-b.iota(o, &["U1"], &["U2"], &[]));
                1.0 / (a1 * a2 * c)
            })
        }
        Kind::HbKaspi => {
            let (m1, m2, j2) = (z[0], z[1], z[2]);
            b.expect(|o| {
                if !ok(o) {
                    return 0.0;
                }
                let a = 1.0
                    + 2f64.powf(b.iota(o, &["S"], &["W"], &[])) / m1
                    + 2f64.powf(b.iota(o, &["S"], &["W", "U"], &[])) / (m1 * j2);
                let c = 1.0 + j2 / m2 * 2f64.powf(-b.iota(o, &["Y"], &["U"], &["W"]));
                1.0 / (a * c)
            })
        }
        Kind::Md => {
            let (m1, m2, j0) = (z[0], z[1], z[2]);
            b.expect(|o| {
                if !ok(o) {
                    return 0.0;
                }
                let d = 1.0
                    + 2f64.powf(b.iota(o, &["S"], &["U0"], &[])) / j0
                    + 2f64.powf(b.iota(o, &["S"], &["U0", "U1"], &[])) / m1
                    + 2f64.powf(b.iota(o, &["S"], &["U0", "U2"], &[])) / m2
                    + j0 / (m1 * m2)
                        * 2f64.powf(
                            b.iota(o, &["S"], &["U0", "U1", "U2"], &[])
                                + b.iota(o, &["U1"], &["U2"], &["U0"]),
                        );
                1.0 / d
            })
        }
        Kind::Jscc => {
            let terms = jscc_exponents(b);
            b.expect(|o| {
                let e = terms(o);
                1.0 / (1.0 + e.iter().map(|x| 2f64.powf(*x)).sum::<f64>())
            })
        }
    }
}

/// The four exponents `h - iota` of the JSCC bound at an outcome, with the
/// common part computed by transitive closure.
pub fn jscc_exponents(b: &Brute) -> impl Fn(&[usize]) -> [f64; 4] + '_ {
    let (p1, p2) = (b.pos("S1"), b.pos("S2"));
    let (n1, n2) = (b.shape[p1], b.shape[p2]);
    let support: Vec<Vec<bool>> = (0..n1)
        .map(|i| {
            (0..n2)
                .map(|j| b.prob(|c| c[p1] == i && c[p2] == j) > 0.0)
                .collect()
        })
        .collect();
    let labels = closure_labels(&support);
    let (pt, px1, px2, py) = (b.pos("T"), b.pos("X1"), b.pos("X2"), b.pos("Y"));
    move |o: &[usize]| {
        let k = labels[o[p1]];
        let same_k = |c: &[usize]| labels[c[p1]] == k;
        let p_k = b.prob(same_k);
        let p_s12 = b.marg(o, &["S1", "S2"]);
        let p_kt = b.prob(|c| same_k(c) && c[pt] == o[pt]);
        let p_ykt = b.prob(|c| same_k(c) && c[pt] == o[pt] && c[py] == o[py]);
        let p_xkt = b.prob(|c| same_k(c) && c[pt] == o[pt] && c[px1] == o[px1] && c[px2] == o[px2]);
        let p_yxkt = b.prob(|c| {
            same_k(c) && c[pt] == o[pt] && c[px1] == o[px1] && c[px2] == o[px2] && c[py] == o[py]
        });
        let i_k = (p_yxkt * p_kt / (p_xkt * p_ykt)).log2();
        [
            b.h(o, &["S1"], &["S2"]) - b.iota(o, &["Y"], &["X1"], &["X2", "S2", "T"]),
            b.h(o, &["S2"], &["S1"]) - b.iota(o, &["Y"], &["X2"], &["X1", "S1", "T"]),
            -(p_s12 / p_k).log2() - i_k,
            b.h(o, &["S1", "S2"], &[]) - b.iota(o, &["Y"], &["X1", "X2"], &[]),
        ]
    }
}

/// Reference loosened error bound at threshold `gamma`: probability that
/// some target is missed or some margin falls below `gamma`, plus the
/// scenario constant times `2^-gamma`.
pub fn reference_loosened(inst: &Instance, gamma: f64) -> Option<f64> {
    let b = &inst.brute;
    let z = sizes_f(&inst.scenario);
    let lg = |x: f64| x.log2();
    let jscc = (inst.kind == Kind::Jscc).then(|| jscc_exponents(b));
    let margins = |o: &[usize]| -> Vec<f64> {
        match inst.kind {
            Kind::P2p => vec![],
            Kind::Gp => vec![
                lg(z[1]) - b.iota(o, &["U"], &["S"], &[]),
                b.iota(o, &["U"], &["Y"], &[]) - lg(z[0] * z[1]),
            ],
            Kind::Marton2 => vec![
                lg(z[2] * z[3]) - b.iota(o, &["U1"], &["U2"], &[]),
                b.iota(o, &["U1"], &["Y1"], &[]) - lg(z[0] * z[2]),
                b.iota(o, &["U2"], &["Y2"], &[]) - lg(z[1] * z[3]),
            ],
            Kind::Marton3 => vec![
                lg(z[3] * z[4]) - b.iota(o, &["U1"], &["U2"], &["U0"]),
                b.iota(o, &["U1"], &["Y1"], &["U0"]) - lg(z[1] * z[3]),
                b.iota(o, &["U0", "U1"], &["Y1"], &[]) - lg(z[0] * z[1] * z[3]),
                b.iota(o, &["U2"], &["Y2"], &["U0"]) - lg(z[2] * z[4]),
                b.iota(o, &["U0", "U2"], &["Y2"], &[]) - lg(z[0] * z[2] * z[4]),
            ],
            Kind::BergerTung => vec![
                lg(z[2]) - b.iota(o, &["S1"], &["U1"], &[]),
                lg(z[3]) - b.iota(o, &["S2"], &["U2"], &[]),
                b.iota(o, &["U1"], &["U2"], &[]) - lg(z[2] * z[3] / (z[0] * z[1])),
            ],
            Kind::HbKaspi => vec![
                lg(z[0]) - b.iota(o, &["S"], &["W"], &[]),
                lg(z[0] * z[2]) - b.iota(o, &["S"], &["W", "U"], &[]),
                b.iota(o, &["Y"], &["U"], &["W"]) - lg(z[2] / z[1]),
            ],
            Kind::Md => vec![
                lg(z[2]) - b.iota(o, &["S"], &["U0"], &[]),
                lg(z[0]) - b.iota(o, &["S"], &["U0", "U1"], &[]),
                lg(z[1]) - b.iota(o, &["S"], &["U0", "U2"], &[]),
                lg(z[0] * z[1] / z[2])
                    - b.iota(o, &["S"], &["U0", "U1", "U2"], &[])
                    - b.iota(o, &["U1"], &["U2"], &["U0"]),
            ],
            Kind::Jscc => jscc.as_ref().unwrap()(o).iter().map(|x| -x).collect(),
        }
    };
    let c = match inst.kind {
        Kind::P2p => return None,
        Kind::Gp => 3.0,
        Kind::Marton2 => 7.0,
        Kind::Marton3 => 17.0,
        Kind::BergerTung => 15.0,
        Kind::HbKaspi => 5.0,
        Kind::Md | Kind::Jscc => 4.0,
    };
    let prob: f64 = b
        .cells
        .iter()
        .zip(&b.mass)
        .filter(|(_, &m)| m > 0.0)
        .filter(|(o, _)| {
            !inst.targets.iter().all(|t| b.target_ok(o, t))
                || margins(o).iter().any(|&x| x < gamma)
        })
        .map(|(_, m)| m)
        .sum();
    Some((prob + c * 2f64.powf(-gamma)).clamp(0.0, 1.0))
}
