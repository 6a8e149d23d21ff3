mod common;

use common::{closure_labels, rand_pmf};
use oneshot::pmf::{common_part, ConditionalKernel, JointPmf, PmfError, Role, Variable};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn var(name: &str, n: usize) -> Variable {
    Variable::indexed(name, n, Role::Auxiliary).unwrap()
}

fn random_joint(seed: u64, shape: &[usize], sparse: bool) -> JointPmf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = ["A", "B", "C", "D"];
    let vars = shape
        .iter()
        .zip(names)
        .map(|(&n, name)| var(name, n))
        .collect();
    JointPmf::new(vars, rand_pmf(&mut rng, shape.iter().product(), sparse)).unwrap()
}

/// Marginal over a subset of positions, summed cell by cell.
fn brute_marginal(p: &JointPmf, keep: &[usize]) -> Vec<f64> {
    let sub: Vec<usize> = keep.iter().map(|&k| p.shape()[k]).collect();
    let mut out = vec![0.0; sub.iter().product()];
    for flat in 0..p.len() {
        let o = p.outcome_at(flat);
        let idx = keep
            .iter()
            .zip(&sub)
            .fold(0, |acc, (&k, &n)| acc * n + o[k]);
        out[idx] += p.mass()[flat];
    }
    out
}

fn shape_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..4, 2..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn marginals_agree_with_brute_force(seed in any::<u64>(), shape in shape_strategy(), mask in 1u32..16) {
        let p = random_joint(seed, &shape, true);
        let keep: Vec<usize> = (0..shape.len()).filter(|i| mask & (1 << i) != 0).collect();
        prop_assume!(!keep.is_empty());
        let names: Vec<&str> = keep.iter().map(|&k| p.variables()[k].name()).collect();
        let m = p.marginalize(&names).unwrap();
        let want = brute_marginal(&p, &keep);
        for (a, b) in m.mass().iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-15);
        }
        let total: f64 = m.mass().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nested_marginalization_is_consistent(seed in any::<u64>(), shape in shape_strategy()) {
        let p = random_joint(seed, &shape, true);
        let names = p.variable_names();
        let all_but_last = p.marginalize(&names[..names.len() - 1]).unwrap();
        let direct = p.marginalize(&names[..1]).unwrap();
        let nested = all_but_last.marginalize(&names[..1]).unwrap();
        for (a, b) in direct.mass().iter().zip(nested.mass()) {
            prop_assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn conditional_times_marginal_recovers_joint(seed in any::<u64>(), shape in shape_strategy()) {
        let p = random_joint(seed, &shape, true);
        let names = p.variable_names();
        let (given, produced) = names.split_at(1);
        let kernel = p.conditional(produced, given).unwrap();
        let rebuilt = p.marginalize(given).unwrap().compose(&kernel).unwrap();
        for (a, b) in rebuilt.mass().iter().zip(p.mass()) {
            prop_assert!((a - b).abs() < 1e-15);
        }
        prop_assert!(p.factorization_gap(&[(produced, given), (given, &[])]).unwrap() < 1e-15);
    }

    #[test]
    fn reorder_permutes_cells(seed in any::<u64>(), a in 1usize..4, b in 1usize..4) {
        let p = random_joint(seed, &[a, b], false);
        let r = p.reorder(&["B", "A"]).unwrap();
        for i in 0..a {
            for j in 0..b {
                prop_assert_eq!(p.prob(&[i, j]).unwrap(), r.prob(&[j, i]).unwrap());
            }
        }
    }

    #[test]
    fn common_part_matches_transitive_closure(seed in any::<u64>(), a in 1usize..7, b in 1usize..7, density in 0.05f64..0.6) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut support = vec![vec![false; b]; a];
        let mut mass = vec![0.0; a * b];
        for i in 0..a {
            for j in 0..b {
                if rng.random::<f64>() < density {
                    support[i][j] = true;
                    mass[i * b + j] = 1.0;
                }
            }
        }
        if mass.iter().all(|&m| m == 0.0) {
            support[0][0] = true;
            mass[0] = 1.0;
        }
        let total: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|m| *m /= total);
        let p = JointPmf::new(vec![var("A", a), var("B", b)], mass).unwrap();
        let cp = common_part(&p, "A", "B").unwrap();
        let reference = closure_labels(&support);
        let labels: Vec<usize> = cp.first.iter().chain(&cp.second).copied().collect();
        // same partition: labels agree iff reference classes agree
        for x in 0..a + b {
            for y in 0..a + b {
                prop_assert_eq!(labels[x] == labels[y], reference[x] == reference[y]);
            }
        }
        let classes: std::collections::BTreeSet<usize> = reference.iter().copied().collect();
        prop_assert_eq!(cp.count, classes.len());
    }
}

#[test]
fn rejects_malformed_tables() {
    let vars = || vec![var("A", 2), var("B", 2)];
    assert!(matches!(
        JointPmf::new(vars(), vec![0.5, 0.5, 0.5, -0.5]),
        Err(PmfError::NegativeMass { .. })
    ));
    assert!(matches!(
        JointPmf::new(vars(), vec![0.5, 0.5, 0.5, 0.5]),
        Err(PmfError::NotNormalized { .. })
    ));
    assert!(matches!(
        JointPmf::new(vars(), vec![0.5, 0.5]),
        Err(PmfError::ShapeMismatch { .. })
    ));
    assert!(matches!(
        JointPmf::new(vec![var("A", 2), var("A", 2)], vec![0.25; 4]),
        Err(PmfError::DuplicateVariable(_))
    ));
    assert!(matches!(
        JointPmf::new(vars(), vec![f64::NAN, 0.5, 0.25, 0.25]),
        Err(PmfError::NonFiniteMass { .. })
    ));
}

#[test]
fn compose_rejects_unknown_and_colliding_variables() {
    let p = random_joint(1, &[2, 2], false);
    let k = ConditionalKernel::new(vec![var("Z", 2)], vec![var("C", 2)], vec![0.5; 4]).unwrap();
    assert!(matches!(p.compose(&k), Err(PmfError::UnknownVariable(_))));
    let k = ConditionalKernel::new(vec![var("A", 2)], vec![var("B", 2)], vec![0.5; 4]).unwrap();
    assert!(matches!(p.compose(&k), Err(PmfError::VariableCollision(_))));
}

#[test]
fn kernel_rows_must_be_stochastic() {
    let r = ConditionalKernel::new(vec![var("A", 2)], vec![var("B", 2)], vec![0.5, 0.5, 0.9, 0.2]);
    assert!(matches!(r, Err(PmfError::NotStochastic { .. })));
}

#[test]
fn deterministic_kernel_roundtrips_its_map() {
    let k = ConditionalKernel::deterministic(vec![var("A", 3)], var("B", 2), |o| o[0] % 2).unwrap();
    assert_eq!(k.deterministic_map(), Some(vec![0, 1, 0]));
}

#[test]
fn sampling_frequencies_match_mass() {
    let p = random_joint(7, &[2, 3], false);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sampler = p.sampler();
    let n = 200_000;
    let mut counts = vec![0usize; p.len()];
    for _ in 0..n {
        counts[sampler.sample(&mut rng)] += 1;
    }
    for (c, m) in counts.iter().zip(p.mass()) {
        let freq = *c as f64 / n as f64;
        assert!((freq - m).abs() < 5.0 * (m * (1.0 - m) / n as f64).sqrt() + 1e-9);
    }
}
