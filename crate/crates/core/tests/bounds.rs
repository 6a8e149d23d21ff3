mod common;

use common::{instance, reference_bound, reference_loosened, Kind, ALL};
use oneshot::bounds::{evaluate, BoundError, BoundOptions};
use oneshot::pmf::{Alphabet, JointPmf, Role, Variable};
use oneshot::scenario::{GpSizes, P2pSizes, Scenario};
use proptest::prelude::*;
use std::sync::Arc;

const GAMMAS: [f64; 6] = [0.5, 1.0, 2.0, 3.0, 5.0, 8.0];

fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * b.abs().max(1e-300)
}

#[test]
fn every_scenario_matches_brute_force_reference() {
    for kind in ALL {
        for seed in 0..6 {
            let inst = instance(kind, seed);
            let res = evaluate(&inst.scenario, &inst.q, &GAMMAS, &BoundOptions::default())
                .unwrap_or_else(|e| panic!("{kind:?} seed {seed}: {e}"));
            let want = reference_bound(&inst);
            assert!(
                close(res.correct_lb, want, 1e-10),
                "{kind:?} seed {seed}: {} vs {want}",
                res.correct_lb
            );
            for g in &res.error_ub_by_gamma {
                if let Some(want) = reference_loosened(&inst, g.gamma) {
                    assert!(
                        close(g.error_ub, want, 1e-10),
                        "{kind:?} seed {seed} gamma {}: {} vs {want}",
                        g.gamma,
                        g.error_ub
                    );
                }
            }
        }
    }
}

fn binary(name: &str, role: Role) -> Variable {
    Variable::new(name, Arc::new(Alphabet::indexed(name, 2).unwrap()), role)
}

#[test]
fn noiseless_binary_two_messages() {
    let q = JointPmf::new(
        vec![binary("X", Role::Input), binary("Y", Role::Output)],
        vec![0.5, 0.0, 0.0, 0.5],
    )
    .unwrap();
    let res = evaluate(
        &Scenario::PointToPoint(P2pSizes { m: 2 }),
        &q,
        &[],
        &BoundOptions::default(),
    )
    .unwrap();
    assert!((res.correct_lb - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn gp_with_constant_state_and_single_bin() {
    // |S| = 1, J = 1: integrand is 1 / (2 (1 + M 2^-i(U;Y))).
    let u = binary("U", Role::Auxiliary);
    let s = Variable::new("S", Arc::new(Alphabet::indexed("S", 1).unwrap()), Role::State);
    let x = binary("X", Role::Input);
    let y = binary("Y", Role::Output);
    // U uniform, X = U, Y = BSC(0.2) of X
    let mut mass = vec![0.0; 8];
    for uu in 0..2 {
        for yy in 0..2 {
            mass[uu * 4 + uu * 2 + yy] = 0.5 * if uu == yy { 0.8 } else { 0.2 };
        }
    }
    let q = JointPmf::new(vec![u, s, x, y], mass).unwrap();
    let m = 3.0;
    let res = evaluate(
        &Scenario::GelfandPinsker(GpSizes { m: 3, j: 1 }),
        &q,
        &[],
        &BoundOptions::default(),
    )
    .unwrap();
    let f = |p: f64, ratio: f64| p / (2.0 * (1.0 + m / ratio));
    let want = f(0.8, 1.6) + f(0.2, 0.4);
    assert!((res.correct_lb - want).abs() < 1e-14);
}

#[test]
fn gp_factorization_violation_is_rejected_or_warned() {
    // Y depends on U directly, bypassing the channel input.
    let vars = vec![
        binary("U", Role::Auxiliary),
        binary("S", Role::State),
        binary("X", Role::Input),
        binary("Y", Role::Output),
    ];
    let mut mass = vec![0.0; 16];
    // U uniform independent of S, X = S, Y = U
    for uu in 0..2 {
        for ss in 0..2 {
            mass[uu * 8 + ss * 4 + ss * 2 + uu] = 0.25;
        }
    }
    let q = JointPmf::new(vars, mass).unwrap();
    let sc = Scenario::GelfandPinsker(GpSizes { m: 2, j: 1 });
    let err = evaluate(&sc, &q, &[1.0], &BoundOptions::default()).unwrap_err();
    assert!(matches!(err, BoundError::FactorizationViolation { .. }));
    let lenient = BoundOptions {
        enforce_factorization: false,
        ..BoundOptions::default()
    };
    let res = evaluate(&sc, &q, &[1.0], &lenient).unwrap();
    assert_eq!(res.warnings.len(), 1);
}

#[test]
fn nan_gamma_is_rejected() {
    let inst = instance(Kind::Gp, 1);
    assert!(evaluate(&inst.scenario, &inst.q, &[f64::NAN], &BoundOptions::default()).is_err());
}

fn with_sizes(s: &Scenario, scale: u64) -> Scenario {
    use Scenario::*;
    match s.clone() {
        PointToPoint(mut z) => {
            z.m *= scale;
            PointToPoint(z)
        }
        GelfandPinsker(mut z) => {
            z.m *= scale;
            GelfandPinsker(z)
        }
        Marton2(mut z) => {
            z.m1 *= scale;
            Marton2(z)
        }
        Marton3(mut z) => {
            z.m0 *= scale;
            Marton3(z)
        }
        other => other,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn more_messages_never_raise_the_channel_bound(seed in 0u64..10_000, k in 0usize..4, scale in 2u64..4) {
        let kind = [Kind::P2p, Kind::Gp, Kind::Marton2, Kind::Marton3][k];
        let inst = instance(kind, seed);
        let base = evaluate(&inst.scenario, &inst.q, &[], &BoundOptions::default()).unwrap();
        let big = evaluate(&with_sizes(&inst.scenario, scale), &inst.q, &[], &BoundOptions::default()).unwrap();
        prop_assert!(big.correct_lb <= base.correct_lb + 1e-15);
    }

    #[test]
    fn loosened_bound_dominates_complement(seed in 0u64..10_000, k in 1usize..8, gamma in 0.0f64..20.0) {
        let inst = instance(ALL[k], seed);
        let res = evaluate(&inst.scenario, &inst.q, &[gamma], &BoundOptions::default()).unwrap();
        prop_assert!(res.error_ub_by_gamma[0].error_ub >= 1.0 - res.correct_lb - 1e-12);
    }

    #[test]
    fn bound_lies_in_unit_interval(seed in 0u64..10_000, k in 0usize..8) {
        let inst = instance(ALL[k], seed);
        let res = evaluate(&inst.scenario, &inst.q, &[1.0], &BoundOptions::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&res.correct_lb));
    }

    #[test]
    fn relabeling_output_symbols_leaves_bound_unchanged(seed in 0u64..10_000, k in 0usize..5) {
        // swap labels 0 and 1 of the last variable (an output in these scenarios)
        let kind = [Kind::P2p, Kind::Gp, Kind::Marton2, Kind::Marton3, Kind::Jscc][k];
        let inst = instance(kind, seed);
        let last = *inst.q.shape().last().unwrap();
        let mass: Vec<f64> = (0..inst.q.len())
            .map(|i| {
                let y = i % last;
                let swapped = if y < 2 { i - y + (1 - y) } else { i };
                inst.q.mass()[swapped]
            })
            .collect();
        let q2 = JointPmf::new(inst.q.variables().to_vec(), mass).unwrap();
        let a = evaluate(&inst.scenario, &inst.q, &[2.0], &BoundOptions::default()).unwrap();
        let b = evaluate(&inst.scenario, &q2, &[2.0], &BoundOptions::default()).unwrap();
        prop_assert!((a.correct_lb - b.correct_lb).abs() < 1e-14);
        for (x, y) in a.error_ub_by_gamma.iter().zip(&b.error_ub_by_gamma) {
            prop_assert!((x.error_ub - y.error_ub).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_mass_symbol_leaves_bound_unchanged(seed in 0u64..10_000) {
        // pad Y with a symbol of probability zero
        let inst = instance(Kind::P2p, seed);
        let shape = inst.q.shape().to_vec();
        let (nx, ny) = (shape[0], shape[1]);
        let mut mass = vec![0.0; nx * (ny + 1)];
        for x in 0..nx {
            for y in 0..ny {
                mass[x * (ny + 1) + y] = inst.q.mass()[x * ny + y];
            }
        }
        let vars = vec![
            inst.q.variables()[0].clone(),
            Variable::new("Y", Arc::new(Alphabet::indexed("Y", ny + 1).unwrap()), Role::Output),
        ];
        let q2 = JointPmf::new(vars, mass).unwrap();
        let a = evaluate(&inst.scenario, &inst.q, &[], &BoundOptions::default()).unwrap();
        let b = evaluate(&inst.scenario, &q2, &[], &BoundOptions::default()).unwrap();
        prop_assert!((a.correct_lb - b.correct_lb).abs() < 1e-15);
    }
}
