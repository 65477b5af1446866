use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use witnesslab::oracle::{gaussian_op, haar_ket};
use witnesslab::states::{build_state, NoiseKind, ProductTerm, PureSOP, State, StateFamily};
use witnesslab::tensor::{SubsystemDims, C64};
use witnesslab::witness::{Engine, OperatorAssignment, OperatorChoice, WitnessReport};
use witnesslab::MixedEnsemble;

const ATOL: f64 = 1e-9;

fn both_paths(state: &State, ops: &OperatorAssignment) -> (WitnessReport, WitnessReport) {
    let fast = Engine::factorized().evaluate(state, ops, 1e-9).unwrap();
    let dense = Engine::dense().evaluate(state, ops, 1e-9).unwrap();
    (fast, dense)
}

fn assert_agree(label: &str, state: &State, ops: &OperatorAssignment) {
    let (f, d) = both_paths(state, ops);
    for (name, a, b) in [("lhs", f.lhs, d.lhs), ("rhs1", f.rhs1, d.rhs1), ("rhs2", f.rhs2, d.rhs2)] {
        assert!((a - b).abs() <= ATOL, "{label} {name}: factorized {a} vs dense {b}");
    }
}

fn family_cases(n: usize) -> Vec<StateFamily> {
    let mut thetas = vec![0.0; n];
    thetas[0] = PI / 4.0;
    vec![
        StateFamily::Ghz { n, theta: 0.4 },
        StateFamily::FlippedGhz { n, theta: 1.1 },
        StateFamily::TwoGroupGhz { n, l: 1, theta1: 0.7, theta2: 0.2 },
        StateFamily::TwoGroupGhz { n, l: n / 2, theta1: 0.3, theta2: 2.0 },
        StateFamily::LSeparable { n, l: 1, theta: 0.25, thetas: vec![0.6] },
        StateFamily::MixedSingleOut { n, theta: 0.15, thetas: (0..n).map(|i| 0.2 * i as f64).collect() },
        StateFamily::MixedSingleOut { n, theta: 0.05, thetas },
        StateFamily::NoisyGhz { n, theta: PI / 8.0, p: 0.8, noise: NoiseKind::White },
        StateFamily::NoisyGhz { n, theta: 0.3, p: 0.4, noise: NoiseKind::Ground },
    ]
}

fn check_family(fam: &StateFamily, choice: OperatorChoice) {
    let state = build_state(fam).unwrap();
    let ops = choice.assign(fam, state.dims()).unwrap();
    assert_agree(&format!("{fam:?} {choice:?}"), &state, &ops);
}

#[test]
fn qubit_families_small_n() {
    for n in 2..=7 {
        for fam in family_cases(n) {
            for choice in [OperatorChoice::Canonical, OperatorChoice::Raising] {
                check_family(&fam, choice);
            }
        }
    }
}

#[test]
fn bosonic_families() {
    for (n, x, cutoff) in [(2, 0.5, 40), (3, 0.3, 15), (4, 0.2, 7)] {
        check_family(&StateFamily::NModeSqueezed { n, x, cutoff: Some(cutoff) }, OperatorChoice::Annihilation);
    }
    for (x, cutoff) in [(0.05, 6), (0.02, 4)] {
        check_family(&StateFamily::ModifiedFourMode { x, cutoff: Some(cutoff) }, OperatorChoice::Annihilation);
    }
}

#[test]
fn largest_dense_dimension() {
    let n = 12;
    for fam in [
        StateFamily::Ghz { n, theta: 0.4 },
        StateFamily::LSeparable { n, l: 3, theta: 0.25, thetas: vec![0.6, 0.7, 0.8] },
        StateFamily::NoisyGhz { n, theta: 0.3, p: 0.7, noise: NoiseKind::White },
    ] {
        check_family(&fam, OperatorChoice::Canonical);
    }
}

fn random_state(dims: &SubsystemDims, terms: usize, mixed: bool, rng: &mut ChaCha8Rng) -> State {
    let pure = |rng: &mut ChaCha8Rng| {
        let t = (0..terms)
            .map(|_| {
                let locals = dims.as_slice().iter().map(|&d| haar_ket(d, rng)).collect();
                ProductTerm::new(C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)), locals)
            })
            .collect();
        PureSOP::new(dims.clone(), t).unwrap()
    };
    if mixed {
        let white = 0.3 * rng.random::<f64>();
        let pures = vec![pure(rng), pure(rng)];
        let w0 = rng.random::<f64>() * (1.0 - white);
        let w1 = 1.0 - white - w0;
        State::Mixed(MixedEnsemble::new(dims.clone(), vec![w0, w1], pures, white).unwrap())
    } else {
        State::Pure(pure(rng))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn random_sop_states(seed in any::<u64>(), n in 2usize..=4, terms in 1usize..=4, mixed in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = SubsystemDims::new((0..n).map(|_| rng.random_range(2..=4)).collect()).unwrap();
        let state = random_state(&dims, terms, mixed, &mut rng);
        let ops = OperatorAssignment::new(dims.as_slice().iter().map(|&d| gaussian_op(d, &mut rng)).collect()).unwrap();
        let (f, d) = both_paths(&state, &ops);
        let scale = f.rhs1.max(f.rhs2).max(f.lhs).max(1.0);
        prop_assert!((f.lhs - d.lhs).abs() <= ATOL * scale);
        prop_assert!((f.rhs1 - d.rhs1).abs() <= ATOL * scale);
        prop_assert!((f.rhs2 - d.rhs2).abs() <= ATOL * scale);
    }
}
