use proptest::prelude::*;
use rand::Rng;

use quantum_intervention::dilation::{
    complete_to_unitary, discard, isometry_from_kraus, isometry_matrix, kraus_from_povm,
    premeasure, Dilation,
};
use quantum_intervention::fixtures::{computational_pvm, rotated_pvm, trine_intervention};
use quantum_intervention::intervention::{
    apply_nonselective, apply_selective, compose, outcome_probabilities, povm_of, Outcome,
};
use quantum_intervention::linalg::{c, psd_sqrt, tensor, ComplexMatrix};
use quantum_intervention::lindblad::{integrate, lindblad_rhs, LindbladGenerator};
use quantum_intervention::random::{
    ginibre, random_density, random_intervention, random_pure_state, Stream,
};
use quantum_intervention::scenario::bundled;
use quantum_intervention::state::{partial_trace, validate_density, DensityMatrix, PureState};
use quantum_intervention::{AdaptiveIntervention, Error, Intervention};

fn shapes<R: Rng>(
    rng: &mut R,
    max_in: usize,
    max_out: usize,
    max_outcomes: usize,
    max_mult: usize,
) -> (usize, Vec<(usize, usize)>) {
    loop {
        let d = rng.random_range(1..=max_in);
        let n = rng.random_range(1..=max_outcomes);
        let s: Vec<(usize, usize)> = (0..n)
            .map(|_| {
                (
                    rng.random_range(1..=max_out),
                    rng.random_range(1..=max_mult),
                )
            })
            .collect();
        if s.iter().map(|&(o, m)| o * m).sum::<usize>() >= d {
            return (d, s);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tensor_is_associative(seed in any::<u64>()) {
        let mut rng = Stream::new(seed).rng();
        let dims: Vec<(usize, usize)> = (0..3).map(|_| (rng.random_range(1..=3), rng.random_range(1..=3))).collect();
        let [a, b, cm] = [0, 1, 2].map(|i| ginibre(dims[i].0, dims[i].1, &mut rng));
        let left = tensor(&tensor(&a, &b).unwrap(), &cm).unwrap();
        let right = tensor(&a, &tensor(&b, &cm).unwrap()).unwrap();
        prop_assert_eq!(left.shape(), right.shape());
        prop_assert!(left.max_abs_diff(&right) < 1e-14);
    }

    #[test]
    fn partial_trace_of_product(seed in any::<u64>()) {
        let mut rng = Stream::new(seed).rng();
        let (da, db) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let ra = random_density(da, &mut rng);
        let rb = random_density(db, &mut rng);
        let joint = validate_density(tensor(ra.matrix(), rb.matrix()).unwrap()).unwrap();
        let a = partial_trace(&joint, &[da, db], &[0]).unwrap();
        let b = partial_trace(&joint, &[da, db], &[1]).unwrap();
        prop_assert!(a.matrix().max_abs_diff(ra.matrix()) < 1e-10);
        prop_assert!(b.matrix().max_abs_diff(rb.matrix()) < 1e-10);
    }

    #[test]
    fn psd_sqrt_squares_back(seed in any::<u64>(), dim in 1usize..=32) {
        let mut rng = Stream::new(seed).rng();
        let g = ginibre(dim, dim, &mut rng);
        let p = &g * &g.adjoint();
        let r = psd_sqrt(&p).unwrap();
        prop_assert!(r.is_hermitian());
        prop_assert!((&r * &r).max_abs_diff(&p) < 1e-9 * p.max_abs().max(1.0));
    }

    #[test]
    fn validation_is_idempotent(seed in any::<u64>(), dim in 1usize..=6) {
        let mut rng = Stream::new(seed).rng();
        let rho = random_density(dim, &mut rng);
        let again = validate_density(rho.matrix().clone()).unwrap();
        prop_assert_eq!(again, rho);
    }

    #[test]
    fn probabilities_sum_to_one(seed in any::<u64>()) {
        let mut rng = Stream::new(seed).rng();
        let (d, s) = shapes(&mut rng, 6, 6, 4, 3);
        let k = random_intervention(d, &s, &mut rng).unwrap();
        let rho = random_density(d, &mut rng);
        let traces: f64 = k.outcomes().iter().map(|o| apply_selective(&k, &rho, &o.label).unwrap().trace_norm()).sum();
        prop_assert!((traces - 1.0).abs() < 1e-9);
    }

    #[test]
    fn nonselective_is_linear(seed in any::<u64>(), alpha in 0.0f64..=1.0) {
        let mut rng = Stream::new(seed).rng();
        let d: usize = rng.random_range(1..=5);
        let out = rng.random_range(d.div_ceil(3)..=5);
        let k = random_intervention(d, &[(out, 2), (out, 1)], &mut rng).unwrap();
        let (r1, r2) = (random_density(d, &mut rng), random_density(d, &mut rng));
        let mix = validate_density(&r1.matrix().scale_real(alpha) + &r2.matrix().scale_real(1.0 - alpha)).unwrap();
        let lhs = apply_nonselective(&k, &mix).unwrap();
        let o1 = apply_nonselective(&k, &r1).unwrap();
        let o2 = apply_nonselective(&k, &r2).unwrap();
        let rhs = &o1.matrix().scale_real(alpha) + &o2.matrix().scale_real(1.0 - alpha);
        prop_assert!(lhs.matrix().max_abs_diff(&rhs) < 1e-10);
        prop_assert!((lhs.trace_norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn composed_effects_match_direct_formula(seed in any::<u64>()) {
        // E_{nu mu} = sum_m A_{mu m}^dagger (sum_n B_{nu mu n}^dagger B_{nu mu n}) A_{mu m}
        let mut rng = Stream::new(seed).rng();
        let (d, s) = shapes(&mut rng, 4, 4, 3, 2);
        let a = random_intervention(d, &s, &mut rng).unwrap();
        let b = AdaptiveIntervention::new(
            a.outcomes()
                .iter()
                .map(|o| {
                    let n = rng.random_range(1..=3);
                    let out = rng.random_range(1..=3);
                    let mult = o.output_dim.div_ceil(n * out);
                    let k = random_intervention(o.output_dim, &vec![(out, mult); n], &mut rng).unwrap();
                    (o.label.clone(), k)
                })
                .collect(),
        )
        .unwrap();
        let composed = povm_of(&compose(&b, &a).unwrap()).unwrap();
        for oa in a.outcomes() {
            let kb = b.lookup(&oa.label).unwrap();
            for ob in kb.outcomes() {
                let inner = ob.kraus.iter().fold(ComplexMatrix::zeros(oa.output_dim, oa.output_dim), |acc, m| &acc + &(&m.adjoint() * m));
                let direct = oa.kraus.iter().fold(ComplexMatrix::zeros(d, d), |acc, m| &acc + &(&(&m.adjoint() * &inner) * m));
                let label = format!("{}.{}", ob.label, oa.label);
                let got = composed.get(&label).unwrap();
                prop_assert!(got.max_abs_diff(&direct) < 1e-9);
            }
        }
    }

    #[test]
    fn premeasure_then_discard_is_selective(seed in any::<u64>()) {
        let mut rng = Stream::new(seed).rng();
        let (d, s) = shapes(&mut rng, 8, 8, 4, 3);
        let k = random_intervention(d, &s, &mut rng).unwrap();
        let dil = isometry_from_kraus(&k).unwrap();
        let psi = random_pure_state(d, &mut rng);
        let composite = premeasure(&dil, &psi).unwrap();
        let probs = outcome_probabilities(&k, &psi.density()).unwrap();
        for ((label, weight), (_, p)) in composite.block_weights().into_iter().zip(probs) {
            prop_assert!((weight - p).abs() < 1e-9);
            let via = discard(&composite, &label).unwrap();
            let direct = apply_selective(&k, &psi.density(), &label).unwrap();
            prop_assert!(via.matrix().max_abs_diff(direct.matrix()) < 1e-10);
        }
    }

    #[test]
    fn kraus_round_trip_with_random_paddings(seed in any::<u64>()) {
        // any isometric padding S_mu (rows >= d) keeps the POVM
        let mut rng = Stream::new(seed).rng();
        let d = rng.random_range(1..=4);
        let k = random_intervention(d, &[(d, 1), (d, 1), (d, 1)], &mut rng).unwrap();
        let p = povm_of(&k).unwrap();
        let paddings = p
            .elements()
            .iter()
            .map(|e| {
                let rows = rng.random_range(d..=d + 2);
                (e.label.clone(), vec![quantum_intervention::random::random_isometry(rows, d, &mut rng)])
            })
            .collect();
        let back = povm_of(&kraus_from_povm(&p, Some(&paddings)).unwrap()).unwrap();
        prop_assert!(back.max_deviation(&p).unwrap() < 1e-9);
    }

    #[test]
    fn completion_extends_dilation(seed in any::<u64>()) {
        let mut rng = Stream::new(seed).rng();
        let (d, s) = shapes(&mut rng, 4, 3, 3, 2);
        let k = random_intervention(d, &s, &mut rng).unwrap();
        let dil = isometry_from_kraus(&k).unwrap();
        let u = complete_to_unitary(&dil).unwrap();
        prop_assert!(u.is_square());
        prop_assert!(u.row_orthonormality_deviation() < 1e-9);
        for r in 0..d {
            for j in 0..u.cols() {
                prop_assert!((u.get(r, j) - dil.matrix().get(r, j)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rhs_hermitian_and_traceless(seed in any::<u64>()) {
        let mut rng = Stream::new(seed).rng();
        let d = rng.random_range(1..=4);
        let h = ginibre(d, d, &mut rng);
        let h = (&h + &h.adjoint()).scale_real(0.5);
        let jumps = (0..rng.random_range(0..=3)).map(|_| ginibre(d, d, &mut rng)).collect();
        let g = LindbladGenerator::new(d, h, jumps).unwrap();
        let out = lindblad_rhs(&g, &random_density(d, &mut rng)).unwrap();
        prop_assert!(out.hermiticity_deviation() < 1e-12);
        prop_assert!(out.trace().norm() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn integration_keeps_trace_and_positivity(seed in any::<u64>()) {
        let mut rng = Stream::new(seed).rng();
        let d = rng.random_range(2..=3);
        let h = ginibre(d, d, &mut rng);
        let h = (&h + &h.adjoint()).scale_real(0.5);
        let jumps: Vec<ComplexMatrix> = (0..2).map(|_| ginibre(d, d, &mut rng).scale_real(0.5)).collect();
        let scale = h.max_abs() + jumps.iter().map(|v| (&v.adjoint() * v).max_abs()).sum::<f64>();
        let g = LindbladGenerator::new(d, h, jumps).unwrap();
        let rho = integrate(&g, &random_density(d, &mut rng), 10.0 / scale, 1e-2 / scale).unwrap();
        prop_assert!((rho.trace_norm() - 1.0).abs() < 1e-8);
        prop_assert!(rho.min_eigenvalue() >= -1e-7);
    }
}

#[test]
fn isometry_only_for_complete_interventions() {
    let scaled = Intervention::new_incomplete(
        2,
        trine_intervention()
            .outcomes()
            .iter()
            .map(|o| Outcome {
                kraus: o.kraus.iter().map(|k| k.scale_real(0.9)).collect(),
                ..o.clone()
            })
            .collect(),
    )
    .unwrap();
    let (columns, matrix) = isometry_matrix(&scaled);
    assert!((matrix.row_orthonormality_deviation() - 0.19).abs() < 1e-12);
    assert!(matches!(
        Dilation::new(2, columns, matrix),
        Err(Error::NotIsometry { .. })
    ));
    assert!(isometry_from_kraus(&scaled).is_err());
    let (_, m) = isometry_matrix(&trine_intervention());
    assert!(m.row_orthonormality_deviation() < 1e-12);
}

#[test]
fn premeasure_weights_for_fixtures() {
    let stream = Stream::new(55);
    for k in [computational_pvm(2), trine_intervention(), rotated_pvm(0.3)] {
        let dil = isometry_from_kraus(&k).unwrap();
        let povm = povm_of(&k).unwrap();
        for i in 0..100 {
            let psi = random_pure_state(2, &mut stream.substream(i).rng());
            let weights = premeasure(&dil, &psi).unwrap().block_weights();
            for ((_, w), (_, p)) in weights
                .iter()
                .zip(povm.probabilities(&psi.density()).unwrap())
            {
                assert!((w - p).abs() < 1e-9);
            }
        }
    }
}

fn on_first(k: &Intervention) -> Intervention {
    lift(k, |a| tensor(a, &ComplexMatrix::identity(2)).unwrap())
}

fn on_second(k: &Intervention) -> Intervention {
    lift(k, |a| tensor(&ComplexMatrix::identity(2), a).unwrap())
}

fn lift(k: &Intervention, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Intervention {
    Intervention::new(
        4,
        k.outcomes()
            .iter()
            .map(|o| Outcome {
                label: o.label.clone(),
                output_dim: 4,
                kraus: o.kraus.iter().map(&f).collect(),
            })
            .collect(),
    )
    .unwrap()
}

/// Basis angle chosen from the record so far.
fn angle(round: usize, record: &str) -> f64 {
    let ones = record.matches('1').count() as f64;
    0.2 * round as f64 + std::f64::consts::PI / 8.0 * (1.0 + ones)
}

#[test]
fn four_round_adaptive_exchange() {
    // Alice, Bob, Alice, Bob, each choosing a basis from all earlier outcomes.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi = PureState::new(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]).unwrap();
    let mut chain = on_first(&rotated_pvm(angle(0, "")));
    for round in 1..4 {
        let branches = chain
            .outcomes()
            .iter()
            .map(|o| {
                let local = rotated_pvm(angle(round, &o.label));
                let lifted = if round % 2 == 0 {
                    on_first(&local)
                } else {
                    on_second(&local)
                };
                (o.label.clone(), lifted)
            })
            .collect();
        chain = compose(&AdaptiveIntervention::new(branches).unwrap(), &chain).unwrap();
    }
    assert!(chain.completeness_deviation() < 1e-12);
    assert_eq!(chain.outcomes().len(), 16);

    // oracle: multiply the chosen projectors on the state vector directly
    let probs = outcome_probabilities(&chain, &psi.density()).unwrap();
    let mut total = 0.0;
    for (label, p) in probs {
        let outcomes: Vec<&str> = label.split('.').rev().collect();
        let mut v = psi.amplitudes().to_vec();
        let mut record = String::new();
        for (round, r) in outcomes.iter().enumerate() {
            let theta = angle(round, &record);
            let basis = rotated_pvm(theta);
            let proj = &basis.outcome(r).unwrap().kraus[0];
            let full = if round % 2 == 0 {
                tensor(proj, &ComplexMatrix::identity(2)).unwrap()
            } else {
                tensor(&ComplexMatrix::identity(2), proj).unwrap()
            };
            v = (0..4)
                .map(|i| (0..4).map(|j| full.get(i, j) * v[j]).sum())
                .collect();
            record = if record.is_empty() {
                r.to_string()
            } else {
                format!("{r}.{record}")
            };
        }
        let oracle: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        assert!((p - oracle).abs() < 1e-12, "{label}: {p} vs {oracle}");
        total += p;
    }
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn sampling_error_shrinks_like_inverse_sqrt_shots() {
    // averaged TV at 1e3, 1e4, 1e5 shots; slope of log TV vs log shots ~ -1/2
    let scenario = bundled("two-observer").unwrap();
    let shots = [1_000u64, 10_000, 100_000];
    let mean_tv: Vec<f64> = shots
        .iter()
        .map(|&n| {
            (0..6)
                .map(|seed| {
                    scenario
                        .sample(Some(n), Some(seed))
                        .unwrap()
                        .total_variation()
                })
                .sum::<f64>()
                / 6.0
        })
        .collect();
    let slope = (mean_tv[2].ln() - mean_tv[0].ln()) / (100f64.ln());
    assert!((slope + 0.5).abs() < 0.15, "slope {slope}, {mean_tv:?}");
    for (tv, n) in mean_tv.iter().zip(shots) {
        // E[TV] ~ 0.75 / sqrt(n) for this record distribution
        let scaled = tv * (n as f64).sqrt();
        assert!((0.3..1.5).contains(&scaled), "{scaled}");
    }
}

#[test]
fn sampling_is_independent_of_thread_count() {
    let scenario = bundled("two-observer").unwrap();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let four = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let a = one.install(|| scenario.sample(Some(20_000), Some(3)).unwrap().to_csv());
    let b = four.install(|| scenario.sample(Some(20_000), Some(3)).unwrap().to_csv());
    assert_eq!(a, b);
}

#[test]
fn json_round_trips() {
    let mut rng = Stream::new(9).rng();
    let k = random_intervention(3, &[(2, 2), (1, 3)], &mut rng).unwrap();
    let back: Intervention = serde_json::from_str(&serde_json::to_string(&k).unwrap()).unwrap();
    assert_eq!(back, k);
    let rho: DensityMatrix = random_density(3, &mut rng);
    let back: DensityMatrix = serde_json::from_str(&serde_json::to_string(&rho).unwrap()).unwrap();
    assert_eq!(back, rho);
    let dil = isometry_from_kraus(&k).unwrap();
    let back: Dilation = serde_json::from_str(&serde_json::to_string(&dil).unwrap()).unwrap();
    assert_eq!(back, dil);
}
