//! Standard operators and measurements used by tests, bundled scenarios and
//! documentation.

use std::f64::consts::PI;

use crate::intervention::{Intervention, Outcome};
use crate::linalg::{c, ComplexMatrix, C64};
use crate::povm::{Povm, PovmElement};

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_complex_rows(&[&[c(0.0, 0.0), c(0.0, -1.0)], &[c(0.0, 1.0), c(0.0, 0.0)]])
        .unwrap()
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real_diagonal(&[1.0, -1.0])
}

/// Lowering operator `|0><1|`.
pub fn sigma_minus() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap()
}

pub fn basis_projector(dim: usize, k: usize) -> ComplexMatrix {
    let mut d = vec![0.0; dim];
    d[k] = 1.0;
    ComplexMatrix::from_real_diagonal(&d)
}

/// Real trine vectors `cos(k pi/3)|0> + sin(k pi/3)|1>`.
pub fn trine_vector(k: usize) -> [C64; 2] {
    let a = k as f64 * PI / 3.0;
    [c(a.cos(), 0.0), c(a.sin(), 0.0)]
}

/// Projective measurement in the computational basis, labels "0".."dim-1".
pub fn computational_pvm(dim: usize) -> Intervention {
    let outcomes = (0..dim)
        .map(|k| Outcome {
            label: k.to_string(),
            output_dim: dim,
            kraus: vec![basis_projector(dim, k)],
        })
        .collect();
    Intervention::new(dim, outcomes).expect("complete")
}

/// Same measurement expressed as a POVM.
pub fn computational_povm(dim: usize) -> Povm {
    let elements = (0..dim)
        .map(|k| PovmElement {
            label: k.to_string(),
            element: basis_projector(dim, k),
        })
        .collect();
    Povm::new(dim, elements).expect("complete")
}

/// Trine POVM `E_k = (2/3)|psi_k><psi_k|`.
pub fn trine_povm() -> Povm {
    let elements = (0..3)
        .map(|k| PovmElement {
            label: k.to_string(),
            element: ComplexMatrix::projector(&trine_vector(k)).scale_real(2.0 / 3.0),
        })
        .collect();
    Povm::new(2, elements).expect("complete")
}

/// Trine Kraus `A_k = sqrt(2/3)|psi_k><psi_k|`.
pub fn trine_intervention() -> Intervention {
    let outcomes = (0..3)
        .map(|k| Outcome {
            label: k.to_string(),
            output_dim: 2,
            kraus: vec![
                ComplexMatrix::projector(&trine_vector(k)).scale_real((2.0f64 / 3.0).sqrt())
            ],
        })
        .collect();
    Intervention::new(2, outcomes).expect("complete")
}

/// Amplitude damping as a single unrecorded outcome.
pub fn amplitude_damping(gamma: f64) -> Intervention {
    let a0 = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, (1.0 - gamma).sqrt()]]).unwrap();
    let a1 = sigma_minus().scale_real(gamma.sqrt());
    Intervention::new(
        2,
        vec![Outcome {
            label: "damp".into(),
            output_dim: 2,
            kraus: vec![a0, a1],
        }],
    )
    .expect("complete")
}

/// Depolarizing channel with Kraus `sqrt(1-3p/4) I`, `sqrt(p/4) sigma_i`.
pub fn depolarizing(p: f64) -> Intervention {
    let w0 = (1.0 - 0.75 * p).sqrt();
    let w = (p / 4.0).sqrt();
    Intervention::new(
        2,
        vec![Outcome {
            label: "depolarize".into(),
            output_dim: 2,
            kraus: vec![
                ComplexMatrix::identity(2).scale_real(w0),
                pauli_x().scale_real(w),
                pauli_y().scale_real(w),
                pauli_z().scale_real(w),
            ],
        }],
    )
    .expect("complete")
}

pub fn identity_intervention(dim: usize) -> Intervention {
    Intervention::new(
        dim,
        vec![Outcome {
            label: "id".into(),
            output_dim: dim,
            kraus: vec![ComplexMatrix::identity(dim)],
        }],
    )
    .expect("complete")
}

/// Measurement in the basis `{cos(theta)|0> + sin(theta)|1>, -sin(theta)|0> + cos(theta)|1>}`.
pub fn rotated_pvm(theta: f64) -> Intervention {
    let v0 = [c(theta.cos(), 0.0), c(theta.sin(), 0.0)];
    let v1 = [c(-theta.sin(), 0.0), c(theta.cos(), 0.0)];
    Intervention::new(
        2,
        vec![
            Outcome {
                label: "0".into(),
                output_dim: 2,
                kraus: vec![ComplexMatrix::projector(&v0)],
            },
            Outcome {
                label: "1".into(),
                output_dim: 2,
                kraus: vec![ComplexMatrix::projector(&v1)],
            },
        ],
    )
    .expect("complete")
}

/// Computational measurement that discards the system: single-row Kraus
/// `<k|`, so each conditional state is a 1x1 matrix holding the outcome
/// probability.
pub fn full_discard_measurement(dim: usize) -> Intervention {
    let outcomes = (0..dim)
        .map(|k| {
            let mut row = vec![c(0.0, 0.0); dim];
            row[k] = c(1.0, 0.0);
            Outcome {
                label: k.to_string(),
                output_dim: 1,
                kraus: vec![ComplexMatrix::from_row_major(1, dim, row).unwrap()],
            }
        })
        .collect();
    Intervention::new(dim, outcomes).expect("complete")
}

/// Bell-basis measurement on two qubits that discards both: four outcomes,
/// each with a single-row Kraus `<Bell_k|`.
pub fn bell_discard_measurement() -> Intervention {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let rows: [(&str, [f64; 4]); 4] = [
        ("phi+", [s, 0.0, 0.0, s]),
        ("phi-", [s, 0.0, 0.0, -s]),
        ("psi+", [0.0, s, s, 0.0]),
        ("psi-", [0.0, s, -s, 0.0]),
    ];
    let outcomes = rows
        .iter()
        .map(|(label, r)| Outcome {
            label: (*label).into(),
            output_dim: 1,
            kraus: vec![ComplexMatrix::from_real_rows(&[r]).unwrap()],
        })
        .collect();
    Intervention::new(4, outcomes).expect("complete")
}
