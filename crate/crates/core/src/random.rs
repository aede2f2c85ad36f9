//! Seeded random streams and random quantum objects.
//!
//! Every stochastic routine takes a [`Stream`]. Parallel work derives child
//! streams by index with [`Stream::substream`], so results depend only on
//! the seed and the work index, never on how work is scheduled.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::intervention::{povm_of, Intervention, Outcome};
use crate::linalg::{c, ComplexMatrix, C64};
use crate::povm::Povm;
use crate::state::{DensityMatrix, PureState};

/// A reproducible random stream identified by a 64-bit key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stream {
    key: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream {
            key: splitmix64(seed),
        }
    }

    /// Child stream number `index`. Distinct indices give independent
    /// streams; the same index always gives the same stream.
    pub fn substream(&self, index: u64) -> Stream {
        Stream {
            key: splitmix64(self.key ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03))),
        }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(self.key)
    }
}

/// Standard complex normal: real and imaginary parts N(0, 1/2).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let entries: Vec<C64> = (0..rows * cols).map(|_| complex_gaussian(rng)).collect();
    ComplexMatrix::from_row_major(rows, cols, entries).expect("finite gaussian entries")
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the
/// phases of `diag(R)` moved into `Q`.
pub fn random_haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    assert!(dim >= 1, "dimension must be at least 1");
    let z = ginibre(dim, dim, rng).into_dmatrix();
    let qr = z.qr();
    let q = qr.q();
    let r = qr.r();
    let mut out: DMatrix<C64> = q;
    for j in 0..dim {
        let d = r[(j, j)];
        let n = d.norm();
        let phase = if n > 0.0 { d / n } else { c(1.0, 0.0) };
        for i in 0..dim {
            out[(i, j)] *= phase;
        }
    }
    ComplexMatrix::from_dmatrix(out).expect("finite unitary")
}

/// Uniformly distributed unit vector in `C^dim` (a row of a Haar unitary).
pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..dim).map(|_| complex_gaussian(rng)).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

pub fn random_pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState {
    PureState::normalized(random_unit_vector(dim, rng)).expect("unit vector")
}

/// Random full-rank density matrix `G G^dagger / Tr(G G^dagger)`.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(dim, dim, rng);
    let m = &g * &g.adjoint();
    let tr = m.trace().re;
    crate::state::validate_density(m.scale_real(1.0 / tr).hermitian_part())
        .expect("valid by construction")
}

/// `rows x cols` matrix with orthonormal columns (`rows >= cols`):
/// the first `cols` columns of a Haar unitary.
pub fn random_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    assert!(rows >= cols);
    let u = random_haar_unitary(rows, rng);
    let view = u.as_dmatrix().columns(0, cols).into_owned();
    ComplexMatrix::from_dmatrix(view).expect("finite")
}

/// Random complete intervention. Outcome `k` is labeled `"k"`, has output
/// dimension `shapes[k].0` and `shapes[k].1` Kraus matrices; together they
/// are consecutive row blocks of one random isometry. Needs
/// `sum d * m >= input_dim`.
pub fn random_intervention<R: Rng + ?Sized>(
    input_dim: usize,
    shapes: &[(usize, usize)],
    rng: &mut R,
) -> Result<Intervention> {
    let rows: usize = shapes.iter().map(|&(d, m)| d * m).sum();
    if rows < input_dim {
        return Err(Error::InvalidArgument(format!(
            "{rows} Kraus rows cannot complete input dimension {input_dim}"
        )));
    }
    let v = random_isometry(rows, input_dim, rng);
    let mut offset = 0;
    let mut outcomes = Vec::with_capacity(shapes.len());
    for (k, &(d, m)) in shapes.iter().enumerate() {
        let kraus = (0..m)
            .map(|_| {
                let block = v.as_dmatrix().rows(offset, d).into_owned();
                offset += d;
                ComplexMatrix::from_dmatrix(block)
            })
            .collect::<Result<Vec<_>>>()?;
        outcomes.push(Outcome {
            label: k.to_string(),
            output_dim: d,
            kraus,
        });
    }
    Intervention::new(input_dim, outcomes)
}

/// Random POVM with `n` elements, labeled `"0".."n-1"`.
pub fn random_povm<R: Rng + ?Sized>(input_dim: usize, n: usize, rng: &mut R) -> Result<Povm> {
    let k = random_intervention(input_dim, &vec![(input_dim, 1); n], rng)?;
    povm_of(&k)
}
