//! Shared helpers for unit tests: a tiny deterministic RNG, random matrix
//! generators, and an independent Gauss-Jordan inverse used as a solve oracle.

use crate::linalg::Matrix;

/// SplitMix64 generator; self-contained so test fixtures never depend on the
/// production sampling path.
pub struct Rng64 {
    state: u64,
}

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed.wrapping_add(0x9e3779b97f4a7c15),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [-1, 1).
    pub fn symmetric(&mut self) -> f64 {
        2.0 * self.uniform() - 1.0
    }
}

pub fn random_matrix(rng: &mut Rng64, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.symmetric())
}

/// Random symmetric positive semi-definite matrix (a Gram matrix).
pub fn random_psd(rng: &mut Rng64, n: usize) -> Matrix {
    let x = random_matrix(rng, n, n + 2);
    x.matmul(&x.transpose())
}

pub fn assert_close(got: f64, want: f64, tol: f64) {
    assert!(
        (got - want).abs() <= tol * want.abs().max(1.0),
        "got {got}, want {want} (tol {tol})"
    );
}

/// Dense inverse by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(m: &Matrix) -> Matrix {
    assert!(m.is_square());
    let n = m.rows();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = m.row(i).to_vec();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())
            .unwrap();
        assert!(a[pivot][col].abs() > 0.0, "singular matrix in oracle");
        a.swap(pivot, col);
        let scale = a[col][col];
        for v in a[col].iter_mut() {
            *v /= scale;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col];
            if factor == 0.0 {
                continue;
            }
            for c in 0..2 * n {
                let v = a[col][c];
                a[row][c] -= factor * v;
            }
        }
    }
    Matrix::from_fn(n, n, |i, j| a[i][n + j])
}
