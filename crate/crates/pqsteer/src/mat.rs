//! Dense complex matrices and the linear-algebra primitives the rest of the
//! crate is built on: Kronecker products, partial traces over tensor factors,
//! Hermitian eigendecomposition (cyclic Jacobi), PSD checks and PSD spectral
//! powers with pseudo-inverse semantics.
//!
//! Everything here is double precision and dense; the operator dimensions in
//! this crate stay small (≤ 64 or so), where Jacobi is both simple and very
//! accurate.

use num_complex::Complex64;
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default tolerance for feasibility-type checks (PSD, normalization,
/// no-signalling).
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Default tolerance for exact algebraic identities.
pub const ALGEBRAIC_TOL: f64 = 1e-12;

/// Relative spectral cutoff: eigenvalues below `RANK_CUTOFF * lambda_max` are
/// treated as zero when taking spectral powers, so negative powers act as
/// pseudo-inverses on the numerical support.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from real entries, row-major.
    pub fn from_real(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        Self::from_fn(dim, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// Projector |v⟩⟨v| (the vector need not be normalized; no normalization
    /// is applied).
    pub fn outer(v: &[C64]) -> Self {
        let dim = v.len();
        Self::from_fn(dim, |i, j| v[i] * v[j].conj())
    }

    /// Projector onto the computational basis state |k⟩.
    pub fn basis_projector(dim: usize, k: usize) -> Self {
        let mut m = Self::zeros(dim);
        m[(k, k)] = C64::new(1.0, 0.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix add: dimension mismatch");
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix sub: dimension mismatch");
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.scale_complex(C64::new(s, 0.0))
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul: dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.data[i * n + k];
                if aik == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += aik * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| self.data[j * n + i])
    }

    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|a| a.conj()).collect(),
        }
    }

    pub fn dagger(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| self.data[j * n + i].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// tr(self · other) without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        assert_eq!(self.dim, other.dim, "trace_product: dimension mismatch");
        let n = self.dim;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.data[i * n + j] * other.data[j * n + i];
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "max_abs_diff: dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// max |M - M†| over entries.
    pub fn hermitian_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_residual() <= tol
    }

    /// Hermitian part (M + M†)/2.
    pub fn symmetrize(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| {
            (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5
        })
    }

    /// Kronecker product; the left factor indexes the coarse blocks.
    pub fn kron(&self, other: &Self) -> Self {
        let (da, db) = (self.dim, other.dim);
        let n = da * db;
        let mut out = Self::zeros(n);
        for ia in 0..da {
            for ja in 0..da {
                let a = self.data[ia * da + ja];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for ib in 0..db {
                    for jb in 0..db {
                        out.data[(ia * db + ib) * n + (ja * db + jb)] =
                            a * other.data[ib * db + jb];
                    }
                }
            }
        }
        out
    }

    /// Traces out the tensor factors not listed in `keep`. `dims` lists the
    /// factor dimensions in order; their product must equal the matrix
    /// dimension. The kept factors retain their relative order.
    pub fn partial_trace(&self, dims: &[usize], keep: &[usize]) -> Result<Self> {
        let total: usize = dims.iter().product();
        if total != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "partial_trace: factor dims {:?} give {}, matrix has dim {}",
                dims, total, self.dim
            )));
        }
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.iter().any(|&k| k >= dims.len()) {
            return Err(Error::InvalidParameter(format!(
                "partial_trace: kept factor out of range (factors: {})",
                dims.len()
            )));
        }
        let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();

        // Stride of factor k in the flattened index.
        let mut strides = vec![1usize; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }

        let out_dim: usize = keep.iter().map(|&k| dims[k]).product();
        let tr_dim: usize = traced.iter().map(|&k| dims[k]).product();
        let mut out = Self::zeros(out_dim.max(1));

        // Base offset of a multi-index drawn from the listed factors.
        let offset = |factors: &[usize], mut flat: usize| -> usize {
            let mut off = 0;
            for &k in factors.iter().rev() {
                off += (flat % dims[k]) * strides[k];
                flat /= dims[k];
            }
            off
        };

        for r in 0..out_dim.max(1) {
            let r_off = offset(&keep, r);
            for c in 0..out_dim.max(1) {
                let c_off = offset(&keep, c);
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..tr_dim.max(1) {
                    let t_off = offset(&traced, t);
                    acc += self.data[(r_off + t_off) * self.dim + (c_off + t_off)];
                }
                out[(r, c)] = acc;
            }
        }
        Ok(out)
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
    /// Eigenvalues come back sorted in descending order with matching
    /// orthonormal eigenvector columns.
    pub fn hermitian_eig(&self) -> Result<HermitianEig> {
        self.hermitian_eig_with_tol(ALGEBRAIC_TOL)
    }

    pub fn hermitian_eig_with_tol(&self, herm_tol: f64) -> Result<HermitianEig> {
        let res = self.hermitian_residual();
        if res > herm_tol {
            return Err(Error::NotHermitian(res));
        }
        let n = self.dim;
        let mut a = self.symmetrize().data;
        let mut v = Self::identity(n);
        let scale = self.max_abs().max(1.0);

        let off_norm = |a: &[C64]| -> f64 {
            let mut s = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    s += a[p * n + q].norm_sqr();
                }
            }
            s.sqrt()
        };

        const MAX_SWEEPS: usize = 64;
        for _ in 0..MAX_SWEEPS {
            if off_norm(&a) <= 1e-14 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    let abs = apq.norm();
                    if abs <= 1e-300 {
                        continue;
                    }
                    let phase = apq / abs;
                    let app = a[p * n + p].re;
                    let aqq = a[q * n + q].re;
                    let tau = (aqq - app) / (2.0 * abs);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let s_phase = phase * s;

                    // A <- A U  (columns p, q)
                    for i in 0..n {
                        let aip = a[i * n + p];
                        let aiq = a[i * n + q];
                        a[i * n + p] = aip * c - aiq * s_phase.conj();
                        a[i * n + q] = aip * s_phase + aiq * c;
                    }
                    // A <- U† A  (rows p, q)
                    for j in 0..n {
                        let apj = a[p * n + j];
                        let aqj = a[q * n + j];
                        a[p * n + j] = apj * c - aqj * s_phase;
                        a[q * n + j] = apj * s_phase.conj() + aqj * c;
                    }
                    // V <- V U
                    for i in 0..n {
                        let vip = v.data[i * n + p];
                        let viq = v.data[i * n + q];
                        v.data[i * n + p] = vip * c - viq * s_phase.conj();
                        v.data[i * n + q] = vip * s_phase + viq * c;
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        let values_raw: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
        order.sort_by(|&i, &j| values_raw[j].partial_cmp(&values_raw[i]).unwrap());

        let values: Vec<f64> = order.iter().map(|&i| values_raw[i]).collect();
        let vectors = Self::from_fn(n, |i, j| v.data[i * n + order[j]]);
        Ok(HermitianEig { values, vectors })
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let eig = self.hermitian_eig()?;
        Ok(*eig.values.last().expect("empty matrix"))
    }

    /// True iff the minimum eigenvalue is ≥ -tol. Errors on non-Hermitian
    /// input.
    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(self.min_eigenvalue()? >= -tol)
    }

    /// Spectral power λ ↦ λ^p of a PSD matrix. Eigenvalues below the relative
    /// rank cutoff map to zero, so negative powers are support-restricted
    /// pseudo-inverses.
    pub fn psd_power(&self, p: f64) -> Result<Self> {
        self.psd_power_with(p, FEASIBILITY_TOL, RANK_CUTOFF)
    }

    pub fn psd_power_with(&self, p: f64, psd_tol: f64, rank_cutoff: f64) -> Result<Self> {
        let eig = self.hermitian_eig()?;
        let max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
        let min = eig.values.last().copied().unwrap_or(0.0);
        if min < -psd_tol {
            return Err(Error::NotPsd(min));
        }
        let cutoff = rank_cutoff * max;
        let n = self.dim;
        let mut out = Self::zeros(n);
        for (k, &lambda) in eig.values.iter().enumerate() {
            if lambda <= cutoff || lambda <= 0.0 {
                continue;
            }
            let mapped = lambda.powf(p);
            let col: Vec<C64> = (0..n).map(|i| eig.vectors[(i, k)]).collect();
            for i in 0..n {
                for j in 0..n {
                    out.data[i * n + j] += col[i] * col[j].conj() * mapped;
                }
            }
        }
        Ok(out)
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl std::fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "ComplexMatrix(dim={})", self.dim)?;
        for i in 0..self.dim {
            write!(f, "  [")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, " {:+.4}{:+.4}i", z.re, z.im)?;
            }
            writeln!(f, " ]")?;
        }
        Ok(())
    }
}

/// Result of a Hermitian eigendecomposition: `values` descending, `vectors`
/// holds the corresponding orthonormal eigenvectors as columns.
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEig {
    /// V Λ V†, for checking reconstruction error.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.values.len();
        ComplexMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| self.vectors[(i, k)] * self.vectors[(j, k)].conj() * self.values[k])
                .sum()
        })
    }

    /// Projector onto the span of eigenvectors selected by `pick(λ)`.
    pub fn eigenspace_projector(&self, pick: impl Fn(f64) -> bool) -> ComplexMatrix {
        let n = self.values.len();
        let mut out = ComplexMatrix::zeros(n);
        for (k, &lambda) in self.values.iter().enumerate() {
            if !pick(lambda) {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += self.vectors[(i, k)] * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }
}

// On disk a matrix is a row-major array of rows, each entry a [re, im] pair.
impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.dim))?;
        for i in 0..self.dim {
            let row: Vec<[f64; 2]> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    [z.re, z.im]
                })
                .collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct MatrixVisitor;
        impl<'de> Visitor<'de> for MatrixVisitor {
            type Value = ComplexMatrix;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a square array of rows of [re, im] pairs")
            }
            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                let mut rows: Vec<Vec<[f64; 2]>> = Vec::new();
                while let Some(row) = seq.next_element::<Vec<[f64; 2]>>()? {
                    rows.push(row);
                }
                let dim = rows.len();
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != dim {
                        return Err(de::Error::custom(format!(
                            "matrix row {} has {} entries, expected {}",
                            i,
                            row.len(),
                            dim
                        )));
                    }
                }
                let mut m = ComplexMatrix::zeros(dim);
                for (i, row) in rows.iter().enumerate() {
                    for (j, &[re, im]) in row.iter().enumerate() {
                        m[(i, j)] = C64::new(re, im);
                    }
                }
                Ok(m)
            }
        }
        deserializer.deserialize_seq(MatrixVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::from_real(&[&[1.0, 0.0], &[0.0, -1.0]])
    }

    fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let m = ComplexMatrix::from_fn(dim, |_, _| {
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        m.symmetrize()
    }

    #[test]
    fn kron_identity_case() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(i2.kron(&i2), ComplexMatrix::identity(4));
    }

    #[test]
    fn kron_diagonal_product() {
        let z = pauli_z();
        let zz = z.kron(&z);
        let expected = ComplexMatrix::diag(&[1.0, -1.0, -1.0, 1.0]);
        assert!(zz.max_abs_diff(&expected) == 0.0);
    }

    #[test]
    fn kron_x_with_ket0_projector() {
        // Hand expansion: 1 at (0,2) and (2,0), zero elsewhere.
        let m = pauli_x().kron(&ComplexMatrix::basis_projector(2, 0));
        let mut expected = ComplexMatrix::zeros(4);
        expected[(0, 2)] = c(1.0, 0.0);
        expected[(2, 0)] = c(1.0, 0.0);
        assert!(m.max_abs_diff(&expected) == 0.0);
    }

    #[test]
    fn partial_trace_maximally_entangled_marginal() {
        let inv = 1.0 / 2f64.sqrt();
        let phi = vec![c(inv, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(inv, 0.0)];
        let rho = ComplexMatrix::outer(&phi);
        let red = rho.partial_trace(&[2, 2], &[0]).unwrap();
        let expected = ComplexMatrix::identity(2).scale(0.5);
        assert!(red.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn partial_trace_product_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_hermitian(3, &mut rng);
        let b = random_hermitian(2, &mut rng);
        let red = a.kron(&b).partial_trace(&[3, 2], &[0]).unwrap();
        let expected = a.scale_complex(b.trace());
        assert!(red.max_abs_diff(&expected) < 1e-13);
    }

    #[test]
    fn partial_trace_identity() {
        let red = ComplexMatrix::identity(4).partial_trace(&[2, 2], &[1]).unwrap();
        assert!(red.max_abs_diff(&ComplexMatrix::identity(2).scale(2.0)) < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let err = ComplexMatrix::identity(4).partial_trace(&[3, 2], &[0]);
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn eig_pauli_z() {
        let eig = pauli_z().hermitian_eig().unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] + 1.0).abs() < 1e-14);
        // Eigenvector of +1 should be |0⟩ up to phase.
        assert!(eig.vectors[(0, 0)].norm() > 0.999);
        assert!(eig.vectors[(1, 0)].norm() < 1e-12);
    }

    #[test]
    fn eig_degenerate_half_identity() {
        let eig = ComplexMatrix::identity(2).scale(0.5).hermitian_eig().unwrap();
        assert!((eig.values[0] - 0.5).abs() < 1e-14);
        assert!((eig.values[1] - 0.5).abs() < 1e-14);
        // Columns orthonormal.
        let v = &eig.vectors;
        let dot: C64 = (0..2).map(|i| v[(i, 0)].conj() * v[(i, 1)]).sum();
        assert!(dot.norm() < 1e-13);
    }

    #[test]
    fn eig_pauli_x() {
        let eig = pauli_x().hermitian_eig().unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] + 1.0).abs() < 1e-14);
        let inv = 1.0 / 2f64.sqrt();
        // +1 eigenvector is (|0⟩+|1⟩)/√2 up to phase.
        let v0 = eig.vectors[(0, 0)];
        let v1 = eig.vectors[(1, 0)];
        assert!((v0.norm() - inv).abs() < 1e-12);
        assert!((v1.norm() - inv).abs() < 1e-12);
        assert!((v0 - v1).norm() < 1e-12);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let mut m = ComplexMatrix::zeros(2);
        m[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(m.hermitian_eig(), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn eig_reconstruction_dim_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = random_hermitian(64, &mut rng);
        let eig = m.hermitian_eig().unwrap();
        assert!(eig.reconstruct().max_abs_diff(&m) < 1e-10);
        for k in 1..64 {
            assert!(eig.values[k - 1] >= eig.values[k]);
        }
    }

    #[test]
    fn is_psd_examples() {
        assert!(ComplexMatrix::basis_projector(2, 0).is_psd(1e-9).unwrap());
        assert!(!pauli_z().is_psd(1e-9).unwrap());
        assert!(ComplexMatrix::zeros(2).is_psd(1e-9).unwrap());
    }

    #[test]
    fn psd_power_examples() {
        let m = ComplexMatrix::identity(2).scale(0.25).psd_power(-0.5).unwrap();
        assert!(m.max_abs_diff(&ComplexMatrix::identity(2).scale(2.0)) < 1e-12);

        let p = ComplexMatrix::basis_projector(2, 0).psd_power(-0.5).unwrap();
        assert!(p.max_abs_diff(&ComplexMatrix::basis_projector(2, 0)) < 1e-12);

        let d = ComplexMatrix::diag(&[4.0, 9.0]).psd_power(0.5).unwrap();
        assert!(d.max_abs_diff(&ComplexMatrix::diag(&[2.0, 3.0])) < 1e-12);
    }

    #[test]
    fn psd_power_rejects_indefinite() {
        assert!(matches!(pauli_z().psd_power(0.5), Err(Error::NotPsd(_))));
    }

    #[test]
    fn matrix_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_hermitian(4, &mut rng);
        let text = serde_json::to_string(&m).unwrap();
        let back: ComplexMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn matrix_json_rejects_ragged_rows() {
        let bad = "[[[1.0,0.0],[0.0,0.0]],[[0.0,0.0]]]";
        assert!(serde_json::from_str::<ComplexMatrix>(bad).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn kron_trace_multiplicative(seed in 0u64..1000, da in 2usize..5, db in 2usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_hermitian(da, &mut rng);
            let b = random_hermitian(db, &mut rng);
            let lhs = a.kron(&b).trace();
            let rhs = a.trace() * b.trace();
            prop_assert!((lhs - rhs).norm() <= 1e-12);
        }

        #[test]
        fn partial_trace_over_everything_is_trace(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_hermitian(6, &mut rng);
            let scalar = a.partial_trace(&[2, 3], &[]).unwrap();
            prop_assert_eq!(scalar.dim(), 1);
            prop_assert!((scalar[(0, 0)] - a.trace()).norm() <= 1e-12);
        }

        #[test]
        fn eig_reconstructs_random_hermitian(seed in 0u64..1000, dim in 2usize..17) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_hermitian(dim, &mut rng);
            let eig = m.hermitian_eig().unwrap();
            prop_assert!(eig.reconstruct().max_abs_diff(&m) <= 1e-10);
        }

        #[test]
        fn psd_sqrt_squares_back(seed in 0u64..1000, dim in 2usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_hermitian(dim, &mut rng);
            let psd = a.matmul(&a.dagger());
            let root = psd.psd_power(0.5).unwrap();
            prop_assert!(root.matmul(&root).max_abs_diff(&psd) <= 1e-9);
        }
    }
}
