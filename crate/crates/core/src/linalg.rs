//! Dense complex matrices and density matrices.
//!
//! Everything here is square and row-major. Basis index bit `n-1-m` holds
//! qubit `m`, so qubit 0 is the leftmost tensor factor.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::PauliString;

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// 2×2 complex matrix used for single-qubit gates.
pub type Mat2 = [[C64; 2]; 2];

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat2_adjoint(a: &Mat2) -> Mat2 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

/// Max-norm deviation of `a† a` from the identity.
pub fn mat2_unitarity_deviation(a: &Mat2) -> f64 {
    let p = mat2_mul(&mat2_adjoint(a), a);
    let id = [[ONE, ZERO], [ZERO, ONE]];
    let mut d: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            d = d.max((p[i][j] - id[i][j]).norm());
        }
    }
    d
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl std::fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "CMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, " {:+.4}{:+.4}i", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { dim, data })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim, "matrix dimensions differ");
        let d = self.dim;
        let mut out = CMatrix::zeros(d);
        for i in 0..d {
            let row = &self.data[i * d..(i + 1) * d];
            let orow = &mut out.data[i * d..(i + 1) * d];
            for (k, &a) in row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * d..(k + 1) * d];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMatrix {
        let d = self.dim;
        let mut out = CMatrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        let mut out = self.clone();
        out.add_assign_scaled(other, ONE);
        out
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        let mut out = self.clone();
        out.add_assign_scaled(other, -ONE);
        out
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self += s · other`.
    pub fn add_assign_scaled(&mut self, other: &CMatrix, s: C64) {
        assert_eq!(self.dim, other.dim, "matrix dimensions differ");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let (a, b) = (self.dim, other.dim);
        let mut out = CMatrix::zeros(a * b);
        for i in 0..a {
            for j in 0..a {
                let s = self[(i, j)];
                if s == ZERO {
                    continue;
                }
                for k in 0..b {
                    for l in 0..b {
                        out[(i * b + k, j * b + l)] = s * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn commutator(&self, other: &CMatrix) -> CMatrix {
        self.mul(other).sub(&other.mul(self))
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "matrix dimensions differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Max-norm distance from the adjoint.
    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.dim;
        let mut dev: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// Max-norm deviation of `self† self` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        self.adjoint()
            .mul(self)
            .max_abs_diff(&CMatrix::identity(self.dim))
    }

    fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    fn from_nalgebra(m: &DMatrix<C64>) -> CMatrix {
        let d = m.nrows();
        let mut out = CMatrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] = m[(i, j)];
            }
        }
        out
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        if self.dim == 0 {
            return 0.0;
        }
        let sv = self.to_nalgebra().singular_values();
        sv.iter().cloned().fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = self.to_nalgebra();
        let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `exp(-i H t)` for Hermitian `H` through its eigendecomposition.
    pub fn exp_hermitian(h: &CMatrix, t: f64) -> CMatrix {
        let m = h.to_nalgebra();
        let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let eig = m.symmetric_eigen();
        let v = eig.eigenvectors;
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| (-I * e * t).exp()));
        CMatrix::from_nalgebra(&(&v * d * v.adjoint()))
    }

    /// Spectral distance after aligning the global phase with the trace overlap.
    pub fn unitary_distance(&self, other: &CMatrix) -> f64 {
        let overlap = other.adjoint().mul(self).trace();
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            ONE
        };
        self.sub(&other.scale(phase)).spectral_norm()
    }

    /// Left-multiply in place by a 2×2 gate on qubit `m` of an `n`-qubit register.
    pub fn apply_1q_left(&mut self, n: usize, m: usize, g: &Mat2) {
        let d = self.dim;
        let bit = 1 << (n - 1 - m);
        for i in 0..d {
            if i & bit != 0 {
                continue;
            }
            let i1 = i | bit;
            for j in 0..d {
                let a = self.data[i * d + j];
                let b = self.data[i1 * d + j];
                self.data[i * d + j] = g[0][0] * a + g[0][1] * b;
                self.data[i1 * d + j] = g[1][0] * a + g[1][1] * b;
            }
        }
    }

    /// Right-multiply in place by the adjoint of a 2×2 gate on qubit `m`.
    pub fn apply_1q_right_adjoint(&mut self, n: usize, m: usize, g: &Mat2) {
        let d = self.dim;
        let bit = 1 << (n - 1 - m);
        let gc = mat2_adjoint(g);
        for i in 0..d {
            let row = &mut self.data[i * d..(i + 1) * d];
            for j in 0..d {
                if j & bit != 0 {
                    continue;
                }
                let j1 = j | bit;
                let a = row[j];
                let b = row[j1];
                row[j] = a * gc[0][0] + b * gc[1][0];
                row[j1] = a * gc[0][1] + b * gc[1][1];
            }
        }
    }

    /// Left-multiply in place by CNOT(control, target).
    pub fn apply_cnot_left(&mut self, n: usize, control: usize, target: usize) {
        let d = self.dim;
        let cb = 1 << (n - 1 - control);
        let tb = 1 << (n - 1 - target);
        for i in 0..d {
            if i & cb != 0 && i & tb == 0 {
                let i1 = i | tb;
                for j in 0..d {
                    self.data.swap(i * d + j, i1 * d + j);
                }
            }
        }
    }

    /// Right-multiply in place by CNOT (self-adjoint).
    pub fn apply_cnot_right(&mut self, n: usize, control: usize, target: usize) {
        let d = self.dim;
        let cb = 1 << (n - 1 - control);
        let tb = 1 << (n - 1 - target);
        for i in 0..d {
            let row = &mut self.data[i * d..(i + 1) * d];
            for j in 0..d {
                if j & cb != 0 && j & tb == 0 {
                    row.swap(j, j | tb);
                }
            }
        }
    }

    /// Embed a 2×2 gate on qubit `m` as a full `2^n` matrix.
    pub fn embed_1q(n: usize, m: usize, g: &Mat2) -> CMatrix {
        let mut out = CMatrix::identity(1 << n);
        out.apply_1q_left(n, m, g);
        out
    }
}

/// A trace-one Hermitian state on `n` qubits.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    n: usize,
    mat: CMatrix,
}

impl std::fmt::Debug for DensityMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DensityMatrix(n={}) {:?}", self.n, self.mat)
    }
}

impl DensityMatrix {
    /// Projector onto a computational basis state.
    pub fn basis(n: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: index,
            });
        }
        let mut mat = CMatrix::zeros(dim);
        mat[(index, index)] = ONE;
        Ok(Self { n, mat })
    }

    /// Basis state from a bit label such as `"10"` (qubit 0 first).
    pub fn from_bits(bits: &str) -> Result<Self> {
        let n = bits.len();
        let mut index = 0usize;
        for c in bits.chars() {
            index = (index << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(Error::InvalidLabel(bits.to_string())),
                };
        }
        Self::basis(n, index)
    }

    /// `|ψ⟩⟨ψ|` for a normalised state vector.
    pub fn from_pure(psi: &[C64]) -> Result<Self> {
        let dim = psi.len();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::DimensionMismatch {
                expected: dim.next_power_of_two().max(2),
                actual: dim,
            });
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { sum: norm });
        }
        let mut mat = CMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                mat[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        Ok(Self {
            n: dim.trailing_zeros() as usize,
            mat,
        })
    }

    /// Wrap a matrix after checking dimension, trace and Hermiticity.
    pub fn from_matrix(mat: CMatrix) -> Result<Self> {
        let dim = mat.dim();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::DimensionMismatch {
                expected: dim.next_power_of_two().max(2),
                actual: dim,
            });
        }
        let tr = mat.trace();
        if (tr - ONE).norm() > 1e-10 {
            return Err(Error::NotNormalized { sum: tr.re });
        }
        if mat.hermiticity_deviation() > 1e-12 {
            return Err(invalid_state("matrix is not Hermitian"));
        }
        Ok(Self {
            n: dim.trailing_zeros() as usize,
            mat,
        })
    }

    /// Wrap without checks; for propagators that maintain the invariants.
    pub(crate) fn from_matrix_unchecked(n: usize, mat: CMatrix) -> Self {
        Self { n, mat }
    }

    /// Product state `ρ_0 ⊗ ρ_1 ⊗ …` of single-qubit states.
    pub fn product(factors: &[DensityMatrix]) -> Result<Self> {
        let mut it = factors.iter();
        let first = it
            .next()
            .ok_or_else(|| invalid_state("empty product"))?
            .clone();
        it.try_fold(first, |acc, f| {
            Ok(Self {
                n: acc.n + f.n,
                mat: acc.mat.kron(&f.mat),
            })
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    /// Diagonal entries, indexed by basis state.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }

    /// Populations of the qubits in `keep`, in the order given.
    pub fn reduced_populations(&self, keep: &[usize]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; 1 << keep.len()];
        for (i, p) in self.populations().into_iter().enumerate() {
            let mut k = 0usize;
            for &q in keep {
                k = (k << 1) | ((i >> (n - 1 - q)) & 1);
            }
            out[k] += p;
        }
        out
    }

    /// `Tr[P ρ]` for a Hermitian Pauli string (real part).
    pub fn expectation(&self, p: &PauliString) -> Result<f64> {
        if p.num_qubits() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: p.num_qubits(),
            });
        }
        let mut acc = ZERO;
        for j in 0..self.dim() {
            let (i, amp) = p.apply_to_basis(j);
            acc += amp * self.mat[(j, i)];
        }
        Ok(acc.re)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.mat.hermiticity_deviation()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.mat
            .hermitian_eigenvalues()
            .first()
            .copied()
            .unwrap_or(0.0)
    }

    pub fn purity(&self) -> f64 {
        self.mat.mul(&self.mat).trace().re
    }

    /// Replace by `(ρ + ρ†)/2`.
    pub fn symmetrize(&mut self) {
        let d = self.dim();
        for i in 0..d {
            self.mat[(i, i)].im = 0.0;
            for j in i + 1..d {
                let avg = (self.mat[(i, j)] + self.mat[(j, i)].conj()) * 0.5;
                self.mat[(i, j)] = avg;
                self.mat[(j, i)] = avg.conj();
            }
        }
    }

    /// `U ρ U†`.
    pub fn apply_unitary(&self, u: &CMatrix) -> Result<DensityMatrix> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: u.dim(),
            });
        }
        Ok(Self {
            n: self.n,
            mat: u.mul(&self.mat).mul(&u.adjoint()),
        })
    }

    /// `P ρ P†` computed by permuting entries.
    pub fn apply_pauli(&self, p: &PauliString) -> Result<DensityMatrix> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: 1usize << p.num_qubits(),
            });
        }
        let mut out = CMatrix::zeros(self.dim());
        self.add_pauli_conjugate(p, 1.0, &mut out);
        Ok(Self {
            n: self.n,
            mat: out,
        })
    }

    /// `acc += w · P ρ P†`.
    pub(crate) fn add_pauli_conjugate(&self, p: &PauliString, w: f64, acc: &mut CMatrix) {
        let d = self.dim();
        let map: Vec<(usize, C64)> = (0..d).map(|j| p.apply_to_basis(j)).collect();
        for i in 0..d {
            let (pi, ai) = map[i];
            let ai = ai * w;
            for j in 0..d {
                let (pj, aj) = map[j];
                acc[(pi, pj)] += ai * self.mat[(i, j)] * aj.conj();
            }
        }
    }
}

fn invalid_state(reason: &str) -> Error {
    crate::error::invalid("rho", reason)
}

/// Free-function form of [`DensityMatrix::apply_pauli`].
pub fn apply_pauli(rho: &DensityMatrix, p: &PauliString) -> Result<DensityMatrix> {
    rho.apply_pauli(p)
}
