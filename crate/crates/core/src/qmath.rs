//! Fixed-size complex linear algebra for qubit and two-qubit operators.
//!
//! Everything here is dimension 2 or 4. Two-qubit operators live on
//! `H_in ⊗ H_out` with the input factor first, so the composite index of
//! `|i⟩|o⟩` is `2 * i + o`. The single-qubit basis is `{H, V} = {0, 1}`.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Entrywise tolerance used when a matrix is required to be Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Off-diagonal convergence threshold for the Jacobi eigensolver.
const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 64;

/// `e^{iφ}`
#[inline]
pub fn phase(phi: f64) -> C64 {
    C64::from_polar(1.0, phi)
}

/// Complex column vector of fixed dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CVec<const N: usize>(pub [C64; N]);

pub type Vec2 = CVec<2>;
pub type Vec4 = CVec<4>;

impl<const N: usize> CVec<N> {
    pub fn zeros() -> Self {
        Self([ZERO; N])
    }

    pub fn basis(k: usize) -> Self {
        let mut v = Self::zeros();
        v.0[k] = ONE;
        v
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(self.0.map(|a| a * s))
    }

    /// Returns `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0).then(|| self.scale(C64::from(1.0 / n)))
    }

    /// `|self⟩⟨other|`
    pub fn outer(&self, other: &Self) -> CMat<N> {
        let mut m = CMat::zeros();
        for i in 0..N {
            for j in 0..N {
                m.0[i][j] = self.0[i] * other.0[j].conj();
            }
        }
        m
    }

    /// `|self⟩⟨self|`
    pub fn projector(&self) -> CMat<N> {
        self.outer(self)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

impl<const N: usize> Add for CVec<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        for (a, b) in out.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
        out
    }
}

impl<const N: usize> Index<usize> for CVec<N> {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

/// `|a⟩ ⊗ |b⟩`
pub fn kron_vec(a: &Vec2, b: &Vec2) -> Vec4 {
    let mut out = Vec4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            out.0[2 * i + j] = a.0[i] * b.0[j];
        }
    }
    out
}

/// Dense complex square matrix of fixed dimension, row-major.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CMat<const N: usize>(#[serde(with = "serde_mat")] pub [[C64; N]; N]);

pub type Mat2 = CMat<2>;
pub type Mat4 = CMat<4>;

impl<const N: usize> CMat<N> {
    pub fn zeros() -> Self {
        Self([[ZERO; N]; N])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][i] = ONE;
        }
        m
    }

    pub fn diag(d: [C64; N]) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][i] = d[i];
        }
        m
    }

    pub fn from_real_diag(d: [f64; N]) -> Self {
        Self::diag(d.map(C64::from))
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                m.0[i][j] = self.0[j][i];
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..N).map(|i| self.0[i][i]).sum()
    }

    /// Real part of the trace; the imaginary part vanishes for Hermitian input.
    pub fn trace_re(&self) -> f64 {
        self.trace().re
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(self.0.map(|row| row.map(|a| a * s)))
    }

    pub fn scale_re(&self, s: f64) -> Self {
        Self(self.0.map(|row| row.map(|a| a * s)))
    }

    pub fn apply(&self, v: &CVec<N>) -> CVec<N> {
        let mut out = CVec::zeros();
        for i in 0..N {
            out.0[i] = (0..N).map(|j| self.0[i][j] * v.0[j]).sum();
        }
        out
    }

    /// `Tr[self · other]` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        let mut acc = ZERO;
        for i in 0..N {
            for k in 0..N {
                acc += self.0[i][k] * other.0[k][i];
            }
        }
        acc
    }

    /// `⟨v| self |v⟩`
    pub fn expectation(&self, v: &CVec<N>) -> C64 {
        v.inner(&self.apply(v))
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|row| row.iter())
            .map(|a| a.norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|row| row.iter())
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entrywise deviation `|M_ij − conj(M_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..N {
            for j in i..N {
                worst = worst.max((self.0[i][j] - self.0[j][i].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// `(M + M†) / 2`
    pub fn hermitian_part(&self) -> Self {
        (*self + self.adjoint()).scale_re(0.5)
    }

    pub fn is_finite(&self) -> bool {
        self.0
            .iter()
            .flat_map(|row| row.iter())
            .all(|a| a.re.is_finite() && a.im.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (*self - *other).max_abs()
    }

    fn check_hermitian(&self) -> Result<()> {
        let deviation = self.hermiticity_defect();
        if deviation > HERMITIAN_TOL * self.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(())
    }

    /// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi
    /// rotations. Eigenvalues are sorted ascending; column `k` of the returned
    /// unitary is the eigenvector for eigenvalue `k`.
    pub fn eigh(&self) -> Result<([f64; N], Self)> {
        self.check_hermitian()?;
        let mut a = self.hermitian_part();
        let mut v = Self::identity();
        let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

        for _ in 0..JACOBI_MAX_SWEEPS {
            if off_diagonal_norm(&a) <= JACOBI_TOL * scale {
                break;
            }
            for p in 0..N {
                for q in (p + 1)..N {
                    jacobi_rotate(&mut a, &mut v, p, q);
                }
            }
        }

        let mut order: [usize; N] = std::array::from_fn(|i| i);
        order.sort_by(|&x, &y| a.0[x][x].re.total_cmp(&a.0[y][y].re));
        let values = order.map(|k| a.0[k][k].re);
        let mut vectors = Self::zeros();
        for (col, &k) in order.iter().enumerate() {
            for row in 0..N {
                vectors.0[row][col] = v.0[row][k];
            }
        }
        Ok((values, vectors))
    }
}

fn off_diagonal_norm<const N: usize>(a: &CMat<N>) -> f64 {
    let mut s = 0.0;
    for i in 0..N {
        for j in 0..N {
            if i != j {
                s += a.0[i][j].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Zeroes `a[p][q]` with the unitary `V = P·R`, where `P` strips the phase of
/// the pivot and `R` is the real Jacobi rotation of the resulting symmetric block.
fn jacobi_rotate<const N: usize>(a: &mut CMat<N>, v: &mut CMat<N>, p: usize, q: usize) {
    let apq = a.0[p][q];
    let b = apq.norm();
    if b == 0.0 {
        return;
    }
    let e = apq / b;
    let app = a.0[p][p].re;
    let aqq = a.0[q][q].re;
    let tau = (aqq - app) / (2.0 * b);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // V restricted to (p, q): [[c, s], [-s·ē, c·ē]]
    let vpp = C64::from(c);
    let vpq = C64::from(s);
    let vqp = -e.conj() * s;
    let vqq = e.conj() * c;

    // A ← A V
    for k in 0..N {
        let akp = a.0[k][p];
        let akq = a.0[k][q];
        a.0[k][p] = akp * vpp + akq * vqp;
        a.0[k][q] = akp * vpq + akq * vqq;
    }
    // A ← V† A
    for k in 0..N {
        let apk = a.0[p][k];
        let aqk = a.0[q][k];
        a.0[p][k] = vpp.conj() * apk + vqp.conj() * aqk;
        a.0[q][k] = vpq.conj() * apk + vqq.conj() * aqk;
    }
    a.0[p][q] = ZERO;
    a.0[q][p] = ZERO;
    a.0[p][p] = C64::from(a.0[p][p].re);
    a.0[q][q] = C64::from(a.0[q][q].re);

    for k in 0..N {
        let vkp = v.0[k][p];
        let vkq = v.0[k][q];
        v.0[k][p] = vkp * vpp + vkq * vqp;
        v.0[k][q] = vkp * vpq + vkq * vqq;
    }
}

impl Mat2 {
    /// Closed-form spectrum of a 2×2 Hermitian matrix, ascending.
    pub fn eigenvalues_hermitian(&self) -> Result<[f64; 2]> {
        self.check_hermitian()?;
        let a = self.0[0][0].re;
        let d = self.0[1][1].re;
        let b = 0.5 * (self.0[0][1] + self.0[1][0].conj());
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        Ok([mean - radius, mean + radius])
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues_hermitian()?[0])
    }
}

impl Mat4 {
    pub fn eigenvalues_hermitian(&self) -> Result<[f64; 4]> {
        Ok(self.eigh()?.0)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues_hermitian()?[0])
    }
}

/// `a ⊗ b` with `a` acting on the first (input) factor.
pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut m = Mat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    m.0[2 * i + k][2 * j + l] = a.0[i][j] * b.0[k][l];
                }
            }
        }
    }
    m
}

/// Traces out the first (input) factor of an operator on `H_in ⊗ H_out`.
pub fn partial_trace_in(m: &Mat4) -> Mat2 {
    let mut out = Mat2::zeros();
    for o in 0..2 {
        for p in 0..2 {
            out.0[o][p] = m.0[o][p] + m.0[2 + o][2 + p];
        }
    }
    out
}

/// Traces out the second (output) factor.
pub fn partial_trace_out(m: &Mat4) -> Mat2 {
    let mut out = Mat2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            out.0[i][j] = m.0[2 * i][2 * j] + m.0[2 * i + 1][2 * j + 1];
        }
    }
    out
}

impl<const N: usize> Mul for CMat<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for k in 0..N {
                let aik = self.0[i][k];
                if aik == ZERO {
                    continue;
                }
                for j in 0..N {
                    m.0[i][j] += aik * rhs.0[k][j];
                }
            }
        }
        m
    }
}

impl<const N: usize> Add for CMat<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut m = self;
        for i in 0..N {
            for j in 0..N {
                m.0[i][j] += rhs.0[i][j];
            }
        }
        m
    }
}

impl<const N: usize> Sub for CMat<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut m = self;
        for i in 0..N {
            for j in 0..N {
                m.0[i][j] -= rhs.0[i][j];
            }
        }
        m
    }
}

impl<const N: usize> Neg for CMat<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale_re(-1.0)
    }
}

impl<const N: usize> Index<(usize, usize)> for CMat<N> {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl<const N: usize> IndexMut<(usize, usize)> for CMat<N> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

/// Single-qubit density operator, possibly sub-normalized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix2(pub Mat2);

impl DensityMatrix2 {
    pub fn pure(v: &Vec2) -> Self {
        Self(v.projector())
    }

    pub fn maximally_mixed() -> Self {
        Self(Mat2::identity().scale_re(0.5))
    }

    pub fn trace(&self) -> f64 {
        self.0.trace_re()
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }
}

/// Choi operator of a (possibly trace-decreasing) single-qubit CP map on
/// `H_in ⊗ H_out`. The map acts as `ρ ↦ Tr_in[(ρᵀ ⊗ 𝟙) χ]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiMatrix(pub Mat4);

impl ChoiMatrix {
    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace_re()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.scale_re(c))
    }

    /// True when Hermitian and the smallest eigenvalue is at least `−tol·Tr χ`.
    pub fn is_psd(&self, tol: f64) -> bool {
        match self.0.min_eigenvalue() {
            Ok(min) => min >= -tol * self.trace().abs().max(f64::MIN_POSITIVE),
            Err(_) => false,
        }
    }

    /// Row-major `(re, im)` pairs in input⊗output order.
    pub fn to_pairs(&self) -> Vec<(f64, f64)> {
        self.0
             .0
            .iter()
            .flat_map(|row| row.iter().map(|c| (c.re, c.im)))
            .collect()
    }
}

mod serde_mat {
    use super::C64;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, const N: usize>(
        m: &[[C64; N]; N],
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = m
            .iter()
            .map(|row| row.iter().map(|c| [c.re, c.im]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(
        d: D,
    ) -> Result<[[C64; N]; N], D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        if rows.len() != N || rows.iter().any(|r| r.len() != N) {
            return Err(D::Error::custom(format!("expected a {N}x{N} matrix")));
        }
        let mut m = [[C64::new(0.0, 0.0); N]; N];
        for (i, row) in rows.iter().enumerate() {
            for (j, [re, im]) in row.iter().enumerate() {
                m[i][j] = C64::new(*re, *im);
            }
        }
        Ok(m)
    }
}
