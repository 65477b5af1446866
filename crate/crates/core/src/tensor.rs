//! Dense complex linear algebra on small Hilbert spaces.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Default upper bound on the full-space dimension of materialized matrices.
pub const DEFAULT_DENSE_CAP: usize = 1 << 14;

/// Default Hermiticity / negative-eigenvalue tolerance for [`psd_power`].
pub const PSD_TOL: f64 = 1e-10;

/// Idempotency tolerance for the projector shortcut `P^p = P`.
pub const PROJECTOR_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A state vector of a single subsystem (or of the full space).
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amplitudes: DVector<C64>,
}

impl Ket {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::BadParameter("ket must have dimension ≥ 1".into()));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::BadParameter("ket amplitudes must be finite".into()));
        }
        Ok(Self { amplitudes: DVector::from_vec(amplitudes) })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    /// Computational basis vector `|index⟩` in dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index {index} out of range for dimension {dim}");
        let mut v = DVector::from_element(dim, ZERO);
        v[index] = ONE;
        Self { amplitudes: v }
    }

    /// `cos θ |0⟩ + sin θ |1⟩`.
    pub fn qubit(theta: f64) -> Self {
        Self {
            amplitudes: DVector::from_vec(vec![C64::new(theta.cos(), 0.0), C64::new(theta.sin(), 0.0)]),
        }
    }

    pub(crate) fn from_vector(amplitudes: DVector<C64>) -> Self {
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 {
            return Err(Error::BadParameter("cannot normalize the zero vector".into()));
        }
        Ok(Self { amplitudes: self.amplitudes.unscale(norm) })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Ket) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Kronecker product `|self⟩ ⊗ |other⟩`.
    pub fn kron(&self, other: &Ket) -> Ket {
        Ket { amplitudes: self.amplitudes.kronecker(&other.amplitudes) }
    }
}

/// A square complex matrix acting on one subsystem (or the full space).
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOp {
    entries: DMatrix<C64>,
}

impl LocalOp {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch { expected: entries.nrows(), found: entries.ncols() });
        }
        if entries.nrows() == 0 {
            return Err(Error::BadParameter("operator must have dimension ≥ 1".into()));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::BadParameter("operator entries must be finite".into()));
        }
        Ok(Self { entries })
    }

    /// Row-major construction from a flat slice.
    pub fn from_rows(dim: usize, rows: &[C64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: rows.len() });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, rows))
    }

    pub fn identity(dim: usize) -> Self {
        Self { entries: DMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { entries: DMatrix::from_element(dim, dim, ZERO) }
    }

    pub fn diag(values: &[f64]) -> Self {
        let v = DVector::from_iterator(values.len(), values.iter().map(|&x| C64::new(x, 0.0)));
        Self { entries: DMatrix::from_diagonal(&v) }
    }

    /// `|row⟩⟨col|` in dimension `dim`.
    pub fn outer(dim: usize, row: usize, col: usize) -> Self {
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        m[(row, col)] = ONE;
        Self { entries: m }
    }

    /// `|0⟩⟨1|`.
    pub fn qubit_lowering() -> Self {
        Self::outer(2, 0, 1)
    }

    /// `|1⟩⟨0|`.
    pub fn qubit_raising() -> Self {
        Self::outer(2, 1, 0)
    }

    /// Bosonic annihilation operator truncated to Fock states `|0⟩ … |dim−1⟩`:
    /// `a|m⟩ = √m |m−1⟩`.
    pub fn truncated_annihilation(dim: usize) -> Self {
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        for n in 1..dim {
            m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
        }
        Self { entries: m }
    }

    pub(crate) fn from_matrix(entries: DMatrix<C64>) -> Self {
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn dagger(&self) -> Self {
        Self { entries: self.entries.adjoint() }
    }

    /// `A† A`.
    pub fn gram(&self) -> Self {
        Self { entries: self.entries.adjoint() * &self.entries }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { entries: self.entries.map(|z| z * factor) }
    }

    pub fn matmul(&self, other: &LocalOp) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self { entries: &self.entries * &other.entries })
    }

    pub fn add(&self, other: &LocalOp) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self { entries: &self.entries + &other.entries })
    }

    pub fn kron(&self, other: &LocalOp) -> Self {
        Self { entries: self.entries.kronecker(&other.entries) }
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn apply(&self, ket: &Ket) -> Result<Ket> {
        check_dim(self.dim(), ket.dim())?;
        Ok(Ket::from_vector(&self.entries * ket.amplitudes()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }

    /// Maximum absolute entry difference.
    pub fn max_abs_diff(&self, other: &LocalOp) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        (&self.entries - self.entries.adjoint()).norm()
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|r| (0..d).all(|c| r == c || self.entries[(r, c)] == ZERO))
    }

    pub fn is_projector(&self, tol: f64) -> bool {
        let sq = &self.entries * &self.entries;
        (&sq - &self.entries).norm() <= tol && self.hermiticity_deviation() <= tol
    }
}

/// Ordered local dimensions of an `n ≥ 2` subsystem Hilbert space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsystemDims(Vec<usize>);

impl SubsystemDims {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::BadParameter(format!("need at least 2 subsystems, got {}", dims.len())));
        }
        if dims.contains(&0) {
            return Err(Error::BadParameter("local dimensions must be ≥ 1".into()));
        }
        Ok(Self(dims))
    }

    pub fn uniform(n: usize, dim: usize) -> Result<Self> {
        Self::new(vec![dim; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// `∏ dims`, saturating on overflow.
    pub fn total(&self) -> usize {
        self.0.iter().fold(1usize, |acc, &d| acc.saturating_mul(d))
    }
}

impl std::ops::Index<usize> for SubsystemDims {
    type Output = usize;
    fn index(&self, k: usize) -> &usize {
        &self.0[k]
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// `⟨bra| op |ket⟩`.
pub fn matelem(bra: &Ket, op: &LocalOp, ket: &Ket) -> Result<C64> {
    check_dim(op.dim(), bra.dim())?;
    check_dim(op.dim(), ket.dim())?;
    Ok(bra.amplitudes().dotc(&(op.entries() * ket.amplitudes())))
}

/// Spectral data of a Hermitian operator: real eigenvalues and the unitary
/// whose columns are the eigenvectors. `basis = None` means the standard
/// basis (the operator was already diagonal).
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub basis: Option<DMatrix<C64>>,
}

impl Spectrum {
    pub fn radius(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Eigendecomposition of a Hermitian operator. Fails with `NonHermitian`
/// when `‖B − B†‖_F > tol · max(1, ‖B‖_F)`.
pub fn hermitian_spectrum(op: &LocalOp, tol: f64) -> Result<Spectrum> {
    let deviation = op.hermiticity_deviation();
    if deviation > tol * op.frobenius_norm().max(1.0) {
        return Err(Error::NonHermitian { deviation });
    }
    if op.is_diagonal() {
        return Ok(Spectrum {
            values: op.entries().diagonal().iter().map(|z| z.re).collect(),
            basis: None,
        });
    }
    let sym = (op.entries() + op.entries().adjoint()).unscale(2.0);
    let eig = SymmetricEigen::new(sym);
    Ok(Spectrum { values: eig.eigenvalues.iter().copied().collect(), basis: Some(eig.eigenvectors) })
}

/// Checks a Hermitian spectrum for `min λ ≥ −tol · ρ(B)`.
pub fn check_psd(spectrum: &Spectrum, tol: f64) -> Result<()> {
    let min = spectrum.min();
    if min < -tol * spectrum.radius() {
        return Err(Error::NegativeSpectrum { min_eigenvalue: min });
    }
    Ok(())
}

/// `B^p = Σ_l max(λ_l, 0)^p P_l` for a Hermitian positive semidefinite `B`.
///
/// Diagonal inputs are powered entrywise and verified projectors are returned
/// unchanged; everything else goes through a Hermitian eigendecomposition.
/// Eigenvalues in `[−tol·ρ(B), 0)` are treated as round-off and clamped.
pub fn psd_power(b: &LocalOp, p: f64, tol: f64) -> Result<LocalOp> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::BadParameter(format!("power must be positive and finite, got {p}")));
    }
    let spectrum = hermitian_spectrum(b, tol)?;
    check_psd(&spectrum, tol)?;
    let raise = |l: f64| if l > 0.0 { l.powf(p) } else { 0.0 };
    match &spectrum.basis {
        None => Ok(LocalOp::diag(&spectrum.values.iter().map(|&l| raise(l)).collect::<Vec<_>>())),
        Some(_) if b.is_projector(PROJECTOR_TOL) => Ok(b.clone()),
        Some(v) => {
            let d = DVector::from_iterator(spectrum.values.len(), spectrum.values.iter().map(|&l| C64::new(raise(l), 0.0)));
            let mut scaled = v.clone();
            for (j, mut col) in scaled.column_iter_mut().enumerate() {
                col *= d[j];
            }
            Ok(LocalOp::from_matrix(scaled * v.adjoint()))
        }
    }
}

/// Embeds `op` at subsystem `k` (0-based) of `dims`: `I ⊗ … ⊗ op ⊗ … ⊗ I`.
pub fn kron_embed(op: &LocalOp, k: usize, dims: &SubsystemDims, cap: usize) -> Result<LocalOp> {
    if k >= dims.len() {
        return Err(Error::BadParameter(format!("subsystem index {k} out of range for {} subsystems", dims.len())));
    }
    check_dim(dims[k], op.dim())?;
    let total = dims.total();
    if total > cap {
        return Err(Error::DimensionCap { dim: total, cap });
    }
    let left: usize = dims.as_slice()[..k].iter().product();
    let right: usize = dims.as_slice()[k + 1..].iter().product();
    let lhs = DMatrix::<C64>::identity(left, left).kronecker(op.entries());
    Ok(LocalOp::from_matrix(lhs.kronecker(&DMatrix::<C64>::identity(right, right))))
}

/// `op_0 ⊗ op_1 ⊗ … ⊗ op_{n-1}`.
pub fn kron_all(ops: &[LocalOp], cap: usize) -> Result<LocalOp> {
    let total = ops.iter().fold(1usize, |acc, o| acc.saturating_mul(o.dim()));
    if total > cap {
        return Err(Error::DimensionCap { dim: total, cap });
    }
    let mut acc = DMatrix::<C64>::identity(1, 1);
    for op in ops {
        acc = acc.kronecker(op.entries());
    }
    Ok(LocalOp::from_matrix(acc))
}

/// `|u_0⟩ ⊗ |u_1⟩ ⊗ … ⊗ |u_{n-1}⟩`.
pub fn kron_kets(kets: &[Ket]) -> Ket {
    let mut acc = DVector::from_element(1, ONE);
    for k in kets {
        acc = acc.kronecker(k.amplitudes());
    }
    Ket::from_vector(acc)
}

/// `⟨ψ| M |ψ⟩` for dense `M` and `ψ`.
pub fn expectation(op: &LocalOp, psi: &Ket) -> Result<C64> {
    matelem(psi, op, psi)
}
