//! Evaluation of the two product-moment entanglement conditions.
//!
//! Sum-of-products states are handled without materializing the full
//! Hilbert space: every quantity reduces to per-subsystem matrix elements
//! between the local kets of the state. The operator sum in condition (2)
//! is handled in the joint eigenbasis of the local `A_k† A_k`, where it is
//! diagonal on product states; its `n/2` power then only needs the
//! distribution of eigenvalue sums. A dense full-space path computes the
//! same quantities from Kronecker-embedded matrices and serves as an
//! independent cross-check and fallback.

use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::{PureSOP, State, StateFamily};
use crate::tensor::{
    hermitian_spectrum, check_psd, kron_all, kron_embed, psd_power, LocalOp, Spectrum, SubsystemDims, C64,
    DEFAULT_DENSE_CAP, PSD_TOL,
};

/// Default detection tolerance, scaled by `max(1, rhs1, rhs2)`.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// Default bound on the number of distinct eigenvalue sums tracked by the
/// factorized operator-sum path.
pub const DEFAULT_SPECTRUM_CAP: usize = 1 << 20;

const SUM_MERGE_TOL: f64 = 1e-12;

/// One local operator per subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorAssignment {
    ops: Vec<LocalOp>,
}

impl OperatorAssignment {
    pub fn new(ops: Vec<LocalOp>) -> Result<Self> {
        if ops.len() < 2 {
            return Err(Error::BadParameter(format!("need at least 2 local operators, got {}", ops.len())));
        }
        Ok(Self { ops })
    }

    /// `A_k = |0⟩⟨1|` on every qubit.
    pub fn qubit_lowering(n: usize) -> Result<Self> {
        Self::new(vec![LocalOp::qubit_lowering(); n])
    }

    /// `A_k = |1⟩⟨0|` on every qubit.
    pub fn qubit_raising(n: usize) -> Result<Self> {
        Self::new(vec![LocalOp::qubit_raising(); n])
    }

    /// `A_1 = |1⟩⟨0|`, `A_k = |0⟩⟨1|` for `k > 1`.
    pub fn flipped(n: usize) -> Result<Self> {
        let mut ops = vec![LocalOp::qubit_raising()];
        ops.extend(std::iter::repeat_n(LocalOp::qubit_lowering(), n.saturating_sub(1)));
        Self::new(ops)
    }

    /// Truncated annihilation operator on every mode.
    pub fn truncated_annihilation(dims: &SubsystemDims) -> Result<Self> {
        Self::new(dims.as_slice().iter().map(|&d| LocalOp::truncated_annihilation(d)).collect())
    }

    pub fn ops(&self) -> &[LocalOp] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Replaces `A_k` by `e^{iφ_k} A_k`.
    pub fn with_phases(&self, phases: &[f64]) -> Self {
        let ops = self
            .ops
            .iter()
            .zip(phases.iter().chain(std::iter::repeat(&0.0)))
            .map(|(a, &phi)| a.scaled(C64::from_polar(1.0, phi)))
            .collect();
        Self { ops }
    }

    fn check(&self, dims: &SubsystemDims) -> Result<()> {
        if self.ops.len() != dims.len() {
            return Err(Error::DimensionMismatch { expected: dims.len(), found: self.ops.len() });
        }
        for (k, op) in self.ops.iter().enumerate() {
            if op.dim() != dims[k] {
                return Err(Error::DimensionMismatch { expected: dims[k], found: op.dim() });
            }
        }
        Ok(())
    }
}

/// Named operator choices, resolved against a family and its dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OperatorChoice {
    /// Lowering for qubit families, the flipped choice for `FlippedGHZ`,
    /// annihilation for the bosonic families.
    #[default]
    Canonical,
    Lowering,
    Raising,
    Flipped,
    Annihilation,
}

impl OperatorChoice {
    pub fn assign(self, family: &StateFamily, dims: &SubsystemDims) -> Result<OperatorAssignment> {
        let n = dims.len();
        let resolved = match self {
            OperatorChoice::Canonical => match family {
                StateFamily::FlippedGhz { .. } => OperatorChoice::Flipped,
                StateFamily::NModeSqueezed { .. } | StateFamily::ModifiedFourMode { .. } => OperatorChoice::Annihilation,
                _ => OperatorChoice::Lowering,
            },
            other => other,
        };
        let qubits = dims.as_slice().iter().all(|&d| d == 2);
        match resolved {
            OperatorChoice::Annihilation => OperatorAssignment::truncated_annihilation(dims),
            _ if !qubits => Err(Error::BadParameter(format!("operator choice {resolved:?} needs qubit subsystems"))),
            OperatorChoice::Lowering => OperatorAssignment::qubit_lowering(n),
            OperatorChoice::Raising => OperatorAssignment::qubit_raising(n),
            OperatorChoice::Flipped => OperatorAssignment::flipped(n),
            OperatorChoice::Canonical => unreachable!(),
        }
    }
}

impl FromStr for OperatorChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "canonical" | "auto" => Ok(OperatorChoice::Canonical),
            "lowering" => Ok(OperatorChoice::Lowering),
            "raising" => Ok(OperatorChoice::Raising),
            "flipped" => Ok(OperatorChoice::Flipped),
            "annihilation" => Ok(OperatorChoice::Annihilation),
            other => Err(Error::BadParameter(format!("unknown operator choice `{other}`"))),
        }
    }
}

/// Both sides of both conditions for one state and operator assignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub lhs: f64,
    pub rhs1: f64,
    pub rhs2: f64,
    pub margin1: f64,
    pub margin2: f64,
    pub detected1: bool,
    pub detected2: bool,
    /// Effective tolerance: `detected_i ⇔ margin_i > epsilon`.
    pub epsilon: f64,
}

impl WitnessReport {
    /// Assembles a report; the base tolerance is scaled by `max(1, rhs1, rhs2)`.
    pub fn from_sides(lhs: f64, rhs1: f64, rhs2: f64, base_epsilon: f64) -> Self {
        let epsilon = base_epsilon * rhs1.max(rhs2).max(1.0);
        let margin1 = lhs - rhs1;
        let margin2 = lhs - rhs2;
        Self { lhs, rhs1, rhs2, margin1, margin2, detected1: margin1 > epsilon, detected2: margin2 > epsilon, epsilon }
    }
}

/// Which of the two conditions a check refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "both")]
    Both,
}

impl Condition {
    /// `margin1`, `margin2`, or the smaller of the two for `Both`.
    pub fn margin(self, report: &WitnessReport) -> f64 {
        match self {
            Condition::One => report.margin1,
            Condition::Two => report.margin2,
            Condition::Both => report.margin1.min(report.margin2),
        }
    }

    pub fn detected(self, report: &WitnessReport) -> bool {
        match self {
            Condition::One => report.detected1,
            Condition::Two => report.detected2,
            Condition::Both => report.detected1 && report.detected2,
        }
    }

    pub fn rhs(self, report: &WitnessReport) -> f64 {
        match self {
            Condition::One => report.rhs1,
            Condition::Two => report.rhs2,
            Condition::Both => report.rhs1.max(report.rhs2),
        }
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Condition::One),
            "2" => Ok(Condition::Two),
            "both" => Ok(Condition::Both),
            other => Err(Error::BadParameter(format!("condition must be 1, 2 or both, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalPath {
    /// Factorized everywhere; dense only when the eigenvalue-sum
    /// distribution outgrows `spectrum_cap`.
    #[default]
    Auto,
    Factorized,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Engine {
    pub dense_cap: usize,
    pub spectrum_cap: usize,
    pub psd_tol: f64,
    pub path: EvalPath,
}

impl Default for Engine {
    fn default() -> Self {
        Self { dense_cap: DEFAULT_DENSE_CAP, spectrum_cap: DEFAULT_SPECTRUM_CAP, psd_tol: PSD_TOL, path: EvalPath::Auto }
    }
}

impl Engine {
    pub fn dense() -> Self {
        Self { path: EvalPath::Dense, ..Self::default() }
    }

    pub fn factorized() -> Self {
        Self { path: EvalPath::Factorized, ..Self::default() }
    }

    /// `⟨∏_k A_k⟩`.
    pub fn product_expectation(&self, state: &State, ops: &OperatorAssignment) -> Result<C64> {
        ops.check(state.dims())?;
        if self.path == EvalPath::Dense {
            let full = kron_all(ops.ops(), self.dense_cap)?;
            return dense_expectation(state, &full, self.dense_cap);
        }
        let mut acc = C64::new(0.0, 0.0);
        for (w, psi) in state.components() {
            let mats: Vec<_> = ops.ops().iter().enumerate().map(|(k, a)| site_elements(psi, k, Some(a))).collect();
            acc += contract(psi, &mats) * w;
        }
        let white = state.white_noise_weight();
        if white > 0.0 {
            let traces: C64 = ops.ops().iter().map(|a| a.trace() / a.dim() as f64).product();
            acc += traces * white;
        }
        Ok(acc)
    }

    /// `⟨O_k⟩` for one local operator per subsystem.
    pub fn local_expectations(&self, state: &State, local: &[LocalOp]) -> Result<Vec<C64>> {
        let dims = state.dims();
        if local.len() != dims.len() {
            return Err(Error::DimensionMismatch { expected: dims.len(), found: local.len() });
        }
        for (k, op) in local.iter().enumerate() {
            if op.dim() != dims[k] {
                return Err(Error::DimensionMismatch { expected: dims[k], found: op.dim() });
            }
        }
        if self.path == EvalPath::Dense {
            return local
                .iter()
                .enumerate()
                .map(|(k, op)| {
                    let full = kron_embed(op, k, dims, self.dense_cap)?;
                    dense_expectation(state, &full, self.dense_cap)
                })
                .collect();
        }
        let n = dims.len();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (w, psi) in state.components() {
            let grams: Vec<_> = (0..n).map(|k| site_elements(psi, k, None)).collect();
            for (k, op) in local.iter().enumerate() {
                let mut mats = grams.clone();
                mats[k] = site_elements(psi, k, Some(op));
                out[k] += contract(psi, &mats) * w;
            }
        }
        let white = state.white_noise_weight();
        if white > 0.0 {
            for (k, op) in local.iter().enumerate() {
                out[k] += op.trace() / op.dim() as f64 * white;
            }
        }
        Ok(out)
    }

    /// `⟨A_k† A_k⟩` for every subsystem.
    pub fn local_moments(&self, state: &State, ops: &OperatorAssignment) -> Result<Vec<f64>> {
        ops.check(state.dims())?;
        let grams: Vec<_> = ops.ops().iter().map(LocalOp::gram).collect();
        Ok(self.local_expectations(state, &grams)?.into_iter().map(|z| z.re.max(0.0)).collect())
    }

    /// `∏_k ⟨(A_k† A_k)^{n/2}⟩^{1/n}`.
    pub fn rhs_condition1(&self, state: &State, ops: &OperatorAssignment) -> Result<f64> {
        ops.check(state.dims())?;
        let n = state.n_subsystems() as f64;
        let powers = ops
            .ops()
            .iter()
            .map(|a| psd_power(&a.gram(), n / 2.0, self.psd_tol))
            .collect::<Result<Vec<_>>>()?;
        let moments = self.local_expectations(state, &powers)?;
        Ok(moments.iter().map(|m| m.re.max(0.0).powf(1.0 / n)).product())
    }

    /// `⟨((1/n) Σ_k A_k† A_k)^{n/2}⟩`.
    pub fn rhs_condition2(&self, state: &State, ops: &OperatorAssignment) -> Result<f64> {
        ops.check(state.dims())?;
        match self.path {
            EvalPath::Dense => self.rhs2_dense(state, ops),
            EvalPath::Factorized => self.rhs2_factorized(state, ops),
            EvalPath::Auto => match self.rhs2_factorized(state, ops) {
                Err(Error::DimensionCap { .. }) => self.rhs2_dense(state, ops),
                other => other,
            },
        }
    }

    pub fn evaluate(&self, state: &State, ops: &OperatorAssignment, epsilon: f64) -> Result<WitnessReport> {
        let lhs = self.product_expectation(state, ops)?.norm();
        let rhs1 = self.rhs_condition1(state, ops)?;
        let rhs2 = self.rhs_condition2(state, ops)?;
        Ok(WitnessReport::from_sides(lhs, rhs1, rhs2, epsilon))
    }

    fn rhs2_factorized(&self, state: &State, ops: &OperatorAssignment) -> Result<f64> {
        let n = state.n_subsystems();
        let power = n as f64 / 2.0;
        let f = |s: f64| if s > 0.0 { (s / n as f64).powf(power) } else { 0.0 };
        let spectra = ops
            .ops()
            .iter()
            .map(|a| {
                let s = hermitian_spectrum(&a.gram(), self.psd_tol)?;
                check_psd(&s, self.psd_tol)?;
                Ok(s)
            })
            .collect::<Result<Vec<Spectrum>>>()?;

        let mut total = 0.0;
        for (w, psi) in state.components() {
            total += w * sum_power_pure(psi, &spectra, &f, self.spectrum_cap)?;
        }
        let white = state.white_noise_weight();
        if white > 0.0 {
            // Tr F(S) / D, with uniform weight 1/d_k on each local eigenvalue
            let sites: Vec<Vec<(f64, C64)>> = spectra
                .iter()
                .map(|s| {
                    let w = C64::new(1.0 / s.values.len() as f64, 0.0);
                    s.values.iter().map(|&v| (v, w)).collect()
                })
                .collect();
            total += white * spectral_sum(&sites, &f, self.spectrum_cap)?.re;
        }
        Ok(total.max(0.0))
    }

    fn rhs2_dense(&self, state: &State, ops: &OperatorAssignment) -> Result<f64> {
        let dims = state.dims();
        let n = dims.len();
        let mut sum = LocalOp::zeros(check_cap(dims, self.dense_cap)?);
        for (k, a) in ops.ops().iter().enumerate() {
            sum = sum.add(&kron_embed(&a.gram(), k, dims, self.dense_cap)?)?;
        }
        let averaged = sum.scaled(C64::new(1.0 / n as f64, 0.0));
        let powered = psd_power(&averaged, n as f64 / 2.0, self.psd_tol)?;
        Ok(dense_expectation(state, &powered, self.dense_cap)?.re.max(0.0))
    }
}

/// [`Engine::product_expectation`] with default settings.
pub fn product_expectation(state: &State, ops: &OperatorAssignment) -> Result<C64> {
    Engine::default().product_expectation(state, ops)
}

/// [`Engine::rhs_condition1`] with default settings.
pub fn rhs_condition1(state: &State, ops: &OperatorAssignment) -> Result<f64> {
    Engine::default().rhs_condition1(state, ops)
}

/// [`Engine::rhs_condition2`] with default settings.
pub fn rhs_condition2(state: &State, ops: &OperatorAssignment) -> Result<f64> {
    Engine::default().rhs_condition2(state, ops)
}

/// [`Engine::evaluate`] with default settings.
pub fn evaluate(state: &State, ops: &OperatorAssignment, epsilon: f64) -> Result<WitnessReport> {
    Engine::default().evaluate(state, ops, epsilon)
}

fn check_cap(dims: &SubsystemDims, cap: usize) -> Result<usize> {
    let total = dims.total();
    if total > cap {
        return Err(Error::DimensionCap { dim: total, cap });
    }
    Ok(total)
}

/// Local kets of subsystem `k` as the columns of a `d × T` matrix.
fn site_kets(psi: &PureSOP, k: usize) -> DMatrix<C64> {
    let d = psi.dims()[k];
    let terms = psi.terms();
    DMatrix::from_fn(d, terms.len(), |i, j| terms[j].locals[k].amplitudes()[i])
}

/// `M[j, j'] = ⟨u_{jk}| O |u_{j'k}⟩`, or the Gram matrix when `op` is `None`.
fn site_elements(psi: &PureSOP, k: usize, op: Option<&LocalOp>) -> DMatrix<C64> {
    let u = site_kets(psi, k);
    match op {
        Some(o) => u.adjoint() * (o.entries() * &u),
        None => u.adjoint() * &u,
    }
}

/// `Σ_{j,j'} c_j* c_{j'} ∏_k M_k[j, j']`.
fn contract(psi: &PureSOP, mats: &[DMatrix<C64>]) -> C64 {
    let terms = psi.terms();
    let mut acc = C64::new(0.0, 0.0);
    for (j, a) in terms.iter().enumerate() {
        for (jp, b) in terms.iter().enumerate() {
            let mut prod = a.amplitude.conj() * b.amplitude;
            for m in mats {
                if prod == C64::new(0.0, 0.0) {
                    break;
                }
                prod *= m[(j, jp)];
            }
            acc += prod;
        }
    }
    acc
}

/// `⟨ψ| F(Σ_k B_k) |ψ⟩` with `F` applied in the joint local eigenbasis.
fn sum_power_pure(psi: &PureSOP, spectra: &[Spectrum], f: &dyn Fn(f64) -> f64, cap: usize) -> Result<f64> {
    let zero = C64::new(0.0, 0.0);
    let terms = psi.terms();
    // support[k][j]: nonzero eigenbasis coordinates of term j's ket at site k
    let support: Vec<Vec<Vec<(usize, C64)>>> = spectra
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let u = site_kets(psi, k);
            let w = match &s.basis {
                None => u,
                Some(v) => v.adjoint() * u,
            };
            (0..terms.len())
                .map(|j| (0..w.nrows()).filter(|&i| w[(i, j)] != zero).map(|i| (i, w[(i, j)])).collect())
                .collect()
        })
        .collect();
    let mut total = 0.0;
    let mut sites: Vec<Vec<(f64, C64)>> = vec![Vec::new(); spectra.len()];
    for j in 0..terms.len() {
        'pairs: for jp in j..terms.len() {
            let amp = terms[j].amplitude.conj() * terms[jp].amplitude;
            if amp == zero {
                continue;
            }
            for (k, s) in spectra.iter().enumerate() {
                let site = &mut sites[k];
                site.clear();
                let (a, b) = (&support[k][j], &support[k][jp]);
                let (mut x, mut y) = (0, 0);
                while x < a.len() && y < b.len() {
                    match a[x].0.cmp(&b[y].0) {
                        std::cmp::Ordering::Less => x += 1,
                        std::cmp::Ordering::Greater => y += 1,
                        std::cmp::Ordering::Equal => {
                            site.push((s.values[a[x].0], a[x].1.conj() * b[y].1));
                            x += 1;
                            y += 1;
                        }
                    }
                }
                if site.is_empty() {
                    continue 'pairs;
                }
            }
            let value = amp * spectral_sum(&sites, f, cap)?;
            total += if j == jp { value.re } else { 2.0 * value.re };
        }
    }
    Ok(total)
}

/// `Σ_{i_1…i_n} (∏_k w_k[i_k]) F(Σ_k λ_k[i_k])` over sparse `(λ, w)` lists,
/// accumulated as a distribution over partial eigenvalue sums.
fn spectral_sum(sites: &[Vec<(f64, C64)>], f: &dyn Fn(f64) -> f64, cap: usize) -> Result<C64> {
    let zero = C64::new(0.0, 0.0);
    let mut dist: Vec<(f64, C64)> = vec![(0.0, C64::new(1.0, 0.0))];
    for site in sites {
        let mut next = Vec::with_capacity(dist.len() * site.len());
        for &(s, w) in &dist {
            for &(lambda, wk) in site {
                if wk != zero {
                    next.push((s + lambda, w * wk));
                }
            }
        }
        if next.is_empty() {
            return Ok(zero);
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, C64)> = Vec::with_capacity(next.len());
        for (s, w) in next {
            match merged.last_mut() {
                Some((last, acc)) if (s - *last).abs() <= SUM_MERGE_TOL * last.abs().max(1.0) => *acc += w,
                _ => merged.push((s, w)),
            }
        }
        if merged.len() > cap {
            return Err(Error::DimensionCap { dim: merged.len(), cap });
        }
        dist = merged;
    }
    Ok(dist.into_iter().map(|(s, w)| w * f(s)).sum())
}

/// `Tr(ρ M)` with `ρ` materialized component by component.
fn dense_expectation(state: &State, full: &LocalOp, cap: usize) -> Result<C64> {
    let dims = state.dims();
    let total = check_cap(dims, cap)?;
    if full.dim() != total {
        return Err(Error::DimensionMismatch { expected: total, found: full.dim() });
    }
    let mut acc = C64::new(0.0, 0.0);
    for (w, psi) in state.components() {
        let v = psi.to_dense();
        acc += v.amplitudes().dotc(&(full.entries() * v.amplitudes())) * w;
    }
    let white = state.white_noise_weight();
    if white > 0.0 {
        acc += full.trace() / total as f64 * white;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{build_state, MixedEnsemble, NoiseKind, ProductTerm};
    use crate::tensor::Ket;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn state(fam: StateFamily) -> State {
        build_state(&fam).unwrap()
    }

    fn random_op(d: usize, rng: &mut impl Rng) -> LocalOp {
        LocalOp::new(DMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))).unwrap()
    }

    #[test]
    fn ghz_lhs_is_cos_sin() {
        let s = state(StateFamily::Ghz { n: 3, theta: PI / 6.0 });
        let ops = OperatorAssignment::qubit_lowering(3).unwrap();
        let v = product_expectation(&s, &ops).unwrap();
        assert!((v.re - 3f64.sqrt() / 4.0).abs() < 1e-15);
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn lowering_annihilates_ground_product() {
        let s: State = PureSOP::product(vec![Ket::basis(2, 0); 4]).unwrap().into();
        let ops = OperatorAssignment::qubit_lowering(4).unwrap();
        assert_eq!(product_expectation(&s, &ops).unwrap(), C64::new(0.0, 0.0));
        let r = evaluate(&s, &ops, DEFAULT_EPSILON).unwrap();
        assert_eq!((r.lhs, r.rhs1, r.rhs2), (0.0, 0.0, 0.0));
        assert!(!r.detected1 && !r.detected2);
    }

    #[test]
    fn ghz_rhs_is_sin_squared_both_conditions() {
        let s = state(StateFamily::Ghz { n: 3, theta: PI / 6.0 });
        let ops = OperatorAssignment::qubit_lowering(3).unwrap();
        assert!((rhs_condition1(&s, &ops).unwrap() - 0.25).abs() < 1e-15);
        assert!((rhs_condition2(&s, &ops).unwrap() - 0.25).abs() < 1e-15);
        let r = evaluate(&s, &ops, DEFAULT_EPSILON).unwrap();
        assert!(r.detected1 && r.detected2);
    }

    #[test]
    fn ghz_equal_angle_not_detected() {
        let s = state(StateFamily::Ghz { n: 3, theta: PI / 4.0 });
        let r = evaluate(&s, &OperatorAssignment::qubit_lowering(3).unwrap(), DEFAULT_EPSILON).unwrap();
        assert!((r.lhs - 0.5).abs() < 1e-15 && (r.rhs1 - 0.5).abs() < 1e-15);
        assert!(!r.detected1 && !r.detected2);
    }

    #[test]
    fn white_noise_rhs1() {
        let (theta, p) = (0.4, 0.7);
        let s = state(StateFamily::NoisyGhz { n: 3, theta, p, noise: NoiseKind::White });
        let ops = OperatorAssignment::qubit_lowering(3).unwrap();
        let expected = p * theta.sin().powi(2) + (1.0 - p) / 2.0;
        assert!((rhs_condition1(&s, &ops).unwrap() - expected).abs() < 1e-14);
        let lhs = product_expectation(&s, &ops).unwrap().norm();
        assert!((lhs - p * theta.cos() * theta.sin()).abs() < 1e-15);
    }

    #[test]
    fn modified_four_mode_closed_forms() {
        let s = state(StateFamily::ModifiedFourMode { x: 0.5, cutoff: Some(40) });
        let ops = OperatorAssignment::truncated_annihilation(s.dims()).unwrap();
        let r = evaluate(&s, &ops, DEFAULT_EPSILON).unwrap();
        assert!((r.lhs - 16.0 / 9.0).abs() < 1e-12, "{}", r.lhs);
        assert!((r.rhs1 - 10.0 / 9.0).abs() < 1e-12, "{}", r.rhs1);
        assert!((r.rhs2 - 2.5625 / 2.25).abs() < 1e-12, "{}", r.rhs2);
    }

    #[test]
    fn two_group_equal_angles_rhs2() {
        let theta: f64 = 0.4;
        let s = state(StateFamily::TwoGroupGhz { n: 4, l: 2, theta1: theta, theta2: theta });
        let ops = OperatorAssignment::qubit_lowering(4).unwrap();
        let lhs = product_expectation(&s, &ops).unwrap().re;
        let rhs2 = rhs_condition2(&s, &ops).unwrap();
        let (c, sn) = (theta.cos(), theta.sin());
        // 2·rhs2 − lhs is the rearranged right side 2 sin⁴θ at equal angles
        assert!((2.0 * rhs2 - lhs - 2.0 * sn.powi(4)).abs() < 1e-14);
        assert!((rhs2 - (0.5 * c * c * sn * sn + sn.powi(4))).abs() < 1e-14);
    }

    #[test]
    fn two_group_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (t1, t2) = (0.3, 1.1);
        let s = state(StateFamily::TwoGroupGhz { n: 5, l: 2, theta1: t1, theta2: t2 });
        let g1 = state(StateFamily::Ghz { n: 2, theta: t1 });
        let g2 = state(StateFamily::Ghz { n: 3, theta: t2 });
        for _ in 0..5 {
            let ops: Vec<_> = (0..5).map(|_| random_op(2, &mut rng)).collect();
            let whole = product_expectation(&s, &OperatorAssignment::new(ops.clone()).unwrap()).unwrap();
            let a = product_expectation(&g1, &OperatorAssignment::new(ops[..2].to_vec()).unwrap()).unwrap();
            let b = product_expectation(&g2, &OperatorAssignment::new(ops[2..].to_vec()).unwrap()).unwrap();
            assert!((whole - a * b).norm() < 1e-13);
        }
    }

    #[test]
    fn squeezed_conditions_coincide() {
        for n in [2, 3, 4] {
            let s = state(StateFamily::NModeSqueezed { n, x: 0.6, cutoff: None });
            let ops = OperatorAssignment::truncated_annihilation(s.dims()).unwrap();
            let r = evaluate(&s, &ops, DEFAULT_EPSILON).unwrap();
            assert!((r.rhs1 - r.rhs2).abs() < 1e-9);
            assert!((r.lhs / r.rhs1 - 1.0 / 0.6).abs() < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_reported() {
        let s = state(StateFamily::Ghz { n: 3, theta: 0.2 });
        let ops = OperatorAssignment::qubit_lowering(4).unwrap();
        assert!(matches!(evaluate(&s, &ops, DEFAULT_EPSILON), Err(Error::DimensionMismatch { .. })));
        let ops = OperatorAssignment::new(vec![LocalOp::identity(2), LocalOp::identity(3), LocalOp::identity(2)]).unwrap();
        assert!(matches!(rhs_condition1(&s, &ops), Err(Error::DimensionMismatch { expected: 2, found: 3 })));
    }

    #[test]
    fn dense_cap_enforced() {
        let s = state(StateFamily::NoisyGhz { n: 10, theta: 0.2, p: 0.6, noise: NoiseKind::White });
        let ops = OperatorAssignment::qubit_lowering(10).unwrap();
        let engine = Engine { dense_cap: 256, ..Engine::dense() };
        assert!(matches!(engine.rhs_condition2(&s, &ops), Err(Error::DimensionCap { dim: 1024, cap: 256 })));
        // eleven distinct eigenvalue sums 0..=10 from the white-noise part
        let tight = Engine { spectrum_cap: 4, dense_cap: 256, ..Engine::default() };
        assert!(matches!(tight.rhs_condition2(&s, &ops), Err(Error::DimensionCap { .. })));
        let fallback = Engine { spectrum_cap: 4, ..Engine::default() };
        let v = fallback.rhs_condition2(&s, &ops).unwrap();
        let fast = rhs_condition2(&s, &ops).unwrap();
        assert!((v - fast).abs() < 1e-12);
    }

    #[test]
    fn phase_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = state(StateFamily::MixedSingleOut { n: 3, theta: 0.3, thetas: vec![0.2, 0.9, 1.4] });
        let ops = OperatorAssignment::new((0..3).map(|_| random_op(2, &mut rng)).collect()).unwrap();
        let base = evaluate(&s, &ops, DEFAULT_EPSILON).unwrap();
        let rotated = evaluate(&s, &ops.with_phases(&[0.7, -2.1, 3.0]), DEFAULT_EPSILON).unwrap();
        for (a, b) in [(base.lhs, rotated.lhs), (base.rhs1, rotated.rhs1), (base.rhs2, rotated.rhs2)] {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(base.detected1, rotated.detected1);
        assert_eq!(base.detected2, rotated.detected2);
    }

    #[test]
    fn factorized_matches_dense_on_random_sop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let dims = SubsystemDims::new((0..3).map(|_| rng.random_range(1..4)).collect()).unwrap();
            let n_terms = rng.random_range(1..4);
            let terms = (0..n_terms)
                .map(|_| {
                    let locals = dims
                        .as_slice()
                        .iter()
                        .map(|&d| Ket::new((0..d).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()).unwrap().normalized().unwrap())
                        .collect();
                    ProductTerm::new(C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)), locals)
                })
                .collect();
            let psi = PureSOP::new(dims.clone(), terms).unwrap();
            let white = if trial % 2 == 0 { 0.3 } else { 0.0 };
            let s: State = MixedEnsemble::new(dims.clone(), vec![1.0 - white], vec![psi], white).unwrap().into();
            let ops = OperatorAssignment::new(dims.as_slice().iter().map(|&d| random_op(d, &mut rng)).collect()).unwrap();
            let fast = Engine::factorized().evaluate(&s, &ops, DEFAULT_EPSILON).unwrap();
            let dense = Engine::dense().evaluate(&s, &ops, DEFAULT_EPSILON).unwrap();
            for (a, b) in [(fast.lhs, dense.lhs), (fast.rhs1, dense.rhs1), (fast.rhs2, dense.rhs2)] {
                assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "trial {trial}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn epsilon_scaling() {
        let r = WitnessReport::from_sides(10.0, 5.0, 20.0, 1e-9);
        assert_eq!(r.epsilon, 20.0 * 1e-9);
        assert!(r.detected1 && !r.detected2);
        let r = WitnessReport::from_sides(0.25 + 5e-10, 0.25, 0.25, 1e-9);
        assert!(!r.detected1);
    }

    #[test]
    fn report_json_schema() {
        let r = WitnessReport::from_sides(0.5, 0.25, 0.25, 1e-9);
        let v = serde_json::to_value(r).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        for k in ["lhs", "rhs1", "rhs2", "margin1", "margin2", "detected1", "detected2", "epsilon"] {
            assert!(keys.contains(&k.to_string()), "{k}");
        }
        assert_eq!(keys.len(), 8);
    }

    #[test]
    fn operator_choice_resolution() {
        let fam = StateFamily::FlippedGhz { n: 3, theta: 0.2 };
        let s = state(fam.clone());
        let ops = OperatorChoice::Canonical.assign(&fam, s.dims()).unwrap();
        assert_eq!(ops, OperatorAssignment::flipped(3).unwrap());
        let cv = StateFamily::ModifiedFourMode { x: 0.3, cutoff: None };
        let s = state(cv.clone());
        assert!(OperatorChoice::Lowering.assign(&cv, s.dims()).is_err());
        assert_eq!("Raising".parse::<OperatorChoice>().unwrap(), OperatorChoice::Raising);
        assert!("sideways".parse::<OperatorChoice>().is_err());
    }
}
