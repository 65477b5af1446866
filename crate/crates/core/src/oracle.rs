//! Randomized ground truth: separable ensembles never violate either bound,
//! and the operator-power lemma `⟨B⟩^p ≤ ⟨B^p⟩` holds.
//!
//! Every trial draws from its own ChaCha stream whose seed is derived from
//! the master seed and the trial index, so serial and parallel runs agree.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::{MixedEnsemble, ProductTerm, PureSOP, State};
use crate::tensor::{hermitian_spectrum, psd_power, Ket, LocalOp, SubsystemDims, C64, PSD_TOL};
use crate::witness::{Engine, OperatorAssignment};

/// Margins below this count as a violation of a separable bound.
pub const SEPARABLE_VIOLATION: f64 = -1e-9;
/// Lemma margins below this count as a violation.
pub const LEMMA_VIOLATION: f64 = -1e-10;

pub const MAX_SUBSYSTEMS: usize = 5;
pub const MAX_LOCAL_DIM: usize = 4;
pub const MAX_TERMS: usize = 6;

const DENSITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparableSpec {
    pub dims: SubsystemDims,
    pub n_terms: usize,
    pub seed: u64,
}

impl SeparableSpec {
    pub fn new(dims: SubsystemDims, n_terms: usize, seed: u64) -> Result<Self> {
        if dims.len() > MAX_SUBSYSTEMS {
            return Err(Error::BadParameter(format!("at most {MAX_SUBSYSTEMS} subsystems, got {}", dims.len())));
        }
        if dims.as_slice().iter().any(|&d| d > MAX_LOCAL_DIM) {
            return Err(Error::BadParameter(format!("local dimensions must be ≤ {MAX_LOCAL_DIM}")));
        }
        if !(1..=MAX_TERMS).contains(&n_terms) {
            return Err(Error::BadParameter(format!("mixture needs 1..={MAX_TERMS} terms, got {n_terms}")));
        }
        Ok(Self { dims, n_terms, seed })
    }
}

/// SplitMix64 finalizer; decorrelates consecutive trial indices.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn trial_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

fn complex_normal(rng: &mut impl Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random pure state of dimension `dim`.
pub fn haar_ket(dim: usize, rng: &mut impl Rng) -> Ket {
    let amps: Vec<C64> = (0..dim).map(|_| complex_normal(rng)).collect();
    let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ket::new(amps.into_iter().map(|z| z / norm).collect()).expect("finite Gaussian sample")
}

/// Uniform sample from the probability simplex with `k` vertices.
pub fn flat_simplex(k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Square matrix with independent complex standard-normal entries.
pub fn gaussian_op(dim: usize, rng: &mut impl Rng) -> LocalOp {
    LocalOp::new(DMatrix::from_fn(dim, dim, |_, _| complex_normal(rng))).expect("finite Gaussian sample")
}

pub fn random_assignment(dims: &SubsystemDims, rng: &mut impl Rng) -> OperatorAssignment {
    let ops = dims.as_slice().iter().map(|&d| gaussian_op(d, rng)).collect();
    OperatorAssignment::new(ops).expect("at least two subsystems")
}

/// `G G†` for Gaussian `G`: full-rank PSD almost surely.
pub fn random_psd(dim: usize, rng: &mut impl Rng) -> LocalOp {
    gaussian_op(dim, rng).dagger().gram()
}

/// `W W† / Tr(W W†)` for Gaussian `W`.
pub fn random_density(dim: usize, rng: &mut impl Rng) -> LocalOp {
    let w = gaussian_op(dim, rng).dagger().gram();
    let tr = w.trace().re;
    w.scaled(C64::new(1.0 / tr, 0.0))
}

pub fn sample_separable(spec: &SeparableSpec) -> MixedEnsemble {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    sample_separable_with(&spec.dims, spec.n_terms, &mut rng)
}

fn sample_separable_with(dims: &SubsystemDims, n_terms: usize, rng: &mut impl Rng) -> MixedEnsemble {
    let weights = flat_simplex(n_terms, rng);
    let pures = (0..n_terms)
        .map(|_| {
            let locals = dims.as_slice().iter().map(|&d| haar_ket(d, rng)).collect();
            PureSOP::new(dims.clone(), vec![ProductTerm::real(1.0, locals)]).expect("normalized product")
        })
        .collect();
    MixedEnsemble::new(dims.clone(), weights, pures, 0.0).expect("valid mixture")
}

/// `(rhs1 − lhs, rhs2 − lhs)`; both are non-negative for any separable state.
pub fn check_separable_bounds(state: &MixedEnsemble, ops: &OperatorAssignment) -> Result<(f64, f64)> {
    check_separable_bounds_with(&Engine::default(), state, ops)
}

pub fn check_separable_bounds_with(engine: &Engine, state: &MixedEnsemble, ops: &OperatorAssignment) -> Result<(f64, f64)> {
    let state = State::Mixed(state.clone());
    let lhs = engine.product_expectation(&state, ops)?.norm();
    let rhs1 = engine.rhs_condition1(&state, ops)?;
    let rhs2 = engine.rhs_condition2(&state, ops)?;
    Ok((rhs1 - lhs, rhs2 - lhs))
}

fn validate_density(rho: &LocalOp) -> Result<()> {
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
        return Err(Error::InvalidDensityMatrix(format!("trace is {tr}, not 1")));
    }
    let spectrum = hermitian_spectrum(rho, DENSITY_TOL)
        .map_err(|e| Error::InvalidDensityMatrix(e.to_string()))?;
    if spectrum.min() < -DENSITY_TOL {
        return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {:.3e}", spectrum.min())));
    }
    Ok(())
}

/// `Tr(ρ B^p) − Tr(ρ B)^p` for PSD `B` and `p > 1`.
pub fn check_lemma(b: &LocalOp, rho: &LocalOp, p: f64) -> Result<f64> {
    if b.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: b.dim(), found: rho.dim() });
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::BadParameter(format!("lemma power must exceed 1, got {p}")));
    }
    validate_density(rho)?;
    let bp = psd_power(b, p, PSD_TOL)?;
    let mean = |op: &LocalOp| (rho.entries() * op.entries()).trace().re;
    Ok(mean(&bp) - mean(b).max(0.0).powf(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub trials: usize,
    pub seed: u64,
    pub max_n: usize,
    pub max_dim: usize,
    pub max_terms: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { trials: 10_000, seed: 0, max_n: 4, max_dim: 3, max_terms: 4 }
    }
}

impl OracleConfig {
    fn validate(&self) -> Result<()> {
        if !(2..=MAX_SUBSYSTEMS).contains(&self.max_n) {
            return Err(Error::BadParameter(format!("max-n must lie in 2..={MAX_SUBSYSTEMS}")));
        }
        if !(1..=MAX_LOCAL_DIM).contains(&self.max_dim) {
            return Err(Error::BadParameter(format!("max-dim must lie in 1..={MAX_LOCAL_DIM}")));
        }
        if !(1..=MAX_TERMS).contains(&self.max_terms) {
            return Err(Error::BadParameter(format!("max-terms must lie in 1..={MAX_TERMS}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparableTrial {
    pub index: usize,
    pub seed: u64,
    pub n: usize,
    pub margin1: f64,
    pub margin2: f64,
}

impl SeparableTrial {
    pub fn violated(&self) -> bool {
        self.margin1 < SEPARABLE_VIOLATION || self.margin2 < SEPARABLE_VIOLATION
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableSummary {
    pub config: OracleConfig,
    pub passed: usize,
    pub failed: usize,
    pub worst_margin1: f64,
    pub worst_margin2: f64,
    /// Seed of the trial with the smallest margin.
    pub worst_seed: u64,
    pub violations: Vec<SeparableTrial>,
}

/// One seeded trial: random shape, random ensemble, random operators.
pub fn separable_trial(config: &OracleConfig, index: usize) -> Result<SeparableTrial> {
    let seed = trial_seed(config.seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=config.max_n);
    let dims = SubsystemDims::new((0..n).map(|_| rng.random_range(1..=config.max_dim)).collect())?;
    let n_terms = rng.random_range(1..=config.max_terms);
    let state = sample_separable_with(&dims, n_terms, &mut rng);
    let ops = random_assignment(&dims, &mut rng);
    let (margin1, margin2) = check_separable_bounds(&state, &ops)?;
    Ok(SeparableTrial { index, seed, n, margin1, margin2 })
}

pub fn run_separable(config: &OracleConfig) -> Result<SeparableSummary> {
    config.validate()?;
    let trials: Vec<SeparableTrial> =
        (0..config.trials).into_par_iter().map(|i| separable_trial(config, i)).collect::<Result<_>>()?;
    let mut summary = SeparableSummary {
        config: *config,
        passed: 0,
        failed: 0,
        worst_margin1: f64::INFINITY,
        worst_margin2: f64::INFINITY,
        worst_seed: 0,
        violations: Vec::new(),
    };
    let mut worst = f64::INFINITY;
    for t in trials {
        summary.worst_margin1 = summary.worst_margin1.min(t.margin1);
        summary.worst_margin2 = summary.worst_margin2.min(t.margin2);
        if t.margin1.min(t.margin2) < worst {
            worst = t.margin1.min(t.margin2);
            summary.worst_seed = t.seed;
        }
        if t.violated() {
            summary.failed += 1;
            summary.violations.push(t);
        } else {
            summary.passed += 1;
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSummary {
    pub trials: usize,
    pub seed: u64,
    pub dim: usize,
    pub passed: usize,
    pub failed: usize,
    pub worst_margin: f64,
}

pub const LEMMA_POWERS: [f64; 3] = [1.5, 2.0, 3.0];

/// `(1 − t)|v⟩⟨v| + t σ` for an eigenvector `v` of `b` and random `σ`;
/// the lemma margin is close to zero for small `t`.
pub fn near_eigenstate_density(b: &LocalOp, t: f64, rng: &mut impl Rng) -> Result<LocalOp> {
    let dim = b.dim();
    let spectrum = hermitian_spectrum(b, PSD_TOL)?;
    let k = rng.random_range(0..dim);
    let v = match spectrum.basis {
        Some(basis) => basis.column(k).into_owned(),
        None => Ket::basis(dim, k).amplitudes().clone(),
    };
    let pure = &v * v.adjoint();
    let sigma = random_density(dim, rng);
    LocalOp::new(pure.scale(1.0 - t) + sigma.entries().scale(t))
}

/// Random `(B, ρ, p)` triples with `p` cycling through [`LEMMA_POWERS`].
/// Odd trials place `ρ` within `t ≤ 1e-3` of an eigenstate of `B`.
pub fn run_lemma(trials: usize, seed: u64, dim: usize) -> Result<LemmaSummary> {
    if dim == 0 {
        return Err(Error::BadParameter("lemma dimension must be ≥ 1".into()));
    }
    let margins: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, i as u64));
            let b = random_psd(dim, &mut rng);
            let rho = if i % 2 == 1 {
                let t = 1e-3 * rng.random::<f64>();
                near_eigenstate_density(&b, t, &mut rng)?
            } else {
                random_density(dim, &mut rng)
            };
            check_lemma(&b, &rho, LEMMA_POWERS[i % LEMMA_POWERS.len()])
        })
        .collect::<Result<_>>()?;
    let failed = margins.iter().filter(|&&m| m < LEMMA_VIOLATION).count();
    Ok(LemmaSummary {
        trials,
        seed,
        dim,
        passed: trials - failed,
        failed,
        worst_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
    })
}
