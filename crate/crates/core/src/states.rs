//! Sum-of-products states and the parametric example families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{kron_kets, Ket, SubsystemDims, C64};

/// Default bound on the discarded Fock-space probability `x^{2(M+1)}`.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

const LOCAL_NORM_TOL: f64 = 1e-12;

/// One amplitude-weighted product `c ⊗_k |u_k⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductTerm {
    pub amplitude: C64,
    pub locals: Vec<Ket>,
}

impl ProductTerm {
    pub fn new(amplitude: C64, locals: Vec<Ket>) -> Self {
        Self { amplitude, locals }
    }

    pub fn real(amplitude: f64, locals: Vec<Ket>) -> Self {
        Self::new(C64::new(amplitude, 0.0), locals)
    }
}

/// A pure state `Σ_j c_j ⊗_k |u_{jk}⟩` with unit global norm.
#[derive(Debug, Clone, PartialEq)]
pub struct PureSOP {
    dims: SubsystemDims,
    terms: Vec<ProductTerm>,
}

impl PureSOP {
    /// Validates shapes and local normalization, then rescales the amplitudes
    /// so the global norm is one.
    pub fn new(dims: SubsystemDims, terms: Vec<ProductTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::BadParameter("a pure state needs at least one term".into()));
        }
        for term in &terms {
            if term.locals.len() != dims.len() {
                return Err(Error::DimensionMismatch { expected: dims.len(), found: term.locals.len() });
            }
            for (k, ket) in term.locals.iter().enumerate() {
                if ket.dim() != dims[k] {
                    return Err(Error::DimensionMismatch { expected: dims[k], found: ket.dim() });
                }
                if (ket.norm() - 1.0).abs() > LOCAL_NORM_TOL {
                    return Err(Error::BadParameter(format!("local ket at subsystem {k} is not normalized")));
                }
            }
            if !term.amplitude.re.is_finite() || !term.amplitude.im.is_finite() {
                return Err(Error::BadParameter("amplitudes must be finite".into()));
            }
        }
        let mut state = Self { dims, terms };
        let norm = state.norm_sqr().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::BadParameter("state has zero norm".into()));
        }
        if (norm - 1.0).abs() > 1e-14 {
            for t in &mut state.terms {
                t.amplitude /= norm;
            }
        }
        Ok(state)
    }

    /// A single product `⊗_k |u_k⟩`.
    pub fn product(locals: Vec<Ket>) -> Result<Self> {
        let dims = SubsystemDims::new(locals.iter().map(Ket::dim).collect())?;
        Self::new(dims, vec![ProductTerm::real(1.0, locals)])
    }

    pub fn dims(&self) -> &SubsystemDims {
        &self.dims
    }

    pub fn terms(&self) -> &[ProductTerm] {
        &self.terms
    }

    pub fn n_subsystems(&self) -> usize {
        self.dims.len()
    }

    /// `⟨ψ|ψ⟩` from the pairwise product of local overlaps.
    pub fn norm_sqr(&self) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for a in &self.terms {
            for b in &self.terms {
                let overlap: C64 = a
                    .locals
                    .iter()
                    .zip(&b.locals)
                    .map(|(u, v)| u.amplitudes().dotc(v.amplitudes()))
                    .product();
                acc += a.amplitude.conj() * b.amplitude * overlap;
            }
        }
        acc.re
    }

    /// Full state vector, subsystem 0 leftmost.
    pub fn to_dense(&self) -> Ket {
        let mut acc: Option<nalgebra::DVector<C64>> = None;
        for t in &self.terms {
            let v = kron_kets(&t.locals).amplitudes() * t.amplitude;
            acc = Some(match acc {
                None => v,
                Some(a) => a + v,
            });
        }
        Ket::from_vector(acc.expect("non-empty by construction"))
    }
}

/// `Σ_i w_i |ψ_i⟩⟨ψ_i| + w_white · I/∏d`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedEnsemble {
    dims: SubsystemDims,
    weights: Vec<f64>,
    pures: Vec<PureSOP>,
    white_noise_weight: f64,
}

impl MixedEnsemble {
    pub fn new(dims: SubsystemDims, weights: Vec<f64>, pures: Vec<PureSOP>, white_noise_weight: f64) -> Result<Self> {
        if weights.len() != pures.len() {
            return Err(Error::DimensionMismatch { expected: pures.len(), found: weights.len() });
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || !(0.0..=1.0).contains(&white_noise_weight) {
            return Err(Error::BadParameter("mixture weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum::<f64>() + white_noise_weight;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::BadParameter(format!("mixture weights sum to {total}, not 1")));
        }
        if let Some(p) = pures.iter().find(|p| p.dims() != &dims) {
            return Err(Error::DimensionMismatch { expected: dims.total(), found: p.dims().total() });
        }
        Ok(Self { dims, weights, pures, white_noise_weight })
    }

    pub fn dims(&self) -> &SubsystemDims {
        &self.dims
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn pures(&self) -> &[PureSOP] {
        &self.pures
    }

    pub fn white_noise_weight(&self) -> f64 {
        self.white_noise_weight
    }

    pub fn components(&self) -> impl Iterator<Item = (f64, &PureSOP)> {
        self.weights.iter().copied().zip(&self.pures)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Pure(PureSOP),
    Mixed(MixedEnsemble),
}

impl State {
    pub fn dims(&self) -> &SubsystemDims {
        match self {
            State::Pure(p) => p.dims(),
            State::Mixed(m) => m.dims(),
        }
    }

    pub fn n_subsystems(&self) -> usize {
        self.dims().len()
    }

    /// Weighted pure components; a pure state is one component of weight 1.
    pub fn components(&self) -> Vec<(f64, &PureSOP)> {
        match self {
            State::Pure(p) => vec![(1.0, p)],
            State::Mixed(m) => m.components().collect(),
        }
    }

    pub fn white_noise_weight(&self) -> f64 {
        match self {
            State::Pure(_) => 0.0,
            State::Mixed(m) => m.white_noise_weight(),
        }
    }

    pub fn as_pure(&self) -> Option<&PureSOP> {
        match self {
            State::Pure(p) => Some(p),
            State::Mixed(_) => None,
        }
    }

    pub fn as_mixed(&self) -> Option<&MixedEnsemble> {
        match self {
            State::Mixed(m) => Some(m),
            State::Pure(_) => None,
        }
    }
}

impl From<PureSOP> for State {
    fn from(p: PureSOP) -> Self {
        State::Pure(p)
    }
}

impl From<MixedEnsemble> for State {
    fn from(m: MixedEnsemble) -> Self {
        State::Mixed(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// `(1−p) |0…0⟩⟨0…0|`.
    Ground,
    /// `(1−p) I/2^n`.
    White,
}

/// Parametric description of the example state families. Angles are in
/// radians. Serialized as `{"family": tag, "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params")]
pub enum StateFamily {
    /// `cos θ |0⟩^⊗n + sin θ |1⟩^⊗n`.
    #[serde(rename = "GHZ")]
    Ghz { n: usize, theta: f64 },
    /// `cos θ |1⟩|0⟩^⊗(n−1) + sin θ |0⟩|1⟩^⊗(n−1)`.
    #[serde(rename = "FlippedGHZ")]
    FlippedGhz { n: usize, theta: f64 },
    /// GHZ(θ₁) on the first `l` qubits ⊗ GHZ(θ₂) on the remaining `n − l`.
    #[serde(rename = "TwoGroupGHZ")]
    TwoGroupGhz { n: usize, l: usize, theta1: f64, theta2: f64 },
    /// `l` single-qubit factors `cos θ_i|0⟩ + sin θ_i|1⟩` followed by an
    /// `(n − l)`-qubit GHZ(θ) block.
    LSeparable { n: usize, l: usize, theta: f64, thetas: Vec<f64> },
    /// `(1/n) Σ_i |ψ_i⟩⟨ψ_i|` with qubit `i` in `cos θ_i|0⟩ + sin θ_i|1⟩` and
    /// the other `n − 1` qubits in GHZ(θ).
    MixedSingleOut { n: usize, theta: f64, thetas: Vec<f64> },
    /// `p |GHZ(θ)⟩⟨GHZ(θ)| + (1 − p) · noise`.
    #[serde(rename = "NoisyGHZ")]
    NoisyGhz { n: usize, theta: f64, p: f64, noise: NoiseKind },
    /// `√(1−x²) Σ_m x^m |m⟩^⊗n`, truncated at `m ≤ cutoff`.
    #[serde(rename = "NModeSqueezed")]
    NModeSqueezed {
        n: usize,
        x: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<usize>,
    },
    /// `√(1−x²) Σ_m x^m |m⟩|m⟩|m+1⟩|m+1⟩`, truncated at `m ≤ cutoff`.
    ModifiedFourMode {
        x: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<usize>,
    },
}

impl StateFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            StateFamily::Ghz { .. } => "GHZ",
            StateFamily::FlippedGhz { .. } => "FlippedGHZ",
            StateFamily::TwoGroupGhz { .. } => "TwoGroupGHZ",
            StateFamily::LSeparable { .. } => "LSeparable",
            StateFamily::MixedSingleOut { .. } => "MixedSingleOut",
            StateFamily::NoisyGhz { .. } => "NoisyGHZ",
            StateFamily::NModeSqueezed { .. } => "NModeSqueezed",
            StateFamily::ModifiedFourMode { .. } => "ModifiedFourMode",
        }
    }

    /// A representative member of the family named `tag`.
    pub fn default_for(tag: &str) -> Option<Self> {
        use std::f64::consts::PI;
        Some(match tag {
            "GHZ" => StateFamily::Ghz { n: 3, theta: PI / 6.0 },
            "FlippedGHZ" => StateFamily::FlippedGhz { n: 3, theta: PI / 6.0 },
            "TwoGroupGHZ" => StateFamily::TwoGroupGhz { n: 3, l: 1, theta1: PI / 4.0, theta2: 0.1 },
            "LSeparable" => StateFamily::LSeparable { n: 6, l: 1, theta: 0.1, thetas: vec![PI / 4.0] },
            "MixedSingleOut" => {
                let mut thetas = vec![0.0; 8];
                thetas[0] = PI / 4.0;
                StateFamily::MixedSingleOut { n: 8, theta: 0.02, thetas }
            }
            "NoisyGHZ" => StateFamily::NoisyGhz { n: 3, theta: PI / 8.0, p: 0.8, noise: NoiseKind::White },
            "NModeSqueezed" => StateFamily::NModeSqueezed { n: 3, x: 0.5, cutoff: None },
            "ModifiedFourMode" => StateFamily::ModifiedFourMode { x: 0.5, cutoff: None },
            _ => return None,
        })
    }

    pub fn n_subsystems(&self) -> usize {
        match self {
            StateFamily::Ghz { n, .. }
            | StateFamily::FlippedGhz { n, .. }
            | StateFamily::TwoGroupGhz { n, .. }
            | StateFamily::LSeparable { n, .. }
            | StateFamily::MixedSingleOut { n, .. }
            | StateFamily::NoisyGhz { n, .. }
            | StateFamily::NModeSqueezed { n, .. } => *n,
            StateFamily::ModifiedFourMode { .. } => 4,
        }
    }

    /// Names of the real parameters that [`StateFamily::with_param`] accepts.
    /// `thetas` sets every entry of the per-site angle list.
    pub fn scalar_params(&self) -> &'static [&'static str] {
        match self {
            StateFamily::Ghz { .. } | StateFamily::FlippedGhz { .. } => &["theta"],
            StateFamily::TwoGroupGhz { .. } => &["theta1", "theta2"],
            StateFamily::LSeparable { .. } | StateFamily::MixedSingleOut { .. } => &["theta", "thetas"],
            StateFamily::NoisyGhz { .. } => &["theta", "p"],
            StateFamily::NModeSqueezed { .. } | StateFamily::ModifiedFourMode { .. } => &["x"],
        }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        match (self, name) {
            (StateFamily::Ghz { theta, .. }, "theta")
            | (StateFamily::FlippedGhz { theta, .. }, "theta")
            | (StateFamily::LSeparable { theta, .. }, "theta")
            | (StateFamily::MixedSingleOut { theta, .. }, "theta")
            | (StateFamily::NoisyGhz { theta, .. }, "theta") => Some(*theta),
            (StateFamily::TwoGroupGhz { theta1, .. }, "theta1") => Some(*theta1),
            (StateFamily::TwoGroupGhz { theta2, .. }, "theta2") => Some(*theta2),
            (StateFamily::NoisyGhz { p, .. }, "p") => Some(*p),
            (StateFamily::NModeSqueezed { x, .. }, "x") | (StateFamily::ModifiedFourMode { x, .. }, "x") => Some(*x),
            (StateFamily::LSeparable { thetas, .. }, "thetas") | (StateFamily::MixedSingleOut { thetas, .. }, "thetas") => {
                thetas.first().copied()
            }
            _ => None,
        }
    }

    /// Copy with parameter `name` set to `value`. Unknown names are a
    /// `BadParameter`; range checks happen in [`build_state`].
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut out = self.clone();
        let slot: &mut f64 = match (&mut out, name) {
            (StateFamily::Ghz { theta, .. }, "theta")
            | (StateFamily::FlippedGhz { theta, .. }, "theta")
            | (StateFamily::LSeparable { theta, .. }, "theta")
            | (StateFamily::MixedSingleOut { theta, .. }, "theta")
            | (StateFamily::NoisyGhz { theta, .. }, "theta") => theta,
            (StateFamily::TwoGroupGhz { theta1, .. }, "theta1") => theta1,
            (StateFamily::TwoGroupGhz { theta2, .. }, "theta2") => theta2,
            (StateFamily::NoisyGhz { p, .. }, "p") => p,
            (StateFamily::NModeSqueezed { x, .. }, "x") | (StateFamily::ModifiedFourMode { x, .. }, "x") => x,
            (StateFamily::LSeparable { thetas, .. }, "thetas") | (StateFamily::MixedSingleOut { thetas, .. }, "thetas") => {
                thetas.iter_mut().for_each(|t| *t = value);
                return Ok(out);
            }
            _ => {
                return Err(Error::BadParameter(format!("family {} has no parameter `{name}`", self.tag())));
            }
        };
        *slot = value;
        Ok(out)
    }
}

/// Discarded probability `Σ_{m>M} (1−x²) x^{2m} = x^{2(M+1)}`.
pub fn tail_weight(x: f64, cutoff: usize) -> f64 {
    let e = 2.0 * (cutoff as f64 + 1.0);
    x.abs().powf(e)
}

/// Smallest cutoff `M ≥ 1` with `tail_weight(x, M) ≤ tolerance`.
pub fn auto_cutoff(x: f64, tolerance: f64) -> usize {
    let guess = (tolerance.ln() / (2.0 * x.ln())).ceil() as isize - 1;
    let mut m = guess.max(1) as usize;
    while m > 1 && tail_weight(x, m - 1) <= tolerance {
        m -= 1;
    }
    while tail_weight(x, m) > tolerance {
        m += 1;
    }
    m
}

/// Builds a family with the default tail tolerance.
pub fn build_state(family: &StateFamily) -> Result<State> {
    build_state_with(family, DEFAULT_TAIL_TOL)
}

pub fn build_state_with(family: &StateFamily, tail_tol: f64) -> Result<State> {
    match family {
        StateFamily::Ghz { n, theta } => ghz(*n, *theta).map(State::Pure),
        StateFamily::FlippedGhz { n, theta } => {
            check_n(*n)?;
            check_angle("theta", *theta)?;
            let mut first = vec![Ket::basis(2, 1)];
            first.extend(std::iter::repeat_n(Ket::basis(2, 0), n - 1));
            let mut second = vec![Ket::basis(2, 0)];
            second.extend(std::iter::repeat_n(Ket::basis(2, 1), n - 1));
            let terms = vec![ProductTerm::real(theta.cos(), first), ProductTerm::real(theta.sin(), second)];
            PureSOP::new(SubsystemDims::uniform(*n, 2)?, terms).map(State::Pure)
        }
        StateFamily::TwoGroupGhz { n, l, theta1, theta2 } => {
            check_n(*n)?;
            check_angle("theta1", *theta1)?;
            check_angle("theta2", *theta2)?;
            if *l == 0 || *l >= *n {
                return Err(Error::BadParameter(format!("two-group split needs 1 ≤ l ≤ n−1, got l = {l}, n = {n}")));
            }
            let amp = |b: usize, t: f64| if b == 0 { t.cos() } else { t.sin() };
            let mut terms = Vec::with_capacity(4);
            for b1 in 0..2 {
                for b2 in 0..2 {
                    let mut locals = vec![Ket::basis(2, b1); *l];
                    locals.extend(std::iter::repeat_n(Ket::basis(2, b2), n - l));
                    terms.push(ProductTerm::real(amp(b1, *theta1) * amp(b2, *theta2), locals));
                }
            }
            PureSOP::new(SubsystemDims::uniform(*n, 2)?, terms).map(State::Pure)
        }
        StateFamily::LSeparable { n, l, theta, thetas } => {
            check_n(*n)?;
            check_angle("theta", *theta)?;
            if *l >= *n {
                return Err(Error::BadParameter(format!("need l ≤ n−1, got l = {l}, n = {n}")));
            }
            if thetas.len() != *l {
                return Err(Error::BadParameter(format!("expected {l} single-site angles, got {}", thetas.len())));
            }
            for t in thetas {
                check_angle("thetas", *t)?;
            }
            let singles: Vec<Ket> = thetas.iter().map(|&t| Ket::qubit(t)).collect();
            let terms = (0..2)
                .map(|b| {
                    let mut locals = singles.clone();
                    locals.extend(std::iter::repeat_n(Ket::basis(2, b), n - l));
                    ProductTerm::real(if b == 0 { theta.cos() } else { theta.sin() }, locals)
                })
                .collect();
            PureSOP::new(SubsystemDims::uniform(*n, 2)?, terms).map(State::Pure)
        }
        StateFamily::MixedSingleOut { n, theta, thetas } => {
            check_n(*n)?;
            check_angle("theta", *theta)?;
            if thetas.len() != *n {
                return Err(Error::BadParameter(format!("expected {n} single-site angles, got {}", thetas.len())));
            }
            for t in thetas {
                check_angle("thetas", *t)?;
            }
            let dims = SubsystemDims::uniform(*n, 2)?;
            let pures = (0..*n)
                .map(|i| {
                    let terms = (0..2)
                        .map(|b| {
                            let locals = (0..*n).map(|k| if k == i { Ket::qubit(thetas[i]) } else { Ket::basis(2, b) }).collect();
                            ProductTerm::real(if b == 0 { theta.cos() } else { theta.sin() }, locals)
                        })
                        .collect();
                    PureSOP::new(dims.clone(), terms)
                })
                .collect::<Result<Vec<_>>>()?;
            MixedEnsemble::new(dims, vec![1.0 / *n as f64; *n], pures, 0.0).map(State::Mixed)
        }
        StateFamily::NoisyGhz { n, theta, p, noise } => {
            if !(*p > 0.0 && *p < 1.0) {
                return Err(Error::BadParameter(format!("p must lie in (0, 1), got {p}")));
            }
            let psi = ghz(*n, *theta)?;
            let dims = psi.dims().clone();
            match noise {
                NoiseKind::Ground => {
                    let ground = PureSOP::product(vec![Ket::basis(2, 0); *n])?;
                    MixedEnsemble::new(dims, vec![*p, 1.0 - p], vec![psi, ground], 0.0)
                }
                NoiseKind::White => MixedEnsemble::new(dims, vec![*p], vec![psi], 1.0 - p),
            }
            .map(State::Mixed)
        }
        StateFamily::NModeSqueezed { n, x, cutoff } => {
            check_n(*n)?;
            let m_max = resolve_cutoff(*x, *cutoff, tail_tol)?;
            let dims = SubsystemDims::uniform(*n, m_max + 1)?;
            let amps = truncated_geometric(*x, m_max);
            let terms = amps
                .iter()
                .enumerate()
                .map(|(m, &c)| ProductTerm::real(c, vec![Ket::basis(m_max + 1, m); *n]))
                .collect();
            PureSOP::new(dims, terms).map(State::Pure)
        }
        StateFamily::ModifiedFourMode { x, cutoff } => {
            let m_max = resolve_cutoff(*x, *cutoff, tail_tol)?;
            let (lo, hi) = (m_max + 1, m_max + 2);
            let dims = SubsystemDims::new(vec![lo, lo, hi, hi])?;
            let amps = truncated_geometric(*x, m_max);
            let terms = amps
                .iter()
                .enumerate()
                .map(|(m, &c)| {
                    let locals = vec![Ket::basis(lo, m), Ket::basis(lo, m), Ket::basis(hi, m + 1), Ket::basis(hi, m + 1)];
                    ProductTerm::real(c, locals)
                })
                .collect();
            PureSOP::new(dims, terms).map(State::Pure)
        }
    }
}

/// Cutoff actually used for a continuous-variable family (None for qubits).
pub fn effective_cutoff(family: &StateFamily, tail_tol: f64) -> Result<Option<usize>> {
    match family {
        StateFamily::NModeSqueezed { x, cutoff, .. } | StateFamily::ModifiedFourMode { x, cutoff } => {
            resolve_cutoff(*x, *cutoff, tail_tol).map(Some)
        }
        _ => Ok(None),
    }
}

fn ghz(n: usize, theta: f64) -> Result<PureSOP> {
    check_n(n)?;
    check_angle("theta", theta)?;
    let terms = vec![
        ProductTerm::real(theta.cos(), vec![Ket::basis(2, 0); n]),
        ProductTerm::real(theta.sin(), vec![Ket::basis(2, 1); n]),
    ];
    PureSOP::new(SubsystemDims::uniform(n, 2)?, terms)
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::BadParameter(format!("need n ≥ 2 subsystems, got {n}")));
    }
    Ok(())
}

fn check_angle(name: &str, theta: f64) -> Result<()> {
    if !theta.is_finite() {
        return Err(Error::BadParameter(format!("{name} must be finite")));
    }
    Ok(())
}

fn resolve_cutoff(x: f64, cutoff: Option<usize>, tail_tol: f64) -> Result<usize> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::BadParameter(format!("x must lie in (0, 1), got {x}")));
    }
    match cutoff {
        None => Ok(auto_cutoff(x, tail_tol)),
        Some(0) => Err(Error::BadParameter("cutoff must be ≥ 1".into())),
        Some(m) => {
            let tail = tail_weight(x, m);
            if tail > tail_tol {
                return Err(Error::TruncationTooCoarse { x, cutoff: m, tail, tolerance: tail_tol });
            }
            Ok(m)
        }
    }
}

/// `c_m ∝ x^m` for `m = 0..=M`, normalized over the retained terms.
fn truncated_geometric(x: f64, m_max: usize) -> Vec<f64> {
    let mut amps = Vec::with_capacity(m_max + 1);
    let mut c = 1.0;
    for _ in 0..=m_max {
        amps.push(c);
        c *= x;
    }
    let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    amps
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn nonzero_terms(p: &PureSOP) -> usize {
        p.terms().iter().filter(|t| t.amplitude.norm() > 1e-15).count()
    }

    #[test]
    fn ghz_transcription() {
        let s = build_state(&StateFamily::Ghz { n: 3, theta: PI / 6.0 }).unwrap();
        let p = s.as_pure().unwrap();
        assert_eq!(p.terms().len(), 2);
        assert_eq!(p.terms()[0].amplitude.re, (PI / 6.0).cos());
        assert_eq!(p.terms()[1].amplitude.re, (PI / 6.0).sin());
        assert!(p.terms()[0].locals.iter().all(|k| *k == Ket::basis(2, 0)));
        assert!(p.terms()[1].locals.iter().all(|k| *k == Ket::basis(2, 1)));
    }

    #[test]
    fn noisy_ghz_weights() {
        let s = build_state(&StateFamily::NoisyGhz { n: 3, theta: PI / 6.0, p: 0.8, noise: NoiseKind::White }).unwrap();
        let m = s.as_mixed().unwrap();
        assert_eq!(m.weights(), &[0.8]);
        assert!((m.white_noise_weight() - 0.2).abs() < 1e-15);
        let g = build_state(&StateFamily::NoisyGhz { n: 3, theta: PI / 6.0, p: 0.8, noise: NoiseKind::Ground }).unwrap();
        let g = g.as_mixed().unwrap();
        assert_eq!(g.pures().len(), 2);
        assert_eq!(g.white_noise_weight(), 0.0);
        assert!(build_state(&StateFamily::NoisyGhz { n: 3, theta: 0.1, p: 1.0, noise: NoiseKind::White }).is_err());
    }

    #[test]
    fn squeezed_amplitudes_geometric_and_normalized() {
        let s = build_state(&StateFamily::NModeSqueezed { n: 3, x: 0.5, cutoff: Some(40) }).unwrap();
        let p = s.as_pure().unwrap();
        assert_eq!(p.terms().len(), 41);
        assert!((p.norm_sqr() - 1.0).abs() < 1e-12);
        // sqrt(1 - x²) up to a tail below 1e-24
        assert!((p.terms()[0].amplitude.re - (0.75f64).sqrt()).abs() < 1e-14);
        for w in p.terms().windows(2) {
            let ratio = w[1].amplitude.re / w[0].amplitude.re;
            assert!((ratio - 0.5).abs() < 1e-14);
        }
        assert!(tail_weight(0.5, 40) < 1e-24);
    }

    #[test]
    fn tail_weight_values() {
        assert!((tail_weight(0.5, 10) - 0.25f64.powi(11)).abs() < 1e-22);
        assert!((tail_weight(0.5, 10) - 2.384185791015625e-7).abs() < 1e-20);
        assert!((tail_weight(0.9, 0) - 0.81).abs() < 1e-15);
        assert!(tail_weight(0.99, 100_000) == 0.0);
    }

    #[test]
    fn auto_cutoff_is_smallest() {
        for &x in &[0.01, 0.1, 0.1397, 0.5, 0.9, 0.99] {
            let m = auto_cutoff(x, DEFAULT_TAIL_TOL);
            assert!(tail_weight(x, m) <= DEFAULT_TAIL_TOL);
            assert!(m == 1 || tail_weight(x, m - 1) > DEFAULT_TAIL_TOL, "x = {x}, m = {m}");
        }
    }

    #[test]
    fn coarse_cutoff_rejected() {
        let err = build_state(&StateFamily::ModifiedFourMode { x: 0.5, cutoff: Some(5) }).unwrap_err();
        assert!(matches!(err, Error::TruncationTooCoarse { cutoff: 5, .. }));
        assert!(build_state(&StateFamily::ModifiedFourMode { x: 1.0, cutoff: None }).is_err());
        assert!(build_state(&StateFamily::NModeSqueezed { n: 3, x: 0.5, cutoff: Some(0) }).is_err());
    }

    #[test]
    fn product_limits_have_single_nonzero_term() {
        for theta in [0.0, PI / 2.0] {
            for fam in [StateFamily::Ghz { n: 4, theta }, StateFamily::FlippedGhz { n: 4, theta }] {
                let s = build_state(&fam).unwrap();
                assert_eq!(nonzero_terms(s.as_pure().unwrap()), 1);
            }
        }
    }

    #[test]
    fn term_counts() {
        let tg = build_state(&StateFamily::TwoGroupGhz { n: 5, l: 2, theta1: 0.3, theta2: 0.7 }).unwrap();
        assert_eq!(tg.as_pure().unwrap().terms().len(), 4);
        let mix = build_state(&StateFamily::MixedSingleOut { n: 4, theta: 0.2, thetas: vec![0.1, 0.2, 0.3, 0.4] }).unwrap();
        let mix = mix.as_mixed().unwrap();
        assert_eq!(mix.pures().len(), 4);
        assert!(mix.weights().iter().all(|&w| w == 0.25));
        let four = build_state(&StateFamily::ModifiedFourMode { x: 0.5, cutoff: Some(40) }).unwrap();
        let four = four.as_pure().unwrap();
        assert_eq!(four.terms().len(), 41);
        assert_eq!(four.dims().as_slice(), &[41, 41, 42, 42]);
    }

    #[test]
    fn every_family_normalized() {
        let fams = [
            StateFamily::Ghz { n: 5, theta: 0.4 },
            StateFamily::FlippedGhz { n: 3, theta: 1.1 },
            StateFamily::TwoGroupGhz { n: 4, l: 1, theta1: 0.9, theta2: -0.3 },
            StateFamily::LSeparable { n: 6, l: 2, theta: 0.3, thetas: vec![0.5, 1.2] },
            StateFamily::MixedSingleOut { n: 3, theta: 0.2, thetas: vec![0.1, 0.7, 1.3] },
            StateFamily::NoisyGhz { n: 3, theta: 0.2, p: 0.3, noise: NoiseKind::Ground },
            StateFamily::NModeSqueezed { n: 4, x: 0.9, cutoff: None },
            StateFamily::ModifiedFourMode { x: 0.1397, cutoff: None },
        ];
        for fam in &fams {
            let s = build_state(fam).unwrap();
            for (_, p) in s.components() {
                assert!((p.norm_sqr() - 1.0).abs() < 1e-10, "{fam:?}");
                if p.dims().total() <= 1 << 16 {
                    assert!((p.to_dense().norm() - 1.0).abs() < 1e-10, "{fam:?}");
                }
            }
        }
    }

    #[test]
    fn lseparable_factor_order() {
        let s = build_state(&StateFamily::LSeparable { n: 4, l: 2, theta: 0.3, thetas: vec![0.5, 1.2] }).unwrap();
        let p = s.as_pure().unwrap();
        for t in p.terms() {
            assert_eq!(t.locals[0], Ket::qubit(0.5));
            assert_eq!(t.locals[1], Ket::qubit(1.2));
        }
        assert_eq!(p.terms()[1].locals[3], Ket::basis(2, 1));
    }

    #[test]
    fn bad_shapes_rejected() {
        assert!(build_state(&StateFamily::TwoGroupGhz { n: 3, l: 3, theta1: 0.1, theta2: 0.1 }).is_err());
        assert!(build_state(&StateFamily::Ghz { n: 1, theta: 0.1 }).is_err());
        assert!(build_state(&StateFamily::LSeparable { n: 4, l: 2, theta: 0.3, thetas: vec![0.5] }).is_err());
        assert!(build_state(&StateFamily::Ghz { n: 3, theta: f64::NAN }).is_err());
    }

    #[test]
    fn family_json_shape() {
        let fam: StateFamily = serde_json::from_str(r#"{"family":"GHZ","params":{"n":3,"theta":0.5236}}"#).unwrap();
        assert_eq!(fam, StateFamily::Ghz { n: 3, theta: 0.5236 });
        let v = serde_json::to_value(StateFamily::NoisyGhz { n: 3, theta: 0.1, p: 0.5, noise: NoiseKind::White }).unwrap();
        assert_eq!(v["family"], "NoisyGHZ");
        assert_eq!(v["params"]["noise"], "white");
        let back: StateFamily = serde_json::from_value(v).unwrap();
        assert_eq!(back.param("p"), Some(0.5));
        let four: StateFamily = serde_json::from_str(r#"{"family":"ModifiedFourMode","params":{"x":0.3}}"#).unwrap();
        assert_eq!(four, StateFamily::ModifiedFourMode { x: 0.3, cutoff: None });
    }

    #[test]
    fn param_overrides() {
        let fam = StateFamily::TwoGroupGhz { n: 4, l: 2, theta1: 0.1, theta2: 0.2 };
        let f2 = fam.with_param("theta1", 0.5).unwrap().with_param("theta2", 0.5).unwrap();
        assert_eq!(f2.param("theta1"), Some(0.5));
        assert!(fam.with_param("x", 0.5).is_err());
        let ls = StateFamily::LSeparable { n: 6, l: 2, theta: 0.1, thetas: vec![0.0, 0.0] };
        match ls.with_param("thetas", 0.7).unwrap() {
            StateFamily::LSeparable { thetas, .. } => assert_eq!(thetas, vec![0.7, 0.7]),
            _ => unreachable!(),
        }
        for tag in ["GHZ", "FlippedGHZ", "TwoGroupGHZ", "LSeparable", "MixedSingleOut", "NoisyGHZ", "NModeSqueezed", "ModifiedFourMode"] {
            let fam = StateFamily::default_for(tag).unwrap();
            assert_eq!(fam.tag(), tag);
            assert!(build_state(&fam).is_ok());
        }
    }
}
