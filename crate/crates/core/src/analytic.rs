//! Closed-form expressions for the worked examples.
//!
//! Every [`FormulaId`] evaluates to a pair `(lhs, rhs)`:
//!
//! - identity tags give the defining amplitude sum of a witness quantity on
//!   the untruncated state (`lhs`) and its printed closed form (`rhs`);
//! - inequality tags give both sides of the printed inequality, which may be
//!   an algebraic rearrangement of the raw witness sides. [`rearrange`]
//!   applies the same rearrangement to numeric witness values so the two can
//!   be compared directly.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::StateFamily;
use crate::witness::{Condition, WitnessReport};

/// Convergence tolerance for the infinite Fock-space sums.
pub const SERIES_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FormulaId {
    GhzLhs,
    GhzRhs,
    NoisyCond1,
    TwogroupC1,
    TwogroupC2,
    #[serde(rename = "TG_L1N3_C1")]
    TgL1n3C1,
    #[serde(rename = "TG_L1N3_C2")]
    TgL1n3C2,
    #[serde(rename = "TG_L2N4_C1")]
    TgL2n4C1,
    #[serde(rename = "TG_L2N4_C2")]
    TgL2n4C2,
    TgAsympC1,
    TgAsympC2,
    LsepC1,
    MixedC1,
    MixedC2,
    MixedAsympC1,
    MixedAsympC2,
    SqzLhs,
    SqzRhs,
    Mod4Lhs,
    Mod4Rhs1,
    Mod4Rhs2,
    BipartiteC1,
    BipartiteC2,
}

/// Witness quantity an identity tag describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Lhs,
    Rhs1,
    Rhs2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulaKind {
    /// Exact closed form of one witness quantity.
    Identity(Quantity),
    /// Exact (possibly rearranged) form of one condition.
    Inequality(Condition),
    /// Large-`n` approximation of one condition; only qualitative agreement.
    Asymptotic(Condition),
}

impl FormulaId {
    pub const ALL: [FormulaId; 23] = [
        FormulaId::GhzLhs,
        FormulaId::GhzRhs,
        FormulaId::NoisyCond1,
        FormulaId::TwogroupC1,
        FormulaId::TwogroupC2,
        FormulaId::TgL1n3C1,
        FormulaId::TgL1n3C2,
        FormulaId::TgL2n4C1,
        FormulaId::TgL2n4C2,
        FormulaId::TgAsympC1,
        FormulaId::TgAsympC2,
        FormulaId::LsepC1,
        FormulaId::MixedC1,
        FormulaId::MixedC2,
        FormulaId::MixedAsympC1,
        FormulaId::MixedAsympC2,
        FormulaId::SqzLhs,
        FormulaId::SqzRhs,
        FormulaId::Mod4Lhs,
        FormulaId::Mod4Rhs1,
        FormulaId::Mod4Rhs2,
        FormulaId::BipartiteC1,
        FormulaId::BipartiteC2,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            FormulaId::GhzLhs => "GHZ_LHS",
            FormulaId::GhzRhs => "GHZ_RHS",
            FormulaId::NoisyCond1 => "NOISY_COND1",
            FormulaId::TwogroupC1 => "TWOGROUP_C1",
            FormulaId::TwogroupC2 => "TWOGROUP_C2",
            FormulaId::TgL1n3C1 => "TG_L1N3_C1",
            FormulaId::TgL1n3C2 => "TG_L1N3_C2",
            FormulaId::TgL2n4C1 => "TG_L2N4_C1",
            FormulaId::TgL2n4C2 => "TG_L2N4_C2",
            FormulaId::TgAsympC1 => "TG_ASYMP_C1",
            FormulaId::TgAsympC2 => "TG_ASYMP_C2",
            FormulaId::LsepC1 => "LSEP_C1",
            FormulaId::MixedC1 => "MIXED_C1",
            FormulaId::MixedC2 => "MIXED_C2",
            FormulaId::MixedAsympC1 => "MIXED_ASYMP_C1",
            FormulaId::MixedAsympC2 => "MIXED_ASYMP_C2",
            FormulaId::SqzLhs => "SQZ_LHS",
            FormulaId::SqzRhs => "SQZ_RHS",
            FormulaId::Mod4Lhs => "MOD4_LHS",
            FormulaId::Mod4Rhs1 => "MOD4_RHS1",
            FormulaId::Mod4Rhs2 => "MOD4_RHS2",
            FormulaId::BipartiteC1 => "BIPARTITE_C1",
            FormulaId::BipartiteC2 => "BIPARTITE_C2",
        }
    }

    pub fn kind(self) -> FormulaKind {
        use FormulaKind::*;
        match self {
            FormulaId::GhzLhs | FormulaId::SqzLhs | FormulaId::Mod4Lhs => Identity(Quantity::Lhs),
            FormulaId::GhzRhs | FormulaId::SqzRhs | FormulaId::Mod4Rhs1 => Identity(Quantity::Rhs1),
            FormulaId::Mod4Rhs2 => Identity(Quantity::Rhs2),
            FormulaId::NoisyCond1
            | FormulaId::TwogroupC1
            | FormulaId::TgL1n3C1
            | FormulaId::TgL2n4C1
            | FormulaId::LsepC1
            | FormulaId::MixedC1
            | FormulaId::BipartiteC1 => Inequality(Condition::One),
            FormulaId::TwogroupC2
            | FormulaId::TgL1n3C2
            | FormulaId::TgL2n4C2
            | FormulaId::MixedC2
            | FormulaId::BipartiteC2 => Inequality(Condition::Two),
            FormulaId::TgAsympC1 | FormulaId::MixedAsympC1 => Asymptotic(Condition::One),
            FormulaId::TgAsympC2 | FormulaId::MixedAsympC2 => Asymptotic(Condition::Two),
        }
    }

    /// How the printed sides relate to the raw witness sides `(L, R)`.
    pub fn rearrangement(self) -> &'static str {
        match self {
            FormulaId::GhzLhs | FormulaId::SqzLhs | FormulaId::Mod4Lhs => "value of L",
            FormulaId::GhzRhs | FormulaId::SqzRhs | FormulaId::Mod4Rhs1 => "value of R1",
            FormulaId::Mod4Rhs2 => "value of R2",
            FormulaId::NoisyCond1 => "both sides divided by p",
            FormulaId::TwogroupC1 | FormulaId::TwogroupC2 | FormulaId::TgL2n4C1 => "as is",
            FormulaId::TgL1n3C1 => "both sides divided by |sin θ2|/2",
            FormulaId::TgL1n3C2 => "both sides multiplied by 2",
            FormulaId::TgL2n4C2 => "both sides multiplied by 2, then L subtracted (valid for cos θ1 sin θ1 cos θ2 sin θ2 ≥ 0)",
            FormulaId::TgAsympC1 | FormulaId::TgAsympC2 => {
                "both sides divided by |cos θ1 sin θ1 sin θ2|, large-n approximation"
            }
            FormulaId::LsepC1 => "both sides divided by |sin θ ∏ cos θi sin θi|",
            FormulaId::MixedC1 | FormulaId::MixedC2 => "both sides multiplied by n",
            FormulaId::MixedAsympC1 | FormulaId::MixedAsympC2 => {
                "both sides multiplied by 2n/|sin θ|, large-n approximation"
            }
            FormulaId::BipartiteC1 | FormulaId::BipartiteC2 => "both sides squared",
        }
    }
}

/// Moments entering the two-party forms: `|⟨AB⟩|`, `⟨A†A⟩`, `⟨B†B⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BipartiteMoments {
    pub ab: f64,
    pub aa: f64,
    pub bb: f64,
}

/// Symbol values for the closed forms. Unused fields may stay `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FormulaParams {
    pub n: Option<usize>,
    pub l: Option<usize>,
    pub theta: Option<f64>,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub thetas: Option<Vec<f64>>,
    pub p: Option<f64>,
    pub x: Option<f64>,
    pub moments: Option<BipartiteMoments>,
}

impl FormulaParams {
    /// Picks up every symbol a family carries.
    pub fn from_family(family: &StateFamily) -> Self {
        let mut out = FormulaParams { n: Some(family.n_subsystems()), ..Default::default() };
        match family {
            StateFamily::Ghz { theta, .. } | StateFamily::FlippedGhz { theta, .. } => out.theta = Some(*theta),
            StateFamily::TwoGroupGhz { l, theta1, theta2, .. } => {
                out.l = Some(*l);
                out.theta1 = Some(*theta1);
                out.theta2 = Some(*theta2);
            }
            StateFamily::LSeparable { l, theta, thetas, .. } => {
                out.l = Some(*l);
                out.theta = Some(*theta);
                out.thetas = Some(thetas.clone());
            }
            StateFamily::MixedSingleOut { theta, thetas, .. } => {
                out.theta = Some(*theta);
                out.thetas = Some(thetas.clone());
            }
            StateFamily::NoisyGhz { theta, p, .. } => {
                out.theta = Some(*theta);
                out.p = Some(*p);
            }
            StateFamily::NModeSqueezed { x, .. } | StateFamily::ModifiedFourMode { x, .. } => out.x = Some(*x),
        }
        out
    }

    pub fn with_moments(mut self, moments: BipartiteMoments) -> Self {
        self.moments = Some(moments);
        self
    }

    fn n(&self) -> Result<usize> {
        self.n.ok_or(Error::MissingParameter("n"))
    }
    fn l(&self) -> Result<usize> {
        self.l.ok_or(Error::MissingParameter("l"))
    }
    fn theta(&self) -> Result<f64> {
        self.theta.ok_or(Error::MissingParameter("theta"))
    }
    fn theta1(&self) -> Result<f64> {
        self.theta1.ok_or(Error::MissingParameter("theta1"))
    }
    fn theta2(&self) -> Result<f64> {
        self.theta2.ok_or(Error::MissingParameter("theta2"))
    }
    fn thetas(&self) -> Result<&[f64]> {
        self.thetas.as_deref().ok_or(Error::MissingParameter("thetas"))
    }
    fn p(&self) -> Result<f64> {
        self.p.ok_or(Error::MissingParameter("p"))
    }
    fn x(&self) -> Result<f64> {
        let x = self.x.ok_or(Error::MissingParameter("x"))?;
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::BadParameter(format!("x must lie in (0, 1), got {x}")));
        }
        Ok(x)
    }
    fn moments(&self) -> Result<BipartiteMoments> {
        self.moments.ok_or(Error::MissingParameter("moments"))
    }
}

/// The rounded constants of the `l = 1, n = 3` second condition,
/// `(2ab, a, b)` with `a² = 1 + (2/3)^{3/2}` and `b² = (1/3)^{3/2}`.
pub fn tg_l1n3_coefficients() -> (f64, f64, f64) {
    let (a2, b2) = tg_l1n3_quadratic();
    let (a, b) = (a2.sqrt(), b2.sqrt());
    (2.0 * a * b, a, b)
}

/// `(a², b²)`: the coefficients of `sin²θ2` and `cos²θ2` in twice the
/// second right-hand side at `l = 1`, `n = 3`, `θ1 = π/4`.
pub fn tg_l1n3_quadratic() -> (f64, f64) {
    (1.0 + (2.0f64 / 3.0).powf(1.5), (1.0f64 / 3.0).powf(1.5))
}

/// Evaluates both printed sides of formula `id`.
pub fn closed_form(id: FormulaId, params: &FormulaParams) -> Result<(f64, f64)> {
    use FormulaId::*;
    Ok(match id {
        GhzLhs => {
            let t = params.theta()?;
            // only the cross term between |0…0⟩ and |1…1⟩ survives
            let v = (t.cos() * t.sin()).abs();
            (v, v)
        }
        GhzRhs => {
            let (n, t) = (params.n()? as f64, params.theta()?);
            let per_site = t.sin().powi(2);
            (per_site.powf(n).powf(1.0 / n), t.sin().powi(2))
        }
        NoisyCond1 => {
            let (t, p) = (params.theta()?, params.p()?);
            ((t.cos() * t.sin()).abs(), t.sin().powi(2) + (1.0 - p) / (2.0 * p))
        }
        TwogroupC1 => {
            let (n, l) = (params.n()? as f64, params.l()? as f64);
            let (t1, t2) = (params.theta1()?, params.theta2()?);
            let lhs = (t1.cos() * t1.sin() * t2.cos() * t2.sin()).abs();
            let rhs = (t1.sin().abs().powf(2.0 * l) * t2.sin().abs().powf(2.0 * (n - l))).powf(1.0 / n);
            (lhs, rhs)
        }
        TwogroupC2 => {
            let (n, l) = (params.n()? as f64, params.l()? as f64);
            let (t1, t2) = (params.theta1()?, params.theta2()?);
            let (c1, s1, c2, s2) = (t1.cos(), t1.sin(), t2.cos(), t2.sin());
            let lhs = (c1 * s1 * c2 * s2).abs();
            let rhs = ((n - l) / n).powf(n / 2.0) * c1 * c1 * s2 * s2
                + (l / n).powf(n / 2.0) * c2 * c2 * s1 * s1
                + s1 * s1 * s2 * s2;
            (lhs, rhs)
        }
        TgL1n3C1 => {
            let t2 = params.theta2()?;
            (t2.cos().abs(), (4.0 * t2.sin().abs()).cbrt())
        }
        TgL1n3C2 => {
            let t2 = params.theta2()?;
            let (cs, s, c) = ((t2.cos() * t2.sin()).abs(), t2.sin().abs(), t2.cos().abs());
            let (two_ab, a, b) = tg_l1n3_coefficients();
            (cs, two_ab * cs + (a * s - b * c).powi(2))
        }
        TgL2n4C1 => {
            let (t1, t2) = (params.theta1()?, params.theta2()?);
            ((t1.cos() * t1.sin() * t2.cos() * t2.sin()).abs(), (t1.sin() * t2.sin()).abs())
        }
        TgL2n4C2 => {
            let (t1, t2) = (params.theta1()?, params.theta2()?);
            let (c1, s1, c2, s2) = (t1.cos(), t1.sin(), t2.cos(), t2.sin());
            let lhs = (c1 * s1 * c2 * s2).abs();
            (lhs, 0.5 * (c1 * s2 - c2 * s1).powi(2) + 2.0 * s1 * s1 * s2 * s2)
        }
        TgAsympC1 => {
            let (t1, t2) = (params.theta1()?, params.theta2()?);
            (t2.cos().abs(), t2.sin().abs() / (t1.cos() * t1.sin()).abs())
        }
        TgAsympC2 => {
            let l = params.l()? as f64;
            let (t1, t2) = (params.theta1()?, params.theta2()?);
            let damp = (-l / 2.0).exp();
            let factor = damp + (1.0 - damp) * t1.sin().powi(2);
            (t2.cos().abs(), t2.sin().abs() / (t1.cos() * t1.sin()).abs() * factor)
        }
        LsepC1 => {
            let (n, l) = (params.n()? as f64, params.l()? as f64);
            let t = params.theta()?;
            let thetas = params.thetas()?;
            let denom: f64 = thetas.iter().map(|ti| (ti.cos() * ti.sin().abs().powf(1.0 - 2.0 / n)).abs()).product();
            (t.cos().abs(), t.sin().abs().powf((n - 2.0 * l) / n) / denom)
        }
        MixedC1 => {
            let (n, t) = (params.n()? as f64, params.theta()?);
            let thetas = params.thetas()?;
            let s2 = t.sin().powi(2);
            let lhs = (t.cos() * t.sin() * thetas.iter().map(|ti| ti.cos() * ti.sin()).sum::<f64>()).abs();
            let rhs = thetas.iter().map(|ti| ti.sin().powi(2) + (n - 1.0) * s2).product::<f64>().powf(1.0 / n);
            (lhs, rhs)
        }
        MixedC2 => {
            let (n, t) = (params.n()? as f64, params.theta()?);
            let thetas = params.thetas()?;
            let (c2, s2) = (t.cos().powi(2), t.sin().powi(2));
            let lhs = (t.cos() * t.sin() * thetas.iter().map(|ti| ti.cos() * ti.sin()).sum::<f64>()).abs();
            let sum_c: f64 = thetas.iter().map(|ti| ti.cos().powi(2)).sum();
            let sum_s: f64 = thetas.iter().map(|ti| ti.sin().powi(2)).sum();
            let rhs = ((n - 1.0) / n).powf(n / 2.0) * s2 * sum_c + (1.0 / n).powf(n / 2.0) * c2 * sum_s + s2 * sum_s;
            (lhs, rhs)
        }
        MixedAsympC1 => {
            let (n, t) = (params.n()? as f64, params.theta()?);
            (t.cos().abs(), 2.0 * (n - 1.0) * t.sin().abs())
        }
        MixedAsympC2 => {
            let (n, t) = (params.n()? as f64, params.theta()?);
            (t.cos().abs(), (2.0 / E.sqrt() * (n - 0.5) + 1.0) * t.sin().abs())
        }
        SqzLhs => {
            let (n, x) = (params.n()? as f64, params.x()?);
            let c = |m: f64| (1.0 - x * x).sqrt() * x.powf(m);
            // Σ_m c_{m-1} c_m (√m)^n, shifted to start at m = 0
            let defining = sum_series(|m| c(m) * c(m + 1.0) * (m + 1.0).powf(n / 2.0));
            let printed = (1.0 - x * x) / x * sum_series(|m| x.powf(2.0 * m) * m.powf(n / 2.0));
            (defining, printed)
        }
        SqzRhs => {
            let (n, x) = (params.n()? as f64, params.x()?);
            let c2 = |m: f64| (1.0 - x * x) * x.powf(2.0 * m);
            let per_mode = sum_series(|m| c2(m) * m.powf(n / 2.0));
            let defining = per_mode.powf(n).powf(1.0 / n);
            let printed = (1.0 - x * x) * sum_series(|m| x.powf(2.0 * m) * m.powf(n / 2.0));
            (defining, printed)
        }
        Mod4Lhs => {
            let x = params.x()?;
            let c = |m: f64| (1.0 - x * x).sqrt() * x.powf(m);
            // ∏ a_k |m,m,m+1,m+1⟩ = m(m+1) |m−1,m−1,m,m⟩
            let defining = sum_series(|m| c(m) * c(m + 1.0) * (m + 1.0) * (m + 2.0));
            (defining, 2.0 * x / (1.0 - x * x).powi(2))
        }
        Mod4Rhs1 => {
            let x = params.x()?;
            let c2 = |m: f64| (1.0 - x * x) * x.powf(2.0 * m);
            let low = sum_series(|m| c2(m) * m * m);
            let high = sum_series(|m| c2(m) * (m + 1.0) * (m + 1.0));
            let defining = (low * low * high * high).powf(0.25);
            (defining, x * (1.0 + x * x) / (1.0 - x * x).powi(2))
        }
        Mod4Rhs2 => {
            let x = params.x()?;
            let c2 = |m: f64| (1.0 - x * x) * x.powf(2.0 * m);
            let defining = sum_series(|m| c2(m) * ((4.0 * m + 2.0) / 4.0).powi(2));
            (defining, (x.powi(4) + 6.0 * x * x + 1.0) / (4.0 * (1.0 - x * x).powi(2)))
        }
        BipartiteC1 => {
            let m = params.moments()?;
            (m.ab * m.ab, m.aa * m.bb)
        }
        BipartiteC2 => {
            let m = params.moments()?;
            (m.ab * m.ab, m.aa * m.bb + 0.25 * (m.aa - m.bb).powi(2))
        }
    })
}

/// Maps the raw witness sides for the relevant condition onto the printed
/// form of `id`. Identity tags return the quantity twice.
pub fn rearrange(id: FormulaId, report: &WitnessReport, params: &FormulaParams) -> Result<(f64, f64)> {
    use FormulaId::*;
    let (lhs, rhs) = match id.kind() {
        FormulaKind::Identity(q) => {
            let v = match q {
                Quantity::Lhs => report.lhs,
                Quantity::Rhs1 => report.rhs1,
                Quantity::Rhs2 => report.rhs2,
            };
            return Ok((v, v));
        }
        FormulaKind::Inequality(c) | FormulaKind::Asymptotic(c) => (report.lhs, c.rhs(report)),
    };
    Ok(match id {
        NoisyCond1 => {
            let p = params.p()?;
            (lhs / p, rhs / p)
        }
        TgL1n3C1 => {
            let s = params.theta2()?.sin().abs();
            (2.0 * lhs / s, 2.0 * rhs / s)
        }
        TgL1n3C2 => (2.0 * lhs, 2.0 * rhs),
        TgL2n4C2 => (lhs, 2.0 * rhs - lhs),
        TgAsympC1 | TgAsympC2 => {
            let (t1, t2) = (params.theta1()?, params.theta2()?);
            let d = (t1.cos() * t1.sin() * t2.sin()).abs();
            (lhs / d, rhs / d)
        }
        LsepC1 => {
            let d = params.theta()?.sin().abs() * params.thetas()?.iter().map(|t| (t.cos() * t.sin()).abs()).product::<f64>();
            (lhs / d, rhs / d)
        }
        MixedC1 | MixedC2 => {
            let n = params.n()? as f64;
            (n * lhs, n * rhs)
        }
        MixedAsympC1 | MixedAsympC2 => {
            let n = params.n()? as f64;
            let d = params.theta()?.sin().abs() / (2.0 * n);
            (lhs / d, rhs / d)
        }
        BipartiteC1 | BipartiteC2 => (lhs * lhs, rhs * rhs),
        _ => (lhs, rhs),
    })
}

/// `Σ_{m≥0} term(m)` for terms that are eventually geometrically
/// decreasing. Stops once the remaining tail is bounded by
/// `SERIES_TOL · max(1, |sum|)`.
pub fn sum_series(term: impl Fn(f64) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut m = 0usize;
    let mut current = term(0.0);
    loop {
        sum += current;
        let next = term((m + 1) as f64);
        let after = term((m + 2) as f64);
        if next != 0.0 && current != 0.0 {
            let ratio = after / next;
            // once ratios fall below 1 they keep decreasing for x^{2m}·poly(m)
            if ratio < 1.0 && next / current < 1.0 {
                let tail = next / (1.0 - ratio);
                if tail.abs() <= SERIES_TOL * sum.abs().max(1.0) {
                    return sum + next;
                }
            }
        } else if next == 0.0 && after == 0.0 && m > 0 {
            return sum;
        }
        current = next;
        m += 1;
        if m > 1_000_000 {
            return sum;
        }
    }
}

/// Truncated numeric sum of `Σ x^{2m} m^k` next to its closed form, for
/// `k ∈ {0, 1, 2}`.
pub fn series_identity_check(x: f64, k: u32) -> Result<(f64, f64)> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::BadParameter(format!("x must lie in (0, 1), got {x}")));
    }
    let x2 = x * x;
    let closed = match k {
        0 => 1.0 / (1.0 - x2),
        1 => x2 / (1.0 - x2).powi(2),
        2 => x2 * (1.0 + x2) / (1.0 - x2).powi(3),
        _ => return Err(Error::BadParameter(format!("moment order must be 0, 1 or 2, got {k}"))),
    };
    let numeric = sum_series(|m| x2.powf(m) * m.powi(k as i32));
    Ok((numeric, closed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params() -> FormulaParams {
        FormulaParams::default()
    }

    #[test]
    fn series_identities() {
        let (a, b) = series_identity_check(0.5, 0).unwrap();
        assert!((a - 4.0 / 3.0).abs() < 1e-14 && (b - 4.0 / 3.0).abs() < 1e-15);
        let (a, b) = series_identity_check(0.5, 1).unwrap();
        assert!((a - 4.0 / 9.0).abs() < 1e-14 && (b - 4.0 / 9.0).abs() < 1e-15);
        let (a, b) = series_identity_check(0.5, 2).unwrap();
        assert!((a - 20.0 / 27.0).abs() < 1e-14 && (b - 20.0 / 27.0).abs() < 1e-15);
        for &x in &[0.05, 0.3, 0.9, 0.97] {
            for k in 0..3 {
                let (a, b) = series_identity_check(x, k).unwrap();
                assert!((a - b).abs() <= 1e-12 * b.max(1.0), "x={x} k={k}: {a} vs {b}");
            }
        }
        assert!(series_identity_check(0.5, 3).is_err());
        assert!(series_identity_check(1.0, 0).is_err());
    }

    #[test]
    fn rounded_constants() {
        let (two_ab, a, b) = tg_l1n3_coefficients();
        assert!((two_ab - 1.09).abs() < 0.01);
        assert!((a - 1.24).abs() < 0.01);
        assert!((b - 0.44).abs() < 0.01);
        let (a2, b2) = tg_l1n3_quadratic();
        assert!((a2 - 1.5443).abs() < 1e-4 && (b2 - 0.19245).abs() < 1e-5);
    }

    #[test]
    fn noisy_cond1_values() {
        let p = FormulaParams { theta: Some(PI / 8.0), p: Some(0.8), ..params() };
        let (l, r) = closed_form(FormulaId::NoisyCond1, &p).unwrap();
        assert!((l - 0.35355339059327373).abs() < 1e-12);
        assert!((r - (0.14644660940672624 + 0.125)).abs() < 1e-12);
    }

    #[test]
    fn modified_four_mode_values() {
        let p = FormulaParams { x: Some(0.5), ..params() };
        let (l, r) = closed_form(FormulaId::Mod4Rhs2, &p).unwrap();
        assert!((r - 2.5625 / 2.25).abs() < 1e-14);
        assert!((l - r).abs() < 1e-13);
        let (l, r) = closed_form(FormulaId::Mod4Lhs, &p).unwrap();
        assert!((r - 16.0 / 9.0).abs() < 1e-14 && (l - r).abs() < 1e-13);
        let (l, r) = closed_form(FormulaId::Mod4Rhs1, &p).unwrap();
        assert!((r - 10.0 / 9.0).abs() < 1e-14 && (l - r).abs() < 1e-13);
    }

    #[test]
    fn squeezed_defining_sums_match_printed() {
        for n in [2, 3, 4, 5] {
            for &x in &[0.1, 0.5, 0.9] {
                let p = FormulaParams { n: Some(n), x: Some(x), ..params() };
                for id in [FormulaId::SqzLhs, FormulaId::SqzRhs] {
                    let (l, r) = closed_form(id, &p).unwrap();
                    assert!((l - r).abs() <= 1e-11 * r.max(1.0), "{id:?} n={n} x={x}: {l} vs {r}");
                }
                let (l, _) = closed_form(FormulaId::SqzLhs, &p).unwrap();
                let (r, _) = closed_form(FormulaId::SqzRhs, &p).unwrap();
                assert!((l / r - 1.0 / x).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn l1n3_rearranged_first_condition() {
        // |cos θ2 sin θ2|/2 vs (sin⁴θ2/2)^{1/3}, divided by |sin θ2|/2
        for t in [0.05f64, 0.3, 1.0, 2.0] {
            let raw_l = (t.cos() * t.sin()).abs() / 2.0;
            let raw_r = (t.sin().powi(4) / 2.0).cbrt();
            let report = WitnessReport::from_sides(raw_l, raw_r, 0.0, 1e-9);
            let p = FormulaParams { theta2: Some(t), ..params() };
            let (nl, nr) = rearrange(FormulaId::TgL1n3C1, &report, &p).unwrap();
            let (cl, cr) = closed_form(FormulaId::TgL1n3C1, &p).unwrap();
            assert!((nl - cl).abs() < 1e-12 && (nr - cr).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_parameters() {
        assert_eq!(closed_form(FormulaId::GhzLhs, &params()), Err(Error::MissingParameter("theta")));
        assert_eq!(closed_form(FormulaId::BipartiteC2, &params()), Err(Error::MissingParameter("moments")));
        let p = FormulaParams { theta: Some(0.1), ..params() };
        assert_eq!(closed_form(FormulaId::MixedC1, &p), Err(Error::MissingParameter("n")));
    }

    #[test]
    fn tags_are_unique() {
        let mut tags: Vec<_> = FormulaId::ALL.iter().map(|f| f.tag()).collect();
        tags.sort();
        tags.dedup();
        assert_eq!(tags.len(), 23);
        for id in FormulaId::ALL {
            let json = serde_json::to_string(&id).unwrap();
            assert_eq!(json, format!("\"{}\"", id.tag()));
        }
    }
}
