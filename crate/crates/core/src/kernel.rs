//! Excitation kernels: the exponential kernel and a bank of Gaussian bases.
//!
//! An excitation function is `phi_ij(t) = sum_m w_ij^m * kappa_m(t)`. The
//! exponential kernel has a single basis `kappa(t) = zeta * exp(-zeta t)`;
//! the Gaussian bank uses `kappa_m(t) = (2 pi b^2)^-1 exp(-(t - tau_m)^2 / 2b^2)`.
//! The Gaussian prefactor is `(2 pi b^2)^-1`, not the unit-mass
//! `(2 pi b^2)^-1/2`, so each basis integrates to `(2 pi b^2)^-1/2` over the
//! real line.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::HawkesError;

/// Gaussian bases are treated as zero beyond this many scales from their center.
pub const GAUSSIAN_CUTOFF_SCALES: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    Exponential { decay: f64 },
    GaussianBasis { centers: Vec<f64>, scale: f64 },
}

impl KernelSpec {
    pub fn exponential(decay: f64) -> Result<Self, HawkesError> {
        let k = KernelSpec::Exponential { decay };
        k.validate()?;
        Ok(k)
    }

    pub fn gaussian_basis(centers: Vec<f64>, scale: f64) -> Result<Self, HawkesError> {
        let k = KernelSpec::GaussianBasis { centers, scale };
        k.validate()?;
        Ok(k)
    }

    /// `M` Gaussian bases covering `[0, cutoff)`: centers `cutoff*(m-1)/M`
    /// and scale `cutoff/(pi*M)`.
    pub fn gaussian_cutoff(num_basis: usize, cutoff: f64) -> Result<Self, HawkesError> {
        if num_basis == 0 || !(cutoff > 0.0) {
            return Err(HawkesError::InvalidParams(format!(
                "gaussian basis needs M >= 1 and cutoff > 0, got M={num_basis}, Tc={cutoff}"
            )));
        }
        let m = num_basis as f64;
        let centers = (0..num_basis).map(|k| cutoff * k as f64 / m).collect();
        Self::gaussian_basis(centers, cutoff / (PI * m))
    }

    pub fn validate(&self) -> Result<(), HawkesError> {
        match self {
            KernelSpec::Exponential { decay } => {
                if !(decay.is_finite() && *decay > 0.0) {
                    return Err(HawkesError::InvalidParams(format!("decay must be positive, got {decay}")));
                }
            }
            KernelSpec::GaussianBasis { centers, scale } => {
                if centers.is_empty() {
                    return Err(HawkesError::InvalidParams("gaussian basis needs at least one center".into()));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(HawkesError::InvalidParams(format!("scale must be positive, got {scale}")));
                }
                if centers.iter().any(|c| !c.is_finite() || *c < 0.0) {
                    return Err(HawkesError::InvalidParams("centers must be nonnegative".into()));
                }
                if centers.windows(2).any(|w| w[1] < w[0]) {
                    return Err(HawkesError::InvalidParams("centers must be nondecreasing".into()));
                }
            }
        }
        Ok(())
    }

    /// Number of basis functions `M`.
    pub fn num_basis(&self) -> usize {
        match self {
            KernelSpec::Exponential { .. } => 1,
            KernelSpec::GaussianBasis { centers, .. } => centers.len(),
        }
    }

    /// `kappa_m(t)`; zero for `t < 0`.
    pub fn eval(&self, m: usize, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            KernelSpec::Exponential { decay } => decay * (-decay * t).exp(),
            KernelSpec::GaussianBasis { centers, scale } => {
                let z = (t - centers[m]) / scale;
                if z.abs() > GAUSSIAN_CUTOFF_SCALES {
                    0.0
                } else {
                    gaussian_peak(*scale) * (-0.5 * z * z).exp()
                }
            }
        }
    }

    /// `int_a^b kappa_m(t) dt` without truncation. Infinite bounds are allowed.
    pub fn integral(&self, m: usize, a: f64, b: f64) -> f64 {
        debug_assert!(a <= b, "integral bounds out of order: {a} > {b}");
        match self {
            KernelSpec::Exponential { decay } => {
                let a = a.max(0.0);
                let b = b.max(0.0);
                (-decay * a).exp() - (-decay * b).exp()
            }
            KernelSpec::GaussianBasis { centers, scale } => {
                let s = SQRT_2 * scale;
                let hi = libm::erf((b - centers[m]) / s);
                let lo = libm::erf((a - centers[m]) / s);
                gaussian_peak(*scale) * scale * (PI / 2.0).sqrt() * (hi - lo)
            }
        }
    }

    /// `int_0^inf kappa_m(t) dt`.
    pub fn mass(&self, m: usize) -> f64 {
        self.integral(m, 0.0, f64::INFINITY)
    }

    /// `sup_{s >= u} kappa_m(s)`, the largest value the basis can still take
    /// at lag `u` or later.
    pub fn sup_from(&self, m: usize, u: f64) -> f64 {
        match self {
            KernelSpec::Exponential { .. } => self.eval(m, u.max(0.0)),
            KernelSpec::GaussianBasis { centers, scale } => {
                if u <= centers[m] {
                    gaussian_peak(*scale)
                } else {
                    self.eval(m, u)
                }
            }
        }
    }

    /// Lag beyond which every basis evaluates to zero, if any.
    pub fn support_end(&self) -> Option<f64> {
        match self {
            KernelSpec::Exponential { .. } => None,
            KernelSpec::GaussianBasis { centers, scale } => {
                centers.last().map(|c| c + GAUSSIAN_CUTOFF_SCALES * scale)
            }
        }
    }
}

fn gaussian_peak(scale: f64) -> f64 {
    1.0 / (2.0 * PI * scale * scale)
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Exponential { decay } => write!(f, "exp:zeta={decay}"),
            KernelSpec::GaussianBasis { centers, scale } => write!(f, "sg:M={},b={scale}", centers.len()),
        }
    }
}

/// Parses `exp:zeta=1`, `sg:M=10,Tc=5`, or `sg:M=10,Tc=5,b=0.2` (explicit scale).
impl FromStr for KernelSpec {
    type Err = HawkesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |msg: &str| HawkesError::InvalidConfig(format!("kernel `{s}`: {msg}"));
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let kv = parse_kv(args).map_err(|e| bad(&e))?;
        let get = |k: &str| kv.iter().find(|(key, _)| key.eq_ignore_ascii_case(k)).map(|(_, v)| *v);
        match kind.trim() {
            "exp" | "exponential" => {
                let decay = get("zeta").or(get("decay")).unwrap_or(1.0);
                KernelSpec::exponential(decay)
            }
            "sg" | "gaussian" => {
                let m = get("M").ok_or_else(|| bad("missing M"))?;
                if m < 1.0 || m.fract() != 0.0 {
                    return Err(bad("M must be a positive integer"));
                }
                let cutoff = get("Tc").ok_or_else(|| bad("missing Tc"))?;
                let k = KernelSpec::gaussian_cutoff(m as usize, cutoff)?;
                match (k, get("b")) {
                    (KernelSpec::GaussianBasis { centers, .. }, Some(b)) => KernelSpec::gaussian_basis(centers, b),
                    (k, _) => Ok(k),
                }
            }
            other => Err(bad(&format!("unknown kernel kind `{other}`"))),
        }
    }
}

/// Splits `a=1,b=2` into pairs of key and numeric value.
pub(crate) fn parse_kv(args: &str) -> Result<Vec<(&str, f64)>, String> {
    args.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (k, v) = p.split_once('=').ok_or_else(|| format!("expected key=value, got `{p}`"))?;
            let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
            Ok((k.trim(), v))
        })
        .collect()
}
