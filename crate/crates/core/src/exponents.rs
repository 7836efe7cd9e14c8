//! Scaling exponents and the carpet resistance window.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FractalPreset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub preset: String,
    pub alpha: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "N_I")]
    pub n_i: usize,
    pub rho: f64,
    /// `"exact"`, `"float"` or `"estimated"`.
    pub rho_source: String,
    pub d_f: f64,
    pub d: f64,
    pub d_w: f64,
    /// `d_w/2 - (d_f - d)/2`.
    pub beta: f64,
    /// `log(ρ N_I) / (2 log α)`, the same number by algebra.
    pub beta_log_form: f64,
    /// `d_w > d_f - d`, i.e. `ρ N_I > 1`.
    pub a7_holds: bool,
    /// False where the ℓ² sum of the trace terms is known to diverge.
    pub b4_holds: bool,
}

pub fn compute(preset: &FractalPreset) -> Result<ExponentSet> {
    let rho = preset.rho.ok_or_else(|| Error::MissingRho(preset.name.clone()))?;
    let source = if rho.exact.is_some() { "exact" } else { "float" };
    Ok(compute_with_rho(preset, rho.value, source))
}

/// The preset's `ρ` with its source, or `ρ̂_level` from resistances when none is given.
pub fn rho_or_estimate(preset: &FractalPreset, level: usize) -> Result<(f64, &'static str)> {
    match preset.rho {
        Some(r) => Ok((r.value, if r.exact.is_some() { "exact" } else { "float" })),
        None => {
            let m = level.max(1);
            Ok((crate::energy::estimate_rho(preset, m..=m)?[0].rho_hat, "estimated"))
        }
    }
}

pub fn compute_with_rho(preset: &FractalPreset, rho: f64, source: &str) -> ExponentSet {
    let alpha = preset.alpha();
    let la = alpha.ln();
    let n = preset.n_cells();
    let n_i = preset.n_trace();
    let d_f = (n as f64).ln() / la;
    let d = (n_i as f64).ln() / la;
    let d_w = (rho * n as f64).ln() / la;
    ExponentSet {
        preset: preset.name.clone(),
        alpha,
        n,
        n_i,
        rho,
        rho_source: source.to_string(),
        d_f,
        d,
        d_w,
        beta: d_w / 2.0 - (d_f - d) / 2.0,
        beta_log_form: (rho * n_i as f64).ln() / (2.0 * la),
        a7_holds: rho * n_i as f64 > 1.0,
        b4_holds: preset.b4,
    }
}

fn pow_checked(base: i64, e: u32) -> Result<i64> {
    base.checked_pow(e).ok_or(Error::InvalidInput(format!("{base}^{e} overflows")))
}

/// Lower and upper bounds for `ρ` of the generalized carpet with side `l` in dimension `n`.
pub fn carpet_rho_bounds(l: u64, n: u32) -> Result<(Ratio<i64>, Ratio<i64>)> {
    if l < 3 || n < 2 {
        return Err(Error::DegenerateBounds { l, n });
    }
    let l = l as i64;
    let a = pow_checked(l, n - 1)?;
    let b = pow_checked(l - 2, n - 1)?;
    if a == b {
        return Err(Error::DegenerateBounds { l: l as u64, n });
    }
    let lower = Ratio::new(2, a) + Ratio::new(l - 2, a - b);
    let upper = Ratio::new(l, a - b);
    Ok((lower, upper))
}

/// `β` for a carpet trace (`N_I = l^{n-1}`, `α = l`) at a given `ρ`.
pub fn carpet_beta(l: u64, n: u32, rho: f64) -> f64 {
    let l = l as f64;
    (rho * l.powi(n as i32 - 1)).ln() / (2.0 * l.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::builtin;

    #[test]
    fn gasket_values() {
        let e = compute(&builtin("gasket2").unwrap()).unwrap();
        assert!((e.d_f - 3f64.ln() / 2f64.ln()).abs() < 1e-12);
        assert!((e.d_w - 5f64.ln() / 2f64.ln()).abs() < 1e-12);
        assert!((e.beta - (10.0f64 / 3.0).ln() / (2.0 * 2f64.ln())).abs() < 1e-12);
        assert!((e.beta - e.beta_log_form).abs() < 1e-14);
        assert!(e.a7_holds);
    }

    #[test]
    fn vicsek_and_pentakun() {
        let v = compute(&builtin("vicsek").unwrap()).unwrap();
        assert!((v.d_w - 15f64.ln() / 3f64.ln()).abs() < 1e-12);
        assert!((v.beta - 1.0).abs() < 1e-12);
        assert!(!v.b4_holds);
        let p = compute(&builtin("pentakun").unwrap()).unwrap();
        let alpha = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((p.d_w - ((161f64.sqrt() + 9.0) / 2.0).ln() / alpha.ln()).abs() < 1e-12);
        let beta = p.d_w / 2.0 - (5f64.ln() - 4f64.ln()) / (2.0 * alpha.ln());
        assert!((p.beta - beta).abs() < 1e-12);
    }

    #[test]
    fn carpet_needs_rho() {
        assert!(matches!(compute(&builtin("carpet3").unwrap()), Err(Error::MissingRho(_))));
    }

    #[test]
    fn bounds() {
        assert_eq!(carpet_rho_bounds(3, 2).unwrap(), (Ratio::new(7, 6), Ratio::new(3, 2)));
        assert_eq!(carpet_rho_bounds(4, 2).unwrap(), (Ratio::new(3, 2), Ratio::new(2, 1)));
        assert!(carpet_rho_bounds(3, 1).is_err());
        assert!(carpet_rho_bounds(2, 2).is_err());
        for l in 3..8u64 {
            for n in 2..4u32 {
                let (lo, hi) = carpet_rho_bounds(l, n).unwrap();
                assert!(lo < hi);
                let rho2 = (l as f64).powi(2 - n as i32);
                assert!(carpet_beta(l, n, rho2) > 0.0);
                let hi = *hi.numer() as f64 / *hi.denom() as f64;
                assert!(carpet_beta(l, n, hi) < 1.0);
            }
        }
    }
}
