//! Sufficient-condition certificates and the Kazdan–Warner realizability
//! test.
//!
//! Every certificate carries its margin `alpha` and the evaluated terms in
//! `details`; [`reevaluate`] recomputes `alpha` from `details` alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::base::{BaseManifold, ScalarField};
use crate::curvature::{canonical_ratio_limit, canonical_scal_t, constants, FiberSpec, SubmersionData};
use crate::error::{Error, Result};

/// Number of grid points in the canonical-variation scan.
pub const CANONICAL_SCAN_POINTS: usize = 400;
pub const DEFAULT_T_MIN: f64 = -12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    Product,
    General,
    Ricci,
    KazdanWarner,
    CanonicalVariation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub theorem_id: TheoremId,
    pub alpha: f64,
    /// `ε` used by the α-type certificates.
    pub epsilon: Option<f64>,
    pub pass: bool,
    /// `c` for Kazdan–Warner, `t` for the canonical variation.
    pub witness: Option<f64>,
    pub details: BTreeMap<String, f64>,
}

impl Certificate {
    pub fn detail(&self, key: &str) -> Option<f64> {
        self.details.get(key).copied()
    }
}

fn details(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")))
    }
}

fn check_nonpositive_c(fiber: &FiberSpec, which: &str) -> Result<()> {
    if fiber.c > 0.0 {
        return Err(Error::UnsupportedHypothesis(format!(
            "{which} certificate requires scal_F = c ≤ 0, got c = {}",
            fiber.c
        )));
    }
    Ok(())
}

fn alpha_product(lambda1: f64, eps: f64, b_k: f64, max_diff: f64, c_k: f64, c: f64, vol: f64, exponent: f64) -> f64 {
    lambda1 / (2.0 + eps) - b_k * max_diff + c_k * c * vol.powf(exponent)
}

/// Product-bundle certificate
/// `α = λ₁/(2+ε) − b_k max(f − scal_B) + c_k c vol^{2/θ−1}`.
pub fn check_product(base: &BaseManifold, fiber: &FiberSpec, f: &ScalarField, epsilon: f64) -> Result<Certificate> {
    check_epsilon(epsilon)?;
    check_nonpositive_c(fiber, "product")?;
    if !f.belongs_to(base) {
        return Err(Error::Mismatch("f is not defined on this base".into()));
    }
    let dc = constants(fiber.k)?;
    let lambda1 = base.first_eigenvalue()?;
    let vol = base.volume();
    let exponent = 2.0 / dc.theta - 1.0;
    let max_diff = f.sub(&base.scalar_curvature_field())?.max();
    let alpha = alpha_product(lambda1, epsilon, dc.b_k, max_diff, dc.c_k, fiber.c, vol, exponent);
    let alpha_limit = lambda1 / 2.0 - dc.b_k * max_diff + dc.c_k * fiber.c * vol.powf(exponent);
    Ok(Certificate {
        theorem_id: TheoremId::Product,
        alpha,
        epsilon: Some(epsilon),
        pass: alpha > 0.0,
        witness: None,
        details: details(&[
            ("lambda1", lambda1),
            ("epsilon", epsilon),
            ("b_k", dc.b_k),
            ("c_k", dc.c_k),
            ("c", fiber.c),
            ("volume", vol),
            ("vol_exponent", exponent),
            ("max_f_minus_scal", max_diff),
            ("alpha_limit", alpha_limit),
        ]),
    })
}

/// Certificate for a general submersion with minimal fibers and `δA ≤ 0`:
/// `λ₁/(2+ε) − b_k max(f − scal_g + c) + c_k c vol^{2/θ−1} + b_k min δA`.
pub fn check_general(
    base: &BaseManifold,
    fiber: &FiberSpec,
    sub: &SubmersionData,
    f: &ScalarField,
    epsilon: f64,
) -> Result<Certificate> {
    check_epsilon(epsilon)?;
    check_nonpositive_c(fiber, "general")?;
    check_general_hypotheses(sub)?;
    if !f.belongs_to(base) || !sub.scal_g.belongs_to(base) {
        return Err(Error::Mismatch("f and submersion data must live on the base".into()));
    }
    let dc = constants(fiber.k)?;
    let lambda1 = base.first_eigenvalue()?;
    let vol = base.volume();
    let exponent = 2.0 / dc.theta - 1.0;
    let max_diff = f.zip_with(&sub.scal_g, |a, b| a - b + fiber.c)?.max();
    let min_delta = sub.delta_a.min();
    let alpha = alpha_product(lambda1, epsilon, dc.b_k, max_diff, dc.c_k, fiber.c, vol, exponent) + dc.b_k * min_delta;
    let alpha_limit = lambda1 / 2.0 - dc.b_k * max_diff + dc.c_k * fiber.c * vol.powf(exponent) + dc.b_k * min_delta;
    Ok(Certificate {
        theorem_id: TheoremId::General,
        alpha,
        epsilon: Some(epsilon),
        pass: alpha > 0.0,
        witness: None,
        details: details(&[
            ("lambda1", lambda1),
            ("epsilon", epsilon),
            ("b_k", dc.b_k),
            ("c_k", dc.c_k),
            ("c", fiber.c),
            ("volume", vol),
            ("vol_exponent", exponent),
            ("max_f_minus_scal", max_diff),
            ("min_delta_a", min_delta),
            ("alpha_limit", alpha_limit),
        ]),
    })
}

/// Hypotheses of the general certificate: `max δA ≤ 0` and minimal fibers.
pub fn check_general_hypotheses(sub: &SubmersionData) -> Result<()> {
    let max_delta = sub.delta_a.max();
    if max_delta > 0.0 {
        return Err(Error::HypothesisViolation(format!(
            "max δA ≤ 0 fails: max δA = {max_delta}"
        )));
    }
    let h = sub.mean_curvature_pairing.sup_norm();
    if h > 0.0 {
        return Err(Error::HypothesisViolation(format!(
            "fibers must be minimal (H = 0), got sup |du(H)| = {h}"
        )));
    }
    Ok(())
}

/// Ricci-bound certificate for `Ric_B ≥ n − 1`:
/// `n(8k/((2+ε)(k+1)) + (n−1)) > max f + (c_k/b_k) c vol^{2/θ−1}`.
///
/// `details["alpha_minus_sign"]` evaluates the same test with the opposite
/// sign on the `c` term, which is what substituting `λ₁ ≥ n` and
/// `scal_B ≥ n(n−1)` into the product certificate gives.
pub fn check_ricci(n: usize, fiber: &FiberSpec, vol_b: f64, max_f: f64, epsilon: f64) -> Result<Certificate> {
    check_epsilon(epsilon)?;
    check_nonpositive_c(fiber, "ricci")?;
    if n < 1 {
        return Err(Error::Domain("base dimension must be positive".into()));
    }
    if !(vol_b > 0.0) {
        return Err(Error::Domain(format!("volume must be positive, got {vol_b}")));
    }
    let dc = constants(fiber.k)?;
    let k = fiber.k as f64;
    let nf = n as f64;
    let ratio = (k + 1.0) / (k - 1.0);
    let exponent = 2.0 / dc.theta - 1.0;
    let c_term = ratio * fiber.c * vol_b.powf(exponent);
    let lhs = nf * (8.0 * k / ((2.0 + epsilon) * (k + 1.0)) + (nf - 1.0));
    let rhs = max_f + c_term;
    let lhs_limit = nf * (8.0 * k / (2.0 * (k + 1.0)) + (nf - 1.0));
    Ok(Certificate {
        theorem_id: TheoremId::Ricci,
        alpha: lhs - rhs,
        epsilon: Some(epsilon),
        pass: lhs - rhs > 0.0,
        witness: None,
        details: details(&[
            ("n", nf),
            ("k", k),
            ("epsilon", epsilon),
            ("c", fiber.c),
            ("volume", vol_b),
            ("vol_exponent", exponent),
            ("max_f", max_f),
            ("ck_over_bk", ratio),
            ("lhs", lhs),
            ("rhs", rhs),
            ("alpha_limit", lhs_limit - rhs),
            ("alpha_minus_sign", lhs - (max_f - c_term)),
        ]),
    })
}

/// [`check_ricci`] on a concrete base, rejecting bases whose known Ricci
/// lower bound is below `n − 1`.
pub fn check_ricci_on(base: &BaseManifold, fiber: &FiberSpec, f: &ScalarField, epsilon: f64) -> Result<Certificate> {
    let n = base.dimension();
    if let Some(kappa) = base.ricci_lower_bound() {
        if kappa < n as f64 - 1.0 {
            return Err(Error::HypothesisViolation(format!(
                "Ric ≥ n − 1 = {} fails: best lower bound is {kappa}",
                n - 1
            )));
        }
    }
    if !f.belongs_to(base) {
        return Err(Error::Mismatch("f is not defined on this base".into()));
    }
    check_ricci(n, fiber, base.volume(), f.max(), epsilon)
}

/// Open interval of admissible `c > 0` for `c·f_min < s_min` and
/// `s_max < c·f_max`; `None` when empty.
pub fn kw_interval(f_min: f64, f_max: f64, s_min: f64, s_max: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    // c·f_min < s_min
    if f_min > 0.0 {
        hi = hi.min(s_min / f_min);
    } else if f_min < 0.0 {
        lo = lo.max(s_min / f_min);
    } else if !(s_min > 0.0) {
        return None;
    }
    // s_max < c·f_max
    if f_max > 0.0 {
        lo = lo.max(s_max / f_max);
    } else if f_max < 0.0 {
        hi = hi.min(s_max / f_max);
    } else if !(s_max < 0.0) {
        return None;
    }
    (lo < hi).then_some((lo, hi))
}

fn kw_witness(lo: f64, hi: f64) -> f64 {
    match (lo > 0.0, hi.is_finite()) {
        (false, false) => 1.0,
        (true, false) => (2.0 * lo).max(1.0),
        (false, true) => (0.5 * hi).min(1.0),
        (true, true) => (lo * hi).sqrt(),
    }
}

fn kw_margin(c: f64, f_min: f64, f_max: f64, s_min: f64, s_max: f64) -> f64 {
    (s_min - c * f_min).min(c * f_max - s_max)
}

/// Kazdan–Warner test on ranges: is there `c > 0` with
/// `c·f_min < s_min` and `s_max < c·f_max`? Ties fail.
pub fn check_kw_ranges(f_min: f64, f_max: f64, s_min: f64, s_max: f64) -> Certificate {
    let (c, pass) = match kw_interval(f_min, f_max, s_min, s_max) {
        Some((lo, hi)) => (kw_witness(lo, hi), true),
        None => {
            // best achievable margin over c ≥ 0: at c = 0 or where the two lines cross
            let mut best = 0.0;
            let denom = f_min + f_max;
            if denom != 0.0 {
                let cross = (s_min + s_max) / denom;
                if cross > 0.0 && kw_margin(cross, f_min, f_max, s_min, s_max) > kw_margin(0.0, f_min, f_max, s_min, s_max) {
                    best = cross;
                }
            }
            (best, false)
        }
    };
    let alpha = kw_margin(c, f_min, f_max, s_min, s_max);
    let pass = pass && alpha > 0.0;
    Certificate {
        theorem_id: TheoremId::KazdanWarner,
        alpha,
        epsilon: None,
        pass,
        witness: pass.then_some(c),
        details: details(&[
            ("f_min", f_min),
            ("f_max", f_max),
            ("scal_min", s_min),
            ("scal_max", s_max),
            ("c", c),
        ]),
    }
}

/// Kazdan–Warner test for `f` against an existing scalar curvature field.
pub fn check_kw(f: &ScalarField, scal: &ScalarField) -> Result<Certificate> {
    if !f.same_base(scal) {
        return Err(Error::Mismatch("f and scal must share a node set".into()));
    }
    Ok(check_kw_ranges(f.min(), f.max(), scal.min(), scal.max()))
}

/// Basic fields entering the canonical-variation scalar curvature.
#[derive(Debug, Clone)]
pub struct CanonicalInputs {
    pub scal_b: ScalarField,
    pub scal_g_horiz: ScalarField,
    pub a_norm_sq: ScalarField,
}

impl CanonicalInputs {
    /// Product submersion over `base`: horizontal part equal to `scal_B`, `A = 0`.
    pub fn product(base: &BaseManifold) -> Self {
        let scal_b = base.scalar_curvature_field();
        CanonicalInputs {
            scal_g_horiz: scal_b.clone(),
            a_norm_sq: ScalarField::constant(base, 0.0),
            scal_b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub t: f64,
    pub s_t: f64,
    pub big_s_t: f64,
    pub ratio: f64,
}

/// `t` grid from 0 down to `t_min`, uniform in `t` (geometric in `e^{2t}`).
pub fn canonical_t_grid(t_min: f64, points: usize) -> Vec<f64> {
    let denom = (points.max(2) - 1) as f64;
    // `+ 0.0` turns the leading −0 into +0
    (0..points).map(|j| t_min * j as f64 / denom + 0.0).collect()
}

/// `s_t = min scal_t`, `S_t = max scal_t` over the total space along the scan.
pub fn canonical_scan(fiber: &FiberSpec, inputs: &CanonicalInputs, t_min: f64, points: usize) -> Result<Vec<ScanRow>> {
    let (f_lo, f_hi) = fiber
        .scal_range
        .ok_or_else(|| Error::MissingInput("fiber.scal_range".into()))?;
    if !(t_min < 0.0) || !t_min.is_finite() {
        return Err(Error::Domain(format!("t_min must be negative, got {t_min}")));
    }
    canonical_t_grid(t_min, points)
        .into_iter()
        .map(|t| {
            let s = canonical_scal_t(t, &inputs.scal_b, &inputs.scal_g_horiz, &inputs.a_norm_sq, f_lo)?.min();
            let big = canonical_scal_t(t, &inputs.scal_b, &inputs.scal_g_horiz, &inputs.a_norm_sq, f_hi)?.max();
            Ok(ScanRow {
                t,
                s_t: s,
                big_s_t: big,
                ratio: s / big,
            })
        })
        .collect()
}

fn canonical_score(row: &ScanRow, f_min: f64, f_max: f64) -> (f64, Certificate) {
    let kw = check_kw_ranges(f_min, f_max, row.s_t, row.big_s_t);
    let mut score = (row.ratio - f_min / f_max).min(kw.alpha);
    if !(row.big_s_t > 0.0) {
        score = score.min(row.big_s_t);
    }
    (score, kw)
}

/// Canonical-variation certificate: first `t` on the scan where
/// `min f / max f < s_t/S_t`, `S_t > 0`, and Kazdan–Warner holds for the
/// range `[s_t, S_t]`.
pub fn check_canonical(fiber: &FiberSpec, f: &ScalarField, inputs: &CanonicalInputs, t_min: f64) -> Result<Certificate> {
    let limit = canonical_ratio_limit(fiber)?;
    let (f_min, f_max) = (f.min(), f.max());
    if f_max == 0.0 {
        return Err(Error::Domain("max f must be nonzero".into()));
    }
    let rows = canonical_scan(fiber, inputs, t_min, CANONICAL_SCAN_POINTS)?;
    let mut best: Option<(f64, ScanRow, Certificate)> = None;
    for row in rows {
        let (score, kw) = canonical_score(&row, f_min, f_max);
        let better = best.as_ref().is_none_or(|(s, _, _)| score > *s);
        if score > 0.0 {
            best = Some((score, row, kw));
            break;
        }
        if better {
            best = Some((score, row, kw));
        }
    }
    let (score, row, kw) = best.ok_or_else(|| Error::Domain("empty canonical scan".into()))?;
    let pass = score > 0.0;
    Ok(Certificate {
        theorem_id: TheoremId::CanonicalVariation,
        alpha: score,
        epsilon: None,
        pass,
        witness: pass.then_some(row.t),
        details: details(&[
            ("t", row.t),
            ("t_min", t_min),
            ("s_t", row.s_t),
            ("big_s_t", row.big_s_t),
            ("f_min", f_min),
            ("f_max", f_max),
            ("kw_c", kw.detail("c").unwrap_or(0.0)),
            ("limit_ratio", limit),
        ]),
    })
}

/// Recomputes `alpha` from a certificate's `details`.
pub fn reevaluate(cert: &Certificate) -> Result<f64> {
    let d = |key: &str| {
        cert.detail(key)
            .ok_or_else(|| Error::MissingInput(format!("details.{key}")))
    };
    Ok(match cert.theorem_id {
        TheoremId::Product => alpha_product(
            d("lambda1")?,
            d("epsilon")?,
            d("b_k")?,
            d("max_f_minus_scal")?,
            d("c_k")?,
            d("c")?,
            d("volume")?,
            d("vol_exponent")?,
        ),
        TheoremId::General => {
            alpha_product(
                d("lambda1")?,
                d("epsilon")?,
                d("b_k")?,
                d("max_f_minus_scal")?,
                d("c_k")?,
                d("c")?,
                d("volume")?,
                d("vol_exponent")?,
            ) + d("b_k")? * d("min_delta_a")?
        }
        TheoremId::Ricci => {
            let (n, k, eps) = (d("n")?, d("k")?, d("epsilon")?);
            let lhs = n * (8.0 * k / ((2.0 + eps) * (k + 1.0)) + (n - 1.0));
            lhs - (d("max_f")? + d("ck_over_bk")? * d("c")? * d("volume")?.powf(d("vol_exponent")?))
        }
        TheoremId::KazdanWarner => kw_margin(d("c")?, d("f_min")?, d("f_max")?, d("scal_min")?, d("scal_max")?),
        TheoremId::CanonicalVariation => {
            let row = ScanRow {
                t: d("t")?,
                s_t: d("s_t")?,
                big_s_t: d("big_s_t")?,
                ratio: d("s_t")? / d("big_s_t")?,
            };
            let (f_min, f_max) = (d("f_min")?, d("f_max")?);
            let mut score = (row.ratio - f_min / f_max).min(kw_margin(d("kw_c")?, f_min, f_max, row.s_t, row.big_s_t));
            if !(row.big_s_t > 0.0) {
                score = score.min(row.big_s_t);
            }
            score
        }
    })
}
