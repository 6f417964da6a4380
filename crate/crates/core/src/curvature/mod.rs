//! Scalar-curvature formulas for warped products, general vertical
//! warpings and canonical variations of Riemannian submersions.

pub mod sectional;

use crate::base::{BaseManifold, ScalarField};
use crate::error::{Error, Result};

pub use sectional::{
    fiber_second_fundamental_form, sectional_curvatures, CurvatureModel, PlaneInputs, SectionalCurvatures,
};

/// Fiber data: dimension `k ≥ 2`, constant scalar curvature `c`, and an
/// optional `(min, max)` scalar-curvature range for non-constant fibers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpec {
    pub k: usize,
    pub c: f64,
    pub scal_range: Option<(f64, f64)>,
}

impl FiberSpec {
    pub fn new(k: usize, c: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Domain(format!("fiber dimension k must be at least 2, got {k}")));
        }
        if !c.is_finite() {
            return Err(Error::Domain("fiber scalar curvature must be finite".into()));
        }
        Ok(FiberSpec { k, c, scal_range: None })
    }

    pub fn with_range(mut self, min: f64, max: f64) -> Result<Self> {
        if !(min <= max) || !min.is_finite() || !max.is_finite() {
            return Err(Error::Domain(format!("invalid fiber scalar range ({min}, {max})")));
        }
        self.scal_range = Some((min, max));
        Ok(self)
    }

    pub fn constants(&self) -> DimConstants {
        DimConstants::for_fiber_dim(self.k)
    }
}

/// `b_k = (k+1)/(8k)`, `c_k = (k+1)²/(8(k−1)k)`, `θ = 2(k−1)/(k+1)`,
/// `γ = (2k+6)/(k+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimConstants {
    pub b_k: f64,
    pub c_k: f64,
    pub theta: f64,
    pub gamma: f64,
}

impl DimConstants {
    fn for_fiber_dim(k: usize) -> Self {
        let k = k as f64;
        DimConstants {
            b_k: (k + 1.0) / (8.0 * k),
            c_k: (k + 1.0).powi(2) / (8.0 * (k - 1.0) * k),
            theta: 2.0 * (k - 1.0) / (k + 1.0),
            gamma: (2.0 * k + 6.0) / (k + 1.0),
        }
    }
}

/// Dimensional constants for fiber dimension `k`.
pub fn constants(k: usize) -> Result<DimConstants> {
    if k < 2 {
        return Err(Error::Domain(format!("constants need k ≥ 2 (c_k divides by k−1), got {k}")));
    }
    Ok(DimConstants::for_fiber_dim(k))
}

/// `u^{p/q}` for positive `u`, evaluated as `exp((p/q) ln u)`; a zero
/// exponent returns exactly 1.
pub(crate) fn frac_pow(u: f64, num: i64, den: i64) -> f64 {
    if num == 0 {
        1.0
    } else {
        ((num as f64 / den as f64) * u.ln()).exp()
    }
}

pub(crate) fn require_positive(u: &ScalarField, what: &str) -> Result<()> {
    match u.values().iter().position(|&v| !(v > 0.0)) {
        Some(i) => Err(Error::Domain(format!(
            "{what} must be positive; node {i} has {}",
            u.values()[i]
        ))),
        None => Ok(()),
    }
}

/// Per-node submersion data for the non-product pipeline.
#[derive(Debug, Clone)]
pub struct SubmersionData {
    pub scal_g: ScalarField,
    pub delta_a: ScalarField,
    /// `du(H)`; vanishes for minimal fibers.
    pub mean_curvature_pairing: ScalarField,
    /// `Σ_{i,r} |A*_{e_i} v_r|²`
    pub a_norm_sq: ScalarField,
    /// `Σ_{i,j} |A_{e_i} e_j|²`
    pub a_horiz_sq: ScalarField,
}

impl SubmersionData {
    pub fn new(
        scal_g: ScalarField,
        a_horiz_sq: ScalarField,
        a_norm_sq: ScalarField,
        mean_curvature_pairing: ScalarField,
    ) -> Result<Self> {
        let delta = delta_a(&a_horiz_sq, &a_norm_sq)?;
        if !scal_g.same_base(&delta) || !scal_g.same_base(&mean_curvature_pairing) {
            return Err(Error::Mismatch("submersion fields live on different bases".into()));
        }
        Ok(SubmersionData {
            scal_g,
            delta_a: delta,
            mean_curvature_pairing,
            a_norm_sq,
            a_horiz_sq,
        })
    }

    /// Builds data from a prescribed `δA` field, split as
    /// `a_horiz_sq = max(δA, 0)/3`, `a_norm_sq = max(−δA, 0)/2`.
    pub fn from_delta_a(scal_g: ScalarField, delta: ScalarField, mean_curvature_pairing: ScalarField) -> Result<Self> {
        let a_horiz = delta.map(|d| d.max(0.0) / 3.0);
        let a_norm = delta.map(|d| (-d).max(0.0) / 2.0);
        let mut data = Self::new(scal_g, a_horiz, a_norm, mean_curvature_pairing)?;
        // keep the caller's values bit-for-bit
        data.delta_a = delta;
        Ok(data)
    }

    /// Product submersion `B × F`: `scal_g = scal_B + c`, `A = 0`, `H = 0`.
    pub fn product(base: &BaseManifold, fiber: &FiberSpec) -> Self {
        let scal_g = base.scalar_curvature_field().map(|s| s + fiber.c);
        let zero = ScalarField::constant(base, 0.0);
        SubmersionData {
            scal_g,
            delta_a: zero.clone(),
            mean_curvature_pairing: zero.clone(),
            a_norm_sq: zero.clone(),
            a_horiz_sq: zero,
        }
    }
}

/// Scalar curvature of the warped product `B ×_{e^{2φ}} F`:
/// `scal_B + e^{−2φ}c − k(k−1)|∇φ|² − 2k|∇φ|² − 2kΔφ`.
pub fn warped_scalar(base: &BaseManifold, phi: &ScalarField, fiber: &FiberSpec) -> Result<ScalarField> {
    warped_scalar_over(base, &base.scalar_curvature_field(), phi, fiber)
}

/// [`warped_scalar`] with `scal_b` standing in for the base curvature.
pub(crate) fn warped_scalar_over(
    base: &BaseManifold,
    scal_b: &ScalarField,
    phi: &ScalarField,
    fiber: &FiberSpec,
) -> Result<ScalarField> {
    if !scal_b.belongs_to(base) {
        return Err(Error::Mismatch("scal_B is not defined on this base".into()));
    }
    let k = fiber.k as f64;
    let grad_sq = base.gradient_sq_norm(phi)?;
    let lap = base.laplacian(phi)?;
    let values = (0..phi.len())
        .map(|i| {
            let (p, g, l) = (phi.values()[i], grad_sq.values()[i], lap.values()[i]);
            scal_b.values()[i] + (-2.0 * p).exp() * fiber.c - k * (k - 1.0) * g - 2.0 * k * g - 2.0 * k * l
        })
        .collect();
    ScalarField::new(base, values)
}

/// Scalar curvature of the general vertical warping by `u^{4/(k+1)}`.
pub fn general_warped_scalar(
    base: &BaseManifold,
    u: &ScalarField,
    fiber: &FiberSpec,
    sub: &SubmersionData,
) -> Result<ScalarField> {
    require_positive(u, "warping function u")?;
    if !sub.scal_g.belongs_to(base) {
        return Err(Error::Mismatch("submersion data belongs to a different base".into()));
    }
    let k = fiber.k as f64;
    let kk = fiber.k as i64;
    let lap = base.laplacian(u)?;
    // printed coefficient of the mean-curvature term; inactive when H = 0
    let h_coeff = (4.0 + 2.0 * (k - 1.0)) * 2.0 / (k + 1.0);
    let values = (0..u.len())
        .map(|i| {
            let ui = u.values()[i];
            sub.scal_g.values()[i] - 4.0 * k / (k + 1.0) * lap.values()[i] / ui
                + h_coeff * sub.mean_curvature_pairing.values()[i] / ui
                + (frac_pow(ui, -4, kk + 1) - 1.0) * fiber.c
                + (1.0 - frac_pow(ui, 4, kk + 1)) * sub.delta_a.values()[i]
        })
        .collect();
    ScalarField::new(base, values)
}

/// Scalar curvature of the canonical variation `g_t`:
/// `scal_B(1−e^{2t}) + e^{2t} scal_g^H + 2e^{2t} Σ|A*|² + e^{−2t} scal_F`.
pub fn canonical_scal_t(
    t: f64,
    scal_b: &ScalarField,
    scal_g_horiz: &ScalarField,
    a_norm_sq: &ScalarField,
    scal_f: f64,
) -> Result<ScalarField> {
    let e2t = (2.0 * t).exp();
    let base_part = scal_b.zip_with(scal_g_horiz, |b, h| b * (1.0 - e2t) + e2t * h)?;
    let with_a = base_part.zip_with(a_norm_sq, |x, a| x + 2.0 * e2t * a)?;
    Ok(with_a.map(|x| x + (-2.0 * t).exp() * scal_f))
}

/// Limit of `min scal_t / max scal_t` as `t → −∞`: `min scal_F / max scal_F`.
pub fn canonical_ratio_limit(fiber: &FiberSpec) -> Result<f64> {
    let (lo, hi) = fiber
        .scal_range
        .ok_or_else(|| Error::MissingInput("fiber.scal_range".into()))?;
    if !(hi > 0.0) {
        return Err(Error::Domain(format!(
            "ratio limit needs max scal_F > 0, got {hi}"
        )));
    }
    Ok(lo / hi)
}

/// `δA = 3 Σ|A_{e_i}e_j|² − 2 Σ|A*_{e_i}v_r|²`, pointwise.
pub fn delta_a(a_horiz_sq: &ScalarField, a_norm_sq: &ScalarField) -> Result<ScalarField> {
    for (name, f) in [("a_horiz_sq", a_horiz_sq), ("a_norm_sq", a_norm_sq)] {
        if let Some(i) = f.values().iter().position(|&v| !(v >= 0.0)) {
            return Err(Error::Domain(format!("{name} is negative at node {i}")));
        }
    }
    a_horiz_sq.zip_with(a_norm_sq, |h, n| 3.0 * h - 2.0 * n)
}
