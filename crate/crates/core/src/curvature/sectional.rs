//! Unnormalized sectional curvatures of vertically warped submersion
//! metrics, evaluated from scalar inputs at a point.
//!
//! Plane types: horizontal `(X, Y)`, vertical `(V1, V2)` and mixed `(X, V)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureModel {
    /// `g_B + e^{2φ} g_F` on a product, `φ` basic.
    WarpedProduct,
    /// Vertical scaling by the constant `e^{2t}`, totally geodesic fibers.
    CanonicalVariation,
    /// Vertical scaling by `e^{2φ}` on an arbitrary submersion.
    GeneralVerticalWarping,
}

/// Pointwise scalars consumed by the formulas. Unset entries are reported
/// by name when a model needs them.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlaneInputs {
    /// warping exponent `φ` at the point
    pub phi: Option<f64>,
    /// canonical-variation parameter `t`
    pub t: Option<f64>,
    /// `K_B(X, Y)`
    pub k_base_xy: Option<f64>,
    /// `K_g(X, Y)`
    pub k_total_xy: Option<f64>,
    /// `K_F(V1, V2)`
    pub k_fiber_v1v2: Option<f64>,
    /// `K_g(V1, V2)`
    pub k_total_v1v2: Option<f64>,
    /// `K_g(X, V)`
    pub k_total_xv: Option<f64>,
    /// `|∇φ|`
    pub grad_phi_norm: Option<f64>,
    /// `dφ(X)`
    pub dphi_x: Option<f64>,
    /// `Hess φ(X, X)`
    pub hess_phi_xx: Option<f64>,
    /// `|A*_X V|²`
    pub a_star_xv_sq: Option<f64>,
    /// `g(S_X V, V)`
    pub shape_xv: Option<f64>,
    /// `dφ(σ(V1, V1))`
    pub dphi_sigma_v1: Option<f64>,
    /// `dφ(σ(V2, V2))`
    pub dphi_sigma_v2: Option<f64>,
    /// `|V1|`
    pub v1_norm: Option<f64>,
    /// `|V2|`
    pub v2_norm: Option<f64>,
    /// `g(V1, V2)`
    pub g_v1v2: Option<f64>,
    /// `|V|`
    pub v_norm: Option<f64>,
    /// `g((∇_X A)_Y Z, W)`
    pub nabla_a_xyzw: Option<f64>,
}

/// Curvatures of the three plane types; `nabla_a_term` is the
/// `R̃(X, Y, Z, W)` entry reported by the canonical variation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionalCurvatures {
    pub horizontal: f64,
    pub vertical: f64,
    pub mixed: f64,
    pub nabla_a_term: Option<f64>,
}

impl SectionalCurvatures {
    pub fn as_vec(&self) -> Vec<f64> {
        let mut v = vec![self.horizontal, self.vertical, self.mixed];
        v.extend(self.nabla_a_term);
        v
    }
}

fn need(value: Option<f64>, symbol: &str) -> Result<f64> {
    value.ok_or_else(|| Error::MissingInput(symbol.to_string()))
}

pub fn sectional_curvatures(model: CurvatureModel, p: &PlaneInputs) -> Result<SectionalCurvatures> {
    match model {
        CurvatureModel::WarpedProduct => {
            let phi = need(p.phi, "φ")?;
            let kb = need(p.k_base_xy, "K_B(X,Y)")?;
            let kf = need(p.k_fiber_v1v2, "K_F(V1,V2)")?;
            let grad = need(p.grad_phi_norm, "|∇φ|")?;
            let v1 = need(p.v1_norm, "|V1|")?;
            let v2 = need(p.v2_norm, "|V2|")?;
            let g12 = need(p.g_v1v2, "g(V1,V2)")?;
            let v = need(p.v_norm, "|V|")?;
            let dx = need(p.dphi_x, "dφ(X)")?;
            let hess = need(p.hess_phi_xx, "Hess φ(X,X)")?;
            let e2 = (2.0 * phi).exp();
            let area = v1 * v1 * v2 * v2 - g12 * g12;
            Ok(SectionalCurvatures {
                horizontal: kb,
                vertical: e2 * (kf - e2 * grad * grad * area),
                mixed: -e2 * v * v * (dx * dx + hess),
                nabla_a_term: None,
            })
        }
        CurvatureModel::CanonicalVariation => {
            let t = need(p.t, "t")?;
            let kb = need(p.k_base_xy, "K_B(X,Y)")?;
            let k = need(p.k_total_xy, "K_g(X,Y)")?;
            let a = need(p.a_star_xv_sq, "|A*_X V|²")?;
            let kv = need(p.k_total_v1v2, "K_g(V1,V2)")?;
            let na = need(p.nabla_a_xyzw, "g((∇_X A)_Y Z, W)")?;
            let e2 = (2.0 * t).exp();
            Ok(SectionalCurvatures {
                horizontal: kb * (1.0 - e2) + e2 * k,
                vertical: e2 * kv,
                mixed: e2 * e2 * a,
                nabla_a_term: Some(e2 * na),
            })
        }
        CurvatureModel::GeneralVerticalWarping => {
            let phi = need(p.phi, "φ")?;
            let kb = need(p.k_base_xy, "K_B(X,Y)")?;
            let k = need(p.k_total_xy, "K_g(X,Y)")?;
            let kf = need(p.k_fiber_v1v2, "K_F(V1,V2)")?;
            let kv = need(p.k_total_v1v2, "K_g(V1,V2)")?;
            let kxv = need(p.k_total_xv, "K_g(X,V)")?;
            let grad = need(p.grad_phi_norm, "|∇φ|")?;
            let s1 = need(p.dphi_sigma_v1, "dφ(σ(V1,V1))")?;
            let s2 = need(p.dphi_sigma_v2, "dφ(σ(V2,V2))")?;
            let v1 = need(p.v1_norm, "|V1|")?;
            let v2 = need(p.v2_norm, "|V2|")?;
            let a = need(p.a_star_xv_sq, "|A*_X V|²")?;
            let hess = need(p.hess_phi_xx, "Hess φ(X,X)")?;
            let dx = need(p.dphi_x, "dφ(X)")?;
            let shape = need(p.shape_xv, "g(S_X V,V)")?;
            let v = need(p.v_norm, "|V|")?;
            let e2 = (2.0 * phi).exp();
            let e4 = e2 * e2;
            Ok(SectionalCurvatures {
                horizontal: (1.0 - e2) * kb + e2 * k,
                vertical: (e2 - e4) * kf + e4 * kv - e4 * v1 * v1 * v2 * v2 * grad * grad
                    + e4 * s1 * v2 * v2
                    + e4 * s2 * v1 * v1,
                mixed: kxv * e2 - e2 * (1.0 - e2) * a - (hess + dx * dx) * e2 * v * v + 2.0 * e2 * dx * shape,
                nabla_a_term: None,
            })
        }
    }
}

/// Component along `∇φ/|∇φ|` of the fiber second fundamental form
/// `σ̃(T1, T2) = −e^{2φ} g(T1, T2) ∇φ` of a warped product.
pub fn fiber_second_fundamental_form(exp_2phi: f64, g_t1t2: f64, grad_phi_norm: f64) -> f64 {
    -exp_2phi * g_t1t2 * grad_phi_norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(phi: f64) -> PlaneInputs {
        PlaneInputs {
            phi: Some(phi),
            t: Some(phi),
            k_base_xy: Some(1.5),
            k_total_xy: Some(0.7),
            k_fiber_v1v2: Some(-0.3),
            k_total_v1v2: Some(-0.3),
            k_total_xv: Some(0.4),
            grad_phi_norm: Some(0.0),
            dphi_x: Some(0.0),
            hess_phi_xx: Some(0.0),
            a_star_xv_sq: Some(0.4),
            shape_xv: Some(0.0),
            dphi_sigma_v1: Some(0.0),
            dphi_sigma_v2: Some(0.0),
            v1_norm: Some(1.0),
            v2_norm: Some(1.0),
            g_v1v2: Some(0.0),
            v_norm: Some(1.0),
            nabla_a_xyzw: Some(0.2),
        }
    }

    #[test]
    fn canonical_variation_at_zero_is_identity() {
        let p = full(0.0);
        let s = sectional_curvatures(CurvatureModel::CanonicalVariation, &p).unwrap();
        assert_eq!(s.horizontal, 0.7);
        assert_eq!(s.vertical, -0.3);
        assert_eq!(s.mixed, 0.4);
        assert_eq!(s.nabla_a_term, Some(0.2));
    }

    #[test]
    fn warped_product_constant_phi_has_flat_mixed_planes() {
        let mut p = full(0.8);
        p.grad_phi_norm = Some(0.0);
        let s = sectional_curvatures(CurvatureModel::WarpedProduct, &p).unwrap();
        assert_eq!(s.mixed, 0.0);
        assert_eq!(s.horizontal, 1.5);
    }

    #[test]
    fn missing_symbol_is_named() {
        let mut p = full(0.0);
        p.shape_xv = None;
        match sectional_curvatures(CurvatureModel::GeneralVerticalWarping, &p) {
            Err(Error::MissingInput(s)) => assert_eq!(s, "g(S_X V,V)"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn second_fundamental_form_values() {
        assert_eq!(fiber_second_fundamental_form(2.0, 0.0, 3.0), 0.0);
        assert_eq!(fiber_second_fundamental_form(1.0, 1.0, 0.0), 0.0);
        assert_eq!(fiber_second_fundamental_form(2.0, 1.0, 3.0).abs(), 6.0);
    }
}
