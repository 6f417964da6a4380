//! Verification of solver output against the prescribed curvature,
//! identity cross-checks, refinement studies and the Poincaré audit.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::base::{BaseManifold, BaseSpec, ScalarField};
use crate::curvature::{general_warped_scalar, require_positive, warped_scalar_over, FiberSpec, SubmersionData};
use crate::error::{Error, Result};
use crate::solver::{el_consistency, el_residual, functional, functional_gradient, project, recover_warping, Problem, Solution};

/// Acceptance thresholds: `spectral` on grid and constant backends,
/// `mesh_factor · h²` on meshes, and `bound_factor` on the identity bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub spectral: f64,
    pub mesh_factor: f64,
    pub bound_factor: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            spectral: 1e-8,
            mesh_factor: 10.0,
            bound_factor: 10.0,
        }
    }
}

impl Thresholds {
    pub fn for_base(&self, base: &BaseManifold) -> f64 {
        if base.is_mesh() {
            self.mesh_factor * base.mesh_size().powi(2)
        } else {
            self.spectral
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub sup_residual: f64,
    pub l2_residual: f64,
    pub identity_deviation: f64,
    pub gradient_check_max: f64,
    pub convergence_orders: Vec<(f64, f64)>,
    /// `bound_factor · (4k/(k+1)) · el_residual_norm / ε₀ + threshold`
    pub residual_bound: f64,
    pub threshold: f64,
    /// Floor-active nodes left out of the residual norms.
    pub excluded_nodes: usize,
    pub pass: bool,
    pub reasons: Vec<String>,
}

fn check_positive_len(u: &ScalarField, base: &BaseManifold) -> Result<()> {
    if !u.belongs_to(base) {
        return Err(Error::Mismatch("u is not defined on this base".into()));
    }
    require_positive(u, "u")
}

/// Scalar curvature of the warped metric built from `sol`, and its
/// residual against `f`. Product mode evaluates the warped-product formula
/// on `φ`; general mode the `u`-form.
pub fn verify_prescription(
    base: &BaseManifold,
    sol: &Solution,
    f: &ScalarField,
    fiber: &FiberSpec,
    sub: Option<&SubmersionData>,
) -> Result<VerificationReport> {
    verify_prescription_with(base, sol, f, fiber, sub, &Thresholds::default())
}

pub fn verify_prescription_with(
    base: &BaseManifold,
    sol: &Solution,
    f: &ScalarField,
    fiber: &FiberSpec,
    sub: Option<&SubmersionData>,
    thresholds: &Thresholds,
) -> Result<VerificationReport> {
    check_positive_len(&sol.u, base)?;
    let prob = match sub {
        None => Problem::product(base, *fiber, f.clone())?,
        Some(s) => Problem::general(base, *fiber, f.clone(), s.clone())?,
    };
    let scal = match sub {
        None => warped_scalar_over(base, &base.scalar_curvature_field(), &sol.phi, fiber)?,
        Some(s) => general_warped_scalar(base, &sol.u, fiber, s)?,
    };
    let residual = scal.sub(f)?;
    let keep: Vec<bool> = sol.active_floor.iter().map(|a| !a).collect();
    let w = base.weights();
    let mut sup_residual = 0.0_f64;
    let mut l2 = 0.0;
    for (i, r) in residual.values().iter().enumerate() {
        if keep.get(i).copied().unwrap_or(true) {
            sup_residual = sup_residual.max(r.abs());
            l2 += w[i] * r * r;
        }
    }
    let identity_deviation = identity_deviation(&prob, &sol.u)?;
    let gradient_check_max = el_consistency(&prob, &sol.u)?;

    let k = fiber.k as f64;
    let threshold = thresholds.for_base(base);
    let residual_bound = thresholds.bound_factor * (4.0 * k / (k + 1.0)) * sol.el_residual_norm / sol.epsilon0 + threshold;
    let mut reasons = Vec::new();
    if !sol.converged {
        reasons.push(format!(
            "solution did not converge (projected gradient {:e})",
            sol.projected_gradient_norm
        ));
    }
    if !(identity_deviation <= threshold) {
        reasons.push(format!("identity deviation {identity_deviation:e} exceeds {threshold:e}"));
    }
    if !(sup_residual <= residual_bound) {
        reasons.push(format!("sup residual {sup_residual:e} exceeds bound {residual_bound:e}"));
    }
    Ok(VerificationReport {
        sup_residual,
        l2_residual: l2.sqrt(),
        identity_deviation,
        gradient_check_max,
        convergence_orders: Vec::new(),
        residual_bound,
        threshold,
        excluded_nodes: keep.iter().filter(|k| !**k).count(),
        pass: reasons.is_empty(),
        reasons,
    })
}

/// sup of `scal̃ − f + (4k/(k+1)) u⁻¹ el(u)` for the problem's mode.
fn identity_deviation(prob: &Problem, u: &ScalarField) -> Result<f64> {
    match &prob.sub {
        None => cross_check_identity(prob.base, u, &prob.fiber, &prob.f, &prob.reference_scal),
        Some(sub) => {
            let k = prob.fiber.k as f64;
            let scal = general_warped_scalar(prob.base, u, &prob.fiber, sub)?;
            let el = el_residual(prob, u)?;
            let mut dev = 0.0_f64;
            for i in 0..u.len() {
                let v = scal.values()[i] - prob.f.values()[i] + 4.0 * k / (k + 1.0) * el.values()[i] / u.values()[i];
                dev = dev.max(v.abs());
            }
            Ok(dev)
        }
    }
}

/// `sup |warped_scalar(φ(u)) − f + (4k/(k+1)) u⁻¹ el(u)|` with
/// `φ = (2/(k+1)) ln u`, using `reference_scal` as the base curvature in
/// both terms. Vanishes in exact arithmetic.
pub fn cross_check_identity(
    base: &BaseManifold,
    u: &ScalarField,
    fiber: &FiberSpec,
    f: &ScalarField,
    reference_scal: &ScalarField,
) -> Result<f64> {
    Ok(identity_deviation_field(base, u, fiber, f, reference_scal)?.sup_norm())
}

/// Pointwise `warped_scalar(φ(u)) − f + (4k/(k+1)) u⁻¹ el(u)`.
pub fn identity_deviation_field(
    base: &BaseManifold,
    u: &ScalarField,
    fiber: &FiberSpec,
    f: &ScalarField,
    reference_scal: &ScalarField,
) -> Result<ScalarField> {
    check_positive_len(u, base)?;
    let mut prob = Problem::product(base, *fiber, f.clone())?;
    if !reference_scal.belongs_to(base) {
        return Err(Error::Mismatch("reference_scal is not defined on this base".into()));
    }
    prob.reference_scal = reference_scal.clone();
    let phi = recover_warping(u, fiber.k)?;
    let scal = warped_scalar_over(base, reference_scal, &phi, fiber)?;
    let el = el_residual(&prob, u)?;
    let k = fiber.k as f64;
    let c = 4.0 * k / (k + 1.0);
    let values = (0..u.len())
        .map(|i| scal.values()[i] - f.values()[i] + c * el.values()[i] / u.values()[i])
        .collect();
    Ok(base.wrap(values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationNorm {
    Sup,
    /// `(∫ d² / vol)^{1/2}`
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub error: f64,
    /// `ln(e_{i−1}/e_i) / ln(h_{i−1}/h_i)`; absent on the first row.
    pub order: Option<f64>,
}

/// Attaches observed orders to `(h, error)` pairs ordered coarse to fine.
pub fn convergence_table(pairs: &[(f64, f64)]) -> Vec<ConvergenceRow> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, &(h, error))| ConvergenceRow {
            h,
            error,
            order: (i > 0).then(|| {
                let (h0, e0) = pairs[i - 1];
                (e0 / error).ln() / (h0 / h).ln()
            }),
        })
        .collect()
}

/// Identity deviation of `u_fn` on icospheres of the given levels, measured
/// in `norm`, with `f = reference_scal =` the mesh scalar curvature.
pub fn identity_refinement_study(
    levels: &[u32],
    fiber: &FiberSpec,
    norm: DeviationNorm,
    u_fn: impl Fn([f64; 3]) -> f64,
) -> Result<Vec<ConvergenceRow>> {
    let mut pairs = Vec::new();
    for &level in levels {
        let base = BaseManifold::build(&BaseSpec::icosphere(level))?;
        let u = ScalarField::from_fn(&base, &u_fn);
        let scal = base.scalar_curvature_field();
        let d = identity_deviation_field(&base, &u, fiber, &scal, &scal)?;
        let err = match norm {
            DeviationNorm::Sup => d.sup_norm(),
            DeviationNorm::L2 => {
                let sq = d.values().iter().map(|x| x * x).collect();
                (base.integrate(&base.wrap(sq))? / base.volume()).sqrt()
            }
        };
        pairs.push((base.mesh_size(), err));
    }
    Ok(convergence_table(&pairs))
}

pub fn write_convergence_csv(rows: &[ConvergenceRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["h", "error", "order"])?;
    for r in rows {
        w.write_record([
            format!("{:.16e}", r.h),
            format!("{:.16e}", r.error),
            r.order.map(|o| format!("{o:.16e}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Relative error between `⟨∇J, v⟩` and a Richardson-extrapolated central
/// difference of `J` along `v`.
pub fn finite_difference_check(prob: &Problem, u: &ScalarField, v: &ScalarField) -> Result<f64> {
    let g = functional_gradient(prob, u)?;
    let exact: f64 = g.iter().zip(v.values()).map(|(a, b)| a * b).sum();
    let vmax = v.sup_norm();
    if vmax == 0.0 {
        return Ok(0.0);
    }
    let h = 1e-3 * u.min() / vmax;
    let central = |h: f64| -> Result<f64> {
        let plus = u.zip_with(v, |a, b| a + h * b)?;
        let minus = u.zip_with(v, |a, b| a - h * b)?;
        Ok((functional(prob, &plus)? - functional(prob, &minus)?) / (2.0 * h))
    };
    let fd = (4.0 * central(h / 2.0)? - central(h)?) / 3.0;
    Ok((fd - exact).abs() / exact.abs().max(f64::MIN_POSITIVE))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareAudit {
    pub samples: usize,
    pub lambda1: f64,
    /// `∫|∇u|² ≥ λ₁∫(u − ū)²` failures beyond `1e−10` relative.
    pub corrected_violations: usize,
    /// min of `∫|∇u|² / (λ₁∫(u − ū)²)` over the samples
    pub worst_corrected_ratio: f64,
    /// `∫|∇u|² ≥ λ₁∫u²` failures among fields in `M`.
    pub printed_violations: usize,
    /// min of `∫|∇u|² / (λ₁∫u²)` over fields in `M`
    pub worst_printed_ratio: f64,
    /// `∫|∇u|² / (λ₁∫u²)` for `u = project(1)`
    pub constant_ratio: f64,
    /// corrected ratio for the first eigenfunction shifted into `M`
    pub eigenfunction_ratio: Option<f64>,
}

fn random_smooth_field(base: &BaseManifold, rng: &mut ChaCha8Rng) -> Result<ScalarField> {
    let raw: Vec<f64> = (0..base.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut u = ScalarField::new(base, raw)?;
    let smoothing = rng.gen_range(0..3);
    for _ in 0..smoothing {
        u = base.solve_shifted(1.0, &u)?;
    }
    Ok(u)
}

fn corrected_ratio(base: &BaseManifold, u: &ScalarField, lambda1: f64) -> Result<(f64, f64)> {
    let vol = base.volume();
    let mean = base.integrate(u)? / vol;
    let w = u.map(|x| x - mean);
    let var = base.integrate(&w.zip_with(&w, |a, b| a * b)?)?;
    let energy = base.dirichlet_energy(u)?;
    Ok((energy, lambda1 * var))
}

/// Checks the mean-corrected Poincaré inequality on random fields and
/// searches `M` for violations of the uncorrected form `∫|∇u|² ≥ λ₁∫u²`.
pub fn poincare_audit(base: &BaseManifold, samples: usize, seed: u64) -> Result<PoincareAudit> {
    let lambda1 = if base.has_calculus() {
        base.discrete_first_eigenvalue()?
    } else {
        base.first_eigenvalue()?
    };
    let theta = 1.0;
    let eps0 = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut audit = PoincareAudit {
        samples,
        lambda1,
        corrected_violations: 0,
        worst_corrected_ratio: f64::INFINITY,
        printed_violations: 0,
        worst_printed_ratio: f64::INFINITY,
        constant_ratio: f64::NAN,
        eigenfunction_ratio: None,
    };

    let constant = project(base, &ScalarField::constant(base, 1.0), eps0, theta)?;
    let sq = |u: &ScalarField| base.integrate(&u.zip_with(u, |a, b| a * b)?);
    audit.constant_ratio = base.dirichlet_energy(&constant)? / (lambda1 * sq(&constant)?);
    if audit.constant_ratio < 1.0 {
        audit.printed_violations += 1;
    }
    audit.worst_printed_ratio = audit.constant_ratio;

    for _ in 0..samples {
        let u = random_smooth_field(base, &mut rng)?;
        let (energy, rhs) = corrected_ratio(base, &u, lambda1)?;
        if energy < rhs * (1.0 - 1e-10) - 1e-14 * energy.abs().max(rhs.abs()) {
            audit.corrected_violations += 1;
        }
        if rhs > 0.0 {
            audit.worst_corrected_ratio = audit.worst_corrected_ratio.min(energy / rhs);
        }
        // the same shape lifted into M
        let offset = rng.gen_range(0.0..2.0);
        let lifted = u.map(|x| x - u.min() + eps0 + offset);
        let m = project(base, &lifted, eps0, theta)?;
        let ratio = base.dirichlet_energy(&m)? / (lambda1 * sq(&m)?);
        if ratio < 1.0 {
            audit.printed_violations += 1;
        }
        audit.worst_printed_ratio = audit.worst_printed_ratio.min(ratio);
    }

    if base.has_calculus() {
        let e = base.first_eigenfunction()?;
        let shifted = project(base, &e.map(|x| x - e.min() + 1.0), eps0, theta)?;
        let (energy, rhs) = corrected_ratio(base, &shifted, lambda1)?;
        audit.eigenfunction_ratio = Some(energy / rhs);
    }
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{minimize, SolverConfig};
    use std::f64::consts::PI;

    fn torus(n: usize) -> BaseManifold {
        BaseManifold::build(&BaseSpec::FlatTorus {
            periods: vec![2.0 * PI, 2.0 * PI],
            grid: Some(vec![n, n]),
        })
        .unwrap()
    }

    #[test]
    fn torus_constant_solution_verifies() {
        let t = torus(16);
        let fiber = FiberSpec::new(3, -6.0).unwrap();
        let f = ScalarField::constant(&t, -3.0);
        let p = Problem::product(&t, fiber, f.clone()).unwrap();
        let sol = minimize(&p, &SolverConfig::default()).unwrap();
        let rep = verify_prescription(&t, &sol, &f, &fiber, None).unwrap();
        assert!(rep.pass, "{:?}", rep.reasons);
        assert!(rep.sup_residual < 1e-10);
    }

    #[test]
    fn zero_warping_reproduces_product_curvature() {
        let t = torus(8);
        let fiber = FiberSpec::new(3, -2.0).unwrap();
        let f = t.scalar_curvature_field().map(|s| s + fiber.c);
        let p = Problem::product(&t, fiber, f.clone()).unwrap();
        let sol = Solution::evaluate(&p, ScalarField::constant(&t, 1.0), &SolverConfig::default()).unwrap();
        let rep = verify_prescription(&t, &sol, &f, &fiber, None).unwrap();
        assert_eq!(rep.sup_residual, 0.0);
    }

    #[test]
    fn non_converged_solution_fails() {
        let t = torus(8);
        let fiber = FiberSpec::new(3, -6.0).unwrap();
        let f = ScalarField::constant(&t, -3.0);
        let p = Problem::product(&t, fiber, f.clone()).unwrap();
        let sol = Solution::evaluate(&p, ScalarField::constant(&t, 1.0), &SolverConfig::default()).unwrap();
        let rep = verify_prescription(&t, &sol, &f, &fiber, None).unwrap();
        assert!(!rep.pass);
        assert!(rep.reasons[0].contains("did not converge"));
    }

    #[test]
    fn identity_for_constants_and_smooth_fields() {
        let t = torus(64);
        let fiber = FiberSpec::new(4, -1.5).unwrap();
        let f = ScalarField::from_fn(&t, |c| c[1].cos());
        let scal = t.scalar_curvature_field();
        let c = ScalarField::constant(&t, 1.7);
        assert!(cross_check_identity(&t, &c, &fiber, &f, &scal).unwrap() < 1e-12);
        let u = ScalarField::from_fn(&t, |c| 2.0 + 0.5 * c[0].sin() * (2.0 * c[1]).cos());
        let dev = cross_check_identity(&t, &u, &fiber, &f, &scal).unwrap();
        assert!(dev < 1e-10, "{dev:e}");
    }

    #[test]
    fn table_orders() {
        let rows = convergence_table(&[(0.4, 1.6e-1), (0.2, 4e-2), (0.1, 1e-2)]);
        assert!(rows[0].order.is_none());
        assert!((rows[2].order.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn audit_on_torus() {
        let t = torus(16);
        let a = poincare_audit(&t, 50, 7).unwrap();
        assert_eq!(a.corrected_violations, 0);
        assert_eq!(a.constant_ratio, 0.0);
        assert!(a.printed_violations >= 1);
        assert!((a.eigenfunction_ratio.unwrap() - 1.0).abs() < 1e-10);
    }
}
