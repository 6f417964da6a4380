//! Constrained minimization of the warping functional over
//! `M = {u ≥ ε₀, ∫u^θ ≥ 1}` by projected gradient descent.
//!
//! Descent directions are taken in the `H¹` metric, `d = −(−Δ + 1)⁻¹ ∇_{L²}J`,
//! which keeps the step length independent of the mesh size; the plain `L²`
//! direction is the fallback when backtracking stalls.

use serde::{Deserialize, Serialize};

use crate::base::{BaseManifold, ScalarField};
use crate::curvature::{frac_pow, require_positive, DimConstants, FiberSpec, SubmersionData};
use crate::error::{Error, Result};
use crate::feasibility::check_general_hypotheses;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Product,
    General,
}

/// A prescription problem on a fixed base. `reference_scal` is `scal_B` in
/// product mode and `scal_g` in general mode.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub base: &'a BaseManifold,
    pub fiber: FiberSpec,
    pub f: ScalarField,
    pub reference_scal: ScalarField,
    pub sub: Option<SubmersionData>,
    pub mode: Mode,
}

impl<'a> Problem<'a> {
    pub fn product(base: &'a BaseManifold, fiber: FiberSpec, f: ScalarField) -> Result<Self> {
        if !f.belongs_to(base) {
            return Err(Error::Mismatch("f is not defined on this base".into()));
        }
        Ok(Problem {
            base,
            fiber,
            reference_scal: base.scalar_curvature_field(),
            f,
            sub: None,
            mode: Mode::Product,
        })
    }

    /// General mode; requires `max δA ≤ 0` and minimal fibers.
    pub fn general(base: &'a BaseManifold, fiber: FiberSpec, f: ScalarField, sub: SubmersionData) -> Result<Self> {
        check_general_hypotheses(&sub)?;
        if !f.belongs_to(base) || !sub.scal_g.belongs_to(base) {
            return Err(Error::Mismatch("f and submersion data must live on the base".into()));
        }
        Ok(Problem {
            base,
            fiber,
            reference_scal: sub.scal_g.clone(),
            f,
            sub: Some(sub),
            mode: Mode::General,
        })
    }

    fn constants(&self) -> DimConstants {
        self.fiber.constants()
    }

    fn delta_a(&self) -> Result<&ScalarField> {
        self.sub
            .as_ref()
            .map(|s| &s.delta_a)
            .ok_or_else(|| Error::MissingInput("submersion data".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub epsilon0: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub step: f64,
    pub contraction: f64,
    pub sufficient_decrease: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon0: 1e-3,
            tol: 1e-8,
            max_iter: 50_000,
            step: 1.0,
            contraction: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon0", self.epsilon0),
            ("tol", self.tol),
            ("step", self.step),
            ("sufficient_decrease", self.sufficient_decrease),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("solver.{name} must be positive, got {v}")));
            }
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0) {
            return Err(Error::Config(format!(
                "solver.contraction must lie in (0, 1), got {}",
                self.contraction
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("solver.max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: ScalarField,
    pub phi: ScalarField,
    pub j_value: f64,
    /// sup of `|el_residual|` over nodes off the floor
    pub el_residual_norm: f64,
    /// sup of the projected `L²` gradient
    pub projected_gradient_norm: f64,
    pub iterations: usize,
    pub active_floor: Vec<bool>,
    pub constraint_integral: f64,
    /// `∫u^θ = 1` holds with equality.
    pub integral_active: bool,
    pub converged: bool,
    /// Backtracking failed in both metrics before reaching `tol`.
    pub stalled: bool,
    pub j_trace: Vec<f64>,
    pub epsilon0: f64,
}

impl Solution {
    pub fn active_count(&self) -> usize {
        self.active_floor.iter().filter(|&&a| a).count()
    }

    /// Some constraint of `M` is active at the returned point.
    pub fn boundary_active(&self) -> bool {
        self.active_count() > 0 || self.integral_active
    }

    /// Evaluates an arbitrary `u` as a candidate solution (no iterations);
    /// `converged` reports whether its projected gradient is below `cfg.tol`.
    pub fn evaluate(prob: &Problem, u: ScalarField, cfg: &SolverConfig) -> Result<Solution> {
        cfg.validate()?;
        let theta = prob.constants().theta;
        if u.values().iter().any(|&v| v < cfg.epsilon0) {
            return Err(Error::Domain(format!("u must satisfy u ≥ ε₀ = {}", cfg.epsilon0)));
        }
        let (j, g) = evaluate(prob, u.values())?;
        let (pg, _) = projected_gradient(prob.base, u.values(), &g, cfg.epsilon0, theta);
        let pg_norm = sup(&pg);
        finish(prob, u, j, pg_norm, 0, false, vec![j], cfg)
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn check_mode(prob: &Problem, mode: Mode, what: &str) -> Result<()> {
    if prob.mode != mode {
        return Err(Error::Mismatch(format!("{what} requires {mode:?} mode, problem is {:?}", prob.mode)));
    }
    Ok(())
}

fn check_field(prob: &Problem, u: &ScalarField) -> Result<()> {
    if !u.belongs_to(prob.base) {
        return Err(Error::Mismatch("u is not defined on the problem's base".into()));
    }
    require_positive(u, "u")
}

/// `u^θ`, `θ = 2(k−1)/(k+1)`.
fn pow_theta(u: f64, k: i64) -> f64 {
    frac_pow(u, 2 * (k - 1), k + 1)
}

/// `u^{θ−1} = u^{(k−3)/(k+1)}`; exactly 1 for `k = 3`.
fn pow_theta_m1(u: f64, k: i64) -> f64 {
    frac_pow(u, k - 3, k + 1)
}

/// `u^γ`, `γ = (2k+6)/(k+1)`.
fn pow_gamma(u: f64, k: i64) -> f64 {
    frac_pow(u, 2 * k + 6, k + 1)
}

/// `u^{γ−1} = u^{(k+5)/(k+1)}`.
fn pow_gamma_m1(u: f64, k: i64) -> f64 {
    frac_pow(u, k + 5, k + 1)
}

/// Pointwise integrand of `J` without the Dirichlet term, and its
/// derivative in `u`.
fn density(prob: &Problem, i: usize, u: f64) -> (f64, f64) {
    let dc = prob.constants();
    let k = prob.fiber.k as i64;
    let c = prob.fiber.c;
    let f = prob.f.values()[i];
    let s = prob.reference_scal.values()[i];
    match prob.mode {
        Mode::Product => {
            let q = f - s;
            let value = -dc.b_k * q * u * u + dc.c_k * c * pow_theta(u, k);
            let deriv = -2.0 * dc.b_k * q * u + dc.c_k * c * dc.theta * pow_theta_m1(u, k);
            (value, deriv)
        }
        Mode::General => {
            let delta = prob.sub.as_ref().map_or(0.0, |sub| sub.delta_a.values()[i]);
            let lin = s + delta - c - f;
            let value = 2.0
                * dc.b_k
                * (lin * u * u / 2.0 + c / dc.theta * pow_theta(u, k) - delta / dc.gamma * pow_gamma(u, k));
            let deriv = 2.0
                * dc.b_k
                * (lin * u + c / dc.theta * dc.theta * pow_theta_m1(u, k)
                    - delta / dc.gamma * dc.gamma * pow_gamma_m1(u, k));
            (value, deriv)
        }
    }
}

/// `t^{p/q} − u^{p/q}` without cancellation, for positive `u`, `t`.
fn pow_diff(u: f64, t: f64, num: i64, den: i64) -> f64 {
    if num == 0 {
        return 0.0;
    }
    let e = num as f64 / den as f64;
    frac_pow(u, num, den) * (e * ((t - u) / u).ln_1p()).exp_m1()
}

/// `density(t) − density(u)` evaluated from the increment `t − u`.
fn density_diff(prob: &Problem, i: usize, u: f64, t: f64) -> f64 {
    let dc = prob.constants();
    let k = prob.fiber.k as i64;
    let c = prob.fiber.c;
    let f = prob.f.values()[i];
    let s = prob.reference_scal.values()[i];
    let sq = (t - u) * (t + u);
    match prob.mode {
        Mode::Product => -dc.b_k * (f - s) * sq + dc.c_k * c * pow_diff(u, t, 2 * (k - 1), k + 1),
        Mode::General => {
            let delta = prob.sub.as_ref().map_or(0.0, |sub| sub.delta_a.values()[i]);
            2.0 * dc.b_k
                * ((s + delta - c - f) * sq / 2.0 + c / dc.theta * pow_diff(u, t, 2 * (k - 1), k + 1)
                    - delta / dc.gamma * pow_diff(u, t, 2 * k + 6, k + 1))
        }
    }
}

/// `J(t) − J(u)`, accurate to the size of the difference rather than of `J`.
fn functional_increment(prob: &Problem, u: &[f64], t: &[f64]) -> Result<f64> {
    let sum: Vec<f64> = u.iter().zip(t).map(|(a, b)| a + b).collect();
    let k_sum = prob.base.stiffness_apply(&ScalarField::new(prob.base, sum)?)?;
    // ½(tᵀKt − uᵀKu) = ½(t − u)ᵀK(t + u)
    let dirichlet: f64 = 0.5 * k_sum.iter().zip(u.iter().zip(t)).map(|(ks, (a, b))| ks * (b - a)).sum::<f64>();
    let w = prob.base.weights();
    let rest: f64 = (0..u.len()).map(|i| w[i] * density_diff(prob, i, u[i], t[i])).sum();
    Ok(dirichlet + rest)
}

fn functional_any(prob: &Problem, u: &ScalarField) -> Result<f64> {
    check_field(prob, u)?;
    let dirichlet = 0.5 * prob.base.dirichlet_energy(u)?;
    let w = prob.base.weights();
    let rest: f64 = u
        .values()
        .iter()
        .enumerate()
        .map(|(i, &x)| w[i] * density(prob, i, x).0)
        .sum();
    Ok(dirichlet + rest)
}

/// `J(u) = ½∫|∇u|² − b_k∫(f − scal_B)u² + c_k∫c u^θ` (product mode).
pub fn functional_j(prob: &Problem, u: &ScalarField) -> Result<f64> {
    check_mode(prob, Mode::Product, "functional_j")?;
    functional_any(prob, u)
}

/// `J(u) = ½∫|∇u|² + 2b_k∫{(scal_g + δA − c − f)u²/2 + cθ⁻¹u^θ − δAγ⁻¹u^γ}`
/// (general mode).
pub fn functional_j_general(prob: &Problem, u: &ScalarField) -> Result<f64> {
    check_mode(prob, Mode::General, "functional_j_general")?;
    functional_any(prob, u)
}

/// Value of the problem's functional in either mode.
pub fn functional(prob: &Problem, u: &ScalarField) -> Result<f64> {
    functional_any(prob, u)
}

/// Coordinate gradient `∂J/∂u_i` of the discrete functional.
pub fn functional_gradient(prob: &Problem, u: &ScalarField) -> Result<Vec<f64>> {
    check_field(prob, u)?;
    let mut g = prob.base.stiffness_apply(u)?;
    let w = prob.base.weights();
    for (i, gi) in g.iter_mut().enumerate() {
        *gi += w[i] * density(prob, i, u.values()[i]).1;
    }
    Ok(g)
}

/// Euler–Lagrange residual. Product mode:
/// `Δu + 2b_k(f − scal_B)u − 2b_k c u^{(k−3)/(k+1)}`; general mode:
/// `Δu − 2b_k{(u^{(k−3)/(k+1)} − u)c + (u − u^{(k+5)/(k+1)})δA} + 2b_k u(f − scal_g)`.
/// Both satisfy `∇J = −W ⊙ el` for quadrature weights `W`.
pub fn el_residual(prob: &Problem, u: &ScalarField) -> Result<ScalarField> {
    check_field(prob, u)?;
    let dc = prob.constants();
    let two_b = 2.0 * dc.b_k;
    let k = prob.fiber.k as i64;
    let c = prob.fiber.c;
    let lap = prob.base.laplacian(u)?;
    let delta = match prob.mode {
        Mode::General => Some(prob.delta_a()?),
        Mode::Product => None,
    };
    let values = (0..u.len())
        .map(|i| {
            let x = u.values()[i];
            let q = prob.f.values()[i] - prob.reference_scal.values()[i];
            match delta {
                None => lap.values()[i] + two_b * q * x - two_b * c * pow_theta_m1(x, k),
                Some(d) => {
                    lap.values()[i]
                        - two_b * ((pow_theta_m1(x, k) - x) * c + (x - pow_gamma_m1(x, k)) * d.values()[i])
                        + two_b * x * q
                }
            }
        })
        .collect();
    ScalarField::new(prob.base, values)
}

/// `max|∇J + W ⊙ el| / (‖Ku‖∞ + ‖∇J − Ku‖∞)`: agreement of the coordinate
/// gradient (assembled through the stiffness operator) with the weighted
/// Euler–Lagrange residual (assembled through the Laplacian).
pub fn el_consistency(prob: &Problem, u: &ScalarField) -> Result<f64> {
    let g = functional_gradient(prob, u)?;
    let ku = prob.base.stiffness_apply(u)?;
    let el = el_residual(prob, u)?;
    let w = prob.base.weights();
    let mismatch = (0..g.len()).fold(0.0_f64, |m, i| m.max((g[i] + w[i] * el.values()[i]).abs()));
    let scale = sup(&ku) + (0..g.len()).fold(0.0_f64, |m, i| m.max((g[i] - ku[i]).abs()));
    Ok(if scale > 0.0 { mismatch / scale } else { mismatch })
}

fn integral_theta(base: &BaseManifold, u: &[f64], theta: f64) -> f64 {
    u.iter().zip(base.weights()).map(|(x, w)| w * x.powf(theta)).sum()
}

const INTEGRAL_SLACK: f64 = 1e-12;

fn project_values(base: &BaseManifold, u: &[f64], epsilon0: f64, theta: f64) -> Vec<f64> {
    let mut v: Vec<f64> = u.iter().map(|&x| if x >= epsilon0 { x } else { epsilon0 }).collect();
    let integral = integral_theta(base, &v, theta);
    if integral < 1.0 - INTEGRAL_SLACK {
        let s = integral.powf(-1.0 / theta);
        v.iter_mut().for_each(|x| *x *= s);
    }
    v
}

/// Projection onto `M`: clamp at `ε₀`, then rescale so that `∫u^θ ≥ 1`.
pub fn project(base: &BaseManifold, u: &ScalarField, epsilon0: f64, theta: f64) -> Result<ScalarField> {
    if !u.belongs_to(base) {
        return Err(Error::Mismatch("u is not defined on this base".into()));
    }
    if !(epsilon0 > 0.0) || !(theta > 0.0 && theta <= 2.0) {
        return Err(Error::Domain(format!(
            "projection needs ε₀ > 0 and θ ∈ (0, 2], got ε₀ = {epsilon0}, θ = {theta}"
        )));
    }
    ScalarField::new(base, project_values(base, u.values(), epsilon0, theta))
}

/// `φ = (2/(k+1)) ln u`.
pub fn recover_warping(u: &ScalarField, k: usize) -> Result<ScalarField> {
    require_positive(u, "u")?;
    let a = 2.0 / (k as f64 + 1.0);
    Ok(u.map(|x| a * x.ln()))
}

fn evaluate(prob: &Problem, u: &[f64]) -> Result<(f64, Vec<f64>)> {
    let field = ScalarField::new(prob.base, u.to_vec())?;
    let j = functional_any(prob, &field)?;
    let g = functional_gradient(prob, &field)?;
    Ok((j, g))
}

fn on_floor(x: f64, epsilon0: f64) -> bool {
    x <= epsilon0 * (1.0 + 1e-12)
}

/// Projected `L²` gradient on the tangent cone of `M`, and whether the
/// integral constraint is active.
fn projected_gradient(base: &BaseManifold, u: &[f64], g: &[f64], epsilon0: f64, theta: f64) -> (Vec<f64>, bool) {
    let w = base.weights();
    let mut pg: Vec<f64> = g.iter().zip(w).map(|(gi, wi)| gi / wi).collect();
    let blocked: Vec<bool> = u
        .iter()
        .zip(&pg)
        .map(|(&x, &p)| on_floor(x, epsilon0) && p > 0.0)
        .collect();
    for (p, &b) in pg.iter_mut().zip(&blocked) {
        if b {
            *p = 0.0;
        }
    }
    let integral = integral_theta(base, u, theta);
    let integral_active = (integral - 1.0).abs() <= 1e-9;
    if integral_active {
        // normal of ∫u^θ on the free nodes
        let n: Vec<f64> = u
            .iter()
            .zip(&blocked)
            .map(|(&x, &b)| if b { 0.0 } else { theta * x.powf(theta - 1.0) })
            .collect();
        let np: f64 = n.iter().zip(&pg).zip(w).map(|((a, b), c)| a * b * c).sum();
        let nn: f64 = n.iter().zip(w).map(|(a, c)| a * a * c).sum();
        if np > 0.0 && nn > 0.0 {
            pg.iter_mut().zip(&n).for_each(|(p, ni)| *p -= np / nn * ni);
        }
    }
    (pg, integral_active)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    prob: &Problem,
    u: ScalarField,
    j: f64,
    pg_norm: f64,
    iterations: usize,
    stalled: bool,
    j_trace: Vec<f64>,
    cfg: &SolverConfig,
) -> Result<Solution> {
    let theta = prob.constants().theta;
    let el = el_residual(prob, &u)?;
    let active_floor: Vec<bool> = u.values().iter().map(|&x| on_floor(x, cfg.epsilon0)).collect();
    let el_norm = el
        .values()
        .iter()
        .zip(&active_floor)
        .filter(|(_, &a)| !a)
        .fold(0.0_f64, |m, (r, _)| m.max(r.abs()));
    let integral = integral_theta(prob.base, u.values(), theta);
    let phi = recover_warping(&u, prob.fiber.k)?;
    Ok(Solution {
        phi,
        j_value: j,
        el_residual_norm: el_norm,
        projected_gradient_norm: pg_norm,
        iterations,
        active_floor,
        constraint_integral: integral,
        integral_active: (integral - 1.0).abs() <= 1e-9,
        converged: pg_norm <= cfg.tol,
        stalled,
        j_trace,
        epsilon0: cfg.epsilon0,
        u,
    })
}

/// Iterates beyond this magnitude are taken as divergence.
const DIVERGENCE_BOUND: f64 = 1e100;
const MAX_BACKTRACKS: usize = 60;

/// Projected gradient descent from `u₀ = project(1)` with Armijo
/// backtracking. Exhausting `max_iter` returns a non-converged Solution.
pub fn minimize(prob: &Problem, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    let base = prob.base;
    let theta = prob.constants().theta;
    let mut u = project_values(base, &vec![1.0; base.node_count()], cfg.epsilon0, theta);
    let (mut j, mut g) = evaluate(prob, &u)?;
    let mut trace = vec![j];
    let mut step = cfg.step;
    let mut iterations = 0;
    let mut stalled = false;
    let mut pg_norm;

    loop {
        let (pg, _) = projected_gradient(base, &u, &g, cfg.epsilon0, theta);
        pg_norm = sup(&pg);
        if !pg_norm.is_finite() {
            return Err(Error::numerical(
                "non-finite gradient",
                vec![("iteration", iterations as f64), ("last_j", j)],
            ));
        }
        if pg_norm <= cfg.tol || iterations >= cfg.max_iter {
            break;
        }

        let pg_field = ScalarField::new(base, pg.clone())?;
        let h1_dir: Vec<f64> = base.solve_shifted(1.0, &pg_field)?.values().iter().map(|x| -x).collect();
        let l2_dir: Vec<f64> = pg.iter().map(|x| -x).collect();

        let mut accepted = None;
        for (dir, initial) in [(&h1_dir, step), (&l2_dir, cfg.step)] {
            let mut s = initial;
            for _ in 0..MAX_BACKTRACKS {
                let trial_raw: Vec<f64> = u.iter().zip(dir.iter()).map(|(x, d)| x + s * d).collect();
                let trial = project_values(base, &trial_raw, cfg.epsilon0, theta);
                let lin: f64 = trial.iter().zip(&u).zip(&g).map(|((t, x), gi)| (t - x) * gi).sum();
                if lin < 0.0 {
                    let (jt, gt) = evaluate(prob, &trial)?;
                    if !jt.is_finite() || gt.iter().any(|x| !x.is_finite()) {
                        return Err(Error::numerical(
                            "non-finite functional value or gradient",
                            vec![
                                ("iteration", iterations as f64),
                                ("last_j", j),
                                ("last_u_max", u.iter().copied().fold(f64::MIN, f64::max)),
                            ],
                        ));
                    }
                    let dj = functional_increment(prob, &u, &trial)?;
                    if dj <= cfg.sufficient_decrease * lin {
                        accepted = Some((trial, jt, gt, s));
                        break;
                    }
                }
                s *= cfg.contraction;
            }
            if accepted.is_some() {
                break;
            }
        }

        match accepted {
            Some((trial, jt, gt, s)) => {
                u = trial;
                j = jt;
                g = gt;
                trace.push(j);
                step = 2.0 * s;
                iterations += 1;
                let umax = u.iter().copied().fold(0.0_f64, f64::max);
                if umax > DIVERGENCE_BOUND {
                    return Err(Error::numerical(
                        "iterates diverge: the functional appears unbounded below on M",
                        vec![("iteration", iterations as f64), ("last_j", j), ("last_u_max", umax)],
                    ));
                }
            }
            None => {
                stalled = true;
                break;
            }
        }
    }

    let field = ScalarField::new(base, u)?;
    finish(prob, field, j, pg_norm, iterations, stalled, trace, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::BaseSpec;
    use std::f64::consts::PI;

    fn torus(n: usize) -> BaseManifold {
        BaseManifold::build(&BaseSpec::FlatTorus {
            periods: vec![2.0 * PI, 2.0 * PI],
            grid: Some(vec![n, n]),
        })
        .unwrap()
    }

    #[test]
    fn functional_examples() {
        let t = torus(8);
        let p = Problem::product(&t, FiberSpec::new(3, -6.0).unwrap(), ScalarField::constant(&t, -3.0)).unwrap();
        let j = functional_j(&p, &ScalarField::constant(&t, 2.0)).unwrap();
        assert!((j + 8.0 * PI * PI).abs() < 1e-10);

        let s = BaseManifold::build(&BaseSpec::icosphere(2)).unwrap();
        let f = s.scalar_curvature_field().map(|x| x - 1.0);
        let p = Problem::product(&s, FiberSpec::new(3, 0.0).unwrap(), f).unwrap();
        let j = functional_j(&p, &ScalarField::constant(&s, 1.0)).unwrap();
        assert!((j - 2.0 * PI / 3.0).abs() < 1e-12);
        assert!(matches!(functional_j_general(&p, &ScalarField::constant(&s, 1.0)), Err(Error::Mismatch(_))));
    }

    #[test]
    fn el_zero_cases() {
        let t = torus(8);
        let p = Problem::product(&t, FiberSpec::new(3, -6.0).unwrap(), ScalarField::constant(&t, -3.0)).unwrap();
        assert!(el_residual(&p, &ScalarField::constant(&t, 2.0)).unwrap().sup_norm() < 1e-14);
        let p = Problem::product(&t, FiberSpec::new(2, -2.0).unwrap(), ScalarField::constant(&t, -2.0)).unwrap();
        assert!(el_residual(&p, &ScalarField::constant(&t, 1.0)).unwrap().sup_norm() < 1e-14);
        assert!(matches!(
            el_residual(&p, &ScalarField::constant(&t, 0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn general_mode_constant_zero() {
        let t = torus(8);
        let fiber = FiberSpec::new(3, -1.0).unwrap();
        let dc = fiber.constants();
        let (sg, d, c) = (0.5, -0.4, fiber.c);
        let fval = sg + d * (1.0 - 2.0 / dc.gamma) + c * (2.0 / dc.theta - 1.0);
        let sub = SubmersionData::from_delta_a(
            ScalarField::constant(&t, sg),
            ScalarField::constant(&t, d),
            ScalarField::constant(&t, 0.0),
        )
        .unwrap();
        let p = Problem::general(&t, fiber, ScalarField::constant(&t, fval), sub).unwrap();
        assert!(functional_j_general(&p, &ScalarField::constant(&t, 1.0)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let line = BaseManifold::build(&BaseSpec::FlatTorus {
            periods: vec![1.0],
            grid: Some(vec![16]),
        })
        .unwrap();
        let small = ScalarField::constant(&line, 0.01);
        let p = project(&line, &small, 1e-3, 1.0).unwrap();
        assert!(p.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let again = project(&line, &p, 1e-3, 1.0).unwrap();
        assert_eq!(again, p);
        let mut vals = vec![2.0; 16];
        vals[3] = -0.5;
        let p = project(&line, &ScalarField::new(&line, vals).unwrap(), 1e-3, 1.0).unwrap();
        assert_eq!(p.values()[3], 1e-3);
    }

    #[test]
    fn warping_recovery() {
        let t = torus(4);
        let phi = recover_warping(&ScalarField::constant(&t, 2.0), 3).unwrap();
        assert!(phi.values().iter().all(|&v| (v - 0.5 * 2f64.ln()).abs() < 1e-15));
        let u = ScalarField::from_fn(&t, |c| 1.5 + c[0].sin());
        let back = recover_warping(&u, 5).unwrap().map(|p| (3.0 * p).exp());
        for (a, b) in back.values().iter().zip(u.values()) {
            assert!((a - b).abs() <= 1e-14 * b);
        }
        assert!(recover_warping(&ScalarField::constant(&t, -1.0), 3).is_err());
    }

    #[test]
    fn torus_constant_solve() {
        let t = torus(16);
        let p = Problem::product(&t, FiberSpec::new(3, -6.0).unwrap(), ScalarField::constant(&t, -3.0)).unwrap();
        let sol = minimize(&p, &SolverConfig::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.u.values().iter().all(|&v| (v - 2.0).abs() < 1e-8));
        assert!((sol.j_value + 8.0 * PI * PI).abs() < 1e-8);
        assert!(!sol.boundary_active());
    }

    #[test]
    fn trivial_solve_keeps_constant() {
        let t = torus(8);
        let p = Problem::product(&t, FiberSpec::new(3, 0.0).unwrap(), t.scalar_curvature_field()).unwrap();
        let sol = minimize(&p, &SolverConfig::default()).unwrap();
        assert!(sol.converged && sol.el_residual_norm == 0.0 && sol.j_value == 0.0);
    }

    #[test]
    fn bad_config_is_rejected() {
        let cfg = SolverConfig {
            contraction: 1.5,
            ..SolverConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
