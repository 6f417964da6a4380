//! The ten acceptance criteria. Each test writes one `criterion N: PASS|FAIL`
//! line to stderr (unbuffered, so it shows without `--nocapture`) and then
//! asserts.
//!
//! Two criteria are not met by the discretization and are recorded as
//! findings: the faithful check stays in the suite under `#[ignore]`, and a
//! live test pins down the observed behaviour.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use warpscal::curvature::{canonical_ratio_limit, sectional_curvatures, CurvatureModel, PlaneInputs};
use warpscal::expr::real_harmonic;
use warpscal::feasibility::*;
use warpscal::solver::*;
use warpscal::verification::*;
use warpscal::*;

fn line(n: u32, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n:>2}: {verdict}  {detail}");
}

fn report(n: u32, ok: bool, detail: String) {
    line(n, ok, &detail);
    assert!(ok, "criterion {n}: {detail}");
}

fn torus(periods: [f64; 2], n: usize) -> BaseManifold {
    BaseManifold::build(&BaseSpec::FlatTorus {
        periods: periods.to_vec(),
        grid: Some(vec![n, n]),
    })
    .unwrap()
}

fn circle(radius: f64, n: usize) -> BaseManifold {
    BaseManifold::build(&BaseSpec::RoundSphere {
        dim: 1,
        radius,
        level: None,
        grid: Some(n),
    })
    .unwrap()
}

fn icosphere(level: u32) -> BaseManifold {
    BaseManifold::build(&BaseSpec::icosphere(level)).unwrap()
}

/// A few low Fourier modes in the node coordinates, periodic with the given
/// per-axis periods.
fn trig_field(base: &BaseManifold, periods: [f64; 3], rng: &mut ChaCha8Rng, amp: f64) -> ScalarField {
    let w = periods.map(|l| 2.0 * PI / l);
    let modes: Vec<(f64, f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(-2..=2) as f64,
                rng.gen_range(-2..=2) as f64,
                rng.gen_range(-1..=1) as f64,
                rng.gen_range(-1.0..1.0) * amp,
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    ScalarField::from_fn(base, |p| {
        modes
            .iter()
            .map(|&(a, b, c, amp_i, ph)| amp_i * (a * w[0] * p[0] + b * w[1] * p[1] + c * w[2] * p[2] + ph).cos())
            .sum()
    })
}

fn random_nodal(base: &BaseManifold, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> ScalarField {
    let v = (0..base.node_count()).map(|_| rng.gen_range(lo..hi)).collect();
    ScalarField::new(base, v).unwrap()
}

#[test]
fn criterion_01_constant_solution_round_trip() {
    let start = Instant::now();
    let base = torus([2.0 * PI, 2.0 * PI], 16);
    let fiber = FiberSpec::new(3, -6.0).unwrap();
    let f = ScalarField::constant(&base, -3.0);
    let prob = Problem::product(&base, fiber, f.clone()).unwrap();
    let sol = minimize(&prob, &SolverConfig::default()).unwrap();
    let ver = verify_prescription(&base, &sol, &f, &fiber, None).unwrap();
    let elapsed = start.elapsed();

    let du = sol.u.map(|x| x - 2.0).sup_norm();
    let dphi = sol.phi.map(|x| x - 0.5 * 2f64.ln()).sup_norm();
    let dj = (sol.j_value + 8.0 * PI * PI).abs();
    let ok = sol.converged
        && du < 1e-8
        && dphi < 1e-8
        && ver.sup_residual < 1e-10
        && dj < 1e-8
        && elapsed < Duration::from_secs(5);
    report(
        1,
        ok,
        format!(
            "sup|u-2| {du:.1e}, sup|phi-ln2/2| {dphi:.1e}, residual {:.1e}, |J+8pi^2| {dj:.1e}, {:.2}s",
            ver.sup_residual,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_02_certificate_reproduction() {
    let sphere = BaseManifold::build(&BaseSpec::round_sphere(2, 1.0)).unwrap();
    let fiber = FiberSpec::new(3, 0.0).unwrap();
    let f = sphere.scalar_curvature_field().map(|s| s + 1.0);
    let cert = check_product(&sphere, &fiber, &f, 0.1).unwrap();
    let d_alpha = (cert.alpha - (2.0 / 2.1 - 1.0 / 6.0)).abs();

    let ricci = check_ricci(2, &fiber, 4.0 * PI, 0.0, 0.1).unwrap();
    let lhs = ricci.detail("lhs").unwrap();
    let d_threshold = (lhs - 2.0 * (24.0 / 8.4 + 1.0)).abs();

    report(
        2,
        d_alpha <= 1e-12 && d_threshold <= 1e-12 && cert.pass,
        format!("alpha {:.15} (err {d_alpha:.1e}), threshold {lhs:.15} (err {d_threshold:.1e})", cert.alpha),
    );
}

#[test]
fn criterion_03_first_eigenvalue() {
    let sphere = icosphere(4);
    let l_sphere = sphere.discrete_first_eigenvalue().unwrap();
    let rel = (l_sphere - 2.0).abs() / 2.0;
    let flat = torus([2.0 * PI, 2.0 * PI], 16);
    let l_torus = flat.first_eigenvalue().unwrap();
    let l_torus_discrete = flat.discrete_first_eigenvalue().unwrap();
    let d_torus = (l_torus - 1.0).abs().max((l_torus_discrete - 1.0).abs());
    report(
        3,
        rel < 0.02 && d_torus < 1e-10,
        format!("lambda1(icosphere 4) {l_sphere:.6} ({:.3}%), lambda1(T^2) err {d_torus:.1e}", 100.0 * rel),
    );
}

#[test]
fn criterion_04_euler_lagrange_consistency() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let tau = 2.0 * PI;
    let bases = [
        (torus([tau, 3.0], 16), [tau, 3.0, tau]),
        (icosphere(3), [tau; 3]),
        (circle(1.5, 32), [1.5 * tau; 3]),
    ];
    let (mut worst_el, mut worst_fd) = (0.0_f64, 0.0_f64);
    for i in 0..50 {
        let (base, periods) = &bases[i % bases.len()];
        let k = rng.gen_range(2..7);
        let c = rng.gen_range(-3.0..0.0);
        let fiber = FiberSpec::new(k, c).unwrap();
        let f = trig_field(base, *periods, &mut rng, 1.0);
        let prob = Problem::product(base, fiber, f).unwrap();
        let u = trig_field(base, *periods, &mut rng, 0.3).map(|x| x.exp());
        worst_el = worst_el.max(el_consistency(&prob, &u).unwrap());
        let v = random_nodal(base, &mut rng, -1.0, 1.0);
        worst_fd = worst_fd.max(finite_difference_check(&prob, &u, &v).unwrap());
    }
    let elapsed = start.elapsed();
    report(
        4,
        worst_el <= 1e-10 && worst_fd <= 1e-5 && elapsed < Duration::from_secs(30),
        format!(
            "max el mismatch {worst_el:.1e}, max FD error {worst_fd:.1e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

fn spectral_identity_worst() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tau = 2.0 * PI;
    let bases = [
        (torus([tau, tau], 64), [tau; 3]),
        (torus([3.0, 5.0], 64), [3.0, 5.0, 1.0]),
        (circle(0.7, 128), [0.7 * tau; 3]),
    ];
    let mut worst = 0.0_f64;
    for i in 0..20 {
        let (base, periods) = &bases[i % bases.len()];
        let fiber = FiberSpec::new(rng.gen_range(2..7), rng.gen_range(-2.0..1.0)).unwrap();
        let u = trig_field(base, *periods, &mut rng, 0.15).map(|x| x.exp());
        let f = trig_field(base, *periods, &mut rng, 1.0);
        let scal = base.scalar_curvature_field();
        worst = worst.max(cross_check_identity(base, &u, &fiber, &f, &scal).unwrap());
    }
    worst
}

fn study_u(p: [f64; 3]) -> f64 {
    (0.3 * p[0] + 0.2 * p[1] * p[2]).exp()
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Distance from a point on the unit sphere to the nearest edge arc of the
/// inscribed icosahedron, i.e. to the seams between the face lattices.
fn seam_distance(p: [f64; 3]) -> f64 {
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let s = 1.0 / (1.0 + g * g).sqrt();
    let v: Vec<[f64; 3]> = (0..12)
        .map(|j| {
            let a = if j & 1 == 0 { s } else { -s };
            let b = if j & 2 == 0 { g * s } else { -g * s };
            match j / 4 {
                0 => [0.0, a, b],
                1 => [a, b, 0.0],
                _ => [b, 0.0, a],
            }
        })
        .collect();
    let mut best = f64::INFINITY;
    for i in 0..12 {
        best = best.min(dot(p, v[i]).clamp(-1.0, 1.0).acos());
        for j in i + 1..12 {
            // neighbours on the icosahedron sit at cos = 1/√5
            if dot(v[i], v[j]) < 0.4 {
                continue;
            }
            let n = cross(v[i], v[j]);
            let n = n.map(|x| x / dot(n, n).sqrt());
            let off = dot(p, n);
            let q = [p[0] - off * n[0], p[1] - off * n[1], p[2] - off * n[2]];
            if dot(cross(v[i], q), n) >= 0.0 && dot(cross(q, v[j]), n) >= 0.0 {
                best = best.min(off.abs().asin());
            }
        }
    }
    best
}

fn orders(rows: &[ConvergenceRow]) -> Vec<f64> {
    rows.iter().filter_map(|r| r.order).collect()
}

/// Faithful form: sup-norm deviation of order ≥ 1.8 on icosphere levels 3–6.
#[test]
#[ignore = "unattainable: the sup-norm identity deviation is O(h) along the icosahedron seams"]
fn criterion_05_change_of_variables_identity() {
    let spectral = spectral_identity_worst();
    let fiber = FiberSpec::new(3, -1.0).unwrap();
    let rows = identity_refinement_study(&[3, 4, 5, 6], &fiber, DeviationNorm::Sup, study_u).unwrap();
    let ord = orders(&rows);
    let ok = spectral <= 1e-10 && rows.windows(2).all(|w| w[1].error < w[0].error) && ord.iter().all(|&o| o >= 1.8);
    report(5, ok, format!("spectral {spectral:.1e}, sup orders {ord:.2?}"));
}

#[test]
fn criterion_05_finding_identity_orders() {
    let spectral = spectral_identity_worst();
    let fiber = FiberSpec::new(3, -1.0).unwrap();
    let levels = [3, 4, 5, 6];
    let sup = identity_refinement_study(&levels, &fiber, DeviationNorm::Sup, study_u).unwrap();
    let l2 = identity_refinement_study(&levels, &fiber, DeviationNorm::L2, study_u).unwrap();
    let (sup_ord, l2_ord) = (orders(&sup), orders(&l2));
    let decreasing = |rows: &[ConvergenceRow]| rows.windows(2).all(|w| w[1].error < w[0].error);
    let last_sup = *sup_ord.last().unwrap();

    line(
        5,
        false,
        &format!(
            "spectral {spectral:.1e} (ok); mesh sup orders {sup_ord:.2?} fall to ~1 < 1.8, \
             L2 orders {l2_ord:.2?}; see ignored criterion_05_change_of_variables_identity"
        ),
    );
    assert!(spectral <= 1e-10, "spectral deviation {spectral:e}");
    assert!(decreasing(&sup) && decreasing(&l2));
    assert!(l2_ord.iter().all(|&o| o >= 1.8), "L2 orders {l2_ord:?}");
    assert!((0.8..1.3).contains(&last_sup), "final sup order {last_sup}");

    // Split the deviation along the icosahedron's edges and vertices, where
    // the stencil stays asymmetric under refinement, from the face interiors.
    let (mut seam, mut interior) = (Vec::new(), Vec::new());
    for level in [4, 5, 6] {
        let base = icosphere(level);
        let h = base.mesh_size();
        let u = ScalarField::from_fn(&base, study_u);
        let scal = base.scalar_curvature_field();
        let d = identity_deviation_field(&base, &u, &fiber, &scal, &scal).unwrap();
        let (mut on, mut off) = (0.0_f64, 0.0_f64);
        for i in 0..d.len() {
            let e = d.values()[i].abs();
            if seam_distance(base.node_coords(i)) < 0.5 * h {
                on = on.max(e);
            } else {
                off = off.max(e);
            }
        }
        seam.push((h, on));
        interior.push((h, off));
    }
    let seam_ord = orders(&convergence_table(&seam));
    let interior_ord = orders(&convergence_table(&interior));
    let _ = writeln!(
        std::io::stderr(),
        "              sup orders on icosahedron seams {seam_ord:.2?}, on face interiors {interior_ord:.2?}"
    );
    assert!((0.7..1.3).contains(seam_ord.last().unwrap()), "seam {seam_ord:?}");
    assert!(interior_ord.iter().all(|&o| o >= 1.8), "interior {interior_ord:?}");
}

#[test]
fn criterion_06_kazdan_warner_oracle() {
    fn scan(f_min: f64, f_max: f64, s_min: f64, s_max: f64) -> bool {
        let n = 100_000;
        (0..n).any(|i| {
            let c = 10f64.powf(-6.0 + 12.0 * i as f64 / (n - 1) as f64);
            c * f_min < s_min && s_max < c * f_max
        })
    }
    // endpoints on a 0.5 grid in [−5, 5]: interval ends are ratios p/q with
    // p, q ≤ 10, never thinner than the scan spacing
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut pair = || {
        let a = rng.gen_range(-10..=10) as f64 * 0.5;
        let b = rng.gen_range(-10..=10) as f64 * 0.5;
        (a.min(b), a.max(b))
    };
    let (mut agree, mut passes) = (0, 0);
    for _ in 0..1000 {
        let ((f_min, f_max), (s_min, s_max)) = (pair(), pair());
        let cert = check_kw_ranges(f_min, f_max, s_min, s_max);
        let witness_ok = cert
            .witness
            .map_or(!cert.pass, |c| c > 0.0 && c * f_min < s_min && s_max < c * f_max);
        if cert.pass == scan(f_min, f_max, s_min, s_max) && witness_ok {
            agree += 1;
        }
        passes += cert.pass as usize;
    }
    report(6, agree == 1000, format!("{agree}/1000 agree ({passes} feasible)"));
}

#[test]
fn criterion_07_canonical_variation_limit() {
    let base = icosphere(3);
    let inputs = CanonicalInputs::product(&base);
    let fiber = FiberSpec::new(3, 0.0).unwrap().with_range(2.0, 6.0).unwrap();
    let rows = canonical_scan(&fiber, &inputs, -10.0, 400).unwrap();
    let last = rows.last().unwrap();
    let target = canonical_ratio_limit(&fiber).unwrap();
    let err = (last.ratio - 1.0 / 3.0).abs();

    let mut worst_const = 0.0_f64;
    for spec in [BaseSpec::round_sphere(3, 1.0), BaseSpec::flat_torus(&[1.0, 2.0])] {
        let b = BaseManifold::build(&spec).unwrap();
        let fiber = FiberSpec::new(4, 0.0).unwrap().with_range(5.0, 5.0).unwrap();
        for row in canonical_scan(&fiber, &CanonicalInputs::product(&b), -12.0, 400).unwrap() {
            worst_const = worst_const.max((row.ratio - 1.0).abs());
        }
    }
    report(
        7,
        last.t == -10.0 && err < 1e-3 && target == 1.0 / 3.0 && worst_const == 0.0,
        format!("ratio at t=-10 {:.6} (err {err:.1e}), constant range max|ratio-1| {worst_const:.1e}", last.ratio),
    );
}

#[test]
fn criterion_08_poincare_audit() {
    let mut details = Vec::new();
    let mut ok = true;
    for (name, base) in [("icosphere 3", icosphere(3)), ("T^2", torus([2.0 * PI, 3.0], 16))] {
        let audit = poincare_audit(&base, 1000, 8).unwrap();
        ok &= audit.corrected_violations == 0
            && audit.worst_corrected_ratio >= 1.0 - 1e-10
            && audit.printed_violations > 0
            && audit.constant_ratio < 1.0;
        details.push(format!(
            "{name}: corrected violations {} (min ratio {:.4}), printed form broken by constants (ratio {:.1e}, {} hits)",
            audit.corrected_violations, audit.worst_corrected_ratio, audit.constant_ratio, audit.printed_violations
        ));
    }
    report(8, ok, details.join("; "));
}

#[test]
fn criterion_09_appendix_reductions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut exact = true;
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let mut r = |lo: f64, hi: f64| rng.gen_range(lo..hi);
        let (kb, k, kf, kv, kxv) = (r(-3.0, 3.0), r(-3.0, 3.0), r(-3.0, 3.0), r(-3.0, 3.0), r(-3.0, 3.0));
        let (a, na, phi) = (r(0.0, 3.0), r(-1.0, 1.0), r(-2.0, 2.0));
        let (v1, v2, v) = (r(0.1, 2.0), r(0.1, 2.0), r(0.1, 2.0));
        let unwarped = PlaneInputs {
            phi: Some(0.0),
            t: Some(0.0),
            k_base_xy: Some(kb),
            k_total_xy: Some(k),
            k_fiber_v1v2: Some(kf),
            k_total_v1v2: Some(kv),
            k_total_xv: Some(kxv),
            grad_phi_norm: Some(0.0),
            dphi_x: Some(0.0),
            hess_phi_xx: Some(0.0),
            a_star_xv_sq: Some(a),
            shape_xv: Some(r(-1.0, 1.0)),
            dphi_sigma_v1: Some(0.0),
            dphi_sigma_v2: Some(0.0),
            v1_norm: Some(v1),
            v2_norm: Some(v2),
            g_v1v2: Some(0.0),
            v_norm: Some(v),
            nabla_a_xyzw: Some(na),
        };
        let wp = sectional_curvatures(CurvatureModel::WarpedProduct, &unwarped).unwrap();
        let cv = sectional_curvatures(CurvatureModel::CanonicalVariation, &unwarped).unwrap();
        let gv = sectional_curvatures(CurvatureModel::GeneralVerticalWarping, &unwarped).unwrap();
        exact &= (wp.horizontal, wp.vertical, wp.mixed) == (kb, kf, 0.0);
        exact &= (cv.horizontal, cv.vertical, cv.mixed, cv.nabla_a_term) == (k, kv, a, Some(na));
        exact &= (gv.horizontal, gv.vertical, gv.mixed) == (k, kv, kxv);

        // totally geodesic fibers, constant φ = t
        let tg = PlaneInputs {
            phi: Some(phi),
            t: Some(phi),
            k_fiber_v1v2: Some(kv),
            k_total_xv: Some(a),
            shape_xv: Some(0.0),
            ..unwarped
        };
        let g = sectional_curvatures(CurvatureModel::GeneralVerticalWarping, &tg).unwrap();
        let c = sectional_curvatures(CurvatureModel::CanonicalVariation, &tg).unwrap();
        for (x, y) in [(g.horizontal, c.horizontal), (g.vertical, c.vertical), (g.mixed, c.mixed)] {
            worst = worst.max((x - y).abs() / y.abs().max(1.0));
        }
    }
    report(
        9,
        exact && worst <= 1e-12,
        format!("phi = t = 0 exact: {exact}; general vs canonical max rel diff {worst:.1e}"),
    );
}

fn harmonic_problem(base: &BaseManifold, c: f64, shift: f64) -> (FiberSpec, ScalarField) {
    let fiber = FiberSpec::new(3, c).unwrap();
    let y10 = ScalarField::from_fn(base, |p| real_harmonic(1, 0, p).unwrap());
    let f = base.scalar_curvature_field().zip_with(&y10, |s, y| s + shift + 0.1 * y).unwrap();
    (fiber, f)
}

/// Faithful form on the unit sphere at mesh level 4 with `c = 0`.
#[test]
#[ignore = "unattainable: with c = 0 the functional is unbounded below on the constraint set"]
fn criterion_10_non_constant_solve() {
    let start = Instant::now();
    let base = icosphere(4);
    let (fiber, f) = harmonic_problem(&base, 0.0, 0.0);
    let prob = Problem::product(&base, fiber, f.clone()).unwrap();
    let sol = minimize(&prob, &SolverConfig::default()).unwrap();
    let ver = verify_prescription(&base, &sol, &f, &fiber, None).unwrap();
    let elapsed = start.elapsed();
    let ok = sol.converged
        && !sol.boundary_active()
        && sol.el_residual_norm < 1e-6
        && ver.pass
        && elapsed < Duration::from_secs(60);
    report(
        10,
        ok,
        format!(
            "converged {}, el {:.1e}, residual {:.1e} (bound {:.1e}), {:.1}s",
            sol.converged,
            sol.el_residual_norm,
            ver.sup_residual,
            ver.residual_bound,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_10_finding_unbounded_functional() {
    let base = icosphere(4);
    let (fiber, f) = harmonic_problem(&base, 0.0, 0.0);
    let prob = Problem::product(&base, fiber, f.clone()).unwrap();

    // At c = 0, J is a quadratic form. A tilt along Y(1,0) makes it negative
    // and the ray t·u stays in M for t ≥ 1, so J → −∞ there.
    let u = ScalarField::from_fn(&base, |p| 1.0 + real_harmonic(1, 0, p).unwrap() / 60.0);
    let j1 = functional_j(&prob, &u).unwrap();
    let j2 = functional_j(&prob, &u.scale(2.0)).unwrap();
    let in_m = base.integrate(&u).unwrap() >= 1.0 && u.min() > 0.0;
    assert!(in_m && j1 < 0.0, "J(u) = {j1}");
    assert!((j2 - 4.0 * j1).abs() <= 1e-12 * j1.abs(), "J(2u) = {j2}, 4J(u) = {}", 4.0 * j1);

    let cfg = SolverConfig { max_iter: 300, ..SolverConfig::default() };
    let sol = minimize(&prob, &cfg).unwrap();
    let descending = sol.j_trace.last().unwrap() < sol.j_trace.first().unwrap();
    assert!(!sol.converged && descending && sol.u.min() > 1.0 - 1e-9);

    // The same setup with c < 0 has an interior minimizer and verifies.
    let start = Instant::now();
    let (fiber_neg, f_neg) = harmonic_problem(&base, -1.0, -1.0);
    let prob_neg = Problem::product(&base, fiber_neg, f_neg.clone()).unwrap();
    let sol_neg = minimize(&prob_neg, &SolverConfig::default()).unwrap();
    let ver_neg = verify_prescription(&base, &sol_neg, &f_neg, &fiber_neg, None).unwrap();
    let elapsed = start.elapsed();
    assert!(sol_neg.converged && !sol_neg.boundary_active() && sol_neg.el_residual_norm < 1e-6 && ver_neg.pass);
    assert!(elapsed < Duration::from_secs(60));

    line(
        10,
        false,
        &format!(
            "c = 0: J(u) = {j1:.3e} and J(2u) = 4J(u), so inf J = -inf and no minimizer exists; \
             solver after 300 steps J {:.3e}, u in [{:.3}, {:.3}], not converged. \
             c = -1 variant: converged in {} steps, el {:.1e}, residual {:.1e}, {:.2}s; \
             see ignored criterion_10_non_constant_solve",
            sol.j_value,
            sol.u.min(),
            sol.u.max(),
            sol_neg.iterations,
            sol_neg.el_residual_norm,
            ver_neg.sup_residual,
            elapsed.as_secs_f64()
        ),
    );
}
