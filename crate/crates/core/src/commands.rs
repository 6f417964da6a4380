//! Command implementations behind the CLI. Each returns an [`Outcome`]
//! whose exit code is a function of the report alone:
//!
//! | command          | 0                       | 1     | 2                            | 3               |
//! |------------------|-------------------------|-------|------------------------------|-----------------|
//! | `feasibility`    | some certificate passes | error | all fail or inapplicable     |                 |
//! | `solve`          | converged and verified  | error | not converged or not verified | boundary active |
//! | `verify`         | pass                    | error | fail                         |                 |
//! | `scan-canonical` | pass                    | error | fail or inapplicable         |                 |
//! | `spectrum`       | ok                      | error |                              |                 |

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::base::{BaseManifold, ScalarField};
use crate::config::RunConfig;
use crate::curvature::SubmersionData;
use crate::error::{Error, Result};
use crate::feasibility::{
    canonical_scan, check_canonical, check_general, check_kw, check_product, check_ricci_on, Certificate, TheoremId,
    CANONICAL_SCAN_POINTS,
};
use crate::field_io::{self, fmt_num};
use crate::solver::{el_residual, minimize, Mode, Problem, Solution, SolverConfig};
use crate::verification::{verify_prescription, VerificationReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_BOUNDARY: i32 = 3;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: Value,
    /// Human-readable notes for stderr.
    pub messages: Vec<String>,
}

impl Outcome {
    /// Exit 1 with the error text in the report.
    pub fn error(e: &Error) -> Self {
        Outcome {
            exit_code: EXIT_ERROR,
            report: json!({ "error": e.to_string() }),
            messages: vec![format!("error: {e}")],
        }
    }
}

fn run(f: impl FnOnce() -> Result<Outcome>) -> Outcome {
    f().unwrap_or_else(|e| Outcome::error(&e))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn ensure_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

struct Loaded {
    base: BaseManifold,
    f: ScalarField,
    sub: Option<SubmersionData>,
}

fn load(cfg: &RunConfig) -> Result<Loaded> {
    let base = cfg.base.build()?;
    let f = cfg.f_spec()?.resolve(&base)?;
    let sub = match (cfg.mode, &cfg.submersion) {
        (Mode::General, Some(s)) => Some(s.resolve(&base)?),
        _ => None,
    };
    Ok(Loaded { base, f, sub })
}

fn problem<'a>(cfg: &RunConfig, l: &'a Loaded) -> Result<Problem<'a>> {
    match &l.sub {
        None => Problem::product(&l.base, cfg.fiber, l.f.clone()),
        Some(s) => Problem::general(&l.base, cfg.fiber, l.f.clone(), s.clone()),
    }
}

/// Certificates that apply to the configured problem, each either
/// evaluated or skipped with the reason.
fn certificates(cfg: &RunConfig, l: &Loaded) -> (Vec<Certificate>, Vec<Value>) {
    let mut done = Vec::new();
    let mut skipped = Vec::new();
    let mut record = |name: &str, r: Result<Certificate>| match r {
        Ok(c) => done.push(c),
        Err(e) => skipped.push(json!({ "theorem_id": name, "reason": e.to_string() })),
    };
    let eps = cfg.epsilon;
    match &l.sub {
        None => record("product", check_product(&l.base, &cfg.fiber, &l.f, eps)),
        Some(s) => record("general", check_general(&l.base, &cfg.fiber, s, &l.f, eps)),
    }
    record("ricci", check_ricci_on(&l.base, &cfg.fiber, &l.f, eps));
    let scal_g = match &l.sub {
        None => l.base.scalar_curvature_field().map(|s| s + cfg.fiber.c),
        Some(s) => s.scal_g.clone(),
    };
    record("kazdan_warner", check_kw(&l.f, &scal_g));
    if cfg.fiber.scal_range.is_some() {
        let r = cfg
            .canonical
            .resolve(&l.base)
            .and_then(|inputs| check_canonical(&cfg.fiber, &l.f, &inputs, cfg.canonical.t_min));
        record("canonical_variation", r);
    } else {
        record(
            "canonical_variation",
            Err(Error::MissingInput("fiber.scal_range".into())),
        );
    }
    (done, skipped)
}

pub fn cmd_feasibility(cfg: &RunConfig, out: Option<&Path>) -> Outcome {
    run(|| {
        let l = load(cfg)?;
        let (certs, skipped) = certificates(cfg, &l);
        let any = certs.iter().any(|c| c.pass);
        let report = json!({
            "any_pass": any,
            "certificates": certs,
            "skipped": skipped,
        });
        if let Some(out) = out {
            ensure_dir(out)?;
            write_json(&out.join("feasibility.json"), &report)?;
        }
        Ok(Outcome {
            exit_code: if any { EXIT_OK } else { EXIT_FAIL },
            messages: if any { vec![] } else { vec!["no certificate passes".into()] },
            report,
        })
    })
}

fn solution_json(sol: &Solution) -> Value {
    json!({
        "converged": sol.converged,
        "stalled": sol.stalled,
        "iterations": sol.iterations,
        "j_value": sol.j_value,
        "el_residual_norm": sol.el_residual_norm,
        "projected_gradient_norm": sol.projected_gradient_norm,
        "active_nodes": sol.active_count(),
        "constraint_integral": sol.constraint_integral,
        "integral_active": sol.integral_active,
        "boundary_active": sol.boundary_active(),
        "epsilon0": sol.epsilon0,
        "u_min": sol.u.min(),
        "u_max": sol.u.max(),
    })
}

fn solve_exit(sol: &Solution, ver: &VerificationReport) -> i32 {
    if !sol.converged {
        EXIT_FAIL
    } else if sol.boundary_active() {
        EXIT_BOUNDARY
    } else if ver.pass {
        EXIT_OK
    } else {
        EXIT_FAIL
    }
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> Outcome {
    run(|| {
        let l = load(cfg)?;
        let prob = problem(cfg, &l)?;
        let mut messages = Vec::new();
        let (certs, skipped) = certificates(cfg, &l);
        let own = |c: &&Certificate| matches!(c.theorem_id, TheoremId::Product | TheoremId::General);
        if !certs.iter().filter(own).any(|c| c.pass) {
            messages.push("certificate failed; attempting solve anyway".to_string());
        }

        let sol = minimize(&prob, &cfg.solver)?;
        let ver = verify_prescription(&l.base, &sol, &l.f, &cfg.fiber, l.sub.as_ref())?;
        let el = el_residual(&prob, &sol.u)?;

        // ε₀ sensitivity: does the answer move when the floor is lowered?
        let fine = SolverConfig {
            epsilon0: cfg.solver.epsilon0 / 10.0,
            ..cfg.solver
        };
        let sensitivity = match minimize(&prob, &fine) {
            Ok(s2) => {
                let du = s2
                    .u
                    .values()
                    .iter()
                    .zip(sol.u.values())
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                json!({
                    "epsilon0": fine.epsilon0,
                    "converged": s2.converged,
                    "active_nodes": s2.active_count(),
                    "sup_u_difference": du,
                    "j_value": s2.j_value,
                })
            }
            Err(e) => json!({ "epsilon0": fine.epsilon0, "error": e.to_string() }),
        };

        let exit_code = solve_exit(&sol, &ver);
        match exit_code {
            EXIT_BOUNDARY => messages.push(format!(
                "solution touches the constraint boundary ({} floor nodes, integral active: {})",
                sol.active_count(),
                sol.integral_active
            )),
            EXIT_FAIL if !sol.converged => messages.push(format!(
                "not converged after {} iterations (projected gradient {:e})",
                sol.iterations, sol.projected_gradient_norm
            )),
            EXIT_FAIL => messages.push(format!("verification failed: {}", ver.reasons.join("; "))),
            _ => {}
        }

        ensure_dir(out)?;
        let csv = out.join("solution.csv");
        field_io::write_solution(&csv, &sol.u, &sol.phi, &el)?;
        let report = json!({
            "mode": cfg.mode,
            "node_count": l.base.node_count(),
            "solution": solution_json(&sol),
            "verification": ver,
            "certificates": certs,
            "skipped": skipped,
            "sensitivity": sensitivity,
            "solution_csv": csv.display().to_string(),
            "exit_code": exit_code,
        });
        write_json(&out.join("summary.json"), &report)?;
        Ok(Outcome {
            exit_code,
            report,
            messages,
        })
    })
}

pub fn cmd_verify(cfg: &RunConfig, solution: Option<&Path>, out: Option<&Path>) -> Outcome {
    run(|| {
        let path: PathBuf = solution
            .map(Path::to_path_buf)
            .or_else(|| cfg.solution.clone())
            .ok_or_else(|| Error::Config("verify.solution required".into()))?;
        let l = load(cfg)?;
        let prob = problem(cfg, &l)?;
        let u = field_io::read_column(&path, "u", &l.base)?;
        let sol = Solution::evaluate(&prob, u, &cfg.solver)?;
        let ver = verify_prescription(&l.base, &sol, &l.f, &cfg.fiber, l.sub.as_ref())?;
        let report = json!({
            "solution_csv": path.display().to_string(),
            "solution": solution_json(&sol),
            "verification": ver,
        });
        if let Some(out) = out {
            ensure_dir(out)?;
            write_json(&out.join("verification.json"), &report)?;
        }
        Ok(Outcome {
            exit_code: if ver.pass { EXIT_OK } else { EXIT_FAIL },
            messages: ver.reasons.clone(),
            report,
        })
    })
}

pub fn cmd_scan_canonical(cfg: &RunConfig, out: Option<&Path>) -> Outcome {
    run(|| {
        let base = cfg.base.build()?;
        let inputs = cfg.canonical.resolve(&base)?;
        let rows = canonical_scan(&cfg.fiber, &inputs, cfg.canonical.t_min, CANONICAL_SCAN_POINTS)?;
        if let Some(out) = out {
            ensure_dir(out)?;
            let mut w = csv::Writer::from_path(out.join("canonical_scan.csv"))?;
            w.write_record(["t", "s_t", "S_t", "ratio"])?;
            for r in &rows {
                w.write_record([fmt_num(r.t), fmt_num(r.s_t), fmt_num(r.big_s_t), fmt_num(r.ratio)])?;
            }
            w.flush()?;
        }
        let f = cfg.f_spec()?.resolve(&base)?;
        let (cert, exit_code, messages) = match check_canonical(&cfg.fiber, &f, &inputs, cfg.canonical.t_min) {
            Ok(c) => {
                let code = if c.pass { EXIT_OK } else { EXIT_FAIL };
                (json!(c), code, vec![])
            }
            Err(e @ Error::Domain(_)) => (
                json!({ "inapplicable": e.to_string() }),
                EXIT_FAIL,
                vec![format!("canonical-variation criterion inapplicable: {e}")],
            ),
            Err(e) => return Err(e),
        };
        let report = json!({
            "t_min": cfg.canonical.t_min,
            "points": rows.len(),
            "final_ratio": rows.last().map(|r| r.ratio),
            "certificate": cert,
        });
        if let Some(out) = out {
            write_json(&out.join("canonical.json"), &report)?;
        }
        Ok(Outcome {
            exit_code,
            report,
            messages,
        })
    })
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Outcome {
    run(|| {
        let base = cfg.base.build()?;
        let scal = base.scalar_curvature_field();
        let lambda1 = base.first_eigenvalue()?;
        Ok(Outcome {
            exit_code: EXIT_OK,
            report: json!({
                "lambda1": lambda1,
                "volume": base.volume(),
                "dimension": base.dimension(),
                "nodes": base.node_count(),
                "scal_min": scal.min(),
                "scal_max": scal.max(),
                "ricci_lower_bound": base.ricci_lower_bound(),
                "mesh_size": base.mesh_size(),
            }),
            messages: vec![],
        })
    })
}
