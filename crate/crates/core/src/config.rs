//! Run configuration: TOML, with JSON accepted as a fallback.
//!
//! ```toml
//! mode = "product"            # or "general"
//! f = "scal_B + 1"            # number, expression, or { csv = "f.csv" }
//!
//! [base]
//! kind = "sphere"             # sphere | icosphere | torus | product | mesh
//! dim = 2
//! radius = 1.0
//! level = 4
//!
//! [fiber]
//! k = 3
//! c = 0.0
//! scal_range = [2.0, 6.0]     # optional
//!
//! [solver]
//! epsilon = 0.1
//! ```
//!
//! Relative file paths are resolved against the directory of the config.

use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::base::mesh::TriMesh;
use crate::base::{BaseManifold, BaseSpec, ScalarField};
use crate::curvature::{FiberSpec, SubmersionData};
use crate::error::{Error, Result};
use crate::expr::{self, Expr, Point};
use crate::feasibility::{CanonicalInputs, DEFAULT_T_MIN};
use crate::field_io;
use crate::solver::{Mode, SolverConfig};

pub const DEFAULT_EPSILON: f64 = 0.1;

/// A scalar field description, resolved against a base on demand.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Constant(f64),
    Expression { source: String, expr: Expr },
    Csv(PathBuf),
}

impl FieldSpec {
    pub fn resolve(&self, base: &BaseManifold) -> Result<ScalarField> {
        match self {
            FieldSpec::Constant(v) => Ok(ScalarField::constant(base, *v)),
            FieldSpec::Expression { source, expr } => {
                let scal = base.scalar_curvature_field();
                let values = (0..base.node_count())
                    .map(|i| {
                        expr.eval(&Point {
                            coords: base.node_coords(i),
                            scal_b: scal.values()[i],
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                ScalarField::new(base, values)
                    .map_err(|e| Error::Domain(format!("expression `{source}`: {e}")))
            }
            FieldSpec::Csv(path) => field_io::read_field(path, base),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaseConfig {
    Analytic(BaseSpec),
    Mesh(PathBuf),
}

impl BaseConfig {
    pub fn build(&self) -> Result<BaseManifold> {
        match self {
            BaseConfig::Analytic(spec) => BaseManifold::build(spec),
            BaseConfig::Mesh(path) => {
                let mesh = TriMesh::load(path)?;
                BaseManifold::build(&BaseSpec::TriMesh {
                    vertices: mesh.vertices().to_vec(),
                    faces: mesh.faces().to_vec(),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubmersionConfig {
    pub scal_g: FieldSpec,
    pub delta_a: Option<FieldSpec>,
    pub a_horiz_sq: Option<FieldSpec>,
    pub a_norm_sq: Option<FieldSpec>,
    pub mean_curvature: FieldSpec,
}

impl SubmersionConfig {
    pub fn resolve(&self, base: &BaseManifold) -> Result<SubmersionData> {
        let scal_g = self.scal_g.resolve(base)?;
        let h = self.mean_curvature.resolve(base)?;
        match (&self.delta_a, &self.a_horiz_sq, &self.a_norm_sq) {
            (Some(d), None, None) => SubmersionData::from_delta_a(scal_g, d.resolve(base)?, h),
            (None, Some(ah), Some(an)) => SubmersionData::new(scal_g, ah.resolve(base)?, an.resolve(base)?, h),
            _ => Err(Error::Config(
                "submersion needs either delta_a or both a_horiz_sq and a_norm_sq".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalConfig {
    pub t_min: f64,
    pub scal_g_horiz: Option<FieldSpec>,
    pub a_norm_sq: Option<FieldSpec>,
}

impl CanonicalConfig {
    /// Defaults to the product submersion for unset fields.
    pub fn resolve(&self, base: &BaseManifold) -> Result<CanonicalInputs> {
        let mut inputs = CanonicalInputs::product(base);
        if let Some(s) = &self.scal_g_horiz {
            inputs.scal_g_horiz = s.resolve(base)?;
        }
        if let Some(a) = &self.a_norm_sq {
            inputs.a_norm_sq = a.resolve(base)?;
        }
        Ok(inputs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub base: BaseConfig,
    pub fiber: FiberSpec,
    pub f: Option<FieldSpec>,
    pub mode: Mode,
    pub submersion: Option<SubmersionConfig>,
    pub epsilon: f64,
    pub solver: SolverConfig,
    pub canonical: CanonicalConfig,
    pub solution: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let is_json = path.extension().and_then(|e| e.to_str()) == Some("json");
        Self::from_str_in(&text, &dir, is_json)
    }

    /// Parses TOML (or JSON when `json` is set, or when TOML parsing fails
    /// and the text is valid JSON).
    pub fn from_str_in(text: &str, dir: &Path, json: bool) -> Result<Self> {
        let value: Value = if json {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?
        } else {
            match toml::from_str::<toml::Table>(text) {
                Ok(t) => serde_json::to_value(t)?,
                Err(te) => serde_json::from_str(text).map_err(|_| Error::Config(format!("invalid TOML: {te}")))?,
            }
        };
        let root = value
            .as_object()
            .ok_or_else(|| Error::Config("config root must be a table".into()))?;
        parse_root(root, dir)
    }

    pub fn f_spec(&self) -> Result<&FieldSpec> {
        self.f.as_ref().ok_or_else(|| Error::Config("f required".into()))
    }
}

fn table<'a>(root: &'a Map<String, Value>, key: &str) -> Result<Option<&'a Map<String, Value>>> {
    match root.get(key) {
        None => Ok(None),
        Some(Value::Object(m)) => Ok(Some(m)),
        Some(_) => Err(Error::Config(format!("{key} must be a table"))),
    }
}

fn number(v: &Value, name: &str) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| Error::Config(format!("{name} must be a number"))),
        Value::String(s) => {
            let e = expr::parse(s).map_err(|e| Error::Config(format!("{name}: {e}")))?;
            e.eval(&Point {
                coords: [0.0; 3],
                scal_b: 0.0,
            })
            .map_err(|e| Error::Config(format!("{name}: {e}")))
        }
        _ => Err(Error::Config(format!("{name} must be a number"))),
    }
}

fn opt_number(m: &Map<String, Value>, key: &str, prefix: &str) -> Result<Option<f64>> {
    m.get(key).map(|v| number(v, &format!("{prefix}{key}"))).transpose()
}

fn opt_uint(m: &Map<String, Value>, key: &str, prefix: &str) -> Result<Option<u64>> {
    m.get(key)
        .map(|v| {
            v.as_u64()
                .ok_or_else(|| Error::Config(format!("{prefix}{key} must be a non-negative integer")))
        })
        .transpose()
}

fn resolve_path(dir: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

fn field_spec(v: &Value, name: &str, dir: &Path) -> Result<FieldSpec> {
    match v {
        Value::Number(_) => Ok(FieldSpec::Constant(number(v, name)?)),
        Value::String(s) => Ok(FieldSpec::Expression {
            source: s.clone(),
            expr: expr::parse(s).map_err(|e| Error::Config(format!("{name}: {e}")))?,
        }),
        Value::Object(m) => match m.get("csv") {
            Some(Value::String(p)) => Ok(FieldSpec::Csv(resolve_path(dir, p))),
            _ => Err(Error::Config(format!("{name}: table form needs csv = \"path\""))),
        },
        _ => Err(Error::Config(format!("{name} must be a number, expression string or {{ csv = path }}"))),
    }
}

fn opt_field(m: &Map<String, Value>, key: &str, prefix: &str, dir: &Path) -> Result<Option<FieldSpec>> {
    m.get(key).map(|v| field_spec(v, &format!("{prefix}{key}"), dir)).transpose()
}

fn parse_base(m: &Map<String, Value>, prefix: &str, dir: &Path) -> Result<BaseConfig> {
    let kind = m
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Config(format!("{prefix}kind required")))?;
    let radius = opt_number(m, "radius", prefix)?.unwrap_or(1.0);
    let level = opt_uint(m, "level", prefix)?.map(|l| l as u32);
    let grid_list = |key: &str| -> Result<Option<Vec<usize>>> {
        match m.get(key) {
            None => Ok(None),
            Some(Value::Number(n)) => n
                .as_u64()
                .map(|g| Some(vec![g as usize]))
                .ok_or_else(|| Error::Config(format!("{prefix}{key} must be a positive integer"))),
            Some(Value::Array(a)) => a
                .iter()
                .map(|g| {
                    g.as_u64()
                        .map(|g| g as usize)
                        .ok_or_else(|| Error::Config(format!("{prefix}{key} entries must be positive integers")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(Error::Config(format!("{prefix}{key} must be an integer or array"))),
        }
    };
    match kind {
        "sphere" => {
            let dim = opt_uint(m, "dim", prefix)?.unwrap_or(2) as usize;
            Ok(BaseConfig::Analytic(BaseSpec::RoundSphere {
                dim,
                radius,
                level,
                grid: grid_list("grid")?.and_then(|g| g.first().copied()),
            }))
        }
        "icosphere" => Ok(BaseConfig::Analytic(BaseSpec::RoundSphere {
            dim: 2,
            radius,
            level: Some(level.unwrap_or(crate::base::DEFAULT_SPHERE_LEVEL)),
            grid: None,
        })),
        "torus" => {
            let periods = match m.get("periods") {
                Some(Value::Array(a)) => a
                    .iter()
                    .map(|p| number(p, &format!("{prefix}periods")))
                    .collect::<Result<Vec<_>>>()?,
                Some(_) => return Err(Error::Config(format!("{prefix}periods must be an array"))),
                None => return Err(Error::Config(format!("{prefix}periods required"))),
            };
            let grid = grid_list("grid")?.map(|g| if g.len() == 1 { vec![g[0]; periods.len()] } else { g });
            Ok(BaseConfig::Analytic(BaseSpec::FlatTorus { periods, grid }))
        }
        "product" => {
            let factors = match m.get("factors") {
                Some(Value::Array(a)) => a,
                _ => return Err(Error::Config(format!("{prefix}factors required"))),
            };
            let specs = factors
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    let fm = f
                        .as_object()
                        .ok_or_else(|| Error::Config(format!("{prefix}factors[{i}] must be a table")))?;
                    match parse_base(fm, &format!("{prefix}factors[{i}]."), dir)? {
                        BaseConfig::Analytic(s) => Ok(s),
                        BaseConfig::Mesh(_) => Err(Error::Config(format!("{prefix}factors[{i}] cannot be a mesh"))),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(BaseConfig::Analytic(BaseSpec::Product(specs)))
        }
        "mesh" => {
            let p = m
                .get("path")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Config(format!("{prefix}path required")))?;
            let path = resolve_path(dir, p);
            if !path.exists() {
                return Err(Error::Config(format!("{prefix}path: file not found: {}", path.display())));
            }
            Ok(BaseConfig::Mesh(path))
        }
        other => Err(Error::Config(format!(
            "{prefix}kind `{other}` unknown (sphere, icosphere, torus, product, mesh)"
        ))),
    }
}

fn parse_root(root: &Map<String, Value>, dir: &Path) -> Result<RunConfig> {
    let base = parse_base(
        table(root, "base")?.ok_or_else(|| Error::Config("base required".into()))?,
        "base.",
        dir,
    )?;

    let fm = table(root, "fiber")?.ok_or_else(|| Error::Config("fiber.k required".into()))?;
    let k = match fm.get("k") {
        None => return Err(Error::Config("fiber.k required".into())),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| Error::Config("fiber.k must be an integer ≥ 2".into()))? as usize,
    };
    let c = opt_number(fm, "c", "fiber.")?.ok_or_else(|| Error::Config("fiber.c required".into()))?;
    let mut fiber = FiberSpec::new(k, c).map_err(|e| Error::Config(format!("fiber: {e}")))?;
    if let Some(r) = fm.get("scal_range") {
        let bad = || Error::Config("fiber.scal_range must be [min, max]".into());
        let a = r.as_array().filter(|a| a.len() == 2).ok_or_else(bad)?;
        let (lo, hi) = (number(&a[0], "fiber.scal_range")?, number(&a[1], "fiber.scal_range")?);
        fiber = fiber.with_range(lo, hi).map_err(|e| Error::Config(format!("fiber.scal_range: {e}")))?;
    }

    let f = root.get("f").map(|v| field_spec(v, "f", dir)).transpose()?;

    let mode = match root.get("mode").map(|v| v.as_str()) {
        None | Some(Some("product")) => Mode::Product,
        Some(Some("general")) => Mode::General,
        _ => return Err(Error::Config("mode must be \"product\" or \"general\"".into())),
    };

    let submersion = match table(root, "submersion")? {
        None => None,
        Some(sm) => Some(SubmersionConfig {
            scal_g: opt_field(sm, "scal_g", "submersion.", dir)?
                .ok_or_else(|| Error::Config("submersion.scal_g required".into()))?,
            delta_a: opt_field(sm, "delta_a", "submersion.", dir)?,
            a_horiz_sq: opt_field(sm, "a_horiz_sq", "submersion.", dir)?,
            a_norm_sq: opt_field(sm, "a_norm_sq", "submersion.", dir)?,
            mean_curvature: opt_field(sm, "mean_curvature", "submersion.", dir)?.unwrap_or(FieldSpec::Constant(0.0)),
        }),
    };
    if mode == Mode::General && submersion.is_none() {
        return Err(Error::Config("submersion required when mode = \"general\"".into()));
    }

    let mut solver = SolverConfig::default();
    let mut epsilon = DEFAULT_EPSILON;
    if let Some(sm) = table(root, "solver")? {
        if let Some(e) = opt_number(sm, "epsilon", "solver.")? {
            epsilon = e;
        }
        if let Some(e) = opt_number(sm, "epsilon0", "solver.")? {
            solver.epsilon0 = e;
        }
        if let Some(t) = opt_number(sm, "tol", "solver.")? {
            solver.tol = t;
        }
        if let Some(n) = opt_uint(sm, "max_iter", "solver.")? {
            solver.max_iter = n as usize;
        }
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Config(format!("solver.epsilon must be positive, got {epsilon}")));
    }
    solver.validate()?;

    let canonical = match table(root, "canonical")? {
        None => CanonicalConfig {
            t_min: DEFAULT_T_MIN,
            scal_g_horiz: None,
            a_norm_sq: None,
        },
        Some(cm) => CanonicalConfig {
            t_min: opt_number(cm, "t_min", "canonical.")?.unwrap_or(DEFAULT_T_MIN),
            scal_g_horiz: opt_field(cm, "scal_g_horiz", "canonical.", dir)?,
            a_norm_sq: opt_field(cm, "a_norm_sq", "canonical.", dir)?,
        },
    };
    if !(canonical.t_min < 0.0) {
        return Err(Error::Config("canonical.t_min must be negative".into()));
    }

    let solution = match table(root, "verify")? {
        Some(vm) => vm.get("solution").and_then(Value::as_str).map(|p| resolve_path(dir, p)),
        None => None,
    };

    Ok(RunConfig {
        base,
        fiber,
        f,
        mode,
        submersion,
        epsilon,
        solver,
        canonical,
        solution,
    })
}
