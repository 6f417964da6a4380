//! Closed base manifolds with volume, scalar curvature, quadrature,
//! gradient/Laplacian calculus and the first positive Laplace eigenvalue.
//!
//! Sign convention: `Δ = div ∘ grad`, so `−Δ` is positive semidefinite and
//! `λ₁` is its smallest positive eigenvalue.

pub mod eigen;
pub mod mesh;
pub mod sparse;
pub mod spectral;

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use mesh::{TriMesh, Vec3};
use sparse::CsrMatrix;
use spectral::SpectralGrid;

pub use eigen::EigenSettings;

/// Default icosphere refinement level for `RoundSphere(2, r)`.
pub const DEFAULT_SPHERE_LEVEL: u32 = 4;

/// Backend description accepted by [`BaseManifold::build`].
#[derive(Debug, Clone, PartialEq)]
pub enum BaseSpec {
    /// Round sphere `S^n(r)`. `n = 1` uses a Fourier grid with `grid` nodes,
    /// `n = 2` an icosphere at `level`; `n ≥ 3` is analytic (constants only).
    RoundSphere {
        dim: usize,
        radius: f64,
        level: Option<u32>,
        grid: Option<usize>,
    },
    /// Flat torus `∏ R/L_i Z`; fields need at most three periods.
    FlatTorus {
        periods: Vec<f64>,
        grid: Option<Vec<usize>>,
    },
    /// Riemannian product of analytic factors.
    Product(Vec<BaseSpec>),
    /// Closed orientable triangulated surface.
    TriMesh {
        vertices: Vec<Vec3>,
        faces: Vec<[usize; 3]>,
    },
}

impl BaseSpec {
    pub fn round_sphere(dim: usize, radius: f64) -> Self {
        BaseSpec::RoundSphere {
            dim,
            radius,
            level: None,
            grid: None,
        }
    }

    pub fn flat_torus(periods: &[f64]) -> Self {
        BaseSpec::FlatTorus {
            periods: periods.to_vec(),
            grid: None,
        }
    }

    pub fn icosphere(level: u32) -> Self {
        BaseSpec::RoundSphere {
            dim: 2,
            radius: 1.0,
            level: Some(level),
            grid: None,
        }
    }
}

/// Analytic identity of a manifold, independent of its discretization.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    RoundSphere { dim: usize, radius: f64 },
    FlatTorus { periods: Vec<f64> },
    Product(Vec<Geometry>),
    TriMesh,
}

#[derive(Debug)]
enum Calculus {
    /// One node carrying the whole volume; represents constant fields only.
    Constant,
    Spectral(SpectralGrid),
    Mesh {
        mesh: TriMesh,
        stiffness: CsrMatrix,
        mass: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct DiscreteEigen {
    lambda: f64,
    vector: Vec<f64>,
}

type EigenOutcome = std::result::Result<DiscreteEigen, (String, Vec<(String, f64)>)>;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// A closed base manifold with assembled calculus operators. Immutable
/// after construction.
#[derive(Debug)]
pub struct BaseManifold {
    id: u64,
    geometry: Geometry,
    dimension: usize,
    volume: f64,
    calculus: Calculus,
    weights: Vec<f64>,
    scal: Vec<f64>,
    eigen: OnceLock<EigenOutcome>,
}

/// A real-valued function sampled on the nodes of a base manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    base_id: u64,
    values: Vec<f64>,
}

fn unit_sphere_area(n: usize) -> f64 {
    // ω_n = 2π/(n−1) · ω_{n−2}
    match n {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 1.0) * unit_sphere_area(n - 2),
    }
}

fn default_grid(dim: usize) -> usize {
    match dim {
        1 => 128,
        2 => 64,
        _ => 24,
    }
}

fn check_positive(what: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be positive, got {x}")))
    }
}

/// Flattens a product of one-dimensional periodic factors into torus periods.
fn periodic_factors(spec: &BaseSpec, out: &mut Vec<f64>) -> bool {
    match spec {
        BaseSpec::FlatTorus { periods, .. } => {
            out.extend(periods);
            true
        }
        BaseSpec::RoundSphere { dim: 1, radius, .. } => {
            out.push(2.0 * PI * radius);
            true
        }
        BaseSpec::Product(fs) => fs.iter().all(|f| periodic_factors(f, out)),
        _ => false,
    }
}

impl BaseManifold {
    /// Builds the manifold and assembles its discrete operators.
    pub fn build(spec: &BaseSpec) -> Result<Self> {
        let (geometry, dimension, volume, scal_const) = Self::analytic(spec)?;
        let calculus = match spec {
            BaseSpec::RoundSphere { dim: 1, radius, grid, .. } => {
                let n = grid.unwrap_or(default_grid(1));
                Calculus::Spectral(SpectralGrid::new(&[2.0 * PI * radius], &[n])?)
            }
            BaseSpec::RoundSphere { dim: 2, radius, level, .. } => {
                let mut calc = Self::mesh_calculus(TriMesh::icosphere(level.unwrap_or(DEFAULT_SPHERE_LEVEL), *radius)?);
                // lumped mass rescaled so the quadrature integrates 1 to the exact sphere area
                if let Calculus::Mesh { mass, .. } = &mut calc {
                    let s = volume / mass.iter().sum::<f64>();
                    mass.iter_mut().for_each(|m| *m *= s);
                }
                calc
            }
            BaseSpec::RoundSphere { .. } => Calculus::Constant,
            BaseSpec::FlatTorus { periods, grid } if periods.len() <= 3 => {
                let sizes = grid.clone().unwrap_or_else(|| vec![default_grid(periods.len()); periods.len()]);
                Calculus::Spectral(SpectralGrid::new(periods, &sizes)?)
            }
            BaseSpec::FlatTorus { .. } => Calculus::Constant,
            BaseSpec::Product(_) => {
                let mut periods = Vec::new();
                if periodic_factors(spec, &mut periods) && periods.len() <= 3 {
                    let sizes = vec![default_grid(periods.len()); periods.len()];
                    Calculus::Spectral(SpectralGrid::new(&periods, &sizes)?)
                } else {
                    Calculus::Constant
                }
            }
            BaseSpec::TriMesh { vertices, faces } => {
                Self::mesh_calculus(TriMesh::new(vertices.clone(), faces.clone())?)
            }
        };

        let weights = match &calculus {
            Calculus::Constant => vec![volume],
            Calculus::Spectral(g) => vec![g.cell_weight(); g.node_count()],
            Calculus::Mesh { mass, .. } => mass.clone(),
        };
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
            return Err(Error::Domain(format!("non-positive quadrature weight {w}")));
        }
        let volume = match &calculus {
            Calculus::Mesh { .. } if geometry == Geometry::TriMesh => weights.iter().sum(),
            _ => volume,
        };
        let scal = match (&calculus, scal_const) {
            (_, Some(s)) => vec![s; weights.len()],
            (Calculus::Mesh { mesh, mass, .. }, None) => mesh
                .angle_defects()
                .iter()
                .zip(mass)
                .map(|(d, a)| 2.0 * d / a)
                .collect(),
            _ => unreachable!("only meshes lack an analytic scalar curvature"),
        };

        Ok(BaseManifold {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            geometry,
            dimension,
            volume,
            calculus,
            weights,
            scal,
            eigen: OnceLock::new(),
        })
    }

    fn mesh_calculus(mesh: TriMesh) -> Calculus {
        let stiffness = mesh.cotan_stiffness();
        let mass = mesh.mixed_voronoi_areas();
        Calculus::Mesh { mesh, stiffness, mass }
    }

    /// (geometry, dimension, volume, constant scalar curvature if analytic)
    fn analytic(spec: &BaseSpec) -> Result<(Geometry, usize, f64, Option<f64>)> {
        match spec {
            BaseSpec::RoundSphere { dim, radius, .. } => {
                if *dim < 1 {
                    return Err(Error::Domain("sphere dimension must be at least 1".into()));
                }
                check_positive("sphere radius", *radius)?;
                let n = *dim as f64;
                Ok((
                    Geometry::RoundSphere { dim: *dim, radius: *radius },
                    *dim,
                    unit_sphere_area(*dim) * radius.powi(*dim as i32),
                    Some(n * (n - 1.0) / (radius * radius)),
                ))
            }
            BaseSpec::FlatTorus { periods, .. } => {
                if periods.is_empty() {
                    return Err(Error::Domain("torus needs at least one period".into()));
                }
                for p in periods {
                    check_positive("torus period", *p)?;
                }
                Ok((
                    Geometry::FlatTorus { periods: periods.clone() },
                    periods.len(),
                    periods.iter().product(),
                    Some(0.0),
                ))
            }
            BaseSpec::Product(factors) => {
                if factors.is_empty() {
                    return Err(Error::Domain("product needs at least one factor".into()));
                }
                let mut geoms = Vec::new();
                let (mut dim, mut vol, mut scal) = (0, 1.0, 0.0);
                for f in factors {
                    let (g, d, v, s) = Self::analytic(f)?;
                    let s = s.ok_or_else(|| {
                        Error::Unsupported("product factors must be analytic (sphere, torus, product)".into())
                    })?;
                    geoms.push(g);
                    dim += d;
                    vol *= v;
                    scal += s;
                }
                Ok((Geometry::Product(geoms), dim, vol, Some(scal)))
            }
            BaseSpec::TriMesh { .. } => Ok((Geometry::TriMesh, 2, f64::NAN, None)),
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    /// Quadrature weights (all positive, summing to the volume for mesh and
    /// grid backends).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// True when fields beyond constants can be represented.
    pub fn has_calculus(&self) -> bool {
        !matches!(self.calculus, Calculus::Constant)
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self.calculus, Calculus::Spectral(_))
    }

    pub fn is_mesh(&self) -> bool {
        matches!(self.calculus, Calculus::Mesh { .. })
    }

    /// Characteristic node spacing `h` (0 for the constant backend).
    pub fn mesh_size(&self) -> f64 {
        match &self.calculus {
            Calculus::Constant => 0.0,
            Calculus::Spectral(g) => g.spacing(),
            Calculus::Mesh { mesh, .. } => mesh.mean_edge_length(),
        }
    }

    pub fn triangle_mesh(&self) -> Option<&TriMesh> {
        match &self.calculus {
            Calculus::Mesh { mesh, .. } => Some(mesh),
            _ => None,
        }
    }

    /// Node coordinates: grid coordinates on tori, embedded positions on
    /// meshes, the origin for the constant backend.
    pub fn node_coords(&self, i: usize) -> [f64; 3] {
        match &self.calculus {
            Calculus::Constant => [0.0; 3],
            Calculus::Spectral(g) => g.coords(i),
            Calculus::Mesh { mesh, .. } => mesh.vertices()[i],
        }
    }

    pub fn scalar_curvature_field(&self) -> ScalarField {
        ScalarField {
            base_id: self.id,
            values: self.scal.clone(),
        }
    }

    fn check(&self, u: &ScalarField) -> Result<()> {
        if u.base_id != self.id || u.values.len() != self.node_count() {
            return Err(Error::Mismatch(format!(
                "field with {} values does not belong to this base ({} nodes)",
                u.values.len(),
                self.node_count()
            )));
        }
        Ok(())
    }

    pub(crate) fn wrap(&self, values: Vec<f64>) -> ScalarField {
        debug_assert_eq!(values.len(), self.node_count());
        ScalarField {
            base_id: self.id,
            values,
        }
    }

    pub fn laplacian(&self, u: &ScalarField) -> Result<ScalarField> {
        self.check(u)?;
        let values = match &self.calculus {
            Calculus::Constant => vec![0.0],
            Calculus::Spectral(g) => g.laplacian(&u.values),
            Calculus::Mesh { stiffness, mass, .. } => mesh_stiffness_apply(stiffness, &u.values)
                .iter()
                .zip(mass)
                .map(|(k, a)| -k / a)
                .collect(),
        };
        Ok(self.wrap(values))
    }

    /// Pointwise `|∇u|²`. On meshes this is the edge-based form
    /// `(1/2A_i) Σ_j w_ij (u_j − u_i)²`, which integrates to the Dirichlet
    /// energy.
    pub fn gradient_sq_norm(&self, u: &ScalarField) -> Result<ScalarField> {
        self.check(u)?;
        let values = match &self.calculus {
            Calculus::Constant => vec![0.0],
            Calculus::Spectral(g) => g.grad_sq(&u.values),
            Calculus::Mesh { stiffness, mass, .. } => (0..self.node_count())
                .map(|i| {
                    let ui = u.values[i];
                    let s: f64 = stiffness
                        .row(i)
                        .filter(|&(j, _)| j != i)
                        .map(|(j, k)| -k * (u.values[j] - ui).powi(2))
                        .sum();
                    // negative cotangent weights (non-Delaunay edges) can push this below zero
                    (0.5 * s / mass[i]).max(0.0)
                })
                .collect(),
        };
        Ok(self.wrap(values))
    }

    pub fn integrate(&self, u: &ScalarField) -> Result<f64> {
        self.check(u)?;
        Ok(u.values.iter().zip(&self.weights).map(|(x, w)| x * w).sum())
    }

    /// Discrete Dirichlet energy `∫|∇u|² = −∫ u Δu`.
    pub fn dirichlet_energy(&self, u: &ScalarField) -> Result<f64> {
        Ok(self.stiffness_apply(u)?.iter().zip(&u.values).map(|(a, b)| a * b).sum())
    }

    /// Coordinate gradient of `½∫|∇u|²` with respect to the node values.
    pub fn stiffness_apply(&self, u: &ScalarField) -> Result<Vec<f64>> {
        self.check(u)?;
        Ok(match &self.calculus {
            Calculus::Constant => vec![0.0],
            Calculus::Spectral(g) => {
                let w = g.cell_weight();
                g.laplacian(&u.values).into_iter().map(|x| -w * x).collect()
            }
            Calculus::Mesh { stiffness, .. } => mesh_stiffness_apply(stiffness, &u.values),
        })
    }

    /// Solves `(−Δ + shift) x = rhs`, `shift > 0`.
    pub fn solve_shifted(&self, shift: f64, rhs: &ScalarField) -> Result<ScalarField> {
        self.check(rhs)?;
        check_positive("shift", shift)?;
        let values = match &self.calculus {
            Calculus::Constant => vec![rhs.values[0] / shift],
            Calculus::Spectral(g) => g.solve_shifted(shift, &rhs.values),
            Calculus::Mesh { stiffness, mass, .. } => {
                let b: Vec<f64> = rhs.values.iter().zip(mass).map(|(x, m)| x * m).collect();
                sparse::solve_shifted_cg(stiffness, mass, shift, &b, 1e-13, 20 * self.node_count() + 100)?
            }
        };
        Ok(self.wrap(values))
    }

    /// Smallest positive eigenvalue of `−Δ_B`: the exact value for analytic
    /// geometries, the discrete one for triangle meshes.
    pub fn first_eigenvalue(&self) -> Result<f64> {
        match &self.geometry {
            Geometry::TriMesh => self.discrete_first_eigenvalue(),
            g => Ok(analytic_lambda1(g)),
        }
    }

    /// Smallest positive eigenvalue of the assembled discrete operator.
    pub fn discrete_first_eigenvalue(&self) -> Result<f64> {
        self.discrete_eigen().map(|e| e.lambda)
    }

    /// Quadrature-normalized first eigenfunction of the discrete operator.
    pub fn first_eigenfunction(&self) -> Result<ScalarField> {
        self.discrete_eigen().map(|e| self.wrap(e.vector.clone()))
    }

    fn discrete_eigen(&self) -> Result<&DiscreteEigen> {
        let outcome = self.eigen.get_or_init(|| self.solve_eigen());
        outcome.as_ref().map_err(|(message, diagnostics)| Error::Numerical {
            message: message.clone(),
            diagnostics: diagnostics.clone(),
        })
    }

    fn solve_eigen(&self) -> EigenOutcome {
        match &self.calculus {
            Calculus::Constant => Err((
                "no discrete spectrum on the constant-only backend".into(),
                vec![],
            )),
            Calculus::Spectral(g) => {
                let lambda = g.first_eigenvalue();
                // lowest mode along the axis attaining λ₁
                let axis = (0..g.dim())
                    .min_by(|&a, &b| g.periods()[b].total_cmp(&g.periods()[a]))
                    .unwrap_or(0);
                let l = g.periods()[axis];
                let raw: Vec<f64> = (0..g.node_count())
                    .map(|i| (2.0 * PI * g.coords(i)[axis] / l).cos())
                    .collect();
                let nrm = raw.iter().map(|x| x * x * g.cell_weight()).sum::<f64>().sqrt();
                Ok(DiscreteEigen {
                    lambda,
                    vector: raw.into_iter().map(|x| x / nrm).collect(),
                })
            }
            Calculus::Mesh { stiffness, mass, .. } => {
                eigen::first_positive_eigenpair(stiffness, mass, EigenSettings::default())
                    .map(|(lambda, vector)| DiscreteEigen { lambda, vector })
                    .map_err(|e| match e {
                        Error::Numerical { message, diagnostics } => (message, diagnostics),
                        other => (other.to_string(), vec![]),
                    })
            }
        }
    }

    /// Lower Ricci bound `Ric ≥ κ`, if known analytically.
    pub fn ricci_lower_bound(&self) -> Option<f64> {
        ricci_bound(&self.geometry)
    }
}

/// `K u` in edge-difference form, `Σ_{j≠i} K_ij (u_j − u_i)`, which uses the
/// zero row sums of `K` and maps constants to exact zeros.
fn mesh_stiffness_apply(k: &CsrMatrix, u: &[f64]) -> Vec<f64> {
    (0..k.dim())
        .map(|i| {
            k.row(i)
                .filter(|&(j, _)| j != i)
                .map(|(j, kij)| kij * (u[j] - u[i]))
                .sum()
        })
        .collect()
}

fn analytic_lambda1(g: &Geometry) -> f64 {
    match g {
        Geometry::RoundSphere { dim, radius } => *dim as f64 / (radius * radius),
        Geometry::FlatTorus { periods } => periods
            .iter()
            .map(|l| (2.0 * PI / l).powi(2))
            .fold(f64::INFINITY, f64::min),
        Geometry::Product(fs) => fs.iter().map(analytic_lambda1).fold(f64::INFINITY, f64::min),
        Geometry::TriMesh => f64::NAN,
    }
}

fn ricci_bound(g: &Geometry) -> Option<f64> {
    match g {
        Geometry::RoundSphere { dim, radius } => Some((*dim as f64 - 1.0) / (radius * radius)),
        Geometry::FlatTorus { .. } => Some(0.0),
        Geometry::Product(fs) => fs
            .iter()
            .map(ricci_bound)
            .try_fold(f64::INFINITY, |acc, b| b.map(|b| acc.min(b))),
        Geometry::TriMesh => None,
    }
}

impl ScalarField {
    /// Wraps node values; fails on length mismatch or non-finite entries.
    pub fn new(base: &BaseManifold, values: Vec<f64>) -> Result<Self> {
        if values.len() != base.node_count() {
            return Err(Error::Mismatch(format!(
                "expected {} values, got {}",
                base.node_count(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("field value at node {i} is not finite")));
        }
        Ok(base.wrap(values))
    }

    pub fn constant(base: &BaseManifold, value: f64) -> Self {
        base.wrap(vec![value; base.node_count()])
    }

    /// Samples `f(coords)` at every node.
    pub fn from_fn(base: &BaseManifold, f: impl Fn([f64; 3]) -> f64) -> Self {
        base.wrap((0..base.node_count()).map(|i| f(base.node_coords(i))).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_base(&self, other: &ScalarField) -> bool {
        self.base_id == other.base_id && self.values.len() == other.values.len()
    }

    pub fn belongs_to(&self, base: &BaseManifold) -> bool {
        base.check(self).is_ok()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            base_id: self.base_id,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination; fails if the fields live on different bases.
    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        if !self.same_base(other) {
            return Err(Error::Mismatch("fields live on different bases".into()));
        }
        Ok(ScalarField {
            base_id: self.base_id,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        self.map(|v| s * v)
    }
}
