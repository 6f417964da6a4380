//! Smallest positive eigenvalue of the generalized problem `K x = λ M x`
//! (stiffness `K`, lumped mass `M`) by shifted block inverse iteration with
//! the constant mode deflated.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sparse::{solve_shifted_cg, CsrMatrix};
use crate::error::{Error, Result};

const BLOCK: usize = 6;
const SHIFT: f64 = 1.0;

#[derive(Debug, Clone, Copy)]
pub struct EigenSettings {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for EigenSettings {
    fn default() -> Self {
        EigenSettings {
            rel_tol: 1e-12,
            max_iter: 500,
        }
    }
}

fn m_dot(a: &[f64], b: &[f64], mass: &[f64]) -> f64 {
    a.iter().zip(b).zip(mass).map(|((x, y), m)| x * y * m).sum()
}

fn deflate_constant(v: &mut [f64], mass: &[f64], total_mass: f64) {
    let mean = v.iter().zip(mass).map(|(x, m)| x * m).sum::<f64>() / total_mass;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// M-orthonormalizes the block in place (two passes of modified Gram–Schmidt).
fn orthonormalize(block: &mut [Vec<f64>], mass: &[f64]) -> Result<()> {
    for _pass in 0..2 {
        for i in 0..block.len() {
            for j in 0..i {
                let (head, tail) = block.split_at_mut(i);
                let proj = m_dot(&tail[0], &head[j], mass);
                tail[0].iter_mut().zip(&head[j]).for_each(|(x, y)| *x -= proj * y);
            }
            let nrm = m_dot(&block[i], &block[i], mass).sqrt();
            if !(nrm > 1e-300) {
                return Err(Error::numerical("eigensolver block collapsed", vec![("column", i as f64)]));
            }
            block[i].iter_mut().for_each(|x| *x /= nrm);
        }
    }
    Ok(())
}

/// Returns `(λ₁, eigenvector)` with the eigenvector M-normalized.
pub fn first_positive_eigenpair(
    stiffness: &CsrMatrix,
    mass: &[f64],
    settings: EigenSettings,
) -> Result<(f64, Vec<f64>)> {
    let n = stiffness.dim();
    let p = BLOCK.min(n.saturating_sub(1));
    if p == 0 {
        return Err(Error::Domain("eigenproblem needs at least two nodes".into()));
    }
    let total_mass: f64 = mass.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut block: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    for v in block.iter_mut() {
        deflate_constant(v, mass, total_mass);
    }
    orthonormalize(&mut block, mass)?;

    let mut prev = f64::INFINITY;
    let mut last_residual = f64::INFINITY;
    for it in 0..settings.max_iter {
        // Z = (K + σM)^{-1} M Q
        let mut next = Vec::with_capacity(p);
        for q in &block {
            let rhs: Vec<f64> = q.iter().zip(mass).map(|(x, m)| x * m).collect();
            let mut z = solve_shifted_cg(stiffness, mass, SHIFT, &rhs, 1e-14, 20 * n + 100)?;
            deflate_constant(&mut z, mass, total_mass);
            next.push(z);
        }
        orthonormalize(&mut next, mass)?;

        // Rayleigh–Ritz on span(Z)
        let kz: Vec<Vec<f64>> = next.iter().map(|z| stiffness.mul_vec(z)).collect();
        let reduced = DMatrix::from_fn(p, p, |i, j| {
            let a = super::sparse::dot(&next[i], &kz[j]);
            let b = super::sparse::dot(&next[j], &kz[i]);
            0.5 * (a + b)
        });
        let eig = SymmetricEigen::new(reduced);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        block = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; n];
                for (j, z) in next.iter().enumerate() {
                    let w = eig.eigenvectors[(j, c)];
                    v.iter_mut().zip(z).for_each(|(x, y)| *x += w * y);
                }
                v
            })
            .collect();
        let lambda = eig.eigenvalues[order[0]];

        let q = &block[0];
        let kq = stiffness.mul_vec(q);
        // residual in the M^{-1} norm, relative to λ
        let residual = kq
            .iter()
            .zip(q)
            .zip(mass)
            .map(|((k, x), m)| (k - lambda * m * x).powi(2) / m)
            .sum::<f64>()
            .sqrt()
            / lambda.abs().max(f64::MIN_POSITIVE);
        last_residual = residual;
        if (lambda - prev).abs() <= settings.rel_tol * lambda.abs() && residual < 1e-7 {
            let nrm = m_dot(q, q, mass).sqrt();
            return Ok((lambda, q.iter().map(|x| x / nrm).collect()));
        }
        prev = lambda;
        let _ = it;
    }
    Err(Error::numerical(
        "eigensolver did not converge",
        vec![
            ("max_iter", settings.max_iter as f64),
            ("last_eigenvalue", prev),
            ("last_residual", last_residual),
        ],
    ))
}
