//! Symmetric tridiagonal linear algebra: direct solves, Sturm-bisection
//! eigenvalues, and inverse-iteration eigenvectors.
//!
//! The stiffness pencil produced by the finite-volume discretization is
//! symmetric positive definite and tridiagonal, so everything here is O(n)
//! per solve and O(n log(1/eps)) per eigenvalue.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix: `diag[i]` on the diagonal, `off[i]`
/// connecting rows i and i+1.
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n();
        debug_assert_eq!(x.len(), n);
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            out[i] = s;
        }
    }

    /// Solve `T x = b` by the Thomas sweep. Requires the matrix to be
    /// positive definite (no pivoting).
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if b.len() != n {
            return Err(Error::LengthMismatch {
                got: b.len(),
                expected: n,
            });
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];
        let mut denom = self.diag[0];
        if denom == 0.0 {
            return Err(Error::LinearSolve {
                residual: f64::INFINITY,
                iterations: 0,
            });
        }
        c_prime[0] = if n > 1 { self.off[0] / denom } else { 0.0 };
        d_prime[0] = b[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.off[i - 1] * c_prime[i - 1];
            if denom == 0.0 {
                return Err(Error::LinearSolve {
                    residual: f64::INFINITY,
                    iterations: i,
                });
            }
            if i + 1 < n {
                c_prime[i] = self.off[i] / denom;
            }
            d_prime[i] = (b[i] - self.off[i - 1] * d_prime[i - 1]) / denom;
        }
        let mut x = d_prime;
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= c_prime[i] * next;
        }
        Ok(x)
    }

    /// Count eigenvalues strictly below `lambda` via the Sturm sequence
    /// (number of negative pivots of the LDL^T factorization of T - lambda I).
    pub fn sturm_count(&self, lambda: f64) -> usize {
        let n = self.n();
        if n == 0 {
            return 0;
        }
        let guard = 1e-300;
        let mut count = 0;
        let mut q = self.diag[0] - lambda;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let q_safe = if q.abs() < guard {
                if q >= 0.0 {
                    guard
                } else {
                    -guard
                }
            } else {
                q
            };
            q = (self.diag[i] - lambda) - self.off[i - 1] * self.off[i - 1] / q_safe;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin bounds on the spectrum.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Lowest `k` eigenvalues (ascending) by bisection on the Sturm count.
    pub fn lowest_eigenvalues(&self, k: usize) -> Result<Vec<f64>> {
        let n = self.n();
        if k > n {
            return Err(Error::Eigen(format!(
                "requested {k} eigenvalues of a {n}x{n} matrix"
            )));
        }
        let (lo0, hi0) = self.spectrum_bounds();
        let span = (hi0 - lo0).max(1.0);
        let mut out = Vec::with_capacity(k);
        for j in 0..k {
            // Bisection for the (j+1)-th smallest eigenvalue.
            let mut lo = lo0;
            let mut hi = hi0;
            for _ in 0..120 {
                let mid = 0.5 * (lo + hi);
                if self.sturm_count(mid) > j {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= 1e-15 * span + 1e-14 * mid.abs() {
                    break;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        Ok(out)
    }

    /// Eigenvector for an isolated eigenvalue estimate by inverse iteration.
    /// Returns a unit 2-norm vector.
    pub fn eigenvector(&self, lambda: f64) -> Result<Vec<f64>> {
        let n = self.n();
        // Shift slightly off the eigenvalue so the solve stays nonsingular;
        // relative to the eigenvalue itself, not the spectrum span, which can
        // be many orders larger on strongly graded meshes.
        let shift = lambda + 1e-10 * lambda.abs().max(1e-30);
        let shifted = SymTridiag {
            diag: self.diag.iter().map(|d| d - shift).collect(),
            off: self.off.clone(),
        };
        // Deterministic start vector.
        let mut v: Vec<f64> = (0..n)
            .map(|i| ((i as f64 + 1.0) * 0.7390851332151607).sin())
            .collect();
        normalize(&mut v);
        let mut resid = f64::INFINITY;
        for _ in 0..8 {
            let mut w = solve_indefinite(&shifted, &v)?;
            normalize(&mut w);
            let mut tv = vec![0.0; n];
            self.apply(&w, &mut tv);
            resid = (0..n)
                .map(|i| (tv[i] - lambda * w[i]).powi(2))
                .sum::<f64>()
                .sqrt();
            v = w;
            if resid <= 1e-10 * lambda.abs().max(1.0) {
                break;
            }
        }
        if resid.is_finite() {
            Ok(v)
        } else {
            Err(Error::Eigen(format!(
                "inverse iteration diverged at lambda = {lambda}"
            )))
        }
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// LU solve with a diagonal guard, for (possibly indefinite) shifted systems
/// arising in inverse iteration. Partial pivoting is unnecessary in practice
/// here because the shift keeps pivots away from zero.
fn solve_indefinite(t: &SymTridiag, b: &[f64]) -> Result<Vec<f64>> {
    let n = t.n();
    let guard = 1e-290;
    let mut c_prime = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut denom = t.diag[0];
    if denom.abs() < guard {
        denom = guard;
    }
    if n > 1 {
        c_prime[0] = t.off[0] / denom;
    }
    x[0] = b[0] / denom;
    for i in 1..n {
        denom = t.diag[i] - t.off[i - 1] * c_prime[i - 1];
        if denom.abs() < guard {
            denom = if denom >= 0.0 { guard } else { -guard };
        }
        if i + 1 < n {
            c_prime[i] = t.off[i] / denom;
        }
        x[i] = (b[i] - t.off[i - 1] * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c_prime[i] * next;
    }
    Ok(x)
}

/// Diagonally preconditioned conjugate gradient for a symmetric positive
/// definite tridiagonal system. The direct sweep is normally used instead;
/// this path exists for configurations that request it.
pub fn pcg_solve(t: &SymTridiag, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = t.n();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let b_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok(x);
    }
    let inv_diag: Vec<f64> = t.diag.iter().map(|d| 1.0 / d).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for iter in 0..max_iter {
        t.apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= tol * b_norm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        if iter + 1 == max_iter {
            return Err(Error::LinearSolve {
                residual: r_norm / b_norm,
                iterations: max_iter,
            });
        }
    }
    Err(Error::LinearSolve {
        residual: f64::INFINITY,
        iterations: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn laplacian(n: usize, h: f64) -> SymTridiag {
        SymTridiag {
            diag: vec![2.0 / (h * h); n],
            off: vec![-1.0 / (h * h); n - 1],
        }
    }

    #[test]
    fn thomas_reproduces_rhs() {
        let t = laplacian(25, 0.1);
        let b: Vec<f64> = (0..25).map(|i| (i as f64 * 0.3).cos()).collect();
        let x = t.solve(&b).unwrap();
        let mut tx = vec![0.0; 25];
        t.apply(&x, &mut tx);
        for (a, b) in tx.iter().zip(&b) {
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn sturm_eigenvalues_match_closed_form() {
        // Dirichlet Laplacian on (0,1) with n interior nodes:
        // lambda_k = (2/h^2)(1 - cos(k pi h)).
        let n = 40;
        let h = 1.0 / (n as f64 + 1.0);
        let t = laplacian(n, h);
        let eigs = t.lowest_eigenvalues(5).unwrap();
        for (k, lam) in eigs.iter().enumerate() {
            let exact = 2.0 / (h * h) * (1.0 - ((k + 1) as f64 * std::f64::consts::PI * h).cos());
            assert_relative_eq!(lam, &exact, max_relative = 1e-10);
        }
    }

    #[test]
    fn inverse_iteration_gives_eigenvector() {
        let n = 40;
        let h = 1.0 / (n as f64 + 1.0);
        let t = laplacian(n, h);
        let lam = t.lowest_eigenvalues(1).unwrap()[0];
        let v = t.eigenvector(lam).unwrap();
        let mut tv = vec![0.0; n];
        t.apply(&v, &mut tv);
        let resid: f64 = (0..n).map(|i| (tv[i] - lam * v[i]).powi(2)).sum::<f64>().sqrt();
        assert!(resid < 1e-8 * lam, "residual {resid}");
    }

    #[test]
    fn pcg_matches_direct() {
        let t = laplacian(64, 0.05);
        let b: Vec<f64> = (0..64).map(|i| (i as f64).sin()).collect();
        let direct = t.solve(&b).unwrap();
        let iterative = pcg_solve(&t, &b, 1e-12, 640).unwrap();
        for (a, b) in direct.iter().zip(&iterative) {
            assert_relative_eq!(a, b, epsilon = 1e-8);
        }
    }
}
