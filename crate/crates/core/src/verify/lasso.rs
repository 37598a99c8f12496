//! Lasso by cyclic coordinate descent, and the oracle inequality certifier.
//!
//! The objective is `||y - X u||_{2,n}^2 + 2 lambda ||u||_1` with
//! `y = xi + X u0`.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constants::{compat_constant, ConeSpec};
use crate::ensembles::{sample, DesignSample, EnsembleSpec};
use crate::error::{invalid, Error, Result};
use crate::matcore::dot;
use crate::rng::{keyed, Purpose};

pub const MAX_SWEEPS: usize = 100_000;
pub const UPDATE_TOL: f64 = 1e-9;
/// Slack on both sides of the oracle inequality for solver error.
const INEQUALITY_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct LassoProblem {
    pub x: DesignSample,
    pub u0: Vec<f64>,
    pub support: Vec<usize>,
    pub xi: Vec<f64>,
    pub lambda: f64,
    pub lambda0: f64,
}

impl LassoProblem {
    pub fn new(x: DesignSample, u0: Vec<f64>, xi: Vec<f64>, lambda: f64) -> Result<Self> {
        if u0.len() != x.p {
            return Err(Error::DimensionMismatch { expected: x.p, got: u0.len() });
        }
        if xi.len() != x.n {
            return Err(Error::DimensionMismatch { expected: x.n, got: xi.len() });
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return invalid(format!("lambda must be positive, got {lambda}"));
        }
        let support = (0..x.p).filter(|&j| u0[j] != 0.0).collect();
        let lambda0 = x.tmul_n(&xi).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self { x, u0, support, xi, lambda, lambda0 })
    }

    /// Random instance: signal `+-amplitude` on `support` and `N(0, noise_sd^2)`
    /// noise. The penalty is `lambda_factor * lambda0`, or `lambda_fixed`
    /// when given (needed for noiseless problems where `lambda0 = 0`).
    pub fn seeded(
        spec: &EnsembleSpec,
        n: usize,
        support: &[usize],
        amplitude: f64,
        noise_sd: f64,
        lambda_factor: f64,
        lambda_fixed: Option<f64>,
        seed: u64,
    ) -> Result<Self> {
        let x = sample(spec, n, seed)?;
        let mut rng = keyed(seed, Purpose::Signal, 0);
        let mut u0 = vec![0.0; spec.p];
        for &j in support {
            if j >= spec.p {
                return invalid(format!("support index {j} out of range for p = {}", spec.p));
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            u0[j] = amplitude * z.signum() * (1.0 + 0.5 * z.abs().min(2.0));
        }
        let mut rng = keyed(seed, Purpose::Noise, 0);
        let xi: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                noise_sd * z
            })
            .collect();
        let mut p = Self::new(x, u0, xi, 1.0)?;
        p.lambda = match lambda_fixed {
            Some(l) => l,
            None => lambda_factor * p.lambda0,
        };
        if !(p.lambda > 0.0) {
            return invalid("lambda must be positive (noiseless problems need a fixed lambda)");
        }
        Ok(p)
    }

    pub fn response(&self) -> Vec<f64> {
        self.x.mul(&self.u0).iter().zip(&self.xi).map(|(a, b)| a + b).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub u: Vec<f64>,
    pub objective: f64,
    pub duality_gap: f64,
    pub kkt_residual: f64,
    pub sweeps: usize,
    pub converged: bool,
}

pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

fn residual(x: &DesignSample, y: &[f64], u: &[f64]) -> Vec<f64> {
    x.mul(u).iter().zip(y).map(|(a, b)| b - a).collect()
}

pub fn lasso_objective(x: &DesignSample, y: &[f64], u: &[f64], lambda: f64) -> f64 {
    let r = residual(x, y, u);
    dot(&r, &r) / x.n as f64 + 2.0 * lambda * u.iter().map(|v| v.abs()).sum::<f64>()
}

/// Largest violation of `X^T (y - X u) / n in lambda * subdiff ||u||_1`.
pub fn subgradient_residual(x: &DesignSample, y: &[f64], u: &[f64], lambda: f64) -> f64 {
    let g = x.tmul_n(&residual(x, y, u));
    g.iter()
        .zip(u)
        .map(|(&gj, &uj)| if uj != 0.0 { (gj - lambda * uj.signum()).abs() } else { (gj.abs() - lambda).max(0.0) })
        .fold(0.0, f64::max)
}

/// Primal minus the dual value at the rescaled residual.
pub fn duality_gap(x: &DesignSample, y: &[f64], u: &[f64], lambda: f64) -> f64 {
    let n = x.n as f64;
    let r = residual(x, y, u);
    let g = x.tmul_n(&r);
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if gmax > lambda { lambda / gmax } else { 1.0 };
    let nu: Vec<f64> = r.iter().map(|v| v * scale).collect();
    let dual = 2.0 * dot(&nu, y) / n - dot(&nu, &nu) / n;
    (lasso_objective(x, y, u, lambda) - dual).max(0.0)
}

pub fn lasso_fit(problem: &LassoProblem) -> Result<LassoFit> {
    let lambda = problem.lambda;
    if !(lambda > 0.0) {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    let x = &problem.x;
    let (n, p) = (x.n, x.p);
    let y = problem.response();
    // Column-major copy for the inner loop.
    let mut cols = vec![0.0; n * p];
    for i in 0..n {
        for j in 0..p {
            cols[j * n + i] = x.x[i * p + j];
        }
    }
    let sq = &x.sigma_hat_sq;
    let mut u = vec![0.0; p];
    let mut r = y.clone();
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_update: f64 = 0.0;
        for j in 0..p {
            if sq[j] == 0.0 {
                continue;
            }
            let col = &cols[j * n..(j + 1) * n];
            let z = dot(col, &r) / n as f64 + sq[j] * u[j];
            let new = soft_threshold(z, lambda) / sq[j];
            let delta = new - u[j];
            if delta != 0.0 {
                r.iter_mut().zip(col).for_each(|(ri, ci)| *ri -= delta * ci);
                u[j] = new;
                max_update = max_update.max(delta.abs());
            }
        }
        if max_update < UPDATE_TOL {
            // Refresh the residual to shed accumulated rounding before deciding.
            r = residual(x, &y, &u);
            if subgradient_residual(x, &y, &u, lambda) <= 1e-9 * lambda.max(1.0) {
                converged = true;
                break;
            }
        }
    }
    Ok(LassoFit {
        objective: lasso_objective(x, &y, &u, lambda),
        duality_gap: duality_gap(x, &y, &u, lambda),
        kkt_residual: subgradient_residual(x, &y, &u, lambda),
        u,
        sweeps,
        converged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityStatus {
    Pass,
    Fail,
    Vacuous,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleInequalityRecord {
    pub lambda: f64,
    pub lambda0: f64,
    pub s: usize,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub compat: f64,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub status: InequalityStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub fit: Option<LassoFit>,
}

/// `L = (lambda + lambda0) / (lambda - lambda0)`, or `None` when `lambda <= lambda0`.
pub fn cone_slack(lambda: f64, lambda0: f64) -> Option<f64> {
    (lambda > lambda0).then(|| (lambda + lambda0) / (lambda - lambda0))
}

/// Compatibility constant at the problem's own `(L, S)`.
pub fn problem_compat(problem: &LassoProblem) -> Result<Option<f64>> {
    let Some(l) = cone_slack(problem.lambda, problem.lambda0) else {
        return Ok(None);
    };
    if problem.support.is_empty() {
        return Ok(None);
    }
    Ok(Some(compat_constant(&problem.x.gram, &ConeSpec::compat(problem.support.clone(), l))?.value))
}

/// Fits the Lasso and compares `||X(u_hat - u0)||_{2,n}^2` with
/// `(lambda + lambda0)^2 |S| / compat`.
pub fn oracle_inequality_check(problem: &LassoProblem, compat_value: f64) -> Result<OracleInequalityRecord> {
    let s = problem.support.len();
    let mut rec = OracleInequalityRecord {
        lambda: problem.lambda,
        lambda0: problem.lambda0,
        s,
        l: cone_slack(problem.lambda, problem.lambda0),
        compat: compat_value,
        lhs: None,
        rhs: None,
        status: InequalityStatus::Skipped,
        reason: None,
        fit: None,
    };
    if rec.l.is_none() {
        rec.reason = Some(format!("lambda = {} does not exceed lambda0 = {}", problem.lambda, problem.lambda0));
        return Ok(rec);
    }
    let fit = lasso_fit(problem)?;
    let diff: Vec<f64> = fit.u.iter().zip(&problem.u0).map(|(a, b)| a - b).collect();
    let xd = problem.x.mul(&diff);
    let lhs = dot(&xd, &xd) / problem.x.n as f64;
    rec.lhs = Some(lhs);
    rec.fit = Some(fit);
    let lam = problem.lambda + problem.lambda0;
    if s == 0 {
        rec.rhs = Some(0.0);
        rec.status = if lhs <= INEQUALITY_SLACK { InequalityStatus::Pass } else { InequalityStatus::Fail };
        return Ok(rec);
    }
    if compat_value <= 1e-10 {
        rec.status = InequalityStatus::Vacuous;
        rec.reason = Some("compatibility constant is numerically zero".into());
        return Ok(rec);
    }
    let rhs = lam * lam * s as f64 / compat_value;
    rec.rhs = Some(rhs);
    rec.status = if lhs <= rhs * (1.0 + INEQUALITY_SLACK) + INEQUALITY_SLACK { InequalityStatus::Pass } else { InequalityStatus::Fail };
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleSpec;

    /// Exact minimizer by enumerating sign patterns (small `p` only).
    fn enumerate(x: &DesignSample, y: &[f64], lambda: f64) -> f64 {
        let p = x.p;
        let xty = x.tmul_n(y);
        let mut best = lasso_objective(x, y, &vec![0.0; p], lambda);
        for code in 0..3usize.pow(p as u32) {
            let mut c = code;
            let signs: Vec<i32> = (0..p)
                .map(|_| {
                    let d = (c % 3) as i32 - 1;
                    c /= 3;
                    d
                })
                .collect();
            let act: Vec<usize> = (0..p).filter(|&j| signs[j] != 0).collect();
            if act.is_empty() {
                continue;
            }
            let g = x.gram.principal_submatrix(&act);
            let rhs: Vec<f64> = act.iter().map(|&j| xty[j] - lambda * signs[j] as f64).collect();
            let Some(l) = crate::matcore::cholesky(&g).factor() else { continue };
            let sol = l.solve_transposed(&l.solve(&rhs));
            if act.iter().zip(&sol).all(|(&j, &v)| v * signs[j] as f64 > 0.0) {
                let mut u = vec![0.0; p];
                act.iter().zip(&sol).for_each(|(&j, &v)| u[j] = v);
                best = best.min(lasso_objective(x, y, &u, lambda));
            }
        }
        best
    }

    #[test]
    fn orthonormal_closed_form() {
        // Columns of a scaled Hadamard block: X^T X / n = I.
        let h = [[1.0, 1.0, 1.0, 1.0], [1.0, -1.0, 1.0, -1.0], [1.0, 1.0, -1.0, -1.0], [1.0, -1.0, -1.0, 1.0]];
        let x = DesignSample::from_data(4, 4, h.iter().flatten().cloned().collect()).unwrap();
        let u0 = vec![2.0, -0.3, 0.0, 0.7];
        let xi = vec![0.1, -0.2, 0.05, 0.0];
        let prob = LassoProblem::new(x.clone(), u0, xi, 0.5).unwrap();
        let fit = lasso_fit(&prob).unwrap();
        let z = x.tmul_n(&prob.response());
        for j in 0..4 {
            assert!((fit.u[j] - soft_threshold(z[j], 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn full_shrinkage() {
        let x = sample(&EnsembleSpec::gaussian(5), 30, 3).unwrap();
        let mut prob = LassoProblem::new(x, vec![1.0, 0.0, 0.0, -1.0, 0.0], vec![0.0; 30], 1.0).unwrap();
        let z = prob.x.tmul_n(&prob.response());
        prob.lambda = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let fit = lasso_fit(&prob).unwrap();
        assert!(fit.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_sign_enumeration() {
        for seed in 0..5 {
            let prob = LassoProblem::seeded(&EnsembleSpec::gaussian(5), 10, &[0, 2], 1.0, 0.5, 1.5, None, seed).unwrap();
            let fit = lasso_fit(&prob).unwrap();
            let exact = enumerate(&prob.x, &prob.response(), prob.lambda);
            assert!((fit.objective - exact).abs() < 1e-6 * exact.max(1.0), "{} vs {exact}", fit.objective);
            assert!(fit.kkt_residual <= 1e-7);
            assert!(fit.duality_gap < 1e-8);
        }
    }

    #[test]
    fn zero_signal_passes() {
        let x = sample(&EnsembleSpec::gaussian(6), 40, 9).unwrap();
        let mut rng = keyed(1, Purpose::Noise, 0);
        let xi: Vec<f64> = (0..40).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut prob = LassoProblem::new(x, vec![0.0; 6], xi, 1.0).unwrap();
        prob.lambda = 1.5 * prob.lambda0;
        let rec = oracle_inequality_check(&prob, 1.0).unwrap();
        assert_eq!(rec.status, InequalityStatus::Pass);
        assert_eq!(rec.lhs, Some(0.0));
    }

    #[test]
    fn skipped_below_lambda0() {
        let prob = LassoProblem::seeded(&EnsembleSpec::gaussian(4), 20, &[1], 1.0, 1.0, 0.5, None, 2).unwrap();
        let rec = oracle_inequality_check(&prob, 1.0).unwrap();
        assert_eq!(rec.status, InequalityStatus::Skipped);
        assert!(rec.reason.is_some());
    }

    #[test]
    fn noiseless_has_unit_slack() {
        let prob = LassoProblem::seeded(&EnsembleSpec::gaussian(8), 50, &[0, 3], 1.0, 0.0, 1.0, Some(0.2), 4).unwrap();
        assert_eq!(prob.lambda0, 0.0);
        let phi = problem_compat(&prob).unwrap().unwrap();
        let rec = oracle_inequality_check(&prob, phi).unwrap();
        assert_eq!(rec.l, Some(1.0));
        assert_eq!(rec.status, InequalityStatus::Pass);
    }
}
