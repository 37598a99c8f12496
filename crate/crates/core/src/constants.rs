//! Compatibility constants and restricted eigenvalues over l1-restricted sets.
//!
//! The compatibility constant splits the l1 sphere on `S` into sign orthants;
//! each orthant is a convex quadratic program, so the minimum over orthants
//! is certified by Frank-Wolfe gaps. The l2-normalized constants are
//! nonconvex and are computed by multi-start projected descent.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::matcore::{
    cholesky, dot, extreme_eigenvalues, norm1, norm2, project_l1_ball, project_l1_sphere, project_signed_simplex, quad, sym_matrix_to_csv,
    SymMatrix,
};
use crate::rng::{keyed, Purpose, StreamRng};

mod oracle;
pub use oracle::{oracle_minimum, OracleTarget, MAX_ORACLE_DIM};

/// Largest support the orthant enumeration accepts.
pub const MAX_SUPPORT: usize = 20;
/// Threshold on `phi(1, S)` for the null space property.
pub const NSP_TOL: f64 = 1e-8;
const SOLVER_SEED: u64 = 0x150_0AD5;
const STARTS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormMode {
    #[serde(rename = "l1_on_S")]
    L1OnS,
    #[serde(rename = "l2_on_uS")]
    L2OnUS,
    #[serde(rename = "l2_on_u")]
    L2OnU,
    #[serde(rename = "adaptive")]
    Adaptive,
}

impl NormMode {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "compat" | "l1_on_S" | "l1_on_s" => NormMode::L1OnS,
            "re" | "l2_on_uS" | "l2_on_us" => NormMode::L2OnUS,
            "re_u" | "l2_on_u" => NormMode::L2OnU,
            "adaptive" | "adaptive_re" => NormMode::Adaptive,
            other => return invalid(format!("unknown norm mode `{other}` (compat, re, re_u, adaptive)")),
        })
    }
}

/// Support `S` (0-based), slack `L`, and normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeSpec {
    #[serde(rename = "S")]
    pub support: Vec<usize>,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(default = "default_mode")]
    pub norm_mode: NormMode,
}

fn default_mode() -> NormMode {
    NormMode::L2OnUS
}

impl ConeSpec {
    pub fn new(support: Vec<usize>, l: f64, norm_mode: NormMode) -> Self {
        Self { support, l, norm_mode }
    }

    pub fn compat(support: Vec<usize>, l: f64) -> Self {
        Self::new(support, l, NormMode::L1OnS)
    }

    pub fn re(support: Vec<usize>, l: f64) -> Self {
        Self::new(support, l, NormMode::L2OnUS)
    }

    pub fn adaptive(support: Vec<usize>, l: f64) -> Self {
        Self::new(support, l, NormMode::Adaptive)
    }

    pub fn with_mode(&self, norm_mode: NormMode) -> Self {
        Self { norm_mode, ..self.clone() }
    }

    pub fn s(&self) -> usize {
        self.support.len()
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.support.is_empty() {
            return invalid("support S must be nonempty");
        }
        let mut seen = vec![false; p];
        for &j in &self.support {
            if j >= p {
                return invalid(format!("support index {j} out of range for p = {p}"));
            }
            if seen[j] {
                return invalid(format!("support index {j} repeated"));
            }
            seen[j] = true;
        }
        if !(self.l >= 0.0 && self.l.is_finite()) {
            return invalid(format!("L must be a finite nonnegative number, got {}", self.l));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    OrthantExact,
    Iterative,
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantResult {
    pub value: f64,
    pub minimizer: Vec<f64>,
    pub certificate: Certificate,
    pub gap_estimate: f64,
    pub orthant_count: usize,
}

/// JSON record emitted by the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantRecord {
    pub value: f64,
    pub certificate: Certificate,
    pub gap_estimate: f64,
    pub minimizer: Vec<f64>,
    pub cone: ConeSpec,
    pub matrix_hash: String,
    pub orthant_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization_note: Option<String>,
}

impl ConstantRecord {
    pub fn new(result: ConstantResult, cone: &ConeSpec, a: &SymMatrix) -> Self {
        let note = match cone.norm_mode {
            NormMode::L2OnUS => Some("restricted eigenvalue normalized by ||u_S||_2 = 1; mode l2_on_u uses ||u||_2 = 1".to_string()),
            NormMode::L2OnU => Some("restricted eigenvalue normalized by ||u||_2 = 1; mode l2_on_uS uses ||u_S||_2 = 1".to_string()),
            _ => None,
        };
        Self {
            value: result.value,
            certificate: result.certificate,
            gap_estimate: result.gap_estimate,
            minimizer: result.minimizer,
            cone: cone.clone(),
            matrix_hash: matrix_hash(a),
            orthant_count: result.orthant_count,
            normalization_note: note,
        }
    }
}

/// SHA-256 of the matrix's CSV text.
pub fn matrix_hash(a: &SymMatrix) -> String {
    hex::encode(Sha256::digest(sym_matrix_to_csv(a).as_bytes()))
}

/// Index bookkeeping for a support set.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub p: usize,
    pub s: Vec<usize>,
    pub rest: Vec<usize>,
}

impl Layout {
    pub fn new(p: usize, support: &[usize]) -> Self {
        let mut in_s = vec![false; p];
        support.iter().for_each(|&j| in_s[j] = true);
        Self { p, s: support.to_vec(), rest: (0..p).filter(|j| !in_s[*j]).collect() }
    }

    pub fn gather(&self, u: &[f64], idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&j| u[j]).collect()
    }

    pub fn join(&self, us: &[f64], ur: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.p];
        self.s.iter().zip(us).for_each(|(&j, &v)| u[j] = v);
        self.rest.iter().zip(ur).for_each(|(&j, &v)| u[j] = v);
        u
    }

    pub fn s_norm2_sq(&self, u: &[f64]) -> f64 {
        self.s.iter().map(|&j| u[j] * u[j]).sum()
    }
}

fn check_matrix(a: &SymMatrix, cone: &ConeSpec) -> Result<f64> {
    cone.validate(a.dim())?;
    if cone.s() > MAX_SUPPORT {
        return Err(Error::CapExceeded { what: format!("support size {} (orthant enumeration)", cone.s()), cap: MAX_SUPPORT });
    }
    let e = extreme_eigenvalues(a);
    let scale = e.max.abs().max(1.0);
    if e.min < -1e-10 * scale {
        return Err(Error::NotPositiveSemidefinite { min_eig: e.min });
    }
    Ok(e.max.max(0.0))
}

fn require_mode(cone: &ConeSpec, allowed: &[NormMode], op: &str) -> Result<()> {
    if allowed.contains(&cone.norm_mode) {
        Ok(())
    } else {
        invalid(format!("{op} does not accept norm mode {:?}", cone.norm_mode))
    }
}

/// Dispatches on `cone.norm_mode`.
pub fn constant(a: &SymMatrix, cone: &ConeSpec) -> Result<ConstantResult> {
    match cone.norm_mode {
        NormMode::L1OnS => compat_constant(a, cone),
        NormMode::L2OnUS | NormMode::L2OnU => restricted_eigenvalue(a, cone),
        NormMode::Adaptive => adaptive_re(a, cone),
    }
}

struct OrthantSolution {
    u: Vec<f64>,
    f: f64,
    fw_gap: f64,
}

fn orthant_project(layout: &Layout, v: &[f64], signs: &[f64], l: f64) -> Vec<f64> {
    let us = project_signed_simplex(&layout.gather(v, &layout.s), signs, 1.0);
    let ur = project_l1_ball(&layout.gather(v, &layout.rest), l);
    layout.join(&us, &ur)
}

/// Frank-Wolfe gap `g.u - min_{v in orthant} g.v` for `f = u^T A u`.
fn fw_gap(layout: &Layout, g: &[f64], u: &[f64], signs: &[f64], l: f64) -> f64 {
    let min_s = layout.s.iter().zip(signs).map(|(&j, &sg)| sg * g[j]).fold(f64::INFINITY, f64::min);
    let max_r = layout.rest.iter().map(|&j| g[j].abs()).fold(0.0, f64::max);
    (dot(g, u) - (min_s - l * max_r)).max(0.0)
}

/// Accelerated projected gradient with function restarts on one orthant.
fn solve_orthant(a: &SymMatrix, layout: &Layout, signs: &[f64], l: f64, lam_max: f64) -> OrthantSolution {
    let p = layout.p;
    let s = layout.s.len() as f64;
    let start: Vec<f64> = layout.join(&signs.iter().map(|sg| sg / s).collect::<Vec<_>>(), &vec![0.0; layout.rest.len()]);
    let lip = 2.0 * lam_max * (1.0 + 1e-9);
    let step = 1.0 / lip;
    let tol = 1e-7 * lam_max.max(1.0);
    let cap = 50 * p + 2000;

    let mut x = start;
    let mut fx = quad(a, &x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut g = vec![0.0; p];
    for it in 0..cap {
        a.mul_vec_into(&y, &mut g);
        g.iter_mut().for_each(|v| *v *= 2.0);
        let trial: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - step * gi).collect();
        let xn = orthant_project(layout, &trial, signs, l);
        let fn_ = quad(a, &xn);
        if fn_ > fx {
            // Function restart: drop momentum and retry from x.
            y.clone_from(&x);
            t = 1.0;
            if it + 1 < cap {
                continue;
            }
            break;
        }
        let tn = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / tn;
        y = xn.iter().zip(&x).map(|(a, b)| a + beta * (a - b)).collect();
        x = xn;
        fx = fn_;
        t = tn;
        if it % 5 == 4 {
            a.mul_vec_into(&x, &mut g);
            g.iter_mut().for_each(|v| *v *= 2.0);
            let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
            let px = orthant_project(layout, &trial, signs, l);
            let pg = norm2(&px.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>()) / step;
            if pg <= tol {
                break;
            }
        }
    }
    a.mul_vec_into(&x, &mut g);
    g.iter_mut().for_each(|v| *v *= 2.0);
    let gap = fw_gap(layout, &g, &x, signs, l);
    OrthantSolution { f: quad(a, &x), u: x, fw_gap: gap }
}

/// `min { s u^T A u : ||u_S||_1 = 1, ||u_{-S}||_1 <= L }`.
pub fn compat_constant(a: &SymMatrix, cone: &ConeSpec) -> Result<ConstantResult> {
    require_mode(cone, &[NormMode::L1OnS], "compat_constant")?;
    let lam_max = check_matrix(a, cone)?;
    let layout = Layout::new(a.dim(), &cone.support);
    let s = cone.s();
    // u and -u give the same value, so the first sign is fixed.
    let count = 1usize << (s - 1);
    if lam_max <= 0.0 {
        let mut u = vec![0.0; a.dim()];
        u[cone.support[0]] = 1.0;
        return Ok(ConstantResult {
            value: 0.0,
            minimizer: u,
            certificate: Certificate::OrthantExact,
            gap_estimate: 0.0,
            orthant_count: count,
        });
    }
    let sols: Vec<OrthantSolution> = (0..count)
        .into_par_iter()
        .map(|mask| {
            let signs: Vec<f64> = (0..s).map(|k| if k > 0 && (mask >> (k - 1)) & 1 == 1 { -1.0 } else { 1.0 }).collect();
            solve_orthant(a, &layout, &signs, cone.l, lam_max)
        })
        .collect();
    let best = sols.iter().enumerate().min_by(|(i, x), (j, y)| x.f.total_cmp(&y.f).then(i.cmp(j))).map(|(i, _)| i).unwrap();
    let lower = sols.iter().map(|o| o.f - o.fw_gap).fold(f64::INFINITY, f64::min);
    let sf = s as f64;
    let value = sf * sols[best].f;
    Ok(ConstantResult {
        value,
        minimizer: sols[best].u.clone(),
        certificate: Certificate::OrthantExact,
        gap_estimate: (value - sf * lower).max(0.0),
        orthant_count: count,
    })
}

/// `compat_constant(A, S, L = 1) > NSP_TOL`.
pub fn null_space_check(a: &SymMatrix, support: &[usize]) -> Result<bool> {
    Ok(compat_constant(a, &ConeSpec::compat(support.to_vec(), 1.0))?.value > NSP_TOL)
}

/// Projected descent with the standard sufficient-decrease backtracking.
/// `eval` returns value and gradient; `value` returns value only (may be
/// `+inf` outside the domain). Works with nonconvex `proj` as long as the
/// projection is exact.
pub(crate) fn projected_descent<E, V, P>(eval: E, value: V, proj: P, x0: Vec<f64>, step0: f64, cap: usize, tol: f64) -> (Vec<f64>, f64)
where
    E: Fn(&[f64]) -> (f64, Vec<f64>),
    V: Fn(&[f64]) -> f64,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let mut x = x0;
    let (mut fx, mut g) = eval(&x);
    let mut eta = step0;
    for _ in 0..cap {
        eta *= 2.0;
        let mut accepted = None;
        while eta > step0 * 1e-12 {
            let y = proj(&x.iter().zip(&g).map(|(xi, gi)| xi - eta * gi).collect::<Vec<_>>());
            let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let fy = value(&y);
            if fy.is_finite() && fy <= fx + dot(&g, &d) + dot(&d, &d) / (2.0 * eta) {
                accepted = Some((y, fy, norm2(&d)));
                break;
            }
            eta /= 2.0;
        }
        let Some((y, fy, dn)) = accepted else { break };
        let done = dn / eta <= tol || dn <= 1e-15 * (1.0 + norm2(&x));
        x = y;
        if fy < fx || !done {
            let (f2, g2) = eval(&x);
            fx = f2;
            g = g2;
        }
        if done {
            break;
        }
    }
    (x, fx)
}

fn random_l1_sphere(rng: &mut StreamRng, k: usize, radius: f64) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|x| if rng.random::<bool>() { *x } else { -*x } * radius / total).collect()
}

fn random_l1_ball(rng: &mut StreamRng, k: usize, radius: f64) -> Vec<f64> {
    if k == 0 {
        return Vec::new();
    }
    let r = radius * rng.random::<f64>().powf(1.0 / k as f64);
    random_l1_sphere(rng, k, r)
}

/// Ratio `u^T A u / D(u)` on `{||u_S||_1 = 1, ||u_{-S}||_1 <= L}`.
struct RatioProblem<'a> {
    a: &'a SymMatrix,
    layout: Layout,
    l: f64,
    full_norm: bool,
}

impl RatioProblem<'_> {
    fn denom(&self, u: &[f64]) -> f64 {
        if self.full_norm {
            dot(u, u)
        } else {
            self.layout.s_norm2_sq(u)
        }
    }

    fn value(&self, u: &[f64]) -> f64 {
        let d = self.denom(u);
        if d > 0.0 {
            quad(self.a, u) / d
        } else {
            f64::INFINITY
        }
    }

    fn eval(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let d = self.denom(u);
        let au = self.a.mul_vec(u);
        let r = dot(u, &au) / d;
        let mut g: Vec<f64> = au.iter().map(|v| 2.0 * v / d).collect();
        if self.full_norm {
            g.iter_mut().zip(u).for_each(|(gi, ui)| *gi -= 2.0 * r * ui / d);
        } else {
            for &j in &self.layout.s {
                g[j] -= 2.0 * r * u[j] / d;
            }
        }
        (r, g)
    }

    fn project(&self, v: &[f64]) -> Vec<f64> {
        let us = project_l1_sphere(&self.layout.gather(v, &self.layout.s), 1.0);
        let ur = project_l1_ball(&self.layout.gather(v, &self.layout.rest), self.l);
        self.layout.join(&us, &ur)
    }
}

/// Runs short descents from every start, polishes the best three and
/// returns `(minimizer, value, spread of the best three)`.
fn multistart<E, V, P>(starts: Vec<Vec<f64>>, eval: E, value: V, proj: P, step0: f64, p: usize, tol: f64) -> (Vec<f64>, f64, f64)
where
    E: Fn(&[f64]) -> (f64, Vec<f64>) + Sync,
    V: Fn(&[f64]) -> f64 + Sync,
    P: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let short = 200 + 10 * p;
    let full = 50 * p + 2000;
    let mut runs: Vec<(usize, Vec<f64>, f64)> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, x0)| {
            let (x, f) = projected_descent(&eval, &value, &proj, x0, step0, short, tol);
            (i, x, f)
        })
        .collect();
    runs.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
    runs.truncate(3);
    let mut polished: Vec<(usize, Vec<f64>, f64)> = runs
        .into_par_iter()
        .map(|(i, x0, f0)| {
            let (x, f) = projected_descent(&eval, &value, &proj, x0.clone(), step0, full, tol * 1e-2);
            if f <= f0 {
                (i, x, f)
            } else {
                (i, x0, f0)
            }
        })
        .collect();
    polished.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
    let spread = polished.last().unwrap().2 - polished[0].2;
    let (_, x, f) = polished.swap_remove(0);
    (x, f, spread.max(0.0))
}

fn unit(p: usize, j: usize) -> Vec<f64> {
    let mut u = vec![0.0; p];
    u[j] = 1.0;
    u
}

/// `min u^T A u` over `||u_S||_2 = 1` (or `||u||_2 = 1`) and `||u_{-S}||_1 <= L ||u_S||_1`.
pub fn restricted_eigenvalue(a: &SymMatrix, cone: &ConeSpec) -> Result<ConstantResult> {
    require_mode(cone, &[NormMode::L2OnUS, NormMode::L2OnU], "restricted_eigenvalue")?;
    let compat = compat_constant(a, &cone.with_mode(NormMode::L1OnS))?;
    re_from_compat(a, cone, cone.norm_mode == NormMode::L2OnU, &compat)
}

fn re_from_compat(a: &SymMatrix, cone: &ConeSpec, full_norm: bool, compat: &ConstantResult) -> Result<ConstantResult> {
    let lam_max = check_matrix(a, cone)?;
    let p = a.dim();
    let prob = RatioProblem { a, layout: Layout::new(p, &cone.support), l: cone.l, full_norm };
    if lam_max <= 0.0 {
        return Ok(ConstantResult {
            value: 0.0,
            minimizer: unit(p, cone.support[0]),
            certificate: Certificate::Iterative,
            gap_estimate: 0.0,
            orthant_count: 0,
        });
    }
    let mut starts = vec![compat.minimizer.clone()];
    starts.extend(cone.support.iter().map(|&j| unit(p, j)));
    let mut rng = keyed(SOLVER_SEED, Purpose::SolverStart, 0);
    while starts.len() < STARTS {
        let us = random_l1_sphere(&mut rng, cone.s(), 1.0);
        let ur = random_l1_ball(&mut rng, p - cone.s(), cone.l);
        starts.push(prob.layout.join(&us, &ur));
    }
    let step0 = 1.0 / (2.0 * lam_max * cone.s() as f64);
    let tol = 1e-9 * lam_max.max(1.0);
    let (x, f, spread) = multistart(starts, |u| prob.eval(u), |u| prob.value(u), |v| prob.project(v), step0, p, tol);
    let scale = norm2(&prob.layout.gather(&x, &prob.layout.s));
    let minimizer: Vec<f64> = if full_norm { x.iter().map(|v| v / norm2(&x)).collect() } else { x.iter().map(|v| v / scale).collect() };
    Ok(ConstantResult { value: f.max(0.0), minimizer, certificate: Certificate::Iterative, gap_estimate: spread, orthant_count: 0 })
}

/// `min u^T A u` over `||u_S||_2 = 1`, `||u_{-S}||_1 <= L sqrt(s)`.
pub fn adaptive_re(a: &SymMatrix, cone: &ConeSpec) -> Result<ConstantResult> {
    require_mode(cone, &[NormMode::Adaptive], "adaptive_re")?;
    let lam_max = check_matrix(a, cone)?;
    let p = a.dim();
    let layout = Layout::new(p, &cone.support);
    let budget = cone.l * (cone.s() as f64).sqrt();
    if lam_max <= 0.0 {
        return Ok(ConstantResult {
            value: 0.0,
            minimizer: unit(p, cone.support[0]),
            certificate: Certificate::Iterative,
            gap_estimate: 0.0,
            orthant_count: 0,
        });
    }
    let compat = compat_constant(a, &cone.with_mode(NormMode::L1OnS))?;
    let re = re_from_compat(a, &cone.with_mode(NormMode::L2OnUS), false, &compat)?;
    let project = |v: &[f64]| {
        let mut us = layout.gather(v, &layout.s);
        let n = norm2(&us);
        if n > 0.0 {
            us.iter_mut().for_each(|x| *x /= n);
        } else {
            us[0] = 1.0;
        }
        let ur = project_l1_ball(&layout.gather(v, &layout.rest), budget);
        layout.join(&us, &ur)
    };
    // Both seeds are feasible here, which keeps kappa_* <= kappa <= phi.
    let mut starts = vec![re.minimizer.clone(), project(&compat.minimizer)];
    starts.extend(cone.support.iter().map(|&j| unit(p, j)));
    let mut rng = keyed(SOLVER_SEED, Purpose::SolverStart, 1);
    while starts.len() < STARTS {
        let us: Vec<f64> = (0..cone.s()).map(|_| rng.random::<f64>() - 0.5).collect();
        let ur = random_l1_ball(&mut rng, p - cone.s(), budget);
        starts.push(project(&layout.join(&us, &ur)));
    }
    let eval = |u: &[f64]| {
        let au = a.mul_vec(u);
        (dot(u, &au), au.iter().map(|v| 2.0 * v).collect())
    };
    let value = |u: &[f64]| quad(a, u);
    let step0 = 1.0 / (2.0 * lam_max);
    let tol = 1e-9 * lam_max.max(1.0);
    let (x, f, spread) = multistart(starts, eval, value, project, step0, p, tol);
    let seeded = quad(a, &re.minimizer);
    let (x, _) = if seeded < f { (re.minimizer, seeded) } else { (x, f) };
    // Ratio form drops the rounding left by the sphere normalization.
    let us = layout.gather(&x, &layout.s);
    let f = quad(a, &x) / dot(&us, &us);
    Ok(ConstantResult { value: f.max(0.0), minimizer: x, certificate: Certificate::Iterative, gap_estimate: spread, orthant_count: 0 })
}

/// Eigenpair for the smallest eigenvalue by shifted power iteration.
pub(crate) fn min_eigenpair(b: &SymMatrix) -> (f64, Vec<f64>) {
    let p = b.dim();
    let e = extreme_eigenvalues(b);
    let shift = e.max;
    let mut best = (f64::INFINITY, vec![0.0; p]);
    for start in 0..2 {
        let mut v: Vec<f64> = (0..p).map(|i| if start == 0 { 1.0 } else { ((i as f64 + 1.0) * 0.618_033_988_75).fract() - 0.5 }).collect();
        let n = norm2(&v);
        v.iter_mut().for_each(|x| *x /= n);
        for _ in 0..(20 * p + 2000) {
            let bv = b.mul_vec(&v);
            let mut w: Vec<f64> = v.iter().zip(&bv).map(|(vi, bi)| shift * vi - bi).collect();
            let n = norm2(&w);
            if n == 0.0 {
                break;
            }
            w.iter_mut().for_each(|x| *x /= n);
            let diff = norm2(&w.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>());
            v = w;
            if diff < 1e-13 {
                break;
            }
        }
        let r = quad(b, &v);
        if r < best.0 {
            best = (r, v);
        }
    }
    best
}

/// Upper estimate of `inf { u^T A u : u^T Sigma0 u = 1, ||u||_1 <= M }`.
pub fn constrained_form_infimum(a: &SymMatrix, sigma0: &SymMatrix, m: f64) -> Result<ConstantResult> {
    let p = a.dim();
    if sigma0.dim() != p {
        return Err(Error::DimensionMismatch { expected: p, got: sigma0.dim() });
    }
    if !(m >= 1.0 && m.is_finite()) {
        return invalid(format!("l1 radius M must be at least 1, got {m}"));
    }
    let lc = cholesky(sigma0).into_result()?;
    let floor = 1.0 / (m * m);
    let ratio = |v: &[f64]| quad(a, v) / quad(sigma0, v);
    let feasible = |v: &[f64]| {
        let n1 = norm1(v);
        n1 > 0.0 && quad(sigma0, v) >= floor * n1 * n1
    };
    let to_u = |v: &[f64]| {
        let s = quad(sigma0, v).sqrt();
        v.iter().map(|x| x / s).collect::<Vec<f64>>()
    };

    // Generalized eigenvector: optimal whenever it satisfies the l1 budget.
    let mut b_rows = vec![vec![0.0; p]; p];
    for j in 0..p {
        let w = lc.solve_transposed(&unit(p, j));
        let col = lc.solve(&a.mul_vec(&w));
        for i in 0..p {
            b_rows[i][j] = col[i];
        }
    }
    let b = SymMatrix::from_rows(&b_rows)?;
    let (_, z) = min_eigenpair(&b);
    let v_eig = lc.solve_transposed(&z);
    if feasible(&v_eig) {
        let val = ratio(&v_eig);
        return Ok(ConstantResult {
            value: val.max(0.0),
            minimizer: to_u(&v_eig),
            certificate: Certificate::Iterative,
            gap_estimate: 0.0,
            orthant_count: 0,
        });
    }

    let mut candidates: Vec<Vec<f64>> = (0..p).map(|j| unit(p, j)).filter(|v| feasible(v)).collect();
    let n1 = norm1(&v_eig);
    let mut starts: Vec<Vec<f64>> = vec![v_eig.iter().map(|x| x / n1).collect()];
    starts.extend(candidates.iter().cloned());
    let mut rng = keyed(SOLVER_SEED, Purpose::SolverStart, 2);
    let mut tries = 0;
    while starts.len() < STARTS && tries < 100 * STARTS {
        tries += 1;
        let v = random_l1_sphere(&mut rng, p, 1.0);
        if quad(sigma0, &v) > floor {
            starts.push(v);
        }
    }
    let lam = extreme_eigenvalues(&b).max.abs().max(1e-300);
    let sig_max = extreme_eigenvalues(sigma0).max;
    let solved: Vec<Vec<f64>> = starts
        .into_par_iter()
        .map(|mut v| {
            if quad(sigma0, &v) <= floor {
                // Pull an infeasible start toward the best vertex direction.
                let mut best = 0;
                for j in 0..p {
                    if sigma0.get(j, j) > sigma0.get(best, best) {
                        best = j;
                    }
                }
                v = unit(p, best);
                if quad(sigma0, &v) <= floor {
                    return v;
                }
            }
            let mut tau = 1e-2;
            while tau >= 1e-10 {
                let eval = |v: &[f64]| {
                    let av = a.mul_vec(v);
                    let sv = sigma0.mul_vec(v);
                    let den = dot(v, &sv);
                    let r = dot(v, &av) / den;
                    let h = den - floor;
                    let g = av.iter().zip(&sv).map(|(ai, si)| 2.0 * (ai - r * si) / den - tau * 2.0 * si / h).collect();
                    (r - tau * h.ln(), g)
                };
                let value = |v: &[f64]| {
                    let den = quad(sigma0, v);
                    let h = den - floor;
                    if h <= 0.0 {
                        f64::INFINITY
                    } else {
                        quad(a, v) / den - tau * h.ln()
                    }
                };
                let step0 = floor.min(1.0) / (2.0 * lam * sig_max.max(1.0));
                let (x, _) = projected_descent(eval, value, |w| project_l1_sphere(w, 1.0), v, step0, 50 * p + 2000, 1e-12);
                v = x;
                tau *= 1e-2;
            }
            v
        })
        .collect();
    candidates.extend(solved);
    let (best, val) = candidates
        .iter()
        .filter(|v| feasible(v))
        .map(|v| (v, ratio(v)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .ok_or_else(|| Error::InvalidParameter("no feasible point found for the constrained form".into()))?;
    Ok(ConstantResult {
        value: val.max(0.0),
        minimizer: to_u(best),
        certificate: Certificate::Iterative,
        gap_estimate: 0.0,
        orthant_count: 0,
    })
}
