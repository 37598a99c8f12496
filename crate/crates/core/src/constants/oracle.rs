//! Brute-force reference minimizer for small `p`.
//!
//! Shares no solver code with the main routines. Small supports use a grid
//! over directions on `S` with an exact face-enumeration solve off the
//! support; everything else uses random feasible sampling and derivative-free
//! compass search, with feasibility enforced by rescaling.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{Certificate, ConeSpec, ConstantResult, Layout, NormMode};
use crate::error::{invalid, Error, Result};
use crate::matcore::{cholesky, norm1, norm2, quad, SymMatrix};
use crate::rng::{keyed, Purpose, StreamRng};

pub const MAX_ORACLE_DIM: usize = 8;
const ORACLE_SEED: u64 = 0x0_4AC1E;
const POLISHED: usize = 10;

#[derive(Clone, Copy, Debug)]
pub enum OracleTarget<'a> {
    Cone(&'a ConeSpec),
    /// `inf { u^T A u : u^T sigma0 u = 1, ||u||_1 <= m }`.
    ConstrainedForm {
        sigma0: &'a SymMatrix,
        m: f64,
    },
}

struct Objective<'a> {
    a: &'a SymMatrix,
    target: OracleTarget<'a>,
    layout: Layout,
}

impl Objective<'_> {
    /// Maps any point to a feasible one by rescaling blocks; `None` if that is impossible.
    fn feasible(&self, u: &[f64]) -> Option<Vec<f64>> {
        match self.target {
            OracleTarget::Cone(cone) => {
                let us: Vec<f64> = self.layout.gather(u, &self.layout.s);
                let ur: Vec<f64> = self.layout.gather(u, &self.layout.rest);
                let (ns, budget) = match cone.norm_mode {
                    NormMode::Adaptive => (norm2(&us), cone.l * (cone.s() as f64).sqrt()),
                    _ => (norm1(&us), cone.l),
                };
                if ns == 0.0 {
                    return None;
                }
                let us: Vec<f64> = us.iter().map(|x| x / ns).collect();
                let nr = norm1(&ur);
                let shrink = if nr > budget { budget / nr } else { 1.0 };
                let ur: Vec<f64> = ur.iter().map(|x| x * shrink).collect();
                Some(self.layout.join(&us, &ur))
            }
            OracleTarget::ConstrainedForm { sigma0, m } => {
                let d = quad(sigma0, u);
                let n1 = norm1(u);
                (d > 0.0 && n1 <= m * d.sqrt()).then(|| u.iter().map(|x| x / d.sqrt()).collect())
            }
        }
    }

    fn value_of_feasible(&self, w: &[f64]) -> f64 {
        let q = quad(self.a, w);
        match self.target {
            OracleTarget::Cone(cone) => match cone.norm_mode {
                NormMode::L1OnS => cone.s() as f64 * q,
                NormMode::L2OnUS => q / self.layout.s_norm2_sq(w),
                NormMode::L2OnU => q / w.iter().map(|x| x * x).sum::<f64>(),
                NormMode::Adaptive => q,
            },
            OracleTarget::ConstrainedForm { .. } => q,
        }
    }

    fn value(&self, u: &[f64]) -> f64 {
        self.feasible(u).map_or(f64::INFINITY, |w| self.value_of_feasible(&w))
    }

    fn random_point(&self, rng: &mut StreamRng) -> Vec<f64> {
        let p = self.layout.p;
        let gauss = |rng: &mut StreamRng| -> f64 { StandardNormal.sample(rng) };
        match self.target {
            OracleTarget::Cone(cone) => {
                let budget = match cone.norm_mode {
                    NormMode::Adaptive => cone.l * (cone.s() as f64).sqrt(),
                    _ => cone.l,
                };
                let us: Vec<f64> = (0..cone.s()).map(|_| gauss(rng)).collect();
                let k = self.layout.rest.len();
                let mut ur: Vec<f64> = if rng.random::<bool>() {
                    (0..k).map(|_| gauss(rng)).collect()
                } else {
                    // Sparse off-support part reaches the vertices of the l1 ball.
                    let mut v = vec![0.0; k];
                    if k > 0 {
                        v[rng.random_range(0..k)] = gauss(rng);
                    }
                    v
                };
                let nr = norm1(&ur);
                if nr > 0.0 {
                    let r = budget * rng.random::<f64>().sqrt() * if rng.random::<f64>() < 0.3 { 1.0 } else { rng.random::<f64>() };
                    ur.iter_mut().for_each(|x| *x *= r / nr);
                }
                let ns = match cone.norm_mode {
                    NormMode::Adaptive => norm2(&us),
                    _ => norm1(&us),
                };
                let us: Vec<f64> = us.iter().map(|x| x / ns).collect();
                self.layout.join(&us, &ur)
            }
            OracleTarget::ConstrainedForm { .. } => {
                let mut v: Vec<f64> = (0..p).map(|_| gauss(rng)).collect();
                if rng.random::<bool>() {
                    // Sparsify to explore near the l1 corners.
                    let keep = rng.random_range(1..=p);
                    for x in v.iter_mut().skip(keep) {
                        *x = 0.0;
                    }
                }
                v
            }
        }
    }

    fn stratified(&self) -> Vec<Vec<f64>> {
        let p = self.layout.p;
        let mut out = Vec::new();
        for i in 0..p {
            let mut e = vec![0.0; p];
            e[i] = 1.0;
            out.push(e);
            for j in (i + 1)..p {
                for sg in [1.0, -1.0] {
                    let mut e = vec![0.0; p];
                    e[i] = 1.0;
                    e[j] = sg;
                    out.push(e);
                }
            }
        }
        if let OracleTarget::Cone(cone) = self.target {
            let budget = match cone.norm_mode {
                NormMode::Adaptive => cone.l * (cone.s() as f64).sqrt(),
                _ => cone.l,
            };
            for &j in &self.layout.s {
                for &k in &self.layout.rest {
                    for sg in [1.0, -1.0] {
                        let mut e = vec![0.0; p];
                        e[j] = 1.0;
                        e[k] = sg * budget;
                        out.push(e);
                    }
                }
            }
        }
        out
    }

    /// Compass search over coordinate and pairwise directions.
    fn polish(&self, mut u: Vec<f64>) -> (Vec<f64>, f64) {
        let p = u.len();
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for i in 0..p {
            for sg in [1.0, -1.0] {
                let mut d = vec![0.0; p];
                d[i] = sg;
                dirs.push(d);
            }
            for j in (i + 1)..p {
                for (a, b) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    let mut d = vec![0.0; p];
                    d[i] = a;
                    d[j] = b;
                    dirs.push(d);
                }
            }
        }
        let mut f = self.value(&u);
        let mut step = 0.25 * norm2(&u).max(1e-3);
        let floor = 1e-11 * norm2(&u).max(1.0);
        let mut evals = 0usize;
        while step > floor && evals < 400_000 {
            let mut improved = false;
            for d in &dirs {
                let trial: Vec<f64> = u.iter().zip(d).map(|(x, di)| x + step * di).collect();
                let ft = self.value(&trial);
                evals += 1;
                if ft < f {
                    u = trial;
                    f = ft;
                    improved = true;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        (u, f)
    }
}

/// Exact minimizer of `c + 2 b^T w + w^T Q w` over `||w||_1 <= r` by
/// enumerating the faces of the l1 ball.
struct FaceTable {
    q: SymMatrix,
    /// `(support, signs, Q_TT^{-1} as rows, Q^{-1} sigma, sigma^T Q^{-1} sigma)`.
    faces: Vec<(Vec<usize>, Vec<f64>, Vec<Vec<f64>>, Vec<f64>, f64)>,
    interior: Option<Vec<Vec<f64>>>,
}

fn small_inverse(m: &SymMatrix) -> Option<Vec<Vec<f64>>> {
    let l = cholesky(m).factor()?;
    let k = m.dim();
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            l.solve_transposed(&l.solve(&e))
        })
        .collect();
    Some((0..k).map(|i| (0..k).map(|j| cols[j][i]).collect()).collect())
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

impl FaceTable {
    fn new(q: SymMatrix) -> Self {
        let k = q.dim();
        let mut faces = Vec::new();
        for mask in 1usize..(1 << k) {
            let t: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
            let sub = q.principal_submatrix(&t);
            let inv = if t.len() == 1 { None } else { small_inverse(&sub) };
            for smask in 0usize..(1 << t.len()) {
                let sig: Vec<f64> = (0..t.len()).map(|i| if smask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
                match &inv {
                    Some(inv) => {
                        let qs = mat_vec(inv, &sig);
                        let sqs: f64 = sig.iter().zip(&qs).map(|(a, b)| a * b).sum();
                        faces.push((t.clone(), sig, inv.clone(), qs, sqs));
                    }
                    None if t.len() == 1 => faces.push((t.clone(), sig, Vec::new(), Vec::new(), 0.0)),
                    None => {}
                }
            }
        }
        let interior = if k > 0 { small_inverse(&q) } else { None };
        Self { q, faces, interior }
    }

    /// Minimum of `2 b^T w + w^T Q w` over the ball and its minimizer.
    fn solve(&self, b: &[f64], r: f64) -> (f64, Vec<f64>) {
        let k = self.q.dim();
        let obj = |w: &[f64]| 2.0 * b.iter().zip(w).map(|(x, y)| x * y).sum::<f64>() + quad(&self.q, w);
        let mut best = (0.0, vec![0.0; k]);
        if k == 0 || r <= 0.0 {
            return best;
        }
        let mut consider = |w: Vec<f64>| {
            let f = obj(&w);
            if f < best.0 {
                best = (f, w);
            }
        };
        if let Some(inv) = &self.interior {
            let w: Vec<f64> = mat_vec(inv, b).iter().map(|x| -x).collect();
            if norm1(&w) <= r {
                consider(w);
            }
        }
        for (t, sig, inv, qs, sqs) in &self.faces {
            let mut w = vec![0.0; k];
            if t.len() == 1 {
                w[t[0]] = sig[0] * r;
                consider(w);
                continue;
            }
            let bt: Vec<f64> = t.iter().map(|&i| b[i]).collect();
            let qb = mat_vec(inv, &bt);
            let sqb: f64 = sig.iter().zip(&qb).map(|(a, b)| a * b).sum();
            let half_mu = -(r + sqb) / sqs;
            let wt: Vec<f64> = qb.iter().zip(qs).map(|(a, b)| -(a + half_mu * b)).collect();
            if wt.iter().zip(sig).all(|(x, s)| x * s >= 0.0) {
                for (&i, &x) in t.iter().zip(&wt) {
                    w[i] = x;
                }
                consider(w);
            }
        }
        best
    }
}

/// Grid over directions `d` of the unit l2 sphere on `S`, exact inner solve
/// over the off-support block, golden-section refinement in angle space.
struct SphereSearch<'a> {
    a: &'a SymMatrix,
    cone: &'a ConeSpec,
    layout: Layout,
    table: FaceTable,
}

impl SphereSearch<'_> {
    fn direction(&self, angles: &[f64]) -> Vec<f64> {
        match angles.len() {
            0 => vec![1.0],
            1 => vec![angles[0].cos(), angles[0].sin()],
            _ => vec![angles[0].cos(), angles[0].sin() * angles[1].cos(), angles[0].sin() * angles[1].sin()],
        }
    }

    fn eval(&self, angles: &[f64]) -> (f64, Vec<f64>) {
        let d = self.direction(angles);
        let s = d.len() as f64;
        let (us, r, factor) = match self.cone.norm_mode {
            NormMode::L1OnS => {
                let n1 = norm1(&d);
                (d.iter().map(|x| x / n1).collect::<Vec<_>>(), self.cone.l, s)
            }
            NormMode::Adaptive => (d.clone(), self.cone.l * s.sqrt(), 1.0),
            _ => {
                let n1 = norm1(&d);
                (d.clone(), self.cone.l * n1, 1.0)
            }
        };
        let full_s = self.layout.join(&us, &vec![0.0; self.layout.rest.len()]);
        let au = self.a.mul_vec(&full_s);
        let b: Vec<f64> = self.layout.rest.iter().map(|&j| au[j]).collect();
        let (inner, w) = self.table.solve(&b, r);
        let u = self.layout.join(&us, &w);
        (factor * (quad(self.a, &full_s) + inner), u)
    }

    fn run(&self, grid: usize) -> (f64, Vec<f64>) {
        let s = self.cone.s();
        let pi = std::f64::consts::PI;
        if s == 1 {
            return self.eval(&[]);
        }
        let mut pts: Vec<(f64, Vec<f64>)> = Vec::new();
        if s == 2 {
            for i in 0..grid {
                let th = pi * i as f64 / grid as f64;
                pts.push((self.eval(&[th]).0, vec![th]));
            }
        } else {
            let g = (grid as f64).sqrt().ceil() as usize;
            for i in 0..=g {
                for j in 0..(2 * g) {
                    let a = vec![pi * i as f64 / g as f64, pi * j as f64 / g as f64];
                    pts.push((self.eval(&a).0, a));
                }
            }
        }
        pts.sort_by(|x, y| x.0.total_cmp(&y.0));
        let h = pi / grid as f64 * if s == 2 { 1.0 } else { (grid as f64).sqrt() };
        let mut best = self.eval(&pts[0].1);
        for (_, a0) in pts.iter().take(6) {
            let mut a = a0.clone();
            let mut width = h;
            // Coordinate-wise golden section, shrinking the bracket each round.
            let rounds = if a.len() == 1 { 1 } else { 12 };
            for _ in 0..rounds {
                for c in 0..a.len() {
                    let (mut lo, mut hi) = (a[c] - width, a[c] + width);
                    let gr = 0.5 * (5f64.sqrt() - 1.0);
                    let at = |x: f64, a: &Vec<f64>| {
                        let mut b = a.clone();
                        b[c] = x;
                        self.eval(&b).0
                    };
                    for _ in 0..60 {
                        let x1 = hi - gr * (hi - lo);
                        let x2 = lo + gr * (hi - lo);
                        if at(x1, &a) <= at(x2, &a) {
                            hi = x2;
                        } else {
                            lo = x1;
                        }
                    }
                    let mid = 0.5 * (lo + hi);
                    if at(mid, &a) <= at(a[c], &a) {
                        a[c] = mid;
                    }
                }
                width *= 0.5;
                if width < 1e-12 {
                    break;
                }
            }
            let cand = self.eval(&a);
            if cand.0 < best.0 {
                best = cand;
            }
        }
        best
    }
}

/// Reference minimum for small problems.
///
/// Cones with `|S| <= 3` (except the `l2_on_u` mode) are solved by a grid
/// over directions on `S` with an exact face-enumeration solve for the
/// off-support block. Other targets use `budget` random feasible points and
/// compass-search polish.
pub fn oracle_minimum(a: &SymMatrix, target: OracleTarget<'_>, budget: usize) -> Result<ConstantResult> {
    let p = a.dim();
    if p > MAX_ORACLE_DIM {
        return Err(Error::CapExceeded { what: format!("oracle dimension {p}"), cap: MAX_ORACLE_DIM });
    }
    let layout = match target {
        OracleTarget::Cone(cone) => {
            cone.validate(p)?;
            Layout::new(p, &cone.support)
        }
        OracleTarget::ConstrainedForm { sigma0, m } => {
            if sigma0.dim() != p {
                return Err(Error::DimensionMismatch { expected: p, got: sigma0.dim() });
            }
            if !(m >= 1.0) {
                return invalid("l1 radius M must be at least 1");
            }
            Layout::new(p, &[])
        }
    };
    if let OracleTarget::Cone(cone) = target {
        if cone.s() <= 3 && cone.norm_mode != NormMode::L2OnU {
            let table = FaceTable::new(a.principal_submatrix(&layout.rest));
            let search = SphereSearch { a, cone, layout, table };
            let (f, u) = search.run(budget.clamp(64, 4096));
            return Ok(ConstantResult {
                value: f.max(0.0),
                minimizer: u,
                certificate: Certificate::Oracle,
                gap_estimate: 0.0,
                orthant_count: 0,
            });
        }
    }
    let obj = Objective { a, target, layout };
    let mut rng = keyed(ORACLE_SEED, Purpose::Oracle, p as u64);
    let mut pool: Vec<(f64, Vec<f64>)> = obj.stratified().into_iter().map(|u| (obj.value(&u), u)).collect();
    for _ in 0..budget {
        let u = obj.random_point(&mut rng);
        pool.push((obj.value(&u), u));
    }
    pool.retain(|(f, _)| f.is_finite());
    if pool.is_empty() {
        return invalid("oracle found no feasible point");
    }
    pool.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut seeds: Vec<Vec<f64>> = Vec::new();
    for (_, u) in &pool {
        let w = obj.feasible(u).unwrap();
        let distinct = seeds.iter().all(|s| {
            let ws = obj.feasible(s).unwrap();
            let d: f64 = ws.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
            let d_neg: f64 = ws.iter().zip(&w).map(|(a, b)| (a + b).abs()).sum();
            d.min(d_neg) > 1e-3
        });
        if distinct {
            seeds.push(u.clone());
        }
        if seeds.len() == POLISHED {
            break;
        }
    }
    let results: Vec<(Vec<f64>, f64)> = seeds.into_par_iter().map(|u| obj.polish(u)).collect();
    let (u, f) = results.into_iter().min_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
    Ok(ConstantResult {
        value: f.max(0.0),
        minimizer: obj.feasible(&u).unwrap(),
        certificate: Certificate::Oracle,
        gap_estimate: 0.0,
        orthant_count: 0,
    })
}
