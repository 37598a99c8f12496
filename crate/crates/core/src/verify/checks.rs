//! The individual Monte Carlo checks. Each one precomputes its population
//! quantities once, then produces a metric map per trial and folds the
//! trial records into rules.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::lasso::{oracle_inequality_check, problem_compat, InequalityStatus, LassoProblem};
use super::{CheckReport, ExperimentConfig, LassoOptions, RuleKind, RuleOutcome, TransferOptions, TrialRecord, VIOLATION_SLACK};
use crate::bounds::{
    delta_n, ew_moment_bound, find_m_sq, fourth_moment_bound, l_of_delta, lower_margin, normalized_floor, sigma_tail_gauss,
    sigma_tail_moments, transfer_conclusion_holds, transfer_floor_coefficient, transfer_hypothesis, transfer_lower_margin,
    uniform_deviation_terms, upper_margin, Flagged, HypothesisOutcome,
};
use crate::constants::{
    adaptive_re, compat_constant, constrained_form_infimum, oracle_minimum, restricted_eigenvalue, ConeSpec, OracleTarget, MAX_ORACLE_DIM,
};
use crate::ensembles::{population_covariance, rademacher_average, sample, EnsembleSpec, Innovation, Variant};
use crate::error::{invalid, Result};
use crate::matcore::{cholesky, dot, extreme_eigenvalues, norm1, project_l1_sphere, quad, LowerTriangular, SymMatrix};
use crate::rng::{derive, keyed, Purpose, StreamRng};

pub const CHECKS: &[&str] =
    &["lower_bound", "sandwich", "transfer", "normalized_floor", "sigma_tails", "moment_bounds", "uniform_deviation", "lasso"];

/// Largest `p` for the constrained-form check (oracle certificates stay cheap).
pub const LOWER_BOUND_MAX_P: usize = 6;
const ORACLE_BUDGET: usize = 4000;

pub(super) trait Check: Sync {
    fn trial(&self, index: usize, seed: u64) -> Result<BTreeMap<String, f64>>;
    fn summarize(&self, records: &[TrialRecord]) -> CheckReport;
}

pub(super) fn prepare(name: &str, config: &ExperimentConfig) -> Result<Box<dyn Check>> {
    Ok(match name {
        "lower_bound" => Box::new(LowerBound::new(config)?),
        "sandwich" => Box::new(Sandwich::new(config)?),
        "transfer" => Box::new(Transfer::new(config)?),
        "normalized_floor" => Box::new(Normalized::new(config)?),
        "sigma_tails" => Box::new(SigmaTails::new(config)?),
        "moment_bounds" => Box::new(Moments::new(config)?),
        "uniform_deviation" => Box::new(Deviation::new(config)?),
        "lasso" => Box::new(Lasso::new(config)?),
        other => return Err(crate::error::Error::UnknownCheck(other.to_string())),
    })
}

fn flag(v: bool) -> f64 {
    if v {
        1.0
    } else {
        0.0
    }
}

fn count(records: &[TrialRecord], key: &str) -> usize {
    records.iter().filter(|r| r.flag(key)).count()
}

fn column(records: &[TrialRecord], key: &str) -> Vec<f64> {
    records.iter().map(|r| r.metric(key)).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Mean and its standard error.
fn mean_se(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn report(
    check: &str,
    records: &[TrialRecord],
    rules: Vec<RuleOutcome>,
    diagnostics: BTreeMap<String, f64>,
    notes: Vec<String>,
) -> CheckReport {
    CheckReport { check: check.to_string(), trials: records.len(), rules, diagnostics, notes, passed: false }
}

/// Strict decrease of the medians along the grid.
fn trend_rule(rule: &str, medians: &[(usize, f64)]) -> RuleOutcome {
    let bad = medians.windows(2).filter(|w| !(w[1].1 < w[0].1)).count();
    let listing: Vec<String> = medians.iter().map(|(n, m)| format!("n={n}: {m}")).collect();
    RuleOutcome {
        rule: rule.into(),
        kind: RuleKind::Trend,
        observed: bad as f64,
        target: 0.0,
        threshold: 0.0,
        count: bad,
        total: medians.len().saturating_sub(1),
        passed: bad == 0,
        note: Some(listing.join(", ")),
    }
}

fn grid_medians(records: &[TrialRecord], grid: &[usize], prefix: &str) -> Vec<(usize, f64)> {
    grid.iter().map(|&n| (n, median(column(records, &format!("{prefix}{n}"))))).collect()
}

fn unit_diagonal(sigma0: &SymMatrix) -> bool {
    sigma0.diagonal().iter().all(|d| (d - 1.0).abs() <= 1e-12)
}

/// `L^{-1} A L^{-T}` for `Sigma0 = L L^T`.
fn whiten(a: &SymMatrix, lc: &LowerTriangular) -> Result<SymMatrix> {
    let p = a.dim();
    let mut cols = vec![vec![0.0; p]; p];
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        let w = lc.solve_transposed(&e);
        cols[j] = lc.solve(&a.mul_vec(&w));
    }
    let mut rows = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            rows[i][j] = 0.5 * (cols[j][i] + cols[i][j]);
        }
    }
    SymMatrix::from_rows(&rows)
}

/// Smallest `c0 >= start` (step 1/2, at most 64) meeting the fourth-moment
/// precondition at radius `radius`.
fn admissible_c0(start: f64, sigma_x: f64, k_x: f64, radius: f64, p: f64) -> Option<f64> {
    let mut c0 = start.max(1.0);
    while c0 <= 64.0 {
        if fourth_moment_bound(c0, sigma_x, k_x, radius, p).1 {
            return Some(c0);
        }
        c0 += 0.5;
    }
    None
}

// ---------------------------------------------------------------------------

struct LowerBound {
    spec: EnsembleSpec,
    n: usize,
    sigma0: SymMatrix,
    chol: LowerTriangular,
    radius: f64,
    margin: f64,
    target: f64,
}

impl LowerBound {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let p = cfg.ensemble.p;
        if p > LOWER_BOUND_MAX_P {
            return invalid(format!("lower_bound needs p <= {LOWER_BOUND_MAX_P} for oracle certificates, got {p}"));
        }
        let (bp, _) = cfg.effective_params()?;
        let sigma0 = population_covariance(&cfg.ensemble)?;
        let chol = cholesky(&sigma0).into_result()?;
        let margin = lower_margin(bp.m, bp.c_m, bp.radius, bp.delta_n_value(), bp.t, bp.n)?;
        Ok(Self { spec: cfg.ensemble.clone(), n: cfg.n, sigma0, chol, radius: bp.radius, margin, target: (-bp.t).exp() })
    }
}

impl Check for LowerBound {
    fn trial(&self, _index: usize, seed: u64) -> Result<BTreeMap<String, f64>> {
        let x = sample(&self.spec, self.n, seed)?;
        let bound = 1.0 - self.margin;
        // The generalized eigenvalue relaxes the l1 constraint: a certified floor.
        let lower = extreme_eigenvalues(&whiten(&x.gram, &self.chol)?).min;
        let mut upper = constrained_form_infimum(&x.gram, &self.sigma0, self.radius)?.value;
        let certified = lower >= bound - VIOLATION_SLACK;
        if !certified && x.p <= MAX_ORACLE_DIM {
            let o = oracle_minimum(&x.gram, OracleTarget::ConstrainedForm { sigma0: &self.sigma0, m: self.radius }, ORACLE_BUDGET)?;
            upper = upper.min(o.value);
        }
        let violation = upper < bound - VIOLATION_SLACK;
        Ok(BTreeMap::from([
            ("bound".into(), bound),
            ("inf_lower".into(), lower),
            ("inf_upper".into(), upper),
            ("violation".into(), flag(violation)),
            ("uncertified".into(), flag(!certified && !violation)),
        ]))
    }

    fn summarize(&self, records: &[TrialRecord]) -> CheckReport {
        let r = records.len();
        let mut rules = vec![RuleOutcome::rate("violation", count(records, "violation"), r, self.target)];
        let unc = count(records, "uncertified");
        rules.push(RuleOutcome::info("uncertified", unc as f64, "trials whose floor and upper estimate straddle the bound"));
        let mut notes = Vec::new();
        if self.margin > 1.0 {
            notes.push("margin exceeds one: the lower bound is negative and cannot be violated".into());
        }
        let diagnostics = BTreeMap::from([
            ("margin".into(), self.margin),
            ("bound".into(), 1.0 - self.margin),
            ("target".into(), self.target),
            ("median_inf_upper".into(), median(column(records, "inf_upper"))),
            ("min_inf_lower".into(), column(records, "inf_lower").into_iter().fold(f64::INFINITY, f64::min)),
        ]);
        report("lower_bound", records, rules, diagnostics, notes)
    }
}

// ---------------------------------------------------------------------------

struct Sandwich {
    spec: EnsembleSpec,
    n: usize,
    grid: Vec<usize>,
    compat: ConeSpec,
    re: ConeSpec,
    phi0: f64,
    kappa0: f64,
    dl_phi: f64,
    dl_kappa: f64,
    du: Option<f64>,
    c0_used: f64,
    t: f64,
}

impl Sandwich {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let s = cfg.cone.s();
        if s > 4 {
            return invalid(format!("sandwich needs |S| <= 4, got {s}"));
        }
        let (bp, _) = cfg.effective_params()?;
        let sigma0 = population_covariance(&cfg.ensemble)?;
        let compat = ConeSpec::compat(cfg.cone.support.clone(), cfg.cone.l);
        let re = ConeSpec::re(cfg.cone.support.clone(), cfg.cone.l);
        let phi0 = compat_constant(&sigma0, &compat)?.value;
        let kappa0 = restricted_eigenvalue(&sigma0, &re)?.value;
        if !(kappa0 > 0.0) {
            return invalid("population restricted eigenvalue is zero; the ratios are undefined");
        }
        let dn = bp.delta_n_value();
        let lead = (bp.l + 1.0) * (s as f64).sqrt();
        let dl_phi = lower_margin(bp.m, bp.c_m, lead / phi0.sqrt(), dn, bp.t, bp.n)?;
        let dl_kappa = lower_margin(bp.m, bp.c_m, lead / kappa0.sqrt(), dn, bp.t, bp.n)?;
        // For m <= 4 the upper side needs c1 (L+1) sqrt(s) log(2p) <= p^{c0/2}.
        let (c1, c0_used) = match bp.c1 {
            Some(c1) => (Some(c1), bp.c0_poly),
            None if bp.m <= 4.0 => match admissible_c0(bp.c0_poly, bp.sigma_x, bp.k_x, lead, bp.p) {
                Some(c0) => (Some(crate::bounds::fourth_moment_c1(c0, bp.sigma_x, bp.k_x)), c0),
                None => (None, f64::NAN),
            },
            None => (Some(bp.upper_c1()), bp.c0_poly),
        };
        let du = match c1 {
            Some(c1) => Some(upper_margin(bp.m, bp.c_m, c1, bp.l, s as f64, bp.p, bp.t, bp.n)?.value),
            None => None,
        };
        Ok(Self {
            spec: cfg.ensemble.clone(),
            n: cfg.n,
            grid: cfg.options.n_grid.clone(),
            compat,
            re,
            phi0,
            kappa0,
            dl_phi,
            dl_kappa,
            du,
            c0_used,
            t: bp.t,
        })
    }
}

impl Check for Sandwich {
    fn trial(&self, _index: usize, seed: u64) -> Result<BTreeMap<String, f64>> {
        let x = sample(&self.spec, self.n, seed)?;
        let phi = compat_constant(&x.gram, &self.compat)?.value;
        let kappa = restricted_eigenvalue(&x.gram, &self.re)?.value;
        let rp = phi / self.phi0;
        let rk = kappa / self.kappa0;
        let lower = rp < 1.0 - self.dl_phi - VIOLATION_SLACK || rk < 1.0 - self.dl_kappa - VIOLATION_SLACK;
        let upper = self.du.is_some_and(|du| rp > 1.0 + du + VIOLATION_SLACK || rk > 1.0 + du + VIOLATION_SLACK);
        let mut out = BTreeMap::from([
            ("phi_hat_sq".into(), phi),
            ("kappa_hat_sq".into(), kappa),
            ("ratio_phi".into(), rp),
            ("ratio_kappa".into(), rk),
            ("lower_violation".into(), flag(lower)),
            ("two_sided_violation".into(), flag(lower || upper)),
            ("ordering_violation".into(), flag(kappa > phi * (1.0 + 1e-12) + 1e-12)),
        ]);
        for (k, &nk) in self.grid.iter().enumerate() {
            let xk = sample(&self.spec, nk, derive(seed, &[k as u64 + 1]))?;
            let pk = compat_constant(&xk.gram, &self.compat)?.value;
            out.insert(format!("abs_dev_n{nk}"), (pk / self.phi0 - 1.0).abs());
        }
        Ok(out)
    }

    fn summarize(&self, records: &[TrialRecord]) -> CheckReport {
        let r = records.len();
        let e = (-self.t).exp();
        let mut rules = vec![RuleOutcome::rate("lower_violation", count(records, "lower_violation"), r, e)];
        let two = RuleOutcome::rate("two_sided_violation", count(records, "two_sided_violation"), r, e + 1.0 / self.t);
        rules.push(if self.du.is_some() {
            two
        } else {
            RuleOutcome::info(
                "two_sided_violation",
                two.observed,
                "no c0 in [1, 64] meets the fourth-moment condition; upper side not asserted",
            )
        });
        rules.push(RuleOutcome::zero("ordering_violation", count(records, "ordering_violation"), r));
        if self.grid.len() >= 2 {
            rules.push(trend_rule("median_abs_dev_decreasing", &grid_medians(records, &self.grid, "abs_dev_n")));
        }
        let mut diagnostics = BTreeMap::from([
            ("phi0_sq".into(), self.phi0),
            ("kappa0_sq".into(), self.kappa0),
            ("lower_margin_phi".into(), self.dl_phi),
            ("lower_margin_kappa".into(), self.dl_kappa),
            ("median_ratio_phi".into(), median(column(records, "ratio_phi"))),
            ("median_ratio_kappa".into(), median(column(records, "ratio_kappa"))),
        ]);
        if let Some(du) = self.du {
            diagnostics.insert("upper_margin".into(), du);
            diagnostics.insert("c0_used".into(), self.c0_used);
        }
        report("sandwich", records, rules, diagnostics, Vec::new())
    }
}

// ---------------------------------------------------------------------------

struct Transfer {
    opts: TransferOptions,
    delta: f64,
}

impl Transfer {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let o = cfg.options.transfer.clone();
        if o.d.is_empty() || o.d.iter().any(|&d| d < 2) {
            return invalid("transfer needs a nonempty list of d >= 2");
        }
        if o.p_min > o.p_max || o.d.iter().any(|&d| d > o.p_min) {
            return invalid("transfer needs max(d) <= p_min <= p_max");
        }
        if o.probes == 0 {
            return invalid("transfer needs at least one probe");
        }
        let delta = cfg.bound_params.delta;
        if !(delta > 0.0 && delta < 1.0) {
            return invalid(format!("transfer needs 0 < Delta < 1, got {delta}"));
        }
        Ok(Self { opts: o, delta })
    }

    /// Largest `alpha in [0, 1]` (by bisection) whose matrix passes the
    /// hypothesis; `build(0)` must pass.
    fn admissible(build: impl Fn(f64) -> SymMatrix, d: usize, seed: u64) -> Result<(SymMatrix, f64, HypothesisOutcome)> {
        let full = build(1.0);
        let h = transfer_hypothesis(&full, d, seed)?;
        if h.holds {
            return Ok((full, 1.0, h));
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if transfer_hypothesis(&build(mid), d, seed)?.holds {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let a = build(lo);
        let h = transfer_hypothesis(&a, d, seed)?;
        Ok((a, lo, h))
    }

    fn family(&self, kind: usize, p: usize, d: usize, rng: &mut StreamRng, seed: u64) -> Result<(SymMatrix, f64, HypothesisOutcome)> {
        match kind {
            // Sigma_hat - (1 - Delta) I from an n < p Gaussian sample; alpha
            // moves Delta toward one, where the matrix is PSD.
            0 => {
                let n = rng.random_range((p / 2).max(2)..p);
                let x = sample(&EnsembleSpec::gaussian(p), n, derive(seed, &[7]))?;
                let delta = self.delta;
                let id = SymMatrix::identity(p);
                Self::admissible(|a| x.gram.sub_scaled(&id, 1.0 - (delta + (1.0 - a) * (1.0 - delta))).expect("same dim"), d, seed)
            }
            // Scaled equicorrelation with negative correlation, at or inside
            // the largest value the hypothesis allows.
            1 => {
                let rho = rng.random_range(0.5..1.2f64).min(1.0) / (d as f64 - 1.0);
                let scale: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..2.0)).collect();
                let base = SymMatrix::equicorrelated(p, -rho).scale_rows_cols(&scale);
                let h = transfer_hypothesis(&base, d, seed)?;
                Ok((base, 1.0, h))
            }
            // Random symmetric with off-diagonal shrinkage.
            2 => {
                let diag: Vec<f64> = (0..p).map(|_| rng.random_range(0.2..2.0)).collect();
                let mut off = vec![vec![0.0; p]; p];
                for i in 0..p {
                    for j in (i + 1)..p {
                        let z: f64 = StandardNormal.sample(rng);
                        off[i][j] = z;
                        off[j][i] = z;
                    }
                }
                Self::admissible(
                    |a| {
                        let rows: Vec<Vec<f64>> =
                            (0..p).map(|i| (0..p).map(|j| if i == j { diag[i] } else { a * off[i][j] }).collect()).collect();
                        SymMatrix::from_rows(&rows).expect("square")
                    },
                    d,
                    seed,
                )
            }
            // Low-rank PSD.
            _ => {
                let k = rng.random_range(1..=p);
                let g: Vec<f64> = (0..p * k).map(|_| StandardNormal.sample(rng)).collect();
                let rows: Vec<Vec<f64>> =
                    (0..p).map(|i| (0..p).map(|j| (0..k).map(|l| g[i * k + l] * g[j * k + l]).sum::<f64>() / k as f64).collect()).collect();
                let a = SymMatrix::from_rows(&rows)?;
                let h = transfer_hypothesis(&a, d, seed)?;
                Ok((a, 1.0, h))
            }
        }
    }

    fn probes(&self, a: &SymMatrix, rng: &mut StreamRng) -> Vec<Vec<f64>> {
        let p = a.dim();
        let total = self.opts.probes;
        let mut out = Vec::with_capacity(total);
        let polished = (total / 10).max(1);
        for k in 0..total {
            let mut u: Vec<f64> = match k % 4 {
                0 => (0..p).map(|_| StandardNormal.sample(rng)).collect(),
                1 => {
                    let support = rng.random_range(1..=p);
                    let mut u = vec![0.0; p];
                    for _ in 0..support {
                        u[rng.random_range(0..p)] = StandardNormal.sample(rng);
                    }
                    u
                }
                2 => (0..p).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect(),
                _ => (0..p).map(|_| rng.random_range(-1.0..1.0f64).powi(3)).collect(),
            };
            if norm1(&u) == 0.0 {
                u[0] = 1.0;
            }
            if k < polished {
                u = descend_l1_sphere(a, u);
            }
            out.push(u);
        }
        out
    }
}

/// Local descent of `u^T A u` on the unit l1 sphere; pushes probes toward
/// the directions where the floor is tightest.
fn descend_l1_sphere(a: &SymMatrix, u: Vec<f64>) -> Vec<f64> {
    let n1 = norm1(&u);
    let mut v: Vec<f64> = u.iter().map(|x| x / n1).collect();
    let step = 0.25 / a.max_abs().max(1e-12) / a.dim() as f64;
    let mut best = (quad(a, &v), v.clone());
    for _ in 0..200 {
        let g = a.mul_vec(&v);
        let w: Vec<f64> = v.iter().zip(&g).map(|(x, gi)| x - 2.0 * step * gi).collect();
        v = project_l1_sphere(&w, 1.0);
        let f = quad(a, &v);
        if f < best.0 {
            best = (f, v.clone());
        }
    }
    best.1
}

impl Check for Transfer {
    fn trial(&self, index: usize, seed: u64) -> Result<BTreeMap<String, f64>> {
        let mut rng = keyed(seed, Purpose::Trial, 0);
        let nd = self.opts.d.len();
        let d = self.opts.d[index % nd];
        let kind = (index / nd) % 4;
        let p = rng.random_range(self.opts.p_min..=self.opts.p_max);
        let (a, alpha, h) = self.family(kind, p, d, &mut rng, seed)?;
        let coef = transfer_floor_coefficient(&a, d)?;
        let mut violations = 0usize;
        let mut min_slack = f64::INFINITY;
        for u in self.probes(&a, &mut rng) {
            if !transfer_conclusion_holds(&a, d, &u)? {
                violations += 1;
            }
            let l1sq = norm1(&u).powi(2);
            min_slack = min_slack.min(quad(&a, &u) / l1sq - coef);
        }
        let verified = h.holds && h.exhaustive;
        Ok(BTreeMap::from([
            ("p".into(), p as f64),
            ("d".into(), d as f64),
            ("family".into(), kind as f64),
            ("alpha".into(), alpha),
            ("hypothesis_holds".into(), flag(h.holds)),
            ("exhaustive".into(), flag(h.exhaustive)),
            ("verified".into(), flag(verified)),
            ("submatrices".into(), h.submatrices_checked as f64),
            ("violations".into(), violations as f64),
            ("verified_violations".into(), if verified { violations as f64 } else { 0.0 }),
            ("min_slack".into(), min_slack),
            ("min_eig".into(), extreme_eigenvalues(&a).min),
        ]))
    }

    fn summarize(&self, records: &[TrialRecord]) -> CheckReport {
        let verified = count(records, "verified");
        let probes = verified * self.opts.probes;
        let viol: f64 = column(records, "verified_violations").iter().sum();
        let rules = vec![
            RuleOutcome::zero("floor_violations", viol as usize, probes),
            RuleOutcome::info("verified_matrices", verified as f64, "matrices whose hypothesis was checked on every d x d submatrix"),
        ];
        let indefinite = records.iter().filter(|r| r.flag("verified") && r.metric("min_eig") < -1e-9).count();
        let diagnostics = BTreeMap::from([
            ("verified_matrices".into(), verified as f64),
            ("indefinite_verified".into(), indefinite as f64),
            ("min_slack".into(), column(records, "min_slack").into_iter().fold(f64::INFINITY, f64::min)),
        ]);
        report("transfer", records, rules, diagnostics, Vec::new())
    }
}

// ---------------------------------------------------------------------------

struct Normalized {
    spec: EnsembleSpec,
    n: usize,
    support: Vec<usize>,
    l: f64,
    eps: f64,
    t: f64,
    m_sq: Option<usize>,
    l_delta: f64,
    population: [f64; 3],
    floors: Option<[f64; 3]>,
    smallest_margin: f64,
}

impl Normalized {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let s = cfg.cone.s();
        let p = cfg.ensemble.p;
        if s > 4 || p > 60 {
            return invalid(format!("normalized_floor needs |S| <= 4 and p <= 60, got {s} and {p}"));
        }
        let sigma0 = population_covariance(&cfg.ensemble)?;
        if !unit_diagonal(&sigma0) {
            return invalid("normalized_floor needs a population covariance with unit diagonal");
        }
        let (bp, _) = cfg.effective_params()?;
        let sup = cfg.cone.support.clone();
        let l_delta = l_of_delta(bp.l, bp.delta, bp.eps)?;
        let kstar = adaptive_re(&sigma0, &ConeSpec::adaptive(sup.clone(), l_delta))?.value;
        let phi0 = compat_constant(&sigma0, &ConeSpec::compat(sup.clone(), l_delta))?.value;
        let kappa0 = restricted_eigenvalue(&sigma0, &ConeSpec::re(sup.clone(), l_delta))?.value;
        let m_sq = find_m_sq(bp.m, bp.c_m, bp.t, bp.n, p, bp.delta)?;
        let floors = match m_sq {
            Some(msq) => {
                let f = |k: f64| normalized_floor(k, bp.eps, bp.l, s as f64, msq as f64);
                Some([f(kstar)?, f(phi0)?, f(kappa0)?])
            }
            None => None,
        };
        let smallest_margin = transfer_lower_margin(bp.m, bp.c_m, 2f64.sqrt(), bp.t, bp.n, p as f64)?;
        Ok(Self {
            spec: cfg.ensemble.clone(),
            n: cfg.n,
            support: sup,
            l: bp.l,
            eps: bp.eps,
            t: bp.t,
            m_sq,
            l_delta,
            population: [kstar, phi0, kappa0],
            floors,
            smallest_margin,
        })
    }
}

impl Check for Normalized {
    fn trial(&self, _index: usize, seed: u64) -> Result<BTreeMap<String, f64>> {
        let x = sample(&self.spec, self.n, seed)?;
        let r = &x.gram_normalized;
        let phi = compat_constant(r, &ConeSpec::compat(self.support.clone(), self.l))?.value;
        let kappa = restricted_eigenvalue(r, &ConeSpec::re(self.support.clone(), self.l))?.value;
        let on_s: Vec<f64> = self.support.iter().map(|&j| x.sigma_hat_sq[j]).collect();
        let b_s = on_s.iter().all(|&v| v <= 1.0 + self.eps);
        let c_s = on_s.iter().sum::<f64>() / on_s.len() as f64 <= 1.0 + self.eps;
        let (v0, v1, v2) = match self.floors {
            Some([f0, f1, f2]) => (phi < f0 - VIOLATION_SLACK, phi < f1 - VIOLATION_SLACK, kappa < f2 - VIOLATION_SLACK),
            None => (false, false, false),
        };
        Ok(BTreeMap::from([
            ("phi_tilde_sq".into(), phi),
            ("kappa_tilde_sq".into(), kappa),
            ("event_b".into(), flag(b_s)),
            ("event_c".into(), flag(c_s)),
            ("violation_kappa_star".into(), flag(v0)),
            ("violation_phi0".into(), flag(v1)),
            ("violation_kappa0".into(), flag(v2)),
            ("ordering_violation".into(), flag(kappa > phi * (1.0 + 1e-12) + 1e-12)),
        ]))
    }

    fn summarize(&self, records: &[TrialRecord]) -> CheckReport {
        let r = records.len();
        let e = (-self.t).exp();
        let pc = (r - count(records, "event_c")) as f64 / r as f64;
        let pb = (r - count(records, "event_b")) as f64 / r as f64;
        let mut rules = vec![
            RuleOutcome::rate("floor_kappa_star", count(records, "violation_kappa_star"), r, e + pc),
            RuleOutcome::rate("floor_phi0", count(records, "violation_phi0"), r, e + pb),
            RuleOutcome::rate("floor_kappa0", count(records, "violation_kappa0"), r, e + pb),
        ];
        let mut notes = Vec::new();
        if self.floors.is_none() {
            let note = "vacuous: no M^2 in {2, ..., p} has Delta_bar(M, t) <= Delta";
            rules = rules.into_iter().map(|o| o.with_note(note)).collect();
            notes.push(format!("{note}; Delta_bar at M^2 = 2 is {}", self.smallest_margin));
        }
        rules.push(RuleOutcome::zero("ordering_violation", count(records, "ordering_violation"), r));
        let mut diagnostics = BTreeMap::from([
            ("L_delta_eps".into(), self.l_delta),
            ("kappa_star_sq".into(), self.population[0]),
            ("phi0_sq".into(), self.population[1]),
            ("kappa0_sq".into(), self.population[2]),
            ("p_not_b".into(), pb),
            ("p_not_c".into(), pc),
            ("delta_bar_at_m_sq_2".into(), self.smallest_margin),
            ("median_phi_tilde_sq".into(), median(column(records, "phi_tilde_sq"))),
        ]);
        if let (Some(msq), Some(f)) = (self.m_sq, self.floors) {
            diagnostics.insert("m_sq".into(), msq as f64);
            diagnostics.insert("floor_kappa_star".into(), f[0]);
            diagnostics.insert("floor_phi0".into(), f[1]);
            diagnostics.insert("floor_kappa0".into(), f[2]);
        }
        report("normalized_floor", records, rules, diagnostics, notes)
    }
}

// ---------------------------------------------------------------------------

struct SigmaTails {
    spec: EnsembleSpec,
    n: usize,
    t: f64,
    gauss: Option<(f64, f64)>,
    moments: Flagged,
}

impl SigmaTails {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        if !unit_diagonal(&population_covariance(&cfg.ensemble)?) {
            return invalid("sigma_tails needs a population covariance with unit diagonal");
        }
        let (bp, k) = cfg.effective_params()?;
        let c = if cfg.derive_constants { k.sub_gaussian_c } else { Some(bp.c) };
        let gauss = c.map(|c| (sigma_tail_gauss(c, bp.p, bp.n, bp.t), sigma_tail_gauss(c, bp.p, bp.n, 2.0 * bp.t)));
        let moments = sigma_tail_moments(bp.c0_universal, bp.kappa1, bp.alpha, bp.eta, bp.p, bp.n, bp.t);
        Ok(Self { spec: cfg.ensemble.clone(), n: cfg.n, t: bp.t, gauss, moments })
    }
}

impl Check for SigmaTails {
    fn trial(&self, _index: usize, seed: u64) -> Result<BTreeMap<String, f64>> {
        let x = sample(&self.spec, self.n, seed)?;
        let dev = x.sigma_hat_sq.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
        let top = x.sigma_hat_sq.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut out = BTreeMap::from([
            ("max_abs_dev".into(), dev),
            ("max_sigma_sq".into(), top),
            ("moment_exceedance".into(), flag(top > self.moments.value)),
        ]);
        if let Some((thr, _)) = self.gauss {
            out.insert("gauss_exceedance".into(), flag(dev >= thr));
        }
        Ok(out)
    }

    fn summarize(&self, records: &[TrialRecord]) -> CheckReport {
        let r = records.len();
        let mut rules = Vec::new();
        let mut diagnostics = BTreeMap::from([("moment_threshold".into(), self.moments.value)]);
        match self.gauss {
            Some((thr, thr2)) => {
                rules.push(RuleOutcome::rate("gauss_exceedance", count(records, "gauss_exceedance"), r, (-self.t).exp()));
                rules.push(RuleOutcome {
                    passed: thr2 > thr,
                    ..RuleOutcome::info("threshold_monotone_in_t", thr2 - thr, "threshold at 2t minus threshold at t")
                });
                diagnostics.insert("gauss_threshold".into(), thr);
            }
            None => rules.push(RuleOutcome::info("gauss_exceedance", 0.0, "ensemble has no sub-Gaussian constant")),
        }
        let m = RuleOutcome::rate("moment_exceedance", count(records, "moment_exceedance"), r, 1.0 / self.t);
        rules.push(if self.moments.all_ok() {
            m
        } else {
            let failed: Vec<&str> = self.moments.flags.iter().filter(|(_, v)| !**v).map(|(k, _)| k.as_str()).collect();
            RuleOutcome::info("moment_exceedance", m.observed, format!("preconditions not met: {}", failed.join(", ")))
        });
        diagnostics.insert("max_abs_dev_median".into(), median(column(records, "max_abs_dev")));
        report("sigma_tails", records, rules, diagnostics, Vec::new())
    }
}

// ---------------------------------------------------------------------------

struct SemMoment {
    bound: f64,
    order: f64,
    case: &'static str,
}

struct Moments {
    spec: EnsembleSpec,
    n: usize,
    dirs: Vec<Vec<f64>>,
    sem_dirs: Vec<Vec<f64>>,
    fourth: Option<(f64, f64)>,
    sem: Option<SemMoment>,
    delta_n: Option<f64>,
    ew: Flagged,
}

impl Moments {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let (bp, k) = cfg.effective_params()?;
        let p = cfg.ensemble.p;
        let sigma0 = population_covariance(&cfg.ensemble)?;
        let count = cfg.options.moment_directions.max(1);
        let mut dirs = Vec::with_capacity(count);
        let mut sem_dirs = Vec::with_capacity(count);
        for i in 0..count {
            let mut rng = keyed(cfg.master_seed, Purpose::Probe, i as u64);
            let mut u = vec![0.0; p];
            if i == 0 {
                u[0] = 1.0;
            } else {
                let size = rng.random_range(1..=p);
                for _ in 0..size {
                    u[rng.random_range(0..p)] = StandardNormal.sample(&mut rng);
                }
                if norm1(&u) == 0.0 {
                    u[0] = 1.0;
                }
            }
            let v = crate::matcore::norm2(&u);
            sem_dirs.push(u.iter().map(|x| x / v).collect());
            let s = quad(&sigma0, &u).sqrt().max(norm1(&u) / bp.radius);
            dirs.push(u.iter().map(|x| x / s).collect());
        }
        let bernstein = !cfg.derive_constants || (k.sigma_x.is_some() && k.k_x.is_some());
        let fourth = if bernstein {
            admissible_c0(bp.c0_poly, bp.sigma_x, bp.k_x, bp.radius, bp.p)
                .map(|c0| (fourth_moment_bound(c0, bp.sigma_x, bp.k_x, bp.radius, bp.p).0, c0))
        } else {
            None
        };
        let sem = k.martingale.as_ref().map(|mb| {
            let sub_gauss = cfg.ensemble.innovation != Innovation::Laplace;
            match (cfg.ensemble.variant, sub_gauss) {
                (Variant::SemDag, true) => SemMoment { bound: mb.subgauss_f0, order: mb.m, case: "sub-Gaussian, fixed scales" },
                (Variant::SemDag, false) => SemMoment { bound: mb.bernstein_nonrandom, order: mb.m, case: "Bernstein, fixed scales" },
                (_, true) => SemMoment { bound: mb.subgauss_general, order: mb.m, case: "sub-Gaussian, predictable scales" },
                (_, false) => SemMoment { bound: mb.bernstein_general, order: mb.m0, case: "Bernstein, predictable scales" },
            }
        });
        let delta_n = bernstein.then(|| delta_n(bp.sigma_x, bp.k_x, bp.p, bp.n));
        let ew = ew_moment_bound(bp.c0_universal, bp.kappa1, bp.alpha, bp.eta, bp.p, bp.n);
        Ok(Self { spec: cfg.ensemble.clone(), n: cfg.n, dirs, sem_dirs, fourth, sem, delta_n, ew })
    }

    /// Innovations `eps_j = x_j - sum_k x_k beta_kj`.
    fn innovations(&self, row: &[f64]) -> Vec<f64> {
        (0..row.len()).map(|j| row[j] - (0..j).map(|k| row[k] * self.spec.beta(k, j)).sum::<f64>()).collect()
    }

    /// Worst direction (largest excess over `bound + 3 SE`) of an
    /// `order`-norm estimated from per-trial moment means.
    fn norm_rule(&self, rule: &str, records: &[TrialRecord], prefix: &str, order: f64, power: f64, bound: f64) -> RuleOutcome {
        let mut worst: Option<RuleOutcome> = None;
        for k in 0..self.dirs.len() {
            let (m, se) = mean_se(&column(records, &format!("{prefix}{k}")));
            // Delta method for m^{power/order}.
            let e = power / order;
            let est = m.powf(e);
            let se_est = if m > 0.0 { e * m.powf(e - 1.0) * se } else { 0.0 };
            let o = RuleOutcome::mean(rule, est, se_est, bound, records.len());
            let excess = o.observed - o.threshold;
            if worst.as_ref().is_none_or(|w| excess > w.observed - w.threshold) {
                worst = Some(o.with_note(format!("worst of {} directions: #{k}", self.dirs.len())));
            }
        }
        worst.expect("at least one direction")
    }
}

impl Check for Moments {
    fn trial(&self, _index: usize, seed: u64) -> Result<BTreeMap<String, f64>> {
        let x = sample(&self.spec, self.n, seed)?;
        let nf = x.n as f64;
        let mut out = BTreeMap::new();
        for (k, u) in self.dirs.iter().enumerate() {
            let m4 = x.x.chunks(x.p).map(|r| dot(r, u).powi(4)).sum::<f64>() / nf;
            out.insert(format!("m4_u{k}"), m4);
        }
        if let Some(sem) = &self.sem {
            let eps: Vec<Vec<f64>> = x.x.chunks(x.p).map(|r| self.innovations(r)).collect();
            for (k, v) in self.sem_dirs.iter().enumerate() {
                let mq = eps.iter().map(|e| dot(e, v).abs().powf(sem.order)).sum::<f64>() / nf;
                out.insert(format!("sem_u{k}"), mq);
            }
        }
        let w = rademacher_average(&x, derive(seed, &[1]));
        out.insert("ew_sup".into(), w.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        Ok(out)
    }

    fn summarize(&self, records: &[TrialRecord]) -> CheckReport {
        let r = records.len();
        let mut rules = Vec::new();
        let mut diagnostics = BTreeMap::new();
        match self.fourth {
            Some((bound, c0)) => {
                rules.push(self.norm_rule("fourth_moment", records, "m4_u", 4.0, 2.0, bound));
                diagnostics.insert("fourth_moment_bound".into(), bound);
                diagnostics.insert("fourth_moment_c0".into(), c0);
            }
            None => rules.push(RuleOutcome::info("fourth_moment", 0.0, "no Bernstein constants or no admissible c0")),
        }
        if let Some(sem) = &self.sem {
            let mut o = self.norm_rule("sem_moment", records, "sem_u", sem.order, 1.0, sem.bound);
            o.note = Some(format!("{} (order {}); {}", sem.case, sem.order, o.note.unwrap_or_default()));
            rules.push(o);
            diagnostics.insert("sem_bound".into(), sem.bound);
        }
        let (ew, se) = mean_se(&column(records, "ew_sup"));
        diagnostics.insert("ew_sup_mean".into(), ew);
        match self.delta_n {
            Some(dn) => {
                rules.push(RuleOutcome::mean("ew_delta_n", ew, se, dn, r));
                diagnostics.insert("delta_n".into(), dn);
            }
            None => rules.push(RuleOutcome::info("ew_delta_n", ew, "ensemble has no Bernstein constants")),
        }
        let o = RuleOutcome::mean("ew_moment_bound", ew, se, self.ew.value, r);
        rules.push(if self.ew.all_ok() {
            o
        } else {
            let failed: Vec<&str> = self.ew.flags.iter().filter(|(_, v)| !**v).map(|(k, _)| k.as_str()).collect();
            RuleOutcome::info("ew_moment_bound", ew, format!("preconditions not met: {}", failed.join(", ")))
        });
        diagnostics.insert("ew_moment_bound".into(), self.ew.value);
        report("moment_bounds", records, rules, diagnostics, Vec::new())
    }
}

// ---------------------------------------------------------------------------

struct Deviation {
    spec: EnsembleSpec,
    n: usize,
    grid: Vec<usize>,
    sigma0: SymMatrix,
    radius: f64,
    probes: usize,
    unit: BTreeMap<usize, f64>,
}

impl Deviation {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let (bp, k) = cfg.effective_params()?;
        let c = if cfg.derive_constants { k.sub_gaussian_c.unwrap_or(bp.c) } else { bp.c };
        let mut unit = BTreeMap::new();
        for &n in std::iter::once(&cfg.n).chain(&cfg.options.n_grid) {
            let terms = uniform_deviation_terms(bp.radius, c, bp.ctilde_m, bp.m, bp.p, n as f64, bp.t)?;
            unit.insert(n, terms.iter().sum::<f64>());
        }
        Ok(Self {
            spec: cfg.ensemble.clone(),
            n: cfg.n,
            grid: cfg.options.n_grid.clone(),
            sigma0: population_covariance(&cfg.ensemble)?,
            radius: bp.radius,
            probes: cfg.options.deviation_probes.max(1),
            unit,
        })
    }

    fn feasible(&self, v: &[f64]) -> Option<Vec<f64>> {
        let s = quad(&self.sigma0, v).sqrt().max(norm1(v) / self.radius);
        (s > 0.0).then(|| v.iter().map(|x| x / s).collect())
    }

    /// Lower estimate of `sup |u^T (Sigma_hat - Sigma0) u|` over
    /// `{u^T Sigma0 u <= 1, ||u||_1 <= M}`: random probes, then power-type
    /// polish of the best few.
    fn estimate(&self, gram: &SymMatrix, rng: &mut StreamRng) -> Result<f64> {
        let d = gram.sub_scaled(&self.sigma0, 1.0)?;
        let p = d.dim();
        let val = |u: &[f64]| quad(&d, u).abs();
        let mut pool: Vec<(f64, Vec<f64>)> = Vec::with_capacity(self.probes + p);
        for j in 0..p {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            if let Some(u) = self.feasible(&e) {
                pool.push((val(&u), u));
            }
        }
        for _ in 0..self.probes {
            let size = rng.random_range(1..=p);
            let mut v = vec![0.0; p];
            for _ in 0..size {
                v[rng.random_range(0..p)] = StandardNormal.sample(rng);
            }
            if let Some(u) = self.feasible(&v) {
                pool.push((val(&u), u));
            }
        }
        pool.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut best = pool.first().map_or(0.0, |x| x.0);
        for (_, start) in pool.iter().take(5) {
            let mut u = start.clone();
            for _ in 0..30 {
                let Some(next) = self.feasible(&d.mul_vec(&u)) else { break };
                u = next;
                best = best.max(val(&u));
            }
        }
        Ok(best)
    }
}

impl Check for Deviation {
    fn trial(&self, _index: usize, seed: u64) -> Result<BTreeMap<String, f64>> {
        let mut out = BTreeMap::new();
        let x = sample(&self.spec, self.n, seed)?;
        let mut rng = keyed(seed, Purpose::Probe, 0);
        let dev = self.estimate(&x.gram, &mut rng)?;
        out.insert("deviation".into(), dev);
        out.insert("ratio".into(), dev / self.unit[&self.n]);
        for (k, &nk) in self.grid.iter().enumerate() {
            let s = derive(seed, &[k as u64 + 1]);
            let xk = sample(&self.spec, nk, s)?;
            let dk = self.estimate(&xk.gram, &mut keyed(s, Purpose::Probe, 0))?;
            out.insert(format!("deviation_n{nk}"), dk);
            out.insert(format!("ratio_n{nk}"), dk / self.unit[&nk]);
        }
        Ok(out)
    }

    fn summarize(&self, records: &[TrialRecord]) -> CheckReport {
        let max = |key: &str| column(records, key).into_iter().fold(0.0f64, f64::max);
        let c1 = max("ratio");
        let mut rules = vec![RuleOutcome::info("calibrated_c1", c1, "smallest c1 for which every trial meets the bound")];
        let mut diagnostics = BTreeMap::from([("calibrated_c1".into(), c1), ("unit_bound".into(), self.unit[&self.n])]);
        if self.grid.len() >= 2 {
            rules.push(trend_rule("median_deviation_decreasing", &grid_medians(records, &self.grid, "deviation_n")));
            let first = max(&format!("ratio_n{}", self.grid[0]));
            let last = max(&format!("ratio_n{}", self.grid[self.grid.len() - 1]));
            rules.push(RuleOutcome {
                rule: "calibrated_c1_no_growth".into(),
                kind: RuleKind::Trend,
                observed: last,
                target: first,
                threshold: first,
                count: usize::from(last > first),
                total: 1,
                passed: last <= first,
                note: Some("calibrated c1 at the largest n against the smallest n".into()),
            });
            for &n in &self.grid {
                diagnostics.insert(format!("calibrated_c1_n{n}"), max(&format!("ratio_n{n}")));
            }
        }
        report("uniform_deviation", records, rules, diagnostics, Vec::new())
    }
}

// ---------------------------------------------------------------------------

struct Lasso {
    spec: EnsembleSpec,
    n: usize,
    support: Vec<usize>,
    opts: LassoOptions,
}

impl Lasso {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let o = cfg.options.lasso.clone();
        if !(o.lambda_factor > 0.0 && o.noiseless_lambda > 0.0) {
            return invalid("lasso needs positive lambda_factor and noiseless_lambda");
        }
        Ok(Self { spec: cfg.ensemble.clone(), n: cfg.n, support: cfg.cone.support.clone(), opts: o })
    }
}

impl Check for Lasso {
    fn trial(&self, index: usize, seed: u64) -> Result<BTreeMap<String, f64>> {
        let noiseless = index < self.opts.noiseless_trials;
        let o = &self.opts;
        let prob = LassoProblem::seeded(
            &self.spec,
            self.n,
            &self.support,
            o.amplitude,
            if noiseless { 0.0 } else { o.noise_sd },
            o.lambda_factor,
            noiseless.then_some(o.noiseless_lambda),
            seed,
        )?;
        let compat = problem_compat(&prob)?.unwrap_or(0.0);
        let rec = oracle_inequality_check(&prob, compat)?;
        let mut out = BTreeMap::from([
            ("noiseless".into(), flag(noiseless)),
            ("lambda".into(), rec.lambda),
            ("lambda0".into(), rec.lambda0),
            ("compat".into(), compat),
            ("pass".into(), flag(rec.status == InequalityStatus::Pass)),
            ("fail".into(), flag(rec.status == InequalityStatus::Fail)),
            ("vacuous".into(), flag(rec.status == InequalityStatus::Vacuous)),
            ("skipped".into(), flag(rec.status == InequalityStatus::Skipped)),
        ]);
        for (k, v) in [("L", rec.l), ("lhs", rec.lhs), ("rhs", rec.rhs)] {
            if let Some(v) = v {
                out.insert(k.into(), v);
            }
        }
        if let Some(fit) = &rec.fit {
            out.insert("fitted".into(), 1.0);
            out.insert("kkt_residual".into(), fit.kkt_residual);
            out.insert("kkt_above_tol".into(), flag(fit.kkt_residual > 1e-7));
            out.insert("duality_gap".into(), fit.duality_gap);
            out.insert("sweeps".into(), fit.sweeps as f64);
            out.insert("not_converged".into(), flag(!fit.converged));
        }
        Ok(out)
    }

    fn summarize(&self, records: &[TrialRecord]) -> CheckReport {
        let evaluated = count(records, "pass") + count(records, "fail");
        let fits = count(records, "fitted");
        let rules = vec![
            RuleOutcome::zero("inequality_failures", count(records, "fail"), evaluated),
            RuleOutcome::zero("kkt_residual_above_1e-7", count(records, "kkt_above_tol"), fits),
            RuleOutcome::zero("not_converged", count(records, "not_converged"), fits),
            RuleOutcome::info("skipped", count(records, "skipped") as f64, "lambda <= lambda0"),
            RuleOutcome::info("vacuous", count(records, "vacuous") as f64, "compatibility constant <= 1e-10"),
        ];
        let kkt = column(records, "kkt_residual").into_iter().filter(|v| v.is_finite()).fold(0.0f64, f64::max);
        let diagnostics = BTreeMap::from([
            ("evaluated".into(), evaluated as f64),
            ("max_kkt_residual".into(), kkt),
            (
                "median_lhs_over_rhs".into(),
                median(
                    records
                        .iter()
                        .filter(|r| r.flag("pass") || r.flag("fail"))
                        .map(|r| r.metric("lhs") / r.metric("rhs").max(f64::MIN_POSITIVE))
                        .collect(),
                ),
            ),
        ]);
        report("lasso", records, rules, diagnostics, Vec::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::{run_experiment, ExperimentConfig};

    fn cfg(spec: EnsembleSpec, n: usize, trials: usize, check: &str) -> ExperimentConfig {
        ExperimentConfig::new(spec, n, trials, ConeSpec::compat(vec![0, 1], 1.0), 17, &[check])
    }

    #[test]
    fn median_and_se() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rademacher_has_no_sigma_exceedances() {
        let rep = run_experiment(&cfg(EnsembleSpec::rademacher(8), 50, 30, "sigma_tails")).unwrap();
        let c = rep.check("sigma_tails").unwrap();
        assert_eq!(c.rule("gauss_exceedance").unwrap().count, 0);
        assert!(rep.trials.iter().all(|t| t.metric("max_abs_dev") == 0.0));
    }

    #[test]
    fn psd_matrices_never_violate_transfer_floor() {
        let mut c = cfg(EnsembleSpec::gaussian(4), 10, 24, "transfer");
        c.options.transfer.probes = 20;
        let rep = run_experiment(&c).unwrap();
        let t = rep.check("transfer").unwrap();
        assert!(t.passed, "{t:?}");
        assert_eq!(t.rule("floor_violations").unwrap().count, 0);
    }

    #[test]
    fn lower_bound_rejects_large_p() {
        let c = cfg(EnsembleSpec::gaussian(7), 50, 2, "lower_bound");
        assert!(run_experiment(&c).is_err());
    }

    #[test]
    fn whitening_identity() {
        let s0 = SymMatrix::equicorrelated(3, 0.4);
        let lc = cholesky(&s0).into_result().unwrap();
        let w = whiten(&s0, &lc).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((w.get(i, j) - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deviation_vanishes_for_tiny_radius() {
        let mut c = cfg(EnsembleSpec::gaussian(5), 100, 3, "uniform_deviation");
        c.bound_params.radius = 1e-6;
        c.options.n_grid = vec![];
        let rep = run_experiment(&c).unwrap();
        assert!(rep.trials.iter().all(|t| t.metric("deviation") < 1e-10));
    }
}
