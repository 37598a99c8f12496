//! Closed-form margins and moment bounds for random Gram matrices.
//!
//! Each evaluator is a pure function of scalar inputs. Values above one are
//! legal for the lower margins (the probabilistic statement is then void) and
//! are reported with a `void` flag rather than clamped. The unnumbered
//! universal constants enter as explicit parameters that default to one and
//! are echoed in every report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::matcore::{extreme_eigenvalues, norm1, quad, SymMatrix};

/// Every scalar any evaluator reads. Unset optional fields fall back to the
/// formula's own definition (e.g. `delta_n` is computed from `sigma_x`,
/// `k_x`, `p`, `n` unless given).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundParams {
    pub m: f64,
    pub m0: f64,
    pub c_m: f64,
    pub ctilde_m: f64,
    pub c: f64,
    pub sigma_x: f64,
    pub k_x: f64,
    pub kappa1: f64,
    pub alpha: f64,
    pub eta: f64,
    pub c0_universal: f64,
    pub c0_poly: f64,
    pub c1_universal: f64,
    #[serde(rename = "M")]
    pub radius: f64,
    pub t: f64,
    pub n: f64,
    pub p: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub s: f64,
    pub eps: f64,
    #[serde(rename = "Delta")]
    pub delta: f64,
    pub mu_m: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub d: f64,
    pub max_diag: f64,
    pub delta_n: Option<f64>,
    pub b: Option<f64>,
    pub c1: Option<f64>,
    pub kappa_star_sq: Option<f64>,
    pub m_sq: Option<f64>,
}

impl Default for BoundParams {
    fn default() -> Self {
        Self {
            m: 4.0,
            m0: 3.0,
            c_m: 1.0,
            ctilde_m: 1.0,
            c: 1.0,
            sigma_x: 1.0,
            k_x: 1.0,
            kappa1: 1.0,
            alpha: 0.5,
            eta: 2.0,
            c0_universal: 1.0,
            c0_poly: 1.0,
            c1_universal: 1.0,
            radius: 1.0,
            t: 1.0,
            n: 100.0,
            p: 10.0,
            l: 1.0,
            s: 1.0,
            eps: 0.1,
            delta: 0.25,
            mu_m: 1.0,
            k: 0.0,
            d: 2.0,
            max_diag: 1.0,
            delta_n: None,
            b: None,
            c1: None,
            kappa_star_sq: None,
            m_sq: None,
        }
    }
}

impl BoundParams {
    /// Sets a field by its external key. Used by the CLI's `key=value` overrides.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "m" => self.m = value,
            "m0" => self.m0 = value,
            "Cm" | "C_m" | "c_m" => self.c_m = value,
            "Ctilde" | "Ctilde_m" | "ctilde_m" => self.ctilde_m = value,
            "C" | "c" => self.c = value,
            "sigmaX" | "sigma_X" | "sigma_x" => self.sigma_x = value,
            "KX" | "K_X" | "k_x" => self.k_x = value,
            "kappa1" => self.kappa1 = value,
            "alpha" => self.alpha = value,
            "eta" => self.eta = value,
            "c0" | "c0_universal" => self.c0_universal = value,
            "c0_poly" => self.c0_poly = value,
            "c1_universal" => self.c1_universal = value,
            "M" => self.radius = value,
            "t" => self.t = value,
            "n" => self.n = value,
            "p" => self.p = value,
            "L" => self.l = value,
            "s" => self.s = value,
            "eps" => self.eps = value,
            "Delta" => self.delta = value,
            "mu_m" => self.mu_m = value,
            "K" => self.k = value,
            "d" => self.d = value,
            "max_diag" => self.max_diag = value,
            "delta_n" => self.delta_n = Some(value),
            "b" => self.b = Some(value),
            "c1" => self.c1 = Some(value),
            "kappa_star_sq" => self.kappa_star_sq = Some(value),
            "M2" | "m_sq" => self.m_sq = Some(value),
            _ => return Err(Error::InvalidParameter(format!("unknown bound parameter `{key}`"))),
        }
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!("`{key}` must be finite")));
        }
        Ok(())
    }

    pub fn delta_n_value(&self) -> f64 {
        self.delta_n.unwrap_or_else(|| delta_n(self.sigma_x, self.k_x, self.p, self.n))
    }

    pub fn upper_c1(&self) -> f64 {
        self.c1.unwrap_or_else(|| fourth_moment_c1(self.c0_poly, self.sigma_x, self.k_x))
    }
}

fn domain(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Domain { name, reason: reason.into() }
}

/// A lower margin above one makes the corresponding lower bound negative.
pub fn is_void(margin: f64) -> bool {
    margin > 1.0
}

/// `E|Z|^m` for a standard normal `Z`.
pub fn normal_abs_moment(m: f64) -> f64 {
    2f64.powf(m / 2.0) * gamma((m + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

/// `D_m = (2 C_m)^{m/(m-1)} (m-1)/(m-2)`.
pub fn dm(m: f64, c_m: f64) -> Result<f64> {
    if !(m > 2.0) {
        return Err(domain("D_m", format!("requires m > 2, got {m}")));
    }
    if !(c_m > 0.0) {
        return Err(domain("D_m", format!("requires C_m > 0, got {c_m}")));
    }
    Ok((2.0 * c_m).powf(m / (m - 1.0)) * (m - 1.0) / (m - 2.0))
}

/// Expected sup-norm of the Rademacher average for Bernstein entries.
pub fn delta_n(sigma_x: f64, k_x: f64, p: f64, n: f64) -> f64 {
    let l = (2.0 * p).ln();
    sigma_x * (2.0 * l / n).sqrt() + k_x * l / n
}

/// `D a^e + (8 D^2 / 3) b^e` with `e = (m-2)/(m-1)`. The shared shape of
/// every truncation-based lower margin.
fn margin_kernel(m: f64, c_m: f64, a: f64, b: f64) -> Result<f64> {
    let d = dm(m, c_m)?;
    let e = (m - 2.0) / (m - 1.0);
    Ok(d * a.powf(e) + 8.0 * d * d / 3.0 * b.powf(e))
}

fn check_t(name: &'static str, t: f64) -> Result<()> {
    if t > 0.0 {
        Ok(())
    } else {
        Err(domain(name, format!("requires t > 0, got {t}")))
    }
}

/// Lower margin over `{u^T Sigma0 u = 1, ||u||_1 <= M}` given `delta_n`.
pub fn lower_margin(m: f64, c_m: f64, radius: f64, delta_n: f64, t: f64, n: f64) -> Result<f64> {
    check_t("lower margin", t)?;
    margin_kernel(m, c_m, 16.0 * radius * delta_n + (2.0 * t / n).sqrt(), t / n)
}

/// Lower margin over the whole ellipsoid (no l1 restriction); only useful for `p < n`.
pub fn lower_margin_p(m: f64, c_m: f64, p: f64, t: f64, n: f64) -> Result<f64> {
    check_t("lower margin", t)?;
    margin_kernel(m, c_m, 16.0 * (p / n).sqrt() + (2.0 * t / n).sqrt(), t / n)
}

/// Lower margin for sub-Gaussian rows. `b_override` replaces the computed `b`.
pub fn subgaussian_lower(c: f64, radius: f64, t: f64, n: f64, p: f64, b_override: Option<f64>) -> Result<f64> {
    let b = match b_override {
        Some(b) => b,
        None => {
            let dprime = c * (2.0 * (2.0 * p).ln() / n).sqrt();
            16.0 * (radius * dprime).min((p / n).sqrt()) + (2.0 * t / n).sqrt()
        }
    };
    if !(b > 0.0) || !(c > b) {
        return Err(domain("sub-Gaussian lower margin", format!("requires 0 < b < C, got b = {b}, C = {c}")));
    }
    let lg = (c / b).ln();
    Ok(std::f64::consts::SQRT_2 * c * b * (1.0 + 2.0 * (2.0 * lg).sqrt()) + 16.0 * c * c * t * lg / (3.0 * n))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Flagged {
    pub value: f64,
    pub flags: BTreeMap<String, bool>,
}

impl Flagged {
    pub fn all_ok(&self) -> bool {
        self.flags.values().all(|v| *v)
    }
}

/// Rademacher-average bound from moments growing like `kappa1 k^alpha` up to `k0 = eta log p`.
pub fn ew_moment_bound(c0: f64, kappa1: f64, alpha: f64, eta: f64, p: f64, n: f64) -> Flagged {
    let c1 = c0 * kappa1 * eta.sqrt() * (2.0 * alpha - 1.0 + 1.0 / eta).exp();
    let k0 = eta * p.ln();
    let mut flags = BTreeMap::new();
    flags.insert("alpha_ge_half".into(), alpha >= 0.5);
    flags.insert("eta_ge_2_over_log_p".into(), p > 1.0 && eta >= 2.0 / p.ln());
    flags.insert("n_large_enough".into(), n >= k0.powf((2.0 * alpha - 1.0).max(1.0)));
    Flagged { value: c1 * (p.ln() / n).sqrt(), flags }
}

pub fn fourth_moment_c1(c0_poly: f64, sigma_x: f64, k_x: f64) -> f64 {
    2.0 * (1.0 + c0_poly) * (k_x + sigma_x)
}

/// Fourth-moment bound `||<X0 u>||_4^2 <= sqrt(2) c1 M log(2p)` and whether
/// its precondition `c1 M log(2p) <= p^{c0/2}` holds.
pub fn fourth_moment_bound(c0_poly: f64, sigma_x: f64, k_x: f64, radius: f64, p: f64) -> (f64, bool) {
    let c1 = fourth_moment_c1(c0_poly, sigma_x, k_x);
    let lg = (2.0 * p).ln();
    let ok = c1 * radius * lg <= p.powf(c0_poly / 2.0) && c0_poly >= 1.0;
    (std::f64::consts::SQRT_2 * c1 * radius * lg, ok)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UpperMargin {
    pub value: f64,
    pub moment_branch: f64,
    pub isotropy_branch: Option<f64>,
}

/// Upper margin at `M = (L+1) sqrt(s)`. The `m = 4` boundary uses the moment
/// branch since the isotropy branch has a pole there.
pub fn upper_margin(m: f64, c_m: f64, c1: f64, l: f64, s: f64, p: f64, t: f64, n: f64) -> Result<UpperMargin> {
    check_t("upper margin", t)?;
    let root = (2.0 * t / n).sqrt();
    let moment = c1 * (l + 1.0) * s.sqrt() * (2.0 * p).ln();
    if m <= 4.0 {
        return Ok(UpperMargin { value: moment * root, moment_branch: moment * root, isotropy_branch: None });
    }
    let iso = c_m * c_m * (m / (2.0 * (m - 4.0))).sqrt();
    Ok(UpperMargin { value: moment.min(iso) * root, moment_branch: moment * root, isotropy_branch: Some(iso * root) })
}

/// Coefficient `-max_j A_jj / (d-1)` of `||u||_1^2` in the transfer floor.
pub fn transfer_floor_coefficient(a: &SymMatrix, d: usize) -> Result<f64> {
    transfer_floor_from_diag(a.max_diag(), d)
}

pub fn transfer_floor_from_diag(max_diag: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(domain("transfer floor", format!("requires d >= 2, got {d}")));
    }
    if max_diag < 0.0 {
        return Err(domain("transfer floor", "requires a nonnegative diagonal"));
    }
    Ok(-max_diag / (d as f64 - 1.0))
}

/// Whether the conclusion `u^T A u >= coef ||u||_1^2` holds on `u`, with a
/// relative slack of `1e-12`.
pub fn transfer_conclusion_holds(a: &SymMatrix, d: usize, u: &[f64]) -> Result<bool> {
    let coef = transfer_floor_coefficient(a, d)?;
    let l1sq = norm1(u).powi(2);
    let slack = 1e-12 * a.max_abs().max(1.0) * l1sq;
    Ok(quad(a, u) >= coef * l1sq - slack)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisOutcome {
    pub holds: bool,
    pub exhaustive: bool,
    pub submatrices_checked: usize,
}

/// PSD test for a small principal submatrix: all principal minors for
/// `k <= 3`, shifted power iteration otherwise.
pub(crate) fn small_psd(a: &SymMatrix, tol: f64) -> bool {
    let k = a.dim();
    let g = |i: usize, j: usize| a.get(i, j);
    match k {
        1 => g(0, 0) >= -tol,
        2 => g(0, 0) >= -tol && g(1, 1) >= -tol && g(0, 0) * g(1, 1) - g(0, 1).powi(2) >= -tol,
        3 => {
            let diag_ok = (0..3).all(|i| g(i, i) >= -tol);
            let minors_ok = [(0, 1), (0, 2), (1, 2)].iter().all(|&(i, j)| g(i, i) * g(j, j) - g(i, j).powi(2) >= -tol);
            let det = g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1)) - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
                + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0));
            diag_ok && minors_ok && det >= -tol
        }
        _ => extreme_eigenvalues(a).min >= -tol,
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in (i + 1)..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Checks that every `d x d` principal submatrix is PSD. Exhaustive when
/// there are at most `1e5` subsets, otherwise `1e4` subsets drawn from
/// `sample_seed`.
pub fn transfer_hypothesis(a: &SymMatrix, d: usize, sample_seed: u64) -> Result<HypothesisOutcome> {
    let p = a.dim();
    if d < 2 || d > p {
        return Err(domain("transfer hypothesis", format!("requires 2 <= d <= p, got d = {d}, p = {p}")));
    }
    if (0..p).any(|j| a.get(j, j) < 0.0) {
        return Ok(HypothesisOutcome { holds: false, exhaustive: true, submatrices_checked: 0 });
    }
    let tol = 1e-12 * a.max_abs().max(1.0).powi(d as i32);
    if binomial(p, d) <= 1e5 {
        let mut idx: Vec<usize> = (0..d).collect();
        let mut count = 0;
        loop {
            count += 1;
            if !small_psd(&a.principal_submatrix(&idx), tol) {
                return Ok(HypothesisOutcome { holds: false, exhaustive: true, submatrices_checked: count });
            }
            if !next_combination(&mut idx, p) {
                break;
            }
        }
        Ok(HypothesisOutcome { holds: true, exhaustive: true, submatrices_checked: count })
    } else {
        use rand::seq::index::sample;
        let mut rng = crate::rng::keyed(sample_seed, crate::rng::Purpose::Probe, 0);
        for count in 1..=10_000 {
            let mut idx = sample(&mut rng, p, d).into_vec();
            idx.sort_unstable();
            if !small_psd(&a.principal_submatrix(&idx), tol) {
                return Ok(HypothesisOutcome { holds: false, exhaustive: false, submatrices_checked: count });
            }
        }
        Ok(HypothesisOutcome { holds: true, exhaustive: false, submatrices_checked: 10_000 })
    }
}

/// Lower margin used with the transfer principle.
pub fn transfer_lower_margin(m: f64, c_m: f64, radius: f64, t: f64, n: f64, p: f64) -> Result<f64> {
    check_t("transfer lower margin", t)?;
    let lp = p.ln();
    let a = 16.0 * radius * (1.0 + (2.0 * lp).sqrt()) / n.sqrt() + (2.0 * t / n).sqrt();
    let b = (t + radius * radius * lp) / n;
    margin_kernel(m, c_m, a, b)
}

/// `1 - 3 Delta_bar - 2 eps`, the ratio floor on the intersection of both events.
pub fn transfer_composite(delta_bar: f64, eps: f64) -> f64 {
    1.0 - 3.0 * delta_bar - 2.0 * eps
}

/// Deviation threshold for `max_j |sigma_hat_j^2 - 1|` under sub-Gaussian entries.
pub fn sigma_tail_gauss(c: f64, p: f64, n: f64, t: f64) -> f64 {
    let lg = (2.0 * p).ln();
    8.0 * c * c * ((2.0 * lg / n).sqrt() + (2.0 * t / n).sqrt() + lg / n + t / n)
}

/// Threshold for `max_j sigma_hat_j^2` under moment growth up to order `eta log p`.
pub fn sigma_tail_moments(c0: f64, kappa1: f64, alpha: f64, eta: f64, p: f64, n: f64, t: f64) -> Flagged {
    let c1 = c0 * (4.0 * alpha - 1.0 + 2.0 / eta).exp() * kappa1 * kappa1 * 2f64.powf(2.0 * alpha + 1.0) * (eta / 2.0).sqrt();
    let k0 = eta * p.ln();
    let mut flags = BTreeMap::new();
    flags.insert("alpha_ge_quarter".into(), alpha >= 0.25);
    flags.insert("kappa1_ge_one".into(), kappa1 >= 1.0);
    flags.insert("eta_ge_2_over_log_p".into(), p > 1.0 && eta >= 2.0 / p.ln());
    flags.insert("n_large_enough".into(), n >= (k0 / 2.0).powf((4.0 * alpha - 1.0).max(1.0)));
    Flagged { value: 1.0 + c1 * t.powf(2.0 / k0) * (p.ln() / n).sqrt(), flags }
}

/// `L(Delta, eps) = L sqrt(1+eps) / (1 - sqrt(Delta))`.
pub fn l_of_delta(l: f64, delta: f64, eps: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain("L(Delta, eps)", format!("requires 0 < Delta < 1, got {delta}")));
    }
    Ok(l * (1.0 + eps).sqrt() / (1.0 - delta.sqrt()))
}

/// Floor `kappa^2 / (1+eps) - (L+1)^2 s / (M^2 - 1)` for the normalized-design constants.
pub fn normalized_floor(kappa_sq: f64, eps: f64, l: f64, s: f64, m_sq: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(domain("normalized floor", format!("requires eps > 0, got {eps}")));
    }
    if !(m_sq >= 2.0) {
        return Err(domain("normalized floor", format!("requires M^2 >= 2, got {m_sq}")));
    }
    Ok(kappa_sq / (1.0 + eps) - (l + 1.0).powi(2) * s / (m_sq - 1.0))
}

/// Largest `M^2 in {2, ..., p}` with `Delta_bar(M, t) <= delta`, or `None`.
/// Bisection over the integers; the margin is increasing in `M`.
pub fn find_m_sq(m: f64, c_m: f64, t: f64, n: f64, p: usize, delta: f64) -> Result<Option<usize>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain("M^2(Delta)", format!("requires 0 < Delta < 1, got {delta}")));
    }
    let ok = |msq: usize| -> Result<bool> { Ok(transfer_lower_margin(m, c_m, (msq as f64).sqrt(), t, n, p as f64)? <= delta) };
    if p < 2 || !ok(2)? {
        return Ok(None);
    }
    if ok(p)? {
        return Ok(Some(p));
    }
    let (mut lo, mut hi) = (2usize, p);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

fn trunc_log_term(m: f64, p: f64, n: f64, t: f64) -> f64 {
    2.0 * t + 2.0 * (2.0 * p).ln() + 2.0 * m * n.ln() / (m - 2.0)
}

/// Truncation level and the second-moment mass beyond it.
pub fn truncation_residual(c: f64, ctilde: f64, m: f64, p: f64, n: f64, t: f64) -> Result<(f64, f64)> {
    if !(m > 2.0) {
        return Err(domain("truncation", format!("requires m > 2, got {m}")));
    }
    let level = c * trunc_log_term(m, p, n, t).sqrt();
    let residual = ctilde * ctilde * (-t * (m - 2.0) / m).exp() / n;
    Ok((level, residual))
}

/// The three terms of the two-sided uniform deviation bound before the
/// universal constant multiplies them.
pub fn uniform_deviation_terms(radius: f64, c: f64, ctilde: f64, m: f64, p: f64, n: f64, t: f64) -> Result<[f64; 3]> {
    let (_, residual) = truncation_residual(c, ctilde, m, p, n, t)?;
    let prod = trunc_log_term(m, p, n, t) * (p.ln() * n.ln().powi(3) + t) / n;
    Ok([radius * c * prod.sqrt(), radius * radius * c * c * prod, residual])
}

/// `c1 * (linear + quadratic + residual)`.
pub fn uniform_deviation_bound(c1: f64, radius: f64, c: f64, ctilde: f64, m: f64, p: f64, n: f64, t: f64) -> Result<f64> {
    let terms = uniform_deviation_terms(radius, c, ctilde, m, p, n, t)?;
    Ok(c1 * terms.iter().sum::<f64>())
}

/// Moment bounds for `<eps0, u>` with `||u||_2 = 1` under martingale-difference
/// innovations, one entry per case. The general-predictable cases need
/// `2 < m0 < m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleBounds {
    pub m: f64,
    pub m0: f64,
    /// Conditionally sub-Gaussian, scales measurable at time zero: order-`m` norm.
    pub subgauss_f0: f64,
    /// Conditionally sub-Gaussian, general predictable scales: order-`m` norm.
    pub subgauss_general: f64,
    /// Conditionally Bernstein, non-random scales: order-`m` norm.
    pub bernstein_nonrandom: f64,
    /// Conditionally Bernstein, scales measurable at time zero: order-`m` norm.
    pub bernstein_f0: f64,
    /// Conditionally Bernstein, general predictable scales: order-`m0` norm.
    /// The Gamma factor carries the exponent `m0/2 + 1` exactly as printed for
    /// this case, unlike the sub-Gaussian general case which uses `1/m0`.
    pub bernstein_general: f64,
}

pub fn martingale_moment_bounds(m: f64, m0: f64, mu_m: f64, k: f64) -> Result<MartingaleBounds> {
    if !(m > 2.0) {
        return Err(domain("martingale moment bounds", format!("requires m > 2, got {m}")));
    }
    if !(m0 > 2.0 && m0 < m) {
        return Err(domain("martingale moment bounds", format!("requires 2 < m0 < m, got m0 = {m0}, m = {m}")));
    }
    let root = (2.0 * m).sqrt();
    let lead = (2.0 * m / (m - m0)).sqrt();
    let inner = 3.0 * m * gamma(m0 / 2.0 + 1.0) / (m - m0);
    let two = 2f64.powf(1.0 - 1.0 / m0);
    Ok(MartingaleBounds {
        m,
        m0,
        subgauss_f0: root * mu_m,
        subgauss_general: lead * inner.powf(1.0 / m0) * mu_m,
        bernstein_nonrandom: root * mu_m + m * k,
        bernstein_f0: two * (root * mu_m + m * k),
        bernstein_general: lead * inner.powf(m0 / 2.0 + 1.0) * mu_m + (3.0 * gamma(m0 + 1.0)).powf(1.0 / m0) * k,
    })
}

/// JSON-facing record for one evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub inputs: BoundParams,
    pub value: f64,
    pub values: BTreeMap<String, f64>,
    pub void: bool,
    pub validity_flags: BTreeMap<String, bool>,
}

pub const EVALUATORS: &[&str] = &[
    "Dm",
    "delta_n",
    "lower_margin",
    "lower_margin_p",
    "subgaussian_lower",
    "EW_moment",
    "fourth_moment",
    "upper_margin",
    "transfer_floor",
    "transfer_lower_margin",
    "transfer_composite",
    "sigma_tail_gauss",
    "sigma_tail_moments",
    "L_of_Delta",
    "normalized_floor",
    "M_of_Delta",
    "truncation",
    "uniform_deviation",
    "martingale",
];

/// Evaluates a named formula on `params`.
pub fn evaluate(name: &str, params: &BoundParams) -> Result<BoundReport> {
    let q = params;
    let mut values = BTreeMap::new();
    let mut flags = BTreeMap::new();
    let mut void_applies = false;
    let value = match name {
        "Dm" => dm(q.m, q.c_m)?,
        "delta_n" => q.delta_n_value(),
        "lower_margin" => {
            void_applies = true;
            lower_margin(q.m, q.c_m, q.radius, q.delta_n_value(), q.t, q.n)?
        }
        "lower_margin_p" => {
            void_applies = true;
            lower_margin_p(q.m, q.c_m, q.p, q.t, q.n)?
        }
        "subgaussian_lower" => {
            void_applies = true;
            subgaussian_lower(q.c, q.radius, q.t, q.n, q.p, q.b)?
        }
        "EW_moment" => {
            let f = ew_moment_bound(q.c0_universal, q.kappa1, q.alpha, q.eta, q.p, q.n);
            flags = f.flags;
            f.value
        }
        "fourth_moment" => {
            let (v, ok) = fourth_moment_bound(q.c0_poly, q.sigma_x, q.k_x, q.radius, q.p);
            flags.insert("precondition".into(), ok);
            flags.insert("K_ge_sigma".into(), q.k_x >= q.sigma_x);
            v
        }
        "upper_margin" => {
            let u = upper_margin(q.m, q.c_m, q.upper_c1(), q.l, q.s, q.p, q.t, q.n)?;
            values.insert("moment_branch".into(), u.moment_branch);
            if let Some(v) = u.isotropy_branch {
                values.insert("isotropy_branch".into(), v);
            }
            if q.m <= 4.0 {
                let (_, ok) = fourth_moment_bound(q.c0_poly, q.sigma_x, q.k_x, (q.l + 1.0) * q.s.sqrt(), q.p);
                flags.insert("precondition".into(), ok);
            }
            u.value
        }
        "transfer_floor" => transfer_floor_from_diag(q.max_diag, q.d as usize)?,
        "transfer_lower_margin" => {
            void_applies = true;
            transfer_lower_margin(q.m, q.c_m, q.radius, q.t, q.n, q.p)?
        }
        "transfer_composite" => {
            let db = transfer_lower_margin(q.m, q.c_m, q.radius, q.t, q.n, q.p)?;
            values.insert("transfer_lower_margin".into(), db);
            flags.insert("M_sq_in_range".into(), q.radius * q.radius >= 2.0 && q.radius * q.radius <= q.p);
            transfer_composite(db, q.eps)
        }
        "sigma_tail_gauss" => sigma_tail_gauss(q.c, q.p, q.n, q.t),
        "sigma_tail_moments" => {
            let f = sigma_tail_moments(q.c0_universal, q.kappa1, q.alpha, q.eta, q.p, q.n, q.t);
            flags = f.flags;
            f.value
        }
        "L_of_Delta" => l_of_delta(q.l, q.delta, q.eps)?,
        "normalized_floor" => {
            let kappa = q.kappa_star_sq.ok_or_else(|| Error::InvalidParameter("normalized_floor needs kappa_star_sq".into()))?;
            let m_sq = match q.m_sq {
                Some(v) => v,
                None => find_m_sq(q.m, q.c_m, q.t, q.n, q.p as usize, q.delta)?
                    .ok_or_else(|| domain("normalized floor", "no admissible M^2 in {2, ..., p}"))? as f64,
            };
            values.insert("M_sq".into(), m_sq);
            values.insert("L_of_Delta".into(), l_of_delta(q.l, q.delta, q.eps)?);
            normalized_floor(kappa, q.eps, q.l, q.s, m_sq)?
        }
        "M_of_Delta" => match find_m_sq(q.m, q.c_m, q.t, q.n, q.p as usize, q.delta)? {
            Some(v) => {
                flags.insert("admissible".into(), true);
                v as f64
            }
            None => {
                flags.insert("admissible".into(), false);
                f64::NAN
            }
        },
        "truncation" => {
            let (level, residual) = truncation_residual(q.c, q.ctilde_m, q.m, q.p, q.n, q.t)?;
            values.insert("level".into(), level);
            values.insert("residual".into(), residual);
            residual
        }
        "uniform_deviation" => {
            flags.insert("M_ge_1".into(), q.radius >= 1.0);
            uniform_deviation_bound(q.c1_universal, q.radius, q.c, q.ctilde_m, q.m, q.p, q.n, q.t)?
        }
        "martingale" => {
            let b = martingale_moment_bounds(q.m, q.m0, q.mu_m, q.k)?;
            values.insert("subgauss_f0".into(), b.subgauss_f0);
            values.insert("subgauss_general".into(), b.subgauss_general);
            values.insert("bernstein_nonrandom".into(), b.bernstein_nonrandom);
            values.insert("bernstein_f0".into(), b.bernstein_f0);
            values.insert("bernstein_general".into(), b.bernstein_general);
            b.subgauss_f0
        }
        other => return Err(Error::InvalidParameter(format!("unknown bound `{other}`; known: {}", EVALUATORS.join(", ")))),
    };
    Ok(BoundReport {
        name: name.to_string(),
        inputs: params.clone(),
        value,
        values,
        void: void_applies && is_void(value),
        validity_flags: flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn dm_examples() {
        assert!(rel(dm(3.0, 0.5).unwrap(), 2.0) < 1e-15);
        assert!(rel(dm(3.0, 1.0).unwrap(), 5.656_854_249_492_38) < 1e-12);
        // 2^{10/9} * 9/8
        assert!(rel(dm(10.0, 1.0).unwrap(), 2.430_134_412_507_689) < 1e-12);
        assert!(dm(2.0, 1.0).is_err());
    }

    #[test]
    fn delta_n_examples() {
        assert_eq!(delta_n(0.0, 0.0, 8.0, 100.0), 0.0);
        let v = delta_n(1.0, 1.0, 8.0, 100.0);
        assert!(rel(v, (2.0 * 16f64.ln() / 100.0).sqrt() + 16f64.ln() / 100.0) < 1e-15);
        assert!((v - 0.263_207_89).abs() < 1e-8);
        assert!(delta_n(1.0, 1.0, 8.0, 200.0) < v);
    }

    #[test]
    fn lower_margin_examples() {
        let v = lower_margin(3.0, 1.0, 1.0, 0.01, 1.0, 1e4).unwrap();
        assert!((v - 3.21396).abs() < 1e-4);
        assert!(is_void(v));
        let tiny = lower_margin(3.0, 1.0, 1.0, 0.0, 1e-300, 1e4).unwrap();
        assert!(tiny < 1e-60);
        assert!(lower_margin(3.0, 1.0, 1.0, 0.01, 0.0, 1e4).is_err());
    }

    #[test]
    fn lower_margin_p_example() {
        let v = lower_margin_p(3.0, 1.0, 100.0, 1e-300, 100.0).unwrap();
        assert!(rel(v, 4.0 * dm(3.0, 1.0).unwrap()) < 1e-9);
        assert!((v - 22.627).abs() < 1e-3);
    }

    #[test]
    fn subgaussian_lower_example() {
        let b = (-1f64).exp();
        let v = subgaussian_lower(1.0, 1.0, 1.0, 100.0, 8.0, Some(b)).unwrap();
        let expect = std::f64::consts::SQRT_2 * b * (1.0 + 2.0 * 2f64.sqrt()) + 16.0 / 300.0;
        assert!(rel(v, expect) < 1e-14);
        assert!((v - 2.045_111_193_042).abs() < 1e-10);
        assert!(subgaussian_lower(1.0, 1.0, 1.0, 100.0, 8.0, Some(1.5)).is_err());
    }

    #[test]
    fn ew_moment_example() {
        let p = 10f64.exp();
        let f = ew_moment_bound(1.0, 1.0, 1.0, 2.0, p, 1e6);
        assert!((f.value - 0.020_042_722_830_587).abs() < 1e-12);
        assert!(f.all_ok());
        let g = ew_moment_bound(1.0, 3.0, 1.0, 2.0, p, 1e6);
        assert!(rel(g.value, 3.0 * f.value) < 1e-14);
    }

    #[test]
    fn fourth_moment_examples() {
        assert_eq!(fourth_moment_bound(1.0, 0.0, 0.0, 1.0, 16.0), (0.0, true));
        let (v, ok) = fourth_moment_bound(1.0, 1.0, 1.0, 1.0, 16384.0);
        assert!(ok && (v - 117.63).abs() < 0.01);
        let (_, ok) = fourth_moment_bound(1.0, 1.0, 1.0, 1.0, 4096.0);
        assert!(!ok);
    }

    #[test]
    fn upper_margin_examples() {
        let u = upper_margin(6.0, 1.0, 100.0, 1.0, 1.0, 8.0, 2.0, 200.0).unwrap();
        assert!((u.value - 0.173205).abs() < 1e-6);
        let u = upper_margin(3.0, 1.0, 8.0, 1.0, 4.0, 8.0, 2.0, 200.0).unwrap();
        assert!(rel(u.value, 32.0 * 16f64.ln() * 0.02f64.sqrt()) < 1e-14);
        assert!(u.isotropy_branch.is_none());
        let u4 = upper_margin(4.0, 1.0, 8.0, 1.0, 4.0, 8.0, 2.0, 200.0).unwrap();
        assert!(u4.isotropy_branch.is_none() && u4.value.is_finite());
    }

    #[test]
    fn transfer_floor_examples() {
        let mut rows = vec![vec![-1.0; 3]; 3];
        for (i, r) in rows.iter_mut().enumerate() {
            r[i] = 1.0;
        }
        let a = SymMatrix::from_rows(&rows).unwrap();
        let h = transfer_hypothesis(&a, 2, 0).unwrap();
        assert!(h.holds && h.exhaustive && h.submatrices_checked == 3);
        assert!((quad(&a, &[1.0, 1.0, 1.0]) + 3.0).abs() < 1e-15);
        assert!(transfer_conclusion_holds(&a, 2, &[1.0, 1.0, 1.0]).unwrap());
        assert_eq!(transfer_floor_from_diag(2.0, 5).unwrap(), -0.5);
        assert!(transfer_floor_from_diag(2.0, 1).is_err());
        // d = 3 fails: the all-ones direction gives -3 on the full block
        assert!(!transfer_hypothesis(&a, 3, 0).unwrap().holds);
    }

    #[test]
    fn transfer_lower_margin_example() {
        let v = transfer_lower_margin(3.0, 1.0, 2.0, 1.0, 1e4, 100.0).unwrap();
        assert!(rel(v, 10.223_475_619_366_4) < 1e-12);
    }

    #[test]
    fn sigma_tail_examples() {
        assert!((sigma_tail_gauss(1.0, 8.0, 100.0, 1.0) - 3.31700).abs() < 1e-4);
        assert!(rel(sigma_tail_gauss(2.0, 8.0, 100.0, 1.0), 4.0 * sigma_tail_gauss(1.0, 8.0, 100.0, 1.0)) < 1e-14);
        let p = 10f64.exp();
        let f = sigma_tail_moments(1.0, 1.0, 0.5, 2.0, p, 1e6, 1.0);
        assert!((f.value - 1.09346).abs() < 1e-5);
        assert!(sigma_tail_moments(1.0, 1.0, 0.5, 2.0, p, 1e6, 3.0).value > f.value);
    }

    #[test]
    fn normalized_floor_examples() {
        assert!((l_of_delta(1.0, 0.25, 0.1).unwrap() - 2.09762).abs() < 1e-5);
        assert!((normalized_floor(0.75, 0.1, 1.0, 2.0, 100.0).unwrap() - 0.60101).abs() < 1e-5);
        assert!(normalized_floor(0.75, 0.1, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn find_m_sq_matches_linear_scan() {
        let (m, cm, t, p) = (3.0, 0.6, 1.0, 50usize);
        let n = 1e9;
        for delta in [0.02, 0.05, 0.1, 0.2, 0.5, 0.9] {
            let scan = (2..=p).filter(|&k| transfer_lower_margin(m, cm, (k as f64).sqrt(), t, n, p as f64).unwrap() <= delta).max();
            assert_eq!(find_m_sq(m, cm, t, n, p, delta).unwrap(), scan, "delta = {delta}");
        }
        assert_eq!(find_m_sq(3.0, 1.0, 2.0, 400.0, 40, 0.25).unwrap(), None);
    }

    #[test]
    fn truncation_example() {
        let (level, residual) = truncation_residual(1.0, 3f64.powf(0.25), 4.0, 8.0, 100.0, 1.0).unwrap();
        let expect_level = (2.0 + 2.0 * 16f64.ln() + 8.0 * 100f64.ln() / 2.0).sqrt();
        assert!(rel(level, expect_level) < 1e-14);
        assert!((residual - 0.010505).abs() < 1e-6);
    }

    #[test]
    fn martingale_examples() {
        let b = martingale_moment_bounds(8.0, 4.0, 1.0, 0.0).unwrap();
        assert_eq!(b.subgauss_f0, 4.0);
        assert!((b.subgauss_general - 2.0 * 12f64.powf(0.25)).abs() < 1e-12);
        assert!((b.subgauss_general - 3.72242).abs() < 1e-5);
        assert_eq!(b.bernstein_nonrandom, b.subgauss_f0);
        assert!(martingale_moment_bounds(8.0, 8.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn evaluate_dispatch() {
        let mut q = BoundParams::default();
        q.set("m", 3.0).unwrap();
        q.set("Cm", 0.5).unwrap();
        let r = evaluate("Dm", &q).unwrap();
        assert!(rel(r.value, 2.0) < 1e-15);
        assert!(evaluate("nope", &q).is_err());
        assert!(q.set("bogus", 1.0).is_err());
        for name in EVALUATORS {
            let mut q = BoundParams::default();
            q.kappa_star_sq = Some(0.8);
            q.m_sq = Some(10.0);
            q.p = 40.0;
            q.m = 8.0;
            q.m0 = 4.0;
            q.k = 0.5;
            q.b = Some(0.3);
            let r = evaluate(name, &q);
            assert!(r.is_ok(), "{name}: {r:?}");
        }
    }
}
