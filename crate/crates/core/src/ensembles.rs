//! Row distributions with known population covariance and isotropy constants.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::bounds::{martingale_moment_bounds, normal_abs_moment, MartingaleBounds};
use crate::error::{invalid, Error, Result};
use crate::matcore::{cholesky, data_matrix_from_csv, data_matrix_to_csv, LowerTriangular, SymMatrix};
use crate::rng::{keyed, Purpose, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Gaussian,
    Rademacher,
    Laplace,
    StudentT,
    SemDag,
    SemArch,
}

/// Law of the standardized innovation `xi_j` in the SEM variants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Innovation {
    #[default]
    Gaussian,
    Rademacher,
    Laplace,
}

fn default_m() -> f64 {
    4.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub variant: Variant,
    pub p: usize,
    /// Mixing covariance for the i.i.d.-entry variants; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<SymMatrix>,
    /// SEM coefficients `beta[k][j]`, strictly upper triangular.
    #[serde(default, rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default)]
    pub arch_gain: f64,
    #[serde(default)]
    pub innovation: Innovation,
    /// Isotropy order used when reporting constants.
    #[serde(default = "default_m")]
    pub m: f64,
}

impl EnsembleSpec {
    fn base(variant: Variant, p: usize) -> Self {
        Self { variant, p, sigma0: None, b: None, omega: None, nu: None, arch_gain: 0.0, innovation: Innovation::Gaussian, m: 4.0 }
    }

    pub fn gaussian(p: usize) -> Self {
        Self::base(Variant::Gaussian, p)
    }

    pub fn rademacher(p: usize) -> Self {
        Self::base(Variant::Rademacher, p)
    }

    pub fn laplace(p: usize) -> Self {
        Self::base(Variant::Laplace, p)
    }

    pub fn student_t(p: usize, nu: f64) -> Self {
        Self { nu: Some(nu), ..Self::base(Variant::StudentT, p) }
    }

    pub fn sem_dag(b: Vec<Vec<f64>>, omega: Vec<f64>) -> Self {
        let p = omega.len();
        Self { b: Some(b), omega: Some(omega), ..Self::base(Variant::SemDag, p) }
    }

    pub fn sem_arch(b: Vec<Vec<f64>>, omega: Vec<f64>, arch_gain: f64) -> Self {
        let p = omega.len();
        Self { b: Some(b), omega: Some(omega), arch_gain, ..Self::base(Variant::SemArch, p) }
    }

    pub fn with_sigma0(mut self, sigma0: SymMatrix) -> Self {
        self.sigma0 = Some(sigma0);
        self
    }

    pub fn with_innovation(mut self, law: Innovation) -> Self {
        self.innovation = law;
        self
    }

    pub fn with_m(mut self, m: f64) -> Self {
        self.m = m;
        self
    }

    pub fn is_sem(&self) -> bool {
        matches!(self.variant, Variant::SemDag | Variant::SemArch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return invalid("ensemble dimension p must be at least 1");
        }
        if !(self.m > 2.0) {
            return invalid(format!("isotropy order m must exceed 2, got {}", self.m));
        }
        if let Some(s) = &self.sigma0 {
            if s.dim() != self.p {
                return Err(Error::DimensionMismatch { expected: self.p, got: s.dim() });
            }
            if self.is_sem() {
                return invalid("sigma0 is derived from B and omega for SEM variants; do not set it");
            }
        }
        if self.variant == Variant::StudentT {
            match self.nu {
                Some(nu) if nu > 2.0 => {}
                Some(nu) => return invalid(format!("student_t needs nu > 2, got {nu}")),
                None => return invalid("student_t needs nu"),
            }
        }
        if self.is_sem() {
            let omega = self.omega.as_ref().ok_or_else(|| Error::InvalidParameter("SEM variants need omega".into()))?;
            if omega.len() != self.p {
                return Err(Error::DimensionMismatch { expected: self.p, got: omega.len() });
            }
            if let Some(j) = omega.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
                return invalid(format!("omega[{j}] must be positive"));
            }
            if let Some(b) = &self.b {
                if b.len() != self.p || b.iter().any(|r| r.len() != self.p) {
                    return invalid(format!("B must be {p}x{p}", p = self.p));
                }
                for (k, row) in b.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        if !v.is_finite() {
                            return invalid(format!("B[{k}][{j}] is not finite"));
                        }
                        if k >= j && *v != 0.0 {
                            return invalid(format!("B must be strictly upper triangular; B[{k}][{j}] = {v}"));
                        }
                    }
                }
            }
            if !(self.arch_gain >= 0.0 && self.arch_gain.is_finite()) {
                return invalid("arch_gain must be nonnegative");
            }
        } else if self.b.is_some() || self.omega.is_some() {
            return invalid("B and omega only apply to SEM variants");
        }
        Ok(())
    }

    /// Coefficient `beta[k][j]`; zero for non-SEM variants.
    pub fn beta(&self, k: usize, j: usize) -> f64 {
        self.b.as_ref().map_or(0.0, |b| b[k][j])
    }

    pub fn omega_vec(&self) -> Vec<f64> {
        self.omega.clone().unwrap_or_else(|| vec![1.0; self.p])
    }

    fn mixing(&self) -> Result<Option<LowerTriangular>> {
        match &self.sigma0 {
            None => Ok(None),
            Some(s) if *s == SymMatrix::identity(self.p) => Ok(None),
            Some(s) => cholesky(s).into_result().map(Some),
        }
    }

    fn entry_law(&self) -> EntryLaw {
        match self.variant {
            Variant::Gaussian => EntryLaw::Gaussian,
            Variant::Rademacher => EntryLaw::Rademacher,
            Variant::Laplace => EntryLaw::Laplace,
            Variant::StudentT => EntryLaw::StudentT,
            Variant::SemDag | Variant::SemArch => match self.innovation {
                Innovation::Gaussian => EntryLaw::Gaussian,
                Innovation::Rademacher => EntryLaw::Rademacher,
                Innovation::Laplace => EntryLaw::Laplace,
            },
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum EntryLaw {
    Gaussian,
    Rademacher,
    Laplace,
    StudentT,
}

/// Known constants of an ensemble. Fields the variant has no closed form for
/// stay `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConstants {
    pub m: f64,
    pub c_m: Option<f64>,
    pub ctilde_m: Option<f64>,
    pub sigma_x: Option<f64>,
    pub k_x: Option<f64>,
    pub sub_gaussian_c: Option<f64>,
    /// Moment growth `||X_{0,j}||_k <= kappa1 k^alpha`.
    pub kappa1: Option<f64>,
    pub alpha: Option<f64>,
    pub mu_m: Option<f64>,
    /// Conditional Bernstein scale of the innovations (zero when conditionally sub-Gaussian).
    pub innovation_k: Option<f64>,
    pub martingale: Option<MartingaleBounds>,
}

/// `(E|xi|^m)^{1/m}` for a unit-variance Laplace variable.
fn laplace_moment_root(m: f64) -> f64 {
    (gamma(m + 1.0) * 2f64.powf(-m / 2.0)).powf(1.0 / m)
}

fn innovation_moment_root(law: Innovation, m: f64) -> f64 {
    match law {
        Innovation::Gaussian => normal_abs_moment(m).powf(1.0 / m),
        Innovation::Rademacher => 1.0,
        Innovation::Laplace => laplace_moment_root(m),
    }
}

/// The `m0` used for the general predictable martingale bounds.
pub fn default_m0(m: f64) -> f64 {
    (m + 2.0) / 2.0
}

pub fn ensemble_constants(spec: &EnsembleSpec) -> Result<EnsembleConstants> {
    spec.validate()?;
    let m = spec.m;
    let cov = population_covariance(spec)?;
    let sd_max = cov.max_diag().sqrt();
    let identity = spec.sigma0.as_ref().is_none_or(|s| *s == SymMatrix::identity(spec.p));
    let gauss_root = normal_abs_moment(m).powf(1.0 / m);

    let mut out = EnsembleConstants {
        m,
        c_m: None,
        ctilde_m: None,
        sigma_x: None,
        k_x: None,
        sub_gaussian_c: None,
        kappa1: None,
        alpha: None,
        mu_m: None,
        innovation_k: None,
        martingale: None,
    };

    // Linear images of i.i.d. unit-variance entries inherit the entry law's
    // isotropy constant: Gaussian exactly, Rademacher by Khintchine, Laplace
    // and Student t as Gaussian scale mixtures.
    let strong = match spec.variant {
        Variant::SemArch => None,
        Variant::StudentT => {
            let nu = spec.nu.unwrap_or(f64::INFINITY);
            (m < nu).then(|| {
                let w = (nu - 2.0).powf(m / 2.0) * gamma((nu - m) / 2.0) / (2f64.powf(m / 2.0) * gamma(nu / 2.0));
                (normal_abs_moment(m) * w).powf(1.0 / m)
            })
        }
        _ => Some(match spec.entry_law() {
            EntryLaw::Laplace => laplace_moment_root(m),
            _ => gauss_root,
        }),
    };
    out.ctilde_m = strong;
    if spec.variant != Variant::StudentT {
        out.c_m = strong;
    }

    match spec.entry_law() {
        _ if spec.variant == Variant::SemArch || spec.variant == Variant::StudentT => {}
        EntryLaw::Gaussian => {
            out.sigma_x = Some(sd_max);
            out.k_x = Some(std::f64::consts::SQRT_2 * sd_max);
            out.sub_gaussian_c = Some(1.0);
            out.kappa1 = Some(sd_max);
            out.alpha = Some(0.5);
        }
        EntryLaw::Rademacher => {
            if identity && !spec.is_sem() {
                out.sigma_x = Some(1.0);
                out.k_x = Some(1.0);
                out.kappa1 = Some(1.0);
            } else {
                out.sigma_x = Some(sd_max);
                out.k_x = Some(std::f64::consts::SQRT_2 * sd_max);
                out.kappa1 = Some(sd_max);
            }
            out.sub_gaussian_c = Some(1.0);
            out.alpha = Some(0.5);
        }
        EntryLaw::Laplace => {
            out.sigma_x = Some(sd_max);
            out.k_x = Some(sd_max / std::f64::consts::SQRT_2);
            out.kappa1 = Some(sd_max / std::f64::consts::SQRT_2);
            out.alpha = Some(1.0);
        }
        EntryLaw::StudentT => {}
    }

    if spec.is_sem() {
        let omega = spec.omega_vec();
        let law = spec.innovation;
        let mu = match spec.variant {
            Variant::SemDag => omega.iter().cloned().fold(0.0, f64::max),
            _ => arch_mu_bound(spec, &cov, m),
        };
        out.mu_m = Some(mu);
        let k = match law {
            Innovation::Laplace => mu / std::f64::consts::SQRT_2,
            _ => 0.0,
        };
        out.innovation_k = Some(k);
        out.martingale = Some(martingale_moment_bounds(m, default_m0(m), mu, k)?);
    }
    Ok(out)
}

/// Minkowski recursion for `max_j ||V_j||_m` in the ARCH-type SEM.
fn arch_mu_bound(spec: &EnsembleSpec, cov: &SymMatrix, m: f64) -> f64 {
    let omega = spec.omega_vec();
    let g = spec.arch_gain;
    let xi = innovation_moment_root(spec.innovation, m);
    let mut xnorm = vec![0.0; spec.p];
    let mut mu: f64 = 0.0;
    for j in 0..spec.p {
        let v = if j == 0 { omega[0] } else { omega[j] * (1.0 + g.sqrt() * xnorm[j - 1]) / (1.0 + g * cov.get(j - 1, j - 1)).sqrt() };
        mu = mu.max(v);
        xnorm[j] = (0..j).map(|k| spec.beta(k, j).abs() * xnorm[k]).sum::<f64>() + v * xi;
    }
    mu
}

/// Exact `Sigma0`. SEM variants use `(I-B)^{-T} diag(omega^2) (I-B)^{-1}`.
pub fn population_covariance(spec: &EnsembleSpec) -> Result<SymMatrix> {
    spec.validate()?;
    let p = spec.p;
    if !spec.is_sem() {
        return Ok(spec.sigma0.clone().unwrap_or_else(|| SymMatrix::identity(p)));
    }
    let omega = spec.omega_vec();
    // Row k of T = (I-B)^{-1}: X = eps T, so Sigma0 = T^T diag(omega^2) T.
    // T is upper triangular and T = I + B T.
    let mut t = vec![0.0; p * p];
    for j in 0..p {
        t[j * p + j] = 1.0;
    }
    for j in 0..p {
        for i in (0..j).rev() {
            let mut acc = 0.0;
            for k in (i + 1)..=j {
                acc += spec.beta(i, k) * t[k * p + j];
            }
            t[i * p + j] = acc;
        }
    }
    let mut data = vec![0.0; p * p];
    for a in 0..p {
        for b in a..p {
            let v: f64 = (0..=a.min(b)).map(|k| omega[k] * omega[k] * t[k * p + a] * t[k * p + b]).sum();
            data[a * p + b] = v;
            data[b * p + a] = v;
        }
    }
    SymMatrix::new(p, data)
}

fn draw_entry(law: EntryLaw, nu: f64, rng: &mut StreamRng) -> f64 {
    match law {
        EntryLaw::Gaussian => StandardNormal.sample(rng),
        EntryLaw::Rademacher => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
        EntryLaw::Laplace => {
            let u: f64 = rng.random::<f64>() - 0.5;
            let mag = -(1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln();
            u.signum() * mag / std::f64::consts::SQRT_2
        }
        EntryLaw::StudentT => {
            let t: f64 = StudentT::new(nu).expect("nu validated").sample(rng);
            t * ((nu - 2.0) / nu).sqrt()
        }
    }
}

/// Prepared sampler: validated spec plus its mixing factor.
pub struct RowSampler<'a> {
    spec: &'a EnsembleSpec,
    mix: Option<LowerTriangular>,
    sigma0_diag: Vec<f64>,
    law: EntryLaw,
    nu: f64,
}

impl<'a> RowSampler<'a> {
    pub fn new(spec: &'a EnsembleSpec) -> Result<Self> {
        spec.validate()?;
        let mix = if spec.is_sem() { None } else { spec.mixing()? };
        let sigma0_diag = if spec.variant == Variant::SemArch { population_covariance(spec)?.diagonal() } else { Vec::new() };
        Ok(Self { spec, mix, sigma0_diag, law: spec.entry_law(), nu: spec.nu.unwrap_or(f64::INFINITY) })
    }

    /// Fills `row` with one draw of `X_0`, reading only from `rng`.
    pub fn draw(&self, rng: &mut StreamRng, row: &mut [f64]) {
        let p = self.spec.p;
        if !self.spec.is_sem() {
            let z: Vec<f64> = (0..p).map(|_| draw_entry(self.law, self.nu, rng)).collect();
            match &self.mix {
                None => row.copy_from_slice(&z),
                Some(l) => row.copy_from_slice(&l.mul_vec(&z)),
            }
            return;
        }
        let omega = self.spec.omega.as_ref().expect("validated");
        let g = self.spec.arch_gain;
        for j in 0..p {
            let mean: f64 = (0..j).map(|k| row[k] * self.spec.beta(k, j)).sum();
            let scale = if self.spec.variant == Variant::SemArch && j > 0 {
                omega[j] * (1.0 + g * row[j - 1] * row[j - 1]).sqrt() / (1.0 + g * self.sigma0_diag[j - 1]).sqrt()
            } else {
                omega[j]
            };
            row[j] = mean + scale * draw_entry(self.law, self.nu, rng);
        }
    }
}

/// `n` rows, row-major. Row `i` reads from its own stream, so any prefix of
/// rows is identical across different `n`.
pub fn sample_rows(spec: &EnsembleSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = RowSampler::new(spec)?;
    let p = spec.p;
    let mut x = vec![0.0; n * p];
    for (i, row) in x.chunks_mut(p).enumerate() {
        let mut rng = keyed(seed, Purpose::DesignRow, i as u64);
        sampler.draw(&mut rng, row);
    }
    Ok(x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignSample {
    pub n: usize,
    pub p: usize,
    /// Row-major `n x p`.
    pub x: Vec<f64>,
    pub sigma_hat_sq: Vec<f64>,
    pub gram: SymMatrix,
    pub gram_normalized: SymMatrix,
}

impl DesignSample {
    pub fn from_data(n: usize, p: usize, x: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return invalid("design needs n >= 1 and p >= 1");
        }
        if x.len() != n * p {
            return Err(Error::DimensionMismatch { expected: n * p, got: x.len() });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let mut g = vec![0.0; p * p];
        for row in x.chunks(p) {
            for a in 0..p {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                for b in a..p {
                    g[a * p + b] += ra * row[b];
                }
            }
        }
        let inv_n = 1.0 / n as f64;
        for a in 0..p {
            for b in a..p {
                let v = g[a * p + b] * inv_n;
                g[a * p + b] = v;
                g[b * p + a] = v;
            }
        }
        let gram = SymMatrix::new(p, g)?;
        let sigma_hat_sq = gram.diagonal();
        let scale: Vec<f64> = sigma_hat_sq.iter().map(|&s| if s > 0.0 { 1.0 / s.sqrt() } else { 0.0 }).collect();
        let gram_normalized = gram.scale_rows_cols(&scale);
        Ok(Self { n, p, x, sigma_hat_sq, gram, gram_normalized })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    /// `X u` as a length-`n` vector.
    pub fn mul(&self, u: &[f64]) -> Vec<f64> {
        self.x.chunks(self.p).map(|r| crate::matcore::dot(r, u)).collect()
    }

    /// `X^T v / n`.
    pub fn tmul_n(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        for (r, &vi) in self.x.chunks(self.p).zip(v) {
            for (o, &xij) in out.iter_mut().zip(r) {
                *o += xij * vi;
            }
        }
        out.iter_mut().for_each(|o| *o /= self.n as f64);
        out
    }

    /// Column-normalized copy of the data (`X D^{-1/2}`).
    pub fn normalized(&self) -> Result<DesignSample> {
        let scale: Vec<f64> = self.sigma_hat_sq.iter().map(|&s| if s > 0.0 { 1.0 / s.sqrt() } else { 0.0 }).collect();
        let x = self.x.chunks(self.p).flat_map(|r| r.iter().zip(&scale).map(|(a, b)| a * b)).collect();
        DesignSample::from_data(self.n, self.p, x)
    }

    pub fn to_csv(&self) -> String {
        data_matrix_to_csv(self.n, self.p, &self.x)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (n, p, x) = data_matrix_from_csv(text)?;
        Self::from_data(n, p, x)
    }
}

/// JSON sidecar written next to a sampled design's CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub spec: EnsembleSpec,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub sigma_hat_sq: Vec<f64>,
}

pub fn sample(spec: &EnsembleSpec, n: usize, seed: u64) -> Result<DesignSample> {
    if n == 0 {
        return invalid("sample size n must be at least 1");
    }
    DesignSample::from_data(n, spec.p, sample_rows(spec, n, seed)?)
}

/// One draw of `W = eps^T X / n` with fresh Rademacher signs.
pub fn rademacher_average(x: &DesignSample, seed: u64) -> Vec<f64> {
    let mut rng = keyed(seed, Purpose::Rademacher, 0);
    let signs: Vec<f64> = (0..x.n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    x.tmul_n(&signs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_constants() {
        let c = |m: f64| ensemble_constants(&EnsembleSpec::gaussian(3).with_m(m)).unwrap().ctilde_m.unwrap();
        assert!((normal_abs_moment(2.0) - 1.0).abs() < 1e-14);
        assert!((c(2.0001) - 1.0).abs() < 1e-3);
        assert!((c(4.0) - 3f64.powf(0.25)).abs() < 1e-12);
        assert!((c(3.0) - (2.0 * (2.0 / std::f64::consts::PI).sqrt()).powf(1.0 / 3.0)).abs() < 1e-12);
        assert!((c(3.0) - 1.168_575_254_962).abs() < 1e-11);
    }

    #[test]
    fn laplace_constants_match_moments() {
        let k = ensemble_constants(&EnsembleSpec::laplace(2)).unwrap();
        assert!((k.ctilde_m.unwrap() - 6f64.powf(0.25)).abs() < 1e-12);
        assert!((k.sigma_x.unwrap() - 1.0).abs() < 1e-15);
        assert!((k.k_x.unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(k.sub_gaussian_c.is_none());
    }

    #[test]
    fn student_t_has_no_weak_constant() {
        let k = ensemble_constants(&EnsembleSpec::student_t(2, 10.0)).unwrap();
        assert!(k.c_m.is_none() && k.ctilde_m.is_some() && k.sigma_x.is_none());
        // E T^4 for unit-variance t_nu is 3 (nu - 2) / (nu - 4)
        assert!((k.ctilde_m.unwrap().powi(4) - 3.0 * 8.0 / 6.0).abs() < 1e-10);
        let heavy = ensemble_constants(&EnsembleSpec::student_t(2, 3.0)).unwrap();
        assert!(heavy.ctilde_m.is_none());
        assert!(EnsembleSpec::student_t(2, 2.0).validate().is_err());
    }

    #[test]
    fn constant_invariants() {
        let specs = [
            EnsembleSpec::gaussian(3),
            EnsembleSpec::rademacher(3),
            EnsembleSpec::laplace(3),
            EnsembleSpec::sem_dag(vec![vec![0.0, 0.5], vec![0.0, 0.0]], vec![1.0, 2.0]),
        ];
        for s in &specs {
            let k = ensemble_constants(s).unwrap();
            if let (Some(a), Some(b)) = (k.c_m, k.ctilde_m) {
                assert!(a <= b);
            }
            if let (Some(sx), Some(kx)) = (k.sigma_x, k.k_x) {
                assert!(sx <= 3.0 * kx);
            }
        }
    }

    #[test]
    fn sem_covariance_two_nodes() {
        let b = 0.7;
        let spec = EnsembleSpec::sem_dag(vec![vec![0.0, b], vec![0.0, 0.0]], vec![1.0, 1.0]);
        let s = population_covariance(&spec).unwrap();
        assert_eq!(s.to_rows(), vec![vec![1.0, b], vec![b, 1.0 + b * b]]);
        let empty = EnsembleSpec::sem_dag(vec![vec![0.0; 3]; 3], vec![1.0, 2.0, 3.0]);
        assert_eq!(population_covariance(&empty).unwrap(), SymMatrix::diag(&[1.0, 4.0, 9.0]));
    }

    #[test]
    fn sem_covariance_three_nodes_matches_recursion() {
        let b = vec![vec![0.0, 0.5, -0.3], vec![0.0, 0.0, 0.8], vec![0.0; 3]];
        let omega = vec![1.0, 0.5, 2.0];
        let s = population_covariance(&EnsembleSpec::sem_dag(b, omega)).unwrap();
        // X1 = e1, X2 = .5 X1 + e2, X3 = -.3 X1 + .8 X2 + e3
        let v11 = 1.0;
        let v12 = 0.5;
        let v22 = 0.25 + 0.25;
        let v13 = -0.3 * v11 + 0.8 * v12;
        let v23 = -0.3 * v12 + 0.8 * v22;
        let v33 = 0.09 * v11 + 0.64 * v22 - 2.0 * 0.3 * 0.8 * v12 + 4.0;
        let expect = [[v11, v12, v13], [v12, v22, v23], [v13, v23, v33]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((s.get(i, j) - expect[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let lower = EnsembleSpec::sem_dag(vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![1.0, 1.0]);
        assert!(lower.validate().is_err());
        let neg = EnsembleSpec::sem_dag(vec![vec![0.0; 2]; 2], vec![1.0, 0.0]);
        assert!(neg.validate().is_err());
        let singular = EnsembleSpec::gaussian(2).with_sigma0(SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap());
        assert!(sample(&singular, 3, 1).is_err());
    }

    #[test]
    fn rademacher_rows_have_unit_norms() {
        let x = sample(&EnsembleSpec::rademacher(5), 17, 3).unwrap();
        assert!(x.x.iter().all(|v| v.abs() == 1.0));
        assert!(x.sigma_hat_sq.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn sampling_is_deterministic_and_prefix_stable() {
        let spec = EnsembleSpec::laplace(4);
        let a = sample(&spec, 20, 9).unwrap();
        let b = sample(&spec, 20, 9).unwrap();
        let c = sample(&spec, 10, 9).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(&a.x[..40], &c.x[..]);
        assert_ne!(a.x, sample(&spec, 20, 10).unwrap().x);
    }

    #[test]
    fn gaussian_gram_diag_averages_to_one() {
        let spec = EnsembleSpec::gaussian(2);
        let reps = 10_000;
        let vals: Vec<f64> = (0..reps).map(|r| sample(&spec, 3, r).unwrap().gram.get(0, 0)).collect();
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((mean - 1.0).abs() <= 3.0 * sd / (reps as f64).sqrt());
    }

    #[test]
    fn normalized_gram_has_unit_diagonal() {
        let mixed = EnsembleSpec::gaussian(3).with_sigma0(SymMatrix::equicorrelated(3, 0.4).scaled(2.0));
        let x = sample(&mixed, 12, 4).unwrap();
        for j in 0..3 {
            assert!((x.gram_normalized.get(j, j) - 1.0).abs() < 1e-12);
        }
        let xn = x.normalized().unwrap();
        for j in 0..3 {
            assert!((xn.sigma_hat_sq[j] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rademacher_average_examples() {
        let zero = DesignSample::from_data(4, 2, vec![0.0; 8]).unwrap();
        assert_eq!(rademacher_average(&zero, 1), vec![0.0, 0.0]);
        let one = DesignSample::from_data(1, 3, vec![1.0; 3]).unwrap();
        let w = rademacher_average(&one, 5);
        assert!(w == vec![1.0; 3] || w == vec![-1.0; 3]);
    }

    #[test]
    fn csv_round_trip() {
        let x = sample(&EnsembleSpec::gaussian(3), 5, 2).unwrap();
        let back = DesignSample::from_csv(&x.to_csv()).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = EnsembleSpec::sem_arch(vec![vec![0.0, 0.3], vec![0.0, 0.0]], vec![1.0, 1.0], 0.5).with_innovation(Innovation::Laplace);
        let text = serde_json::to_string(&spec).unwrap();
        let back: EnsembleSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn arch_mu_is_at_least_omega() {
        let spec = EnsembleSpec::sem_arch(vec![vec![0.0, 0.3], vec![0.0, 0.0]], vec![1.0, 1.0], 0.5).with_m(8.0);
        let k = ensemble_constants(&spec).unwrap();
        assert!(k.mu_m.unwrap() >= 1.0);
        assert!(k.martingale.is_some() && k.ctilde_m.is_none());
    }
}
