#![allow(dead_code)]

use isoquad::matcore::SymMatrix;
use proptest::prelude::*;

/// `F F^T / k` for a `p x k` factor `F`; singular when `k < p`.
pub fn gram_from_factor(p: usize, k: usize, f: &[f64]) -> SymMatrix {
    let mut a = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            a[i * p + j] = (0..k).map(|c| f[i * k + c] * f[j * k + c]).sum::<f64>() / k as f64;
        }
    }
    SymMatrix::new(p, a).unwrap()
}

/// Positive semidefinite matrices of dimension `lo..=hi`.
pub fn psd_matrix(lo: usize, hi: usize) -> impl Strategy<Value = SymMatrix> {
    (lo..=hi).prop_flat_map(|p| {
        (Just(p), 1..=p + 2)
            .prop_flat_map(|(p, k)| prop::collection::vec(-2.0f64..2.0, p * k).prop_map(move |f| gram_from_factor(p, k, &f)))
    })
}

/// Well-conditioned positive definite matrices.
pub fn pd_matrix(lo: usize, hi: usize) -> impl Strategy<Value = SymMatrix> {
    psd_matrix(lo, hi).prop_map(|a| {
        let p = a.dim();
        a.sub_scaled(&SymMatrix::identity(p), -0.2).unwrap()
    })
}
