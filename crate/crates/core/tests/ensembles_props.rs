use isoquad::ensembles::{population_covariance, sample, sample_rows, EnsembleSpec, Innovation};
use isoquad::matcore::SymMatrix;

fn b3() -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.6, -0.3], vec![0.0, 0.0, 0.5], vec![0.0, 0.0, 0.0]]
}

fn variants() -> Vec<EnsembleSpec> {
    let mix = SymMatrix::from_rows(&[vec![1.0, 0.4, 0.1], vec![0.4, 1.0, -0.2], vec![0.1, -0.2, 1.0]]).unwrap();
    vec![
        EnsembleSpec::gaussian(3).with_sigma0(mix.clone()),
        EnsembleSpec::rademacher(3).with_sigma0(mix.clone()),
        EnsembleSpec::laplace(3).with_sigma0(mix.clone()),
        EnsembleSpec::student_t(3, 8.0).with_sigma0(mix),
        EnsembleSpec::sem_dag(b3(), vec![1.0, 0.7, 1.3]).with_innovation(Innovation::Laplace),
        EnsembleSpec::sem_arch(b3(), vec![1.0, 0.7, 1.3], 0.4),
    ]
}

#[test]
fn gram_average_matches_population_covariance() {
    const R: usize = 10_000;
    for (v, spec) in variants().into_iter().enumerate() {
        let pop = population_covariance(&spec).unwrap();
        let mut sum = [0.0f64; 9];
        let mut sq = [0.0f64; 9];
        for r in 0..R {
            let g = sample(&spec, 50, 1_000_000 * v as u64 + r as u64).unwrap().gram;
            for (k, &x) in g.as_slice().iter().enumerate() {
                sum[k] += x;
                sq[k] += x * x;
            }
        }
        for k in 0..9 {
            let mean = sum[k] / R as f64;
            let var = (sq[k] / R as f64 - mean * mean).max(0.0);
            let se = (var / R as f64).sqrt();
            let target = pop.as_slice()[k];
            assert!((mean - target).abs() <= 5.0 * se + 1e-12, "{:?} entry {k}: mean {mean} vs {target} (se {se})", spec.variant);
        }
    }
}

#[test]
fn sem_innovations_are_uncorrelated_with_the_past() {
    const N: usize = 200_000;
    for spec in [
        EnsembleSpec::sem_dag(b3(), vec![1.0, 0.7, 1.3]).with_innovation(Innovation::Rademacher),
        EnsembleSpec::sem_arch(b3(), vec![1.0, 0.7, 1.3], 0.4),
    ] {
        let x = sample_rows(&spec, N, 77).unwrap();
        let b = b3();
        for j in 1..3 {
            for k in 0..j {
                let past: [fn(f64) -> f64; 3] = [|v| v, |v| v * v, f64::signum];
                for g in past {
                    let (mut se, mut sg, mut see, mut sgg, mut seg) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    for row in x.chunks(3) {
                        let e = row[j] - (0..j).map(|i| row[i] * b[i][j]).sum::<f64>();
                        let h = g(row[k]);
                        se += e;
                        sg += h;
                        see += e * e;
                        sgg += h * h;
                        seg += e * h;
                    }
                    let n = N as f64;
                    let cov = seg / n - se / n * sg / n;
                    let var_g = sgg / n - (sg / n).powi(2);
                    if var_g < 1e-12 {
                        // constant in the past, e.g. v * v under Rademacher roots
                        continue;
                    }
                    let corr = cov / ((see / n - (se / n).powi(2)) * var_g).sqrt();
                    assert!(corr.abs() <= 4.0 / n.sqrt(), "{:?} j={j} k={k}: corr {corr}", spec.variant);
                }
            }
        }
    }
}

#[test]
fn seeded_sampling_is_byte_identical() {
    for spec in variants() {
        let a = sample(&spec, 40, 9).unwrap().to_csv();
        let b = sample(&spec, 40, 9).unwrap().to_csv();
        assert_eq!(a, b);
        assert_ne!(a, sample(&spec, 40, 10).unwrap().to_csv());
    }
}
