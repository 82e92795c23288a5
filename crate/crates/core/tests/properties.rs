use nalgebra::DMatrix;
use proptest::prelude::*;
use sparse_sensing::datasets::{read_matrix_bin, read_matrix_csv, write_matrix_bin, write_matrix_csv, GaussianStream};
use sparse_sensing::selectors::{select_bdg_fast, select_bdg_naive, select_dg, CandidateSet};
use sparse_sensing::{compute_pod, NoiseModel, SnapshotMatrix, TruncationConfig};

fn gaussian(n: usize, m: usize, seed: u64) -> SnapshotMatrix {
    SnapshotMatrix::new(GaussianStream::new(seed).matrix(n, m)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pod_factors_and_truncation_error(n in 2usize..30, m in 2usize..30, seed in any::<u64>(), r_frac in 0.0f64..1.0) {
        let x = gaussian(n, m, seed);
        let pod = compute_pod(&x).unwrap();
        let q = n.min(m);
        prop_assert!(pod.sigma.as_slice().windows(2).all(|w| w[0] >= w[1]));
        let identity = DMatrix::<f64>::identity(q, q);
        prop_assert!((pod.u.transpose() * &pod.u - &identity).amax() < 1e-12);
        prop_assert!((pod.v.transpose() * &pod.v - &identity).amax() < 1e-12);
        let r = 1 + ((q - 1) as f64 * r_frac) as usize;
        // Frobenius error of the best rank-r approximation is the tail energy.
        let residual = (x.values() - pod.rank_r_reconstruct(r).unwrap()).norm_squared();
        let tail: f64 = pod.sigma.iter().skip(r).map(|s| s * s).sum();
        prop_assert!((residual - tail).abs() <= 1e-10 * x.values().norm_squared());
    }

    #[test]
    fn binary_round_trip(n in 1usize..12, m in 1usize..12, seed in any::<u64>(), scale in -300i32..300) {
        let values = GaussianStream::new(seed).matrix(n, m) * 10f64.powi(scale);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        write_matrix_bin(&path, &values).unwrap();
        let back = read_matrix_bin(&path).unwrap();
        prop_assert!(back.values().iter().zip(values.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn csv_round_trip(n in 1usize..10, m in 1usize..10, seed in any::<u64>(), scale in -200i32..200) {
        let values = GaussianStream::new(seed).matrix(n, m) * 10f64.powi(scale);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_matrix_csv(&path, &values).unwrap();
        let back = read_matrix_csv(&path).unwrap();
        for (a, b) in back.values().iter().zip(values.iter()) {
            prop_assert!((a - b).abs() <= 1e-15 * b.abs());
        }
    }

    #[test]
    fn selections_ignore_global_scale(seed in any::<u64>(), exponent in -6i32..6) {
        let x = gaussian(40, 15, seed);
        let basis = compute_pod(&x).unwrap();
        let scaled = basis.scaled(10f64.powi(exponent) * 1.7);
        let cfg = TruncationConfig::full_tail(3, basis.q()).unwrap();
        let noise = NoiseModel::build(&basis, cfg).unwrap();
        let scaled_noise = NoiseModel::build(&scaled, cfg).unwrap();
        let all = CandidateSet::all(40);
        prop_assert_eq!(select_dg(&basis, 3, 6, &all).unwrap(), select_dg(&scaled, 3, 6, &all).unwrap());
        prop_assert_eq!(
            select_bdg_fast(&basis, &noise, 6, &all).unwrap().indices,
            select_bdg_fast(&scaled, &scaled_noise, 6, &all).unwrap().indices
        );
    }

    #[test]
    fn fast_and_naive_agree(seed in any::<u64>(), r2_frac in 0.0f64..=1.0) {
        let x = gaussian(30, 14, seed);
        let basis = compute_pod(&x).unwrap();
        let tail = basis.q() - 3;
        let r2 = (tail as f64 * r2_frac) as usize;
        let noise = NoiseModel::build(&basis, TruncationConfig::new(3, r2, basis.q()).unwrap()).unwrap();
        let all = CandidateSet::all(30);
        let fast = select_bdg_fast(&basis, &noise, 6, &all).unwrap();
        let naive = select_bdg_naive(&basis, &noise, 6, &all).unwrap();
        prop_assert_eq!(&fast.indices, &naive.indices);
        prop_assert!((fast.logdet_w - naive.logdet_w).abs() <= 1e-9 * naive.logdet_w.abs().max(1.0));
    }

    #[test]
    fn truncated_noise_is_positive_semidefinite(seed in any::<u64>(), r2 in 0usize..10) {
        let basis = compute_pod(&gaussian(25, 13, seed)).unwrap();
        let noise = NoiseModel::build(&basis, TruncationConfig::new(3, r2, basis.q()).unwrap()).unwrap();
        let sensors: Vec<usize> = (0..25).step_by(2).collect();
        let r = noise.sensor_covariance(&sensors).unwrap();
        let smallest = r.symmetric_eigen().eigenvalues.min();
        prop_assert!(smallest >= -1e-12 * noise.d.max());
    }
}
