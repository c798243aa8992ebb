use matinar::estimate::nkp_project;
use matinar::forecast::mrss;
use matinar::io::{read_series_csv, series_to_csv_string};
use matinar::linalg::{
    dense_spectral_radius, kron, rearrange, transformation_matrix, unrearrange, vec, RealMatrix,
};
use matinar::process::{check_stationary, empirical_autocov_kron, IntMatrixSeries, ModelParams};
use matinar::thinning::{left_thin, right_thin, CountMatrix, RngStream};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = RealMatrix> {
    proptest::collection::vec(lo..hi, rows * cols)
        .prop_map(move |v| RealMatrix::from_vec(rows, cols, v))
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3, 1usize..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rearrangement_of_a_kronecker_product_is_rank_one(
        (a, b) in dims().prop_flat_map(|(m, n)| (matrix(m, m, -1.0, 1.0), matrix(n, n, -1.0, 1.0)))
    ) {
        let (m, n) = (a.nrows(), b.nrows());
        let phi = kron(&b, &a);
        let r = rearrange(&phi, m, n).unwrap();
        let outer = vec(&a) * vec(&b).transpose();
        prop_assert!((&r - &outer).amax() < 1e-14);
        prop_assert_eq!(unrearrange(&r, m, n).unwrap(), phi);
    }

    #[test]
    fn nkp_reproduces_the_product_it_was_given(
        (a, b) in dims().prop_flat_map(|(m, n)| (matrix(m, m, 0.05, 1.0), matrix(n, n, 0.05, 1.0)))
    ) {
        let (m, n) = (a.nrows(), b.nrows());
        let phi = kron(&b, &a);
        let (a_hat, b_hat) = nkp_project(&phi, m, n).unwrap();
        prop_assert!((a_hat.norm() - 1.0).abs() < 1e-12);
        prop_assert!((kron(&b_hat, &a_hat) - &phi).amax() < 1e-12 * phi.amax().max(1.0));
    }

    #[test]
    fn kronecker_spectral_radius_is_the_product(
        (a, b) in dims().prop_flat_map(|(m, n)| (matrix(m, m, 0.0, 1.0), matrix(n, n, 0.0, 1.0)))
    ) {
        let params = ModelParams::new(vec![a.clone()], vec![b.clone()], RealMatrix::from_element(a.nrows(), b.nrows(), 1.0)).unwrap();
        let radius = check_stationary(&params).unwrap().radius;
        let want = dense_spectral_radius(&a).unwrap() * dense_spectral_radius(&b).unwrap();
        prop_assert!((radius - want).abs() < 1e-8 * want.max(1.0), "{} vs {}", radius, want);
    }

    #[test]
    fn thinning_never_creates_counts(
        (a, b, y, seed) in dims().prop_flat_map(|(m, n)| (
            matrix(m, m, 0.0, 1.0),
            matrix(n, n, 0.0, 1.0),
            proptest::collection::vec(0u64..50, m * n).prop_map(move |v| CountMatrix::from_vec(m, n, v)),
            any::<u64>(),
        ))
    ) {
        let mut rng = RngStream::new(seed, 0);
        // each output cell sums thinned copies of one input column (left) or row (right)
        let left = left_thin(&a, &y, &mut rng).unwrap();
        for j in 0..y.ncols() {
            let col: u64 = y.column(j).sum();
            prop_assert!(left.column(j).iter().all(|&v| v <= col));
        }
        let right = right_thin(&y, &b, &mut rng).unwrap();
        for i in 0..y.nrows() {
            let row: u64 = y.row(i).sum();
            prop_assert!(right.row(i).iter().all(|&v| v <= row));
        }
        let zeros = CountMatrix::zeros(y.nrows(), y.ncols());
        prop_assert_eq!(left_thin(&a, &zeros, &mut rng).unwrap(), zeros);
    }

    #[test]
    fn permutation_identity_holds_on_arbitrary_series(
        (values, m, n) in dims().prop_flat_map(|(m, n)| (
            proptest::collection::vec(proptest::collection::vec(0u64..20, m * n), 12..30),
            Just(m),
            Just(n),
        ))
    ) {
        let series: Vec<RealMatrix> = values.iter().map(|v| RealMatrix::from_iterator(m, n, v.iter().map(|&x| x as f64))).collect();
        let t = transformation_matrix(m, n);
        prop_assert!((&t * t.transpose() - RealMatrix::identity(m * n, m * n)).amax() == 0.0);
        for h in 1..=3isize {
            let fwd = empirical_autocov_kron(&series, h).unwrap();
            let back = empirical_autocov_kron(&series, -h).unwrap();
            prop_assert_eq!(fwd, (&t * back * &t).transpose());
        }
    }

    #[test]
    fn csv_round_trip(
        (values, m, n, origin) in dims().prop_flat_map(|(m, n)| (
            proptest::collection::vec(proptest::collection::vec(0u64..1000, m * n), 1..15),
            Just(m),
            Just(n),
            0usize..5,
        ))
    ) {
        let items = values.iter().map(|v| CountMatrix::from_vec(m, n, v.clone())).collect();
        let series = IntMatrixSeries::new(items, origin).unwrap();
        let text = series_to_csv_string(&series).unwrap();
        prop_assert_eq!(read_series_csv(text.as_bytes()).unwrap(), series);
    }

    #[test]
    fn mrss_is_gauge_invariant(c in 0.1f64..10.0, seed in any::<u64>()) {
        let a = RealMatrix::from_row_slice(2, 2, &[0.3, 0.6, 0.6, 0.3]);
        let b = RealMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.3, 0.5]);
        let lam = RealMatrix::from_element(2, 2, 1.0);
        let base = ModelParams::new(vec![a.clone()], vec![b.clone()], lam.clone()).unwrap();
        let scaled = ModelParams::new(vec![&a * c], vec![&b / c], lam).unwrap();
        let series = matinar::process::simulate_poisson(&base, 40, 20, seed).unwrap().to_real();
        let (x, y) = (mrss(&base, &series).unwrap(), mrss(&scaled, &series).unwrap());
        prop_assert!((x - y).abs() < 1e-10 * x.max(1.0));
    }
}
