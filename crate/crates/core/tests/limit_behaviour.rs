use abundancy_core::limit_stats::{
    empirical_moment, error_series, l2_second_moment_closed, mu_constant, theoretical_moment, zeta,
    DEFAULT_BINS,
};
use abundancy_core::sieve::{sieve_b, SieveConfig};

#[test]
fn error_mean_tightens_with_n() {
    let table = sieve_b(2, 1_000_000, &SieveConfig::default()).unwrap();
    let mu = mu_constant();
    let small = error_series(&table, 10_000, DEFAULT_BINS).unwrap();
    let large = error_series(&table, 1_000_000, DEFAULT_BINS).unwrap();
    assert!((large.mean_e + mu).abs() < (small.mean_e + mu).abs());
    assert_eq!(
        large.histogram.iter().map(|b| b.count).sum::<u64>(),
        1_000_000
    );
}

#[test]
fn empirical_moments_approach_products() {
    let cfg = SieveConfig::default();
    let t2 = sieve_b(2, 1_000_000, &cfg).unwrap();
    let first = empirical_moment(&t2, 1, 1_000_000).unwrap();
    assert!((first - zeta(2, 1e-15)).abs() < 1e-5);
    let second = empirical_moment(&t2, 2, 1_000_000).unwrap();
    assert!((second - l2_second_moment_closed()).abs() < 1e-3);

    let t3 = sieve_b(3, 1_000_000, &cfg).unwrap();
    let theory = theoretical_moment(3, 2, 100_000, 1e-12).unwrap();
    let emp = empirical_moment(&t3, 2, 1_000_000).unwrap();
    assert!(
        (emp - theory.theoretical).abs() < 5e-2,
        "{emp} vs {}",
        theory.theoretical
    );
}
