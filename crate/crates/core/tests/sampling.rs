use schatten_lab::sampling::{haar_orthogonal_with, haar_stiefel_with, sample_many, BallSampler, RejectionStats, SamplingMode, StreamKey};
use schatten_lab::schatten::{schatten_norm, BallSpec, Exponent};
use schatten_lab::stats::{ks_one_sample, ks_two_sample};
use statrs::distribution::{Beta, ContinuousCDF};

#[test]
fn haar_is_left_invariant() {
    let (n, k, count) = (5, 2, 10_000);
    let mut rng = StreamKey::new(1, 0).rng();
    let q = haar_orthogonal_with(&mut StreamKey::new(2, 0).rng(), n).unwrap();
    let plain: Vec<_> = (0..count).map(|_| haar_stiefel_with(&mut rng, n, k).unwrap().u).collect();
    let turned: Vec<_> = (0..count).map(|_| &q * haar_stiefel_with(&mut rng, n, k).unwrap().u).collect();
    for (i, j) in [(0, 0), (2, 1), (4, 0)] {
        let a: Vec<f64> = plain.iter().map(|u| u[(i, j)]).collect();
        let b: Vec<f64> = turned.iter().map(|u| u[(i, j)]).collect();
        let d = ks_two_sample(&a, &b);
        assert!(d < 0.02, "entry ({i},{j}) KS distance {d}");
    }
}

#[test]
fn haar_columns_have_beta_squared_entries() {
    // u_1² of a uniform unit vector in R^n is Beta(1/2, (n−1)/2)
    let n = 6;
    let beta = Beta::new(0.5, (n as f64 - 1.0) / 2.0).unwrap();
    let mut rng = StreamKey::new(3, 0).rng();
    let xs: Vec<f64> = (0..20_000).map(|_| haar_stiefel_with(&mut rng, n, 1).unwrap().u[(0, 0)].powi(2)).collect();
    let d = ks_one_sample(&xs, |x| beta.cdf(x));
    assert!(d < 0.015, "KS distance {d}");
}

#[test]
fn rejection_samples_are_in_the_ball_and_deterministic() {
    for p in [Exponent::of(0.5), Exponent::ONE, Exponent::INF] {
        let spec = BallSpec::new(3, p).unwrap();
        let a = sample_many(spec, SamplingMode::Rejection, 30, StreamKey::new(4, 0)).unwrap();
        let b = sample_many(spec, SamplingMode::Rejection, 30, StreamKey::new(4, 0)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|x| schatten_norm(x, p).unwrap() <= 1.0));
    }
}

#[test]
fn rejection_rate_matches_the_interval_ratio_in_one_dimension() {
    // B_p^1 = [−1, 1] for every p, and the enclosing Frobenius ball is the same interval
    let sampler = BallSampler::new(BallSpec::new(1, Exponent::of(0.5)).unwrap(), SamplingMode::Rejection).unwrap();
    let mut stats = RejectionStats::default();
    let mut rng = StreamKey::new(5, 0).rng();
    for _ in 0..100 {
        sampler.sample(&mut rng, &mut stats).unwrap();
    }
    assert_eq!(stats.rate(), 1.0);
}
