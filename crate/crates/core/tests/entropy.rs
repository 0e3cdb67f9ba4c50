use schatten_lab::entropy::{
    grassmann_packing_lower, oracle_dim1, sandwich_report, upper_from_log2, BoundMethod, SandwichConfig,
};
use schatten_lab::nets::stiefel::grassmann_distance;
use schatten_lab::nets::{schatten_net_build, ProductNetParams};
use schatten_lab::sampling::StreamKey;
use schatten_lab::schatten::{theory_rate, Exponent, RateQuery};

#[test]
fn product_net_budget_becomes_an_upper_bound() {
    let params = ProductNetParams::new(4, Exponent::ONE, Exponent::TWO, 2);
    let net = schatten_net_build(params, StreamKey::new(1, 0)).unwrap();
    let b = upper_from_log2(net.log2_cardinality, net.error_budget, BoundMethod::ProductNet);
    assert_eq!(b.upper, Some(net.error_budget));
    assert!((1u128 << (b.entropy_index - 1)) as f64 >= net.log2_cardinality.exp2() * (1.0 - 1e-12));
}

#[test]
fn sandwich_rows_for_one_two() {
    let r = sandwich_report(Exponent::ONE, Exponent::TWO, 4, &[1, 2], StreamKey::new(2, 0)).unwrap();
    let ns: Vec<u64> = r.rows.iter().map(|row| row.n).collect();
    assert_eq!(ns, vec![8, 16]);
    for row in &r.rows {
        assert!(row.ratio.is_finite() && row.ratio >= 1.0);
        assert!(row.lower_index >= row.n && row.lower_index >= row.certified_n);
        let theory = theory_rate(&RateQuery::new(Exponent::ONE, Exponent::TWO, row.n, 4).unwrap());
        assert_eq!(row.theory, theory);
    }
    assert!(r.rows.windows(2).all(|w| w[1].upper_monotone <= w[0].upper_monotone));
}

#[test]
fn sandwich_is_deterministic() {
    let a = sandwich_report(Exponent::ONE, Exponent::TWO, 4, &[1, 2], StreamKey::new(7, 0)).unwrap();
    let b = sandwich_report(Exponent::ONE, Exponent::TWO, 4, &[1, 2], StreamKey::new(7, 0)).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.rows, b.rows);
}

#[test]
fn middle_regime_slope_for_two_infinity() {
    let r = sandwich_report(Exponent::TWO, Exponent::INF, 8, &[1, 2, 3], StreamKey::new(3, 0)).unwrap();
    let slope = r.middle_regime_slope().unwrap();
    assert!((slope + 0.5).abs() <= 0.35, "slope {slope}");
}

#[test]
fn projection_packing_is_within_reach_of_the_rate() {
    let g = grassmann_packing_lower(8, 2, Exponent::ONE, Exponent::TWO, StreamKey::new(4, 0)).unwrap();
    let theory = theory_rate(&RateQuery::new(Exponent::ONE, Exponent::TWO, g.bound.entropy_index, 8).unwrap());
    assert!(g.bound.lower > 0.0 && g.bound.lower <= theory && g.bound.lower * 50.0 >= theory);
    let scale = 2f64.powf(-1.0);
    for (i, a) in g.frames.iter().enumerate() {
        for b in &g.frames[i + 1..] {
            assert!(scale * grassmann_distance(a, b, Exponent::TWO) > g.target);
        }
    }
}

#[test]
fn packing_lower_applies_only_below_its_index() {
    let cfg = SandwichConfig { audit_samples: 0, ..Default::default() };
    let r = schatten_lab::entropy::sandwich_report_with(Exponent::ONE, Exponent::INF, 8, &[0, 1], &cfg, StreamKey::new(5, 0)).unwrap();
    for row in &r.rows {
        if row.method_lower == BoundMethod::Packing {
            assert!(r.packings.iter().any(|p| p.entropy_index >= row.lower_index && p.lower == row.lower));
        }
    }
}

#[test]
fn one_dimensional_rows_are_exact() {
    for n in 1..=20 {
        let e = oracle_dim1(n).unwrap();
        let r = theory_rate(&RateQuery::new(Exponent::ONE, Exponent::ONE, n, 1).unwrap());
        assert_eq!(e / r, 2.0);
    }
}
