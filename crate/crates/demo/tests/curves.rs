use fishy_demo::{ar1_survival_rows, fishy_curve_rows, tv_bound_rows};

#[test]
fn fishy_curve_tracks_the_exact_line() {
    let rows = fishy_curve_rows(0.8, 0.0, -2.0, 2.0, 5, 4000, 1).unwrap();
    assert_eq!(rows.len(), 20);
    for p in rows.chunks(4) {
        let (x, mean, se, exact) = (p[0], p[1], p[2], p[3]);
        assert!((exact - 5.0 * x).abs() < 1e-9);
        assert!(
            (mean - exact).abs() <= 4.0 * se + 1e-12,
            "x={x}: {mean} vs {exact} (se {se})"
        );
    }
}

#[test]
fn tv_bounds_decrease_to_zero() {
    for model in ["ar1", "cauchy-gibbs", "cauchy-mrth"] {
        let b = tv_bound_rows(model, 0.9, 5, 500, 400, 2).unwrap();
        assert_eq!(b.len(), 401);
        assert!(b.windows(2).all(|w| w[1] <= w[0]), "{model}");
        assert_eq!(*b.last().unwrap(), 0.0, "{model}");
    }
    assert!(tv_bound_rows("nope", 0.9, 1, 10, 10, 0).is_err());
}

#[test]
fn survival_stays_below_bound() {
    let rows = ar1_survival_rows(0.5, 2.0, -2.0, 5000, 60, 3).unwrap();
    assert_eq!(rows.len(), 122);
    assert_eq!(rows[0], 1.0);
    for p in rows.chunks(2) {
        assert!(p[0] <= p[1]);
    }
    assert!(ar1_survival_rows(1.2, 0.0, 0.0, 10, 5, 0).is_err());
    assert!(ar1_survival_rows(0.5, 0.0, 0.0, 0, 5, 0).is_err());
}

#[test]
fn curves_are_reproducible() {
    assert_eq!(
        fishy_curve_rows(0.5, 1.0, -1.0, 1.0, 3, 50, 9).unwrap(),
        fishy_curve_rows(0.5, 1.0, -1.0, 1.0, 3, 50, 9).unwrap()
    );
}
