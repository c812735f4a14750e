use mortensen::kalman::{kalman_estimate, riccati_solve, LinearModel};
use mortensen::{Mat, ObservationPath, TimeGrid};
use proptest::prelude::*;

fn mat(rows: Vec<Vec<f64>>) -> Mat {
    Mat::from_rows(rows).unwrap()
}

fn model2(a: [f64; 4], p0: [f64; 3]) -> LinearModel {
    // p0 = L L^T with L lower triangular keeps the prior covariance positive definite
    let (l11, l21, l22) = (p0[0], p0[1], p0[2]);
    let p = vec![vec![l11 * l11, l11 * l21], vec![l11 * l21, l21 * l21 + l22 * l22]];
    LinearModel::new(
        mat(vec![vec![a[0], a[1]], vec![a[2], a[3]]]),
        Mat::identity(2),
        Mat::identity(2),
        mat(p),
        vec![0.0, 0.0],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn riccati_stays_symmetric(
        a in prop::array::uniform4(-2.0..2.0f64), l11 in 0.2..2.0f64, l21 in -1.0..1.0f64, l22 in 0.2..2.0f64,
    ) {
        let path = riccati_solve(&model2(a, [l11, l21, l22]), 1.0, 1e-3).unwrap();
        for k in 0..path.len() {
            let p = path.at(k);
            prop_assert!((p - p.transpose()).abs().max() <= 1e-12);
            prop_assert!(p.clone().cholesky().is_some(), "P lost definiteness at step {}", k);
        }
    }

    // the cost-to-come is a quadratic form centred at the estimate
    #[test]
    fn cost_to_come_is_minimized_at_the_estimate(
        a in prop::array::uniform4(-1.0..1.0f64), y1 in -2.0..2.0f64, y2 in -2.0..2.0f64,
        dx in -1.0..1.0f64, dy in -1.0..1.0f64,
    ) {
        let m = model2(a, [1.0, 0.0, 1.0]);
        let obs = ObservationPath::constant(TimeGrid::span(0.0, 0.5, 1e-2).unwrap(), &[y1, y2]);
        let kp = kalman_estimate(&m, &obs, 1e-3).unwrap();
        let k = kp.index_of(0.5).unwrap();
        let xh = kp.estimate(k).to_vec();
        let at = kp.cost_to_come(k, &xh).unwrap();
        prop_assert!((at - kp.misfit_integral(k)).abs() <= 1e-12);
        let off = kp.cost_to_come(k, &[xh[0] + dx, xh[1] + dy]).unwrap();
        prop_assert!(off >= at);
    }
}

// scalar Riccati dP/dt = 2aP + 1 - P^2 has the closed form
// u = (P - r+)/(P - r-) = u0 exp(-(r+ - r-) t)
#[test]
fn scalar_riccati_matches_the_closed_form() {
    for (a, p0) in [(-0.5, 0.5), (0.0, 2.0), (1.5, 0.1), (-2.0, 4.0)] {
        let m = LinearModel::new(mat(vec![vec![a]]), Mat::identity(1), Mat::identity(1), mat(vec![vec![p0]]), vec![0.0]).unwrap();
        let path = riccati_solve(&m, 2.0, 1e-3).unwrap();
        let s = (a * a + 1.0f64).sqrt();
        let (rp, rm) = (a + s, a - s);
        let u0 = (p0 - rp) / (p0 - rm);
        for k in (0..path.len()).step_by(100) {
            let u = u0 * (-(rp - rm) * k as f64 * 1e-3).exp();
            let exact = (rp - rm * u) / (1.0 - u);
            let got = path.at(k)[(0, 0)];
            assert!((got - exact).abs() <= 1e-10 * exact.max(1.0), "a {a}, p0 {p0}, k {k}: {got} vs {exact}");
        }
    }
}
