use mortensen::dynamics::{
    holder_quotient, integrate_penalized, integrate_reflected, max_dist_to_domain, reflected_sde_terminal_states,
};
use mortensen::stats::ks_uniform;
use mortensen::{DisturbancePath, Domain, Drift, Mat, Observation, TimeGrid, VectorFieldSpec};
use proptest::prelude::*;

fn scalar(drift: Drift) -> VectorFieldSpec {
    VectorFieldSpec::scalar(drift, Observation::Identity { dim: 1 }).unwrap()
}

fn constant(b: f64) -> VectorFieldSpec {
    scalar(Drift::Constant { value: vec![b] })
}

fn linear(a: f64, c: f64) -> VectorFieldSpec {
    scalar(Drift::Linear {
        matrix: Mat::from_rows(vec![vec![a]]).unwrap(),
        offset: Some(vec![c]),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflected_paths_stay_in_the_closed_domain(
        b in -3.0..3.0f64, x0 in 0.0..=1.0f64, std in 0.1..5.0f64, seed in 0u64..1000,
    ) {
        let g = Domain::interval(0.0, 1.0).unwrap();
        let w = DisturbancePath::gaussian(TimeGrid::span(0.0, 1.0, 1e-2).unwrap(), 1, std, 1, seed, 0);
        let tr = integrate_reflected(&constant(b), &g, &[x0], &w).unwrap();
        prop_assert!(max_dist_to_domain(&tr, &g) == 0.0);
    }

    // |x(r) - x(s)| <= sup|b| |r - s| + ||w||_2 |r - s|^{1/2}, since each
    // projected step moves at most dt |b + w|.
    #[test]
    fn holder_quotient_respects_the_energy_bound(
        a in -2.0..0.0f64, c in -1.0..1.0f64, x0 in 0.0..=1.0f64, std in 0.1..5.0f64, hold in 1usize..10, seed in 0u64..1000,
    ) {
        let g = Domain::interval(0.0, 1.0).unwrap();
        let vf = linear(a, c);
        let t = 1.0;
        let w = DisturbancePath::gaussian(TimeGrid::span(0.0, t, 1e-2).unwrap(), 1, std, hold, seed, 0);
        let tr = integrate_reflected(&vf, &g, &[x0], &w).unwrap();
        let bmax = c.abs().max((a + c).abs());
        let bound = bmax * t.sqrt() + w.l2_norm();
        prop_assert!(holder_quotient(&tr) <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn ball_paths_stay_in_the_ball(rate in -2.0..2.0f64, r0 in 0.0..1.0f64, th in 0.0..6.28f64, seed in 0u64..1000) {
        let g = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let vf = VectorFieldSpec::new(
            Drift::Radial { strength: rate, center: vec![0.0, 0.0], core: 0.1 },
            mortensen::Diffusion::Identity { dim: 2 },
            Observation::Identity { dim: 2 },
        ).unwrap();
        let w = DisturbancePath::gaussian(TimeGrid::span(0.0, 0.5, 1e-2).unwrap(), 2, 3.0, 1, seed, 0);
        let tr = integrate_reflected(&vf, &g, &[r0 * th.cos(), r0 * th.sin()], &w).unwrap();
        prop_assert!(max_dist_to_domain(&tr, &g) <= g.tol_boundary());
    }
}

#[test]
fn penalization_is_controlled_uniformly_in_kappa() {
    let g = Domain::interval(0.0, 1.0).unwrap();
    let vf = constant(1.0);
    let w = DisturbancePath::gaussian(TimeGrid::span(0.0, 1.0, 1e-3).unwrap(), 1, 2.0, 10, 5, 0);
    let mut scaled = Vec::new();
    let mut push_work = Vec::new();
    let mut sup_abs: f64 = 0.0;
    for kappa in [10.0, 1e2, 1e3, 1e4] {
        let tr = integrate_penalized(&vf, &g, &[0.5], &w, kappa).unwrap();
        scaled.push(max_dist_to_domain(&tr, &g) * kappa.sqrt());
        // integral of |f_kappa| = kappa dist, left-point rule on the stored grid
        push_work.push(tr.states().take(tr.len() - 1).map(|x| kappa * g.dist(x) * tr.grid.dt).sum::<f64>());
        sup_abs = tr.states().map(|x| x[0].abs()).fold(sup_abs, f64::max);
    }
    assert!(sup_abs < 2.0, "(i) sup |x^k| = {sup_abs}");
    let (lo, hi) = push_work.iter().fold((f64::MAX, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    assert!(hi / lo < 2.0, "(ii) penalty work {push_work:?}");
    assert!(scaled.iter().all(|s| *s <= scaled[0] * 1.5), "(iii) dist * k^1/2 {scaled:?}");
}

#[test]
fn reflected_euler_self_converges() {
    let g = Domain::interval(0.0, 1.0).unwrap();
    let vf = linear(-1.0, 2.0);
    let w = DisturbancePath::gaussian(TimeGrid::span(0.0, 1.0, 1e-2).unwrap(), 1, 3.0, 1, 11, 0);
    let paths: Vec<_> = [1, 2, 4, 8]
        .iter()
        .map(|&f| integrate_reflected(&vf, &g, &[0.3], &w.refine(f)).unwrap())
        .collect();
    let err: Vec<f64> = paths
        .windows(2)
        .map(|p| p[0].sup_distance(&p[1].subsample(2).unwrap()).unwrap())
        .collect();
    // O(dt^{1/2}) or better: each halving shrinks the gap by at least ~2^{-1/2}
    for e in err.windows(2) {
        assert!(e[1] <= e[0] * 0.75, "self-convergence gaps {err:?}");
    }
}

#[test]
fn reflected_brownian_motion_equilibrates_to_uniform() {
    let g = Domain::interval(0.0, 1.0).unwrap();
    let ends = reflected_sde_terminal_states(&constant(0.0), &g, &[0.1], 1.0, 17, TimeGrid::span(0.0, 2.0, 1e-3).unwrap(), 2000)
        .unwrap();
    let x: Vec<f64> = ends.iter().map(|v| v[0]).collect();
    let d = ks_uniform(&x, 0.0, 1.0);
    // 1% critical value 1.63 / sqrt(n)
    assert!(d < 1.63 / (x.len() as f64).sqrt(), "KS distance {d}");
}
