use mortensen::cost::{CostSpec, InitialCost};
use mortensen::dp::{dp_solve, extract_observer, ControlLattice, DpMode, DpOptions, DpProblem};
use mortensen::grid::{StateGrid, ValueField};
use mortensen::{Domain, Drift, Mat, Observation, ObservationPath, TimeGrid, VectorFieldSpec};
use proptest::prelude::*;

fn attract() -> VectorFieldSpec {
    VectorFieldSpec::scalar(
        Drift::Linear {
            matrix: Mat::from_rows(vec![vec![-1.0]]).unwrap(),
            offset: Some(vec![0.5]),
        },
        Observation::Identity { dim: 1 },
    )
    .unwrap()
}

fn quad(center: f64, var: f64) -> InitialCost {
    InitialCost::quadratic(vec![center], Mat::from_rows(vec![vec![var]]).unwrap()).unwrap()
}

fn problem(nodes: usize, psi: InitialCost, ydot: f64, mode: DpMode) -> DpProblem {
    let times = TimeGrid::span(0.0, 0.5, 1e-2).unwrap();
    let obs = ObservationPath::constant(times, &[ydot]);
    DpProblem::new(
        attract(),
        StateGrid::new(Domain::interval(0.0, 0.5).unwrap(), &[nodes]).unwrap(),
        CostSpec::new(psi, obs),
        mode,
        ControlLattice::new(1, 21, 3.0).unwrap(),
        times,
    )
    .unwrap()
}

fn inside_rows(f: &ValueField) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..f.rows()).flat_map(move |k| (0..f.grid.len()).filter(|&i| f.grid.inside(i)).map(move |i| (k, i)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // larger initial cost, same transitions: never a smaller value
    #[test]
    fn value_is_monotone_in_the_initial_cost(
        c in 0.0..0.5f64, var in 0.05..1.0f64, shrink in 0.2..1.0f64, ydot in -1.0..1.0f64,
    ) {
        let lo = dp_solve(&problem(41, quad(c, var), ydot, DpMode::Constrained)).unwrap();
        let hi = dp_solve(&problem(41, quad(c, var * shrink), ydot, DpMode::Constrained)).unwrap();
        for (k, i) in inside_rows(&lo) {
            prop_assert!(hi.value(k, i) >= lo.value(k, i) - 1e-12);
        }
    }

    // with b.n <= 0 the projection never acts, so the projected and the
    // hard-constrained recursions agree
    #[test]
    fn inward_drift_reduces_to_state_constraints(c in 0.0..0.5f64, var in 0.05..1.0f64, ydot in -1.0..1.0f64) {
        let p = problem(41, quad(c, var), ydot, DpMode::Constrained);
        let hard = p.clone().with_options(DpOptions { sticky_sources: false, ..DpOptions::default() });
        let d = dp_solve(&p).unwrap().sup_diff(&dp_solve(&hard).unwrap()).unwrap();
        prop_assert!(d <= 1e-12, "projected vs masked {}", d);
    }
}

fn lipschitz(f: &ValueField) -> f64 {
    let h = f.grid.spacing(0);
    (0..f.rows())
        .flat_map(|k| f.row(k).windows(2).map(|w| (w[1] - w[0]).abs() / h).collect::<Vec<_>>())
        .fold(0.0, f64::max)
}

#[test]
fn discrete_lipschitz_constant_is_stable_under_refinement() {
    let l: Vec<f64> = [26, 51, 101]
        .iter()
        .map(|&n| lipschitz(&dp_solve(&problem(n, quad(0.4, 0.25), 0.2, DpMode::Constrained)).unwrap()))
        .collect();
    assert!(l.windows(2).all(|w| w[1] <= 1.2 * w[0]), "Lipschitz constants {l:?}");
}

#[test]
fn penalized_observer_approaches_the_constrained_one() {
    let base = dp_solve(&problem(51, quad(0.5, 0.25), 0.6, DpMode::Constrained)).unwrap();
    let last = base.rows() - 1;
    let target = extract_observer(&base, last).unwrap();
    let h = base.grid.spacing(0);
    let mut gaps = Vec::new();
    for kappa in [10.0, 100.0, 1000.0] {
        let f = dp_solve(&problem(51, quad(0.5, 0.25), 0.6, DpMode::Penalized { kappa })).unwrap();
        let ob = extract_observer(&f, last).unwrap();
        let d = target.ties.iter().map(|&i| (base.grid.node(i)[0] - ob.point[0]).abs()).fold(f64::INFINITY, f64::min);
        gaps.push(d);
    }
    assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12), "observer gaps {gaps:?}");
    assert!(*gaps.last().unwrap() <= 2.0 * h, "observer gaps {gaps:?}");
}
