use mortensen::cost::{CostSpec, InitialCost};
use mortensen::dp::{dp_solve, ControlLattice, DpMode, DpProblem};
use mortensen::grid::{StateGrid, ValueField};
use mortensen::hjb::{hjb_solve, BoundaryMode, Flux, HjbScheme};
use mortensen::{Domain, Drift, Mat, Observation, ObservationPath, TimeGrid, VectorFieldSpec};
use proptest::prelude::*;

fn linear(a: f64, c: f64) -> VectorFieldSpec {
    VectorFieldSpec::scalar(
        Drift::Linear {
            matrix: Mat::from_rows(vec![vec![a]]).unwrap(),
            offset: Some(vec![c]),
        },
        Observation::Identity { dim: 1 },
    )
    .unwrap()
}

fn quad(center: f64, var: f64) -> InitialCost {
    InitialCost::quadratic(vec![center], Mat::from_rows(vec![vec![var]]).unwrap()).unwrap()
}

fn solve(vf: &VectorFieldSpec, nodes: usize, psi: InitialCost, ydot: f64, scheme: HjbScheme) -> ValueField {
    let times = TimeGrid::span(0.0, 0.5, 1e-2).unwrap();
    let grid = StateGrid::new(Domain::interval(0.0, 0.5).unwrap(), &[nodes]).unwrap();
    let cost = CostSpec::new(psi, ObservationPath::constant(times, &[ydot]));
    hjb_solve(vf, &grid, &cost, &scheme, times).unwrap()
}

fn flux() -> impl Strategy<Value = Flux> {
    prop_oneof![Just(Flux::Godunov), Just(Flux::LaxFriedrichs)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn comparison_principle(
        c in 0.0..0.5f64, var in 0.05..1.0f64, shrink in 0.2..1.0f64, ydot in -1.0..1.0f64, f in flux(),
        sub in any::<bool>(),
    ) {
        let mode = if sub { BoundaryMode::Sub } else { BoundaryMode::Super };
        let s = HjbScheme::new(f, 0.9, mode).unwrap();
        let vf = linear(-1.0, 0.5);
        let lo = solve(&vf, 41, quad(c, var), ydot, s);
        let hi = solve(&vf, 41, quad(c, var * shrink), ydot, s);
        for k in 0..lo.rows() {
            for i in 0..lo.grid.len() {
                prop_assert!(hi.value(k, i) >= lo.value(k, i) - 1e-12);
            }
        }
    }

    // b.n <= 0 on both walls: the two boundary modes agree within the
    // scheme's own discretization error (measured against the DP)
    #[test]
    fn modes_agree_for_inward_drift(c in 0.0..0.5f64, var in 0.05..1.0f64, ydot in -1.0..1.0f64) {
        let vf = linear(-1.0, 0.5);
        let sub = solve(&vf, 41, quad(c, var), ydot, HjbScheme::default_for(1, BoundaryMode::Sub));
        let sup = solve(&vf, 41, quad(c, var), ydot, HjbScheme::default_for(1, BoundaryMode::Super));
        let p = DpProblem::new(
            vf,
            sub.grid.clone(),
            CostSpec::new(quad(c, var), ObservationPath::constant(sub.times, &[ydot])),
            DpMode::Constrained,
            ControlLattice::new(1, 21, 3.0).unwrap(),
            sub.times,
        ).unwrap();
        let err = dp_solve(&p).unwrap().sup_diff(&sub).unwrap();
        let gap = sub.sup_diff(&sup).unwrap();
        prop_assert!(gap <= err.max(1e-12), "modes differ by {} with discretization error {}", gap, err);
    }
}

#[test]
fn refinement_changes_the_solution_by_at_most_half_order() {
    let vf = linear(-1.0, 0.5);
    let fields: Vec<ValueField> = [26, 51, 101, 201]
        .iter()
        .map(|&n| solve(&vf, n, quad(0.4, 0.25), 0.2, HjbScheme::default_for(1, BoundaryMode::Sub)))
        .collect();
    // node j of a grid is node 2j of its refinement
    let gaps: Vec<f64> = fields
        .windows(2)
        .map(|w| {
            (0..w[0].rows())
                .flat_map(|k| (0..w[0].grid.len()).map(move |j| (k, j)))
                .map(|(k, j)| (w[0].value(k, j) - w[1].value(k, 2 * j)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    // sup gap <= C dx^{1/2}, and each halving shrinks it by at least 2^{-1/2}
    for (j, g) in gaps.iter().enumerate() {
        let dx = 0.5 / (25.0 * (1 << j) as f64);
        assert!(*g <= dx.sqrt(), "gaps {gaps:?}");
    }
    assert!(gaps.windows(2).all(|w| w[1] <= w[0] / 2f64.sqrt()), "gaps {gaps:?}");
}

#[test]
fn modes_separate_at_an_outflow_wall() {
    let vf = VectorFieldSpec::scalar(Drift::Constant { value: vec![1.0] }, Observation::Identity { dim: 1 }).unwrap();
    let sub = solve(&vf, 101, quad(0.25, 0.25), 0.25, HjbScheme::default_for(1, BoundaryMode::Sub));
    let sup = solve(&vf, 101, quad(0.25, 0.25), 0.25, HjbScheme::default_for(1, BoundaryMode::Super));
    let last = sub.rows() - 1;
    let wall = sub.grid.len() - 1;
    let gap = (sub.value(last, wall) - sup.value(last, wall)).abs();
    let interior = (sub.value(last, 10) - sup.value(last, 10)).abs();
    assert!(gap > 5.0 * interior.max(1e-6), "wall {gap}, interior {interior}");
}
