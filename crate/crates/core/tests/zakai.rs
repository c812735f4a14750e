use mortensen::cost::InitialCost;
use mortensen::grid::StateGrid;
use mortensen::zakai::{dual_solve, duality_gap, zakai_solve_psi, Probe};
use mortensen::{Domain, Drift, Mat, Observation, ObservationPath, TimeGrid, VectorFieldSpec};
use proptest::prelude::*;

fn spec(a: f64, c: f64, observation: Observation) -> VectorFieldSpec {
    VectorFieldSpec::scalar(
        Drift::Linear {
            matrix: Mat::from_rows(vec![vec![a]]).unwrap(),
            offset: Some(vec![c]),
        },
        observation,
    )
    .unwrap()
}

fn quad(center: f64, var: f64) -> InitialCost {
    InitialCost::quadratic(vec![center], Mat::from_rows(vec![vec![var]]).unwrap()).unwrap()
}

fn grid(cells: usize) -> StateGrid {
    StateGrid::new(Domain::interval(-1.0, 1.0).unwrap(), &[cells]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // zero-flux walls and no potential: the finite-volume step conserves mass
    #[test]
    fn mass_is_conserved_without_potential(
        a in -2.0..0.0f64, c in -1.0..1.0f64, eps in 0.02..0.5f64, m in -0.8..0.8f64, var in 0.1..1.0f64,
    ) {
        let times = TimeGrid::span(0.0, 0.5, 2e-3).unwrap();
        let obs = ObservationPath::constant(times, &[0.0]);
        let fd = zakai_solve_psi(&spec(a, c, Observation::Zero { dim: 1 }), &grid(101), &obs, &quad(m, var), eps, times).unwrap();
        let m0 = fd.log_mass(0);
        for k in 1..fd.rows() {
            prop_assert!((fd.log_mass(k) - m0).abs() <= 1e-10, "row {}: {} vs {}", k, fd.log_mass(k), m0);
        }
    }

    #[test]
    fn density_stays_positive_and_mass_decays(
        a in -2.0..0.0f64, c in -1.0..1.0f64, eps in 0.02..0.5f64, m in -0.8..0.8f64, ydot in -2.0..2.0f64,
    ) {
        let times = TimeGrid::span(0.0, 0.5, 2e-3).unwrap();
        let obs = ObservationPath::constant(times, &[ydot]);
        let fd = zakai_solve_psi(&spec(a, c, Observation::Identity { dim: 1 }), &grid(101), &obs, &quad(m, 0.5), eps, times).unwrap();
        for k in 0..fd.rows() {
            prop_assert!(fd.row(k).iter().all(|v| v.is_finite() && *v > 0.0));
            if k > 0 {
                prop_assert!(fd.log_mass(k) <= fd.log_mass(k - 1) + 1e-12);
            }
        }
    }
}

// slowest mode decays like exp(-(eps/2)(pi/2)^2 t)
#[test]
fn reflected_diffusion_flattens_to_uniform() {
    let times = TimeGrid::span(0.0, 20.0, 1e-2).unwrap();
    let obs = ObservationPath::constant(times, &[0.0]);
    let fd = zakai_solve_psi(&spec(0.0, 0.0, Observation::Zero { dim: 1 }), &grid(101), &obs, &quad(0.5, 0.5), 0.5, times).unwrap();
    let last = fd.rows() - 1;
    let (lo, hi) = fd.row(last).iter().fold((f64::MAX, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    assert!(hi / lo - 1.0 < 1e-3, "final row spread {lo}..{hi}");
}

#[test]
fn duality_gap_shrinks_under_refinement() {
    let vf = spec(-1.0, 0.2, Observation::Identity { dim: 1 });
    let phi = Probe::Quadratic { center: 0.3, weight: 1.0 };
    let gaps: Vec<f64> = [51, 101, 201]
        .iter()
        .map(|&n| {
            let times = TimeGrid::span(0.0, 0.5, 1e-3).unwrap();
            let obs = ObservationPath::constant(times, &[0.4]);
            let fd = zakai_solve_psi(&vf, &grid(n), &obs, &quad(-0.2, 0.5), 0.1, times).unwrap();
            let dual = dual_solve(&vf, &grid(n), &obs, &phi, 0.1, times).unwrap();
            duality_gap(&fd, &dual).unwrap()
        })
        .collect();
    // upwind advection makes the scheme first order in h
    assert!(gaps.windows(2).all(|w| w[1] <= 0.55 * w[0]), "duality gaps {gaps:?}");
}
