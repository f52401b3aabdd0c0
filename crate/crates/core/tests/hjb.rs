use hjreach::dynamics::ClockAugmentedPointMass;
use hjreach::hjb::{self, Clock, Stencil};
use hjreach::levelset::{combine_max, rect_avoidance, straight_road, target_box, TargetBox};
use hjreach::{
    Axis, ControlBounds, GridSpec, HjbProblem, LevelSetExpr, Mode, Motion, Obstacle, PointMass, ScalarField,
    SolveOptions,
};
use proptest::prelude::*;

const BOUNDS: ControlBounds = ControlBounds { a_min: -5.0, a_max: 5.0, w_max: 1.0 };

fn axes() -> Vec<Axis> {
    vec![
        Axis::new("x", -10.0, 10.0, 15),
        Axis::new("y", -4.0, 4.0, 9),
        Axis::new("psi", -1.0, 1.0, 5),
        Axis::new("v", 0.0, 20.0, 4),
    ]
}

fn obstacle(motion: Motion) -> Obstacle {
    Obstacle::new(hjreach::Shape::Rectangle { half: [1.0, 1.0] }, motion).unwrap()
}

fn constraint(obstacles: Vec<Obstacle>) -> LevelSetExpr {
    combine_max(straight_road(-3.5, 3.5).unwrap(), rect_avoidance([1.0, 0.5], obstacles).unwrap())
}

fn target() -> LevelSetExpr {
    target_box(&TargetBox { x_min: Some(6.0), yaw: 0.0, yaw_tol: 0.5, ..Default::default() }).unwrap()
}

fn problem(obstacles: Vec<Obstacle>, mode: Mode, stencil: Stencil, horizon: f64) -> HjbProblem<PointMass> {
    let grid = GridSpec::new(axes()).unwrap();
    let mut p = HjbProblem::new(grid, PointMass::new(BOUNDS), target(), constraint(obstacles), horizon);
    p.mode = mode;
    p.stencil = stencil;
    p
}

fn node_levels(p: &HjbProblem<PointMass>, expr: &LevelSetExpr, s: f64) -> Vec<f64> {
    let mut z = [0.0; 4];
    (0..p.grid.len())
        .map(|k| {
            p.grid.coords_of_flat(k, &mut z);
            expr.eval(&z, s)
        })
        .collect()
}

fn mode() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::Reach), Just(Mode::Capture)]
}

fn stencil() -> impl Strategy<Value = Stencil> {
    prop_oneof![Just(Stencil::Eno2), Just(Stencil::FirstOrder)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn initial_field_is_max_of_target_and_constraint(ox in -8.0..8.0f64, oy in -3.0..3.0f64, yaw in -1.0..1.0f64) {
        let p = problem(vec![obstacle(Motion::Fixed { center: [ox, oy], yaw })], Mode::Capture, Stencil::Eno2, 1.0);
        let v0 = hjb::initialize(&p).unwrap();
        let phi = node_levels(&p, &p.target, 0.0);
        let g = node_levels(&p, &p.constraint, 0.0);
        for k in 0..v0.values().len() {
            prop_assert_eq!(v0.values()[k], phi[k].max(g[k]));
        }
    }

    #[test]
    fn value_dominates_obstacle_and_capture_is_non_increasing(
        ox in -8.0..8.0f64,
        oy in -3.0..3.0f64,
        mode in mode(),
        stencil in stencil(),
    ) {
        let p = problem(vec![obstacle(Motion::Fixed { center: [ox, oy], yaw: 0.0 })], mode, stencil, 1.0);
        let g = node_levels(&p, &p.constraint, 0.0);
        let dt = p.cfl_limit().unwrap();
        let mut v = hjb::initialize(&p).unwrap();
        for _ in 0..20 {
            let next = hjb::step(&p, &v, dt, 0.0).unwrap();
            for ((n, old), gk) in next.values().iter().zip(v.values()).zip(&g) {
                prop_assert!(n >= gk);
                if mode == Mode::Capture {
                    prop_assert!(*n <= old + 1e-12);
                }
            }
            v = next;
        }
    }

    #[test]
    fn moving_obstacles_stay_dominated(vx in -20.0..20.0f64, mode in mode()) {
        let p = problem(vec![obstacle(Motion::Linear { start: [-5.0, 0.0], velocity: [vx, 0.0] })], mode, Stencil::Eno2, 0.5);
        let ev = hjb::solve(&p, &SolveOptions { snapshot_times: vec![0.1, 0.2, 0.3, 0.4], ..Default::default() }).unwrap();
        for snap in &ev.snapshots {
            // Reverse clock: elapsed t samples the obstacle at T - t.
            let g = node_levels(&p, &p.constraint, p.horizon - snap.time());
            for (s, gk) in snap.values().iter().zip(&g) {
                prop_assert!(s >= gk);
            }
        }
    }

    /// Raising one input value never lowers an interior output value. The
    /// linear ghost extrapolation on boundary faces is not monotone.
    #[test]
    fn first_order_scheme_is_monotone(node in 0usize..2700, bump in 0.01..5.0f64, mode in mode()) {
        let p = problem(vec![obstacle(Motion::Fixed { center: [0.0, 1.0], yaw: 0.3 })], mode, Stencil::FirstOrder, 1.0);
        let dt = p.cfl_limit().unwrap();
        let mut v = hjb::initialize(&p).unwrap();
        for _ in 0..5 {
            v = hjb::step(&p, &v, dt, 0.0).unwrap();
        }
        let mut raised = v.values().to_vec();
        raised[node] += bump;
        let raised = ScalarField::new(p.grid.clone(), raised, v.time()).unwrap();
        let a = hjb::step(&p, &v, dt, 0.0).unwrap();
        let b = hjb::step(&p, &raised, dt, 0.0).unwrap();
        let mut idx = [0; 4];
        for k in 0..a.values().len() {
            p.grid.unflatten(k, &mut idx);
            let interior = idx.iter().zip(p.grid.counts()).all(|(&i, n)| i > 0 && i + 1 < n);
            if interior {
                prop_assert!(b.values()[k] >= a.values()[k] - 1e-12, "node {k} dropped after raising {node}");
            }
        }
    }
}

#[test]
fn capture_masks_are_nested() {
    let p = problem(vec![obstacle(Motion::Fixed { center: [0.0, -1.5], yaw: 0.0 })], Mode::Capture, Stencil::Eno2, 1.0);
    let ev = hjb::solve(&p, &SolveOptions { snapshot_times: vec![0.25, 0.5, 0.75], ..Default::default() }).unwrap();
    assert_eq!(ev.snapshots.len(), 5);
    let masks: Vec<Vec<bool>> = ev.snapshots.iter().map(hjb::reachable_set).collect();
    for pair in masks.windows(2) {
        assert!(pair[0].iter().zip(&pair[1]).all(|(a, b)| !a || *b));
    }
    assert!(masks[4].iter().filter(|m| **m).count() > masks[0].iter().filter(|m| **m).count());
}

#[test]
fn frozen_motions_reproduce_the_static_solve() {
    let moving = problem(
        vec![obstacle(Motion::Linear { start: [0.0, -1.5], velocity: [0.0, 0.0] })],
        Mode::Capture,
        Stencil::Eno2,
        1.0,
    );
    let fixed =
        problem(vec![obstacle(Motion::Fixed { center: [0.0, -1.5], yaw: 0.0 })], Mode::Capture, Stencil::Eno2, 1.0);
    let opts = SolveOptions { track_min_time: true, ..Default::default() };
    let a = hjb::solve_time_dependent(&moving, &opts).unwrap();
    let b = hjb::solve(&fixed, &opts).unwrap();
    let bits = |f: &ScalarField| f.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(a.final_snapshot()), bits(b.final_snapshot()));
    assert_eq!(bits(a.min_time.unwrap().field()), bits(b.min_time.unwrap().field()));
}

fn augmented(p: &HjbProblem<PointMass>, clock_nodes: usize) -> HjbProblem<ClockAugmentedPointMass> {
    let mut axes = axes();
    axes.push(Axis::new("t", 0.0, p.horizon, clock_nodes));
    let mut q = HjbProblem::new(
        GridSpec::new(axes).unwrap(),
        ClockAugmentedPointMass { bounds: p.dynamics.bounds },
        p.target.clone(),
        p.constraint.clone(),
        p.horizon,
    );
    q.mode = p.mode;
    q.clock = Clock::Augmented;
    q
}

/// With a static constraint the value is constant along the clock axis, so
/// every clock slice follows the slice-clock run step for step.
#[test]
fn augmented_clock_matches_slice_clock_for_static_constraints() {
    let p = problem(vec![obstacle(Motion::Fixed { center: [0.0, -1.5], yaw: 0.0 })], Mode::Capture, Stencil::Eno2, 0.5);
    let q = augmented(&p, 6);
    let dt = q.cfl_limit().unwrap();
    let opts = SolveOptions { dt: Some(dt), ..Default::default() };
    let a = hjb::solve(&p, &opts).unwrap();
    let b = hjb::solve(&q, &opts).unwrap();
    let fa = a.final_snapshot();
    for c in 0..6 {
        let slice = hjb::slice_last_axis(b.final_snapshot(), c).unwrap();
        for (x, y) in fa.values().iter().zip(slice.values()) {
            assert!((x - y).abs() <= 1e-12, "clock node {c}: {x} vs {y}");
        }
    }
}

/// Both clocks approximate the same capture basin for a moving obstacle.
#[test]
fn augmented_and_slice_clocks_agree_on_moving_obstacles() {
    let p = problem(
        vec![obstacle(Motion::Linear { start: [-6.0, -1.5], velocity: [8.0, 0.0] })],
        Mode::Capture,
        Stencil::Eno2,
        1.0,
    );
    let q = augmented(&p, 11);
    let a = hjb::solve(&p, &SolveOptions::default()).unwrap();
    let b = hjb::solve(&q, &SolveOptions::default()).unwrap();
    let start = hjb::slice_last_axis(b.final_snapshot(), 0).unwrap();
    let ma = hjb::reachable_set(a.final_snapshot());
    let mb = hjb::reachable_set(&start);
    let agree = ma.iter().zip(&mb).filter(|(x, y)| x == y).count();
    let frac = agree as f64 / ma.len() as f64;
    assert!(frac > 0.95, "sign agreement {frac}");
    assert!(ma.iter().any(|m| *m) && ma.iter().any(|m| !*m));
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let p = problem(
        vec![obstacle(Motion::Linear { start: [-6.0, -1.5], velocity: [8.0, 0.0] })],
        Mode::Capture,
        Stencil::Eno2,
        0.5,
    );
    let opts = SolveOptions { track_min_time: true, ..Default::default() };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| hjb::solve(&p, &opts).unwrap())
    };
    let (a, b) = (run(1), run(3));
    let bits = |f: &ScalarField| f.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(a.final_snapshot()), bits(b.final_snapshot()));
    assert_eq!(bits(a.min_time.unwrap().field()), bits(b.min_time.unwrap().field()));
}
