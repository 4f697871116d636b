//! Fixed-point operator, weighted norm, residuals and the crossed iteration.

use proptest::prelude::*;
use sirwave::iteration::*;
use sirwave::model::{pqm_constants, Component, SirParameters, WaveFrameParameters};
use sirwave::profiles::ProfileTriple;
use sirwave::{Execution, Grid, ProfileFunction};

fn demo() -> (SirParameters, WaveFrameParameters) {
    let p = SirParameters {
        d_s: 1.0,
        d_i: 1.0,
        d_r: 1.0,
        b: 3.0,
        mu1: 1.0,
        mu2: 1.1,
        mu3: 1.05,
        gamma: 0.1,
        alpha: 0.0,
        beta: 0.6,
        tau: [0.01; 4],
        c: 4.091454509095756,
    };
    let mut wp = WaveFrameParameters::new(&p, [0.13, 1.7, 0.115]).unwrap();
    wp.beta_shift = pqm_constants(&p, &wp, 1).unwrap();
    (p, wp)
}

fn operator(exec: Execution) -> (SirParameters, WaveFrameParameters, WaveOperator) {
    let (p, wp) = demo();
    let op = WaveOperator::new(&p, &wp, Grid::centered(40.0, 0.2), exec).unwrap();
    (p, wp, op)
}

fn front(grid: Grid, k: [f64; 3], at: f64) -> ProfileTriple {
    let f = |i: usize| ProfileFunction::from_fn(grid, |t| k[i] / (1.0 + (-(t - at)).exp()), 0.0, k[i]);
    ProfileTriple {
        phi: f(0),
        psi: f(1),
        chi: f(2),
    }
}

#[test]
fn decay_norm_examples() {
    let g = Grid::centered(5.0, 0.5);
    let x = ProfileTriple::constant(g, [3.0, 4.0, 0.0]);
    assert_eq!(decay_norm(&x, 1.0), 5.0);
    assert_eq!(decay_norm(&x, 0.0), 5.0);
    // A bump at t = 2 is discounted by e^{-2 mu}.
    let mut y = ProfileTriple::constant(g, [0.0; 3]);
    y.psi.values[14] = 1.0;
    assert_eq!(g.point(14), 2.0);
    assert!((decay_norm(&y, 0.5) - (-1.0f64).exp()).abs() < 1e-15);
    assert_eq!(decay_norm(&difference(&x, &x), 1.0), 0.0);
    assert_eq!(midpoint(&x, &y).psi.values[14], 2.5);
}

#[test]
fn equilibria_are_fixed_points() {
    let (_, wp, op) = operator(Execution::Sequential);
    let zero = ProfileTriple::constant(op.grid, [0.0; 3]);
    let out = op.apply(&zero, &zero).unwrap();
    assert_eq!(decay_norm(&out, 0.0), 0.0);
    let k = ProfileTriple::constant(op.grid, wp.k);
    let out = op.apply(&k, &k).unwrap();
    let err = decay_norm(&difference(&out, &k), 0.0);
    assert!(err < 1e-8, "{err}");
    assert!((out.psi.right - wp.k[1]).abs() < 1e-8);
}

#[test]
fn operator_commutes_with_grid_translation() {
    let (_, wp, op) = operator(Execution::Sequential);
    let x = front(op.grid, wp.k, 0.0);
    let shift = 10;
    let y = front(op.grid, wp.k, shift as f64 * op.grid.dx);
    let fx = op.apply(&x, &x).unwrap();
    let fy = op.apply(&y, &y).unwrap();
    // Compare away from the window ends, where the tail constants differ.
    for c in Component::ALL {
        let (a, b) = (fx.get(c), fy.get(c));
        for j in 60..op.grid.len - 60 {
            assert!((a.values[j] - b.values[j + shift]).abs() < 1e-6, "{c:?} {j}");
        }
    }
}

#[test]
fn residual_vanishes_on_equilibria() {
    let (p, wp) = demo();
    let g = Grid::centered(10.0, 0.1);
    assert_eq!(wave_residual(&p, &ProfileTriple::constant(g, [0.0; 3])), [0.0; 3]);
    let r = wave_residual(&p, &ProfileTriple::constant(g, wp.k));
    assert!(r.iter().all(|v| *v < 1e-12), "{r:?}");
    // A generic front is not a solution.
    assert!(wave_residual(&p, &front(g, wp.k, 0.0)).iter().any(|v| *v > 1e-3));
}

#[test]
fn asymptotics_controls() {
    let (_, wp) = demo();
    let g = Grid::centered(60.0, 0.1);
    let good = asymptotics_check(&front(g, wp.k, 0.0), wp.k);
    assert!(good.worst() < 1e-20);
    let bad = asymptotics_check(&ProfileTriple::constant(g, wp.k), wp.k);
    assert!((bad.worst() - wp.k[1]).abs() < 1e-15);
}

#[test]
fn equal_bounds_stop_on_the_gap() {
    let (_, wp, op) = operator(Execution::Sequential);
    let k = ProfileTriple::constant(op.grid, wp.k);
    let res = cross_iterate(&op, &k, &k, &IterationOptions::default()).unwrap();
    assert_eq!(res.stop, Stop::Gap);
    assert_eq!(res.trace.len(), 1);
    assert!(res.monotone && res.converged());
}

#[test]
fn budget_and_trace_are_reported() {
    let (_, wp, op) = operator(Execution::Sequential);
    let upper = front(op.grid, wp.k, -5.0);
    let lower = front(op.grid, wp.k.map(|v| 0.5 * v), 5.0);
    let opts = IterationOptions {
        max_iter: 3,
        tol: 1e-14,
        ..Default::default()
    };
    let res = cross_iterate(&op, &upper, &lower, &opts).unwrap();
    assert_eq!(res.stop, Stop::Budget);
    assert_eq!(res.trace.iter().map(|s| s.iterate).collect::<Vec<_>>(), [1, 2, 3]);
    assert_eq!(res.monotone, res.trace.iter().all(|s| s.monotone(opts.mono_tol)));
}

#[test]
fn parallel_and_sequential_agree_bitwise() {
    let (_, wp, seq) = operator(Execution::Sequential);
    let (_, _, par) = operator(Execution::Parallel);
    let x = front(seq.grid, wp.k, 1.0);
    let y = front(seq.grid, wp.k.map(|v| 0.7 * v), 3.0);
    assert_eq!(seq.apply(&x, &y).unwrap(), par.apply(&x, &y).unwrap());
    let opts = IterationOptions {
        max_iter: 2,
        ..Default::default()
    };
    assert_eq!(
        cross_iterate(&seq, &x, &y, &opts).unwrap(),
        cross_iterate(&par, &x, &y, &opts).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shifted_nonlinearity_is_nonnegative_in_the_box(
        u in proptest::array::uniform3(0.0f64..1.0),
        v in proptest::array::uniform3(0.0f64..1.0),
    ) {
        let (p, wp) = demo();
        let g = Grid::centered(1.0, 0.5);
        let own = ProfileTriple::constant(g, std::array::from_fn(|i| u[i] * wp.m[i]));
        let cross = ProfileTriple::constant(g, std::array::from_fn(|i| v[i] * wp.m[i]));
        let op = WaveOperator::new(&p, &wp, g, Execution::Sequential).unwrap();
        for c in Component::ALL {
            let h = op.apply_h(c, &own, &cross);
            prop_assert!(h.values.iter().all(|&x| x >= 0.0), "{c:?}: {:?}", h.values);
        }
    }
}
