//! Delayed-diffusion simulation: equilibria, zero-delay reference, step
//! sizes, front tracking and the spreading speed.

use sirwave::model::{wave_limits, SirParameters};
use sirwave::pdesim::*;
use sirwave::profiles::ProfileTriple;
use sirwave::{Error, Execution, Grid, ProfileFunction};

fn demo() -> SirParameters {
    SirParameters {
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
    }
}

const SEQ: Execution = Execution::Sequential;

#[test]
fn uniform_equilibria_stay_put() {
    let p = demo();
    let dx = stable_dx(&p);
    let grid = Grid::centered(10.0, dx);
    let dt = stable_dt(&p, dx);
    let k = wave_limits(&p).unwrap();
    for v in [[0.0; 3], k] {
        let mut st = PdeState::uniform(grid, v, &p, dt).unwrap();
        for _ in 0..200 {
            step(&mut st, &p, dt, SEQ).unwrap();
        }
        for i in 0..3 {
            assert!(st.fields[i].iter().all(|x| (x - v[i]).abs() < 1e-12), "{v:?}");
        }
        assert_eq!(st.clips, 0);
    }
}

#[test]
fn zero_delay_matches_reference_step() {
    let p = SirParameters {
        tau: [0.0; 4],
        ..demo()
    };
    let grid = Grid::centered(5.0, 0.1);
    let dt = 0.002;
    let fields = [0usize, 1, 2].map(|i| {
        (0..grid.len)
            .map(|j| 0.1 * (i + 1) as f64 * (1.0 + (grid.point(j) + i as f64).tanh()))
            .collect::<Vec<_>>()
    });
    let mut st = PdeState::new(grid, fields.clone(), &p, dt).unwrap();
    let mut reference = fields;
    for _ in 0..50 {
        step(&mut st, &p, dt, SEQ).unwrap();
        reference = reference_step_zero_delay(&p, grid, &reference, dt);
    }
    for i in 0..3 {
        let err = st.fields[i]
            .iter()
            .zip(&reference[i])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{i}: {err}");
    }
}

#[test]
fn mismatched_step_is_rejected() {
    let p = demo();
    let grid = Grid::centered(2.0, 0.5);
    let mut st = PdeState::uniform(grid, [0.0; 3], &p, 0.001).unwrap();
    assert!(matches!(step(&mut st, &p, 0.002, SEQ), Err(Error::HistoryUnderflow { .. })));
    assert!(PdeState::uniform(grid, [0.0; 3], &p, 0.0).is_err());
    assert!(PdeState::new(grid, [vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]], &p, 0.001).is_err());
}

#[test]
fn step_sizes_for_the_demo() {
    let p = demo();
    let dx = stable_dx(&p);
    assert!((dx - 1.5 * (0.08 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
    let dt = stable_dt(&p, dx);
    assert!(dt <= 0.4 * dx * dx);
    assert!((0.01 / dt - (0.01 / dt).round()).abs() < 1e-9);
}

/// Highest-frequency perturbation of the endemic state.
fn checkerboard(p: &SirParameters, dx: f64) -> (PdeState, [f64; 3]) {
    let grid = Grid::centered(8.0, dx);
    let k = wave_limits(p).unwrap();
    let dt = stable_dt(p, dx);
    let fields = [0, 1, 2].map(|i| {
        (0..grid.len)
            .map(|j| k[i] + if j % 2 == 0 { 1e-3 } else { -1e-3 })
            .collect()
    });
    (PdeState::new(grid, fields, p, dt).unwrap(), k)
}

#[test]
fn fine_grids_excite_the_delay_instability() {
    let p = demo();
    let (mut st, _) = checkerboard(&p, 0.25 * stable_dx(&p));
    let r = simulate(&mut st, &p, 3.0, 1000, SEQ);
    assert!(matches!(r, Err(Error::BlowUp { .. })), "{r:?}");

    let (mut st, k) = checkerboard(&p, stable_dx(&p));
    simulate(&mut st, &p, 3.0, 1000, SEQ).unwrap();
    let dev = (0..3)
        .flat_map(|i| st.fields[i].iter().map(move |x| (i, *x)))
        .map(|(i, x)| (x - k[i]).abs())
        .fold(0.0, f64::max);
    assert!(dev < 1e-3, "{dev}");
}

fn ramp_trajectory(speed: f64) -> Trajectory {
    let grid = Grid::centered(50.0, 0.1);
    let times: Vec<f64> = (0..=20).map(|j| 0.5 * j as f64).collect();
    let snapshots = times
        .iter()
        .map(|t| {
            let i = (0..grid.len)
                .map(|j| (0.5 + 0.25 * (grid.point(j) + speed * t)).clamp(0.0, 1.0))
                .collect();
            [vec![0.0; grid.len], i, vec![0.0; grid.len]]
        })
        .collect();
    Trajectory {
        grid,
        times,
        snapshots,
        clips: 0,
    }
}

#[test]
fn front_speed_of_a_translating_ramp() {
    let v = front_speed(&ramp_trajectory(1.3), 0.5, 1.0).unwrap();
    assert!((v - 1.3).abs() < 1e-6, "{v}");
    assert!(matches!(front_speed(&ramp_trajectory(0.0), 0.5, 1.0), Err(Error::NoFront(_))));
    assert!(matches!(front_speed(&ramp_trajectory(1.3), 2.0, 1.0), Err(Error::NoFront(_))));
}

#[test]
fn wave_comparison_detects_a_wrong_speed() {
    let traj = ramp_trajectory(1.3);
    let g = Grid::centered(100.0, 0.05);
    let ramp = ProfileFunction::from_fn(g, |t| (0.5 + 0.25 * t).clamp(0.0, 1.0), 0.0, 1.0);
    let wave = ProfileTriple::new(ProfileFunction::constant(g, 0.0), ramp, ProfileFunction::constant(g, 0.0)).unwrap();
    let right = compare_with_wave(&traj, &wave, 1.3, 1.0).unwrap();
    assert!(right.max_sup() < 1e-12, "{}", right.max_sup());
    let wrong = compare_with_wave(&traj, &wave, 0.65, 1.0).unwrap();
    assert!(wrong.max_sup() > 0.5);
    assert_eq!(wrong.sup[0], right.sup[0]);
}

#[test]
fn undelayed_front_spreads_at_the_linear_speed() {
    // Linear spreading speed of the infected equation: 2 sqrt(beta B / mu1 - mu2 - gamma).
    let p = SirParameters {
        tau: [0.0; 4],
        ..demo()
    };
    let spread = 2.0 * (p.beta * p.b / p.mu1 - p.mu2 - p.gamma).sqrt();
    assert!((spread - 1.5491933384829668).abs() < 1e-12);
    let dx = 0.25;
    let grid = Grid::centered(150.0, dx);
    let dt = 0.4 * dx * dx;
    let seed = (0..grid.len)
        .map(|j| if grid.point(j).abs() <= 1.0 { 0.1 } else { 0.0 })
        .collect();
    let mut st = PdeState::new(grid, [vec![0.0; grid.len], seed, vec![0.0; grid.len]], &p, dt).unwrap();
    let traj = simulate(&mut st, &p, 40.0, 80, Execution::Parallel).unwrap();
    let k2 = wave_limits(&p).unwrap()[1];
    let v = front_speed(&traj, 0.5, k2).unwrap();
    assert!((v - spread).abs() < 0.1 * spread, "{v} vs {spread}");
}
