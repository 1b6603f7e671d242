mod common;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use common::{ahu, random_instance, zone};
use hvac_core::baseline::{
    brute_force_oracle, grid_cell_increment, solve_centralized_nonlinear, solve_centralized_relaxed,
    BaselineError, BruteForceLimits, CentralOptions, Method, NonlinearOptions,
};
use hvac_core::model::{build_discrete_dynamics, simulate_schedule};
use hvac_core::power::{schedule_cost, CostWeights};
use hvac_core::recover::validate_schedule;
use hvac_core::{Building, Exogenous};

/// Interior-point solve of the relaxed problem written from scratch:
/// per-stage envelope rows, pinned initial state, dynamics equalities,
/// flow and cap inequalities, and `u >= Y^3` as a power cone.
fn interior_point_relaxed(model: &Building, exo: &Exogenous) -> f64 {
    let n = model.n_zones();
    let h = model.horizon();
    let dynamics = build_discrete_dynamics(model, exo).unwrap();
    let w = CostWeights::new(model, exo);
    let var = |i: usize, t: usize, k: usize| 3 * (i * h + t) + k;
    let y_at = |t: usize| 3 * n * h + t;
    let u_at = |t: usize| 3 * n * h + h + t;
    let nv = 3 * n * h + 2 * h;

    let mut q = vec![0.0; nv];
    for t in 0..h {
        for i in 0..n {
            q[var(i, t, 2)] = w.x_weight[t];
        }
        q[y_at(t)] = w.y_linear[t];
        q[u_at(t)] = w.y_cubic[t];
    }

    let (mut ri, mut ci, mut vals, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut row = 0;
    let mut push = |r: usize, c: usize, v: f64| {
        ri.push(r);
        ci.push(c);
        vals.push(v);
    };
    // equalities
    for i in 0..n {
        for t in 0..h - 1 {
            push(row, var(i, t, 0), dynamics.a_self[i]);
            push(row, var(i, t, 2), dynamics.c_self[i]);
            push(row, var(i, t + 1, 0), -1.0);
            for &(j, a) in &dynamics.a_neighbor[i] {
                push(row, var(j, t, 0), a);
            }
            b.push(-dynamics.d_const[i][t]);
            row += 1;
        }
        push(row, var(i, 0, 0), 1.0);
        b.push(model.zone(i).t_init);
        row += 1;
    }
    let n_eq = row;
    // inequalities A x <= b
    for (i, z) in model.zones().iter().enumerate() {
        for t in 0..h {
            let tc = exo.t_supply[t];
            let (tl, tu) = if t == 0 { (z.t_init, z.t_init) } else { (z.t_min, z.t_max) };
            let (dl, du) = (tl - tc, tu - tc);
            let (ml, mu) = (z.m_min, z.m_max);
            let (tv, mv, xv) = (var(i, t, 0), var(i, t, 1), var(i, t, 2));
            if t > 0 {
                push(row, tv, 1.0);
                b.push(z.t_max);
                row += 1;
                push(row, tv, -1.0);
                b.push(-z.t_min);
                row += 1;
            }
            push(row, mv, 1.0);
            b.push(mu);
            row += 1;
            push(row, mv, -1.0);
            b.push(-ml);
            row += 1;
            // X >= ml d + dl m - ml dl, with d = T - tc
            for (mm, dd, lower) in [(ml, dl, true), (mu, du, true), (mu, dl, false), (ml, du, false)] {
                let s = if lower { -1.0 } else { 1.0 };
                push(row, xv, s);
                push(row, tv, -s * mm);
                push(row, mv, -s * dd);
                b.push(s * (-mm * dd) - s * mm * tc);
                row += 1;
            }
        }
    }
    for t in 0..h {
        for i in 0..n {
            push(row, var(i, t, 1), 1.0);
        }
        push(row, y_at(t), -1.0);
        b.push(0.0);
        row += 1;
        for i in 0..n {
            push(row, var(i, t, 1), 1.0);
        }
        b.push(model.ahu().m_total_max);
        row += 1;
        push(row, y_at(t), -1.0);
        b.push(0.0);
        row += 1;
    }
    let n_ineq = row - n_eq;
    let mut cones = vec![SupportedConeT::ZeroConeT(n_eq), SupportedConeT::NonnegativeConeT(n_ineq)];
    for t in 0..h {
        push(row, u_at(t), -1.0);
        b.push(0.0);
        b.push(1.0);
        push(row + 2, y_at(t), -1.0);
        b.push(0.0);
        row += 3;
        cones.push(SupportedConeT::PowerConeT(1.0 / 3.0));
    }
    let a = CscMatrix::new_from_triplets(row, nv, ri, ci, vals);
    let p = CscMatrix::zeros((nv, nv));
    let settings = DefaultSettings {
        verbose: false,
        tol_gap_abs: 1e-10,
        tol_gap_rel: 1e-10,
        tol_feas: 1e-10,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).unwrap();
    solver.solve();
    assert!(
        matches!(solver.solution.status, SolverStatus::Solved | SolverStatus::AlmostSolved),
        "{:?}",
        solver.solution.status
    );
    solver.solution.obj_val
}

#[test]
fn relaxed_matches_interior_point_oracle() {
    for (seed, n, h) in [(1, 1, 4), (2, 2, 6), (3, 3, 8), (4, 5, 12)] {
        let (model, exo) = random_instance(n, h, seed);
        let ours = solve_centralized_relaxed(&model, &exo, &CentralOptions::default()).unwrap();
        let oracle = interior_point_relaxed(&model, &exo);
        assert_eq!(ours.method, Method::CentralizedRelaxed);
        assert!(ours.schedule.is_none());
        assert!(
            (ours.objective - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()),
            "seed {seed}: {} vs {oracle}",
            ours.objective
        );
    }
}

#[test]
fn relaxed_lower_bounds_random_feasible_schedules() {
    use rand::{Rng, SeedableRng};
    let (model, exo) = random_instance(2, 6, 11);
    let lb = solve_centralized_relaxed(&model, &exo, &CentralOptions::default())
        .unwrap()
        .objective;
    let anchor = solve_centralized_nonlinear(&model, &exo, &NonlinearOptions::default())
        .unwrap()
        .schedule
        .unwrap()
        .flows;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut feasible = 0;
    for _ in 0..2000 {
        let flows: Vec<Vec<f64>> = anchor
            .iter()
            .map(|row| row.iter().map(|&m| (m + rng.random_range(-0.03..0.03)).clamp(0.0, 0.5)).collect())
            .collect();
        let temps = simulate_schedule(&model, &exo, &flows).unwrap();
        let ok = (0..2).all(|i| (1..6).all(|t| (24.0..=26.0).contains(&temps[i][t])));
        let cap_ok = (0..6).all(|t| flows[0][t] + flows[1][t] <= model.ahu().m_total_max);
        if ok && cap_ok {
            feasible += 1;
            assert!(schedule_cost(&model, &exo, &flows, &temps).total >= lb - 1e-7);
        }
    }
    assert!(feasible > 0, "sampler found no feasible schedule");
}

fn one_zone_two_stages(t0: f64, load: f64) -> (Building, Exogenous) {
    let model = Building::new(vec![zone(t0)], vec![], ahu(0.5), 1800.0, 2).unwrap();
    let exo = Exogenous {
        t_out: vec![31.0, 33.0],
        q_load: vec![vec![load, load]],
        price: vec![0.18, 0.26],
        t_supply: vec![15.0, 15.0],
    };
    (model, exo)
}

/// Relaxed optimum of a single zone over two stages by enumeration: stage 0
/// is exact (pinned temperature), stage 1 takes the lower envelope.
fn relaxed_grid_oracle(model: &Building, exo: &Exogenous, steps: usize) -> f64 {
    let z = model.zone(0);
    let dynamics = build_discrete_dynamics(model, exo).unwrap();
    let w = CostWeights::new(model, exo);
    let mut best = f64::INFINITY;
    for a in 0..=steps {
        let m0 = z.m_max * a as f64 / steps as f64;
        let x0 = m0 * (z.t_init - 15.0);
        let t1 = dynamics.next_temp(0, &[z.t_init], x0, 0);
        if !(z.t_min..=z.t_max).contains(&t1) {
            continue;
        }
        for c in 0..=steps {
            let m1 = z.m_max * c as f64 / steps as f64;
            let (dl, du) = (z.t_min - 15.0, z.t_max - 15.0);
            let d = t1 - 15.0;
            let x1 = (z.m_min * d + m1 * dl - z.m_min * dl).max(z.m_max * d + m1 * du - z.m_max * du);
            let cost = w.x_weight[0] * x0
                + w.y_linear[0] * m0
                + w.y_cubic[0] * m0.powi(3)
                + w.x_weight[1] * x1
                + w.y_linear[1] * m1
                + w.y_cubic[1] * m1.powi(3);
            best = best.min(cost);
        }
    }
    best
}

#[test]
fn one_zone_toy_relaxed_matches_grid_oracle() {
    let (model, exo) = one_zone_two_stages(27.5, 0.6);
    let ours = solve_centralized_relaxed(&model, &exo, &CentralOptions::default()).unwrap();
    let grid = relaxed_grid_oracle(&model, &exo, 4000);
    // one step of 0.5/4000 in flow moves the cost by well under 1e-4
    assert!(ours.objective <= grid + 1e-9, "{} vs {grid}", ours.objective);
    assert!(grid - ours.objective <= 1e-4, "{} vs {grid}", ours.objective);
}

#[test]
fn one_zone_toy_nonlinear_matches_brute_force() {
    let (model, exo) = one_zone_two_stages(27.5, 0.6);
    let res = 0.025;
    let brute = brute_force_oracle(&model, &exo, res, BruteForceLimits::default()).unwrap();
    let local = solve_centralized_nonlinear(&model, &exo, &NonlinearOptions::default()).unwrap();
    let cell = grid_cell_increment(&model, &exo, &brute.schedule.as_ref().unwrap().flows, res).unwrap();
    assert!(local.objective <= brute.objective + 1e-9);
    assert!(brute.objective - local.objective <= cell, "{} {} {cell}", brute.objective, local.objective);
}

#[test]
fn oracle_single_stage_hand_enumeration() {
    let model = Building::new(vec![zone(25.0)], vec![], ahu(1.0), 1800.0, 1).unwrap();
    let exo = Exogenous {
        t_out: vec![30.0],
        q_load: vec![vec![0.5]],
        price: vec![0.2],
        t_supply: vec![15.0],
    };
    let r = brute_force_oracle(&model, &exo, 0.25, BruteForceLimits::default()).unwrap();
    // costs of the three rollouts: price * hours * (cooling + fan)
    let cost = |m: f64| 0.2 * 0.5 * (1.012 * (0.2 * m * 15.0 + 0.8 * m * 10.0) + 0.08 * m * m * m);
    let hand = [cost(0.0), cost(0.25), cost(0.5)];
    assert_eq!(hand[0], 0.0);
    assert!(hand[1] > 0.0 && hand[2] > hand[1]);
    assert_eq!(r.objective, 0.0);
    assert_eq!(r.schedule.unwrap().flows, vec![vec![0.0]]);
    assert_eq!(r.diagnostics.evaluated, 3);
}

#[test]
fn oracle_two_stage_hand_enumeration() {
    let (model, exo) = one_zone_two_stages(28.0, 0.5);
    let r = brute_force_oracle(&model, &exo, 0.25, BruteForceLimits::default()).unwrap();
    let mut best = f64::INFINITY;
    for a in [0.0, 0.25, 0.5] {
        for c in [0.0, 0.25, 0.5] {
            let f = vec![vec![a, c]];
            let temps = simulate_schedule(&model, &exo, &f).unwrap();
            if (24.0..=26.0).contains(&temps[0][1]) {
                best = best.min(schedule_cost(&model, &exo, &f, &temps).total);
            }
        }
    }
    assert!(best.is_finite());
    assert!((r.objective - best).abs() <= 1e-12);
}

#[test]
fn oracle_reports_infeasible_at_resolution() {
    let mut z = zone(40.0);
    z.m_max = 0.01;
    let model = Building::new(vec![z], vec![], ahu(1.0), 1800.0, 2).unwrap();
    let exo = Exogenous {
        t_out: vec![35.0; 2],
        q_load: vec![vec![1.0; 2]],
        price: vec![0.2; 2],
        t_supply: vec![15.0; 2],
    };
    match brute_force_oracle(&model, &exo, 0.005, BruteForceLimits::default()) {
        Err(BaselineError::InfeasibleAtResolution { resolution }) => assert_eq!(resolution, 0.005),
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn oracle_rejects_large_instances() {
    let (model, exo) = random_instance(3, 2, 1);
    assert!(matches!(
        brute_force_oracle(&model, &exo, 0.025, BruteForceLimits::default()),
        Err(BaselineError::TooLarge(_))
    ));
    let (model, exo) = random_instance(1, 2, 1);
    assert!(matches!(
        brute_force_oracle(&model, &exo, 0.01, BruteForceLimits::default()),
        Err(BaselineError::TooLarge(_))
    ));
}

#[test]
fn refining_the_grid_never_increases_cost() {
    for seed in 0..4 {
        let (model, exo) = random_instance(2, 3, 100 + seed);
        let coarse = brute_force_oracle(&model, &exo, 0.1, BruteForceLimits::default());
        let fine = brute_force_oracle(&model, &exo, 0.05, BruteForceLimits::default()).unwrap();
        if let Ok(c) = coarse {
            assert!(fine.objective <= c.objective + 1e-12);
        }
    }
}

#[test]
fn zero_load_needs_only_minimum_flow() {
    let mut z = zone(25.9);
    z.m_min = 0.02;
    let model = Building::new(vec![z, z], vec![], ahu(1.0), 1800.0, 3).unwrap();
    let exo = Exogenous {
        t_out: vec![15.0; 3],
        q_load: vec![vec![0.0; 3]; 2],
        price: vec![0.2; 3],
        t_supply: vec![15.0; 3],
    };
    let sol = solve_centralized_nonlinear(&model, &exo, &NonlinearOptions::default()).unwrap();
    let s = sol.schedule.unwrap();
    assert!(s.flows.iter().flatten().all(|&m| (m - 0.02).abs() <= 1e-9), "{:?}", s.flows);
    let forced = simulate_schedule(&model, &exo, &vec![vec![0.02; 3]; 2]).unwrap();
    let forced_cost = schedule_cost(&model, &exo, &vec![vec![0.02; 3]; 2], &forced).total;
    assert!((sol.objective - forced_cost).abs() <= 1e-9);
}

#[test]
fn ordering_chain_on_toys() {
    for seed in 0..6u64 {
        let n = 1 + (seed as usize % 2);
        let h = 2 + (seed as usize % 2);
        let (model, exo) = random_instance(n, h, 200 + seed);
        let relaxed = solve_centralized_relaxed(&model, &exo, &CentralOptions::default()).unwrap();
        let local = solve_centralized_nonlinear(&model, &exo, &NonlinearOptions::default()).unwrap();
        let Ok(brute) = brute_force_oracle(&model, &exo, 0.025, BruteForceLimits::default()) else {
            continue;
        };
        let sched = local.schedule.as_ref().unwrap();
        assert!(validate_schedule(sched, &model, &exo).unwrap().is_feasible());
        assert!(validate_schedule(brute.schedule.as_ref().unwrap(), &model, &exo)
            .unwrap()
            .is_feasible());
        assert!(relaxed.objective <= local.objective + 1e-6, "seed {seed}");
        let cell = grid_cell_increment(&model, &exo, &brute.schedule.as_ref().unwrap().flows, 0.025).unwrap();
        assert!((brute.objective - local.objective).abs() <= cell, "seed {seed}");
    }
}

#[test]
fn nonlinear_respects_constraints_and_bounds_relaxation_on_five_zones() {
    let (model, exo) = random_instance(5, 12, 9);
    let relaxed = solve_centralized_relaxed(&model, &exo, &CentralOptions::default()).unwrap();
    let local = solve_centralized_nonlinear(&model, &exo, &NonlinearOptions::default()).unwrap();
    let s = local.schedule.as_ref().unwrap();
    assert!(validate_schedule(s, &model, &exo).unwrap().is_feasible());
    assert!(local.diagnostics.local_only);
    assert!(relaxed.objective <= local.objective + 1e-6);
    assert!(s.flows.iter().flatten().all(|&m| (0.0..=0.5).contains(&m)));
}
