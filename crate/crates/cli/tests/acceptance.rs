//! Exit criteria of the project. Each criterion prints one PASS/FAIL line;
//! the process fails if any criterion fails.
//!
//! `cargo test --test acceptance -- 4 7` runs a subset by number.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rodsim_cli::bench::{run_bench, BenchConfig};
use rodsim_core::energy::{centerline_forces, fd_gradient_check, solve_quasistatic_thetas, vertex_twists};
use rodsim_core::geometry::init_reference_frames;
use rodsim_core::{
    step, BoundaryCondition, Centerline, ContactParams, FrameSet, MaterialFrame, RodParams, RodState, SceneConfig,
    StepConfig, Vec3,
};
use rodsim_fling::train::{episode_rng, quartile_means};
use rodsim_fling::{
    d_err, evaluate, reward, run_episode, sample_action, train, FlingEnv, TrainConfig, SUCCESS_REWARD,
};
use rodsim_validation::{run_helical_buckling, run_michell, BucklingConfig, MichellConfig};

/// Outcome of one criterion: pass flag and a one-line measurement summary.
type Outcome = (bool, String);

fn random_rod(rng: &mut ChaCha8Rng, edges: usize) -> (Centerline, FrameSet, MaterialFrame) {
    let mut x = Vec3::zeros();
    let mut dir = Vec3::x();
    let mut nodes = vec![x];
    for _ in 0..edges {
        let jitter = Vec3::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6));
        dir = (dir + jitter).normalize();
        x += dir * rng.random_range(0.08..0.12);
        nodes.push(x);
    }
    let c = Centerline::from_nodes(nodes).unwrap();
    let u0 = c.edge(0).cross(&Vec3::new(0.3, -0.2, 1.0));
    let f = init_reference_frames(&c, &u0).unwrap();
    let mut m = MaterialFrame::untwisted(&c);
    m.thetas[0] = rng.random_range(-0.5..0.5);
    m.thetas[edges - 1] = rng.random_range(-3.0..3.0);
    (c, f, m)
}

fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        // 10 nodes
        let (c, f, m) = random_rod(&mut rng, 9);
        let p = RodParams::with_linear_density(&c, rng.random_range(0.5..2.0), rng.random_range(0.5..2.0), 1.0, 0.0);
        let m = solve_quasistatic_thetas(&c, &f, &m, &p).unwrap();
        let err = fd_gradient_check(&c, &f, &m, &p, 1e-6 * c.total_rest_length()).unwrap();
        worst = worst.max(err);
    }
    (worst < 1e-4, format!("max relative error {worst:.3e} over 20 rods (gate 1e-4)"))
}

fn helical_buckling() -> Outcome {
    let cfg = BucklingConfig::default();
    assert_eq!(cfg.n_values, vec![40, 80, 140]);
    let results = match run_helical_buckling(&cfg) {
        Ok(r) => r,
        Err(e) => return (false, format!("simulation failed: {e}")),
    };
    let errors: Vec<f64> = results.iter().map(|r| r.avg_error).collect();
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let at_140 = results.iter().find(|r| r.n == 140).map(|r| r.avg_error).unwrap_or(f64::INFINITY);
    (
        decreasing && at_140 <= 0.004,
        format!("avg_error over n = 40, 80, 140: {errors:.6?}; decreasing {decreasing}, n=140 {at_140:.6} (gate 0.004)"),
    )
}

fn ring_instability() -> Outcome {
    let cfg = MichellConfig::default();
    assert_eq!((cfg.n, cfg.alpha), (50, 1.0));
    let results = match run_michell(&[0.5, 1.0, 1.5], &cfg) {
        Ok(r) => r,
        Err(e) => return (false, format!("measurement failed: {e}")),
    };
    let worst = results.iter().map(|r| r.deviation_pct).fold(0.0, f64::max);
    let detail: Vec<String> = results
        .iter()
        .map(|r| format!("{}: {:.3} vs {:.3}", r.beta_over_alpha, r.theta_c_measured, r.theta_c_analytic))
        .collect();
    (worst <= 5.0, format!("max deviation {worst:.2}% (gate 5%) [{}]", detail.join(", ")))
}

fn check(failures: &mut Vec<String>, ok: bool, what: impl FnOnce() -> String) {
    if !ok {
        failures.push(what());
    }
}

fn invariants() -> Outcome {
    let mut failures = Vec::new();

    // constraints and frames after every step of a contact-rich swing
    let n = 30;
    let c = Centerline::straight(Vec3::new(0.0, 0.0, 0.3), Vec3::new(1.0, 0.2, 0.1), 1.0, n).unwrap();
    let mut s = RodState::new(c, &Vec3::z()).unwrap();
    let p = RodParams::with_linear_density(&s.centerline, 0.5, 0.5, 0.05, 0.5);
    let nodes = s.centerline.nodes.clone();
    let bc = BoundaryCondition::free().pin(0, nodes[0]).pin(1, nodes[1]).clamp_theta(0, 0.0);
    let scene = SceneConfig {
        gravity: Vec3::new(0.0, 0.0, -9.81),
        ground_height: Some(0.0),
        contact: ContactParams::default(),
        ..SceneConfig::empty()
    };
    let cfg = StepConfig::default();
    let (mut strain, mut ortho): (f64, f64) = (0.0, 0.0);
    for _ in 0..2000 {
        step(&mut s, &p, &bc, &scene, &cfg).unwrap();
        strain = strain.max(s.centerline.max_strain());
        ortho = ortho.max(s.frames.orthonormality_error());
    }
    check(&mut failures, strain <= 1e-8, || format!("strain {strain:.2e}"));
    check(&mut failures, ortho <= 1e-10, || format!("orthonormality {ortho:.2e}"));

    // internal forces exert no net force; with the twist free to relax they
    // exert no net torque either
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut net_f, mut net_t): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let (c, f, m) = random_rod(&mut rng, 14);
        let p = RodParams::with_linear_density(&c, 1.0, 1.5, 1.0, 0.0);
        let twisted = solve_quasistatic_thetas(&c, &f, &m, &p).unwrap();
        let forces = centerline_forces(&c, &f, &twisted, &p).unwrap();
        let scale = forces.iter().map(|g| g.norm()).fold(0.0, f64::max) * c.total_rest_length();
        net_f = net_f.max(forces.iter().sum::<Vec3>().norm() / scale);

        let one_clamp = MaterialFrame {
            clamped: vec![0],
            ..m
        };
        let relaxed = solve_quasistatic_thetas(&c, &f, &one_clamp, &p).unwrap();
        assert!(vertex_twists(&c, &f, &relaxed).iter().all(|t| t.abs() < 1e-9));
        let forces = centerline_forces(&c, &f, &relaxed, &p).unwrap();
        let scale = forces.iter().map(|g| g.norm()).fold(0.0, f64::max) * c.total_rest_length();
        let torque: Vec3 = c.nodes.iter().zip(&forces).map(|(x, g)| x.cross(g)).sum();
        net_t = net_t.max(torque.norm() / scale);
    }
    check(&mut failures, net_f < 1e-9, || format!("net force {net_f:.2e}"));
    check(&mut failures, net_t < 1e-9, || format!("net torque {net_t:.2e}"));

    // damped relaxation of a bent, twisted, hanging wire
    let c = Centerline::from_nodes(
        (0..=20)
            .map(|i| {
                let a = 0.25 * i as f64;
                Vec3::new(0.3 * a.sin(), 0.3 * (1.0 - a.cos()), 0.04 * a)
            })
            .collect(),
    )
    .unwrap();
    let mut s = RodState::new(c, &Vec3::z()).unwrap();
    let p = RodParams::with_linear_density(&s.centerline, 0.2, 0.3, 0.1, 2.0);
    let nodes = s.centerline.nodes.clone();
    let bc = BoundaryCondition::free()
        .pin(0, nodes[0])
        .pin(1, nodes[1])
        .clamp_theta(0, 0.0)
        .clamp_theta(19, 1.5);
    s.relax_material(&p, &bc).unwrap();
    let g = SceneConfig {
        gravity: Vec3::new(0.0, 0.0, -9.81),
        ..SceneConfig::empty()
    };
    let mut prev = s.mechanical_energy(&p, &g.gravity).unwrap();
    let mut worst_rise: f64 = 0.0;
    for _ in 0..3000 {
        step(&mut s, &p, &bc, &g, &cfg).unwrap();
        let e = s.mechanical_energy(&p, &g.gravity).unwrap();
        worst_rise = worst_rise.max(e - prev);
        prev = e;
    }
    check(&mut failures, worst_rise <= 1e-12, || format!("energy rose by {worst_rise:.2e}"));

    // bit-identical reruns under a fixed seed
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (c, _, _) = random_rod(&mut rng, 16);
        let mut s = RodState::new(c, &Vec3::z()).unwrap();
        for v in &mut s.velocities {
            *v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        let p = RodParams::with_linear_density(&s.centerline, 0.3, 0.3, 0.1, 0.2);
        let bc = BoundaryCondition::free().pin(0, Vec3::zeros()).clamp_theta(0, 0.0);
        for _ in 0..500 {
            step(&mut s, &p, &bc, &scene, &cfg).unwrap();
        }
        s
    };
    let bits = |s: &RodState| -> Vec<u64> {
        s.centerline
            .nodes
            .iter()
            .chain(&s.velocities)
            .flat_map(|x| x.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
            .chain(s.material.thetas.iter().map(|t| t.to_bits()))
            .collect()
    };
    check(&mut failures, bits(&run()) == bits(&run()), || "rod reruns differ".into());

    let env = FlingEnv::default();
    let tc = TrainConfig::default();
    let policy = tc.initial_policy(&env);
    let episode = || {
        let mut rng = episode_rng(5, 3);
        let a = sample_action(&policy, &[0.01, 0.015], &mut rng).action;
        run_episode(&a, &env, 0.01, 0.015, true).unwrap()
    };
    check(&mut failures, episode() == episode(), || "fling episode reruns differ".into());

    let summary = format!(
        "strain {strain:.1e}, orthonormality {ortho:.1e}, net force {net_f:.1e}, net torque {net_t:.1e}, energy rise {worst_rise:.1e}"
    );
    if failures.is_empty() {
        (true, summary)
    } else {
        (false, format!("{}; {summary}", failures.join(", ")))
    }
}

fn benchmark_trend() -> Outcome {
    let cfg = BenchConfig::default();
    assert_eq!(cfg.n_values, vec![20, 30, 40, 50, 60]);
    let rows = match run_bench(&cfg) {
        Ok(r) => r,
        Err(e) => return (false, format!("benchmark failed: {e}")),
    };
    let pct: Vec<f64> = rows.iter().map(|r| r.overhead_pct).collect();
    let decreasing = pct.windows(2).all(|w| w[1] < w[0]);
    (decreasing, format!("overhead_pct over n = 20..60: {pct:.1?}; strictly decreasing {decreasing}"))
}

fn fling_learning() -> Outcome {
    let env = FlingEnv::default();
    let tc = TrainConfig::default();
    assert_eq!((tc.total_episodes, tc.seed), (5000, 7));
    let out = match train(&env, &tc) {
        Ok(o) => o,
        Err(e) => return (false, format!("training failed: {e}")),
    };
    let (first, last) = quartile_means(&out.state.curve).expect("curve has at least four batches");
    let report = evaluate(&out.state.best_policy, &env, &tc, 30, true, 12345, false).unwrap();
    (
        report.success_rate >= 0.8 && last > first,
        format!(
            "deterministic success {:.3} over 30 (gate 0.8); quartile mean reward {first:.3} -> {last:.3}",
            report.success_rate
        ),
    )
}

fn reward_branches() -> Outcome {
    let env = FlingEnv::default();
    let gap = env.gap();
    let inside = 0.5 * (gap.min + gap.max);
    let outside = Vec3::new(0.0, -1.0, 2.0);
    let ok = reward(0.42, true) == SUCCESS_REWARD
        && reward(0.0, true) == 10.0
        && reward(0.42, false) == -0.42
        && reward(1.7, false) == -1.7
        && reward(0.0, false) == 0.0
        && d_err(&[outside, inside], &env) == 0.0
        && reward(d_err(&[outside, inside], &env), false) == 0.0
        && d_err(&[outside], &env) > 0.0;
    (ok, "success -> 10, failure -> -min_d_err, failure in gap -> 0".into())
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 7] = [
        (1, "gradient correctness", gradient_correctness),
        (2, "helical buckling envelope", helical_buckling),
        (3, "ring twist instability", ring_instability),
        (4, "invariant suite", invariants),
        (5, "benchmark trend", benchmark_trend),
        (6, "fling learning", fling_learning),
        (7, "reward branch table", reward_branches),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut all = true;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let (ok, detail) = run();
        all &= ok;
        println!(
            "{} criterion {id} {name}: {detail} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    if !all {
        std::process::exit(1);
    }
}
