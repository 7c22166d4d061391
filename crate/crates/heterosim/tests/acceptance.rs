//! Acceptance suite: one test per claim, each printing a PASS line with the
//! measured values (run with `--nocapture` to see them).
//!
//! Scenarios are pinned: exploration uses 5 relays / 4 sensors /
//! 2 manipulators / 1 adversary around one large obstacle; foraging uses
//! two ground robots on 32 tags in one or four clusters with and without
//! the drone, at matched seeds.

use parallel::maybe_parallel_map;

use heterosim::channel::{power_control_targets, ChannelModel};
use heterosim::engine;
use heterosim::foraging::{
    crw_heading_raw, crw_sd, ClusterLayout, Episode, EpisodeConfig, ForagerParams,
};
use heterosim::manipulation::{jacobian_planar2, manipulability2, ArmModel};
use heterosim::scenario::{resolve, ScenarioConfig, ScenarioKind};
use heterosim::sensing::{obstacle_repulsion, ConvexPolygon, ObstacleField};
use heterosim::stats::wilcoxon_signed_rank_one_sided;
use heterosim::topology::{consensus_counts_step, gabriel_edges};
use heterosim::Vec3;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Tiny indirection so the seed sweeps can run in parallel without repeating
// the rayon plumbing in every criterion.
mod parallel {
    use rayon::prelude::*;

    pub fn maybe_parallel_map<T, F>(seeds: &[u64], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync,
    {
        seeds.par_iter().map(|&s| f(s)).collect()
    }
}

fn exploration_config(seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.seed = seed;
    cfg.duration = 40.0;
    cfg.obstacles.obstacles =
        vec![ConvexPolygon { vertices: vec![(17.0, 13.0), (21.0, 13.0), (21.0, 23.0), (17.0, 23.0)] }];
    cfg
}

fn run_exploration(seed: u64, mutate: impl Fn(&mut ScenarioConfig)) -> heterosim::metrics::Summary {
    let mut cfg = exploration_config(seed);
    mutate(&mut cfg);
    let resolved = resolve(cfg).expect("valid scenario");
    engine::run(&resolved).expect("run completes").summary
}

/// Criterion 1: over 100 seeded exploration-pursuit runs the network is
/// connected at 100% of steps. Hard pass/fail.
#[test]
fn criterion_1_connectivity_maintained() {
    let seeds: Vec<u64> = (1..=100).collect();
    let fractions = maybe_parallel_map(&seeds, |s| run_exploration(s, |_| {}).connected_fraction);
    let all_connected = fractions.iter().all(|&f| f == 1.0);
    assert!(all_connected, "fractions below 1.0: {:?}", fractions.iter().filter(|&&f| f < 1.0).collect::<Vec<_>>());
    println!("PASS criterion 1 (connectivity): 100/100 runs connected at every step");
}

/// Criterion 2: heterogeneous coverage at least doubles the homogeneous
/// all-ground baseline, means over 10 matched seeds.
#[test]
fn criterion_2_coverage_ratio() {
    let seeds: Vec<u64> = (1..=10).collect();
    let het = maybe_parallel_map(&seeds, |s| {
        run_exploration(s, |c| c.duration = 60.0).coverage_final
    });
    let hom = maybe_parallel_map(&seeds, |s| {
        run_exploration(s, |c| {
            c.duration = 60.0;
            c.homogeneous_baseline = true;
        })
        .coverage_final
    });
    let mean_het: f64 = het.iter().sum::<f64>() / het.len() as f64;
    let mean_hom: f64 = hom.iter().sum::<f64>() / hom.len() as f64;
    let ratio = mean_het / mean_hom;
    assert!(
        ratio >= 2.0,
        "coverage ratio {ratio:.3} < 2.0 (het {mean_het:.3}, hom {mean_hom:.3})"
    );
    println!(
        "PASS criterion 2 (coverage ratio): heterogeneous {mean_het:.3} vs homogeneous {mean_hom:.3}, ratio {ratio:.2} >= 2.0"
    );
}

/// Criterion 3: with power control the SINR threshold holds on at least 99%
/// of steps on each of 10 seeds; with it disabled the same seeds violate
/// the threshold in at least 8 of 10 runs.
#[test]
fn criterion_3_power_control_contrast() {
    let seeds: Vec<u64> = (1..=10).collect();
    let with_pc = maybe_parallel_map(&seeds, |s| {
        run_exploration(s, |_| {}).sinr_ok_fraction.expect("links present")
    });
    let without_pc = maybe_parallel_map(&seeds, |s| {
        run_exploration(s, |c| c.power_control = false)
            .sinr_ok_fraction
            .expect("links present")
    });
    let min_with = with_pc.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min_with >= 0.99, "with PC, min ok fraction {min_with} < 0.99 ({with_pc:?})");
    let violating_runs = without_pc.iter().filter(|&&f| f < 1.0).count();
    assert!(
        violating_runs >= 8,
        "without PC only {violating_runs}/10 runs violated the threshold ({without_pc:?})"
    );
    println!(
        "PASS criterion 3 (SINR power control): with PC min ok fraction {min_with:.4} >= 0.99; without PC {violating_runs}/10 runs violate"
    );
}

fn tags_per_hour(layout: ClusterLayout, drone: bool, seed: u64) -> f64 {
    let mut cfg = EpisodeConfig::default();
    cfg.arena_side = 3.5;
    cfg.duration = 360.0;
    cfg.layout = layout;
    cfg.drone_enabled = drone;
    cfg.seed = seed;
    Episode::run(cfg).expect("episode runs").tags_per_hour()
}

/// Criterion 4: drone coordination lifts mean tags/hour by at least 1.5x on
/// matched seeds for both cluster layouts, one-sided rank test p < 0.05.
#[test]
fn criterion_4_foraging_speedup() {
    for layout in [ClusterLayout::Single32, ClusterLayout::Four8] {
        let seeds: Vec<u64> = (0..16).collect();
        let rates: Vec<(f64, f64)> = maybe_parallel_map(&seeds, |s| {
            (tags_per_hour(layout, true, s), tags_per_hour(layout, false, s))
        });
        let mean_with: f64 = rates.iter().map(|r| r.0).sum::<f64>() / rates.len() as f64;
        let mean_without: f64 = rates.iter().map(|r| r.1).sum::<f64>() / rates.len() as f64;
        let diffs: Vec<f64> = rates.iter().map(|(w, o)| w - o).collect();
        let p = wilcoxon_signed_rank_one_sided(&diffs);
        let ratio = mean_with / mean_without;
        assert!(
            ratio >= 1.5,
            "{layout:?}: ratio {ratio:.3} < 1.5 (with {mean_with:.1}, without {mean_without:.1})"
        );
        assert!(p < 0.05, "{layout:?}: rank test p = {p:.4} >= 0.05");
        println!(
            "PASS criterion 4 (foraging speedup, {layout:?}): {mean_with:.1} vs {mean_without:.1} tags/hour, ratio {ratio:.2} >= 1.5, p = {p:.4}"
        );
    }
}

/// Criterion 5: SVD-product manipulability equals l1*l2*|sin theta2| to
/// rel err < 1e-9 over 100 random planar configs; grid search puts the
/// argmax at theta2 = pi/2.
#[test]
fn criterion_5_manipulability_analytics() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let l1: f64 = rng.random_range(0.1..1.2);
        let l2: f64 = rng.random_range(0.1..1.2);
        let mut arm = ArmModel::planar2(l1, l2);
        let theta2: f64 = rng.random_range(-3.14..3.14);
        arm.joint_angles = vec![rng.random_range(-3.14..3.14), theta2];
        let mu = manipulability2(&jacobian_planar2(&arm));
        let closed = l1 * l2 * theta2.sin().abs();
        let denom = closed.abs().max(1e-12);
        worst = worst.max((mu - closed).abs() / denom);
    }
    assert!(worst < 1e-9, "worst relative error {worst:e}");

    let arm = ArmModel::planar2(0.45, 0.3);
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut theta = -std::f64::consts::PI;
    while theta <= std::f64::consts::PI {
        let mut a = arm.clone();
        a.joint_angles = vec![0.3, theta];
        let mu = manipulability2(&jacobian_planar2(&a));
        if mu > best.0 {
            best = (mu, theta);
        }
        theta += 1e-3;
    }
    assert!(
        (best.1.abs() - std::f64::consts::FRAC_PI_2).abs() <= 1e-3,
        "grid argmax at {}",
        best.1
    );
    println!(
        "PASS criterion 5 (manipulability): SVD vs closed form rel err {worst:.2e} < 1e-9; argmax |theta2| = {:.4} ~ pi/2",
        best.1.abs()
    );
}

/// Independent count-only transcription of the consensus sweep used as the
/// oracle for criterion 6.
mod consensus_oracle {
    pub fn sweep(adjacency: &[Vec<usize>], loads: &mut [u32]) {
        for i in 0..loads.len() {
            let mine = loads[i];
            let lower: Vec<usize> =
                adjacency[i].iter().copied().filter(|&j| loads[j] <= mine).collect();
            if lower.is_empty() {
                continue;
            }
            // Special branch: exactly one deficient neighbor, all other
            // lower-or-equal neighbors carrying exactly the same load.
            let deficient: Vec<usize> = lower
                .iter()
                .copied()
                .filter(|&j| mine >= 2 && loads[j] <= mine - 2)
                .collect();
            if deficient.len() == 1 && lower.len() >= 2 {
                let k = deficient[0];
                if lower.iter().all(|&j| j == k || loads[j] == mine) {
                    let t = ((loads[k] + mine) / 2).min(loads[i]);
                    loads[i] -= t;
                    loads[k] += t;
                    continue;
                }
            }
            let total: u32 = mine + lower.iter().map(|&j| loads[j]).sum::<u32>();
            let avg = total / (lower.len() as u32 + 1);
            let mut moved = false;
            for &j in &lower {
                if avg > loads[j] {
                    let t = (avg - loads[j]).min(loads[i]);
                    loads[i] -= t;
                    loads[j] += t;
                    moved = t > 0 || moved;
                }
            }
            if !moved {
                // Remainder rule: one unit down the steepest edge.
                if let Some(&j) = deficient.iter().min_by_key(|&&j| (loads[j], j)) {
                    loads[i] -= 1;
                    loads[j] += 1;
                }
            }
        }
    }
}

/// Criterion 6: on 50 random connected relay graphs the consensus conserves
/// the total exactly, matches the count-only oracle step for step, and
/// settles every load within 1 of its neighborhood average.
#[test]
fn criterion_6_consensus() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut max_sweeps = 0usize;
    for instance in 0..50 {
        let n = rng.random_range(2..=12);
        let mut adjacency = vec![Vec::new(); n];
        for i in 1..n {
            let j = rng.random_range(0..i);
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for _ in 0..n {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b && !adjacency[a].contains(&b) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        let mut loads: Vec<u32> = (0..n).map(|_| rng.random_range(0..=12)).collect();
        let mut oracle = loads.clone();
        let total: u32 = loads.iter().sum();

        let mut sweeps = 0;
        loop {
            let before = loads.clone();
            consensus_counts_step(&adjacency, &mut loads);
            consensus_oracle::sweep(&adjacency, &mut oracle);
            assert_eq!(loads, oracle, "instance {instance}: diverged from oracle");
            assert_eq!(loads.iter().sum::<u32>(), total, "instance {instance}: total changed");
            sweeps += 1;
            if loads == before {
                break;
            }
            assert!(sweeps <= 50 * n, "instance {instance}: no fixed point");
        }
        max_sweeps = max_sweeps.max(sweeps);

        for i in 0..n {
            let mut sum = loads[i] as f64;
            for &j in &adjacency[i] {
                sum += loads[j] as f64;
            }
            let avg = sum / (adjacency[i].len() as f64 + 1.0);
            assert!(
                (loads[i] as f64 - avg).abs() <= 1.0 + 1e-9,
                "instance {instance}: load {} vs neighborhood average {avg}",
                loads[i]
            );
        }
    }
    println!(
        "PASS criterion 6 (consensus): 50 instances conserve totals, match the oracle, and balance within 1 (max sweeps {max_sweeps})"
    );
}

/// Criterion 7a: Gabriel edges equal the O(n^3) brute-force test on 200
/// random instances up to 30 nodes.
#[test]
fn criterion_7a_gabriel_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for instance in 0..200 {
        let n = rng.random_range(1..=30);
        let pts: Vec<Vec3> = (0..n)
            .map(|_| Vec3::new(rng.random_range(0.0..50.0), rng.random_range(0.0..50.0), 0.0))
            .collect();
        let got = gabriel_edges(&pts).unwrap();
        // Brute force: explicit diameter-circle membership over all triples.
        let mut expected = std::collections::BTreeSet::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let center = (pts[i] + pts[j]) / 2.0;
                let radius = (pts[i] - pts[j]).norm() / 2.0;
                let blocked =
                    (0..n).filter(|&k| k != i && k != j).any(|k| (pts[k] - center).norm() < radius);
                if !blocked {
                    expected.insert((i, j));
                }
            }
        }
        assert_eq!(got, expected, "instance {instance}");
    }
    println!("PASS criterion 7a (Gabriel oracle): 200 instances up to 30 nodes match exactly");
}

/// Criterion 7b: the analytic repulsion force matches the finite-difference
/// gradient of the potential at 100 points, rel err < 1e-3.
#[test]
fn criterion_7b_repulsion_gradient() {
    let field = ObstacleField {
        obstacles: vec![
            ConvexPolygon::rectangle(-1.0, -1.0, 1.0, 1.0),
            ConvexPolygon { vertices: vec![(4.0, 0.0), (6.0, -1.0), (6.5, 1.5)] },
        ],
        eta: 3.0,
        outer_radius: 2.5,
        inner_radius: 0.25,
        ref_distance: 2.5,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let h = 1e-6;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 100 {
        let x: f64 = rng.random_range(-4.0..10.0);
        let y: f64 = rng.random_range(-5.0..6.0);
        let p = Vec3::new(x, y, 0.0);
        let rho = match field.clearance(&p) {
            Ok((d, _)) => d,
            Err(_) => continue,
        };
        if rho < field.inner_radius + 0.05 || rho > field.outer_radius - 0.05 {
            continue;
        }
        let w = |px: f64, py: f64| {
            let (d, _) = field.clearance(&Vec3::new(px, py, 0.0)).unwrap();
            field.potential(d)
        };
        let grad = Vec3::new(
            (w(x + h, y) - w(x - h, y)) / (2.0 * h),
            (w(x, y + h) - w(x, y - h)) / (2.0 * h),
            0.0,
        );
        let force = obstacle_repulsion(&p, &field).unwrap();
        let expected = -grad;
        let err = (force - expected).norm() / expected.norm().max(1e-9);
        worst = worst.max(err);
        checked += 1;
    }
    assert!(worst < 1e-3, "worst rel err {worst:e}");
    println!("PASS criterion 7b (repulsion gradient): 100 points, worst rel err {worst:.2e} < 1e-3");
}

/// Criterion 7c: the sampled CRW turning SD matches omega + gamma/t^delta
/// within 2% at 1e5 samples.
#[test]
fn criterion_7c_crw_sd() {
    let params = ForagerParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    let mut worst: f64 = 0.0;
    for (informed, t_s) in [(false, 5.0), (true, 1.0), (true, 4.0), (true, 30.0)] {
        let expected = crw_sd(informed, t_s, &params);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let d = crw_heading_raw(0.0, informed, t_s, &params, &mut rng);
            sum += d;
            sum_sq += d * d;
        }
        let mean = sum / n as f64;
        let sd = (sum_sq / n as f64 - mean * mean).sqrt();
        worst = worst.max((sd - expected).abs() / expected);
    }
    assert!(worst < 0.02, "worst relative SD error {worst}");
    println!("PASS criterion 7c (CRW SD): sampled SD within {:.2}% of omega + gamma/t^delta", worst * 100.0);
}

/// Criterion 7d: the single-interferer power-control separation equals the
/// closed-form solution of the SINR constraint, rel err < 1e-6.
#[test]
fn criterion_7d_pc_separation_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(74);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let mut model = ChannelModel::default();
        model.sinr_threshold = rng.random_range(1.2..4.0);
        model.path_loss_exp = rng.random_range(2.0..3.0);
        let p_i: f64 = rng.random_range(0.5..2.0);
        let p_j: f64 = rng.random_range(0.5..2.0);
        let l_jk: f64 = rng.random_range(0.8..2.5);
        // Serving relay far enough that the constraint is violated.
        let relays = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(5.0 + l_jk, 0.0, 0.0)];
        let followers = [Vec3::new(5.0, 0.0, 0.0)];
        let plans = power_control_targets(
            &[0],
            &followers,
            &relays,
            &[p_i, p_j],
            3.0,
            &model,
            0.5,
        );
        let got = match plans[0].desired_separation {
            Some(l) => l,
            None => continue,
        };
        let expected = l_jk
            * (p_i / (model.sinr_threshold * p_j)).powf(1.0 / model.path_loss_exp);
        worst = worst.max((got - expected).abs() / expected);
    }
    assert!(worst < 1e-6, "worst rel err {worst:e}");
    println!("PASS criterion 7d (PC separation): closed-form match, worst rel err {worst:.2e} < 1e-6");
}

/// Criterion 8: with no followers and no target attraction the spring-mass
/// relay network converges to a null state (total kinetic energy < 1e-6)
/// on 20 seeds.
#[test]
fn criterion_8_spring_mass_convergence() {
    let seeds: Vec<u64> = (1..=20).collect();
    let energies = maybe_parallel_map(&seeds, |s| {
        run_exploration(s, |c| {
            c.duration = 120.0;
            c.n_sensors = 0;
            c.n_manipulators = 0;
            c.adversary = false;
            c.control.attract_gain = 0.0;
            c.obstacles.obstacles.clear();
        })
        .final_kinetic_energy
        .expect("exploration reports energy")
    });
    let worst = energies.iter().copied().fold(0.0f64, f64::max);
    assert!(worst < 1e-6, "worst final kinetic energy {worst:e} ({energies:?})");
    println!("PASS criterion 8 (spring-mass convergence): worst final kinetic energy {worst:.2e} < 1e-6");
}
