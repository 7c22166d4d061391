//! The synchronous step loop and run orchestration.
//!
//! Exploration runs advance all agents in lockstep: sense, evaluate mode
//! guards and control laws (including the power-control bias), integrate,
//! update the topology and consensus, then record metrics. Connectivity is
//! enforced the way the goal-region result prescribes: follower goals are
//! sampled inside the safe annulus, and as a hard backstop both relays and
//! followers have their outward radial velocity zeroed when a link
//! approaches the communication radius.
//!
//! Foraging runs wrap a `foraging::Episode` and log the same row format.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::channel::{power_control_targets, sinr_at, to_db, ChannelModel};
use crate::control::{
    adversary_policy, relay_control, relay_follow_control, relay_mode_guard, sensor_control,
    BehaviorMode, ControlParams, FollowerCtl,
};
use crate::error::SimError;
use crate::foraging::{Episode, EpisodeConfig, ForageEvent};
use crate::kinematics::{step_bicycle, AgentClass, AgentState, KinematicParams};
use crate::manipulation::{manipulation_control, ArmModel};
use crate::metrics::{MetricsLog, StepRow, Summary};
use crate::rng::{RngStreams, STREAM_SEARCH, STREAM_SENSING, STREAM_SHADOWING};
use crate::scenario::{ResolvedScenario, ScenarioKind};
use crate::sensing::{
    detect_prob_ground, obstacle_repulsion, sample_detection, GroundVision, ObstacleField,
};
use crate::topology::{
    check_connected, consensus_step_guarded, gabriel_edges, safe_goal_region, Radii,
};
use crate::Vec3;

/// Run a resolved scenario to completion.
pub fn run(resolved: &ResolvedScenario) -> Result<MetricsLog, SimError> {
    match resolved.config.kind {
        ScenarioKind::ExplorationPursuit => ExplorationRunner::new(resolved)?.run(),
        ScenarioKind::Foraging => run_foraging(resolved),
    }
}

/// Occupancy grid that accumulates every cell ever touched by a sensing
/// footprint. Cells inside obstacles are excluded from the free set.
pub struct CoverageGrid {
    res: f64,
    nx: usize,
    ny: usize,
    free: Vec<bool>,
    covered: Vec<bool>,
    free_total: usize,
    covered_free: usize,
}

impl CoverageGrid {
    pub fn new(width: f64, height: f64, res: f64, obstacles: &ObstacleField) -> Self {
        let nx = (width / res).ceil() as usize;
        let ny = (height / res).ceil() as usize;
        let mut free = vec![true; nx * ny];
        let mut free_total = 0;
        for j in 0..ny {
            for i in 0..nx {
                let cx = (i as f64 + 0.5) * res;
                let cy = (j as f64 + 0.5) * res;
                let blocked = obstacles.obstacles.iter().any(|o| o.contains(cx, cy));
                free[j * nx + i] = !blocked;
                if !blocked {
                    free_total += 1;
                }
            }
        }
        Self { res, nx, ny, free, covered: vec![false; nx * ny], free_total, covered_free: 0 }
    }

    fn cell_range(&self, lo: f64, hi: f64, n: usize) -> (usize, usize) {
        let a = ((lo / self.res).floor().max(0.0)) as usize;
        let b = ((hi / self.res).ceil().max(0.0)) as usize;
        (a.min(n), b.min(n))
    }

    fn mark(&mut self, i: usize, j: usize) {
        let idx = j * self.nx + i;
        if self.free[idx] && !self.covered[idx] {
            self.covered[idx] = true;
            self.covered_free += 1;
        }
    }

    pub fn mark_disc(&mut self, cx: f64, cy: f64, radius: f64) {
        let (i0, i1) = self.cell_range(cx - radius, cx + radius, self.nx);
        let (j0, j1) = self.cell_range(cy - radius, cy + radius, self.ny);
        for j in j0..j1 {
            for i in i0..i1 {
                let x = (i as f64 + 0.5) * self.res;
                let y = (j as f64 + 0.5) * self.res;
                if (x - cx).powi(2) + (y - cy).powi(2) <= radius * radius {
                    self.mark(i, j);
                }
            }
        }
    }

    pub fn mark_sector(&mut self, pos: &Vec3, heading: f64, vision: &GroundVision) {
        let r = vision.max_range;
        let (i0, i1) = self.cell_range(pos.x - r, pos.x + r, self.nx);
        let (j0, j1) = self.cell_range(pos.y - r, pos.y + r, self.ny);
        for j in j0..j1 {
            for i in i0..i1 {
                let x = (i as f64 + 0.5) * self.res;
                let y = (j as f64 + 0.5) * self.res;
                let dx = x - pos.x;
                let dy = y - pos.y;
                let dist = (dx * dx + dy * dy).sqrt();
                if dist < vision.min_range || dist > vision.max_range {
                    continue;
                }
                if crate::wrap_angle(dy.atan2(dx) - heading).abs() <= vision.half_angle {
                    self.mark(i, j);
                }
            }
        }
    }

    pub fn fraction(&self) -> f64 {
        if self.free_total == 0 {
            0.0
        } else {
            self.covered_free as f64 / self.free_total as f64
        }
    }
}

struct ExplorationRunner<'a> {
    resolved: &'a ResolvedScenario,
    radii: Radii,
    kin: KinematicParams,
    ctrl: ControlParams,
    channel: ChannelModel,
    gv: GroundVision,
    base: Vec3,
    relays: Vec<AgentState>,
    followers: Vec<AgentState>,
    n_sensors: usize,
    adversary: Option<AgentState>,
    adversary_active: bool,
    assignment: Vec<usize>,
    powers: Vec<f64>,
    ctls: Vec<FollowerCtl>,
    arm: ArmModel,
    target: Vec3,
    grid: CoverageGrid,
    sensing_rng: ChaCha8Rng,
    search_rng: ChaCha8Rng,
    shadow_rng: ChaCha8Rng,
    shadow_dist: Option<LogNormal<f64>>,
    relay_guard: f64,
    follower_stop: f64,
    next_consensus: f64,
    rows: Vec<StepRow>,
    summary: Summary,
    sinr_ok_rows: u64,
    terminal: Option<String>,
}

impl<'a> ExplorationRunner<'a> {
    fn new(resolved: &'a ResolvedScenario) -> Result<Self, SimError> {
        let cfg = &resolved.config;
        let radii = cfg.effective_radii();
        let mut ctrl = cfg.control.clone();
        ctrl.attract_center = cfg.target;
        ctrl.steering.steer_max = cfg.kinematics.steer_max;
        let mut kin = cfg.kinematics;
        kin.speeds.relay = cfg.effective_relay_speed();

        let relays: Vec<AgentState> = resolved
            .relay_positions
            .iter()
            .map(|p| AgentState::aerial(AgentClass::Relay, p.x, p.y, p.z))
            .collect();
        let followers: Vec<AgentState> = resolved
            .follower_positions
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let class = if k < cfg.n_sensors {
                    AgentClass::Sensor
                } else {
                    AgentClass::Manipulator
                };
                AgentState::ground(class, p.x, p.y, 0.0)
            })
            .collect();
        let adversary = resolved.adversary_position.map(|p| {
            let mut a = AgentState::ground(AgentClass::Adversary, p.x, p.y, 0.0);
            // Start tangent to the patrol circle.
            let rel = p - Vec3::new(cfg.target.0, cfg.target.1, 0.0);
            a.heading = rel.y.atan2(rel.x) + std::f64::consts::FRAC_PI_2;
            a
        });

        let streams = RngStreams::new(cfg.seed);
        let shadow_dist = cfg
            .channel
            .shadowing
            .map(|s| LogNormal::new(s.mu, s.sigma).expect("valid shadowing"));

        let eps = kin.speeds.relay * ctrl.broadcast_period;
        let dt = cfg.kinematics.dt;
        let relay_guard =
            radii.comm - (0.05 * radii.comm).max(6.0 * kin.speeds.relay * dt);
        let follower_stop = radii.comm - 0.5 * eps;

        let grid =
            CoverageGrid::new(cfg.workspace.0, cfg.workspace.1, cfg.grid_resolution, &cfg.obstacles);

        let mut summary = Summary::new("exploration-pursuit", cfg.seed);
        summary.duration = cfg.duration;

        Ok(Self {
            resolved,
            radii,
            kin,
            ctrl,
            channel: cfg.channel,
            gv: cfg.ground_vision,
            base: resolved.base_position,
            relays,
            followers,
            n_sensors: cfg.n_sensors,
            adversary,
            adversary_active: resolved.adversary_position.is_some(),
            assignment: resolved.assignment.clone(),
            powers: vec![cfg.channel.p_nominal; resolved.relay_positions.len()],
            ctls: vec![FollowerCtl::default(); resolved.follower_positions.len()],
            arm: ArmModel::default(),
            target: Vec3::new(cfg.target.0, cfg.target.1, 0.0),
            grid,
            sensing_rng: streams.stream(STREAM_SENSING),
            search_rng: streams.stream(STREAM_SEARCH),
            shadow_rng: streams.stream(STREAM_SHADOWING),
            shadow_dist,
            relay_guard,
            follower_stop,
            next_consensus: cfg.consensus_period,
            rows: Vec::new(),
            summary,
            sinr_ok_rows: 0,
            terminal: None,
        })
    }

    fn relay_positions(&self) -> Vec<Vec3> {
        self.relays.iter().map(|r| r.position).collect()
    }

    fn nodes_with_base(&self) -> Vec<Vec3> {
        let mut nodes = self.relay_positions();
        nodes.push(self.base);
        nodes
    }

    fn follower_positions(&self) -> Vec<Vec3> {
        self.followers.iter().map(|f| f.position).collect()
    }

    /// Deterministic (shadowing-free) min follower SINR.
    fn min_sinr_det(&self) -> Result<f64, SimError> {
        let relay_pos = self.relay_positions();
        let mut min = f64::INFINITY;
        for (k, f) in self.followers.iter().enumerate() {
            let s = sinr_at(
                &f.position,
                self.assignment[k],
                &self.powers,
                &relay_pos,
                self.radii.sensor,
                &self.channel,
                |_| 0.0,
            )?;
            min = min.min(s);
        }
        Ok(min)
    }

    /// Realized min follower SINR, drawing one shadowing sample per link.
    fn min_sinr_realized(&mut self) -> Result<f64, SimError> {
        let relay_pos = self.relay_positions();
        let mut min = f64::INFINITY;
        for (k, f) in self.followers.iter().enumerate() {
            let dist = self.shadow_dist;
            let rng = &mut self.shadow_rng;
            let s = sinr_at(
                &f.position,
                self.assignment[k],
                &self.powers,
                &relay_pos,
                self.radii.sensor,
                &self.channel,
                |_| dist.map(|d| d.sample(rng)).unwrap_or(0.0),
            )?;
            min = min.min(s);
        }
        Ok(min)
    }

    fn mark_coverage(&mut self) {
        let footprint = self.resolved.config.effective_relay_footprint();
        for r in &self.relays {
            self.grid.mark_disc(r.position.x, r.position.y, footprint);
        }
        let gv = self.gv;
        let followers: Vec<(Vec3, f64)> =
            self.followers.iter().map(|f| (f.position, f.heading)).collect();
        for (pos, heading) in followers {
            self.grid.mark_sector(&pos, heading, &gv);
        }
    }

    fn modes_string(&self) -> String {
        let mut parts: Vec<&str> = Vec::new();
        for r in &self.relays {
            parts.push(r.mode.code());
        }
        for f in &self.followers {
            parts.push(f.mode.code());
        }
        if let Some(a) = &self.adversary {
            parts.push(if self.adversary_active { a.mode.code() } else { "--" });
        }
        parts.join("|")
    }

    fn record_row(&mut self, t: f64, events: Vec<String>) -> Result<(), SimError> {
        self.mark_coverage();
        let (min_db, det_ok) = if self.followers.is_empty() {
            (f64::INFINITY, true)
        } else {
            let det = self.min_sinr_det()?;
            let realized = if self.shadow_dist.is_some() {
                self.min_sinr_realized()?
            } else {
                det
            };
            (to_db(realized), det >= self.channel.sinr_threshold)
        };
        if det_ok {
            self.sinr_ok_rows += 1;
        } else {
            self.summary.sinr_violation_steps += 1;
        }
        let nodes = self.nodes_with_base();
        let connected = check_connected(
            &nodes,
            self.relays.len(),
            &self.assignment,
            &self.follower_positions(),
            self.radii.comm,
        );
        self.rows.push(StepRow {
            t,
            coverage: self.grid.fraction(),
            min_sinr_db: min_db,
            connected,
            modes: self.modes_string(),
            events: events.join(";"),
        });
        Ok(())
    }

    /// Pre-motion pass: relay biases that shrink the serving separation and
    /// grow the interfering ones for every follower whose SINR constraint
    /// is unsatisfied (the mobility half of power control).
    fn apply_power_control(&mut self) -> Vec<Vec3> {
        let mut bias = vec![Vec3::zeros(); self.relays.len()];
        if !self.resolved.config.power_control {
            return bias;
        }
        let relay_pos = self.relay_positions();
        let follower_pos = self.follower_positions();
        let plans = power_control_targets(
            &self.assignment,
            &follower_pos,
            &relay_pos,
            &self.powers,
            self.radii.sensor,
            &self.channel,
            self.resolved.config.k_pc,
        );
        for plan in &plans {
            if plan.sinr_det >= self.channel.sinr_threshold {
                continue;
            }
            bias[plan.serving] += plan.bias;
            // Interfering relays are pushed off the struggling follower.
            for (j, rp) in relay_pos.iter().enumerate() {
                if j == plan.serving {
                    continue;
                }
                let away = rp - follower_pos[plan.follower];
                let l = away.norm();
                if l <= self.radii.sensor && l > 1e-12 {
                    bias[j] += away / l * self.resolved.config.k_pc;
                }
            }
        }
        bias
    }

    /// Power update at the current geometry: iterate the per-relay balance
    /// `P_i <- max over followers of P_i * T' / SINR_k` to its fixed point
    /// (clamped to `[p_nominal, p_max]`). Power is the fast actuator and
    /// settles within the step; feasible geometries end with every follower
    /// at or above the threshold, infeasible links are flagged.
    fn refresh_powers(&mut self, events: &mut Vec<String>) {
        if !self.resolved.config.power_control || self.followers.is_empty() {
            return;
        }
        let relay_pos = self.relay_positions();
        let follower_pos = self.follower_positions();
        let target = 1.05 * self.channel.sinr_threshold;

        for _ in 0..16 {
            let mut needed = vec![self.channel.p_nominal; self.relays.len()];
            for (k, fp) in follower_pos.iter().enumerate() {
                let serving = self.assignment[k];
                let sinr = deterministic_sinr(
                    fp,
                    serving,
                    &self.powers,
                    &relay_pos,
                    self.radii.sensor,
                    &self.channel,
                );
                if sinr.is_finite() && sinr > 0.0 {
                    let p = (self.powers[serving] * target / sinr).min(self.channel.p_max);
                    needed[serving] = needed[serving].max(p);
                }
            }
            let delta = self
                .powers
                .iter()
                .zip(&needed)
                .map(|(a, b)| (a - b).abs() / b.max(1e-12))
                .fold(0.0f64, f64::max);
            self.powers = needed;
            if delta < 1e-9 {
                break;
            }
        }

        // Anything still below threshold after the power round is a link
        // only mobility can fix; flag the ones that are infeasible even at
        // minimum separation and maximum power.
        let mut infeasible_step = false;
        for (k, fp) in follower_pos.iter().enumerate() {
            let serving = self.assignment[k];
            let sinr = deterministic_sinr(
                fp,
                serving,
                &self.powers,
                &relay_pos,
                self.radii.sensor,
                &self.channel,
            );
            if sinr >= self.channel.sinr_threshold {
                continue;
            }
            let mut denom = self.channel.noise_power;
            for (j, rp) in relay_pos.iter().enumerate() {
                if j != serving && (fp - rp).norm() <= self.radii.sensor {
                    denom += self.powers[j] * self.channel.deterministic_gain((fp - rp).norm());
                }
            }
            let best = self.channel.p_max * self.channel.deterministic_gain(self.channel.l_min)
                / denom.max(1e-300);
            if best < self.channel.sinr_threshold {
                infeasible_step = true;
                events.push(format!("infeasible_link:{k}"));
            }
        }
        if infeasible_step {
            self.summary.infeasible_link_steps += 1;
        }
    }


    fn run(mut self) -> Result<MetricsLog, SimError> {
        let cfg = &self.resolved.config;
        let dt = self.kin.dt;
        let steps = (cfg.duration / dt).round() as u64;

        // t = 0 row, with power control already enforced on the initial
        // geometry when enabled.
        let mut initial_events = Vec::new();
        self.refresh_powers(&mut initial_events);
        self.record_row(0.0, initial_events)?;

        let mut now = 0.0;
        for step in 0..steps {
            let mut events = Vec::new();

            // Topology snapshot for this step.
            let nodes = self.nodes_with_base();
            let relay_pos = self.relay_positions();
            let follower_pos = self.follower_positions();
            let spring_edges = gabriel_edges(&nodes).map_err(|e| SimError::Diverged {
                step,
                detail: format!("degenerate relay geometry: {e}"),
            })?;

            // Sense.
            if self.adversary_active {
                let adv_pos = self.adversary.as_ref().unwrap().position;
                for s in 0..self.n_sensors {
                    let p = detect_prob_ground(&adv_pos, &self.followers[s], &self.gv);
                    if p > 0.0 && sample_detection(&mut self.sensing_rng, p)? {
                        if self.ctls[s].track.is_none() {
                            events.push(format!("detect:s{s}"));
                        }
                        self.ctls[s].track = Some(crate::control::DetectionTrack {
                            position: adv_pos,
                            last_seen: now,
                        });
                    }
                }
            }
            for m in self.n_sensors..self.followers.len() {
                let p = detect_prob_ground(&self.target, &self.followers[m], &self.gv);
                if p > 0.0 && sample_detection(&mut self.sensing_rng, p)? {
                    if self.ctls[m].track.is_none() {
                        events.push(format!("detect:m{}", m - self.n_sensors));
                    }
                    self.ctls[m].track = Some(crate::control::DetectionTrack {
                        position: self.target,
                        last_seen: now,
                    });
                }
            }

            // Power control bias and transmit-power updates.
            let bias = self.apply_power_control();
            let pc_enabled = cfg.power_control;
            let powers_snapshot = self.powers.clone();
            let channel = self.channel;
            let interference_radius = self.radii.sensor;

            // Relay controls.
            let mut relay_acc = vec![Vec3::zeros(); self.relays.len()];
            for i in 0..self.relays.len() {
                let (mode, chase) = relay_mode_guard(
                    i,
                    &self.assignment,
                    &relay_pos,
                    &follower_pos,
                    self.radii.rest,
                    self.radii.comm,
                );
                let obstacle = match obstacle_repulsion(&relay_pos[i], &cfg.obstacles) {
                    Ok(f) => f,
                    Err(_) => {
                        events.push(format!("collision:r{i}"));
                        Vec3::zeros()
                    }
                };
                self.relays[i].mode = mode;
                relay_acc[i] = match (mode, chase) {
                    (BehaviorMode::Follower, Some(k)) => {
                        relay_follow_control(&relay_pos[i], &follower_pos[k], self.ctrl.alpha)
                            + obstacle
                            + bias[i]
                    }
                    _ => relay_control(
                        i,
                        &nodes,
                        &self.relays[i].velocity,
                        &spring_edges,
                        self.radii.rest,
                        &self.ctrl,
                        obstacle + bias[i],
                    ),
                };
            }

            // Follower controls.
            let mut commands = Vec::with_capacity(self.followers.len());
            for k in 0..self.followers.len() {
                let serving = self.assignment[k];
                let follower_range = if k < self.n_sensors {
                    self.radii.sensor
                } else {
                    self.radii.manip
                };
                let region = safe_goal_region(
                    relay_pos[serving],
                    follower_range,
                    self.radii.comm,
                    self.ctrl.broadcast_period,
                    self.kin.speeds.relay,
                )?;
                let goal_ok = |g: &Vec3| {
                    !pc_enabled
                        || sinr_goal_ok(
                            &channel,
                            &powers_snapshot,
                            &relay_pos,
                            interference_radius,
                            serving,
                            g,
                        )
                };
                // Repulsion from foreign relay footprints keeps follower
                // paths out of interference range.
                let mut follower_bias = Vec3::zeros();
                if pc_enabled {
                    let pos = self.followers[k].position;
                    let cutoff = 1.6 * interference_radius;
                    for (j, rp) in relay_pos.iter().enumerate() {
                        if j == serving {
                            continue;
                        }
                        let d = (rp - pos).norm();
                        if d <= cutoff {
                            let mut away = pos - rp;
                            away.z = 0.0;
                            let l = away.norm();
                            if l > 1e-9 {
                                follower_bias += away / l * (8.0 * (cutoff - d) / cutoff);
                            }
                        }
                    }
                }
                if k < self.n_sensors {
                    let mut cmd = sensor_control(
                        &self.followers[k],
                        &relay_pos[serving],
                        follower_range,
                        &region,
                        &cfg.obstacles,
                        &self.ctrl,
                        &mut self.ctls[k],
                        &self.gv,
                        now,
                        &mut self.search_rng,
                        goal_ok,
                        follower_bias,
                    );
                    if cmd.mode == BehaviorMode::Pursuit && self.adversary_active {
                        let adv = self.adversary.as_ref().unwrap().position;
                        if crate::planar_distance(&self.followers[k].position, &adv)
                            < self.ctrl.capture_radius
                        {
                            self.adversary_active = false;
                            self.summary.adversary_capture_time = Some(now);
                            events.push("capture:adversary".to_string());
                        }
                    }
                    if matches!(cmd.mode, BehaviorMode::Search | BehaviorMode::Tether) {
                        self.sinr_emergency_homing(k, serving, &relay_pos, &mut cmd);
                    }
                    self.followers[k].mode = cmd.mode;
                    commands.push((cmd.v, cmd.gamma_d));
                } else {
                    let fresh = self.ctls[k]
                        .track
                        .map(|t| now - t.last_seen <= self.ctrl.lost_timeout)
                        .unwrap_or(false);
                    if fresh {
                        let mc = manipulation_control(
                            &self.followers[k],
                            &self.target,
                            &self.arm,
                            self.ctrl.alpha,
                            self.ctrl.manip_success_radius,
                            &self.ctrl.steering,
                        );
                        if mc.success && self.terminal.is_none() {
                            self.terminal = Some("manipulation_success".to_string());
                            self.summary.manipulation_success_time = Some(now);
                            events.push(format!("manip_success:m{}", k - self.n_sensors));
                        }
                        self.followers[k].mode = BehaviorMode::Manipulate;
                        commands.push((mc.v, mc.gamma_d));
                    } else {
                        self.ctls[k].track = None;
                        let mut cmd = sensor_control(
                            &self.followers[k],
                            &relay_pos[serving],
                            follower_range,
                            &region,
                            &cfg.obstacles,
                            &self.ctrl,
                            &mut self.ctls[k],
                            &self.gv,
                            now,
                            &mut self.search_rng,
                            goal_ok,
                            follower_bias,
                        );
                        if matches!(cmd.mode, BehaviorMode::Search | BehaviorMode::Tether) {
                            self.sinr_emergency_homing(k, serving, &relay_pos, &mut cmd);
                        }
                        self.followers[k].mode = cmd.mode;
                        commands.push((cmd.v, cmd.gamma_d));
                    }
                }
            }

            // Adversary control and manipulator capture.
            let adv_cmd = if self.adversary_active {
                let adv = self.adversary.as_ref().unwrap();
                let manips: Vec<Vec3> =
                    follower_pos[self.n_sensors..].to_vec();
                let sensors: Vec<Vec3> = follower_pos[..self.n_sensors].to_vec();
                for (q, m) in manips.iter().enumerate() {
                    if crate::planar_distance(&adv.position, m) < self.ctrl.capture_radius
                        && self.terminal.is_none()
                    {
                        self.terminal = Some("adversary_captured_manipulator".to_string());
                        self.summary.manipulator_lost_time = Some(now);
                        events.push(format!("captured:m{q}"));
                    }
                }
                let cmd = adversary_policy(adv, &self.target, &manips, &sensors, &self.ctrl);
                self.adversary.as_mut().unwrap().mode = cmd.mode;
                Some(cmd)
            } else {
                None
            };

            // Integrate relays with the connectivity velocity clamp.
            for i in 0..self.relays.len() {
                let state = self.relays[i];
                let mut v = state.velocity + relay_acc[i] * dt;
                v.z = 0.0;
                let vmax = self.kin.speeds.relay;
                let n = v.norm();
                if n > vmax {
                    v *= vmax / n;
                }
                for &(a, b) in &spring_edges {
                    let j = if a == i {
                        b
                    } else if b == i {
                        a
                    } else {
                        continue;
                    };
                    let d = state.position - nodes[j];
                    let l = d.norm();
                    if l >= self.relay_guard && l > 1e-12 {
                        let e = d / l;
                        let outward = v.dot(&e);
                        if outward > 0.0 {
                            v -= e * outward;
                        }
                    }
                }
                // Power-control counterpart of the connectivity clamp: never
                // close in on a foreign follower already near interference
                // range.
                if cfg.power_control {
                    for (k, fp) in follower_pos.iter().enumerate() {
                        if self.assignment[k] == i {
                            continue;
                        }
                        let d = fp - state.position;
                        if d.norm() <= 1.3 * self.radii.sensor {
                            let planar = Vec3::new(d.x, d.y, 0.0);
                            let l = planar.norm();
                            if l > 1e-12 {
                                let e = planar / l;
                                let approach = v.dot(&e);
                                if approach > 0.0 {
                                    v -= e * approach;
                                }
                            }
                        }
                    }
                }
                let mut pos = state.position + v * dt;
                let (w, h) = cfg.workspace;
                if pos.x < 0.2 || pos.x > w - 0.2 {
                    pos.x = pos.x.clamp(0.2, w - 0.2);
                    v.x = 0.0;
                }
                if pos.y < 0.2 || pos.y > h - 0.2 {
                    pos.y = pos.y.clamp(0.2, h - 0.2);
                    v.y = 0.0;
                }
                self.relays[i].position = pos;
                self.relays[i].velocity = v;
            }

            // Integrate followers with the radial stop.
            for k in 0..self.followers.len() {
                let (mut v_cmd, gamma_d) = commands[k];
                let serving = self.assignment[k];
                let rel = self.followers[k].position - relay_pos[serving];
                if rel.norm() >= self.follower_stop {
                    let planar = Vec3::new(rel.x, rel.y, 0.0);
                    if planar.norm() > 1e-9 {
                        let outward = planar / planar.norm();
                        let heading = self.followers[k].heading;
                        if Vec3::new(heading.cos(), heading.sin(), 0.0).dot(&outward) > 0.0 {
                            v_cmd = 0.0;
                        }
                    }
                }
                self.followers[k] = step_bicycle(&self.followers[k], v_cmd, gamma_d, &self.kin)?;
                let (w, h) = cfg.workspace;
                let p = &mut self.followers[k].position;
                p.x = p.x.clamp(0.1, w - 0.1);
                p.y = p.y.clamp(0.1, h - 0.1);
            }

            // Integrate the adversary.
            if let Some(cmd) = adv_cmd {
                let adv = self.adversary.as_mut().unwrap();
                *adv = step_bicycle(adv, cmd.v, cmd.gamma_d, &self.kin)?;
                let (w, h) = cfg.workspace;
                adv.position.x = adv.position.x.clamp(0.1, w - 0.1);
                adv.position.y = adv.position.y.clamp(0.1, h - 0.1);
            }

            now = (step + 1) as f64 * dt;

            // Numeric integrity.
            let finite = self
                .relays
                .iter()
                .chain(self.followers.iter())
                .all(|s| s.position.iter().all(|c| c.is_finite()));
            if !finite {
                return Err(SimError::Diverged {
                    step,
                    detail: "non-finite agent position".to_string(),
                });
            }

            // Consensus sweeps per follower class.
            if now >= self.next_consensus {
                let moved = self.run_consensus();
                if moved > 0 {
                    events.push(format!("consensus:{moved}"));
                }
                self.next_consensus += cfg.consensus_period;
            }

            self.refresh_powers(&mut events);
            self.record_row(now, events)?;
            if self.terminal.is_some() {
                break;
            }
        }

        self.summary.steps = self.rows.len() as u64 - 1;
        self.summary.duration = now;
        self.summary.coverage_final = self.rows.last().map(|r| r.coverage).unwrap_or(0.0);
        self.summary.connected_fraction =
            self.rows.iter().filter(|r| r.connected).count() as f64 / self.rows.len() as f64;
        if !self.followers.is_empty() {
            self.summary.sinr_ok_fraction =
                Some(self.sinr_ok_rows as f64 / self.rows.len() as f64);
        }
        self.summary.min_sinr_db_overall = self
            .rows
            .iter()
            .map(|r| r.min_sinr_db)
            .filter(|v| v.is_finite())
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
        if let Some(t) = &self.terminal {
            self.summary.terminal = t.clone();
        }
        self.summary.final_kinetic_energy =
            Some(self.relays.iter().map(|r| 0.5 * r.velocity.norm_squared()).sum());

        Ok(MetricsLog { rows: self.rows, summary: self.summary, tag_events: vec![] })
    }

    /// If the follower's current spot cannot meet the SINR constraint even
    /// with the power round applied, searching is preempted by a straight
    /// drive toward the serving relay (separation shrinks, interferers drop
    /// out of range).
    fn sinr_emergency_homing(
        &self,
        k: usize,
        serving: usize,
        relay_pos: &[Vec3],
        cmd: &mut crate::control::Command,
    ) {
        if !self.resolved.config.power_control {
            return;
        }
        let sinr = deterministic_sinr(
            &self.followers[k].position,
            serving,
            &self.powers,
            relay_pos,
            self.radii.sensor,
            &self.channel,
        );
        if sinr < self.channel.sinr_threshold {
            let pos = self.followers[k].position;
            let mut u = relay_pos[serving] - pos;
            u.z = 0.0;
            if u.norm() > 1e-9 {
                u /= u.norm();
            }
            // Also flee the strongest interferer in range.
            let worst = relay_pos
                .iter()
                .enumerate()
                .filter(|&(j, rp)| j != serving && (rp - pos).norm() <= self.radii.sensor)
                .min_by(|a, b| {
                    (a.1 - pos).norm().partial_cmp(&(b.1 - pos).norm()).unwrap()
                });
            if let Some((_, rp)) = worst {
                let mut away = pos - rp;
                away.z = 0.0;
                if away.norm() > 1e-9 {
                    u += away / away.norm();
                }
            }
            let (v, gamma_d) = crate::control::steer_toward(
                &(u * self.ctrl.alpha),
                &self.followers[k],
                &self.ctrl.steering,
            );
            cmd.v = v;
            cmd.gamma_d = gamma_d;
        }
    }

    /// One consensus sweep for sensors, one for manipulators. Handovers are
    /// refused when the new link could not meet the SINR constraint.
    fn run_consensus(&mut self) -> usize {
        let relay_pos = self.relay_positions();
        let pc = self.resolved.config.power_control;
        let channel = self.channel;
        let powers = self.powers.clone();
        let interference_radius = self.radii.sensor;
        let mut moved = 0;
        for class_range in [0..self.n_sensors, self.n_sensors..self.followers.len()] {
            let indices: Vec<usize> = class_range.collect();
            if indices.is_empty() {
                continue;
            }
            let positions: Vec<Vec3> =
                indices.iter().map(|&k| self.followers[k].position).collect();
            let mut sub: Vec<usize> = indices.iter().map(|&k| self.assignment[k]).collect();
            let viable = |slot: usize, dest: usize| {
                !pc || sinr_goal_ok(
                    &channel,
                    &powers,
                    &relay_pos,
                    interference_radius,
                    dest,
                    &positions[slot],
                )
            };
            let outcome = consensus_step_guarded(
                &mut sub,
                &relay_pos,
                &positions,
                self.radii.comm,
                viable,
            );
            moved += outcome.moved.len();
            for (slot, &k) in indices.iter().enumerate() {
                self.assignment[k] = sub[slot];
            }
        }
        moved
    }
}

/// Deterministic SINR of one follower link under the given powers.
fn deterministic_sinr(
    follower_pos: &Vec3,
    serving: usize,
    powers: &[f64],
    relay_pos: &[Vec3],
    interference_radius: f64,
    channel: &ChannelModel,
) -> f64 {
    let mut denom = channel.noise_power;
    for (j, rp) in relay_pos.iter().enumerate() {
        if j == serving {
            continue;
        }
        let l = (follower_pos - rp).norm();
        if l <= interference_radius {
            denom += powers[j] * channel.deterministic_gain(l);
        }
    }
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    let l = (follower_pos - relay_pos[serving]).norm();
    powers[serving] * channel.deterministic_gain(l) / denom
}

/// Goal veto used by the power controller: a candidate search goal must
/// satisfy the deterministic SINR constraint at nominal serving power with
/// some margin, given current interferer powers. Keeping followers out of
/// regions the power budget cannot serve is the mobility half of power
/// control.
fn sinr_goal_ok(
    channel: &ChannelModel,
    powers: &[f64],
    relay_pos: &[Vec3],
    interference_radius: f64,
    serving: usize,
    goal: &Vec3,
) -> bool {
    let mut denom = channel.noise_power;
    for (j, rp) in relay_pos.iter().enumerate() {
        if j == serving {
            continue;
        }
        let l = (goal - rp).norm();
        if l <= interference_radius {
            denom += powers[j] * channel.deterministic_gain(l);
        }
    }
    if denom <= 0.0 {
        return true;
    }
    let l = (goal - relay_pos[serving]).norm();
    let sinr = channel.p_nominal * channel.deterministic_gain(l) / denom;
    sinr >= 1.3 * channel.sinr_threshold
}

fn run_foraging(resolved: &ResolvedScenario) -> Result<MetricsLog, SimError> {
    let cfg = &resolved.config;
    let fb = &cfg.foraging;

    let mut kin = KinematicParams {
        wheelbase: 0.08,
        servo_gain: 8.0,
        steer_max: cfg.kinematics.steer_max,
        dt: cfg.kinematics.dt,
        speeds: cfg.kinematics.speeds,
    };
    // Forager speed limit must admit the commanded travel speed.
    let params = cfg.forager_params()?;
    kin.speeds.forager = kin.speeds.forager.max(params.travel_speed);

    let ecfg = EpisodeConfig {
        arena_side: fb.arena_side,
        n_foragers: fb.n_foragers,
        layout: fb.clusters,
        drone_enabled: fb.drone_enabled,
        duration: cfg.duration,
        params,
        kinematics: kin,
        drone_speed: fb.drone_speed,
        drone_altitude: fb.drone_altitude,
        drone_lane_spacing: fb.drone_lane_spacing,
        drone_vision_spread: fb.drone_vision_spread,
        tag_detection_rate: fb.tag_detection_rate,
        seed: cfg.seed,
    };
    let mut ep = Episode::new(ecfg)?;

    let res = cfg.grid_resolution.min(fb.arena_side / 10.0);
    let empty = ObstacleField {
        obstacles: vec![],
        eta: 0.0,
        outer_radius: 1.0,
        inner_radius: 0.5,
        ref_distance: 1.0,
    };
    let mut grid = CoverageGrid::new(fb.arena_side, fb.arena_side, res, &empty);

    let mut summary = Summary::new("foraging", cfg.seed);
    summary.duration = cfg.duration;
    let mut rows: Vec<StepRow> = Vec::new();

    let record = |ep: &Episode, grid: &mut CoverageGrid, t: f64, events: String| {
        for f in &ep.foragers {
            grid.mark_disc(f.state.position.x, f.state.position.y, 0.1);
        }
        if let Some(d) = &ep.drone {
            grid.mark_disc(d.state.position.x, d.state.position.y, d.footprint);
        }
        let modes: Vec<&str> = ep
            .foragers
            .iter()
            .map(|f| f.phase_name())
            .chain(ep.drone.iter().map(|_| "sweep"))
            .collect();
        StepRow {
            t,
            coverage: grid.fraction(),
            min_sinr_db: f64::INFINITY,
            connected: true,
            modes: modes.join("|"),
            events,
        }
    };

    rows.push(record(&ep, &mut grid, 0.0, String::new()));
    while !ep.done() {
        let events = ep.step()?;
        let strings: Vec<String> = events
            .iter()
            .map(|(_, e)| match e {
                ForageEvent::TagCollected { robot, tag, cluster } => {
                    format!("tag:r{robot}:t{tag}:c{cluster}")
                }
                ForageEvent::PheromoneLaid { robot } => format!("pher:r{robot}"),
                ForageEvent::WaypointFollowed { robot } => format!("wp:r{robot}"),
                ForageEvent::WallBounce { robot } => format!("bounce:r{robot}"),
                ForageEvent::RoundelReported { cluster } => format!("roundel:c{cluster}"),
            })
            .collect();
        rows.push(record(&ep, &mut grid, ep.now, strings.join(";")));
    }

    summary.steps = rows.len() as u64 - 1;
    summary.coverage_final = rows.last().map(|r| r.coverage).unwrap_or(0.0);
    summary.connected_fraction = 1.0;
    summary.tags_collected = ep.collections.len() as u64;
    summary.tags_per_hour = Some(ep.collections.len() as f64 / (cfg.duration / 3600.0));
    summary.terminal = if ep.world.remaining() == 0 {
        "all_tags".to_string()
    } else {
        "duration".to_string()
    };

    Ok(MetricsLog { rows, summary, tag_events: ep.collections.clone() })
}
