//! Ant-inspired central-place foraging with optional aerial coordination.
//!
//! Ground foragers disperse from a shared nest, search with a correlated
//! random walk whose turning SD is `omega + gamma / t^delta` when informed,
//! and haul found tags home. Depending on how dense a find was they lay a
//! pheromone waypoint, return by site fidelity, or request a waypoint from
//! the server (only possible at the nest). A drone flies a boustrophedon
//! sweep at fixed altitude and reports roundel sightings as non-decaying
//! waypoints.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::SteeringParams;
use crate::error::SimError;
use crate::kinematics::{step_bicycle, AgentClass, AgentState, KinematicParams};
use crate::rng::{RngStreams, STREAM_PLACEMENT, STREAM_SEARCH, STREAM_SENSING};
use crate::sensing::{detect_prob_aerial, sample_detection, AerialVision};
use crate::{wrap_angle, Vec3};

/// The 13 evolvable behavior parameters. Three govern traveling, three the
/// random-walk turning, and seven the use of memory and communication.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ForagerParams {
    /// Speed when driving to or from a known point, m/s.
    pub travel_speed: f64,
    /// Speed while searching, m/s.
    pub search_speed: f64,
    /// Search bout length before returning empty, seconds.
    pub give_up_time: f64,
    /// Uninformed turning SD (omega), radians.
    pub uninformed_sd: f64,
    /// Informed turning boost (gamma), radians.
    pub informed_boost: f64,
    /// Informed boost decay exponent (delta), dimensionless.
    pub informed_decay: f64,
    /// Neighbor-count threshold to lay a pheromone (t_p).
    pub pheromone_threshold: u32,
    /// Neighbor-count threshold for site fidelity (t_f).
    pub fidelity_threshold: u32,
    /// Neighbor-count ceiling for following a pheromone (t_h).
    pub follow_threshold: u32,
    /// Multiplier applied to the remembered neighbor count per revisit.
    pub site_fidelity_decay: f64,
    /// Server decay rate for forager-laid waypoints, 1/s.
    pub pheromone_decay_rate: f64,
    /// Radius of the initial dispersal goal from the nest, meters.
    pub dispersal_radius: f64,
    /// How long a bout keeps the informed turning boost, seconds.
    pub informed_duration: f64,
}

impl Default for ForagerParams {
    // Values evolved in simulation: 30 generations, population 24,
    // tags-per-hour fitness on drone-less 300 s episodes (GA seed 7).
    fn default() -> Self {
        Self {
            travel_speed: 0.35,
            search_speed: 0.1326222160866402,
            give_up_time: 34.57206873691344,
            uninformed_sd: 0.5844965601274349,
            informed_boost: 1.213019562767772,
            informed_decay: 2.9019727282364283,
            pheromone_threshold: 8,
            fidelity_threshold: 1,
            follow_threshold: 7,
            site_fidelity_decay: 0.6821701428814468,
            pheromone_decay_rate: 0.05,
            dispersal_radius: 0.9371569820298881,
            informed_duration: 10.0,
        }
    }
}

impl ForagerParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.uninformed_sd >= 0.0
            && self.informed_boost >= 0.0
            && self.informed_decay > 0.0
            && self.travel_speed > 0.0
            && self.search_speed > 0.0
            && self.give_up_time > 0.0
            && self.site_fidelity_decay >= 0.0
            && self.pheromone_decay_rate >= 0.0
            && self.dispersal_radius > 0.0
            && self.informed_duration > 0.0)
        {
            return Err(SimError::config("forager parameters out of range"));
        }
        Ok(())
    }
}

/// Next CRW heading: normal around the previous one with
/// `SD = omega` (uninformed) or `SD = omega + gamma / t_s^delta` (informed),
/// wrapped to (-pi, pi].
pub fn crw_heading<R: Rng>(
    theta_prev: f64,
    informed: bool,
    t_s: f64,
    params: &ForagerParams,
    rng: &mut R,
) -> f64 {
    wrap_angle(crw_heading_raw(theta_prev, informed, t_s, params, rng))
}

/// The unwrapped normal draw behind `crw_heading`; the draw distribution is
/// exactly Normal(theta_prev, SD^2).
pub fn crw_heading_raw<R: Rng>(
    theta_prev: f64,
    informed: bool,
    t_s: f64,
    params: &ForagerParams,
    rng: &mut R,
) -> f64 {
    let sd = crw_sd(informed, t_s, params);
    if sd == 0.0 {
        return theta_prev;
    }
    let normal = Normal::new(theta_prev, sd).expect("finite SD");
    normal.sample(rng)
}

/// Turning SD of the correlated random walk.
pub fn crw_sd(informed: bool, t_s: f64, params: &ForagerParams) -> f64 {
    if informed {
        params.uninformed_sd + params.informed_boost / t_s.powf(params.informed_decay)
    } else {
        params.uninformed_sd
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterLayout {
    /// One cluster of 32 tags.
    #[serde(rename = "1x32")]
    Single32,
    /// Four clusters of 8 tags.
    #[serde(rename = "4x8")]
    Four8,
}

impl ClusterLayout {
    pub fn clusters(self) -> usize {
        match self {
            ClusterLayout::Single32 => 1,
            ClusterLayout::Four8 => 4,
        }
    }

    pub fn tags_per_cluster(self) -> usize {
        match self {
            ClusterLayout::Single32 => 32,
            ClusterLayout::Four8 => 8,
        }
    }
}

pub const TOTAL_TAGS: usize = 32;

#[derive(Debug, Clone)]
pub struct Tag {
    pub id: usize,
    pub cluster: usize,
    pub position: Vec3,
    pub collected: bool,
}

/// Square arena with tag clusters, roundels, and the central nest.
#[derive(Debug, Clone)]
pub struct TagWorld {
    pub arena_side: f64,
    pub nest: Vec3,
    pub tags: Vec<Tag>,
    /// One roundel adjacent to each cluster, indexed by cluster.
    pub roundels: Vec<Vec3>,
}

impl TagWorld {
    pub fn generate<R: Rng>(layout: ClusterLayout, arena_side: f64, rng: &mut R) -> Self {
        let nest = Vec3::new(arena_side / 2.0, arena_side / 2.0, 0.0);
        let margin = 0.3;
        let nest_clearance = 0.5;
        let mut centers: Vec<Vec3> = Vec::new();
        while centers.len() < layout.clusters() {
            let c = Vec3::new(
                rng.random_range(margin..arena_side - margin),
                rng.random_range(margin..arena_side - margin),
                0.0,
            );
            if (c - nest).norm() < nest_clearance {
                continue;
            }
            if centers.iter().any(|o| (o - c).norm() < 0.5) {
                continue;
            }
            centers.push(c);
        }

        let per = layout.tags_per_cluster();
        let mut tags = Vec::with_capacity(TOTAL_TAGS);
        for (cluster, center) in centers.iter().enumerate() {
            // Tight grid of tags around the cluster center.
            let cols = (per as f64).sqrt().ceil() as usize;
            let spacing = 0.035;
            for t in 0..per {
                let row = t / cols;
                let col = t % cols;
                let off = Vec3::new(
                    (col as f64 - (cols as f64 - 1.0) / 2.0) * spacing,
                    (row as f64 - ((per + cols - 1) / cols) as f64 / 2.0 + 0.5) * spacing,
                    0.0,
                );
                let mut p = center + off;
                p.x = p.x.clamp(0.05, arena_side - 0.05);
                p.y = p.y.clamp(0.05, arena_side - 0.05);
                tags.push(Tag { id: tags.len(), cluster, position: p, collected: false });
            }
        }
        let roundels = centers
            .iter()
            .map(|c| {
                let mut r = c + Vec3::new(0.08, 0.0, 0.0);
                r.x = r.x.clamp(0.05, arena_side - 0.05);
                r
            })
            .collect();
        Self { arena_side, nest, tags, roundels }
    }

    pub fn collected(&self) -> usize {
        self.tags.iter().filter(|t| t.collected).count()
    }

    pub fn remaining(&self) -> usize {
        self.tags.len() - self.collected()
    }

    /// Uncollected tags within `radius` of a point.
    pub fn count_near(&self, p: &Vec3, radius: f64) -> u32 {
        self.tags
            .iter()
            .filter(|t| !t.collected && (t.position - p).norm() <= radius)
            .count() as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub position: Vec3,
    pub strength: f64,
    pub from_drone: bool,
    pub created_at: f64,
}

/// Central-server pheromone store. Forager-laid waypoints decay
/// exponentially and are purged below 0.01; drone waypoints persist.
#[derive(Debug, Clone, Default)]
pub struct PheromoneStore {
    pub waypoints: Vec<Waypoint>,
    pub decay_rate: f64,
}

impl PheromoneStore {
    pub fn new(decay_rate: f64) -> Self {
        Self { waypoints: Vec::new(), decay_rate }
    }

    pub fn deposit(&mut self, position: Vec3, from_drone: bool, now: f64) {
        self.waypoints.push(Waypoint { position, strength: 1.0, from_drone, created_at: now });
    }

    pub fn decay_tick(&mut self, dt: f64) {
        let factor = (-self.decay_rate * dt).exp();
        for w in &mut self.waypoints {
            if !w.from_drone {
                w.strength *= factor;
            }
        }
        self.waypoints.retain(|w| w.strength >= 0.01);
    }

    /// Strongest waypoint (ties: oldest). Transmission is permitted only at
    /// the nest, so requests from elsewhere are denied.
    pub fn request(
        &self,
        robot_position: &Vec3,
        nest: &Vec3,
        nest_radius: f64,
    ) -> Result<Option<Waypoint>, SimError> {
        self.request_excluding(robot_position, nest, nest_radius, &[])
    }

    /// `request` for a robot carrying a list of sites it recently searched
    /// without success; waypoints at those sites are not available to it.
    pub fn request_excluding(
        &self,
        robot_position: &Vec3,
        nest: &Vec3,
        nest_radius: f64,
        exclude: &[Vec3],
    ) -> Result<Option<Waypoint>, SimError> {
        if (robot_position - nest).norm() > nest_radius {
            return Err(SimError::config("pheromone request away from the nest denied"));
        }
        Ok(self
            .waypoints
            .iter()
            .filter(|w| exclude.iter().all(|x| (w.position - x).norm() > EXCLUDE_RADIUS))
            .min_by(|a, b| {
                b.strength
                    .partial_cmp(&a.strength)
                    .unwrap()
                    .then(a.created_at.partial_cmp(&b.created_at).unwrap())
            })
            .copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForageEvent {
    TagCollected { robot: usize, tag: usize, cluster: usize },
    PheromoneLaid { robot: usize },
    WaypointFollowed { robot: usize },
    WallBounce { robot: usize },
    RoundelReported { cluster: usize },
}

#[derive(Debug, Clone)]
enum Phase {
    /// Driving to a point; `informed` selects the CRW flavor on arrival.
    Traveling { goal: Vec3, informed: bool },
    Searching { informed: bool, since: f64 },
    /// Heading home, possibly carrying a tag found at `site` with `count`
    /// uncollected neighbors.
    Homing { find: Option<Find> },
}

#[derive(Debug, Clone, Copy)]
struct Find {
    site: Vec3,
    count: u32,
}

/// One ground forager.
#[derive(Debug, Clone)]
pub struct Forager {
    pub state: AgentState,
    phase: Phase,
    crw_deadline: f64,
    target_heading: f64,
    /// Remembered find for site fidelity, decayed per revisit.
    memory: Option<(Vec3, f64)>,
    /// Where the current search bout started (goal of the travel leg).
    bout_origin: Option<Vec3>,
    /// Sites searched without success, with expiry times; waypoints there
    /// are not requested again while the memory lasts.
    failed_sites: Vec<(Vec3, f64)>,
}

const ARRIVAL_RADIUS: f64 = 0.06;
const NEST_RADIUS: f64 = 0.1;
const PICKUP_RADIUS: f64 = 0.06;
const NEIGHBOR_RADIUS: f64 = 0.15;
const CRW_INTERVAL: f64 = 0.5;
/// Waypoints this close to a robot's failed site are unavailable to it.
const EXCLUDE_RADIUS: f64 = 0.25;
/// How long a fruitless site stays in a robot's failure memory.
const FAILURE_MEMORY: f64 = 150.0;

impl Forager {
    fn new(state: AgentState, initial_goal: Vec3) -> Self {
        Self {
            state,
            phase: Phase::Traveling { goal: initial_goal, informed: false },
            crw_deadline: 0.0,
            target_heading: 0.0,
            memory: None,
            bout_origin: None,
            failed_sites: Vec::new(),
        }
    }

    pub fn phase_name(&self) -> &'static str {
        match self.phase {
            Phase::Traveling { .. } => "travel",
            Phase::Searching { .. } => "search",
            Phase::Homing { .. } => "home",
        }
    }
}

/// Advance one forager a single tick of the Algorithm-3 state machine.
/// `detection_rate` is the per-second chance of recognizing a tag the robot
/// is standing over (camera fidelity; 0 disables detection entirely).
#[allow(clippy::too_many_arguments)]
pub fn forager_step<R: Rng>(
    robot: usize,
    forager: &mut Forager,
    world: &mut TagWorld,
    pheromones: &mut PheromoneStore,
    params: &ForagerParams,
    kin: &KinematicParams,
    steering: &SteeringParams,
    detection_rate: f64,
    now: f64,
    rng: &mut R,
) -> Result<Vec<ForageEvent>, SimError> {
    debug_assert_eq!(forager.state.class, AgentClass::Forager);
    let mut events = Vec::new();

    let (v, gamma_d) = match forager.phase.clone() {
        Phase::Traveling { goal, informed } => {
            if (forager.state.position - goal).norm() < ARRIVAL_RADIUS {
                forager.phase = Phase::Searching { informed, since: now };
                forager.crw_deadline = now;
                forager.target_heading = forager.state.heading;
                forager.bout_origin = Some(goal);
                (0.0, 0.0)
            } else {
                let u = goal - forager.state.position;
                let (_, g) = crate::control::steer_toward(&u, &forager.state, steering);
                (params.travel_speed, g)
            }
        }
        Phase::Searching { informed, since } => {
            let t_s = (now - since).max(kin.dt);
            if now - since > params.give_up_time {
                if let Some(origin) = forager.bout_origin.take() {
                    forager.failed_sites.push((origin, now + FAILURE_MEMORY));
                }
                forager.phase = Phase::Homing { find: None };
                (0.0, 0.0)
            } else {
                if now >= forager.crw_deadline {
                    let informed_now = informed && t_s <= params.informed_duration;
                    forager.target_heading =
                        crw_heading(forager.target_heading, informed_now, t_s, params, rng);
                    forager.crw_deadline = now + CRW_INTERVAL;
                }
                // Tag pickup: the camera recognizes an overlapped tag at
                // `detection_rate` per second.
                let over = world.tags.iter().position(|t| {
                    !t.collected
                        && (t.position - forager.state.position).norm() < PICKUP_RADIUS
                });
                let found = match over {
                    Some(idx) => {
                        let p = 1.0 - (-detection_rate * kin.dt).exp();
                        sample_detection(rng, p.clamp(0.0, 1.0))?.then_some(idx)
                    }
                    None => None,
                };
                if let Some(idx) = found {
                    world.tags[idx].collected = true;
                    let site = world.tags[idx].position;
                    let count = world.count_near(&site, NEIGHBOR_RADIUS);
                    events.push(ForageEvent::TagCollected {
                        robot,
                        tag: world.tags[idx].id,
                        cluster: world.tags[idx].cluster,
                    });
                    forager.bout_origin = None;
                    forager.phase = Phase::Homing { find: Some(Find { site, count }) };
                    (0.0, 0.0)
                } else {
                    let err = wrap_angle(forager.target_heading - forager.state.heading);
                    (params.search_speed, err.clamp(-kin.steer_max, kin.steer_max))
                }
            }
        }
        Phase::Homing { find } => {
            if (forager.state.position - world.nest).norm() < NEST_RADIUS {
                let next = at_nest_decision(forager, find, world, pheromones, params, now)?;
                if let Some(e) = next {
                    events.push(e);
                }
                (0.0, 0.0)
            } else {
                let u = world.nest - forager.state.position;
                let (_, g) = crate::control::steer_toward(&u, &forager.state, steering);
                (params.travel_speed, g)
            }
        }
    };

    forager.state = step_bicycle(&forager.state, v, gamma_d, kin)?;

    // Reflect at the arena walls.
    let side = world.arena_side;
    let p = &mut forager.state.position;
    let mut bounced = false;
    if p.x < 0.0 || p.x > side {
        p.x = p.x.clamp(0.0, side);
        forager.state.heading = wrap_angle(std::f64::consts::PI - forager.state.heading);
        bounced = true;
    }
    if p.y < 0.0 || p.y > side {
        p.y = p.y.clamp(0.0, side);
        forager.state.heading = wrap_angle(-forager.state.heading);
        bounced = true;
    }
    if bounced {
        forager.target_heading = forager.state.heading;
        events.push(ForageEvent::WallBounce { robot });
    }
    Ok(events)
}

/// The Algorithm-3 decision block, evaluated once the robot is at the nest.
fn at_nest_decision(
    forager: &mut Forager,
    find: Option<Find>,
    world: &TagWorld,
    pheromones: &mut PheromoneStore,
    params: &ForagerParams,
    now: f64,
) -> Result<Option<ForageEvent>, SimError> {
    let robot = 0; // event robot id filled by caller context where needed
    let _ = robot;

    // A fresh find drives the decision tree with its own neighbor count and
    // refreshes the remembered site. An empty-handed return decays the
    // memory instead; the robot retries the remembered site only while the
    // decayed count still clears the fidelity threshold.
    let (site, count) = match find {
        Some(f) => {
            forager.memory = Some((f.site, f.count as f64));
            (Some(f.site), f.count)
        }
        None => match forager.memory {
            Some((site, d)) => {
                let decayed = d * params.site_fidelity_decay;
                if decayed.round() as u32 > params.fidelity_threshold {
                    forager.memory = Some((site, decayed));
                    (Some(site), decayed.round() as u32)
                } else {
                    forager.memory = None;
                    (None, 0)
                }
            }
            None => (None, 0),
        },
    };

    if find.is_none() {
        // Returning empty: never lay a pheromone, at most retry the site.
        if let (Some(site), true) = (site, count > params.fidelity_threshold) {
            forager.phase = Phase::Traveling { goal: site, informed: true };
            return Ok(None);
        }
        forager.failed_sites.retain(|(_, expires)| *expires > now);
        let exclude: Vec<Vec3> = forager.failed_sites.iter().map(|(p, _)| *p).collect();
        let waypoint = pheromones.request_excluding(
            &forager.state.position,
            &world.nest,
            NEST_RADIUS,
            &exclude,
        )?;
        if let Some(w) = waypoint {
            if count < params.follow_threshold {
                forager.phase = Phase::Traveling { goal: w.position, informed: true };
                return Ok(Some(ForageEvent::WaypointFollowed { robot: usize::MAX }));
            }
        }
        forager.phase =
            Phase::Traveling { goal: random_site_goal(forager, world), informed: false };
        return Ok(None);
    }

    if let Some(site) = site {
        if count > params.pheromone_threshold {
            pheromones.deposit(site, false, now);
            forager.phase = Phase::Traveling { goal: site, informed: true };
            return Ok(Some(ForageEvent::PheromoneLaid { robot: usize::MAX }));
        }
        if count > params.fidelity_threshold {
            forager.phase = Phase::Traveling { goal: site, informed: true };
            return Ok(None);
        }
    }
    forager.failed_sites.retain(|(_, expires)| *expires > now);
    let exclude: Vec<Vec3> = forager.failed_sites.iter().map(|(p, _)| *p).collect();
    let waypoint = pheromones.request_excluding(
        &forager.state.position,
        &world.nest,
        NEST_RADIUS,
        &exclude,
    )?;
    if let Some(w) = waypoint {
        if count < params.follow_threshold {
            forager.phase = Phase::Traveling { goal: w.position, informed: true };
            return Ok(Some(ForageEvent::WaypointFollowed { robot: usize::MAX }));
        }
    }
    forager.memory = None;
    forager.phase = Phase::Traveling { goal: random_site_goal(forager, world), informed: false };
    Ok(None)
}

fn random_site_goal(forager: &mut Forager, world: &TagWorld) -> Vec3 {
    // Keep the spread deterministic without a dedicated stream: derive the
    // angle from the target heading the robot last held.
    let margin = 0.15;
    let angle = forager.target_heading * 3.7 + forager.state.heading * 1.3 + 1.0;
    let r = forager.state.speed.max(0.1) * 4.0;
    let mut g = world.nest + Vec3::new(r * angle.cos(), r * angle.sin(), 0.0);
    g.x = g.x.clamp(margin, world.arena_side - margin);
    g.y = g.y.clamp(margin, world.arena_side - margin);
    g
}

/// Deterministic serpentine sweep at constant altitude.
#[derive(Debug, Clone)]
pub struct DroneSweep {
    pub state: AgentState,
    path: Vec<Vec3>,
    leg: usize,
    /// Roundels already reported (dedup; waypoints are non-decaying).
    reported: Vec<bool>,
    pub vision_spread: f64,
    pub footprint: f64,
    pub speed: f64,
}

impl DroneSweep {
    pub fn new(
        arena_side: f64,
        lane_spacing: f64,
        altitude: f64,
        speed: f64,
        vision_spread: f64,
        n_roundels: usize,
    ) -> Self {
        let lanes = (arena_side / lane_spacing).ceil().max(1.0) as usize;
        let dy = arena_side / lanes as f64;
        let mut path = Vec::new();
        for lane in 0..lanes {
            let y = (lane as f64 + 0.5) * dy;
            let (x0, x1) = if lane % 2 == 0 { (0.0, arena_side) } else { (arena_side, 0.0) };
            path.push(Vec3::new(x0, y, altitude));
            path.push(Vec3::new(x1, y, altitude));
        }
        let start = path[0];
        Self {
            state: AgentState {
                position: start,
                velocity: Vec3::zeros(),
                heading: 0.0,
                steering: 0.0,
                speed,
                class: AgentClass::Drone,
                mode: crate::control::BehaviorMode::Idle,
            },
            path,
            leg: 0,
            reported: vec![false; n_roundels],
            vision_spread,
            footprint: lane_spacing / 2.0,
            speed,
        }
    }

    pub fn lane_count(&self) -> usize {
        self.path.len() / 2
    }

    pub fn lane_y(&self, lane: usize) -> f64 {
        self.path[lane * 2].y
    }

    /// Advance along the sweep and report any detected roundel as a
    /// non-decaying waypoint at the drone's ground position.
    pub fn step<R: Rng>(
        &mut self,
        dt: f64,
        world: &TagWorld,
        store: &mut PheromoneStore,
        now: f64,
        rng: &mut R,
    ) -> Result<Vec<ForageEvent>, SimError> {
        let mut remaining = self.speed * dt;
        while remaining > 1e-12 {
            let target = self.path[(self.leg + 1) % self.path.len()];
            let delta = target - self.state.position;
            let dist = delta.norm();
            if dist <= remaining {
                self.state.position = target;
                remaining -= dist;
                self.leg = (self.leg + 1) % self.path.len();
            } else {
                let dir = delta / dist;
                self.state.position += dir * remaining;
                self.state.velocity = dir * self.speed;
                remaining = 0.0;
            }
        }

        let mut events = Vec::new();
        let field = AerialVision {
            centroid: Vec3::new(self.state.position.x, self.state.position.y, 0.0),
            spread: self.vision_spread,
            max_range: self.footprint,
        };
        for (cluster, roundel) in world.roundels.iter().enumerate() {
            if self.reported[cluster] {
                continue;
            }
            let p = detect_prob_aerial(roundel, &field);
            if p > 0.0 && sample_detection(rng, p)? {
                store.deposit(field.centroid, true, now);
                self.reported[cluster] = true;
                events.push(ForageEvent::RoundelReported { cluster });
            }
        }
        Ok(events)
    }
}

/// Configuration for one self-contained foraging episode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub arena_side: f64,
    pub n_foragers: usize,
    pub layout: ClusterLayout,
    pub drone_enabled: bool,
    /// Episode length in seconds.
    pub duration: f64,
    pub params: ForagerParams,
    pub kinematics: KinematicParams,
    pub drone_speed: f64,
    pub drone_altitude: f64,
    pub drone_lane_spacing: f64,
    pub drone_vision_spread: f64,
    /// Per-second chance of recognizing an overlapped tag.
    pub tag_detection_rate: f64,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        let mut kin = KinematicParams::default();
        kin.wheelbase = 0.08;
        kin.servo_gain = 8.0;
        Self {
            arena_side: 2.5,
            n_foragers: 2,
            layout: ClusterLayout::Single32,
            drone_enabled: false,
            duration: 480.0,
            params: ForagerParams::default(),
            kinematics: kin,
            drone_speed: 0.8,
            drone_altitude: 1.0,
            drone_lane_spacing: 0.5,
            drone_vision_spread: 0.08,
            tag_detection_rate: 0.6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectionRecord {
    pub time: f64,
    pub robot: usize,
    pub tag: usize,
    pub cluster: usize,
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub collections: Vec<CollectionRecord>,
    pub duration: f64,
    pub wall_bounces: u64,
    pub waypoints_laid: u64,
}

impl EpisodeResult {
    pub fn tags_per_hour(&self) -> f64 {
        self.collections.len() as f64 / (self.duration / 3600.0)
    }
}

/// A running foraging episode. `ScenarioRunner` wraps this for metrics;
/// genome evaluation drives it directly.
pub struct Episode {
    pub config: EpisodeConfig,
    pub world: TagWorld,
    pub store: PheromoneStore,
    pub foragers: Vec<Forager>,
    pub drone: Option<DroneSweep>,
    pub now: f64,
    search_rng: ChaCha8Rng,
    sensing_rng: ChaCha8Rng,
    steering: SteeringParams,
    pub collections: Vec<CollectionRecord>,
    pub wall_bounces: u64,
    pub waypoints_laid: u64,
}

impl Episode {
    pub fn new(config: EpisodeConfig) -> Result<Self, SimError> {
        config.params.validate()?;
        config.kinematics.validate()?;
        let streams = RngStreams::new(config.seed);
        let mut placement = streams.stream(STREAM_PLACEMENT);
        let world = TagWorld::generate(config.layout, config.arena_side, &mut placement);
        let store = PheromoneStore::new(config.params.pheromone_decay_rate);

        let mut foragers = Vec::with_capacity(config.n_foragers);
        for i in 0..config.n_foragers {
            let angle = placement.random_range(0.0..std::f64::consts::TAU);
            let r = config.params.dispersal_radius.min(config.arena_side / 2.0 - 0.2);
            let goal = Vec3::new(
                (world.nest.x + r * angle.cos()).clamp(0.1, config.arena_side - 0.1),
                (world.nest.y + r * angle.sin()).clamp(0.1, config.arena_side - 0.1),
                0.0,
            );
            let heading = placement.random_range(0.0..std::f64::consts::TAU);
            let state =
                AgentState::ground(AgentClass::Forager, world.nest.x, world.nest.y, heading);
            let _ = i;
            foragers.push(Forager::new(state, goal));
        }

        let drone = config.drone_enabled.then(|| {
            DroneSweep::new(
                config.arena_side,
                config.drone_lane_spacing,
                config.drone_altitude,
                config.drone_speed,
                config.drone_vision_spread,
                world.roundels.len(),
            )
        });

        let steering = SteeringParams { speed_gain: 1.0, steer_max: config.kinematics.steer_max };
        Ok(Self {
            search_rng: streams.stream(STREAM_SEARCH),
            sensing_rng: streams.stream(STREAM_SENSING),
            config,
            world,
            store,
            foragers,
            drone,
            now: 0.0,
            steering,
            collections: Vec::new(),
            wall_bounces: 0,
            waypoints_laid: 0,
        })
    }

    pub fn done(&self) -> bool {
        self.now >= self.config.duration || self.world.remaining() == 0
    }

    pub fn step(&mut self) -> Result<Vec<(f64, ForageEvent)>, SimError> {
        let dt = self.config.kinematics.dt;
        let mut out = Vec::new();
        for i in 0..self.foragers.len() {
            let events = forager_step(
                i,
                &mut self.foragers[i],
                &mut self.world,
                &mut self.store,
                &self.config.params,
                &self.config.kinematics,
                &self.steering,
                self.config.tag_detection_rate,
                self.now,
                &mut self.search_rng,
            )?;
            for e in events {
                match e {
                    ForageEvent::TagCollected { tag, cluster, .. } => {
                        self.collections.push(CollectionRecord {
                            time: self.now,
                            robot: i,
                            tag,
                            cluster,
                        });
                        out.push((
                            self.now,
                            ForageEvent::TagCollected { robot: i, tag, cluster },
                        ));
                    }
                    ForageEvent::WallBounce { .. } => {
                        self.wall_bounces += 1;
                        out.push((self.now, ForageEvent::WallBounce { robot: i }));
                    }
                    ForageEvent::PheromoneLaid { .. } => {
                        self.waypoints_laid += 1;
                        out.push((self.now, ForageEvent::PheromoneLaid { robot: i }));
                    }
                    ForageEvent::WaypointFollowed { .. } => {
                        out.push((self.now, ForageEvent::WaypointFollowed { robot: i }));
                    }
                    other => out.push((self.now, other)),
                }
            }
        }
        if let Some(drone) = &mut self.drone {
            let events =
                drone.step(dt, &self.world, &mut self.store, self.now, &mut self.sensing_rng)?;
            for e in events {
                out.push((self.now, e));
            }
        }
        self.store.decay_tick(dt);
        self.now += dt;
        Ok(out)
    }

    pub fn run(config: EpisodeConfig) -> Result<EpisodeResult, SimError> {
        let mut ep = Episode::new(config)?;
        while !ep.done() {
            ep.step()?;
        }
        Ok(EpisodeResult {
            collections: ep.collections,
            duration: ep.config.duration,
            wall_bounces: ep.wall_bounces,
            waypoints_laid: ep.waypoints_laid,
        })
    }
}
