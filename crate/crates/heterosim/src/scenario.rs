//! Scenario configuration: JSON schema, validation, defaults, and seeded
//! initial placement.
//!
//! Loading a scenario parses the JSON, fills documented defaults, validates
//! every parameter-block invariant, resolves initial positions (either the
//! ones given in the file or seeded random placement), and verifies the
//! initial-connectivity conditions for exploration scenarios. A resolved
//! scenario is everything `engine::run` needs to reproduce a run bit for
//! bit.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::control::ControlParams;
use crate::error::SimError;
use crate::foraging::{ClusterLayout, ForagerParams};
use crate::kinematics::KinematicParams;
use crate::rng::{RngStreams, STREAM_PLACEMENT};
use crate::sensing::{GroundVision, ObstacleField};
use crate::topology::{assign_followers, check_connected, safe_goal_region, Radii};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    ExplorationPursuit,
    Foraging,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ForagingBlock {
    pub arena_side: f64,
    pub n_foragers: usize,
    /// Tag layout: one cluster of 32 ("1x32") or four of 8 ("4x8").
    pub clusters: ClusterLayout,
    pub drone_enabled: bool,
    /// Inline behavior parameters; falls back to the evolved defaults.
    pub forager_params: Option<ForagerParams>,
    /// Path to a GA output JSON; its `best_params` block is loaded.
    pub forager_params_file: Option<String>,
    pub drone_speed: f64,
    pub drone_altitude: f64,
    pub drone_lane_spacing: f64,
    pub drone_vision_spread: f64,
    /// Per-second chance a forager recognizes an overlapped tag.
    pub tag_detection_rate: f64,
}

impl Default for ForagingBlock {
    fn default() -> Self {
        Self {
            arena_side: 2.5,
            n_foragers: 2,
            clusters: ClusterLayout::Single32,
            drone_enabled: false,
            forager_params: None,
            forager_params_file: None,
            drone_speed: 0.8,
            drone_altitude: 1.0,
            drone_lane_spacing: 0.5,
            drone_vision_spread: 0.08,
            tag_detection_rate: 0.6,
        }
    }
}

/// Agent start positions supplied explicitly in the config (planar; relays
/// are lifted to the configured altitude).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialPositions {
    pub relays: Vec<(f64, f64)>,
    pub sensors: Vec<(f64, f64)>,
    pub manipulators: Vec<(f64, f64)>,
    pub adversary: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub seed: u64,
    /// Simulated seconds.
    pub duration: f64,
    pub n_relays: usize,
    pub n_sensors: usize,
    pub n_manipulators: usize,
    pub adversary: bool,
    /// Workspace extents; the workspace is the box [0, w] x [0, h].
    pub workspace: (f64, f64),
    /// Fixed base station position.
    pub base: (f64, f64),
    /// Target region center (the attractive-potential center).
    pub target: (f64, f64),
    pub relay_altitude: f64,
    pub radii: Radii,
    pub kinematics: KinematicParams,
    pub control: ControlParams,
    pub channel: ChannelModel,
    /// Enable power control via mobility (and transmit-power assists).
    pub power_control: bool,
    /// Relay bias gain of the power controller.
    pub k_pc: f64,
    /// Aerial footprint radius (vision range) of relays.
    pub relay_vision_range: f64,
    pub relay_vision_spread: f64,
    pub ground_vision: GroundVision,
    pub obstacles: ObstacleField,
    /// All-ground, equal-radii baseline for the coverage comparison.
    pub homogeneous_baseline: bool,
    /// Coverage grid cell size in meters.
    pub grid_resolution: f64,
    /// Seconds between consensus sweeps.
    pub consensus_period: f64,
    pub initial: Option<InitialPositions>,
    pub foraging: ForagingBlock,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::ExplorationPursuit,
            seed: 0,
            duration: 40.0,
            n_relays: 5,
            n_sensors: 4,
            n_manipulators: 2,
            adversary: true,
            workspace: (40.0, 36.0),
            base: (6.0, 18.0),
            target: (31.0, 18.0),
            relay_altitude: 2.0,
            radii: Radii::default(),
            kinematics: KinematicParams::default(),
            control: ControlParams::default(),
            channel: ChannelModel::default(),
            power_control: true,
            k_pc: 0.5,
            relay_vision_range: 6.0,
            relay_vision_spread: 2.0,
            ground_vision: GroundVision {
                spread: 1.0,
                max_range: 4.0,
                min_range: 0.3,
                half_angle: 0.6,
            },
            obstacles: ObstacleField {
                obstacles: vec![],
                eta: 4.0,
                outer_radius: 2.5,
                inner_radius: 0.35,
                ref_distance: 2.5,
            },
            homogeneous_baseline: false,
            grid_resolution: 0.25,
            consensus_period: 1.0,
            initial: None,
            foraging: ForagingBlock::default(),
        }
    }
}

impl ScenarioConfig {
    /// Radii actually used by the run. The homogeneous baseline compresses
    /// the relay range down to the follower scale (strict orderings kept so
    /// the same machinery runs).
    pub fn effective_radii(&self) -> Radii {
        if self.homogeneous_baseline {
            let s = self.radii.sensor;
            Radii { comm: 1.4 * s, sensor: s, manip: s, rest: 1.2 * s }
        } else {
            self.radii
        }
    }

    /// Relay speed limit actually used by the run: all-ground in the
    /// homogeneous baseline.
    pub fn effective_relay_speed(&self) -> f64 {
        if self.homogeneous_baseline {
            self.kinematics.speeds.sensor
        } else {
            self.kinematics.speeds.relay
        }
    }

    /// Relay footprint radius used for coverage. The homogeneous baseline
    /// gives relays a ground-equivalent footprint: a disc whose area equals
    /// the ground sensing sector.
    pub fn effective_relay_footprint(&self) -> f64 {
        if self.homogeneous_baseline {
            let g = &self.ground_vision;
            g.max_range * (g.half_angle / std::f64::consts::PI).sqrt()
        } else {
            self.relay_vision_range
        }
    }

    pub fn n_followers(&self) -> usize {
        self.n_sensors + self.n_manipulators
    }

    pub fn forager_params(&self) -> Result<ForagerParams, SimError> {
        if let Some(p) = self.foraging.forager_params {
            return Ok(p);
        }
        if let Some(path) = &self.foraging.forager_params_file {
            let text = std::fs::read_to_string(path)?;
            let v: serde_json::Value = serde_json::from_str(&text)?;
            let params = v.get("best_params").cloned().unwrap_or(v);
            return Ok(serde_json::from_value(params)?);
        }
        Ok(ForagerParams::default())
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.duration < 0.0 {
            return Err(SimError::config("duration must be nonnegative"));
        }
        if self.grid_resolution <= 0.0 {
            return Err(SimError::config("grid_resolution must be positive"));
        }
        match self.kind {
            ScenarioKind::ExplorationPursuit => {
                if self.n_relays == 0 {
                    return Err(SimError::config("exploration needs at least one relay"));
                }
                if !(self.workspace.0 > 0.0 && self.workspace.1 > 0.0) {
                    return Err(SimError::config("workspace extents must be positive"));
                }
                self.radii.validate()?;
                self.effective_radii().validate()?;
                self.kinematics.validate()?;
                self.channel.validate()?;
                self.ground_vision.validate()?;
                self.obstacles.validate()?;
                if !(self.relay_vision_range > 0.0 && self.relay_vision_spread > 0.0) {
                    return Err(SimError::config("relay vision parameters must be positive"));
                }
                if self.relay_altitude < 0.0 || self.relay_altitude >= self.radii.sensor {
                    return Err(SimError::config(
                        "relay_altitude must lie in [0, sensor radius)",
                    ));
                }
                if self.consensus_period <= 0.0 || self.control.broadcast_period <= 0.0 {
                    return Err(SimError::config("periods must be positive"));
                }
                // The goal annulus must be nonempty for the configured
                // broadcast interval and relay speed.
                let r = self.effective_radii();
                safe_goal_region(
                    Vec3::new(0.0, 0.0, self.relay_altitude),
                    r.sensor,
                    r.comm,
                    self.control.broadcast_period,
                    self.effective_relay_speed(),
                )?;
            }
            ScenarioKind::Foraging => {
                let f = &self.foraging;
                if f.arena_side <= 0.0 {
                    return Err(SimError::config("arena_side must be positive"));
                }
                if f.drone_lane_spacing <= 0.0 || f.drone_speed <= 0.0 {
                    return Err(SimError::config("drone parameters must be positive"));
                }
                self.forager_params()?.validate()?;
                self.kinematics.validate()?;
            }
        }
        Ok(())
    }
}

/// A validated scenario with resolved initial state.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub config: ScenarioConfig,
    pub base_position: Vec3,
    pub relay_positions: Vec<Vec3>,
    /// Sensors first, then manipulators.
    pub follower_positions: Vec<Vec3>,
    pub adversary_position: Option<Vec3>,
    /// Follower index -> relay index.
    pub assignment: Vec<usize>,
}

/// Load a scenario file: parse, validate, place, and check connectivity.
pub fn load_scenario(path: &Path) -> Result<ResolvedScenario, SimError> {
    let text = std::fs::read_to_string(path)?;
    load_scenario_str(&text)
}

pub fn load_scenario_str(text: &str) -> Result<ResolvedScenario, SimError> {
    let config: ScenarioConfig = serde_json::from_str(text)?;
    resolve(config)
}

/// Validate a config and resolve its initial state.
pub fn resolve(config: ScenarioConfig) -> Result<ResolvedScenario, SimError> {
    config.validate()?;
    if config.kind == ScenarioKind::Foraging {
        return Ok(ResolvedScenario {
            base_position: Vec3::zeros(),
            relay_positions: vec![],
            follower_positions: vec![],
            adversary_position: None,
            assignment: vec![],
            config,
        });
    }

    let radii = config.effective_radii();
    let base = Vec3::new(config.base.0, config.base.1, 0.0);
    let streams = RngStreams::new(config.seed);
    let mut rng = streams.stream(STREAM_PLACEMENT);

    let (relays, followers, adversary) = match &config.initial {
        Some(init) => {
            if init.relays.len() != config.n_relays
                || init.sensors.len() != config.n_sensors
                || init.manipulators.len() != config.n_manipulators
            {
                return Err(SimError::config(
                    "initial position counts do not match agent counts",
                ));
            }
            let relays: Vec<Vec3> = init
                .relays
                .iter()
                .map(|&(x, y)| Vec3::new(x, y, config.relay_altitude))
                .collect();
            let followers: Vec<Vec3> = init
                .sensors
                .iter()
                .chain(&init.manipulators)
                .map(|&(x, y)| Vec3::new(x, y, 0.0))
                .collect();
            let adversary = init.adversary.map(|(x, y)| Vec3::new(x, y, 0.0));
            (relays, followers, adversary)
        }
        None => place_random(&config, &radii, &base, &mut rng)?,
    };

    // Eq.-(2)-style initial conditions: every relay has a peer (or the base)
    // in comm range, every follower has some relay in comm range.
    let mut disconnected = Vec::new();
    for (i, r) in relays.iter().enumerate() {
        let ok = relays
            .iter()
            .enumerate()
            .any(|(j, o)| j != i && (o - r).norm() <= radii.comm)
            || (r - base).norm() <= radii.comm;
        if !ok {
            disconnected.push(format!("relay {i}"));
        }
    }
    for (k, f) in followers.iter().enumerate() {
        if !relays.iter().any(|r| (f - r).norm() <= radii.comm) {
            let name = if k < config.n_sensors {
                format!("sensor {k}")
            } else {
                format!("manipulator {}", k - config.n_sensors)
            };
            disconnected.push(name);
        }
    }
    if !disconnected.is_empty() {
        return Err(SimError::InitialConnectivity(disconnected));
    }

    let assignment = assign_followers(&relays, &followers, radii.comm)?;
    let mut nodes = relays.clone();
    nodes.push(base);
    if !check_connected(&nodes, relays.len(), &assignment, &followers, radii.comm) {
        return Err(SimError::InitialConnectivity(vec!["relay graph".to_string()]));
    }

    let adversary_position = config.adversary.then(|| {
        adversary.unwrap_or_else(|| {
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            Vec3::new(
                config.target.0 + config.control.patrol_radius * phi.cos(),
                config.target.1 + config.control.patrol_radius * phi.sin(),
                0.0,
            )
        })
    });

    Ok(ResolvedScenario {
        config,
        base_position: base,
        relay_positions: relays,
        follower_positions: followers,
        adversary_position,
        assignment,
    })
}

type Placement = (Vec<Vec3>, Vec<Vec3>, Option<Vec3>);

fn place_random<R: Rng>(
    config: &ScenarioConfig,
    radii: &Radii,
    base: &Vec3,
    rng: &mut R,
) -> Result<Placement, SimError> {
    let (w, h) = config.workspace;
    let margin = 0.5;
    let clear = config.obstacles.inner_radius + 0.3;

    let mut relays: Vec<Vec3> = Vec::with_capacity(config.n_relays);
    let mut attempts = 0;
    while relays.len() < config.n_relays {
        attempts += 1;
        if attempts > 20_000 {
            return Err(SimError::config("placement failed; workspace too constrained"));
        }
        let anchor = if relays.is_empty() {
            *base
        } else {
            relays[rng.random_range(0..relays.len())]
        };
        let r = rng.random_range(0.25..0.55) * radii.comm;
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let p = Vec3::new(
            anchor.x + r * phi.cos(),
            anchor.y + r * phi.sin(),
            config.relay_altitude,
        );
        if p.x < margin || p.x > w - margin || p.y < margin || p.y > h - margin {
            continue;
        }
        if clearance_of(&config.obstacles, &p) < clear {
            continue;
        }
        if relays.iter().any(|o| (o - p).norm() < 1.0) {
            continue;
        }
        relays.push(p);
    }

    let ground_reach = (radii.comm * radii.comm
        - config.relay_altitude * config.relay_altitude)
        .sqrt();
    let mut followers = Vec::with_capacity(config.n_followers());
    while followers.len() < config.n_followers() {
        attempts += 1;
        if attempts > 40_000 {
            return Err(SimError::config("placement failed; workspace too constrained"));
        }
        let anchor = relays[rng.random_range(0..relays.len())];
        let r = rng.random_range(0.15..0.5) * ground_reach;
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let p = Vec3::new(anchor.x + r * phi.cos(), anchor.y + r * phi.sin(), 0.0);
        if p.x < margin || p.x > w - margin || p.y < margin || p.y > h - margin {
            continue;
        }
        if clearance_of(&config.obstacles, &p) < clear {
            continue;
        }
        // Keep the second-nearest relay out of the interference ball so
        // the initial geometry satisfies the SINR constraint.
        let mut dists: Vec<f64> = relays.iter().map(|r| (r - p).norm()).collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if dists.len() > 1 && dists[1] <= 1.15 * radii.sensor {
            continue;
        }
        followers.push(p);
    }

    Ok((relays, followers, None))
}

fn clearance_of(field: &ObstacleField, p: &Vec3) -> f64 {
    match field.clearance(p) {
        Ok((d, _)) => d,
        Err(_) => -1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let resolved = load_scenario_str(r#"{"kind": "exploration-pursuit"}"#).unwrap();
        assert_eq!(resolved.config.n_relays, 5);
        assert_eq!(resolved.config.seed, 0);
        assert_eq!(resolved.relay_positions.len(), 5);
        assert_eq!(resolved.follower_positions.len(), 6);
        assert_eq!(resolved.assignment.len(), 6);
        assert!(resolved.adversary_position.is_some());
    }

    #[test]
    fn radii_ordering_violation_names_radii() {
        let text = r#"{
            "kind": "exploration-pursuit",
            "radii": {"comm": 2.0, "sensor": 3.0, "manip": 3.0, "rest": 6.0}
        }"#;
        match load_scenario_str(text) {
            Err(SimError::Config(msg)) => assert!(msg.contains("sensor"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn far_follower_is_initial_connectivity_error() {
        let text = r#"{
            "kind": "exploration-pursuit",
            "n_relays": 1, "n_sensors": 1, "n_manipulators": 0,
            "base": [6.0, 18.0],
            "initial": {
                "relays": [[7.0, 18.0]],
                "sensors": [[30.0, 18.0]],
                "manipulators": []
            }
        }"#;
        match load_scenario_str(text) {
            Err(SimError::InitialConnectivity(who)) => {
                assert!(who.iter().any(|s| s.contains("sensor 0")), "{who:?}")
            }
            other => panic!("expected connectivity error, got {other:?}"),
        }
    }

    #[test]
    fn parse_error_carries_location() {
        let err = load_scenario_str("{ not json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn placement_is_deterministic_per_seed() {
        let a = load_scenario_str(r#"{"kind": "exploration-pursuit", "seed": 9}"#).unwrap();
        let b = load_scenario_str(r#"{"kind": "exploration-pursuit", "seed": 9}"#).unwrap();
        assert_eq!(a.relay_positions, b.relay_positions);
        assert_eq!(a.follower_positions, b.follower_positions);
        let c = load_scenario_str(r#"{"kind": "exploration-pursuit", "seed": 10}"#).unwrap();
        assert_ne!(a.relay_positions, c.relay_positions);
    }

    #[test]
    fn homogeneous_baseline_compresses_radii() {
        let cfg = ScenarioConfig { homogeneous_baseline: true, ..Default::default() };
        let r = cfg.effective_radii();
        assert_eq!(r.sensor, cfg.radii.sensor);
        assert!(r.comm < cfg.radii.comm);
        r.validate().unwrap();
        assert!(cfg.effective_relay_footprint() < cfg.relay_vision_range);
    }

    #[test]
    fn foraging_minimal_config() {
        let resolved = load_scenario_str(r#"{"kind": "foraging"}"#).unwrap();
        assert_eq!(resolved.config.foraging.n_foragers, 2);
        assert!(resolved.relay_positions.is_empty());
    }

    #[test]
    fn altitude_must_stay_below_sensor_radius() {
        let text = r#"{"kind": "exploration-pursuit", "relay_altitude": 3.5}"#;
        assert!(matches!(load_scenario_str(text), Err(SimError::Config(_))));
    }
}
