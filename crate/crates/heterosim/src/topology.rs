//! Communication graph construction and balancing.
//!
//! Relays (plus the fixed base station) form a proximity graph under the
//! Gabriel rule: an edge (i, j) exists iff no third node lies strictly
//! inside the open ball whose diameter is the segment ij. Sensor and
//! manipulator agents ("followers") each attach to their nearest relay, and
//! a local consensus sweep evens the follower counts across neighboring
//! relays. Connectivity to the base is checked over comm-radius links.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::Vec3;

/// Communication radii in meters. Orderings enforced by `validate`:
/// `0 < sensor = manip < rest < comm`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Radii {
    /// Relay-relay / relay-follower one-directional range (R_c).
    pub comm: f64,
    /// Sensor bidirectional range (R_s).
    pub sensor: f64,
    /// Manipulator bidirectional range (R_m), equal to `sensor`.
    pub manip: f64,
    /// Spring rest length and tether/search switch radius (R_eps).
    pub rest: f64,
}

impl Radii {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.sensor > 0.0 && self.manip == self.sensor && self.rest > self.sensor && self.comm > self.rest)
        {
            return Err(SimError::config(format!(
                "radii must satisfy 0 < sensor = manip < rest < comm, got sensor={} manip={} rest={} comm={}",
                self.sensor, self.manip, self.rest, self.comm
            )));
        }
        Ok(())
    }
}

impl Default for Radii {
    fn default() -> Self {
        Self { comm: 10.0, sensor: 3.0, manip: 3.0, rest: 6.0 }
    }
}

/// Snapshot of the communication structure for one step.
///
/// `relay_edges` are Gabriel edges over the relay set (base included as the
/// node with index `base`), used for the virtual springs. Connectivity and
/// consensus neighborhoods use plain comm-radius links.
#[derive(Debug, Clone)]
pub struct CommTopology {
    pub relay_edges: BTreeSet<(usize, usize)>,
    /// follower index -> relay index.
    pub assignment: Vec<usize>,
    pub radii: Radii,
    /// Index of the fixed base station within the relay-position slice.
    pub base: usize,
}

/// Gabriel edges over `positions`. Edge (i, j) with i < j is present iff no
/// third point k satisfies (x_k - x_i) . (x_k - x_j) < 0, which is exactly
/// "k strictly inside the open ball with diameter ij".
pub fn gabriel_edges(positions: &[Vec3]) -> Result<BTreeSet<(usize, usize)>, SimError> {
    if positions.is_empty() {
        return Err(SimError::config("gabriel_edges requires at least one node"));
    }
    for p in positions {
        if !p.iter().all(|c| c.is_finite()) {
            return Err(SimError::NonFinite { context: "gabriel_edges" });
        }
    }
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            if positions[i] == positions[j] {
                return Err(SimError::DuplicatePosition { a: i, b: j });
            }
        }
    }

    let mut edges = BTreeSet::new();
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let blocked = (0..positions.len())
                .filter(|&k| k != i && k != j)
                .any(|k| (positions[k] - positions[i]).dot(&(positions[k] - positions[j])) < 0.0);
            if !blocked {
                edges.insert((i, j));
            }
        }
    }
    Ok(edges)
}

/// Assign every follower to its nearest relay. Ties break toward the lowest
/// relay index. A follower with no relay within `comm_radius` is an orphan.
pub fn assign_followers(
    relays: &[Vec3],
    followers: &[Vec3],
    comm_radius: f64,
) -> Result<Vec<usize>, SimError> {
    let mut assignment = Vec::with_capacity(followers.len());
    for (k, f) in followers.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in relays.iter().enumerate() {
            let d = (f - r).norm();
            match best {
                Some((_, bd)) if d >= bd => {}
                _ => best = Some((i, d)),
            }
        }
        match best {
            Some((i, d)) if d <= comm_radius => assignment.push(i),
            _ => return Err(SimError::OrphanFollower { follower: k, radius: comm_radius }),
        }
    }
    Ok(assignment)
}

/// Comm-radius adjacency over relay positions (base included).
pub fn relay_adjacency(positions: &[Vec3], comm_radius: f64) -> Vec<Vec<usize>> {
    let n = positions.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if (positions[i] - positions[j]).norm() <= comm_radius {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

/// One outer sweep of the local consensus over pure counts. Relays are
/// processed in ascending index; loads update in place so the total is
/// conserved exactly.
///
/// For each relay i, with A = neighbors j where n_j <= n_i:
/// - when exactly one k in A has n_k <= n_i - 2 and every other member of A
///   carries exactly n_i, move floor((n_k + n_i)/2) from i to k;
/// - otherwise move tau_j = floor-average minus n_j to each j in A (skipped
///   when nonpositive), where the floor-average is
///   (n_i + sum of n_j over A) div (|A| + 1);
/// - when neither rule moves anything but some neighbor still sits two or
///   more below i, move a single unit to the lowest-loaded such neighbor
///   (lowest index on ties). The floored average strands remainder units
///   otherwise; with this rule every fixed point has all edge gradients
///   at most 1, which puts each load within 1 of its neighborhood average.
pub fn consensus_counts_step(adjacency: &[Vec<usize>], loads: &mut [u32]) {
    let n = loads.len();
    for i in 0..n {
        let plan = plan_transfers(i, adjacency, loads);
        for (j, amount) in plan {
            let amount = amount.min(loads[i]);
            loads[i] -= amount;
            loads[j] += amount;
        }
    }
}

/// Planned unit transfers out of relay `i` given current loads: list of
/// (destination relay, amount).
fn plan_transfers(i: usize, adjacency: &[Vec<usize>], loads: &[u32]) -> Vec<(usize, u32)> {
    let n_i = loads[i];
    let lower: Vec<usize> = adjacency[i].iter().copied().filter(|&j| loads[j] <= n_i).collect();
    if lower.is_empty() {
        return Vec::new();
    }

    let deficient: Vec<usize> =
        lower.iter().copied().filter(|&j| n_i >= 2 && loads[j] <= n_i - 2).collect();
    if deficient.len() == 1 && lower.len() >= 2 {
        let k = deficient[0];
        if lower.iter().all(|&j| j == k || loads[j] == n_i) {
            let t = (loads[k] + n_i) / 2;
            return vec![(k, t)];
        }
    }

    let total: u32 = n_i + lower.iter().map(|&j| loads[j]).sum::<u32>();
    let tau_floor = total / (lower.len() as u32 + 1);
    let mut plan = Vec::new();
    for &j in &lower {
        if tau_floor > loads[j] {
            plan.push((j, tau_floor - loads[j]));
        }
    }
    if plan.is_empty() {
        // Remainder rule: trickle one unit down the steepest edge.
        if let Some(&j) = deficient.iter().min_by_key(|&&j| (loads[j], j)) {
            plan.push((j, 1));
        }
    }
    plan
}

/// Outcome of one physical consensus sweep.
#[derive(Debug, Clone, Default)]
pub struct ConsensusOutcome {
    /// Follower transfers applied: (follower, from relay, to relay).
    pub moved: Vec<(usize, usize, usize)>,
    /// Transfer slots skipped because no follower of the source relay was
    /// inside the destination's comm ball.
    pub skipped: usize,
}

/// One consensus sweep over the physical assignment. Transfer quantities
/// follow the count-level rules; each unit moves the follower of the source
/// relay closest to the destination relay, restricted to followers inside
/// the destination's comm ball. Slots with no eligible follower are skipped.
pub fn consensus_step(
    assignment: &mut [usize],
    relays: &[Vec3],
    followers: &[Vec3],
    comm_radius: f64,
) -> ConsensusOutcome {
    consensus_step_guarded(assignment, relays, followers, comm_radius, |_, _| true)
}

/// `consensus_step` with an additional transfer guard: a follower may move
/// to a destination relay only when `viable(follower, dest)` holds (the
/// simulation uses this to refuse handovers whose link could not meet the
/// SINR constraint). Refused slots are skipped like out-of-ball ones.
pub fn consensus_step_guarded(
    assignment: &mut [usize],
    relays: &[Vec3],
    followers: &[Vec3],
    comm_radius: f64,
    viable: impl Fn(usize, usize) -> bool,
) -> ConsensusOutcome {
    let adjacency = relay_adjacency(relays, comm_radius);
    let mut loads: Vec<u32> = vec![0; relays.len()];
    for &r in assignment.iter() {
        loads[r] += 1;
    }

    let mut outcome = ConsensusOutcome::default();
    for i in 0..relays.len() {
        let plan = plan_transfers(i, &adjacency, &loads);
        for (j, amount) in plan {
            for _ in 0..amount {
                let candidate = assignment
                    .iter()
                    .enumerate()
                    .filter(|&(f, &r)| {
                        r == i
                            && (followers[f] - relays[j]).norm() <= comm_radius
                            && viable(f, j)
                    })
                    .min_by(|&(fa, _), &(fb, _)| {
                        let da = (followers[fa] - relays[j]).norm();
                        let db = (followers[fb] - relays[j]).norm();
                        da.partial_cmp(&db).unwrap().then(fa.cmp(&fb))
                    })
                    .map(|(f, _)| f);
                match candidate {
                    Some(f) => {
                        assignment[f] = j;
                        loads[i] -= 1;
                        loads[j] += 1;
                        outcome.moved.push((f, i, j));
                    }
                    None => outcome.skipped += 1,
                }
            }
        }
    }
    outcome
}

/// True iff every relay reaches the base over comm-radius relay links and
/// every follower sits within comm radius of its assigned relay, which in
/// turn reaches the base.
pub fn check_connected(
    relays: &[Vec3],
    base: usize,
    assignment: &[usize],
    followers: &[Vec3],
    comm_radius: f64,
) -> bool {
    let adjacency = relay_adjacency(relays, comm_radius);
    let mut reach = vec![false; relays.len()];
    let mut queue = std::collections::VecDeque::new();
    reach[base] = true;
    queue.push_back(base);
    while let Some(i) = queue.pop_front() {
        for &j in &adjacency[i] {
            if !reach[j] {
                reach[j] = true;
                queue.push_back(j);
            }
        }
    }
    if !reach.iter().all(|&r| r) {
        return false;
    }
    assignment
        .iter()
        .zip(followers)
        .all(|(&r, f)| (followers_distance(f, &relays[r])) <= comm_radius)
}

fn followers_distance(f: &Vec3, r: &Vec3) -> f64 {
    (f - r).norm()
}

/// Admissible goal sets around a relay for an interval `delta_t` during
/// which the relay may travel up to `v_max_relay * delta_t`.
///
/// Goals inside the ball of radius `connect_radius` keep the follower
/// connected over the interval; goals in the annulus
/// `(search_inner, connect_radius]` additionally keep it in search mode.
#[derive(Debug, Clone, Copy)]
pub struct GoalRegion {
    pub center: Vec3,
    pub epsilon: f64,
    pub connect_radius: f64,
    pub search_inner: f64,
}

pub fn safe_goal_region(
    relay_position: Vec3,
    follower_range: f64,
    comm_radius: f64,
    delta_t: f64,
    v_max_relay: f64,
) -> Result<GoalRegion, SimError> {
    let epsilon = v_max_relay * delta_t;
    let connect_radius = comm_radius - epsilon;
    let search_inner = follower_range + epsilon;
    if connect_radius <= search_inner {
        return Err(SimError::EmptyGoalRegion { connect: connect_radius, inner: search_inner });
    }
    Ok(GoalRegion { center: relay_position, epsilon, connect_radius, search_inner })
}

impl GoalRegion {
    pub fn contains_connect(&self, p: &Vec3) -> bool {
        (p - self.center).norm() <= self.connect_radius
    }

    pub fn contains_search(&self, p: &Vec3) -> bool {
        let d = (p - self.center).norm();
        d > self.search_inner && d <= self.connect_radius
    }

    /// Uniform-in-area sample of a ground point (z = 0) inside the search
    /// annulus, accounting for the relay altitude. `None` when the annulus
    /// has no ground section.
    pub fn sample_search_ground<R: Rng>(&self, rng: &mut R) -> Option<Vec3> {
        let h = self.center.z;
        let outer_sq = self.connect_radius * self.connect_radius - h * h;
        if outer_sq <= 0.0 {
            return None;
        }
        let inner_sq = (self.search_inner * self.search_inner - h * h).max(0.0);
        if outer_sq <= inner_sq {
            return None;
        }
        let u: f64 = rng.random();
        let r = (inner_sq + u * (outer_sq - inner_sq)).sqrt();
        let phi: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        Some(Vec3::new(self.center.x + r * phi.cos(), self.center.y + r * phi.sin(), 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64) -> Vec3 {
        Vec3::new(x, y, 0.0)
    }

    /// Independent Gabriel oracle: explicit circumcenter/radius test.
    fn gabriel_oracle(positions: &[Vec3]) -> BTreeSet<(usize, usize)> {
        let mut edges = BTreeSet::new();
        for i in 0..positions.len() {
            for j in (i + 1)..positions.len() {
                let center = (positions[i] + positions[j]) / 2.0;
                let radius = (positions[i] - positions[j]).norm() / 2.0;
                let blocked = (0..positions.len())
                    .filter(|&k| k != i && k != j)
                    .any(|k| (positions[k] - center).norm() < radius);
                if !blocked {
                    edges.insert((i, j));
                }
            }
        }
        edges
    }

    #[test]
    fn two_relays_single_edge() {
        let pts = [v(0.0, 0.0), v(3.7, -1.2)];
        let e = gabriel_edges(&pts).unwrap();
        assert_eq!(e.len(), 1);
        assert!(e.contains(&(0, 1)));
    }

    #[test]
    fn collinear_three_drops_long_edge() {
        let pts = [v(0.0, 0.0), v(1.0, 0.0), v(2.0, 0.0)];
        let e = gabriel_edges(&pts).unwrap();
        let expected: BTreeSet<_> = [(0, 1), (1, 2)].into_iter().collect();
        assert_eq!(e, expected);
    }

    #[test]
    fn duplicate_positions_rejected() {
        let pts = [v(1.0, 1.0), v(1.0, 1.0)];
        assert!(matches!(gabriel_edges(&pts), Err(SimError::DuplicatePosition { .. })));
    }

    #[test]
    fn random_instances_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(1..=10);
            let pts: Vec<Vec3> =
                (0..n).map(|_| v(rng.random::<f64>() * 20.0, rng.random::<f64>() * 20.0)).collect();
            assert_eq!(gabriel_edges(&pts).unwrap(), gabriel_oracle(&pts));
        }
    }

    #[test]
    fn boundary_point_does_not_block() {
        // Third point exactly on the diameter circle: edge stays (open ball).
        let pts = [v(0.0, 0.0), v(2.0, 0.0), v(1.0, 1.0)];
        let e = gabriel_edges(&pts).unwrap();
        assert!(e.contains(&(0, 1)));
    }

    #[test]
    fn assignment_single_relay() {
        let relays = [v(0.0, 0.0)];
        let followers = [v(1.0, 0.0), v(0.0, 2.0), v(-1.0, -1.0)];
        let a = assign_followers(&relays, &followers, 10.0).unwrap();
        assert_eq!(a, vec![0, 0, 0]);
    }

    #[test]
    fn assignment_tie_breaks_low_id() {
        // Relays 2 and 5 equidistant from the follower; lower index wins.
        let relays = [
            v(100.0, 0.0),
            v(100.0, 10.0),
            v(1.0, 0.0),
            v(100.0, 20.0),
            v(100.0, 30.0),
            v(-1.0, 0.0),
        ];
        let followers = [v(0.0, 0.0)];
        let a = assign_followers(&relays, &followers, 10.0).unwrap();
        assert_eq!(a, vec![2]);
    }

    #[test]
    fn assignment_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let relays: Vec<Vec3> =
            (0..6).map(|_| v(rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0)).collect();
        let followers: Vec<Vec3> =
            (0..12).map(|_| v(rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0)).collect();
        let a = assign_followers(&relays, &followers, 100.0).unwrap();
        for (k, f) in followers.iter().enumerate() {
            let best = relays
                .iter()
                .map(|r| (f - r).norm())
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(a[k], best);
        }
    }

    #[test]
    fn assignment_orphan_error() {
        let relays = [v(0.0, 0.0)];
        let followers = [v(50.0, 0.0)];
        match assign_followers(&relays, &followers, 10.0) {
            Err(SimError::OrphanFollower { follower, .. }) => assert_eq!(follower, 0),
            other => panic!("expected orphan error, got {other:?}"),
        }
    }

    #[test]
    fn consensus_two_relays_meets_hand_trace() {
        let adjacency = vec![vec![1], vec![0]];
        let mut loads = vec![4, 0];
        consensus_counts_step(&adjacency, &mut loads);
        assert_eq!(loads, vec![2, 2]);
    }

    #[test]
    fn consensus_equal_loads_fixed_point() {
        let adjacency = vec![vec![1, 2], vec![0, 2], vec![0, 1]];
        let mut loads = vec![3, 3, 3];
        consensus_counts_step(&adjacency, &mut loads);
        assert_eq!(loads, vec![3, 3, 3]);
    }

    #[test]
    fn consensus_chain_converges_within_bound() {
        let adjacency = vec![vec![1], vec![0, 2], vec![1, 3], vec![2]];
        let mut loads = vec![8u32, 0, 0, 0];
        let total: u32 = loads.iter().sum();
        for _ in 0..40 {
            consensus_counts_step(&adjacency, &mut loads);
            assert_eq!(loads.iter().sum::<u32>(), total);
        }
        // Every load within 1 of its neighborhood average.
        for i in 0..4 {
            let mut sum = loads[i] as f64;
            for &j in &adjacency[i] {
                sum += loads[j] as f64;
            }
            let avg = sum / (adjacency[i].len() as f64 + 1.0);
            assert!(
                (loads[i] as f64 - avg).abs() <= 1.0 + 1e-9,
                "load {} vs neighborhood avg {avg}",
                loads[i]
            );
        }
    }

    #[test]
    fn consensus_conserves_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let n = rng.random_range(2..=8);
            // Random connected graph: chain plus extra edges.
            let mut adjacency = vec![Vec::new(); n];
            for i in 1..n {
                adjacency[i - 1].push(i);
                adjacency[i].push(i - 1);
            }
            for _ in 0..n {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                if a != b && !adjacency[a].contains(&b) {
                    adjacency[a].push(b);
                    adjacency[b].push(a);
                }
            }
            let mut loads: Vec<u32> = (0..n).map(|_| rng.random_range(0..10)).collect();
            let total: u32 = loads.iter().sum();
            for _ in 0..10 * n {
                consensus_counts_step(&adjacency, &mut loads);
            }
            assert_eq!(loads.iter().sum::<u32>(), total);
        }
    }

    #[test]
    fn physical_consensus_moves_nearest_inside_ball() {
        let relays = [v(0.0, 0.0), v(5.0, 0.0)];
        // Followers all assigned to relay 0; nearest-to-relay-1 moves first.
        let followers = [v(1.0, 0.0), v(2.0, 0.0), v(0.5, 0.5), v(-1.0, 0.0)];
        let mut assignment = vec![0usize, 0, 0, 0];
        let out = consensus_step(&mut assignment, &relays, &followers, 10.0);
        assert_eq!(out.skipped, 0);
        let loads0 = assignment.iter().filter(|&&r| r == 0).count();
        let loads1 = assignment.iter().filter(|&&r| r == 1).count();
        assert_eq!((loads0, loads1), (2, 2));
        // Follower 1 (x=2) is closest to relay 1, then follower 0.
        assert_eq!(assignment[1], 1);
        assert_eq!(assignment[0], 1);
    }

    #[test]
    fn physical_consensus_skips_out_of_ball() {
        let relays = [v(0.0, 0.0), v(5.0, 0.0)];
        // Both followers beyond relay 1's comm ball of 5.5 m.
        let followers = [v(-2.0, 0.0), v(-3.0, 0.0)];
        let mut assignment = vec![0usize, 0];
        let out = consensus_step(&mut assignment, &relays, &followers, 5.5);
        assert_eq!(assignment, vec![0, 0]);
        assert!(out.skipped > 0);
    }

    #[test]
    fn connected_simple_cases() {
        let relays = [v(0.0, 0.0), v(5.0, 0.0)];
        assert!(check_connected(&relays, 0, &[], &[], 6.0));
        // Follower just beyond range of its assigned relay.
        let followers = [v(5.0, 6.1)];
        assert!(!check_connected(&relays, 0, &[1], &followers, 6.0));
        let followers = [v(5.0, 5.9)];
        assert!(check_connected(&relays, 0, &[1], &followers, 6.0));
    }

    #[test]
    fn cut_vertex_flip_matches_bfs_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            // Chain of relays spaced just under the radius; moving the middle
            // relay far away must disconnect the tail.
            let r = 5.0;
            let n = 5;
            let mut relays: Vec<Vec3> = (0..n)
                .map(|i| v(i as f64 * (r * 0.9), rng.random::<f64>() * 0.1))
                .collect();
            assert!(check_connected(&relays, 0, &[], &[], r));
            relays[2] = v(2.0 * r * 0.9, 100.0);
            let expected = bfs_oracle(&relays, 0, r);
            assert_eq!(check_connected(&relays, 0, &[], &[], r), expected);
            assert!(!expected);
        }
    }

    fn bfs_oracle(relays: &[Vec3], base: usize, radius: f64) -> bool {
        let n = relays.len();
        let mut seen = vec![false; n];
        let mut stack = vec![base];
        seen[base] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if !seen[j] && (relays[i] - relays[j]).norm() <= radius {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    #[test]
    fn connectivity_monotone_under_added_agent() {
        let relays = [v(0.0, 0.0), v(4.0, 0.0), v(8.0, 0.0)];
        assert!(check_connected(&relays, 0, &[], &[], 5.0));
        let mut more = relays.to_vec();
        more.push(v(8.0, 3.0));
        assert!(check_connected(&more, 0, &[], &[], 5.0));
    }

    #[test]
    fn goal_region_zero_interval() {
        let g = safe_goal_region(v(0.0, 0.0), 2.0, 10.0, 0.0, 1.0).unwrap();
        assert_eq!(g.epsilon, 0.0);
        assert_eq!(g.connect_radius, 10.0);
        assert_eq!(g.search_inner, 2.0);
    }

    #[test]
    fn goal_region_direct_substitution() {
        let g = safe_goal_region(v(0.0, 0.0), 2.0, 10.0, 1.0, 1.0).unwrap();
        assert_eq!(g.search_inner, 3.0);
        assert_eq!(g.connect_radius, 9.0);
    }

    #[test]
    fn goal_region_empty_error() {
        assert!(matches!(
            safe_goal_region(v(0.0, 0.0), 4.0, 10.0, 4.0, 1.0),
            Err(SimError::EmptyGoalRegion { .. })
        ));
    }

    #[test]
    fn goals_survive_worst_case_relay_motion() {
        // Any goal inside the connect ball stays within comm radius after the
        // relay travels epsilon in the worst direction.
        let relay = Vec3::new(1.0, -2.0, 2.0);
        let comm = 10.0;
        let g = safe_goal_region(relay, 3.0, comm, 1.0, 1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10_000 {
            let goal = loop {
                if let Some(p) = g.sample_search_ground(&mut rng) {
                    break p;
                }
            };
            assert!(g.contains_search(&goal));
            let phi: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            let moved = relay + Vec3::new(phi.cos(), phi.sin(), 0.0) * g.epsilon;
            assert!((goal - moved).norm() <= comm + 1e-9);
        }
    }
}
