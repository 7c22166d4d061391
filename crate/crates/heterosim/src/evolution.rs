//! Genetic tuning of the 13-gene forager genome.
//!
//! Fitness is mean tags collected per hour over a fixed set of seeded,
//! drone-less foraging episodes, so evaluations are deterministic given
//! (genome, seeds) and independent episodes may run in parallel. The GA is
//! conventional: tournament selection, uniform crossover, Gaussian mutation
//! clipped to gene bounds, elitism of one.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::foraging::{ClusterLayout, Episode, EpisodeConfig, ForagerParams};
use crate::rng::RngStreams;

pub const GENOME_LEN: usize = 13;

#[derive(Debug, Clone, Copy)]
pub struct GeneSpec {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
}

/// Bounds for each gene, in `ForagerParams` field order.
pub fn genome_schema() -> [GeneSpec; GENOME_LEN] {
    [
        GeneSpec { name: "travel_speed", min: 0.001, max: 0.35 },
        GeneSpec { name: "search_speed", min: 0.001, max: 0.25 },
        GeneSpec { name: "give_up_time", min: 5.0, max: 120.0 },
        GeneSpec { name: "uninformed_sd", min: 0.05, max: 1.5 },
        GeneSpec { name: "informed_boost", min: 0.0, max: 3.0 },
        GeneSpec { name: "informed_decay", min: 0.2, max: 3.0 },
        GeneSpec { name: "pheromone_threshold", min: 0.0, max: 8.0 },
        GeneSpec { name: "fidelity_threshold", min: 0.0, max: 8.0 },
        GeneSpec { name: "follow_threshold", min: 0.0, max: 8.0 },
        GeneSpec { name: "site_fidelity_decay", min: 0.2, max: 1.0 },
        GeneSpec { name: "pheromone_decay_rate", min: 0.001, max: 0.05 },
        GeneSpec { name: "dispersal_radius", min: 0.2, max: 1.2 },
        GeneSpec { name: "informed_duration", min: 10.0, max: 240.0 },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub genes: Vec<f64>,
}

impl Genome {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let genes =
            genome_schema().iter().map(|g| rng.random_range(g.min..=g.max)).collect();
        Self { genes }
    }

    pub fn clamp_to_bounds(&mut self) {
        for (gene, spec) in self.genes.iter_mut().zip(genome_schema()) {
            *gene = gene.clamp(spec.min, spec.max);
        }
    }

    pub fn within_bounds(&self) -> bool {
        self.genes.len() == GENOME_LEN
            && self
                .genes
                .iter()
                .zip(genome_schema())
                .all(|(g, s)| *g >= s.min && *g <= s.max)
    }

    /// Thresholds round to integers; everything else maps through directly.
    pub fn decode(&self) -> ForagerParams {
        let g = &self.genes;
        ForagerParams {
            travel_speed: g[0],
            search_speed: g[1],
            give_up_time: g[2],
            uninformed_sd: g[3],
            informed_boost: g[4],
            informed_decay: g[5],
            pheromone_threshold: g[6].round() as u32,
            fidelity_threshold: g[7].round() as u32,
            follow_threshold: g[8].round() as u32,
            site_fidelity_decay: g[9],
            pheromone_decay_rate: g[10],
            dispersal_radius: g[11],
            informed_duration: g[12],
        }
    }

    pub fn encode(p: &ForagerParams) -> Self {
        let mut genome = Self {
            genes: vec![
                p.travel_speed,
                p.search_speed,
                p.give_up_time,
                p.uninformed_sd,
                p.informed_boost,
                p.informed_decay,
                p.pheromone_threshold as f64,
                p.fidelity_threshold as f64,
                p.follow_threshold as f64,
                p.site_fidelity_decay,
                p.pheromone_decay_rate,
                p.dispersal_radius,
                p.informed_duration,
            ],
        };
        genome.clamp_to_bounds();
        genome
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Mutation SD as a fraction of each gene's range.
    pub mutation_sd_frac: f64,
    pub episodes_per_eval: usize,
    /// Episode length in seconds.
    pub episode_length: f64,
    pub seed: u64,
    pub n_foragers: usize,
    pub arena_side: f64,
    pub layout: ClusterLayout,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 24,
            generations: 30,
            tournament_size: 3,
            crossover_rate: 0.8,
            mutation_rate: 0.15,
            mutation_sd_frac: 0.15,
            episodes_per_eval: 2,
            episode_length: 240.0,
            seed: 0,
            n_foragers: 2,
            arena_side: 2.5,
            layout: ClusterLayout::Single32,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.population_size < 2 {
            return Err(SimError::config("population must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate)
            || !(0.0..=1.0).contains(&self.mutation_rate)
        {
            return Err(SimError::config("rates must lie in [0, 1]"));
        }
        if self.tournament_size == 0 || self.episodes_per_eval == 0 || self.generations == 0 {
            return Err(SimError::config(
                "tournament size, episodes, generations must be positive",
            ));
        }
        Ok(())
    }
}

fn episode_config(genome: &Genome, config: &GaConfig, episode: usize) -> EpisodeConfig {
    let streams = RngStreams::new(config.seed);
    let mut rng = streams.indexed_stream("ga-episode", episode as u64);
    let mut cfg = EpisodeConfig::default();
    cfg.arena_side = config.arena_side;
    cfg.n_foragers = config.n_foragers;
    cfg.layout = config.layout;
    cfg.drone_enabled = false;
    cfg.duration = config.episode_length;
    cfg.params = genome.decode();
    cfg.seed = rng.random();
    cfg
}

/// Mean tags per hour over the configured seeded episodes (no drone).
pub fn evaluate_genome(genome: &Genome, config: &GaConfig) -> Result<f64, SimError> {
    if !genome.within_bounds() {
        return Err(SimError::config("genome outside bounds"));
    }
    let rates: Result<Vec<f64>, SimError> = (0..config.episodes_per_eval)
        .map(|e| Episode::run(episode_config(genome, config, e)).map(|r| r.tags_per_hour()))
        .collect();
    let rates = rates?;
    Ok(rates.iter().sum::<f64>() / rates.len() as f64)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GaHistory {
    pub best: Vec<f64>,
    pub mean: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaResult {
    pub best_genome: Genome,
    pub best_fitness: f64,
    pub best_params: ForagerParams,
    pub history: GaHistory,
}

/// Run the GA: tournament selection, uniform crossover, Gaussian mutation
/// clipped to bounds, elitism of one. Episode evaluations for a generation
/// run in parallel; the loop itself is sequential and seeded.
pub fn ga_run(config: &GaConfig) -> Result<GaResult, SimError> {
    config.validate()?;
    let streams = RngStreams::new(config.seed);
    let mut rng = streams.stream(crate::rng::STREAM_GA);

    let mut population: Vec<Genome> =
        (0..config.population_size).map(|_| Genome::random(&mut rng)).collect();
    let mut history = GaHistory::default();
    let mut elite: Option<(Genome, f64)> = None;

    for _generation in 0..config.generations {
        let fitness: Result<Vec<f64>, SimError> =
            population.par_iter().map(|g| evaluate_genome(g, config)).collect();
        let fitness = fitness?;

        let gen_best = fitness
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, f)| (population[i].clone(), *f))
            .expect("nonempty population");
        match &elite {
            Some((_, f)) if *f >= gen_best.1 => {}
            _ => elite = Some(gen_best),
        }
        let (elite_genome, elite_fitness) = elite.clone().unwrap();
        history.best.push(elite_fitness);
        history.mean.push(fitness.iter().sum::<f64>() / fitness.len() as f64);

        let mut next = Vec::with_capacity(config.population_size);
        next.push(elite_genome.clone());
        while next.len() < config.population_size {
            let a = tournament(&population, &fitness, config.tournament_size, &mut rng);
            let b = tournament(&population, &fitness, config.tournament_size, &mut rng);
            let mut child = if rng.random::<f64>() < config.crossover_rate {
                uniform_crossover(a, b, &mut rng)
            } else {
                a.clone()
            };
            mutate(&mut child, config, &mut rng);
            next.push(child);
        }
        population = next;
    }

    let (best_genome, best_fitness) = elite.expect("at least one generation ran");
    let best_params = best_genome.decode();
    Ok(GaResult { best_genome, best_fitness, best_params, history })
}

fn tournament<'a, R: Rng>(
    population: &'a [Genome],
    fitness: &[f64],
    size: usize,
    rng: &mut R,
) -> &'a Genome {
    let mut best: Option<usize> = None;
    for _ in 0..size {
        let i = rng.random_range(0..population.len());
        best = match best {
            Some(b) if fitness[b] >= fitness[i] => Some(b),
            _ => Some(i),
        };
    }
    &population[best.unwrap()]
}

fn uniform_crossover<R: Rng>(a: &Genome, b: &Genome, rng: &mut R) -> Genome {
    let genes = a
        .genes
        .iter()
        .zip(&b.genes)
        .map(|(ga, gb)| if rng.random::<bool>() { *ga } else { *gb })
        .collect();
    Genome { genes }
}

fn mutate<R: Rng>(genome: &mut Genome, config: &GaConfig, rng: &mut R) {
    use rand_distr::{Distribution, Normal};
    for (gene, spec) in genome.genes.iter_mut().zip(genome_schema()) {
        if rng.random::<f64>() < config.mutation_rate {
            let sd = (spec.max - spec.min) * config.mutation_sd_frac;
            let normal = Normal::new(0.0, sd).expect("finite sd");
            *gene += normal.sample(rng);
        }
    }
    genome.clamp_to_bounds();
}
