//! Tailored differential evolution: DE/rand/1 with binomial crossover,
//! relaxed-feasibility selection, scheduled dynamic penalty rounds, value
//! scaling, adaptive per-generation bounds, bet-and-run initialization,
//! and stagnation-based early termination.
//!
//! Genomes live in the scaled search space; the evaluator always receives
//! the unscaled decision vector `α·u'`. Single-threaded execution is
//! bitwise deterministic for a given seed: every stochastic step draws
//! from its own substream keyed on (seed, phase, round, generation,
//! member), so no draw order can leak between individuals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate, EvaluationResult};
use crate::scenarios::{decode, ScenarioSpec};
use crate::system::ControllerRealization;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PenaltyMode {
    /// ϱ_p = ϱ_max^{p/(ℙ−1)}: geometric from 1 to ϱ_max across the rounds.
    Scheduled,
    /// Constant penalty factor across all rounds (ablation rows 2-5).
    Fixed { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RangeMode {
    /// Bounds recentered to best ± ζ after every generation.
    Adaptive,
    /// Fixed box [−c, c]. `scaled` selects whether c is expressed in the
    /// scaled search space (default interpretation) or in physical units.
    Fixed { half_width: f64, scaled: bool },
}

/// All algorithm hyperparameters. Field defaults follow the published
/// configuration for the indirect-coupling scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DEConfig {
    /// Population size N_p.
    pub n_pop: usize,
    /// Mutation scale F.
    pub f_scale: f64,
    /// Crossover rate CR.
    pub cr: f64,
    /// Equality-constraint relaxation δ.
    pub delta: f64,
    /// λ_min(P) margin φ.
    pub phi: f64,
    /// Number of penalty rounds ℙ.
    pub rounds: usize,
    /// Final penalty factor ϱ_max.
    pub rho_max: f64,
    /// Value-scaling factor α ≥ 1.
    pub alpha: f64,
    /// Adaptive-bound half-width ζ.
    pub zeta: f64,
    /// Bet-and-run independent runs I.
    pub bet_runs: usize,
    /// Bet-and-run generations per run N_B.
    pub bet_iters: usize,
    /// Bet-and-run initial range half-width b.
    pub init_bound: f64,
    /// Generation cap per round.
    pub max_gen: u64,
    /// Consecutive stagnant generations before the round ends.
    pub stagnation_cap: u64,
    /// Minimum best-fitness improvement counted as progress.
    pub conv_threshold: f64,
    pub seed: u64,
    pub penalty: PenaltyMode,
    pub range: RangeMode,
    /// Record every n-th generation in the trace (round ends always
    /// recorded). 1 keeps the full trace.
    pub trace_stride: u64,
}

impl Default for DEConfig {
    fn default() -> Self {
        Self {
            n_pop: 20,
            f_scale: 0.85,
            cr: 0.95,
            delta: 0.01,
            phi: 1e-6,
            rounds: 20,
            rho_max: 1e10,
            alpha: 10.0,
            zeta: 1.0,
            bet_runs: 10,
            bet_iters: 10,
            init_bound: 1.0,
            max_gen: 300_000,
            stagnation_cap: 60_000,
            conv_threshold: 1e-10,
            seed: 0,
            penalty: PenaltyMode::Scheduled,
            range: RangeMode::Adaptive,
            trace_stride: 1,
        }
    }
}

impl DEConfig {
    /// Published defaults for a scenario (α and ℙ differ for the squeezed
    /// configuration).
    pub fn for_scenario(spec: &ScenarioSpec) -> Self {
        Self {
            alpha: spec.default_alpha,
            rounds: spec.default_rounds,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pop < 4 {
            return Err(Error::Config("n_pop must be at least 4 (DE/rand/1 needs 3 distinct others)".into()));
        }
        if self.rounds < 2 {
            return Err(Error::Config("rounds must be at least 2".into()));
        }
        if self.alpha < 1.0 {
            return Err(Error::Config("alpha must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.cr) {
            return Err(Error::Config("cr must lie in [0, 1]".into()));
        }
        if self.zeta <= 0.0 || self.delta <= 0.0 || self.phi <= 0.0 {
            return Err(Error::Config("zeta, delta and phi must be positive".into()));
        }
        if self.bet_runs < 1 || self.init_bound <= 0.0 {
            return Err(Error::Config("bet_runs must be >= 1 and init_bound positive".into()));
        }
        if self.trace_stride == 0 {
            return Err(Error::Config("trace_stride must be positive".into()));
        }
        Ok(())
    }
}

/// `ϱ_p = ϱ_max^{p/(ℙ−1)}`, strictly increasing in p.
pub fn penalty_schedule(p: usize, rounds: usize, rho_max: f64) -> Result<f64> {
    if rounds < 2 {
        return Err(Error::Config("penalty schedule needs at least 2 rounds".into()));
    }
    if p >= rounds {
        return Err(Error::Config(format!("round index {p} out of range 0..{rounds}")));
    }
    Ok(rho_max.powf(p as f64 / (rounds as f64 - 1.0)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent substream keyed on the seed plus context tags.
fn stream_rng(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut s = splitmix64(seed);
    for &t in tags {
        s = splitmix64(s ^ t);
    }
    ChaCha8Rng::seed_from_u64(s)
}

const TAG_ROUND_INIT: u64 = 1;
const TAG_GENERATION: u64 = 2;
const TAG_BET_INIT: u64 = 3;
const TAG_BET_GEN: u64 = 4;

/// DE/rand/1 donor: `u_a + F (u_b − u_c)` with a, b, c distinct from each
/// other and from the target index. No clamping here.
pub fn mutate_rand1(
    members: &[Vec<f64>],
    target: usize,
    f_scale: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if members.len() < 4 {
        return Err(Error::Config("population too small for DE/rand/1".into()));
    }
    let mut picks = [target; 3];
    for slot in 0..3 {
        loop {
            let cand = rng.gen_range(0..members.len());
            if cand != target && !picks[..slot].contains(&cand) {
                picks[slot] = cand;
                break;
            }
        }
    }
    let (a, b, c) = (&members[picks[0]], &members[picks[1]], &members[picks[2]]);
    Ok(a.iter()
        .zip(b.iter().zip(c))
        .map(|(av, (bv, cv))| av + f_scale * (bv - cv))
        .collect())
}

/// Deterministic core of binomial crossover: component j comes from the
/// donor when `r_j <= cr` or `j == j_rand`.
pub fn binomial_crossover_with(
    target: &[f64],
    donor: &[f64],
    cr: f64,
    j_rand: usize,
    draws: &[f64],
) -> Vec<f64> {
    target
        .iter()
        .zip(donor)
        .enumerate()
        .map(|(j, (t, d))| if draws[j] <= cr || j == j_rand { *d } else { *t })
        .collect()
}

pub fn binomial_crossover(
    target: &[f64],
    donor: &[f64],
    cr: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let d = target.len();
    let j_rand = rng.gen_range(0..d);
    let draws: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
    binomial_crossover_with(target, donor, cr, j_rand, &draws)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Target,
    Trial,
}

/// Deb-style relaxed-feasibility selection. Feasible beats infeasible,
/// infeasibles compare by violation, feasibles by fitness; exact ties go
/// to the trial.
pub fn feasibility_select(target: &EvaluationResult, trial: &EvaluationResult) -> Selection {
    let winner_is_trial = match (target.feasible(), trial.feasible()) {
        (true, true) => trial.fitness <= target.fitness,
        (true, false) => false,
        (false, true) => true,
        // Violation ties fall back to fitness so the population's
        // lexicographic best never regresses within a round.
        (false, false) => match trial.violation.total_cmp(&target.violation) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => trial.fitness <= target.fitness,
        },
    };
    if winner_is_trial {
        Selection::Trial
    } else {
        Selection::Target
    }
}

fn lexic_key(e: &EvaluationResult) -> (f64, f64) {
    (e.violation, e.fitness)
}

fn lexic_le(a: &EvaluationResult, b: &EvaluationResult) -> bool {
    let (av, af) = lexic_key(a);
    let (bv, bf) = lexic_key(b);
    match av.total_cmp(&bv) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => af.total_cmp(&bf).is_le(),
    }
}

/// Componentwise `best ± ζ` in scaled space.
pub fn adaptive_bounds(best: &[f64], zeta: f64) -> (Vec<f64>, Vec<f64>) {
    (
        best.iter().map(|v| v - zeta).collect(),
        best.iter().map(|v| v + zeta).collect(),
    )
}

/// `u = α·u'`; the evaluator always receives the unscaled vector.
pub fn scale_decision(scaled: &[f64], alpha: f64) -> Vec<f64> {
    scaled.iter().map(|v| v * alpha).collect()
}

fn clamp_into(genome: &mut [f64], lower: &[f64], upper: &[f64]) {
    for (v, (lo, hi)) in genome.iter_mut().zip(lower.iter().zip(upper)) {
        *v = v.clamp(*lo, *hi);
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TraceRecord {
    pub round: usize,
    pub generation: u64,
    pub best_fitness: f64,
    pub best_j: f64,
    pub best_k: f64,
    pub best_h: f64,
    pub best_violation: f64,
    pub evals: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub rho: f64,
    pub generations: u64,
    pub best_fitness: f64,
    pub best_j: f64,
    pub best_k: f64,
    pub best_h: f64,
    pub best_violation: f64,
    pub evals: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub rounds: Vec<RoundSummary>,
    pub best_scaled: Vec<f64>,
    pub best_unscaled: Vec<f64>,
    pub total_evals: u64,
}

/// One generation's genomes with their cached evaluations.
#[derive(Debug, Clone)]
pub struct Population {
    pub members: Vec<Vec<f64>>,
    pub evals: Vec<EvaluationResult>,
}

impl Population {
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for i in 1..self.evals.len() {
            if !lexic_le(&self.evals[best], &self.evals[i]) {
                best = i;
            }
        }
        best
    }
}

struct Evaluator<'a> {
    scenario: &'a ScenarioSpec,
    alpha: f64,
    phi: f64,
    delta: f64,
    rho: f64,
    count: u64,
}

impl Evaluator<'_> {
    fn eval(&mut self, scaled: &[f64]) -> Result<EvaluationResult> {
        self.count += 1;
        evaluate(&scale_decision(scaled, self.alpha), self.scenario, self.rho, self.phi, self.delta)
    }
}

fn uniform_in(lower: &[f64], upper: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    lower
        .iter()
        .zip(upper)
        .map(|(lo, hi)| rng.gen_range(*lo..=*hi))
        .collect()
}

/// One synchronous DE generation: donors come from the previous
/// population, selection is pairwise target-vs-trial, so evaluation order
/// cannot change the outcome.
fn evolve_generation(
    pop: &mut Population,
    cfg: &DEConfig,
    lower: &[f64],
    upper: &[f64],
    ev: &mut Evaluator,
    seed_tags: &[u64],
) -> Result<()> {
    // Classic in-place update: survivors are visible to later members'
    // donor draws within the same generation.
    for i in 0..cfg.n_pop {
        let mut tags = seed_tags.to_vec();
        tags.push(i as u64);
        let mut rng = stream_rng(cfg.seed, &tags);
        let donor = mutate_rand1(&pop.members, i, cfg.f_scale, &mut rng)?;
        let mut trial = binomial_crossover(&pop.members[i], &donor, cfg.cr, &mut rng);
        clamp_into(&mut trial, lower, upper);
        let trial_eval = ev.eval(&trial)?;
        if feasibility_select(&pop.evals[i], &trial_eval) == Selection::Trial {
            pop.members[i] = trial;
            pop.evals[i] = trial_eval;
        }
    }
    Ok(())
}

/// Several short exploratory runs; the final best genome with the
/// smallest fitness at ϱ = 1 wins and seeds the main optimization.
pub fn bet_and_run_init(
    scenario: &ScenarioSpec,
    cfg: &DEConfig,
    eval_count: &mut u64,
) -> Result<Vec<f64>> {
    let d = scenario.layout.len;
    let b = cfg.init_bound;
    let lower = vec![-b; d];
    let upper = vec![b; d];
    let mut ev = Evaluator {
        scenario,
        alpha: cfg.alpha,
        phi: cfg.phi,
        delta: cfg.delta,
        rho: 1.0,
        count: 0,
    };
    let mut winner: Option<(f64, Vec<f64>)> = None;
    for run in 0..cfg.bet_runs {
        let mut members = Vec::with_capacity(cfg.n_pop);
        for i in 0..cfg.n_pop {
            let mut rng = stream_rng(cfg.seed, &[TAG_BET_INIT, run as u64, i as u64]);
            members.push(uniform_in(&lower, &upper, &mut rng));
        }
        let evals = members
            .iter()
            .map(|m| ev.eval(m))
            .collect::<Result<Vec<_>>>()?;
        let mut pop = Population { members, evals };
        for g in 1..=cfg.bet_iters as u64 {
            evolve_generation(&mut pop, cfg, &lower, &upper, &mut ev, &[TAG_BET_GEN, run as u64, g])?;
        }
        let (idx, _) = pop
            .evals
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.fitness.total_cmp(&b.fitness))
            .expect("nonempty population");
        let fit = pop.evals[idx].fitness;
        if winner.as_ref().map_or(true, |(wf, _)| fit < *wf) {
            winner = Some((fit, pop.members[idx].clone()));
        }
    }
    *eval_count += ev.count;
    Ok(winner.expect("bet_runs >= 1").1)
}

/// Evolves one penalty round from a seed genome. Returns the round's best
/// genome, its evaluation, and the number of generations run.
pub fn run_round(
    scenario: &ScenarioSpec,
    cfg: &DEConfig,
    rho: f64,
    round: usize,
    seed_genome: &[f64],
    trace: &mut RunTrace,
    eval_count: &mut u64,
) -> Result<(Vec<f64>, EvaluationResult, u64)> {
    let d = scenario.layout.len;
    if seed_genome.len() != d {
        return Err(Error::Dimension(format!(
            "seed genome has {} entries, layout needs {d}",
            seed_genome.len()
        )));
    }
    let mut ev = Evaluator {
        scenario,
        alpha: cfg.alpha,
        phi: cfg.phi,
        delta: cfg.delta,
        rho,
        count: *eval_count,
    };

    let fixed_bounds = match cfg.range {
        RangeMode::Adaptive => None,
        RangeMode::Fixed { half_width, scaled } => {
            let hw = if scaled { half_width } else { half_width / cfg.alpha };
            Some((vec![-hw; d], vec![hw; d]))
        }
    };

    // Member 0 carries the seed; the rest restart diversity around it
    // (adaptive mode) or across the fixed box.
    let mut members = vec![seed_genome.to_vec()];
    let (init_lower, init_upper) = match &fixed_bounds {
        Some((lo, hi)) => (lo.clone(), hi.clone()),
        None => adaptive_bounds(seed_genome, cfg.zeta),
    };
    for i in 1..cfg.n_pop {
        let mut rng = stream_rng(cfg.seed, &[TAG_ROUND_INIT, round as u64, i as u64]);
        members.push(uniform_in(&init_lower, &init_upper, &mut rng));
    }
    let evals = members
        .iter()
        .map(|m| ev.eval(m))
        .collect::<Result<Vec<_>>>()?;
    let mut pop = Population { members, evals };

    let mut best_idx = pop.best_index();
    let (mut lower, mut upper) = match &fixed_bounds {
        Some((lo, hi)) => (lo.clone(), hi.clone()),
        None => adaptive_bounds(&pop.members[best_idx], cfg.zeta),
    };

    let record = |trace: &mut RunTrace, round, g, e: &EvaluationResult, evals| {
        trace.records.push(TraceRecord {
            round,
            generation: g,
            best_fitness: e.fitness,
            best_j: e.j_inf,
            best_k: e.k,
            best_h: e.h,
            best_violation: e.violation,
            evals,
        });
    };
    record(trace, round, 0, &pop.evals[best_idx], ev.count);

    let mut prev_fitness = pop.evals[best_idx].fitness;
    let mut stagnant = 0u64;
    let mut generations = 0u64;
    for g in 1..=cfg.max_gen {
        evolve_generation(&mut pop, cfg, &lower, &upper, &mut ev, &[TAG_GENERATION, round as u64, g])?;
        generations = g;
        best_idx = pop.best_index();
        let best = &pop.evals[best_idx];

        if g % cfg.trace_stride == 0 {
            record(trace, round, g, best, ev.count);
        }

        if fixed_bounds.is_none() {
            let (lo, hi) = adaptive_bounds(&pop.members[best_idx], cfg.zeta);
            lower = lo;
            upper = hi;
        }

        let improvement = prev_fitness - best.fitness;
        if improvement < cfg.conv_threshold {
            stagnant += 1;
        } else {
            stagnant = 0;
        }
        prev_fitness = best.fitness;
        if stagnant >= cfg.stagnation_cap {
            break;
        }
    }

    if generations % cfg.trace_stride != 0 {
        record(trace, round, generations, &pop.evals[best_idx], ev.count);
    }
    *eval_count = ev.count;
    Ok((pop.members[best_idx].clone(), pop.evals[best_idx], generations))
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub controller: ControllerRealization,
    pub evaluation: EvaluationResult,
    pub best_scaled: Vec<f64>,
    pub best_decision: Vec<f64>,
    pub trace: RunTrace,
}

/// Full synthesis: bet-and-run once, then ℙ penalty rounds, each seeded
/// with the previous round's best genome.
pub fn optimize(scenario: &ScenarioSpec, cfg: &DEConfig) -> Result<OptimizeOutcome> {
    cfg.validate()?;
    let mut trace = RunTrace::default();
    let mut eval_count = 0u64;
    let mut best = bet_and_run_init(scenario, cfg, &mut eval_count)?;
    let mut best_eval = None;
    for p in 0..cfg.rounds {
        let rho = match cfg.penalty {
            PenaltyMode::Scheduled => penalty_schedule(p, cfg.rounds, cfg.rho_max)?,
            PenaltyMode::Fixed { rho } => rho,
        };
        let evals_before = eval_count;
        let (genome, eval, generations) =
            run_round(scenario, cfg, rho, p, &best, &mut trace, &mut eval_count)?;
        trace.rounds.push(RoundSummary {
            round: p,
            rho,
            generations,
            best_fitness: eval.fitness,
            best_j: eval.j_inf,
            best_k: eval.k,
            best_h: eval.h,
            best_violation: eval.violation,
            evals: eval_count - evals_before,
        });
        best = genome;
        best_eval = Some(eval);
    }
    let decision = scale_decision(&best, cfg.alpha);
    let controller = decode(&decision, scenario)?;
    trace.best_scaled = best.clone();
    trace.best_unscaled = decision.clone();
    trace.total_evals = eval_count;
    Ok(OptimizeOutcome {
        controller,
        evaluation: best_eval.expect("rounds >= 2"),
        best_scaled: best,
        best_decision: decision,
        trace,
    })
}
