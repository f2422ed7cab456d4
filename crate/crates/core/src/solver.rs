//! Element Distinctness and Set Intersection by repeated random-start trials
//! of `collide` under fresh layered hashes.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::collide::{collide, Caps, CollideError, CollisionGroup, CollisionReport, ResourceMeter};
use crate::graph::{Instance, Vertex};
use crate::layered_hash::{sample_layered_in, HashError, HashParams, LayeredHash};
use crate::randomness::{ceil_log2, parse_seed_hex, FieldChoice, RandomTape, SeedError};

/// Stream ids of phase-2 trials start here, so the phases never share a stream.
const MULTI_STREAM_BASE: u64 = 1 << 40;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n: u32,
    pub m: u64,
    /// Space budget S in words.
    pub space: u64,
    pub single_trials: u64,
    pub multi_trials: u64,
    /// Starts per phase-2 trial (k).
    pub starts_per_trial: u64,
    pub kappa: usize,
    pub t_single: usize,
    pub t_multi: usize,
    pub field: FieldChoice,
    /// Master seed as hex.
    pub seed: String,
    /// Stop at the first verified witness.
    pub early_exit: bool,
    pub step_cap: u64,
    pub max_oracle_calls_per_trial: Option<u64>,
}

impl SolverConfig {
    /// Single-start schedule: `8⌈n·log₂ n⌉` trials with `t = ⌈½log₂ n⌉`.
    pub fn low_space(n: u32, m: u64, seed: &str) -> Self {
        let lg = u64::from(ceil_log2(u64::from(n)).max(1));
        let p = HashParams::low_space(n, m);
        SolverConfig {
            n,
            m,
            space: lg,
            single_trials: 8 * u64::from(n) * lg,
            multi_trials: 0,
            starts_per_trial: 1,
            kappa: p.kappa,
            t_single: p.t,
            t_multi: p.t,
            field: FieldChoice::Smallest,
            seed: seed.to_string(),
            early_exit: true,
            step_cap: 64 * u64::from(n),
            max_oracle_calls_per_trial: None,
        }
    }

    /// Two-phase schedule for space `S`: `8⌈log₂ n⌉` single-start trials, then
    /// `8⌈(n/S)·log₂ n⌉` trials with `S` starts each and `t = ⌈½log₂(n/S)⌉`.
    pub fn tradeoff(n: u32, m: u64, space: u64, seed: &str) -> Self {
        let lg = u64::from(ceil_log2(u64::from(n)).max(1));
        let space = space.clamp(1, u64::from(n));
        SolverConfig {
            space,
            single_trials: 8 * lg,
            multi_trials: 8 * (u64::from(n) * lg).div_ceil(space),
            starts_per_trial: space,
            t_multi: HashParams::tradeoff(n, m, space).t,
            ..Self::low_space(n, m, seed)
        }
    }

    /// Set Intersection over the length-`2n` concatenation: no single phase,
    /// `8⌈(2n/S)·log₂² n⌉` trials, and no early exit.
    pub fn set_intersection(n: u32, m: u64, space: u64, seed: &str) -> Self {
        let lg = u64::from(ceil_log2(u64::from(n)).max(1));
        let big = 2 * n;
        let base = Self::tradeoff(big, m, space, seed);
        SolverConfig {
            single_trials: 0,
            multi_trials: 8 * (u64::from(big) * lg * lg).div_ceil(base.space),
            early_exit: false,
            ..base
        }
    }

    pub fn single_params(&self) -> HashParams {
        HashParams {
            n: self.n,
            m: self.m,
            t: self.t_single,
            kappa: self.kappa,
        }
    }

    pub fn multi_params(&self) -> HashParams {
        HashParams {
            t: self.t_multi,
            ..self.single_params()
        }
    }

    fn caps(&self) -> Caps {
        Caps {
            step_cap: self.step_cap,
            max_oracle_calls: self.max_oracle_calls_per_trial,
            word_budget: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Distinct,
    CollisionFound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Single,
    Multi,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialLog {
    pub phase: Phase,
    pub trial: u64,
    pub oracle_calls: u64,
    pub peak_words: u64,
    pub found: bool,
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOutcome {
    pub verdict: Verdict,
    /// Verified groups from every successful trial, merged by value.
    pub witnesses: CollisionReport,
    /// Calls summed, peak words maximized over trials.
    pub resources: ResourceMeter,
    /// Words of the largest hash seed drawn in any trial.
    pub seed_words: u64,
    pub trials: Vec<TrialLog>,
    pub config: SolverConfig,
    #[serde(skip)]
    pub seconds: f64,
}

impl SolverOutcome {
    pub fn trials_run(&self) -> usize {
        self.trials.len()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Seed(#[from] SeedError),
    #[error(transparent)]
    Hash(#[from] HashError),
}

/// Result of a single trial.
#[derive(Clone, Debug)]
pub struct TrialResult {
    /// Groups that survived re-verification against the array.
    pub groups: Vec<CollisionGroup>,
    pub meter: ResourceMeter,
    pub truncated: bool,
    pub seed_bits: u64,
}

/// Keeps only groups whose positions really share the stated value.
pub fn verify_groups(inst: &Instance, groups: Vec<CollisionGroup>) -> Vec<CollisionGroup> {
    groups
        .into_iter()
        .filter(|g| {
            g.positions.len() >= 2
                && g.positions.windows(2).all(|w| w[0] < w[1])
                && g.positions
                    .iter()
                    .all(|&p| p >= 1 && p <= inst.n() && inst.value(p) == g.value)
        })
        .collect()
}

/// One trial: a fresh hash and `k` uniform starts from `tape`, then `collide`.
pub fn run_trial(
    inst: &Instance,
    params: HashParams,
    field: FieldChoice,
    k: u64,
    caps: &Caps,
    tape: &mut RandomTape,
) -> Result<TrialResult, HashError> {
    let h: LayeredHash = sample_layered_in(tape, params, field)?;
    let n = inst.n();
    let starts: Vec<Vertex> = (0..k).map(|_| tape.gen_range(1..=n)).collect();
    let mut meter = ResourceMeter::new();
    let (report, truncated) = match collide(inst, &h, &starts, caps, &mut meter) {
        Ok(r) => (r, false),
        Err(CollideError::Truncated { partial, meter: m }) => {
            meter = m;
            (partial, true)
        }
        Err(CollideError::BadStarts) => unreachable!("starts drawn inside [1, n]"),
    };
    Ok(TrialResult {
        groups: verify_groups(inst, report.groups),
        meter,
        truncated,
        seed_bits: h.seed_bits(),
    })
}

fn seed_key(seed: &str) -> Result<[u8; 32], SolverError> {
    Ok(Sha256::digest(parse_seed_hex(seed)?).into())
}

fn word_bits(n: u32) -> u64 {
    u64::from(ceil_log2(u64::from(n)).max(1))
}

fn merge_into(acc: &mut Vec<CollisionGroup>, found: &[CollisionGroup]) {
    for g in found {
        match acc.binary_search_by_key(&g.value, |x| x.value) {
            Ok(i) => {
                let mut pos = acc[i].positions.clone();
                pos.extend_from_slice(&g.positions);
                pos.sort_unstable();
                pos.dedup();
                acc[i].positions = pos;
            }
            Err(i) => acc.insert(i, g.clone()),
        }
    }
}

struct Runner<'a> {
    inst: &'a Instance,
    cfg: &'a SolverConfig,
    key: [u8; 32],
    caps: Caps,
    groups: Vec<CollisionGroup>,
    resources: ResourceMeter,
    seed_words: u64,
    trials: Vec<TrialLog>,
}

impl Runner<'_> {
    /// Runs one phase; returns true if the run should stop.
    fn phase<F: FnMut(&[CollisionGroup])>(
        &mut self,
        phase: Phase,
        count: u64,
        on_found: &mut F,
    ) -> Result<bool, SolverError> {
        let (params, k, base) = match phase {
            Phase::Single => (self.cfg.single_params(), 1, 0),
            Phase::Multi => (self.cfg.multi_params(), self.cfg.starts_per_trial, MULTI_STREAM_BASE),
        };
        for trial in 0..count {
            let mut tape = RandomTape::from_key(self.key, base + trial);
            let r = run_trial(self.inst, params, self.cfg.field, k, &self.caps, &mut tape)?;
            self.resources.absorb(&r.meter);
            self.seed_words = self.seed_words.max(r.seed_bits.div_ceil(word_bits(self.cfg.n)));
            let found = !r.groups.is_empty();
            self.trials.push(TrialLog {
                phase,
                trial,
                oracle_calls: r.meter.oracle_calls,
                peak_words: r.meter.peak_words,
                found,
                truncated: r.truncated,
            });
            if found {
                on_found(&r.groups);
                merge_into(&mut self.groups, &r.groups);
                if self.cfg.early_exit {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }
}

fn check_config(inst: &Instance, cfg: &SolverConfig) -> Result<(), SolverError> {
    if inst.n() != cfg.n || inst.m() > cfg.m {
        return Err(SolverError::Config(format!(
            "config is for n={} m={}, instance has n={} m={}",
            cfg.n,
            cfg.m,
            inst.n(),
            inst.m()
        )));
    }
    if cfg.starts_per_trial == 0 || cfg.starts_per_trial > u64::from(cfg.n) {
        return Err(SolverError::Config("starts per trial must lie in [1, n]".into()));
    }
    Ok(())
}

fn run<F: FnMut(&[CollisionGroup])>(
    inst: &Instance,
    cfg: &SolverConfig,
    mut on_found: F,
) -> Result<SolverOutcome, SolverError> {
    check_config(inst, cfg)?;
    let clock = Instant::now();
    let mut r = Runner {
        inst,
        cfg,
        key: seed_key(&cfg.seed)?,
        caps: cfg.caps(),
        groups: Vec::new(),
        resources: ResourceMeter::new(),
        seed_words: 0,
        trials: Vec::new(),
    };
    if !r.phase(Phase::Single, cfg.single_trials, &mut on_found)? {
        r.phase(Phase::Multi, cfg.multi_trials, &mut on_found)?;
    }
    Ok(SolverOutcome {
        verdict: if r.groups.is_empty() {
            Verdict::Distinct
        } else {
            Verdict::CollisionFound
        },
        witnesses: CollisionReport {
            groups: r.groups,
            valid: true,
            over_budget: false,
        },
        resources: r.resources,
        seed_words: r.seed_words,
        trials: r.trials,
        config: cfg.clone(),
        seconds: clock.elapsed().as_secs_f64(),
    })
}

/// Single-start solver (polylogarithmic space).
pub fn solve_ed_lowspace(inst: &Instance, cfg: &SolverConfig) -> Result<SolverOutcome, SolverError> {
    if cfg.multi_trials > 0 && cfg.starts_per_trial > 1 {
        return Err(SolverError::Config(
            "low-space solver runs single-start trials only".into(),
        ));
    }
    run(inst, cfg, |_| {})
}

/// Two-phase solver for space budget `cfg.space`.
pub fn solve_ed_tradeoff(inst: &Instance, cfg: &SolverConfig) -> Result<SolverOutcome, SolverError> {
    run(inst, cfg, |_| {})
}

/// Set Intersection of two duplicate-free arrays. `emit` receives every value
/// found in both, once per finding trial (repeats are possible).
pub fn solve_si<F: FnMut(u64)>(
    a: &Instance,
    b: &Instance,
    cfg: &SolverConfig,
    mut emit: F,
) -> Result<SolverOutcome, SolverError> {
    if a.n() != b.n() {
        return Err(SolverError::Config("arrays must have equal length".into()));
    }
    debug_assert!(
        a.is_injective() && b.is_injective(),
        "set intersection inputs must be duplicate-free"
    );
    let c = a.concat(b);
    let split = a.n();
    run(&c, cfg, |groups| {
        for g in groups {
            let (lo, hi) = (g.positions[0], g.positions[g.positions.len() - 1]);
            if lo <= split && hi > split {
                emit(g.value);
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_instance, gen_set_intersection_pair, InstanceKind};
    use std::collections::BTreeSet;

    fn planted(n: u32, seed: &[u8]) -> (Instance, (Vertex, Vertex)) {
        let g = gen_instance(
            InstanceKind::PlantedPair,
            n,
            u64::from(n) * u64::from(n),
            &mut RandomTape::new(seed),
        )
        .unwrap();
        (g.instance, g.planted[0])
    }

    #[test]
    fn defaults_follow_schedule() {
        let c = SolverConfig::tradeoff(1 << 12, 1 << 24, 1 << 6, "00");
        assert_eq!(c.single_trials, 8 * 12);
        assert_eq!(c.multi_trials, 8 * 64 * 12);
        assert_eq!(c.t_single, 6);
        assert_eq!(c.t_multi, 3);
        assert_eq!(c.kappa, 240);
        let s = SolverConfig::set_intersection(1 << 10, 1 << 20, 1 << 5, "00");
        assert_eq!(s.n, 1 << 11);
        assert_eq!(s.multi_trials, 8 * 64 * 100);
    }

    #[test]
    fn distinct_is_never_refuted() {
        let g = gen_instance(InstanceKind::Distinct, 256, 1 << 16, &mut RandomTape::new(b"d")).unwrap();
        let mut cfg = SolverConfig::tradeoff(256, 1 << 16, 16, "0d");
        cfg.multi_trials = 40;
        let out = solve_ed_tradeoff(&g.instance, &cfg).unwrap();
        assert_eq!(out.verdict, Verdict::Distinct);
        assert_eq!(out.trials_run() as u64, cfg.single_trials + 40);
    }

    #[test]
    fn planted_pair_found_and_verified() {
        let (inst, (p, q)) = planted(256, b"p");
        let cfg = SolverConfig::low_space(256, 1 << 16, "01");
        let out = solve_ed_lowspace(&inst, &cfg).unwrap();
        assert_eq!(out.verdict, Verdict::CollisionFound);
        assert_eq!(out.witnesses.groups.len(), 1);
        assert_eq!(out.witnesses.groups[0].positions, vec![p, q]);
        assert!(out.trials_run() < cfg.single_trials as usize);
    }

    #[test]
    fn reruns_are_identical() {
        let (inst, _) = planted(128, b"r");
        let mut cfg = SolverConfig::tradeoff(128, 1 << 14, 8, "abcd");
        cfg.early_exit = false;
        cfg.multi_trials = 30;
        let a = solve_ed_tradeoff(&inst, &cfg).unwrap();
        let b = solve_ed_tradeoff(&inst, &cfg).unwrap();
        assert_eq!(a.trials, b.trials);
        assert_eq!(a.witnesses, b.witnesses);
        assert_eq!(a.resources, b.resources);
    }

    #[test]
    fn bogus_groups_are_dropped() {
        let inst = Instance::new(9, vec![1, 2, 1]).unwrap();
        let g = |value, positions: Vec<Vertex>| CollisionGroup { value, positions };
        let kept = verify_groups(
            &inst,
            vec![g(1, vec![1, 3]), g(2, vec![1, 2]), g(1, vec![3, 1]), g(1, vec![1])],
        );
        assert_eq!(kept, vec![g(1, vec![1, 3])]);
    }

    #[test]
    fn set_intersection_small() {
        let (a, b) = gen_set_intersection_pair(128, 1 << 14, 3, &mut RandomTape::new(b"si")).unwrap();
        let want: BTreeSet<u64> = a.values().iter().filter(|v| b.values().contains(v)).copied().collect();
        let cfg = SolverConfig::set_intersection(128, 1 << 14, 64, "51");
        let mut got = BTreeSet::new();
        let out = solve_si(&a, &b, &cfg, |v| {
            got.insert(v);
        })
        .unwrap();
        assert_eq!(got, want);
        assert_eq!(out.verdict, Verdict::CollisionFound);

        let (a, b) = gen_set_intersection_pair(64, 1 << 12, 0, &mut RandomTape::new(b"si0")).unwrap();
        let mut cfg = SolverConfig::set_intersection(64, 1 << 12, 16, "52");
        cfg.multi_trials = 50;
        let mut any = false;
        solve_si(&a, &b, &cfg, |_| any = true).unwrap();
        assert!(!any);
    }

    #[test]
    fn config_mismatch_rejected() {
        let (inst, _) = planted(64, b"x");
        let cfg = SolverConfig::low_space(65, 1 << 12, "00");
        assert!(matches!(solve_ed_lowspace(&inst, &cfg), Err(SolverError::Config(_))));
    }
}
