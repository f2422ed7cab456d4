use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::{gen_instance, out_set_connected, out_set_oracle, Instance, InstanceKind, Vertex};
use crate::layered_hash::{sample_layered_in, HashParams, LevelFamily, OracleLevels};
use crate::randomness::{ceil_log2, parse_seed_hex, FieldChoice, RandomTape};

/// Events stop the automatic trial schedule once this many are seen.
pub const AUTO_EVENTS: u64 = 100;
/// Default trial count for mean-valued targets.
pub const AUTO_MEAN_TRIALS: u64 = 10_000;
const BATCH: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `Pr[u ∈ Out(x)]`.
    SingleHit,
    /// `Pr[u, v ∈ Out(x)]`.
    PairHit,
    /// `Pr[u ∈ Out({x_1..x_k})]`.
    MultiSingleHit,
    /// `Pr[u, v ∈ Out({x_1..x_k})]`.
    MultiPairHit,
    /// `Pr[u_1..u_c ∈ Out(x)]` with −1 edges rewired to vertex 1.
    CConnect,
    /// `E|Out({x_1..x_k})|`.
    OutSize,
    /// `E C(|Out(x)|, c)`.
    MomentC,
}

impl Target {
    pub const ALL: [Target; 7] = [
        Target::SingleHit,
        Target::PairHit,
        Target::MultiSingleHit,
        Target::MultiPairHit,
        Target::CConnect,
        Target::OutSize,
        Target::MomentC,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Target::SingleHit => "single_hit",
            Target::PairHit => "pair_hit",
            Target::MultiSingleHit => "multi_single_hit",
            Target::MultiPairHit => "multi_pair_hit",
            Target::CConnect => "c_connect",
            Target::OutSize => "out_size",
            Target::MomentC => "moment_c",
        }
    }

    pub fn is_mean(self) -> bool {
        matches!(self, Target::OutSize | Target::MomentC)
    }

    fn is_multi(self) -> bool {
        matches!(self, Target::MultiSingleHit | Target::MultiPairHit | Target::OutSize)
    }

    fn target_count(self, c: usize) -> usize {
        match self {
            Target::SingleHit | Target::MultiSingleHit => 1,
            Target::PairHit | Target::MultiPairHit => 2,
            Target::CConnect => c,
            Target::OutSize | Target::MomentC => 0,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Target::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown target {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashMode {
    /// Layered polynomial hash drawn from the tape.
    Prf,
    /// Truly random level tables.
    Oracle,
}

impl FromStr for HashMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "prf" | "pseudorandom" => Ok(HashMode::Prf),
            "oracle" => Ok(HashMode::Oracle),
            _ => Err(format!("unknown hash mode {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub target: Target,
    pub n: u32,
    pub m: u64,
    pub t: usize,
    pub kappa: usize,
    /// Starts for the multi-start targets.
    pub k: u64,
    pub c: usize,
    pub mode: HashMode,
    pub field: FieldChoice,
    /// `None` schedules trials automatically.
    pub trials: Option<u64>,
    pub max_trials: u64,
    /// `None` picks defaults (planted pair, or the last vertices).
    pub targets: Option<Vec<Vertex>>,
    pub instance: InstanceKind,
    pub seed: String,
}

impl EstimatorSpec {
    /// Defaults: `m = n²`, `t = ⌈½log₂ n⌉` (or `⌈½log₂(n/k)⌉` for multi-start
    /// targets, one less for `c_connect`), `κ = 20⌈log₂ n⌉` (`5c⌈log₂ n⌉` for
    /// `c_connect`).
    pub fn new(target: Target, n: u32) -> Self {
        let mut s = EstimatorSpec {
            target,
            n,
            m: u64::from(n) * u64::from(n),
            t: 1,
            kappa: 1,
            k: 1,
            c: 2,
            mode: HashMode::Prf,
            field: FieldChoice::Smallest,
            trials: None,
            max_trials: 100_000_000,
            targets: None,
            instance: match target {
                Target::PairHit | Target::MultiPairHit => InstanceKind::PlantedPair,
                _ => InstanceKind::Distinct,
            },
            seed: "00".into(),
        };
        s.retune();
        s
    }

    /// Recomputes `t` and `κ` from `n`, `k` and `c`.
    pub fn retune(&mut self) {
        let lg = ceil_log2(u64::from(self.n)) as usize;
        let p = if self.target.is_multi() {
            HashParams::tradeoff(self.n, self.m, self.k)
        } else {
            HashParams::low_space(self.n, self.m)
        };
        self.t = p.t;
        self.kappa = p.kappa;
        if self.target == Target::CConnect {
            self.t = lg.div_ceil(2).saturating_sub(1).max(1);
            self.kappa = (5 * self.c * lg).max(1);
        }
    }

    pub fn with_k(mut self, k: u64) -> Self {
        self.k = k;
        self.retune();
        self
    }

    pub fn with_c(mut self, c: usize) -> Self {
        self.c = c;
        self.retune();
        self
    }

    pub fn params(&self) -> HashParams {
        HashParams {
            n: self.n,
            m: self.m,
            t: self.t,
            kappa: self.kappa,
        }
    }

    fn starts(&self) -> u64 {
        if self.target.is_multi() {
            self.k
        } else {
            1
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// `p̂`, or the sample mean for mean-valued targets.
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
    /// Event count for probability targets.
    pub events: Option<u64>,
    /// `p̂·n^{c/2}` for `c_connect`, `mean/n^{c/2}` for `moment_c`.
    pub normalized: Option<f64>,
    pub targets: Vec<Vertex>,
    /// Wall time; left out of the JSON so reports are reproducible.
    #[serde(skip)]
    pub seconds: f64,
    pub spec: EstimatorSpec,
}

#[derive(Debug, thiserror::Error)]
pub enum EstimateError {
    #[error("invalid estimator spec: {0}")]
    Spec(String),
}

fn bad<T>(msg: impl Into<String>) -> Result<T, EstimateError> {
    Err(EstimateError::Spec(msg.into()))
}

struct Prepared {
    inst: Instance,
    targets: Vec<Vertex>,
    key: [u8; 32],
}

fn prepare(spec: &EstimatorSpec) -> Result<Prepared, EstimateError> {
    let seed = parse_seed_hex(&spec.seed).map_err(|e| EstimateError::Spec(e.to_string()))?;
    let key: [u8; 32] = Sha256::digest(&seed).into();
    if spec.n == 0 || spec.m < u64::from(spec.n) {
        return bad(format!("need m ≥ n ≥ 1, got n={} m={}", spec.n, spec.m));
    }
    if spec.t == 0 || spec.kappa == 0 {
        return bad("t and κ must be positive");
    }
    if spec.trials == Some(0) {
        return bad("trials must be at least 1");
    }
    if spec.starts() == 0 || spec.starts() > u64::from(spec.n) {
        return bad(format!("k = {} outside [1, n]", spec.k));
    }
    if spec.c == 0 {
        return bad("c must be positive");
    }
    let mut tape = RandomTape::from_key(key, u64::MAX);
    let g = gen_instance(spec.instance, spec.n, spec.m, &mut tape).map_err(|e| EstimateError::Spec(e.to_string()))?;
    if spec.target == Target::CConnect && !g.instance.is_injective() {
        return bad("c_connect needs an injective instance");
    }
    let want = spec.target.target_count(spec.c);
    let targets = match &spec.targets {
        Some(t) => t.clone(),
        None if want == 2 && !g.planted.is_empty() => vec![g.planted[0].0, g.planted[0].1],
        None => (0..want as u32).map(|i| spec.n - want as u32 + 1 + i).collect(),
    };
    if targets.len() != want {
        return bad(format!("{} needs {want} targets, got {}", spec.target, targets.len()));
    }
    if targets.iter().any(|&u| u == 0 || u > spec.n) {
        return bad("targets must lie in [1, n]");
    }
    if targets.iter().collect::<HashSet<_>>().len() != targets.len() {
        return bad("targets must be distinct");
    }
    Ok(Prepared {
        inst: g.instance,
        targets,
        key,
    })
}

fn binom_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// One trial's observation: 0/1 for events, the sampled quantity for means.
fn trial(spec: &EstimatorSpec, prep: &Prepared, id: u64) -> f64 {
    let mut tape = RandomTape::from_key(prep.key, id);
    let h: Box<dyn LevelFamily> = match spec.mode {
        HashMode::Prf => Box::new(sample_layered_in(&mut tape, spec.params(), spec.field).expect("validated params")),
        HashMode::Oracle => Box::new(OracleLevels::new(spec.n, spec.m, spec.t, tape.next_u64())),
    };
    let starts: Vec<Vertex> = (0..spec.starts()).map(|_| tape.gen_range(1..=spec.n)).collect();
    let out = if spec.target == Target::CConnect {
        out_set_connected(&prep.inst, &*h, &starts)
    } else {
        out_set_oracle(&prep.inst, &*h, &starts)
    };
    match spec.target {
        Target::OutSize => out.len() as f64,
        Target::MomentC => binom_f64(out.len(), spec.c),
        _ => f64::from(u8::from(prep.targets.iter().all(|u| out.contains(u)))),
    }
}

/// Runs i.i.d. trials; the result depends only on the spec.
pub fn estimate(spec: &EstimatorSpec) -> Result<EstimateReport, EstimateError> {
    let prep = prepare(spec)?;
    let clock = Instant::now();
    let budget = spec.trials.unwrap_or(if spec.target.is_mean() {
        AUTO_MEAN_TRIALS
    } else {
        spec.max_trials
    });
    let (mut done, mut sum, mut sq) = (0u64, 0.0f64, 0.0f64);
    while done < budget {
        let end = (done + BATCH).min(budget);
        let obs: Vec<f64> = (done..end).into_par_iter().map(|i| trial(spec, &prep, i)).collect();
        for x in obs {
            sum += x;
            sq += x * x;
        }
        done = end;
        if spec.trials.is_none() && !spec.target.is_mean() && sum as u64 >= AUTO_EVENTS {
            break;
        }
    }
    let nf = done as f64;
    let mean = sum / nf;
    let stderr = if spec.target.is_mean() {
        ((sq / nf - mean * mean).max(0.0) / nf).sqrt()
    } else {
        (mean * (1.0 - mean) / nf).sqrt()
    };
    let scale = f64::from(spec.n).powf(spec.c as f64 / 2.0);
    Ok(EstimateReport {
        estimate: mean,
        stderr,
        trials: done,
        events: (!spec.target.is_mean()).then_some(sum as u64),
        normalized: match spec.target {
            Target::CConnect => Some(mean * scale),
            Target::MomentC => Some(mean / scale),
            _ => None,
        },
        targets: prep.targets,
        seconds: clock.elapsed().as_secs_f64(),
        spec: spec.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    N,
    M,
    T,
    Kappa,
    K,
    C,
}

impl FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "n" => Ok(Axis::N),
            "m" => Ok(Axis::M),
            "t" => Ok(Axis::T),
            "kappa" => Ok(Axis::Kappa),
            "k" => Ok(Axis::K),
            "c" => Ok(Axis::C),
            _ => Err(format!("unknown sweep axis {s:?}")),
        }
    }
}

#[derive(Debug)]
pub struct SweepRow {
    pub value: u64,
    pub result: Result<EstimateReport, EstimateError>,
}

/// One estimate per axis value. Sweeping `n`, `k` or `c` re-derives `t` and
/// `κ`; sweeping `n` also sets `m = n²`.
pub fn sweep(base: &EstimatorSpec, axis: Axis, values: &[u64]) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&v| {
            let mut s = base.clone();
            match axis {
                Axis::N => {
                    s.n = v as u32;
                    s.m = v * v;
                    s.retune();
                }
                Axis::M => s.m = v,
                Axis::T => s.t = v as usize,
                Axis::Kappa => s.kappa = v as usize,
                Axis::K => {
                    s.k = v;
                    s.retune();
                }
                Axis::C => {
                    s.c = v as usize;
                    s.retune();
                }
            }
            SweepRow {
                value: v,
                result: estimate(&s),
            }
        })
        .collect()
}

/// CSV with columns `value,estimate,stderr,trials,seconds,status`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value", "estimate", "stderr", "trials", "seconds", "status"])?;
    for r in rows {
        match &r.result {
            Ok(e) => w.write_record([
                r.value.to_string(),
                e.estimate.to_string(),
                e.stderr.to_string(),
                e.trials.to_string(),
                format!("{:.3}", e.seconds),
                "ok".into(),
            ])?,
            Err(err) => w.write_record([
                r.value.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                format!("failed: {err}"),
            ])?,
        }
    }
    w.flush()?;
    Ok(())
}

/// One-row CSV for a single estimate, with the spec echoed alongside.
pub fn write_estimate_csv<W: Write>(r: &EstimateReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "target",
        "n",
        "m",
        "t",
        "kappa",
        "k",
        "c",
        "mode",
        "estimate",
        "stderr",
        "trials",
        "events",
        "normalized",
        "seconds",
    ])?;
    let s = &r.spec;
    let opt = |x: Option<String>| x.unwrap_or_default();
    w.write_record([
        s.target.to_string(),
        s.n.to_string(),
        s.m.to_string(),
        s.t.to_string(),
        s.kappa.to_string(),
        s.k.to_string(),
        s.c.to_string(),
        format!("{:?}", s.mode).to_lowercase(),
        r.estimate.to_string(),
        r.stderr.to_string(),
        r.trials.to_string(),
        opt(r.events.map(|e| e.to_string())),
        opt(r.normalized.map(|v| v.to_string())),
        format!("{:.3}", r.seconds),
    ])?;
    w.flush()?;
    Ok(())
}

/// Least-squares slope of `ln y` against `x`.
pub fn log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x, y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    num / den
}
