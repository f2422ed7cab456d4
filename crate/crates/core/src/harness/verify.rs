use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use serde::Serialize;

use super::exact::{
    coupling_exhaustive, exact_ext_law, law_battery, law_formula, law_monte_carlo, small_index_sets, to_f64,
    CouplingStats, LawResult,
};
use crate::collide::{collide, Caps, CollisionGroup, ResourceMeter};
use crate::graph::{gen_instance, out_set_oracle, Instance, InstanceKind, Vertex};
use crate::layered_hash::{sample_layered, HashParams, LevelFamily};
use crate::randomness::{ceil_log2, RandomTape};
use crate::walk::{enum_corollaries, enum_f, geom_identity_check, CorollarySums, WalkTreeGeom};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Reduced sizes for smoke runs.
    Quick,
    /// The acceptance scale.
    Full,
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "quick" => Ok(Preset::Quick),
            "full" => Ok(Preset::Full),
            _ => Err(format!("unknown preset {s:?} (quick, full)")),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub measured: String,
    pub expected: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub lemma: String,
    pub preset: Preset,
    pub pass: bool,
    pub lines: Vec<CheckLine>,
    pub seconds: f64,
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} [{:?}]: {} ({:.2}s)",
            self.lemma,
            self.preset,
            verdict(self.pass),
            self.seconds
        )?;
        for l in &self.lines {
            writeln!(
                f,
                "  {} {}: measured {} expected {}",
                verdict(l.pass),
                l.name,
                l.measured,
                l.expected
            )?;
        }
        Ok(())
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown lemma id {0:?}; known ids: {ids}", ids = LEMMA_IDS.join(", "))]
pub struct UnknownLemma(pub String);

pub const LEMMA_IDS: &[&str] = &[
    "walk-sum-f",
    "walk-sum-corollaries",
    "geom-identity",
    "law-exhaustive",
    "law-single-mc",
    "law-multi-mc",
    "coupling",
    "collide-brute",
    "collide-space",
    "seed-length",
];

fn line(name: impl Into<String>, measured: impl fmt::Display, expected: impl fmt::Display, pass: bool) -> CheckLine {
    CheckLine {
        name: name.into(),
        measured: measured.to_string(),
        expected: expected.to_string(),
        pass,
    }
}

fn pow2(e: usize) -> BigRational {
    num_traits::pow(BigRational::from_integer(BigInt::from(2)), e)
}

pub fn verify_lemma(id: &str, preset: Preset) -> Result<VerifyReport, UnknownLemma> {
    let clock = Instant::now();
    let full = preset == Preset::Full;
    let lines = match id {
        "walk-sum-f" => walk_sum_f(if full { 3 } else { 2 }),
        "walk-sum-corollaries" => walk_sum_corollaries(if full { 3 } else { 2 }),
        "geom-identity" => geom_identity(5, 80),
        "law-exhaustive" => law_exhaustive(),
        "law-single-mc" => law_lines(&law_battery_results(if full { 1_000_000 } else { 50_000 }), false),
        "law-multi-mc" => law_lines(&law_battery_results(if full { 1_000_000 } else { 50_000 }), true),
        "coupling" => coupling_lines(full),
        "collide-brute" => collide_brute(if full { 1000 } else { 200 }),
        "collide-space" => collide_space(if full { 40 } else { 8 }),
        "seed-length" => seed_length(),
        _ => return Err(UnknownLemma(id.to_string())),
    };
    Ok(VerifyReport {
        lemma: id.to_string(),
        preset,
        pass: lines.iter().all(|l| l.pass),
        lines,
        seconds: clock.elapsed().as_secs_f64(),
    })
}

fn walk_sum_f(max: usize) -> Vec<CheckLine> {
    let mut out = Vec::new();
    for c in 1..=max {
        for t in 1..=max {
            let bound = pow2(c * t);
            let mut prev: Option<BigRational> = None;
            for tau in 0..=max as u32 {
                let f = enum_f(c, t, tau).expect("enumerable");
                let mono = prev.as_ref().is_none_or(|p| *p <= f);
                let mut pass = f <= bound && mono;
                let mut expected = format!("≤ {bound}");
                if c == 1 {
                    let base = BigRational::from_integer(BigInt::from(2)) - pow2(tau as usize).recip();
                    pass &= f == num_traits::pow(base.clone(), t);
                    expected = format!("= (2−2^-{tau})^{t} ≤ {bound}");
                }
                out.push(line(
                    format!("f(c={c},t={t}) τ={tau}"),
                    format!("{f} ≈ {:.6}", to_f64(&f)),
                    expected,
                    pass,
                ));
                prev = Some(f);
            }
        }
    }
    out
}

fn walk_sum_corollaries(max: usize) -> Vec<CheckLine> {
    let mut out = Vec::new();
    for c in 1..=max {
        for t in 1..=max {
            for tau in 0..=max as u32 {
                let s = enum_corollaries(c, t, tau).expect("enumerable");
                let (ab, nb) = (CorollarySums::all_bound(c, t), CorollarySums::nondistinct_bound(c, t));
                out.push(line(
                    format!("corollaries c={c} t={t} τ={tau}"),
                    format!("{:.6} / {:.6}", to_f64(&s.all_tuples), to_f64(&s.nondistinct_tuples)),
                    format!("≤ {ab} / ≤ {nb}"),
                    s.within_bounds(c, t),
                ));
            }
        }
    }
    out
}

fn geom_identity(max_r: u32, k: u32) -> Vec<CheckLine> {
    let two = BigRational::from_integer(BigInt::from(2));
    let tol = pow2(40).recip();
    (0..=max_r)
        .map(|r| {
            let s = geom_identity_check(r, k);
            let gap = &two - &s;
            line(
                format!("Σ 2^-k C(k,{r}), K={k}"),
                format!("2 − {:.3e}", to_f64(&gap)),
                "within 2^-40 of 2, from below",
                gap > BigRational::zero() && gap < tol,
            )
        })
        .collect()
}

/// Every array in `[2]^2`, every S of size 1 or 2, every target tuple.
pub fn law_exhaustive() -> Vec<CheckLine> {
    use itertools::Itertools;
    let geom = WalkTreeGeom::single(1);
    let mut out = Vec::new();
    for values in [[1, 1], [1, 2], [2, 1], [2, 2]] {
        let inst = Instance::new(2, values.to_vec()).expect("valid");
        for s in small_index_sets(1, 1) {
            let want = law_formula(&geom, &s, 2);
            for u in (0..s.len()).map(|_| 1..=2u32).multi_cartesian_product() {
                let got = exact_ext_law(&inst, 1, 1, &s, &u);
                out.push(line(format!("a={values:?} S={s:?} u={u:?}"), &got, &want, got == want));
            }
        }
    }
    out
}

pub fn law_battery_results(trials: u64) -> Vec<LawResult> {
    let inst = Instance::new(4, vec![1, 2, 1, 3]).expect("valid");
    law_monte_carlo(&inst, 2, 2, 2, &law_battery(), trials, b"law-battery")
}

/// One line per case (3σ), plus the ≥ 95% aggregate line.
pub fn law_lines(results: &[LawResult], multi: bool) -> Vec<CheckLine> {
    let picked: Vec<&LawResult> = results.iter().filter(|r| r.case.multi == multi).collect();
    let mut out: Vec<CheckLine> = picked
        .iter()
        .map(|r| CheckLine {
            name: format!("S={:?} u={:?}", r.case.s, r.case.targets),
            measured: format!("{:.6} (z={:+.2})", r.hits as f64 / r.trials as f64, r.z),
            expected: format!("{:.6}", r.expected),
            // individual misses are tolerated by the aggregate line
            pass: true,
        })
        .collect();
    let ok = picked.iter().filter(|r| r.within(3.0)).count();
    out.push(line(
        "cases within 3σ",
        format!("{ok}/{}", picked.len()),
        "≥ 95%",
        ok * 100 >= 95 * picked.len(),
    ));
    out
}

/// The coupling configurations: `(array, m, t)` with `n ≤ 4`.
pub fn coupling_configs(full: bool) -> Vec<(Vec<u64>, u64, usize)> {
    let mut v = vec![
        (vec![1, 2], 2, 1),
        (vec![1, 1], 2, 1),
        (vec![1, 2], 2, 2),
        (vec![1, 1], 2, 2),
        (vec![1, 2, 3], 3, 1),
        (vec![1, 2, 1], 3, 1),
        (vec![1, 2, 1], 3, 2),
        (vec![1, 2, 3, 4], 4, 1),
        (vec![1, 2, 3, 1], 3, 1),
    ];
    if full {
        v.push((vec![1, 2, 3], 3, 2));
        v.push((vec![1, 2, 3, 1], 3, 2));
        v.push((vec![2, 1, 2, 1], 2, 2));
        v.push((vec![1, 2, 3, 4], 4, 2));
    }
    v
}

pub fn coupling_lines(full: bool) -> Vec<CheckLine> {
    const TAU: u32 = 2;
    coupling_configs(full)
        .into_iter()
        .map(|(values, m, t)| {
            let inst = Instance::new(m, values.clone()).expect("valid");
            let st: CouplingStats = coupling_exhaustive(&inst, t, TAU, &small_index_sets(t, TAU));
            line(
                format!("a={values:?} t={t} τ={TAU}"),
                format!(
                    "{} violations over {} refutation-free of {} cases ({} runs)",
                    st.violations, st.refutation_free, st.cases, st.runs
                ),
                "0 violations",
                st.violations == 0 && st.refutation_free > 0,
            )
        })
        .collect()
}

/// Reference collision groups: group `Out(A)` by value.
pub fn brute_groups<H: LevelFamily + ?Sized>(inst: &Instance, h: &H, starts: &[Vertex]) -> Vec<CollisionGroup> {
    let mut by_value: BTreeMap<u64, Vec<Vertex>> = BTreeMap::new();
    for u in out_set_oracle(inst, h, starts) {
        by_value.entry(inst.value(u)).or_default().push(u);
    }
    by_value
        .into_iter()
        .filter(|(_, v)| v.len() >= 2)
        .map(|(value, mut positions)| {
            positions.sort_unstable();
            CollisionGroup { value, positions }
        })
        .collect()
}

fn collide_brute(cases: u32) -> Vec<CheckLine> {
    let mut tape = RandomTape::new(b"collide-brute");
    let mut mismatches = 0;
    let mut with_groups = 0;
    for _ in 0..cases {
        let n = tape.gen_range(1..=256u32);
        let m = tape.gen_range(u64::from(n)..=2 * u64::from(n));
        let values: Vec<u64> = (0..n).map(|_| tape.gen_range(1..=m.div_ceil(2).max(1))).collect();
        let inst = Instance::new(m, values).expect("valid");
        let params = HashParams {
            n,
            m,
            t: tape.gen_range(1..=4),
            kappa: tape.gen_range(2..=12),
        };
        let h = sample_layered(&mut tape, params).expect("valid params");
        let k = tape.gen_range(1..=8);
        let starts: Vec<Vertex> = (0..k).map(|_| tape.gen_range(1..=n)).collect();
        let want = brute_groups(&inst, &h, &starts);
        let got = collide(&inst, &h, &starts, &Caps::for_n(n), &mut ResourceMeter::new());
        with_groups += u32::from(!want.is_empty());
        if !matches!(&got, Ok(r) if r.valid && r.groups == want) {
            mismatches += 1;
        }
    }
    vec![line(
        format!("{cases} random triples, n ≤ 256 ({with_groups} with collisions)"),
        format!("{mismatches} mismatches"),
        "0 mismatches",
        mismatches == 0,
    )]
}

/// Upper bound asserted on `peak_words / |A|`.
pub const SPACE_RATIO_BOUND: f64 = 16.0;

pub fn collide_space(trials: u32) -> Vec<CheckLine> {
    let mut tape = RandomTape::new(b"collide-space");
    let mut out = Vec::new();
    let mut worst: f64 = 0.0;
    for lg in 8..=12u32 {
        let n = 1u32 << lg;
        let m = u64::from(n) * u64::from(n);
        let inst = gen_instance(InstanceKind::PlantedKCollisions { k: n / 16 }, n, m, &mut tape)
            .expect("valid")
            .instance;
        for a in [1u64, 16, 64] {
            let params = HashParams::tradeoff(n, m, a);
            let mut peak: u64 = 0;
            for _ in 0..trials {
                let h = sample_layered(&mut tape, params).expect("valid params");
                let starts: Vec<Vertex> = (0..a).map(|_| tape.gen_range(1..=n)).collect();
                let mut meter = ResourceMeter::new();
                collide(&inst, &h, &starts, &Caps::for_n(n), &mut meter).expect("uncapped run");
                peak = peak.max(meter.peak_words);
            }
            let ratio = peak as f64 / a as f64;
            worst = worst.max(ratio);
            out.push(line(
                format!("n=2^{lg} |A|={a}"),
                format!("max peak {peak} words, {ratio:.2} per start"),
                format!("≤ {SPACE_RATIO_BOUND}"),
                ratio <= SPACE_RATIO_BOUND,
            ));
        }
    }
    out.push(line(
        "grid maximum",
        format!("{worst:.2}"),
        format!("≤ {SPACE_RATIO_BOUND}"),
        worst <= SPACE_RATIO_BOUND,
    ));
    out
}

/// Constant asserted in `seed bits ≤ C·⌈log₂ n⌉³`.
pub const SEED_CONSTANT: f64 = 25.0;

pub fn seed_length() -> Vec<CheckLine> {
    let mut tape = RandomTape::new(b"seed-length");
    (10..=16u32)
        .map(|lg| {
            let n = 1u32 << lg;
            let m = u64::from(n) * u64::from(n);
            let h = sample_layered(&mut tape, HashParams::low_space(n, m)).expect("valid params");
            let bits = h.seed_bits();
            let lg3 = f64::from(ceil_log2(u64::from(n))).powi(3);
            let c = bits as f64 / lg3;
            line(
                format!("n=2^{lg}"),
                format!("{bits} bits = {c:.2}·log³n"),
                format!("≤ {SEED_CONSTANT}·log³n"),
                c <= SEED_CONSTANT,
            )
        })
        .collect()
}
