//! Low-space collision finding over the walks of a start set.
//!
//! Every start gets a Brent summary (tail length μ, cycle length λ or a dead
//! end). Starts are grouped into components keyed by the minimum vertex on
//! their cycle, or by their dead-end vertex. Inside a component, depth (steps
//! to the cycle or dead end) is a function of the vertex, so the walks are
//! replayed together from the deepest start down: at each depth the active
//! walkers are stepped once and compared, and walkers landing on the same
//! vertex are merged. The predecessors seen at a merge vertex are all its
//! predecessors inside `Out(A)`, which makes the report complete while the
//! working state stays at O(|A|) words.

use serde::{Deserialize, Serialize};

use crate::graph::{step, Instance, Vertex};
use crate::layered_hash::LevelFamily;

/// Oracle calls and peak working memory of one run, in words of ⌈log₂ n⌉ bits.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceMeter {
    pub oracle_calls: u64,
    pub peak_words: u64,
    #[serde(skip)]
    live_words: u64,
}

impl ResourceMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn hold(&mut self, words: u64) {
        self.live_words += words;
        self.peak_words = self.peak_words.max(self.live_words);
    }

    pub fn release(&mut self, words: u64) {
        debug_assert!(words <= self.live_words);
        self.live_words -= words;
    }

    pub fn live_words(&self) -> u64 {
        self.live_words
    }

    /// Folds another run in: calls add up, peaks take the maximum.
    pub fn absorb(&mut self, other: &ResourceMeter) {
        self.oracle_calls += other.oracle_calls;
        self.peak_words = self.peak_words.max(other.peak_words);
    }
}

/// Caller-supplied limits for one `collide` run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    /// Per-walk cap on Brent steps.
    pub step_cap: u64,
    /// Abort once this many oracle calls have been made.
    pub max_oracle_calls: Option<u64>,
    /// Flag (but do not abort) runs whose peak exceeds this many words.
    pub word_budget: Option<u64>,
}

impl Caps {
    pub fn for_n(n: u32) -> Self {
        Caps {
            step_cap: 64 * u64::from(n),
            max_oracle_calls: None,
            word_budget: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkSummary {
    pub start: Vertex,
    /// μ: steps from `start` to the cycle entry, or to the dead end.
    pub tail_length: u64,
    /// λ, or `None` if the walk died (or was truncated) first.
    pub cycle_length: Option<u64>,
    /// Cycle entry, or the dead-end vertex when `cycle_length` is `None`.
    pub entry_vertex: Option<Vertex>,
    pub steps_taken: u64,
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionGroup {
    pub value: u64,
    /// Sorted, at least two positions.
    pub positions: Vec<Vertex>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionReport {
    /// Sorted by value.
    pub groups: Vec<CollisionGroup>,
    /// False for the partial report of a truncated run.
    pub valid: bool,
    /// Peak words exceeded the caller's word budget.
    pub over_budget: bool,
}

impl CollisionReport {
    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CollideError {
    #[error("run truncated after {} oracle calls", meter.oracle_calls)]
    Truncated {
        partial: CollisionReport,
        meter: ResourceMeter,
    },
    #[error("start set must be nonempty and inside [1, n]")]
    BadStarts,
}

struct Exhausted;

/// Step oracle with call accounting.
struct Stepper<'a, H: ?Sized> {
    inst: &'a Instance,
    h: &'a H,
    meter: &'a mut ResourceMeter,
    max_calls: u64,
}

impl<H: LevelFamily + ?Sized> Stepper<'_, H> {
    #[inline]
    fn step(&mut self, x: Vertex) -> Result<Option<Vertex>, Exhausted> {
        if self.meter.oracle_calls >= self.max_calls {
            return Err(Exhausted);
        }
        self.meter.oracle_calls += 1;
        Ok(step(self.inst, self.h, x))
    }

    fn step_live(&mut self, x: Vertex) -> Result<Vertex, Exhausted> {
        Ok(self.step(x)?.expect("vertex on a closed walk has an out-edge"))
    }

    fn advance(&mut self, mut x: Vertex, k: u64) -> Result<Vertex, Exhausted> {
        for _ in 0..k {
            x = self.step_live(x)?;
        }
        Ok(x)
    }

    fn brent(&mut self, start: Vertex, step_cap: u64) -> Result<WalkSummary, Exhausted> {
        let before = self.meter.oracle_calls;
        let used = |s: &Self| s.meter.oracle_calls - before;
        let truncated = |len: u64, steps: u64| WalkSummary {
            start,
            tail_length: len,
            cycle_length: None,
            entry_vertex: None,
            steps_taken: steps,
            truncated: true,
        };

        let (mut power, mut lam) = (1u64, 0u64);
        let (mut tortoise, mut hare, mut hare_idx) = (start, start, 0u64);
        loop {
            if used(self) >= step_cap {
                return Ok(truncated(hare_idx, used(self)));
            }
            match self.step(hare)? {
                None => {
                    return Ok(WalkSummary {
                        start,
                        tail_length: hare_idx,
                        cycle_length: None,
                        entry_vertex: Some(hare),
                        steps_taken: used(self),
                        truncated: false,
                    })
                }
                Some(y) => {
                    hare = y;
                    hare_idx += 1;
                }
            }
            lam += 1;
            if tortoise == hare {
                break;
            }
            if lam == power {
                tortoise = hare;
                power *= 2;
                lam = 0;
            }
        }

        let mut ahead = start;
        for _ in 0..lam {
            if used(self) >= step_cap {
                return Ok(truncated(hare_idx, used(self)));
            }
            ahead = self.step_live(ahead)?;
        }
        let (mut behind, mut mu) = (start, 0u64);
        while behind != ahead {
            if used(self) + 2 > step_cap {
                return Ok(truncated(hare_idx, used(self)));
            }
            behind = self.step_live(behind)?;
            ahead = self.step_live(ahead)?;
            mu += 1;
        }
        Ok(WalkSummary {
            start,
            tail_length: mu,
            cycle_length: Some(lam),
            entry_vertex: Some(behind),
            steps_taken: used(self),
            truncated: false,
        })
    }

    /// Minimum vertex on the cycle through `entry`.
    fn cycle_min(&mut self, entry: Vertex, lam: u64) -> Result<Vertex, Exhausted> {
        let (mut x, mut best) = (entry, entry);
        for _ in 1..lam {
            x = self.step_live(x)?;
            best = best.min(x);
        }
        Ok(best)
    }
}

/// Brent's cycle detection from `start`, then a second pass for μ.
///
/// Makes at most `2·max(μ, λ) + 2λ + 2μ` oracle calls.
pub fn brent_summary<H: LevelFamily + ?Sized>(inst: &Instance, h: &H, start: Vertex, step_cap: u64) -> WalkSummary {
    let mut meter = ResourceMeter::new();
    let mut s = Stepper {
        inst,
        h,
        meter: &mut meter,
        max_calls: u64::MAX,
    };
    s.brent(start, step_cap.max(1)).ok().expect("unbounded oracle budget")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Component {
    /// Keyed by the minimum vertex on the cycle.
    Cycle(Vertex),
    /// Keyed by the dead-end vertex.
    Dead(Vertex),
}

#[derive(Clone, Copy, Debug)]
struct StartRecord {
    component: Component,
    depth: u64,
    start: Vertex,
    lam: u64,
}

const RECORD_WORDS: u64 = 4;
const BRENT_WORDS: u64 = 6;
const WALKER_WORDS: u64 = 2;
const NO_PRED: Vertex = 0;

/// Reports every group `(y, {u ∈ Out(A) : a_u = y})` of size at least two.
pub fn collide<H: LevelFamily + ?Sized>(
    inst: &Instance,
    h: &H,
    starts: &[Vertex],
    caps: &Caps,
    meter: &mut ResourceMeter,
) -> Result<CollisionReport, CollideError> {
    if starts.is_empty() || starts.iter().any(|&s| s == 0 || s > inst.n()) {
        return Err(CollideError::BadStarts);
    }
    let mut report = CollisionReport {
        valid: true,
        ..CollisionReport::default()
    };
    let outcome = {
        let mut stepper = Stepper {
            inst,
            h,
            meter,
            max_calls: caps.max_oracle_calls.unwrap_or(u64::MAX),
        };
        run(&mut stepper, starts, caps.step_cap, &mut report)
    };
    match outcome {
        Ok(true) => {
            report.over_budget = caps.word_budget.is_some_and(|b| meter.peak_words > b);
            Ok(report)
        }
        Ok(false) | Err(Exhausted) => {
            report.valid = false;
            report.over_budget = caps.word_budget.is_some_and(|b| meter.peak_words > b);
            Err(CollideError::Truncated {
                partial: report,
                meter: meter.clone(),
            })
        }
    }
}

/// Returns `Ok(false)` when a walk hit its step cap.
fn run<H: LevelFamily + ?Sized>(
    s: &mut Stepper<'_, H>,
    starts: &[Vertex],
    step_cap: u64,
    report: &mut CollisionReport,
) -> Result<bool, Exhausted> {
    let mut records: Vec<StartRecord> = Vec::with_capacity(starts.len());
    s.meter.hold(BRENT_WORDS);
    for &start in starts {
        let sum = s.brent(start, step_cap)?;
        if sum.truncated {
            return Ok(false);
        }
        let entry = sum.entry_vertex.expect("untruncated walk ends somewhere");
        let component = match sum.cycle_length {
            Some(lam) => Component::Cycle(s.cycle_min(entry, lam)?),
            None => Component::Dead(entry),
        };
        records.push(StartRecord {
            component,
            depth: sum.tail_length,
            start,
            lam: sum.cycle_length.unwrap_or(0),
        });
        s.meter.hold(RECORD_WORDS);
    }
    s.meter.release(BRENT_WORDS);
    records.sort_unstable_by(|a, b| (a.component, b.depth, a.start).cmp(&(b.component, a.depth, b.start)));
    records.dedup_by_key(|r| r.start);

    let mut groups: Vec<CollisionGroup> = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let j = i + records[i..]
            .iter()
            .take_while(|r| r.component == records[i].component)
            .count();
        sweep_component(s, &records[i..j], &mut groups)?;
        i = j;
    }

    // Dead ends with equal values: a_u = y with h(y) = −1 makes u a dead end.
    let mut dead: Vec<(u64, Vertex)> = records
        .iter()
        .filter_map(|r| match r.component {
            Component::Dead(z) => Some((s.inst.value(z), z)),
            Component::Cycle(_) => None,
        })
        .collect();
    dead.sort_unstable();
    dead.dedup();
    s.meter.hold(2 * dead.len() as u64);
    for run in dead.chunk_by(|a, b| a.0 == b.0) {
        if run.len() >= 2 {
            let group = CollisionGroup {
                value: run[0].0,
                positions: run.iter().map(|&(_, z)| z).collect(),
            };
            s.meter.hold(1 + group.positions.len() as u64);
            groups.push(group);
        }
    }
    s.meter.release(2 * dead.len() as u64);

    groups.sort_unstable_by_key(|g| g.value);
    report.groups = groups;
    Ok(true)
}

/// Replays all walks of one component from the deepest start down, recording
/// the predecessor sets of merge vertices, and turns them into groups.
fn sweep_component<H: LevelFamily + ?Sized>(
    s: &mut Stepper<'_, H>,
    recs: &[StartRecord],
    groups: &mut Vec<CollisionGroup>,
) -> Result<(), Exhausted> {
    // recs are sorted by depth, deepest first
    let mut next_rec = 0;
    let mut depth = recs[0].depth;
    let mut active: Vec<(Vertex, Vertex)> = Vec::new();
    let mut held = 0u64;
    let mut merges: Vec<(Vertex, Vec<Vertex>)> = Vec::new();
    let mut merge_words = 0u64;
    let mut entry_merges = 0usize;

    let admit = |active: &mut Vec<(Vertex, Vertex)>, next_rec: &mut usize, depth: u64| {
        while *next_rec < recs.len() && recs[*next_rec].depth == depth {
            active.push((recs[*next_rec].start, NO_PRED));
            *next_rec += 1;
        }
    };
    admit(&mut active, &mut next_rec, depth);
    collapse(&mut active, &mut Vec::new());

    while depth > 0 {
        for w in active.iter_mut() {
            let y = s.step_live(w.0)?;
            *w = (y, w.0);
        }
        depth -= 1;
        admit(&mut active, &mut next_rec, depth);
        let grow = active.len() as u64 * WALKER_WORDS;
        if grow > held {
            s.meter.hold(grow - held);
            held = grow;
        }
        let mut landed = Vec::new();
        collapse(&mut active, &mut landed);
        let at_cycle = depth == 0 && matches!(recs[0].component, Component::Cycle(_));
        for (w, preds) in landed {
            let needed = if at_cycle { 1 } else { 2 };
            if preds.len() >= needed {
                let words = 1 + preds.len() as u64 + u64::from(at_cycle);
                s.meter.hold(words);
                merge_words += words;
                merges.push((w, preds));
                entry_merges += usize::from(at_cycle);
            }
        }
    }

    if let Component::Cycle(rep) = recs[0].component {
        // Entries with tail predecessors also have their cycle predecessor.
        // Only depth-0 merges can follow a cycle vertex, so searching all
        // merge vertices is safe.
        if entry_merges > 0 {
            merges.sort_unstable_by_key(|m| m.0);
            let mut c = rep;
            for _ in 0..recs[0].lam {
                let next = s.step_live(c)?;
                if let Ok(k) = merges.binary_search_by_key(&next, |m| m.0) {
                    merges[k].1.push(c);
                }
                c = next;
            }
        }
    }
    s.meter.release(held);

    for (_, mut preds) in merges {
        preds.sort_unstable_by_key(|&u| (s.inst.value(u), u));
        for run in preds.chunk_by(|&u, &v| s.inst.value(u) == s.inst.value(v)) {
            if run.len() >= 2 {
                s.meter.hold(1 + run.len() as u64);
                groups.push(CollisionGroup {
                    value: s.inst.value(run[0]),
                    positions: {
                        let mut p = run.to_vec();
                        p.sort_unstable();
                        p
                    },
                });
            }
        }
    }
    s.meter.release(merge_words);
    Ok(())
}

/// Sorts walkers by position, merges walkers sharing a vertex and reports, for
/// each occupied vertex, the distinct predecessors that led there.
fn collapse(active: &mut Vec<(Vertex, Vertex)>, landed: &mut Vec<(Vertex, Vec<Vertex>)>) {
    active.sort_unstable();
    let mut out: Vec<(Vertex, Vertex)> = Vec::with_capacity(active.len());
    for run in active.chunk_by(|a, b| a.0 == b.0) {
        let preds: Vec<Vertex> = run.iter().map(|w| w.1).filter(|&p| p != NO_PRED).collect();
        out.push((run[0].0, NO_PRED));
        if !preds.is_empty() {
            landed.push((run[0].0, preds));
        }
    }
    *active = out;
}

/// First merge of two walks: the pair of distinct predecessors `(u, v)` of the
/// first vertex of walk 2 that lies on walk 1, with `u` on walk 1.
///
/// Returns `None` if the walks never meet or meet exactly at a start (a start
/// on a cycle counts as reached through its cycle predecessor for walk 1).
pub fn merge_point<H: LevelFamily + ?Sized>(
    inst: &Instance,
    h: &H,
    s1: &WalkSummary,
    s2: &WalkSummary,
) -> Option<(Vertex, Vertex)> {
    let mut meter = ResourceMeter::new();
    let mut s = Stepper {
        inst,
        h,
        meter: &mut meter,
        max_calls: u64::MAX,
    };
    merge_inner(&mut s, s1, s2).ok().flatten()
}

fn merge_inner<H: LevelFamily + ?Sized>(
    s: &mut Stepper<'_, H>,
    s1: &WalkSummary,
    s2: &WalkSummary,
) -> Result<Option<(Vertex, Vertex)>, Exhausted> {
    if s1.truncated || s2.truncated {
        return Ok(None);
    }
    let (e1, e2) = (s1.entry_vertex.unwrap(), s2.entry_vertex.unwrap());
    let lam = match (s1.cycle_length, s2.cycle_length) {
        (None, None) if e1 == e2 => None,
        (Some(l1), Some(l2)) if l1 == l2 => {
            if e1 != e2 {
                let mut x = e1;
                let mut same = false;
                for _ in 1..l1 {
                    x = s.step_live(x)?;
                    if x == e2 {
                        same = true;
                        break;
                    }
                }
                if !same || s2.tail_length == 0 {
                    return Ok(None);
                }
                let u = s.advance(e2, l1 - 1)?;
                let v = s.advance(s2.start, s2.tail_length - 1)?;
                return Ok(Some((u, v)));
            }
            Some(l1)
        }
        _ => return Ok(None),
    };
    let (mu1, mu2) = (s1.tail_length, s2.tail_length);
    let d = mu1.min(mu2);
    let mut x = s.advance(s1.start, mu1 - d)?;
    let mut y = s.advance(s2.start, mu2 - d)?;
    if x == y {
        return Ok(match lam {
            Some(l) if mu1 == 0 && mu2 > 0 => {
                let u = s.advance(x, l - 1)?;
                let v = s.advance(s2.start, mu2 - 1)?;
                Some((u, v))
            }
            _ => None,
        });
    }
    loop {
        let nx = s.step_live(x)?;
        let ny = s.step_live(y)?;
        if nx == ny {
            return Ok(Some((x, y)));
        }
        x = nx;
        y = ny;
    }
}
