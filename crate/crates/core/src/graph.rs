//! Input arrays, the functional graph `x → h(a_x)`, and instance generators.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::layered_hash::LevelFamily;
use crate::randomness::RandomTape;

/// Vertices are 1-based positions into the array.
pub type Vertex = u32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    m: u64,
    values: Vec<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("infeasible generator parameters: {0}")]
    Params(String),
    #[error("malformed instance file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Instance {
    pub fn new(m: u64, values: Vec<u64>) -> Result<Self, InstanceError> {
        if values.is_empty() {
            return Err(InstanceError::Invalid("n must be at least 1".into()));
        }
        if values.len() > u32::MAX as usize - 1 {
            return Err(InstanceError::Invalid("n too large".into()));
        }
        if let Some(v) = values.iter().find(|&&v| v == 0 || v > m) {
            return Err(InstanceError::Invalid(format!("value {v} outside [1, {m}]")));
        }
        Ok(Instance { m, values })
    }

    pub fn n(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    /// `a_x` for a 1-based vertex.
    #[inline]
    pub fn value(&self, x: Vertex) -> u64 {
        self.values[(x - 1) as usize]
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.values.len());
        self.values.iter().all(|v| seen.insert(*v))
    }

    /// Concatenation `a ‖ b` over the larger universe.
    pub fn concat(&self, other: &Instance) -> Instance {
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Instance {
            m: self.m.max(other.m),
            values,
        }
    }

    /// Reads the text format (header `n m`, then one value per line) or, for a
    /// `.bin` extension, little-endian u64 words `n, m, a_1, …, a_n`.
    pub fn read(path: &Path) -> Result<Self, InstanceError> {
        if is_binary(path) {
            let bytes = fs::read(path)?;
            if bytes.len() % 8 != 0 || bytes.len() < 16 {
                return Err(InstanceError::Format("binary length not a multiple of 8".into()));
            }
            let words: Vec<u64> = bytes
                .chunks_exact(8)
                .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let (n, m) = (words[0], words[1]);
            if words.len() as u64 != n + 2 {
                return Err(InstanceError::Format(format!(
                    "header says n={n}, file has {}",
                    words.len() - 2
                )));
            }
            return Instance::new(m, words[2..].to_vec());
        }
        let reader = BufReader::new(fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| InstanceError::Format("empty file".into()))??;
        let mut it = header.split_whitespace();
        let parse = |s: Option<&str>, what: &str| -> Result<u64, InstanceError> {
            s.ok_or_else(|| InstanceError::Format(format!("missing {what}")))?
                .parse()
                .map_err(|e| InstanceError::Format(format!("{what}: {e}")))
        };
        let n = parse(it.next(), "n")?;
        let m = parse(it.next(), "m")?;
        let mut values = Vec::with_capacity(n as usize);
        for line in lines {
            let line = line?;
            let line = line.trim();
            if !line.is_empty() {
                values.push(parse(Some(line), "value")?);
            }
        }
        if values.len() as u64 != n {
            return Err(InstanceError::Format(format!(
                "header says n={n}, found {} values",
                values.len()
            )));
        }
        Instance::new(m, values)
    }

    pub fn write(&self, path: &Path) -> Result<(), InstanceError> {
        let mut out = io::BufWriter::new(fs::File::create(path)?);
        if is_binary(path) {
            out.write_all(&u64::from(self.n()).to_le_bytes())?;
            out.write_all(&self.m.to_le_bytes())?;
            for v in &self.values {
                out.write_all(&v.to_le_bytes())?;
            }
        } else {
            writeln!(out, "{} {}", self.n(), self.m)?;
            for v in &self.values {
                writeln!(out, "{v}")?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreqStats {
    pub f2: u64,
    pub finf: u64,
}

pub fn freq_stats(inst: &Instance) -> FreqStats {
    let mut counts: HashMap<u64, u64> = HashMap::new();
    for &v in inst.values() {
        *counts.entry(v).or_default() += 1;
    }
    FreqStats {
        f2: counts.values().map(|c| c * c).sum(),
        finf: counts.values().copied().max().unwrap_or(0),
    }
}

/// `f_{a,h}(x) = h(a_x)`, or `None` when `h(a_x) = −1`.
#[inline]
pub fn step<H: LevelFamily + ?Sized>(inst: &Instance, h: &H, x: Vertex) -> Option<Vertex> {
    h.eval(inst.value(x))
}

/// Exact `Out_{a,h}(A)` by stepping with a visited set; `next` chooses the edge rule.
pub fn out_set_with<F>(n: u32, starts: &[Vertex], mut next: F) -> HashSet<Vertex>
where
    F: FnMut(Vertex) -> Option<Vertex>,
{
    let mut seen = HashSet::new();
    for &s in starts {
        assert!(s >= 1 && s <= n, "start {s} outside [1, {n}]");
        let mut x = s;
        while seen.insert(x) {
            match next(x) {
                Some(y) => x = y,
                None => break,
            }
        }
    }
    seen
}

pub fn out_set_oracle<H: LevelFamily + ?Sized>(inst: &Instance, h: &H, starts: &[Vertex]) -> HashSet<Vertex> {
    out_set_with(inst.n(), starts, |x| step(inst, h, x))
}

/// `Out` in the rewired graph where −1 edges point to vertex 1.
pub fn out_set_connected<H: LevelFamily + ?Sized>(inst: &Instance, h: &H, starts: &[Vertex]) -> HashSet<Vertex> {
    out_set_with(inst.n(), starts, |x| Some(h.eval_connected(inst.value(x))))
}

/// Instance families used by the solvers and experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InstanceKind {
    Distinct,
    PlantedPair,
    PlantedKCollisions { k: u32 },
}

/// A generated instance with its planted collisions (as position pairs `p < q`).
#[derive(Clone, Debug)]
pub struct Generated {
    pub instance: Instance,
    pub planted: Vec<(Vertex, Vertex)>,
}

/// Draws `count` distinct values from `[1, m]` without replacement.
fn distinct_values(tape: &mut RandomTape, m: u64, count: usize) -> Result<Vec<u64>, InstanceError> {
    if count as u64 > m {
        return Err(InstanceError::Params(format!("{count} distinct values from [1, {m}]")));
    }
    if m <= u64::from(u32::MAX) {
        return Ok(index::sample(tape, m as usize, count)
            .into_iter()
            .map(|i| i as u64 + 1)
            .collect());
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = tape.gen_range(1..=m);
        if seen.insert(v) {
            out.push(v);
        }
    }
    Ok(out)
}

pub fn gen_instance(kind: InstanceKind, n: u32, m: u64, tape: &mut RandomTape) -> Result<Generated, InstanceError> {
    if n == 0 {
        return Err(InstanceError::Params("n must be at least 1".into()));
    }
    let k = match kind {
        InstanceKind::Distinct => 0,
        InstanceKind::PlantedPair => 1,
        InstanceKind::PlantedKCollisions { k } => k,
    };
    if 2 * u64::from(k) > u64::from(n) {
        return Err(InstanceError::Params(format!("{k} disjoint pairs need 2k ≤ n = {n}")));
    }
    let distinct = (n - k) as usize;
    let mut values = distinct_values(tape, m, distinct)?;
    // positions 0..k get partners at k..2k before shuffling
    let mut order: Vec<usize> = (0..n as usize).collect();
    order.shuffle(tape);
    let mut a = vec![0u64; n as usize];
    let mut planted = Vec::with_capacity(k as usize);
    for i in 0..k as usize {
        let (p, q) = (order[2 * i], order[2 * i + 1]);
        a[p] = values[i];
        a[q] = values[i];
        planted.push(((p.min(q) + 1) as Vertex, (p.max(q) + 1) as Vertex));
    }
    values.drain(..k as usize);
    for (slot, v) in order[2 * k as usize..].iter().zip(values) {
        a[*slot] = v;
    }
    planted.sort_unstable();
    Ok(Generated {
        instance: Instance::new(m, a)?,
        planted,
    })
}

/// Two duplicate-free arrays of length `n` sharing exactly `common` values.
pub fn gen_set_intersection_pair(
    n: u32,
    m: u64,
    common: u32,
    tape: &mut RandomTape,
) -> Result<(Instance, Instance), InstanceError> {
    if common > n || n == 0 {
        return Err(InstanceError::Params(format!("intersection {common} with n = {n}")));
    }
    let total = 2 * n as usize - common as usize;
    let values = distinct_values(tape, m, total)?;
    let mut a = values[..n as usize].to_vec();
    let mut b: Vec<u64> = values[..common as usize]
        .iter()
        .chain(&values[n as usize..])
        .copied()
        .collect();
    a.shuffle(tape);
    b.shuffle(tape);
    Ok((Instance::new(m, a)?, Instance::new(m, b)?))
}
