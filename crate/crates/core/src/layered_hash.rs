//! The layered hash `h : [m] → [n] ∪ {−1}` built from `t` biased level hashes
//! combined by the first-nonzero rule, plus two idealized stand-ins (lazy
//! truly-random tables and explicit tables) behind a common trait.

use std::cell::RefCell;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::randomness::{ceil_log2, sample_level, FieldChoice, KWiseSeed, LevelHash, RandomTape};

/// A stack of `t` level functions `h_q : [m] → [n] ∪ {0}`.
///
/// `eval` returns `None` for the undefined edge (all levels 0).
pub trait LevelFamily {
    fn n(&self) -> u32;
    fn m(&self) -> u64;
    fn levels(&self) -> usize;
    /// `h_q(j)` for `1 ≤ q ≤ levels()`: 0 or a vertex in `[1, n]`.
    fn level_value(&self, q: usize, j: u64) -> u32;

    /// Firing level and its value, or `None` when every level is 0.
    fn level_trace(&self, j: u64) -> Option<(usize, u32)> {
        (1..=self.levels()).find_map(|q| match self.level_value(q, j) {
            0 => None,
            v => Some((q, v)),
        })
    }

    fn eval(&self, j: u64) -> Option<u32> {
        self.level_trace(j).map(|(_, v)| v)
    }

    /// Variant used for c-connectivity: −1 is rewired to vertex 1.
    fn eval_connected(&self, j: u64) -> u32 {
        self.eval(j).unwrap_or(1)
    }
}

impl<H: LevelFamily + ?Sized> LevelFamily for &H {
    fn n(&self) -> u32 {
        (**self).n()
    }
    fn m(&self) -> u64 {
        (**self).m()
    }
    fn levels(&self) -> usize {
        (**self).levels()
    }
    fn level_value(&self, q: usize, j: u64) -> u32 {
        (**self).level_value(q, j)
    }
    fn level_trace(&self, j: u64) -> Option<(usize, u32)> {
        (**self).level_trace(j)
    }
    fn eval(&self, j: u64) -> Option<u32> {
        (**self).eval(j)
    }
}

/// Parameters of the layered family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashParams {
    pub n: u32,
    pub m: u64,
    pub t: usize,
    pub kappa: usize,
}

impl HashParams {
    /// `t = ⌈½⌈log₂ n⌉⌉`, `κ = 20⌈log₂ n⌉`.
    pub fn low_space(n: u32, m: u64) -> Self {
        let lg = ceil_log2(u64::from(n)) as usize;
        HashParams {
            n,
            m,
            t: lg.div_ceil(2).max(1),
            kappa: (20 * lg).max(1),
        }
    }

    /// `t = ⌈½⌈log₂(n/k)⌉⌉` for `k` simultaneous starts, same κ.
    pub fn tradeoff(n: u32, m: u64, k: u64) -> Self {
        let lg = ceil_log2(u64::from(n).div_ceil(k.max(1))) as usize;
        HashParams {
            t: lg.div_ceil(2).max(1),
            ..Self::low_space(n, m)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredHash {
    params: HashParams,
    levels: Vec<LevelHash>,
}

#[derive(Debug, thiserror::Error)]
pub enum HashError {
    #[error("invalid hash parameters: {0}")]
    Params(String),
    #[error("malformed hash document: {0}")]
    Document(String),
}

impl LayeredHash {
    pub fn from_levels(params: HashParams, levels: Vec<LevelHash>) -> Result<Self, HashError> {
        if levels.len() != params.t {
            return Err(HashError::Params(format!(
                "expected {} levels, got {}",
                params.t,
                levels.len()
            )));
        }
        for l in &levels {
            if l.n() != params.n || l.m() != params.m || l.seed().degree() != params.kappa {
                return Err(HashError::Params("level parameters disagree".into()));
            }
        }
        Ok(LayeredHash { params, levels })
    }

    pub fn params(&self) -> HashParams {
        self.params
    }

    pub fn level(&self, q: usize) -> &LevelHash {
        &self.levels[q - 1]
    }

    /// Total seed length in bits.
    pub fn seed_bits(&self) -> u64 {
        self.levels.iter().map(|l| l.seed().bit_len()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&HashDocument::from(self)).expect("hash document serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, HashError> {
        let doc: HashDocument = serde_json::from_str(s).map_err(|e| HashError::Document(e.to_string()))?;
        doc.try_into()
    }
}

/// Samples `t` independent levels in order from the tape.
pub fn sample_layered(tape: &mut RandomTape, params: HashParams) -> Result<LayeredHash, HashError> {
    sample_layered_in(tape, params, FieldChoice::Smallest)
}

pub fn sample_layered_in(
    tape: &mut RandomTape,
    params: HashParams,
    field: FieldChoice,
) -> Result<LayeredHash, HashError> {
    let HashParams { n, m, t, kappa } = params;
    if t < 1 || kappa < 1 || n < 1 || m < u64::from(n) {
        return Err(HashError::Params(format!(
            "need t ≥ 1, κ ≥ 1, m ≥ n ≥ 1 (got n={n} m={m} t={t} κ={kappa})"
        )));
    }
    let levels = (0..t).map(|_| sample_level(tape, kappa, n, m, field)).collect();
    Ok(LayeredHash { params, levels })
}

impl LevelFamily for LayeredHash {
    fn n(&self) -> u32 {
        self.params.n
    }
    fn m(&self) -> u64 {
        self.params.m
    }
    fn levels(&self) -> usize {
        self.params.t
    }
    #[inline]
    fn level_value(&self, q: usize, j: u64) -> u32 {
        self.levels[q - 1].eval(j)
    }
    fn level_trace(&self, j: u64) -> Option<(usize, u32)> {
        for (i, l) in self.levels.iter().enumerate() {
            let v = l.eval(j);
            if v != 0 {
                return Some((i + 1, v));
            }
        }
        None
    }
}

#[derive(Serialize, Deserialize)]
struct HashDocument {
    n: u32,
    m: u64,
    t: usize,
    kappa: usize,
    levels: Vec<LevelDocument>,
}

#[derive(Serialize, Deserialize)]
struct LevelDocument {
    prime: String,
    coefficients: Vec<String>,
}

impl From<&LayeredHash> for HashDocument {
    fn from(h: &LayeredHash) -> Self {
        HashDocument {
            n: h.params.n,
            m: h.params.m,
            t: h.params.t,
            kappa: h.params.kappa,
            levels: h
                .levels
                .iter()
                .map(|l| LevelDocument {
                    prime: l.seed().prime().to_string(),
                    coefficients: l.seed().coefficients().iter().map(u64::to_string).collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<HashDocument> for LayeredHash {
    type Error = HashError;

    fn try_from(doc: HashDocument) -> Result<Self, HashError> {
        let parse = |s: &str| s.parse::<u64>().map_err(|e| HashError::Document(format!("{s:?}: {e}")));
        let params = HashParams {
            n: doc.n,
            m: doc.m,
            t: doc.t,
            kappa: doc.kappa,
        };
        let mut levels = Vec::with_capacity(doc.levels.len());
        for l in &doc.levels {
            let p = parse(&l.prime)?;
            if !primal_check::miller_rabin(p) || p < doc.m.max(2 * u64::from(doc.n)) {
                return Err(HashError::Document(format!("bad level prime {p}")));
            }
            let coeffs = l.coefficients.iter().map(|c| parse(c)).collect::<Result<Vec<_>, _>>()?;
            if coeffs.is_empty() || coeffs.iter().any(|&c| c >= p) {
                return Err(HashError::Document("coefficient out of field".into()));
            }
            levels.push(LevelHash::new(KWiseSeed::new(p, coeffs), doc.n, doc.m));
        }
        LayeredHash::from_levels(params, levels)
    }
}

/// Idealized levels: each `h_q(j)` is drawn on first use (0 w.p. ½, else
/// uniform in `[n]`) and memoized. Single-threaded by construction.
pub struct OracleLevels {
    n: u32,
    m: u64,
    t: usize,
    table: RefCell<OracleTable>,
    rng: RefCell<ChaCha8Rng>,
}

enum OracleTable {
    Dense(Vec<u32>),
    Sparse(HashMap<(usize, u64), u32>),
}

const UNSET: u32 = u32::MAX;

impl OracleLevels {
    pub fn new(n: u32, m: u64, t: usize, seed: u64) -> Self {
        Self::with_rng(n, m, t, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn with_rng(n: u32, m: u64, t: usize, rng: ChaCha8Rng) -> Self {
        assert!(n >= 1 && t >= 1 && m >= 1);
        let cells = (t as u64).saturating_mul(m);
        let table = if cells <= 1 << 22 {
            OracleTable::Dense(vec![UNSET; cells as usize])
        } else {
            OracleTable::Sparse(HashMap::new())
        };
        OracleLevels {
            n,
            m,
            t,
            table: RefCell::new(table),
            rng: RefCell::new(rng),
        }
    }

    fn draw(&self) -> u32 {
        let r = self.rng.borrow_mut().gen_range(0..2 * u64::from(self.n));
        if r < u64::from(self.n) {
            r as u32 + 1
        } else {
            0
        }
    }
}

impl LevelFamily for OracleLevels {
    fn n(&self) -> u32 {
        self.n
    }
    fn m(&self) -> u64 {
        self.m
    }
    fn levels(&self) -> usize {
        self.t
    }
    fn level_value(&self, q: usize, j: u64) -> u32 {
        debug_assert!(q >= 1 && q <= self.t && j >= 1 && j <= self.m);
        let mut table = self.table.borrow_mut();
        match &mut *table {
            OracleTable::Dense(cells) => {
                let i = (q - 1) * self.m as usize + (j - 1) as usize;
                if cells[i] == UNSET {
                    cells[i] = self.draw();
                }
                cells[i]
            }
            OracleTable::Sparse(map) => *map.entry((q, j)).or_insert_with(|| self.draw()),
        }
    }
}

/// Fully specified level tables, `tables[q-1][j-1] = h_q(j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableLevels {
    n: u32,
    tables: Vec<Vec<u32>>,
}

impl TableLevels {
    pub fn new(n: u32, tables: Vec<Vec<u32>>) -> Self {
        assert!(!tables.is_empty());
        let m = tables[0].len();
        assert!(m >= 1 && tables.iter().all(|t| t.len() == m));
        assert!(tables.iter().flatten().all(|&v| v <= n));
        TableLevels { n, tables }
    }

    /// Every table in `({0} ∪ [n])^{t·m}`, with its probability under the
    /// idealized law (0 w.p. ½, each vertex w.p. 1/(2n)) as `(zeros, nonzeros)`.
    pub fn enumerate(n: u32, m: u64, t: usize) -> impl Iterator<Item = (TableLevels, u32, u32)> {
        let cells = t * m as usize;
        let base = u64::from(n) + 1;
        let total = base.pow(cells as u32);
        (0..total).map(move |mut code| {
            let mut flat = Vec::with_capacity(cells);
            for _ in 0..cells {
                flat.push((code % base) as u32);
                code /= base;
            }
            let zeros = flat.iter().filter(|&&v| v == 0).count() as u32;
            let tables = flat.chunks(m as usize).map(<[u32]>::to_vec).collect();
            (TableLevels::new(n, tables), zeros, cells as u32 - zeros)
        })
    }
}

impl LevelFamily for TableLevels {
    fn n(&self) -> u32 {
        self.n
    }
    fn m(&self) -> u64 {
        self.tables[0].len() as u64
    }
    fn levels(&self) -> usize {
        self.tables.len()
    }
    fn level_value(&self, q: usize, j: u64) -> u32 {
        self.tables[q - 1][(j - 1) as usize]
    }
}
