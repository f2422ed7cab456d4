//! Exhaustive and Monte Carlo checks of the extended-walk laws and of the
//! coupling between standard and extended walks.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::graph::{Instance, Vertex};
use crate::layered_hash::{OracleLevels, TableLevels};
use crate::randomness::RandomTape;
use crate::walk::{
    detect_refutations, ext_multi_walk_until, ext_walk_until, std_walk, Index, RngEdges, ScriptedEdges, WalkTensor,
    WalkTreeGeom,
};

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn pow_ratio(base: &BigRational, e: usize) -> BigRational {
    num_traits::pow(base.clone(), e)
}

/// The extended-walk law: `2^{1−|P(S)|}/n^c` for single walks and
/// `2^{−|P̃(S)|}/n^c` for multi-walks.
pub fn law_formula(geom: &WalkTreeGeom, s: &[Index], n: u32) -> BigRational {
    let c = s.len();
    let exp2 = if geom.multi {
        -(geom.tilde_path_set(s).len() as i64)
    } else {
        1 - geom.path_set(s).len() as i64
    };
    let two = ratio(2, 1);
    let p2 = if exp2 >= 0 {
        pow_ratio(&two, exp2 as usize)
    } else {
        pow_ratio(&two, (-exp2) as usize).recip()
    };
    p2 / pow_ratio(&ratio(u64::from(n), 1), c)
}

fn hits(t: &WalkTensor, s: &[Index], targets: &[Vertex]) -> bool {
    s.iter().zip(targets).all(|(l, &u)| t.get(l) == Some(u))
}

fn horizon(s: &[Index]) -> Option<Index> {
    s.iter().max().copied()
}

/// Exact `Pr[T^S(ℓⁱ) = uᵢ ∀i]` for the single extended walk, averaging over
/// every level table (each cell 0 w.p. ½, each vertex w.p. 1/(2n)), every
/// start, and every internal draw sequence.
pub fn exact_ext_law(inst: &Instance, t: usize, tau: u32, s: &[Index], targets: &[Vertex]) -> BigRational {
    assert_eq!(s.len(), targets.len());
    let n = inst.n();
    let half = ratio(1, 2);
    let cell = ratio(1, 2 * u64::from(n));
    let start_w = ratio(1, u64::from(n));
    let mut total = BigRational::zero();
    for (table, zeros, nonzeros) in TableLevels::enumerate(n, inst.m(), t) {
        let tw = pow_ratio(&half, zeros as usize) * pow_ratio(&cell, nonzeros as usize);
        let mut inner = BigRational::zero();
        for x in 1..=n {
            let mut edges = ScriptedEdges::new();
            loop {
                let w = ext_walk_until(inst, &table, x, s, tau, &mut edges, horizon(s));
                if hits(&w, s, targets) {
                    inner += pow_ratio(&cell, edges.used());
                }
                if !edges.advance(n) {
                    break;
                }
            }
        }
        total += tw * inner * &start_w;
    }
    total
}

/// Every S of size 1 or 2 drawn from the τ-bounded `t`-dimensional indices.
pub fn small_index_sets(t: usize, tau: u32) -> Vec<Vec<Index>> {
    use itertools::Itertools;
    let all: Vec<Index> = (0..t)
        .map(|_| 0..=tau)
        .multi_cartesian_product()
        .map(|v| Index::new(&v))
        .collect();
    let mut out: Vec<Vec<Index>> = all.iter().map(|&l| vec![l]).collect();
    out.extend(all.iter().tuple_combinations().map(|(&a, &b)| vec![a, b]));
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CouplingStats {
    /// (table, start, S) combinations examined.
    pub cases: u64,
    /// Cases whose standard transcript has no refutation below max S.
    pub refutation_free: u64,
    /// Extended runs compared (one per internal draw sequence).
    pub runs: u64,
    pub violations: u64,
}

impl CouplingStats {
    fn add(mut self, o: CouplingStats) -> Self {
        self.cases += o.cases;
        self.refutation_free += o.refutation_free;
        self.runs += o.runs;
        self.violations += o.violations;
        self
    }
}

/// Over all tables and starts: whenever the standard walk has no refutation
/// below `max S`, every extended run agrees with it on all indices up to
/// `max S`.
pub fn coupling_exhaustive(inst: &Instance, t: usize, tau: u32, family: &[Vec<Index>]) -> CouplingStats {
    let n = inst.n();
    let tables: Vec<TableLevels> = TableLevels::enumerate(n, inst.m(), t).map(|(tb, _, _)| tb).collect();
    tables
        .par_iter()
        .map(|table| {
            let mut st = CouplingStats::default();
            for x in 1..=n {
                let std = std_walk(inst, table, x);
                for s in family {
                    st.cases += 1;
                    let max_s = horizon(s).expect("nonempty S");
                    if !detect_refutations(inst, &std, &max_s, tau).is_empty() {
                        continue;
                    }
                    st.refutation_free += 1;
                    let want: Vec<(Index, Vertex)> = std
                        .entries()
                        .filter(|(l, _)| **l <= max_s)
                        .map(|(l, v)| (*l, v))
                        .collect();
                    let mut edges = ScriptedEdges::new();
                    loop {
                        let ext = ext_walk_until(inst, table, x, s, tau, &mut edges, Some(max_s));
                        st.runs += 1;
                        let got: Vec<(Index, Vertex)> = ext
                            .entries()
                            .filter(|(l, _)| **l <= max_s)
                            .map(|(l, v)| (*l, v))
                            .collect();
                        if got != want {
                            st.violations += 1;
                        }
                        if !edges.advance(n) {
                            break;
                        }
                    }
                }
            }
            st
        })
        .reduce(CouplingStats::default, CouplingStats::add)
}

/// One Monte Carlo case: an index set and the vertices it should hold.
#[derive(Clone, Debug, Serialize)]
pub struct LawCase {
    pub multi: bool,
    pub s: Vec<Index>,
    pub targets: Vec<Vertex>,
}

impl LawCase {
    pub fn single(s: &[&[u32]], targets: &[Vertex]) -> Self {
        LawCase {
            multi: false,
            s: s.iter().map(|c| Index::new(c)).collect(),
            targets: targets.to_vec(),
        }
    }

    pub fn multi(s: &[&[u32]], targets: &[Vertex]) -> Self {
        LawCase {
            multi: true,
            ..Self::single(s, targets)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LawResult {
    pub case: LawCase,
    pub expected: f64,
    pub hits: u64,
    pub trials: u64,
    /// `(p̂ − p)/σ` with `σ = sqrt(p(1−p)/trials)`.
    pub z: f64,
}

impl LawResult {
    pub fn within(&self, sigmas: f64) -> bool {
        self.z.abs() <= sigmas
    }
}

/// Oracle-mode Monte Carlo of the extended-walk laws. Every trial draws fresh
/// truly random level tables, one start for single cases and `k` starts for
/// multi cases, and runs each case's walk with its own internal stream.
pub fn law_monte_carlo(
    inst: &Instance,
    t: usize,
    tau: u32,
    k: usize,
    cases: &[LawCase],
    trials: u64,
    seed: &[u8],
) -> Vec<LawResult> {
    const CHUNK: u64 = 8192;
    let n = inst.n();
    let chunks = trials.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut tape = RandomTape::with_stream(seed, c);
            let mut hits = vec![0u64; cases.len()];
            for _ in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let h = OracleLevels::new(n, inst.m(), t, tape.next_u64());
                let x = tape.gen_range(1..=n);
                let starts: Vec<Vertex> = (0..k).map(|_| tape.gen_range(1..=n)).collect();
                for (i, case) in cases.iter().enumerate() {
                    let mut edges = RngEdges(ChaCha8Rng::seed_from_u64(tape.next_u64()));
                    let w = if case.multi {
                        ext_multi_walk_until(inst, &h, &starts, &case.s, tau, &mut edges, horizon(&case.s))
                    } else {
                        ext_walk_until(inst, &h, x, &case.s, tau, &mut edges, horizon(&case.s))
                    };
                    hits[i] += u64::from(hits_all(&w, case));
                }
            }
            hits
        })
        .reduce(
            || vec![0u64; cases.len()],
            |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect(),
        );
    cases
        .iter()
        .zip(counts)
        .map(|(case, h)| {
            let geom = if case.multi {
                WalkTreeGeom::multi(t)
            } else {
                WalkTreeGeom::single(t)
            };
            let p = to_f64(&law_formula(&geom, &case.s, n));
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            LawResult {
                case: case.clone(),
                expected: p,
                hits: h,
                trials,
                z: (h as f64 / trials as f64 - p) / sigma,
            }
        })
        .collect()
}

fn hits_all(w: &WalkTensor, case: &LawCase) -> bool {
    hits(w, &case.s, &case.targets)
}

pub fn to_f64(q: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    q.to_f64().unwrap_or(f64::NAN)
}

/// The fixed battery: ten single-walk and ten two-start multi-walk cases at
/// `t = 2`, `τ = 2`, `n = 4`, all over reachable indices.
pub fn law_battery() -> Vec<LawCase> {
    vec![
        LawCase::single(&[&[0, 0]], &[2]),
        LawCase::single(&[&[1, 0]], &[3]),
        LawCase::single(&[&[0, 1]], &[1]),
        LawCase::single(&[&[2, 0]], &[4]),
        LawCase::single(&[&[1, 1]], &[2]),
        LawCase::single(&[&[0, 2]], &[3]),
        LawCase::single(&[&[2, 1]], &[1]),
        LawCase::single(&[&[1, 0], &[0, 1]], &[2, 3]),
        LawCase::single(&[&[2, 1], &[0, 2]], &[4, 4]),
        LawCase::single(&[&[0, 0], &[0, 2]], &[1, 1]),
        LawCase::multi(&[&[0, 0, 1]], &[2]),
        LawCase::multi(&[&[0, 0, 2]], &[3]),
        LawCase::multi(&[&[1, 0, 1]], &[4]),
        LawCase::multi(&[&[0, 1, 2]], &[1]),
        LawCase::multi(&[&[2, 1, 1]], &[2]),
        LawCase::multi(&[&[1, 1, 2]], &[3]),
        LawCase::multi(&[&[0, 0, 1], &[0, 0, 2]], &[1, 2]),
        LawCase::multi(&[&[1, 0, 1], &[1, 0, 2]], &[2, 2]),
        LawCase::multi(&[&[0, 2, 1], &[2, 0, 2]], &[3, 4]),
        LawCase::multi(&[&[1, 1, 2], &[2, 1, 2]], &[1, 4]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_examples() {
        let g = WalkTreeGeom::single(1);
        assert_eq!(law_formula(&g, &[Index::new(&[0])], 2), ratio(1, 2));
        assert_eq!(law_formula(&g, &[Index::new(&[1])], 2), ratio(1, 4));
        let m = WalkTreeGeom::multi(1);
        assert_eq!(law_formula(&m, &[Index::new(&[0, 2])], 4), ratio(1, 4));
        assert_eq!(law_formula(&m, &[Index::new(&[1, 1])], 4), ratio(1, 8));
    }

    #[test]
    fn exhaustive_law_tiny() {
        for values in [vec![1, 2], vec![1, 1], vec![2, 1]] {
            let inst = Instance::new(2, values).unwrap();
            let g = WalkTreeGeom::single(1);
            for s in small_index_sets(1, 1) {
                for u in [1, 2] {
                    let targets = vec![u; s.len()];
                    assert_eq!(
                        exact_ext_law(&inst, 1, 1, &s, &targets),
                        law_formula(&g, &s, 2),
                        "{s:?} {targets:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn exhaustive_law_two_levels() {
        let g = WalkTreeGeom::single(2);
        for values in [vec![1, 2], vec![1, 1]] {
            let inst = Instance::new(2, values).unwrap();
            for s in small_index_sets(2, 2) {
                let targets = vec![2; s.len()];
                let got = exact_ext_law(&inst, 2, 2, &s, &targets);
                if s.iter().all(|l| g.ext_reachable(l, 2)) {
                    assert_eq!(got, law_formula(&g, &s, 2), "{s:?}");
                } else {
                    assert!(got.is_zero(), "{s:?}");
                }
            }
        }
    }

    #[test]
    fn coupling_tiny() {
        let inst = Instance::new(2, vec![1, 1]).unwrap();
        let st = coupling_exhaustive(&inst, 1, 2, &small_index_sets(1, 2));
        assert_eq!(st.violations, 0);
        assert!(st.refutation_free > 0 && st.refutation_free < st.cases);
    }

    #[test]
    fn monte_carlo_small_battery() {
        let inst = Instance::new(4, vec![1, 2, 1, 3]).unwrap();
        let cases = &law_battery()[..];
        let res = law_monte_carlo(&inst, 2, 2, 2, cases, 20_000, b"mc-test");
        let ok = res.iter().filter(|r| r.within(4.0)).count();
        assert!(ok >= 19, "{res:?}");
    }
}
