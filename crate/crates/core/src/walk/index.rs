use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Serialize, Serializer};

/// Largest supported index dimension (t levels plus the tree coordinate).
pub const MAX_DIM: usize = 16;

/// A vector of nonnegative coordinates `(ℓ₁, …, ℓ_d)`, ordered by the largest
/// differing coordinate. Coordinates are 1-based in the accessors.
#[derive(Clone, Copy)]
pub struct Index {
    dim: u8,
    c: [u32; MAX_DIM],
}

impl Index {
    pub fn zero(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "index dimension {dim} unsupported");
        Index {
            dim: dim as u8,
            c: [0; MAX_DIM],
        }
    }

    pub fn new(coords: &[u32]) -> Self {
        let mut ix = Index::zero(coords.len());
        ix.c[..coords.len()].copy_from_slice(coords);
        ix
    }

    /// Multi-index `(0, …, 0, tree)` of dimension `t + 1`.
    pub fn tree_root(t: usize, tree: u32) -> Self {
        let mut ix = Index::zero(t + 1);
        ix.c[t] = tree;
        ix
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[u32] {
        &self.c[..self.dim as usize]
    }

    /// `ℓ_i`, 1-based.
    #[inline]
    pub fn get(&self, i: usize) -> u32 {
        self.c[i - 1]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: u32) {
        self.c[i - 1] = v;
    }

    #[inline]
    pub fn inc(&mut self, i: usize) {
        self.c[i - 1] += 1;
    }

    pub fn is_zero(&self) -> bool {
        self.coords().iter().all(|&x| x == 0)
    }

    /// Position of the first nonzero coordinate, or `dim + 1`.
    pub fn first_nonzero(&self) -> usize {
        self.coords()
            .iter()
            .position(|&x| x != 0)
            .map_or(self.dim() + 1, |p| p + 1)
    }
}

impl PartialEq for Index {
    fn eq(&self, other: &Self) -> bool {
        self.coords() == other.coords()
    }
}

impl Eq for Index {}

impl Hash for Index {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.coords().hash(state);
    }
}

impl Ord for Index {
    /// Panics on a dimension mismatch; see [`index_cmp`].
    fn cmp(&self, other: &Self) -> Ordering {
        assert_eq!(self.dim, other.dim, "comparing indices of different dimension");
        for i in (0..self.dim()).rev() {
            match self.c[i].cmp(&other.c[i]) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Index {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl Serialize for Index {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("index dimensions differ: {0} vs {1}")]
pub struct DimensionMismatch(pub usize, pub usize);

pub fn index_cmp(a: &Index, b: &Index) -> Result<Ordering, DimensionMismatch> {
    if a.dim != b.dim {
        return Err(DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(a.cmp(b))
}

/// Walk-tree geometry for `t` levels; multi-indices carry one more coordinate
/// (the tree id) that width ignores.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WalkTreeGeom {
    pub t: usize,
    pub multi: bool,
}

impl WalkTreeGeom {
    pub fn single(t: usize) -> Self {
        WalkTreeGeom { t, multi: false }
    }

    pub fn multi(t: usize) -> Self {
        WalkTreeGeom { t, multi: true }
    }

    pub fn dim(&self) -> usize {
        self.t + usize::from(self.multi)
    }

    /// Largest of the first `t` coordinates.
    pub fn wd(&self, ix: &Index) -> u32 {
        ix.coords()[..self.t].iter().copied().max().unwrap_or(0)
    }

    pub fn tau_bounded(&self, ix: &Index, tau: u32) -> bool {
        self.wd(ix) <= tau
    }

    /// `max{q : ℓ_i = 0 for all i < q}`; the zero index has level `t + 1`.
    pub fn level(&self, ix: &Index) -> usize {
        ix.first_nonzero().min(self.dim() + 1)
    }

    /// Decrements the first nonzero coordinate; `None` at the root.
    pub fn parent(&self, ix: &Index) -> Option<Index> {
        let q = ix.first_nonzero();
        if q > ix.dim() {
            return None;
        }
        let mut p = *ix;
        p.set(q, p.get(q) - 1);
        Some(p)
    }

    /// Does `parent(r) = l` hold by the definition (some `i` with equal
    /// suffixes, zero prefixes and `r_i = ℓ_i + 1`)?
    pub fn is_parent(&self, l: &Index, r: &Index) -> bool {
        (1..=self.dim()).any(|i| {
            (i + 1..=self.dim()).all(|j| l.get(j) == r.get(j))
                && (1..i).all(|j| l.get(j) == 0 && r.get(j) == 0)
                && r.get(i) == l.get(i) + 1
        })
    }

    /// Can the τ-capped extended walk write `ix`? A level-`i` loop exits
    /// right after its τ-th move, so no lower-level move follows it.
    pub fn ext_reachable(&self, ix: &Index, tau: u32) -> bool {
        self.tau_bounded(ix, tau) && (2..=self.t).all(|i| ix.get(i) < tau || (1..i).all(|j| ix.get(j) == 0))
    }

    /// Root-to-`ix` path, inclusive.
    pub fn path(&self, ix: &Index) -> Vec<Index> {
        let mut out = vec![*ix];
        let mut cur = *ix;
        while let Some(p) = self.parent(&cur) {
            out.push(p);
            cur = p;
        }
        out.reverse();
        out
    }

    /// `P(S)`: union of root-to-ℓ paths over `ℓ ∈ S`.
    pub fn path_set<'a, I: IntoIterator<Item = &'a Index>>(&self, s: I) -> BTreeSet<Index> {
        s.into_iter().flat_map(|ix| self.path(ix)).collect()
    }

    /// `P̃(S)`: the part of `P(S)` with level below `t + 1`.
    pub fn tilde_path_set<'a, I: IntoIterator<Item = &'a Index>>(&self, s: I) -> BTreeSet<Index> {
        self.path_set(s)
            .into_iter()
            .filter(|ix| self.level(ix) < self.t + 1)
            .collect()
    }
}

/// `P(S)` for plain t-dimensional indices.
pub fn path_set(geom: &WalkTreeGeom, s: &[Index]) -> BTreeSet<Index> {
    geom.path_set(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_indices(t: usize, tau: u32) -> Vec<Index> {
        let mut out = vec![Index::zero(t)];
        for i in 1..=t {
            out = out
                .into_iter()
                .flat_map(|ix| {
                    (0..=tau).map(move |v| {
                        let mut j = ix;
                        j.set(i, v);
                        j
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn ordering_uses_largest_differing_coordinate() {
        assert!(Index::new(&[0, 1]) > Index::new(&[1, 0]));
        assert_eq!(Index::new(&[2, 3]).cmp(&Index::new(&[2, 3])), Ordering::Equal);
        assert!(index_cmp(&Index::new(&[1]), &Index::new(&[1, 0])).is_err());
    }

    #[test]
    fn ordering_is_total_and_transitive_exhaustive() {
        for t in 1..=3 {
            let ix = all_indices(t, 3);
            for a in &ix {
                for b in &ix {
                    assert_eq!(a.cmp(b), b.cmp(a).reverse());
                    for c in &ix {
                        if a < b && b < c {
                            assert!(a < c);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn width_and_level() {
        let g = WalkTreeGeom::single(3);
        assert_eq!(g.wd(&Index::new(&[0, 4, 1])), 4);
        assert_eq!(g.level(&Index::new(&[0, 0, 1])), 3);
        assert_eq!(g.level(&Index::new(&[2, 0, 1])), 1);
        assert_eq!(g.level(&Index::zero(3)), 4);

        let m = WalkTreeGeom::multi(2);
        assert_eq!(m.wd(&Index::new(&[1, 0, 7])), 1);
        assert_eq!(m.level(&Index::tree_root(2, 2)), 3);
        assert_eq!(m.parent(&Index::tree_root(2, 2)), Some(Index::tree_root(2, 1)));
    }

    #[test]
    fn path_sets() {
        let g = WalkTreeGeom::single(1);
        assert_eq!(g.path_set(&[Index::zero(1)]).len(), 1);
        let p = g.path_set(&[Index::new(&[3])]);
        assert_eq!(
            p.into_iter().collect::<Vec<_>>(),
            (0..=3).map(|v| Index::new(&[v])).collect::<Vec<_>>()
        );

        let g = WalkTreeGeom::single(2);
        let p = g.path(&Index::new(&[1, 2]));
        assert_eq!(
            p,
            vec![
                Index::new(&[0, 0]),
                Index::new(&[0, 1]),
                Index::new(&[0, 2]),
                Index::new(&[1, 2])
            ]
        );

        let m = WalkTreeGeom::multi(1);
        let s = [Index::new(&[1, 2])];
        assert_eq!(
            m.tilde_path_set(&s).into_iter().collect::<Vec<_>>(),
            vec![Index::new(&[1, 2])]
        );
    }

    #[test]
    fn parent_matches_definition_exhaustive() {
        for t in 1..=3 {
            let g = WalkTreeGeom::single(t);
            let ix = all_indices(t, 3);
            for r in &ix {
                for l in &ix {
                    assert_eq!(g.parent(r) == Some(*l), g.is_parent(l, r), "{l:?} {r:?}");
                }
                if let Some(p) = g.parent(r) {
                    assert!(p < *r);
                }
                assert_eq!(g.path(r).len() as u32, 1 + r.coords().iter().sum::<u32>());
            }
        }
    }

    proptest! {
        #[test]
        fn pair_path_bound(a in proptest::collection::vec(0u32..5, 3), b in proptest::collection::vec(0u32..5, 3)) {
            let g = WalkTreeGeom::single(3);
            let (x, y) = (Index::new(&a), Index::new(&b));
            let joint = g.path_set(&[x, y]).len();
            prop_assert!(joint < g.path(&x).len() + g.path(&y).len());
        }
    }
}
