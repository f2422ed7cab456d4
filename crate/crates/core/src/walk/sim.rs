use std::collections::HashSet;

use rand::{Rng, RngCore};

use super::index::{Index, WalkTreeGeom};
use super::tensor::WalkTensor;
use crate::graph::{Instance, Vertex};
use crate::layered_hash::LevelFamily;

/// Source of the `(α, β)` draws made by extended walks.
pub trait EdgeSource {
    /// A uniform pair from `{0,1} × [n]`.
    fn draw_edge(&mut self, n: u32) -> (bool, Vertex);
}

/// Draws edges from any RNG.
pub struct RngEdges<R>(pub R);

impl<R: RngCore> EdgeSource for RngEdges<R> {
    fn draw_edge(&mut self, n: u32) -> (bool, Vertex) {
        let r = self.0.gen_range(0..2 * n);
        (r >= n, r % n + 1)
    }
}

/// Replays a fixed script of draws (digit `d` means `α = d ≥ n`,
/// `β = d mod n + 1`), extending it with zeros on demand. Used to enumerate
/// every internal-randomness outcome depth-first.
#[derive(Clone, Debug, Default)]
pub struct ScriptedEdges {
    script: Vec<u32>,
    pos: usize,
}

impl ScriptedEdges {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of draws consumed by the last run; each run outcome has
    /// probability `(2n)^{-used}`.
    pub fn used(&self) -> usize {
        self.pos
    }

    /// Advances to the next unexplored script. Returns false when exhausted.
    pub fn advance(&mut self, n: u32) -> bool {
        self.script.truncate(self.pos);
        self.pos = 0;
        while let Some(d) = self.script.pop() {
            if d + 1 < 2 * n {
                self.script.push(d + 1);
                return true;
            }
        }
        false
    }
}

impl EdgeSource for ScriptedEdges {
    fn draw_edge(&mut self, n: u32) -> (bool, Vertex) {
        if self.pos == self.script.len() {
            self.script.push(0);
        }
        let d = self.script[self.pos];
        self.pos += 1;
        (d >= n, d % n + 1)
    }
}

struct StdRun<'a, H: ?Sized> {
    inst: &'a Instance,
    h: &'a H,
    d: HashSet<u64>,
    tensor: WalkTensor,
}

impl<H: LevelFamily + ?Sized> StdRun<'_, H> {
    fn walk(&mut self, i: usize, mut x: Vertex, mut l: Index) -> Vertex {
        if i == 0 {
            return x;
        }
        loop {
            x = self.walk(i - 1, x, l);
            let a = self.inst.value(x);
            if self.d.contains(&a) {
                self.tensor.halted = true;
                return x;
            }
            l.inc(i);
            match self.h.level_value(i, a) {
                0 => break,
                y => {
                    self.d.insert(a);
                    self.tensor.write_move(l, y, a);
                    x = y;
                }
            }
        }
        x
    }
}

fn check_start(inst: &Instance, x: Vertex) {
    assert!(x >= 1 && x <= inst.n(), "start {x} outside [1, {}]", inst.n());
}

/// The standard walk from `x`.
pub fn std_walk<H: LevelFamily + ?Sized>(inst: &Instance, h: &H, x: Vertex) -> WalkTensor {
    check_start(inst, x);
    let t = h.levels();
    let mut run = StdRun {
        inst,
        h,
        d: HashSet::new(),
        tensor: WalkTensor::new(WalkTreeGeom::single(t)),
    };
    let l = Index::zero(t);
    run.tensor.write_root(l, x);
    run.walk(t, x, l);
    run.tensor
}

/// The standard multi-walk: one walk tree per start, sharing `D`.
pub fn std_multi_walk<H: LevelFamily + ?Sized>(inst: &Instance, h: &H, starts: &[Vertex]) -> WalkTensor {
    assert!(!starts.is_empty(), "multi-walk needs at least one start");
    let t = h.levels();
    let mut run = StdRun {
        inst,
        h,
        d: HashSet::new(),
        tensor: WalkTensor::new(WalkTreeGeom::multi(t)),
    };
    let mut l = Index::zero(t + 1);
    for &x in starts {
        check_start(inst, x);
        l.inc(t + 1);
        run.tensor.write_root(l, x);
        run.walk(t, x, l);
    }
    run.tensor
}

struct ExtRun<'a, H: ?Sized, E> {
    inst: &'a Instance,
    h: &'a H,
    tau: u32,
    ps: HashSet<Index>,
    d: Vec<HashSet<u64>>,
    edges: &'a mut E,
    horizon: Option<Index>,
    tensor: WalkTensor,
}

impl<H: LevelFamily + ?Sized, E: EdgeSource> ExtRun<'_, H, E> {
    fn past_horizon(&mut self, l: &Index) -> bool {
        if self.horizon.is_some_and(|hz| *l > hz) {
            self.tensor.aborted = true;
        }
        self.tensor.aborted
    }

    fn walk(&mut self, i: usize, mut x: Vertex, mut l: Index) -> Vertex {
        if i == 0 {
            return x;
        }
        while l.get(i) < self.tau {
            x = self.walk(i - 1, x, l);
            if self.tensor.aborted {
                return x;
            }
            l.inc(i);
            if self.past_horizon(&l) {
                return x;
            }
            let a = self.inst.value(x);
            let on_path = self.ps.contains(&l);
            let (alpha, beta) = if on_path && self.d[i - 1].contains(&a) {
                self.edges.draw_edge(self.h.n())
            } else {
                match self.h.level_value(i, a) {
                    0 => (false, 0),
                    y => (true, y),
                }
            };
            if !alpha {
                break;
            }
            if on_path {
                self.d[i - 1].insert(a);
            }
            self.tensor.write_move(l, beta, a);
            x = beta;
        }
        x
    }
}

fn check_s(geom: &WalkTreeGeom, s: &[Index], tau: u32) {
    assert!(tau >= 1, "τ must be at least 1");
    for ix in s {
        assert_eq!(ix.dim(), geom.dim(), "index {ix:?} has the wrong dimension");
        assert!(geom.tau_bounded(ix, tau), "index {ix:?} is not {tau}-bounded");
    }
}

/// The `S`-extended walk from `x`.
pub fn ext_walk<H: LevelFamily + ?Sized, E: EdgeSource>(
    inst: &Instance,
    h: &H,
    x: Vertex,
    s: &[Index],
    tau: u32,
    edges: &mut E,
) -> WalkTensor {
    ext_walk_until(inst, h, x, s, tau, edges, None)
}

/// As [`ext_walk`], but stops (setting `aborted`) once the walk would write
/// an index beyond `horizon`. Writes occur in increasing index order, so the
/// transcript up to `horizon` is unaffected.
pub fn ext_walk_until<H: LevelFamily + ?Sized, E: EdgeSource>(
    inst: &Instance,
    h: &H,
    x: Vertex,
    s: &[Index],
    tau: u32,
    edges: &mut E,
    horizon: Option<Index>,
) -> WalkTensor {
    check_start(inst, x);
    let t = h.levels();
    let geom = WalkTreeGeom::single(t);
    check_s(&geom, s, tau);
    let mut run = ExtRun {
        inst,
        h,
        tau,
        ps: geom.path_set(s).into_iter().collect(),
        d: vec![HashSet::new(); t],
        edges,
        horizon,
        tensor: WalkTensor::new(geom),
    };
    let l = Index::zero(t);
    run.tensor.write_root(l, x);
    run.walk(t, x, l);
    run.tensor
}

/// The `S`-extended multi-walk; `S` holds `(t+1)`-dimensional multi-indices
/// with tree ids in `[1, k]`.
pub fn ext_multi_walk<H: LevelFamily + ?Sized, E: EdgeSource>(
    inst: &Instance,
    h: &H,
    starts: &[Vertex],
    s: &[Index],
    tau: u32,
    edges: &mut E,
) -> WalkTensor {
    ext_multi_walk_until(inst, h, starts, s, tau, edges, None)
}

pub fn ext_multi_walk_until<H: LevelFamily + ?Sized, E: EdgeSource>(
    inst: &Instance,
    h: &H,
    starts: &[Vertex],
    s: &[Index],
    tau: u32,
    edges: &mut E,
    horizon: Option<Index>,
) -> WalkTensor {
    assert!(!starts.is_empty(), "multi-walk needs at least one start");
    let t = h.levels();
    let geom = WalkTreeGeom::multi(t);
    check_s(&geom, s, tau);
    let mut run = ExtRun {
        inst,
        h,
        tau,
        ps: geom.path_set(s).into_iter().collect(),
        d: vec![HashSet::new(); t],
        edges,
        horizon,
        tensor: WalkTensor::new(geom),
    };
    let mut l = Index::zero(t + 1);
    for &x in starts {
        check_start(inst, x);
        l.inc(t + 1);
        if run.past_horizon(&l) {
            break;
        }
        run.tensor.write_root(l, x);
        run.walk(t, x, l);
        if run.tensor.aborted {
            break;
        }
    }
    run.tensor
}
