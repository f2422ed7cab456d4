use std::collections::BTreeMap;

use serde::Serialize;

use super::index::{Index, WalkTreeGeom};
use crate::graph::Vertex;

/// Sparse walk transcript. Missing entries are ⋆.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkTensor {
    pub geom: WalkTreeGeom,
    entries: BTreeMap<Index, Vertex>,
    probe: BTreeMap<Index, u64>,
    pre: BTreeMap<Index, Index>,
    last: Option<Index>,
    /// The standard walk stopped on a re-probed value.
    pub halted: bool,
    /// The run stopped early past a caller-supplied horizon.
    pub aborted: bool,
}

#[derive(Serialize)]
struct Dump<'a> {
    t: usize,
    multi: bool,
    entries: Vec<(&'a Index, Vertex)>,
    probe: Vec<(&'a Index, u64)>,
    pre: Vec<(&'a Index, &'a Index)>,
}

impl WalkTensor {
    pub fn new(geom: WalkTreeGeom) -> Self {
        WalkTensor {
            geom,
            entries: BTreeMap::new(),
            probe: BTreeMap::new(),
            pre: BTreeMap::new(),
            last: None,
            halted: false,
            aborted: false,
        }
    }

    /// Records a root (start vertex) without probe or predecessor.
    pub(crate) fn write_root(&mut self, ix: Index, v: Vertex) {
        self.entries.insert(ix, v);
        self.last = Some(ix);
    }

    /// Records a move made after probing value `a`.
    pub(crate) fn write_move(&mut self, ix: Index, v: Vertex, a: u64) {
        self.entries.insert(ix, v);
        self.probe.insert(ix, a);
        if let Some(p) = self.last {
            self.pre.insert(ix, p);
        }
        self.last = Some(ix);
    }

    pub fn get(&self, ix: &Index) -> Option<Vertex> {
        self.entries.get(ix).copied()
    }

    pub fn probe(&self, ix: &Index) -> Option<u64> {
        self.probe.get(ix).copied()
    }

    pub fn pre(&self, ix: &Index) -> Option<Index> {
        self.pre.get(ix).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Index, Vertex)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.entries.values().copied()
    }

    pub fn to_json(&self) -> String {
        let dump = Dump {
            t: self.geom.t,
            multi: self.geom.multi,
            entries: self.entries.iter().map(|(k, &v)| (k, v)).collect(),
            probe: self.probe.iter().map(|(k, &v)| (k, v)).collect(),
            pre: self.pre.iter().collect(),
        };
        serde_json::to_string(&dump).expect("tensor dump serializes")
    }
}
