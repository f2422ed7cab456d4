use std::collections::HashMap;

use serde::Serialize;

use super::index::Index;
use super::tensor::WalkTensor;
use crate::graph::Instance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Refutation {
    /// Type 1: `r1 < r2 < max S` with `a_{T(r1)} = a_{T(r2)}`.
    Collision { first: Index, second: Index },
    /// Type 2: `r < max S` with `wd(r) = τ` and `T(r)` recorded.
    LongHike { at: Index },
}

/// All type-1 and type-2 refutations of `t` strictly below `max_s`.
pub fn detect_refutations(inst: &Instance, t: &WalkTensor, max_s: &Index, tau: u32) -> Vec<Refutation> {
    let mut out = Vec::new();
    let mut by_value: HashMap<u64, Vec<Index>> = HashMap::new();
    for (l, v) in t.entries().take_while(|(l, _)| *l < max_s) {
        let group = by_value.entry(inst.value(v)).or_default();
        for &first in group.iter() {
            out.push(Refutation::Collision { first, second: *l });
        }
        group.push(*l);
        if t.geom.wd(l) == tau {
            out.push(Refutation::LongHike { at: *l });
        }
    }
    out
}
