//! The finitary random total order: lexicographic comparison of sphere sums
//! of a Bernoulli field, refined through the cell hierarchy into an order
//! whose restriction to any resolved region behaves like Z (finite
//! intervals, finitary successors).
//!
//! Within a cell, earlier-level blocks precede later arrivals; blocks are
//! ordered by their base-order minima; fresh vertices compare directly in
//! the base order. On tori the sphere condition fails at the diameter, so
//! exhausted sphere vectors fall back to lazily revealed unbiased label
//! streams, which keeps the order total without low-entropy claims.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::cell::CellProcessView;
use crate::error::{Error, Result};
use crate::graph::{LatticeGraph, Vertex};
use crate::randomness::FieldView;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderMode {
    SphereSum,
    UniformLabel,
}

/// Lexicographic comparison of sphere sums of `eta` around `u` and `v`,
/// expanding the radius until they differ. Returns the ordering and the
/// certificate radius (the largest sphere index examined): the outcome is
/// unchanged by any modification of `eta` outside the two balls of that
/// radius.
pub fn sphere_sum_compare(
    g: &LatticeGraph,
    eta: impl Fn(Vertex) -> bool,
    u: Vertex,
    v: Vertex,
    radius_cap: u64,
) -> Result<Option<(Ordering, u64)>> {
    let u = g.canonicalize(u);
    let v = g.canonicalize(v);
    if u == v {
        return Err(Error::Usage("sphere-sum comparison needs distinct vertices".into()));
    }
    let max_r = if g.is_finite() { g.diameter() } else { radius_cap };
    for r in 0..=max_r {
        let su = g.sphere(u, r).into_iter().filter(|&w| eta(w)).count();
        let sv = g.sphere(v, r).into_iter().filter(|&w| eta(w)).count();
        match su.cmp(&sv) {
            Ordering::Equal => {}
            ord => return Ok(Some((ord, r))),
        }
    }
    if g.is_finite() {
        // spheres exhausted at the diameter: a genuine tie (the sphere
        // condition fails on tori); the caller breaks it with label bits
        return Ok(None);
    }
    Err(Error::Unresolved { what: format!("sphere sums of {u} and {v} agree"), radius: radius_cap })
}

struct OrderCaches {
    sphere_sums: HashMap<Vertex, Vec<u16>>,
    base: HashMap<(Vertex, Vertex), Ordering>,
    block_min: HashMap<(u32, Vertex), Vertex>,
}

/// A per-seed handle on the random total order. Single-writer caches;
/// reads on a resolved handle are cheap and mutually consistent.
pub struct OrderHandle {
    graph: LatticeGraph,
    mode: OrderMode,
    eps_ord: f64,
    fields: FieldView,
    cells: Rc<CellProcessView>,
    radius_cap: u64,
    caches: RefCell<OrderCaches>,
}

impl OrderHandle {
    pub fn new(
        mode: OrderMode,
        eps_ord: f64,
        fields: FieldView,
        cells: Rc<CellProcessView>,
    ) -> Result<Self> {
        if !(0.0 < eps_ord && eps_ord <= 0.5) {
            return Err(Error::Config("eps_ord must lie in (0, 1/2]".into()));
        }
        let graph = *fields.graph();
        let radius_cap = cells.policy().window_cap;
        Ok(OrderHandle {
            graph,
            mode,
            eps_ord,
            fields,
            cells,
            radius_cap,
            caches: RefCell::new(OrderCaches {
                sphere_sums: HashMap::new(),
                base: HashMap::new(),
                block_min: HashMap::new(),
            }),
        })
    }

    pub fn mode(&self) -> OrderMode {
        self.mode
    }

    pub fn cells(&self) -> &Rc<CellProcessView> {
        &self.cells
    }

    fn sphere_sum(&self, v: Vertex, r: u64) -> u16 {
        {
            let caches = self.caches.borrow();
            if let Some(sums) = caches.sphere_sums.get(&v) {
                if let Some(&s) = sums.get(r as usize) {
                    return s;
                }
            }
        }
        let mut caches = self.caches.borrow_mut();
        let sums = caches.sphere_sums.entry(v).or_default();
        while sums.len() <= r as usize {
            let rr = sums.len() as u64;
            let s = self
                .graph
                .sphere(v, rr)
                .into_iter()
                .filter(|&w| self.fields.ord_bit(w, 1, self.eps_ord))
                .count() as u16;
            sums.push(s);
        }
        sums[r as usize]
    }

    /// Lexicographic comparison of unbiased label streams; total almost
    /// surely, used directly in uniform-label mode and as the torus
    /// tie-break in sphere-sum mode.
    fn label_compare(&self, u: Vertex, v: Vertex) -> Result<Ordering> {
        for block in 0..1024u64 {
            let a = self.fields.ord_block(u, block);
            let b = self.fields.ord_block(v, block);
            match a.cmp(&b) {
                Ordering::Equal => {}
                ord => return Ok(ord),
            }
        }
        Err(Error::Unresolved { what: format!("label streams of {u} and {v} agree"), radius: 1024 })
    }

    /// The base order (sphere sums or uniform labels), strict on distinct
    /// vertices.
    pub fn compare_base(&self, u: Vertex, v: Vertex) -> Result<Ordering> {
        let u = self.graph.canonicalize(u);
        let v = self.graph.canonicalize(v);
        if u == v {
            return Err(Error::Usage("base comparison needs distinct vertices".into()));
        }
        if let Some(&ord) = self.caches.borrow().base.get(&(u, v)) {
            return Ok(ord);
        }
        let ord = match self.mode {
            OrderMode::UniformLabel => self.label_compare(u, v)?,
            OrderMode::SphereSum => {
                let max_r = if self.graph.is_finite() {
                    self.graph.diameter()
                } else {
                    self.radius_cap
                };
                let mut decided = None;
                for r in 0..=max_r {
                    let su = self.sphere_sum(u, r);
                    let sv = self.sphere_sum(v, r);
                    match su.cmp(&sv) {
                        Ordering::Equal => {}
                        ord => {
                            decided = Some(ord);
                            break;
                        }
                    }
                }
                match decided {
                    Some(ord) => ord,
                    None if self.graph.is_finite() => self.label_compare(u, v)?,
                    None => {
                        return Err(Error::Unresolved {
                            what: format!("sphere sums of {u} and {v} agree"),
                            radius: self.radius_cap,
                        })
                    }
                }
            }
        };
        let mut caches = self.caches.borrow_mut();
        caches.base.insert((u, v), ord);
        caches.base.insert((v, u), ord.reverse());
        Ok(ord)
    }

    /// Base-order minimum of a level-n cell, memoized by the cell's first
    /// site.
    fn block_min(&self, level: u32, cell_key: Vertex, members: &[Vertex]) -> Result<Vertex> {
        if let Some(&m) = self.caches.borrow().block_min.get(&(level, cell_key)) {
            return Ok(m);
        }
        let mut best = members[0];
        for &w in &members[1..] {
            if self.compare_base(w, best)? == Ordering::Less {
                best = w;
            }
        }
        self.caches.borrow_mut().block_min.insert((level, cell_key), best);
        Ok(best)
    }

    fn same_cell(&self, level: u32, u: Vertex, v: Vertex) -> Result<bool> {
        let cu = self.cells.component(level, u)?;
        Ok(cu.contains(&self.graph.canonicalize(v)))
    }

    /// The refined total order: within a common cell, earlier-level blocks
    /// first (ordered by their base minima), fresh vertices by base order.
    pub fn compare(&self, u: Vertex, v: Vertex) -> Result<Ordering> {
        let u = self.graph.canonicalize(u);
        let v = self.graph.canonicalize(v);
        if u == v {
            return Ok(Ordering::Equal);
        }
        let eu = self.cells.entry(u)?;
        let ev = self.cells.entry(v)?;
        let mut n = eu.level.max(ev.level);
        let max_view = self.cells.policy().max_level;
        loop {
            if self.same_cell(n, u, v)? {
                break;
            }
            n += 1;
            if n > max_view {
                return Err(Error::Unresolved {
                    what: format!("{u} and {v} share no cell up to the level cap"),
                    radius: max_view as u64,
                });
            }
        }
        self.compare_within(n, u, v)
    }

    fn compare_within(&self, level: u32, u: Vertex, v: Vertex) -> Result<Ordering> {
        let mu = level > 1 && self.cells.member(level - 1, u)?;
        let mv = level > 1 && self.cells.member(level - 1, v)?;
        match (mu, mv) {
            (true, false) => Ok(Ordering::Less),
            (false, true) => Ok(Ordering::Greater),
            (false, false) => self.compare_base(u, v),
            (true, true) => {
                if self.same_cell(level - 1, u, v)? {
                    self.compare_within(level - 1, u, v)
                } else {
                    let cu = self.cells.component(level - 1, u)?;
                    let cv = self.cells.component(level - 1, v)?;
                    let min_u = self.block_min(level - 1, cu.as_slice()[0], cu.as_slice())?;
                    let min_v = self.block_min(level - 1, cv.as_slice()[0], cv.as_slice())?;
                    self.compare_base(min_u, min_v)
                }
            }
        }
    }

    /// Base-order minimum of a vertex set (block comparison key).
    pub fn min_base_of(&self, set: &crate::graph::VertexSet) -> Result<Vertex> {
        debug_assert!(!set.is_empty());
        let s = set.as_slice();
        let mut best = s[0];
        for &w in &s[1..] {
            if self.compare_base(w, best)? == Ordering::Less {
                best = w;
            }
        }
        Ok(best)
    }

    /// The refined-order minimum of a nonempty set of vertices.
    pub fn min_of(&self, vertices: &[Vertex]) -> Result<Vertex> {
        debug_assert!(!vertices.is_empty());
        let mut best = vertices[0];
        for &w in &vertices[1..] {
            if self.compare(w, best)? == Ordering::Less {
                best = w;
            }
        }
        Ok(best)
    }

    /// Distinct previous-level blocks inside a cell, with their base-order
    /// minima, plus the fresh part.
    fn split_cell(
        &self,
        level: u32,
        cell: &crate::graph::VertexSet,
    ) -> Result<(Vec<(Vertex, Rc<crate::graph::VertexSet>)>, Vec<Vertex>)> {
        let mut blocks: Vec<(Vertex, Rc<crate::graph::VertexSet>)> = Vec::new();
        let mut fresh = Vec::new();
        for &w in cell.iter() {
            if level >= 2 && self.cells.member(level - 1, w)? {
                let comp = self.cells.component(level - 1, w)?;
                // components are identified by their first (smallest) site
                if blocks.iter().all(|(_, b)| b.as_slice()[0] != comp.as_slice()[0]) {
                    let m = self.min_base_of(&comp)?;
                    blocks.push((m, comp));
                }
            } else {
                fresh.push(w);
            }
        }
        Ok((blocks, fresh))
    }

    /// Refined-order minimum of a cell resolved at `level`.
    fn order_min_of_cell(&self, level: u32, cell: &crate::graph::VertexSet) -> Result<Vertex> {
        let (blocks, fresh) = self.split_cell(level, cell)?;
        if blocks.is_empty() {
            return self.min_base_of(&crate::graph::VertexSet::from_iter(fresh));
        }
        let first = blocks
            .iter()
            .try_fold(None::<&(Vertex, Rc<crate::graph::VertexSet>)>, |acc, b| {
                Ok::<_, Error>(match acc {
                    None => Some(b),
                    Some(a) if self.compare_base(b.0, a.0)? == Ordering::Less => Some(b),
                    Some(a) => Some(a),
                })
            })?
            .expect("nonempty");
        self.order_min_of_cell(level - 1, &first.1)
    }

    /// Refined-order maximum of a cell resolved at `level`.
    fn order_max_of_cell(&self, level: u32, cell: &crate::graph::VertexSet) -> Result<Vertex> {
        let (blocks, fresh) = self.split_cell(level, cell)?;
        if !fresh.is_empty() {
            let mut best = fresh[0];
            for &w in &fresh[1..] {
                if self.compare_base(w, best)? == Ordering::Greater {
                    best = w;
                }
            }
            return Ok(best);
        }
        let last = blocks
            .iter()
            .try_fold(None::<&(Vertex, Rc<crate::graph::VertexSet>)>, |acc, b| {
                Ok::<_, Error>(match acc {
                    None => Some(b),
                    Some(a) if self.compare_base(b.0, a.0)? == Ordering::Greater => Some(b),
                    Some(a) => Some(a),
                })
            })?
            .expect("cell has neither blocks nor fresh sites");
        self.order_max_of_cell(level - 1, &last.1)
    }

    /// The refined-order successor: found at the first level where `v` is
    /// not its cell's maximum (successors are stable across levels). The
    /// search walks the block decomposition, so its cost is linear in the
    /// resolved cells.
    pub fn successor(&self, v: Vertex) -> Result<Vertex> {
        const CELL_WORK_CAP: usize = 1 << 20;
        let v = self.graph.canonicalize(v);
        let e = self.cells.entry(v)?;
        // within the entry cell, v sits in the fresh part, ordered by the
        // base order
        let mut next: Option<Vertex> = None;
        for &w in e.fresh.iter() {
            if w == v || self.compare_base(v, w)? != Ordering::Less {
                continue;
            }
            next = Some(match next {
                None => w,
                Some(b) if self.compare_base(w, b)? == Ordering::Less => w,
                Some(b) => b,
            });
        }
        if let Some(w) = next {
            return Ok(w);
        }
        // v is the maximum of its entry cell; climb until a later block or
        // a fresh part appears
        let max_view = self.cells.policy().max_level;
        let mut n = e.level;
        let mut prev_len = e.cell.len();
        loop {
            n += 1;
            if n > max_view {
                return Err(Error::Unresolved {
                    what: format!("{v} is extremal in every resolved cell"),
                    radius: max_view as u64,
                });
            }
            let cell = self.cells.component(n, v)?;
            if cell.len() > CELL_WORK_CAP {
                return Err(Error::Unresolved {
                    what: format!("{v} extremal up to a cell of {} sites", cell.len()),
                    radius: cell.len() as u64,
                });
            }
            if cell.len() == prev_len {
                continue;
            }
            prev_len = cell.len();
            let (blocks, fresh) = self.split_cell(n, cell.as_ref())?;
            let vblock = self.cells.component(n - 1, v)?;
            let vmin = self.min_base_of(&vblock)?;
            let mut later: Option<&(Vertex, Rc<crate::graph::VertexSet>)> = None;
            for b in &blocks {
                if b.0 == vmin {
                    continue; // v's own block
                }
                if self.compare_base(b.0, vmin)? == Ordering::Greater {
                    later = Some(match later {
                        None => b,
                        Some(a) if self.compare_base(b.0, a.0)? == Ordering::Less => b,
                        Some(a) => a,
                    });
                }
            }
            if let Some(b) = later {
                return self.order_min_of_cell(n - 1, &b.1);
            }
            if !fresh.is_empty() {
                return self.min_base_of(&crate::graph::VertexSet::from_iter(fresh));
            }
        }
    }

    pub fn predecessor(&self, v: Vertex) -> Result<Vertex> {
        const CELL_WORK_CAP: usize = 1 << 20;
        let v = self.graph.canonicalize(v);
        let e = self.cells.entry(v)?;
        // earlier fresh sites within the entry cell
        let mut prev: Option<Vertex> = None;
        for &w in e.fresh.iter() {
            if w == v || self.compare_base(v, w)? != Ordering::Greater {
                continue;
            }
            prev = Some(match prev {
                None => w,
                Some(b) if self.compare_base(w, b)? == Ordering::Greater => w,
                Some(b) => b,
            });
        }
        if let Some(w) = prev {
            return Ok(w);
        }
        // v is the first fresh site; the predecessor is the maximum of the
        // old part, if any
        if e.level >= 2 {
            let (blocks, _) = self.split_cell(e.level, e.cell.as_ref())?;
            if !blocks.is_empty() {
                let mut last = &blocks[0];
                for b in &blocks[1..] {
                    if self.compare_base(b.0, last.0)? == Ordering::Greater {
                        last = b;
                    }
                }
                return self.order_max_of_cell(e.level - 1, &last.1);
            }
        }
        // v is the minimum of its entry cell; climb
        let max_view = self.cells.policy().max_level;
        let mut n = e.level;
        let mut prev_len = e.cell.len();
        loop {
            n += 1;
            if n > max_view {
                return Err(Error::Unresolved {
                    what: format!("{v} is extremal in every resolved cell"),
                    radius: max_view as u64,
                });
            }
            let cell = self.cells.component(n, v)?;
            if cell.len() > CELL_WORK_CAP {
                return Err(Error::Unresolved {
                    what: format!("{v} extremal up to a cell of {} sites", cell.len()),
                    radius: cell.len() as u64,
                });
            }
            if cell.len() == prev_len {
                continue;
            }
            prev_len = cell.len();
            let (blocks, _) = self.split_cell(n, cell.as_ref())?;
            let vblock = self.cells.component(n - 1, v)?;
            let vmin = self.min_base_of(&vblock)?;
            let mut earlier: Option<&(Vertex, Rc<crate::graph::VertexSet>)> = None;
            for b in &blocks {
                if b.0 == vmin {
                    continue; // v's own block
                }
                if self.compare_base(b.0, vmin)? == Ordering::Less {
                    earlier = Some(match earlier {
                        None => b,
                        Some(a) if self.compare_base(b.0, a.0)? == Ordering::Greater => b,
                        Some(a) => a,
                    });
                }
            }
            if let Some(b) = earlier {
                return self.order_max_of_cell(n - 1, &b.1);
            }
        }
    }

    /// All torus sites in ascending refined order (the engine's rank table).
    pub fn sorted_torus_sites(&self) -> Result<Vec<u32>> {
        debug_assert!(self.graph.is_finite());
        let n = self.graph.site_count();
        // pre-resolve comparisons so the sort comparator cannot fail
        let err: RefCell<Option<Error>> = RefCell::new(None);
        let mut sites: Vec<u32> = (0..n as u32).collect();
        sites.sort_unstable_by(|&a, &b| {
            if err.borrow().is_some() {
                return a.cmp(&b);
            }
            match self.compare(self.graph.site_at(a as usize), self.graph.site_at(b as usize)) {
                Ok(ord) => ord,
                Err(e) => {
                    *err.borrow_mut() = Some(e);
                    a.cmp(&b)
                }
            }
        });
        match err.into_inner() {
            Some(e) => Err(e),
            None => Ok(sites),
        }
    }
}
