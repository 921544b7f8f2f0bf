//! The nested cell process A_1 c A_2 c ... : Voronoi construction driven by
//! Bernoulli point layers, and the simple process whose levels are unions of
//! independent Bernoulli(1/2) fields. Tori are resolved whole; infinite
//! graphs are resolved lazily per site with certification caps.
//!
//! Voronoi cells of a point layer are shrunk by one step so distinct cells
//! sit at distance at least 2; level n+1 adds the new Voronoi region minus a
//! 1-dilated forbidden zone around the level-n components that would
//! otherwise merge across cells.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LatticeGraph, Vertex, VertexSet};
use crate::randomness::FieldView;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Voronoi,
    SimpleZ,
}

/// Cell-process parameters. Levels are 1-based; `level_shift` relabels the
/// sequence so that view level n is raw level n + shift (the device for
/// making level-1 clusters large with small boundary).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPolicy {
    pub kind: CellKind,
    /// Geometric schedule base: eps_n = eps_base * 2^-n (voronoi only).
    pub eps_base: f64,
    /// Explicit per-raw-level schedule overriding the geometric default.
    pub eps_schedule: Option<Vec<f64>>,
    /// Raw-level cap.
    pub max_level: u32,
    /// Exploration radius cap for lazy resolution.
    pub window_cap: u64,
    pub level_shift: u32,
}

impl CellPolicy {
    pub fn voronoi(eps_base: f64) -> Self {
        CellPolicy {
            kind: CellKind::Voronoi,
            eps_base,
            eps_schedule: None,
            max_level: 40,
            window_cap: 1 << 16,
            level_shift: 0,
        }
    }

    pub fn simple_z() -> Self {
        CellPolicy {
            kind: CellKind::SimpleZ,
            eps_base: 0.5,
            eps_schedule: None,
            max_level: 48,
            window_cap: 1 << 16,
            level_shift: 0,
        }
    }

    pub fn with_shift(mut self, shift: u32) -> Self {
        self.level_shift = shift;
        self
    }

    /// Bernoulli density of the raw level-n point layer. On finite graphs
    /// the geometric schedule is floored at one expected point per graph:
    /// the defining sets of the schedule cannot outgrow the torus, so their
    /// reciprocal density cannot drop below 1/|sites|.
    pub fn eps(&self, raw_level: u32, graph: &LatticeGraph) -> f64 {
        match self.kind {
            CellKind::SimpleZ => 0.5,
            CellKind::Voronoi => {
                let raw = if let Some(s) = &self.eps_schedule {
                    match s.get(raw_level as usize - 1) {
                        Some(&e) => e,
                        None => self.eps_base * 0.5f64.powi(raw_level as i32),
                    }
                } else {
                    self.eps_base * 0.5f64.powi(raw_level as i32)
                };
                let floor =
                    if graph.is_finite() { 1.0 / graph.site_count() as f64 } else { 0.0 };
                raw.max(floor).clamp(0.0, 1.0)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_level == 0 {
            return Err(Error::Config("cell max_level must be positive".into()));
        }
        if let Some(s) = &self.eps_schedule {
            if s.iter().any(|&e| !(0.0..=1.0).contains(&e)) {
                return Err(Error::Config("eps schedule entries must lie in [0,1]".into()));
            }
        }
        if self.kind == CellKind::Voronoi && !(self.eps_base > 0.0 && self.eps_base <= 1.0) {
            return Err(Error::Config("voronoi eps_base must lie in (0,1]".into()));
        }
        Ok(())
    }
}

/// Entry data for a vertex: the level at which it joined, its cell there,
/// and the fresh region of that cell (the part outside the previous level),
/// which is the region its agent is responsible for.
#[derive(Debug, Clone)]
pub struct EntryInfo {
    pub level: u32,
    pub cell: Rc<VertexSet>,
    pub fresh: Rc<VertexSet>,
}

/// One fully resolved torus level.
#[derive(Debug, Clone)]
pub struct TorusLevel {
    pub member: Vec<bool>,
    /// Component id per site; u32::MAX outside the level set.
    pub comp_of: Vec<u32>,
    /// Component site lists (indices ascending), id order deterministic.
    pub cells: Vec<Vec<u32>>,
}

impl TorusLevel {
    pub fn is_full(&self) -> bool {
        self.member.iter().all(|&m| m)
    }
}

/// A per-seed view of the cell process. Single-writer: resolution mutates
/// internal caches; reads on a resolved view are cheap.
pub struct CellProcessView {
    graph: LatticeGraph,
    policy: CellPolicy,
    fields: FieldView,
    inner: RefCell<Inner>,
}

enum Inner {
    Torus(TorusState),
    Lazy(LazyState),
}

struct TorusState {
    /// raw levels 1.. (index 0 = raw level 1)
    levels: Vec<Rc<TorusLevel>>,
    neighbors: Rc<Vec<Vec<u32>>>,
    saturated_at_raw: Option<u32>,
}

#[derive(Default)]
struct LazyState {
    member: HashMap<(u32, Vertex), bool>,
    owner: HashMap<(u32, Vertex), Option<Vertex>>,
    eroded: HashMap<(u32, Vertex), bool>,
    component: HashMap<(u32, Vertex), Rc<VertexSet>>,
}

impl CellProcessView {
    pub fn new(graph: LatticeGraph, policy: CellPolicy, fields: FieldView) -> Result<Self> {
        graph.validate()?;
        policy.validate()?;
        let inner = if graph.is_finite() {
            let neighbors = (0..graph.site_count())
                .map(|i| {
                    graph
                        .neighbors(graph.site_at(i))
                        .into_iter()
                        .map(|v| graph.site_index(v) as u32)
                        .collect()
                })
                .collect();
            Inner::Torus(TorusState {
                levels: Vec::new(),
                neighbors: Rc::new(neighbors),
                saturated_at_raw: None,
            })
        } else {
            Inner::Lazy(LazyState::default())
        };
        Ok(CellProcessView { graph, policy, fields, inner: RefCell::new(inner) })
    }

    pub fn graph(&self) -> &LatticeGraph {
        &self.graph
    }

    pub fn policy(&self) -> &CellPolicy {
        &self.policy
    }

    fn raw_of(&self, view_level: u32) -> u32 {
        view_level + self.policy.level_shift
    }

    /// Membership of `v` in A_n (view levels).
    pub fn member(&self, view_level: u32, v: Vertex) -> Result<bool> {
        debug_assert!(view_level >= 1);
        let raw = self.raw_of(view_level);
        if self.graph.is_finite() {
            let level = self.torus_level(raw)?;
            return Ok(level.member[self.graph.site_index(v)]);
        }
        self.lazy_member(raw, self.graph.canonicalize(v))
    }

    /// The cell A_n(v), certified complete; empty if v is not a member.
    pub fn component(&self, view_level: u32, v: Vertex) -> Result<Rc<VertexSet>> {
        let raw = self.raw_of(view_level);
        if self.graph.is_finite() {
            let level = self.torus_level(raw)?;
            let idx = self.graph.site_index(v);
            if !level.member[idx] {
                return Ok(Rc::new(VertexSet::new()));
            }
            let cell = &level.cells[level.comp_of[idx] as usize];
            return Ok(Rc::new(VertexSet::from_iter(
                cell.iter().map(|&i| self.graph.site_at(i as usize)),
            )));
        }
        let v = self.graph.canonicalize(v);
        if !self.lazy_member(raw, v)? {
            return Ok(Rc::new(VertexSet::new()));
        }
        self.lazy_component(raw, v)
    }

    /// A_n restricted to an explicit window.
    pub fn build_level(&self, view_level: u32, window: &VertexSet) -> Result<VertexSet> {
        let mut members = Vec::new();
        for &v in window.iter() {
            if self.member(view_level, v)? {
                members.push(v);
            }
        }
        Ok(VertexSet::from_iter(members))
    }

    /// Smallest view level containing `v`, its cell, and the fresh region.
    pub fn entry(&self, v: Vertex) -> Result<EntryInfo> {
        let max_view = self.policy.max_level.saturating_sub(self.policy.level_shift).max(1);
        for n in 1..=max_view {
            if self.member(n, v)? {
                let cell = self.component(n, v)?;
                let fresh = if n == 1 {
                    Rc::clone(&cell)
                } else {
                    let mut fresh = Vec::new();
                    for &w in cell.iter() {
                        if !self.member(n - 1, w)? {
                            fresh.push(w);
                        }
                    }
                    Rc::new(VertexSet::from_iter(fresh))
                };
                return Ok(EntryInfo { level: n, cell, fresh });
            }
        }
        Err(Error::Unresolved {
            what: format!("entry level of {v} (max_level reached)"),
            radius: self.policy.max_level as u64,
        })
    }

    /// All cells of a view level with their fresh regions (tori only), in
    /// deterministic order.
    pub fn cells_with_fresh(&self, view_level: u32) -> Result<Vec<(Rc<VertexSet>, Vec<Vertex>)>> {
        let raw = self.raw_of(view_level);
        let level = self.torus_level(raw)?;
        let prev = if raw > 1 { Some(self.torus_level(raw - 1)?) } else { None };
        let mut out = Vec::with_capacity(level.cells.len());
        for cell in &level.cells {
            let fresh: Vec<Vertex> = cell
                .iter()
                .filter(|&&i| prev.as_ref().is_none_or(|p| !p.member[i as usize]))
                .map(|&i| self.graph.site_at(i as usize))
                .collect();
            let set =
                Rc::new(VertexSet::from_iter(cell.iter().map(|&i| self.graph.site_at(i as usize))));
            out.push((set, fresh));
        }
        Ok(out)
    }

    /// Raw torus level data (engine fast path). View levels.
    pub fn torus_level_data(&self, view_level: u32) -> Result<Rc<TorusLevel>> {
        self.torus_level(self.raw_of(view_level))
    }

    /// First view level at which the torus is fully covered, resolving up
    /// to the level cap.
    pub fn saturation_view_level(&self) -> Result<Option<u32>> {
        debug_assert!(self.graph.is_finite());
        loop {
            {
                let inner = self.inner.borrow();
                let Inner::Torus(st) = &*inner else { unreachable!() };
                if let Some(raw) = st.saturated_at_raw {
                    return Ok(Some(raw.saturating_sub(self.policy.level_shift).max(1)));
                }
                if st.levels.len() as u32 >= self.policy.max_level {
                    return Ok(None);
                }
            }
            self.build_next_torus_level()?;
        }
    }

    // -- torus resolution -------------------------------------------------

    fn torus_level(&self, raw_level: u32) -> Result<Rc<TorusLevel>> {
        if raw_level == 0 || raw_level > self.policy.max_level {
            return Err(Error::Unresolved {
                what: format!("cell level {raw_level} beyond max_level cap"),
                radius: self.policy.max_level as u64,
            });
        }
        loop {
            {
                let inner = self.inner.borrow();
                let Inner::Torus(st) = &*inner else {
                    return Err(Error::Usage("torus resolution on an infinite graph".into()));
                };
                if let Some(sat) = st.saturated_at_raw {
                    let idx = raw_level.min(sat) as usize - 1;
                    if idx < st.levels.len() {
                        return Ok(Rc::clone(&st.levels[idx]));
                    }
                } else if raw_level as usize <= st.levels.len() {
                    return Ok(Rc::clone(&st.levels[raw_level as usize - 1]));
                }
            }
            self.build_next_torus_level()?;
        }
    }

    fn build_next_torus_level(&self) -> Result<()> {
        let mut inner = self.inner.borrow_mut();
        let Inner::Torus(st) = &mut *inner else {
            return Err(Error::Usage("torus resolution on an infinite graph".into()));
        };
        let n_sites = self.graph.site_count();
        let raw = st.levels.len() as u32 + 1;
        let eps = self.policy.eps(raw, &self.graph);
        let bit = |i: usize| self.fields.cell_layer_bit(self.graph.site_at(i), raw, eps);
        let neighbors = Rc::clone(&st.neighbors);
        let prev = st.levels.last().cloned();

        let member: Vec<bool> = match self.policy.kind {
            CellKind::SimpleZ => (0..n_sites)
                .map(|i| prev.as_ref().is_some_and(|p| p.member[i]) || bit(i))
                .collect(),
            CellKind::Voronoi => {
                let points: Vec<u32> =
                    (0..n_sites).filter(|&i| bit(i)).map(|i| i as u32).collect();
                let aprime = eroded_voronoi(n_sites, &points, &neighbors);
                match &prev {
                    None => aprime,
                    Some(p) => {
                        // forbidden zone: 1-dilation of the previous-level
                        // components that poke out of the new Voronoi region
                        let mut comp_bad = vec![false; p.cells.len()];
                        for (i, &m) in p.member.iter().enumerate() {
                            if m && !aprime[i] {
                                comp_bad[p.comp_of[i] as usize] = true;
                            }
                        }
                        let blocked: Vec<bool> = (0..n_sites)
                            .map(|i| {
                                std::iter::once(i as u32)
                                    .chain(neighbors[i].iter().copied())
                                    .any(|j| {
                                        let j = j as usize;
                                        p.member[j] && comp_bad[p.comp_of[j] as usize]
                                    })
                            })
                            .collect();
                        (0..n_sites)
                            .map(|i| p.member[i] || (aprime[i] && !blocked[i]))
                            .collect()
                    }
                }
            }
        };

        let (comp_of, cells) = label_components(&member, &neighbors);
        let full = member.iter().all(|&m| m);
        st.levels.push(Rc::new(TorusLevel { member, comp_of, cells }));
        if full && st.saturated_at_raw.is_none() {
            st.saturated_at_raw = Some(raw);
        }
        Ok(())
    }

    // -- lazy (infinite-graph) resolution ---------------------------------

    fn lazy_member(&self, raw_level: u32, v: Vertex) -> Result<bool> {
        if raw_level == 0 {
            return Ok(false);
        }
        if raw_level > self.policy.max_level {
            return Err(Error::Unresolved {
                what: format!("cell level {raw_level} beyond max_level cap"),
                radius: self.policy.max_level as u64,
            });
        }
        if let Inner::Lazy(st) = &*self.inner.borrow() {
            if let Some(&m) = st.member.get(&(raw_level, v)) {
                return Ok(m);
            }
        }
        let result = match self.policy.kind {
            CellKind::SimpleZ => {
                (1..=raw_level).any(|layer| self.fields.cell_layer_bit(v, layer, 0.5))
            }
            CellKind::Voronoi => {
                if raw_level == 1 {
                    self.lazy_eroded(1, v)?
                } else if self.lazy_member(raw_level - 1, v)? {
                    true
                } else if !self.lazy_eroded(raw_level, v)? {
                    false
                } else {
                    // excluded if some neighbor's previous-level component
                    // pokes out of the new Voronoi region
                    let mut blocked = false;
                    'outer: for w in std::iter::once(v).chain(self.graph.neighbors(v)) {
                        if self.lazy_member(raw_level - 1, w)? {
                            let comp = self.lazy_component(raw_level - 1, w)?;
                            for &x in comp.iter() {
                                if !self.lazy_eroded(raw_level, x)? {
                                    blocked = true;
                                    break 'outer;
                                }
                            }
                        }
                    }
                    !blocked
                }
            }
        };
        if let Inner::Lazy(st) = &mut *self.inner.borrow_mut() {
            st.member.insert((raw_level, v), result);
        }
        Ok(result)
    }

    /// Membership of v in the eroded Voronoi region of the raw level's
    /// point layer.
    fn lazy_eroded(&self, raw_level: u32, v: Vertex) -> Result<bool> {
        if let Inner::Lazy(st) = &*self.inner.borrow() {
            if let Some(&e) = st.eroded.get(&(raw_level, v)) {
                return Ok(e);
            }
        }
        let result = match self.lazy_owner(raw_level, v)? {
            None => false,
            Some(u) => {
                let mut ok = true;
                for w in self.graph.neighbors(v) {
                    if self.lazy_owner(raw_level, w)? != Some(u) {
                        ok = false;
                        break;
                    }
                }
                ok
            }
        };
        if let Inner::Lazy(st) = &mut *self.inner.borrow_mut() {
            st.eroded.insert((raw_level, v), result);
        }
        Ok(result)
    }

    /// The unique nearest point of the raw level's layer, if unique.
    fn lazy_owner(&self, raw_level: u32, v: Vertex) -> Result<Option<Vertex>> {
        if let Inner::Lazy(st) = &*self.inner.borrow() {
            if let Some(o) = st.owner.get(&(raw_level, v)) {
                return Ok(*o);
            }
        }
        let eps = self.policy.eps(raw_level, &self.graph);
        let is_point = |w: Vertex| self.fields.cell_layer_bit(w, raw_level, eps);
        let mut owner = None;
        for r in 0..=self.policy.window_cap {
            let hits: Vec<Vertex> =
                self.graph.sphere(v, r).into_iter().filter(|&w| is_point(w)).collect();
            if !hits.is_empty() {
                owner = Some(if hits.len() == 1 { Some(hits[0]) } else { None });
                break;
            }
        }
        let owner = match owner {
            Some(o) => o,
            None => {
                return Err(Error::Unresolved {
                    what: format!("no level-{raw_level} point within cap of {v}"),
                    radius: self.policy.window_cap,
                })
            }
        };
        if let Inner::Lazy(st) = &mut *self.inner.borrow_mut() {
            st.owner.insert((raw_level, v), owner);
        }
        Ok(owner)
    }

    fn lazy_component(&self, raw_level: u32, v: Vertex) -> Result<Rc<VertexSet>> {
        if let Inner::Lazy(st) = &*self.inner.borrow() {
            if let Some(c) = st.component.get(&(raw_level, v)) {
                return Ok(Rc::clone(c));
            }
        }
        let mut seen: std::collections::HashSet<Vertex> = std::collections::HashSet::new();
        seen.insert(v);
        let mut frontier = vec![v];
        let mut steps = 0u64;
        while let Some(w) = frontier.pop() {
            steps += 1;
            if steps > self.policy.window_cap.saturating_mul(4) {
                return Err(Error::Unresolved {
                    what: format!("component of {v} at level {raw_level} exceeds cap"),
                    radius: self.policy.window_cap,
                });
            }
            for x in self.graph.neighbors(w) {
                if self.lazy_member(raw_level, x)? && seen.insert(x) {
                    frontier.push(x);
                }
            }
        }
        let comp = Rc::new(VertexSet::from_iter(seen));
        if let Inner::Lazy(st) = &mut *self.inner.borrow_mut() {
            for &w in comp.iter() {
                st.component.insert((raw_level, w), Rc::clone(&comp));
            }
        }
        Ok(comp)
    }
}

/// Eroded strict-Voronoi region of a point set on a finite graph: sites
/// whose whole 1-ball has the same unique nearest point.
fn eroded_voronoi(n_sites: usize, points: &[u32], neighbors: &[Vec<u32>]) -> Vec<bool> {
    const TIE: u32 = u32::MAX - 1;
    const UNSEEN: u32 = u32::MAX;
    let mut owner = vec![UNSEEN; n_sites];
    let mut dist = vec![u32::MAX; n_sites];
    let mut queue: std::collections::VecDeque<u32> = std::collections::VecDeque::new();
    for &p in points {
        owner[p as usize] = p;
        dist[p as usize] = 0;
        queue.push_back(p);
    }
    while let Some(i) = queue.pop_front() {
        let d = dist[i as usize];
        let o = owner[i as usize];
        for &j in &neighbors[i as usize] {
            let j = j as usize;
            if owner[j] == UNSEEN {
                owner[j] = o;
                dist[j] = d + 1;
                queue.push_back(j as u32);
            } else if dist[j] == d + 1 && owner[j] != o {
                owner[j] = TIE;
            }
        }
    }
    (0..n_sites)
        .map(|i| {
            let o = owner[i];
            o < TIE && neighbors[i].iter().all(|&j| owner[j as usize] == o)
        })
        .collect()
}

fn label_components(member: &[bool], neighbors: &[Vec<u32>]) -> (Vec<u32>, Vec<Vec<u32>>) {
    let mut comp_of = vec![u32::MAX; member.len()];
    let mut cells: Vec<Vec<u32>> = Vec::new();
    for start in 0..member.len() {
        if !member[start] || comp_of[start] != u32::MAX {
            continue;
        }
        let id = cells.len() as u32;
        let mut sites = vec![start as u32];
        comp_of[start] = id;
        let mut stack = vec![start as u32];
        while let Some(i) = stack.pop() {
            for &j in &neighbors[i as usize] {
                let j = j as usize;
                if member[j] && comp_of[j] == u32::MAX {
                    comp_of[j] = id;
                    sites.push(j as u32);
                    stack.push(j as u32);
                }
            }
        }
        sites.sort_unstable();
        cells.push(sites);
    }
    (comp_of, cells)
}

// ---------------------------------------------------------------------------
// Standalone Voronoi-cell operations
// ---------------------------------------------------------------------------

/// The complete shrunk Voronoi cell of `u` within a point set given as a
/// predicate, certified by expanding until every boundary candidate is
/// strictly closer to a competitor. Unresolved if the cell cannot be
/// certified complete within the radius cap (e.g. no second point exists).
pub fn voronoi_cell_complete(
    g: &LatticeGraph,
    is_point: impl Fn(Vertex) -> bool,
    u: Vertex,
    radius_cap: u64,
) -> Result<VertexSet> {
    debug_assert!(is_point(u), "u must belong to the point set");
    let u = g.canonicalize(u);
    // BFS the strict-Voronoi region (geodesically star-shaped around u)
    let mut bar = vec![u];
    let mut frontier = vec![u];
    while let Some(v) = frontier.pop() {
        if g.dist(u, v) >= radius_cap {
            return Err(Error::Unresolved {
                what: format!("voronoi cell of {u} not certified complete"),
                radius: radius_cap,
            });
        }
        for w in g.neighbors(v) {
            if !bar.contains(&w) && bar_member(g, &is_point, u, w) {
                bar.push(w);
                frontier.push(w);
            }
        }
    }
    let bar = VertexSet::from_iter(bar);
    Ok(bar.erode(g, 1))
}

/// The shrunk Voronoi cell of `u` intersected with the ball of
/// `window_radius` around it, certifying membership per site. An infinite
/// cell simply truncates at the window.
pub fn voronoi_cell_in_window(
    g: &LatticeGraph,
    is_point: impl Fn(Vertex) -> bool,
    u: Vertex,
    window_radius: u64,
) -> VertexSet {
    let u = g.canonicalize(u);
    let members: Vec<Vertex> = g
        .ball(u, window_radius)
        .into_vec()
        .into_iter()
        .filter(|&v| {
            bar_member(g, &is_point, u, v)
                && g.ball(v, 1).iter().all(|&w| bar_member(g, &is_point, u, w))
        })
        .collect();
    VertexSet::from_iter(members)
}

/// v lies in the strict Voronoi region of u iff the point set meets the
/// closed ball around v of radius dist(u,v) in exactly {u}.
fn bar_member(g: &LatticeGraph, is_point: &impl Fn(Vertex) -> bool, u: Vertex, v: Vertex) -> bool {
    let d = g.dist(u, v);
    g.ball(v, d).iter().all(|&w| w == u || !is_point(w))
}

// ---------------------------------------------------------------------------
// Sampling helpers for the harness
// ---------------------------------------------------------------------------

/// Per-seed observation of the origin's component at one level.
#[derive(Debug, Clone, Copy)]
pub struct OriginSample {
    pub occupied: bool,
    pub comp_size: u64,
    pub comp_boundary: u64,
    /// Max fuzzed distance from the origin within the component.
    pub comp_radius: u64,
}

pub fn origin_component_sample(view: &CellProcessView, view_level: u32) -> Result<OriginSample> {
    let origin = Vertex::origin();
    if !view.member(view_level, origin)? {
        return Ok(OriginSample { occupied: false, comp_size: 0, comp_boundary: 0, comp_radius: 0 });
    }
    let comp = view.component(view_level, origin)?;
    let g = view.graph();
    let radius = comp.iter().map(|&v| g.dist(origin, v)).max().unwrap_or(0);
    Ok(OriginSample {
        occupied: true,
        comp_size: comp.len() as u64,
        comp_boundary: comp.edge_boundary_size(g),
        comp_radius: radius,
    })
}

/// Aggregated per-level statistics over seeds (CSV export rows).
#[derive(Debug, Clone)]
pub struct LevelStats {
    pub level: u32,
    pub p_covered: f64,
    pub mean_cell_size: f64,
    pub boundary_ratio_p50: f64,
    pub boundary_ratio_p90: f64,
}

/// Monte-Carlo level statistics from origin-component samples.
pub fn level_statistics(
    graph: LatticeGraph,
    policy: &CellPolicy,
    levels: u32,
    seeds: std::ops::Range<u64>,
    make_fields: impl Fn(u64) -> FieldView,
) -> Result<Vec<LevelStats>> {
    let mut out = Vec::new();
    for level in 1..=levels {
        let mut covered = 0u64;
        let mut sizes = 0u64;
        let mut size_n = 0u64;
        let mut ratios: Vec<f64> = Vec::new();
        let mut n = 0u64;
        for seed in seeds.clone() {
            let view = CellProcessView::new(graph, policy.clone(), make_fields(seed))?;
            let s = origin_component_sample(&view, level)?;
            n += 1;
            if s.occupied {
                covered += 1;
                sizes += s.comp_size;
                size_n += 1;
                ratios.push(s.comp_boundary as f64 / s.comp_size as f64);
            }
        }
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| -> f64 {
            if ratios.is_empty() {
                f64::NAN
            } else {
                ratios[(p * (ratios.len() - 1) as f64).round() as usize]
            }
        };
        out.push(LevelStats {
            level,
            p_covered: covered as f64 / n as f64,
            mean_cell_size: if size_n > 0 { sizes as f64 / size_n as f64 } else { f64::NAN },
            boundary_ratio_p50: q(0.5),
            boundary_ratio_p90: q(0.9),
        });
    }
    Ok(out)
}

/// Median radius of the origin's component at a level, conditioned on
/// occupancy: the stand-in estimator for the construction's existential
/// cell-size radius (documented as such in reports).
pub fn estimate_median_radius(
    graph: LatticeGraph,
    policy: &CellPolicy,
    level: u32,
    seeds: std::ops::Range<u64>,
    make_fields: impl Fn(u64) -> FieldView,
) -> Result<Option<u64>> {
    let mut radii = Vec::new();
    for seed in seeds {
        let view = CellProcessView::new(graph, policy.clone(), make_fields(seed))?;
        let s = origin_component_sample(&view, level)?;
        if s.occupied {
            radii.push(s.comp_radius);
        }
    }
    if radii.is_empty() {
        return Ok(None);
    }
    radii.sort_unstable();
    Ok(Some(radii[radii.len() / 2]))
}
