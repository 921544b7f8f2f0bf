//! Lattice graphs: the line `Z`, the lattice `Z^d`, finite tori `Z_n^d`,
//! their metric geometry, distance fuzzing (adjacency = base distance <= k),
//! and automorphism actions.
//!
//! Infinite kinds are pure coordinate arithmetic; nothing ever enumerates
//! the full vertex set. Every query that needs a finite region takes an
//! explicit window or is finite by construction (balls, erosions).

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum supported lattice dimension.
pub const MAX_DIM: usize = 3;

/// A lattice coordinate. Unused trailing axes are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex(pub [i64; MAX_DIM]);

impl Vertex {
    pub fn line(x: i64) -> Self {
        Vertex([x, 0, 0])
    }

    pub fn plane(x: i64, y: i64) -> Self {
        Vertex([x, y, 0])
    }

    pub fn origin() -> Self {
        Vertex([0, 0, 0])
    }

    pub fn x(&self) -> i64 {
        self.0[0]
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0[0])?;
        for c in &self.0[1..] {
            write!(f, ";{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    /// The infinite line Z.
    Z,
    /// The infinite lattice Z^d.
    Zd,
    /// The torus Z_n^d.
    Torus,
}

/// A lattice graph together with the fuzz parameter `k`: two vertices are
/// adjacent in the fuzzed graph iff their base graph distance is at most `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeGraph {
    pub kind: GraphKind,
    /// Dimension (1 for `Z`).
    pub d: usize,
    /// Torus side length; ignored for infinite kinds.
    pub n: u32,
    /// Distance fuzz; 1 means the base graph.
    pub k: u32,
}

impl LatticeGraph {
    pub fn line() -> Self {
        LatticeGraph { kind: GraphKind::Z, d: 1, n: 0, k: 1 }
    }

    pub fn lattice(d: usize) -> Self {
        LatticeGraph { kind: GraphKind::Zd, d, n: 0, k: 1 }
    }

    pub fn torus(d: usize, n: u32) -> Self {
        LatticeGraph { kind: GraphKind::Torus, d, n, k: 1 }
    }

    pub fn with_fuzz(mut self, k: u32) -> Self {
        self.k = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > MAX_DIM {
            return Err(Error::Config(format!("dimension {} outside 1..={MAX_DIM}", self.d)));
        }
        if self.kind == GraphKind::Z && self.d != 1 {
            return Err(Error::Config("kind \"z\" requires d = 1".into()));
        }
        if self.kind == GraphKind::Torus && self.n < 3 {
            return Err(Error::Config("torus side must be at least 3".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("fuzz k must be positive".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.kind == GraphKind::Torus
    }

    /// Number of vertices for finite kinds.
    pub fn site_count(&self) -> usize {
        debug_assert!(self.is_finite());
        (self.n as usize).pow(self.d as u32)
    }

    /// Canonical representative: torus coordinates reduced to `[0, n)`.
    pub fn canonicalize(&self, v: Vertex) -> Vertex {
        match self.kind {
            GraphKind::Torus => {
                let n = self.n as i64;
                let mut c = [0i64; MAX_DIM];
                for (i, ci) in c.iter_mut().enumerate().take(self.d) {
                    *ci = v.0[i].rem_euclid(n);
                }
                Vertex(c)
            }
            _ => v,
        }
    }

    /// Dense index of a canonical torus vertex.
    pub fn site_index(&self, v: Vertex) -> usize {
        debug_assert!(self.is_finite());
        let v = self.canonicalize(v);
        let n = self.n as usize;
        let mut idx = 0usize;
        for i in (0..self.d).rev() {
            idx = idx * n + v.0[i] as usize;
        }
        idx
    }

    pub fn site_at(&self, mut idx: usize) -> Vertex {
        debug_assert!(self.is_finite());
        let n = self.n as usize;
        let mut c = [0i64; MAX_DIM];
        for ci in c.iter_mut().take(self.d) {
            *ci = (idx % n) as i64;
            idx /= n;
        }
        Vertex(c)
    }

    pub fn sites(&self) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.site_count()).map(|i| self.site_at(i))
    }

    /// Base graph distance (L1; per-coordinate wrap on tori).
    pub fn base_dist(&self, u: Vertex, v: Vertex) -> u64 {
        let mut d = 0u64;
        match self.kind {
            GraphKind::Torus => {
                let n = self.n as i64;
                for i in 0..self.d {
                    let delta = (u.0[i] - v.0[i]).rem_euclid(n);
                    d += delta.min(n - delta) as u64;
                }
            }
            _ => {
                for i in 0..self.d {
                    d += (u.0[i] - v.0[i]).unsigned_abs();
                }
            }
        }
        d
    }

    /// Distance in the fuzzed graph: ceil(base/k).
    pub fn dist(&self, u: Vertex, v: Vertex) -> u64 {
        let b = self.base_dist(u, v);
        b.div_ceil(self.k as u64)
    }

    /// Adjacency in the fuzzed graph.
    pub fn adjacent(&self, u: Vertex, v: Vertex) -> bool {
        let b = self.base_dist(u, v);
        b >= 1 && b <= self.k as u64
    }

    /// Degree of the fuzzed graph (size of a base ball of radius k minus one).
    pub fn degree(&self) -> u64 {
        self.ball(Vertex::origin(), 1).len() as u64 - 1
    }

    /// Offsets of the base-metric ball of radius `r` around the origin on the
    /// infinite lattice (no wrap); callers canonicalize afterwards.
    fn base_ball_offsets(&self, r: u64, out: &mut Vec<Vertex>) {
        out.clear();
        let r = r as i64;
        match self.d {
            1 => {
                for x in -r..=r {
                    out.push(Vertex([x, 0, 0]));
                }
            }
            2 => {
                for x in -r..=r {
                    let rem = r - x.abs();
                    for y in -rem..=rem {
                        out.push(Vertex([x, y, 0]));
                    }
                }
            }
            _ => {
                for x in -r..=r {
                    let remx = r - x.abs();
                    for y in -remx..=remx {
                        let remy = remx - y.abs();
                        for z in -remy..=remy {
                            out.push(Vertex([x, y, z]));
                        }
                    }
                }
            }
        }
    }

    /// The ball of radius `r` around `v` in the fuzzed metric.
    pub fn ball(&self, v: Vertex, r: u64) -> VertexSet {
        let base_r = r.saturating_mul(self.k as u64);
        let mut offsets = Vec::new();
        self.base_ball_offsets(base_r, &mut offsets);
        let mut members: Vec<Vertex> = offsets
            .into_iter()
            .map(|o| {
                let mut c = v.0;
                for i in 0..self.d {
                    c[i] += o.0[i];
                }
                self.canonicalize(Vertex(c))
            })
            .collect();
        members.sort_unstable();
        members.dedup();
        VertexSet::from_sorted(members)
    }

    /// The sphere of radius exactly `r` around `v` in the fuzzed metric.
    pub fn sphere(&self, v: Vertex, r: u64) -> Vec<Vertex> {
        if r == 0 {
            return vec![self.canonicalize(v)];
        }
        let ball = self.ball(v, r);
        ball.iter().filter(|&&u| self.dist(u, v) == r).copied().collect()
    }

    /// Fuzzed-graph neighbors of `v`.
    pub fn neighbors(&self, v: Vertex) -> Vec<Vertex> {
        let mut nb = self.ball(v, 1).into_vec();
        let v = self.canonicalize(v);
        nb.retain(|&u| u != v);
        nb
    }

    /// Diameter of the fuzzed graph (finite kinds only).
    pub fn diameter(&self) -> u64 {
        debug_assert!(self.is_finite());
        let base = (self.n as u64 / 2) * self.d as u64;
        base.div_ceil(self.k as u64)
    }

    /// Smallest radius at which two distinct vertices have identical balls,
    /// if any. On `Z` and `Z^d` no such radius exists; on tori it does, and
    /// the harness reports it rather than assuming otherwise.
    pub fn sphere_condition_threshold(&self) -> Option<u64> {
        if !self.is_finite() {
            return None;
        }
        let origin = Vertex::origin();
        for r in 0..=self.diameter() {
            let b0 = self.ball(origin, r);
            for v in self.sites().skip(1) {
                if self.ball(v, r) == b0 {
                    return Some(r);
                }
            }
        }
        None
    }
}

/// A finite set of vertices with O(1) membership and deterministic
/// (coordinate-sorted) iteration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VertexSet {
    sorted: Vec<Vertex>,
    index: HashSet<Vertex>,
}

impl VertexSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_iter<I: IntoIterator<Item = Vertex>>(iter: I) -> Self {
        let mut sorted: Vec<Vertex> = iter.into_iter().collect();
        sorted.sort_unstable();
        sorted.dedup();
        Self::from_sorted(sorted)
    }

    fn from_sorted(sorted: Vec<Vertex>) -> Self {
        let index = sorted.iter().copied().collect();
        VertexSet { sorted, index }
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        self.index.contains(v)
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vertex> {
        self.sorted.iter()
    }

    pub fn into_vec(self) -> Vec<Vertex> {
        self.sorted
    }

    pub fn as_slice(&self) -> &[Vertex] {
        &self.sorted
    }

    /// Dilation `V^{+r}` in the fuzzed metric of `g`.
    pub fn dilate(&self, g: &LatticeGraph, r: u64) -> VertexSet {
        let mut out: Vec<Vertex> = Vec::new();
        for &v in self.iter() {
            out.extend(g.ball(v, r).into_vec());
        }
        out.sort_unstable();
        out.dedup();
        VertexSet::from_sorted(out)
    }

    /// Erosion `V^{-r} = { u : dist(u, V^c) > r }`, i.e. vertices whose
    /// whole radius-`r` ball lies inside the set.
    pub fn erode(&self, g: &LatticeGraph, r: u64) -> VertexSet {
        let members: Vec<Vertex> = self
            .iter()
            .filter(|&&v| g.ball(v, r).iter().all(|u| self.contains(u)))
            .copied()
            .collect();
        VertexSet::from_sorted(members)
    }

    /// Number of fuzzed-graph edges with exactly one endpoint in the set.
    pub fn edge_boundary_size(&self, g: &LatticeGraph) -> u64 {
        let mut count = 0u64;
        for &v in self.iter() {
            for u in g.neighbors(v) {
                if !self.contains(&u) {
                    count += 1;
                }
            }
        }
        count
    }

    /// Fuzzed distance between two finite sets.
    pub fn dist_to(&self, g: &LatticeGraph, other: &VertexSet) -> u64 {
        let mut best = u64::MAX;
        for &u in self.iter() {
            for &v in other.iter() {
                best = best.min(g.dist(u, v));
            }
        }
        best
    }
}

/// Direction for [`erode_dilate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowDirection {
    Dilate,
    Erode,
}

/// `V^{+r}` (dilate) or `V^{-r}` (erode) as a free function mirroring the
/// method forms.
pub fn erode_dilate(g: &LatticeGraph, v: &VertexSet, r: u64, dir: GrowDirection) -> VertexSet {
    match dir {
        GrowDirection::Dilate => v.dilate(g, r),
        GrowDirection::Erode => v.erode(g, r),
    }
}

/// A graph automorphism: translations, single-axis reflections, and axis
/// permutations. These generate the automorphism group of `Z^d` and `Z_n^d`
/// up to composition; compositions are expressed by applying in sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Automorphism {
    Translation { by: [i64; MAX_DIM] },
    /// Negates coordinate `axis` (about the origin).
    Reflection { axis: usize },
    /// Sends coordinate `i` of the input to coordinate `perm[i]` of the image.
    PermuteAxes { perm: [usize; MAX_DIM] },
}

impl Automorphism {
    pub fn identity() -> Self {
        Automorphism::Translation { by: [0; MAX_DIM] }
    }

    pub fn translation_1d(t: i64) -> Self {
        Automorphism::Translation { by: [t, 0, 0] }
    }

    pub fn swap_xy() -> Self {
        Automorphism::PermuteAxes { perm: [1, 0, 2] }
    }

    pub fn apply(&self, g: &LatticeGraph, v: Vertex) -> Vertex {
        let w = match *self {
            Automorphism::Translation { by } => {
                let mut c = v.0;
                for i in 0..g.d {
                    c[i] += by[i];
                }
                Vertex(c)
            }
            Automorphism::Reflection { axis } => {
                let mut c = v.0;
                c[axis] = -c[axis];
                Vertex(c)
            }
            Automorphism::PermuteAxes { perm } => {
                let mut c = [0i64; MAX_DIM];
                for i in 0..g.d {
                    c[perm[i]] = v.0[i];
                }
                Vertex(c)
            }
        };
        g.canonicalize(w)
    }

    /// Applies and checks that the image lies inside the declared window
    /// (needed when querying infinite kinds through finite windows).
    pub fn apply_in_window(&self, g: &LatticeGraph, v: Vertex, window: &VertexSet) -> Result<Vertex> {
        let w = self.apply(g, v);
        if window.contains(&w) {
            Ok(w)
        } else {
            Err(Error::OutOfWindow)
        }
    }

    pub fn inverse(&self) -> Self {
        match *self {
            Automorphism::Translation { by } => {
                let mut inv = [0i64; MAX_DIM];
                for i in 0..MAX_DIM {
                    inv[i] = -by[i];
                }
                Automorphism::Translation { by: inv }
            }
            Automorphism::Reflection { axis } => Automorphism::Reflection { axis },
            Automorphism::PermuteAxes { perm } => {
                let mut inv = [0usize; MAX_DIM];
                for i in 0..MAX_DIM {
                    inv[perm[i]] = i;
                }
                Automorphism::PermuteAxes { perm: inv }
            }
        }
    }
}

/// Convenience: the ball `Λ_r(v)` as a free function.
pub fn ball(g: &LatticeGraph, v: Vertex, r: u64) -> VertexSet {
    g.ball(v, r)
}
