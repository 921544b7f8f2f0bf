//! Exact specification of the target finitely dependent field: marginal and
//! conditional laws on finite vertex sets, entropy estimates, and the
//! dependence range.
//!
//! Two exact routes compute every law. The brute-force route enumerates all
//! latent configurations on the dependency window and is the oracle of
//! record for cross-checks; the production route runs a transfer recursion
//! along the latent chain with support-pruned descent over outcomes. Both
//! produce identical values (bitwise for dyadic latent laws) and the test
//! suite asserts as much. For cells too large to materialize,
//! [`SequentialLaw`] exposes the same conditional law one site at a time in
//! spatial order.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphKind, LatticeGraph, Vertex};
use crate::ky::TargetDistribution;

/// Capacity ceiling (log2) on latent configurations for materialized queries.
pub const LATENT_CAPACITY_LOG2: f64 = 26.0;

const LAW_CACHE_MAX: usize = 10_000;
const LAW_CACHE_OUTCOMES_MAX: usize = 4_096;
const SUPPORT_CACHE_MAX: usize = 10_000;

/// The process being realized. Labels are alphabet indices; display names
/// live in the run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProcessSpec {
    /// Independent sites with the given single-site law; 0-dependent.
    Iid { probs: Vec<f64> },
    /// One-dimensional block factor X_v = f(Y'_v, ..., Y'_{v+width-1}) of an
    /// i.i.d. latent field; (width-1)-dependent on Z and Z_n.
    BlockFactor {
        latent_probs: Vec<f64>,
        width: usize,
        /// Truth table indexed by the latent window tuple, first offset most
        /// significant: idx = sum_j y_{v+j} * L^(width-1-j).
        map: Vec<u8>,
        alphabet_size: usize,
    },
}

impl ProcessSpec {
    /// The AND block factor X_v = Y'_v & Y'_{v+1} over unbiased latent bits;
    /// the canonical 1-dependent test target.
    pub fn and_process() -> Self {
        ProcessSpec::BlockFactor {
            latent_probs: vec![0.5, 0.5],
            width: 2,
            map: vec![0, 0, 0, 1],
            alphabet_size: 2,
        }
    }

    pub fn iid_uniform_bit() -> Self {
        ProcessSpec::Iid { probs: vec![0.5, 0.5] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessSpec::Iid { probs } => {
                if probs.is_empty() || probs.len() > 255 {
                    return Err(Error::Config("iid alphabet must have 1..=255 labels".into()));
                }
                check_law(probs)?;
            }
            ProcessSpec::BlockFactor { latent_probs, width, map, alphabet_size } => {
                if latent_probs.is_empty() || latent_probs.len() > 16 {
                    return Err(Error::Config("latent alphabet must have 1..=16 labels".into()));
                }
                check_law(latent_probs)?;
                if *width < 2 || *width > 8 {
                    return Err(Error::Config(
                        "block factor width must lie in 2..=8 (width 1 is an iid process)".into(),
                    ));
                }
                let want = latent_probs.len().pow(*width as u32);
                if map.len() != want {
                    return Err(Error::Config(format!(
                        "truth table has {} entries, expected {want}",
                        map.len()
                    )));
                }
                if *alphabet_size == 0 || *alphabet_size > 255 {
                    return Err(Error::Config("alphabet size must be 1..=255".into()));
                }
                if map.iter().any(|&l| l as usize >= *alphabet_size) {
                    return Err(Error::Config("truth table label outside alphabet".into()));
                }
            }
        }
        Ok(())
    }

    pub fn alphabet_size(&self) -> usize {
        match self {
            ProcessSpec::Iid { probs } => probs.len(),
            ProcessSpec::BlockFactor { alphabet_size, .. } => *alphabet_size,
        }
    }

    /// Declared dependence range k.
    pub fn dependence_range(&self) -> u64 {
        match self {
            ProcessSpec::Iid { .. } => 0,
            ProcessSpec::BlockFactor { width, .. } => (*width - 1) as u64,
        }
    }
}

fn check_law(probs: &[f64]) -> Result<()> {
    if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::Config("probabilities must lie in [0,1]".into()));
    }
    let s: f64 = probs.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("probabilities sum to {s}, not 1")));
    }
    Ok(())
}

/// A conditional-law query: the law of `targets` (serialized in the caller's
/// total order) given the labeling of `given`. Targets also appearing in
/// `given` are dropped, matching the convention that S_{V,U,tau} means
/// S_{V minus U, U, tau_U}.
#[derive(Debug, Clone)]
pub struct ConditionalQuery {
    pub targets: Vec<Vertex>,
    pub given: Vec<(Vertex, u8)>,
}

/// A materialized conditional law: `outcomes[i]` is a label tuple aligned
/// with `sites`, listed in lexicographic tuple order; `dist` carries the
/// probabilities in the same order.
#[derive(Debug, Clone)]
pub struct ConditionalLaw {
    pub sites: Vec<Vertex>,
    pub outcomes: Vec<Vec<u8>>,
    pub dist: TargetDistribution,
}

impl ConditionalLaw {
    pub fn outcome_count(&self) -> usize {
        self.outcomes.len()
    }

    /// Probability of a specific label tuple (0 if outside the support).
    pub fn prob_of(&self, tuple: &[u8]) -> f64 {
        match self.outcomes.binary_search_by(|o| o.as_slice().cmp(tuple)) {
            Ok(i) => self.dist.probs()[i],
            Err(_) => 0.0,
        }
    }

    pub fn entropy_bits(&self) -> f64 {
        self.dist.probs().iter().map(|&p| if p > 0.0 { -p * p.log2() } else { 0.0 }).sum()
    }
}

/// Entropy-rate bracket from interval entropies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyBracket {
    pub lower: f64,
    pub upper: f64,
    /// Interval length the bracket was computed at.
    pub len: usize,
}

impl EntropyBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

type QueryKey = (Vec<Vertex>, Vec<(Vertex, u8)>);

/// The oracle: a process spec bound to a graph, with conditional-law caches
/// keyed by translation-canonicalized queries. Reflections are deliberately
/// not canonicalized; reflection symmetry is tested end to end instead.
pub struct Oracle {
    spec: ProcessSpec,
    graph: LatticeGraph,
    law_cache: RefCell<HashMap<QueryKey, Rc<ConditionalLaw>>>,
    support_cache: RefCell<HashMap<QueryKey, Rc<Vec<(Vec<u8>, f64)>>>>,
}

impl Oracle {
    pub fn new(spec: ProcessSpec, graph: LatticeGraph) -> Result<Self> {
        spec.validate()?;
        graph.validate()?;
        if matches!(spec, ProcessSpec::BlockFactor { .. }) && graph.d != 1 {
            return Err(Error::Config("block factors are defined on 1-dimensional graphs".into()));
        }
        Ok(Oracle {
            spec,
            graph,
            law_cache: RefCell::new(HashMap::new()),
            support_cache: RefCell::new(HashMap::new()),
        })
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn graph(&self) -> &LatticeGraph {
        &self.graph
    }

    pub fn alphabet_size(&self) -> usize {
        self.spec.alphabet_size()
    }

    pub fn dependence_range(&self) -> u64 {
        self.spec.dependence_range()
    }

    /// Translation canonicalization: shift the anchor (first target, else
    /// first given site) to the origin.
    fn canonical_key(&self, targets: &[Vertex], given: &[(Vertex, u8)]) -> QueryKey {
        let anchor = targets
            .first()
            .copied()
            .or_else(|| given.first().map(|g| g.0))
            .unwrap_or_else(Vertex::origin);
        let shift = |v: Vertex| {
            let mut c = v.0;
            for i in 0..self.graph.d {
                c[i] -= anchor.0[i];
            }
            self.graph.canonicalize(Vertex(c))
        };
        (
            targets.iter().map(|&v| shift(v)).collect(),
            given.iter().map(|&(v, l)| (shift(v), l)).collect(),
        )
    }

    fn dedupe_query(&self, query: &ConditionalQuery) -> Result<(Vec<Vertex>, Vec<(Vertex, u8)>)> {
        let mut given: Vec<(Vertex, u8)> = Vec::with_capacity(query.given.len());
        for &(v, l) in &query.given {
            let cv = self.graph.canonicalize(v);
            if l as usize >= self.alphabet_size() {
                return Err(Error::Usage("conditioning label outside alphabet".into()));
            }
            match given.iter().find(|(w, _)| *w == cv) {
                Some(&(_, l0)) if l0 != l => {
                    return Err(Error::Usage("conflicting labels in conditioning set".into()))
                }
                Some(_) => {}
                None => given.push((cv, l)),
            }
        }
        let mut targets: Vec<Vertex> = Vec::with_capacity(query.targets.len());
        for &v in &query.targets {
            let cv = self.graph.canonicalize(v);
            if given.iter().any(|(w, _)| *w == cv) {
                continue; // overlap convention: already conditioned
            }
            if targets.contains(&cv) {
                return Err(Error::Usage("duplicate target vertex".into()));
            }
            targets.push(cv);
        }
        Ok((targets, given))
    }

    /// The exact conditional law with outcomes serialized in the query's
    /// target order, enforcing the latent-window capacity ceiling.
    pub fn conditional_distribution(&self, query: &ConditionalQuery) -> Result<Rc<ConditionalLaw>> {
        let (targets, given) = self.dedupe_query(query)?;
        self.check_capacity(&targets, &given)?;
        match self.law_cached(&targets, &given, usize::MAX)? {
            Some(law) => Ok(law),
            None => unreachable!("uncapped materialization cannot give up"),
        }
    }

    /// Engine-facing variant: no latent-window ceiling, but gives up with
    /// `Ok(None)` once the outcome support exceeds `support_cap`; callers
    /// then switch to [`Self::sequential_law`].
    pub fn conditional_distribution_capped(
        &self,
        query: &ConditionalQuery,
        support_cap: usize,
    ) -> Result<Option<Rc<ConditionalLaw>>> {
        let (targets, given) = self.dedupe_query(query)?;
        self.law_cached(&targets, &given, support_cap)
    }

    fn law_cached(
        &self,
        targets: &[Vertex],
        given: &[(Vertex, u8)],
        support_cap: usize,
    ) -> Result<Option<Rc<ConditionalLaw>>> {
        let key = self.canonical_key(targets, given);
        if let Some(hit) = self.law_cache.borrow().get(&key) {
            if key.0 == targets {
                return Ok(Some(Rc::clone(hit)));
            }
            return Ok(Some(Rc::new(ConditionalLaw {
                sites: targets.to_vec(),
                outcomes: hit.outcomes.clone(),
                dist: hit.dist.clone(),
            })));
        }
        let law = match self.compute_law(targets, given, support_cap)? {
            Some(law) => Rc::new(law),
            None => return Ok(None),
        };
        if law.outcome_count() <= LAW_CACHE_OUTCOMES_MAX {
            let mut cache = self.law_cache.borrow_mut();
            if cache.len() < LAW_CACHE_MAX {
                let canonical = Rc::new(ConditionalLaw {
                    sites: key.0.clone(),
                    outcomes: law.outcomes.clone(),
                    dist: law.dist.clone(),
                });
                cache.insert(key, canonical);
            }
        }
        Ok(Some(law))
    }

    fn check_capacity(&self, targets: &[Vertex], given: &[(Vertex, u8)]) -> Result<()> {
        let bits = match &self.spec {
            ProcessSpec::Iid { probs } => (probs.len() as f64).log2() * targets.len() as f64,
            ProcessSpec::BlockFactor { latent_probs, width, .. } => {
                let window = self.latent_window_len(targets, given, *width);
                (latent_probs.len() as f64).log2() * window as f64
            }
        };
        if bits > LATENT_CAPACITY_LOG2 {
            return Err(Error::Capacity(bits));
        }
        Ok(())
    }

    /// Latent window backing the query: the contiguous hull dilated by
    /// width-1 on the line, or the whole cycle on a torus.
    fn latent_window_len(&self, targets: &[Vertex], given: &[(Vertex, u8)], width: usize) -> usize {
        let sites: Vec<i64> =
            targets.iter().map(|v| v.x()).chain(given.iter().map(|g| g.0.x())).collect();
        if sites.is_empty() {
            return 0;
        }
        match self.graph.kind {
            GraphKind::Torus => self.graph.n as usize,
            _ => {
                let lo = *sites.iter().min().unwrap();
                let hi = *sites.iter().max().unwrap();
                (hi - lo) as usize + width
            }
        }
    }

    /// Production route: support-pruned descent with exact transfer weights.
    fn compute_law(
        &self,
        targets: &[Vertex],
        given: &[(Vertex, u8)],
        support_cap: usize,
    ) -> Result<Option<ConditionalLaw>> {
        let support = match self.support(targets, given, support_cap)? {
            Some(s) => s,
            None => return Ok(None),
        };
        let total: f64 = support.iter().map(|&(_, w)| w).sum();
        if total <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        if targets.is_empty() {
            return Ok(Some(ConditionalLaw {
                sites: Vec::new(),
                outcomes: vec![Vec::new()],
                dist: TargetDistribution::new(vec![1.0])?,
            }));
        }
        let mut order: Vec<u32> = (0..support.len() as u32).collect();
        order.sort_unstable_by(|&a, &b| support[a as usize].0.cmp(&support[b as usize].0));
        let outcomes: Vec<Vec<u8>> = order.iter().map(|&i| support[i as usize].0.clone()).collect();
        let probs: Vec<f64> = order.iter().map(|&i| support[i as usize].1 / total).collect();
        Ok(Some(ConditionalLaw {
            sites: targets.to_vec(),
            outcomes,
            dist: TargetDistribution::new(probs)?,
        }))
    }

    /// Raw support of the conditional law: (label tuple in target order,
    /// unnormalized weight). Weights are cached keyed by the spatially
    /// sorted site set; tuples are permuted back to the query order.
    fn support(
        &self,
        targets: &[Vertex],
        given: &[(Vertex, u8)],
        support_cap: usize,
    ) -> Result<Option<Rc<Vec<(Vec<u8>, f64)>>>> {
        let mut sorted_targets = targets.to_vec();
        sorted_targets.sort_unstable();
        let mut sorted_given = given.to_vec();
        sorted_given.sort_unstable();
        let set_key = self.canonical_key(&sorted_targets, &sorted_given);
        let cached = self.support_cache.borrow().get(&set_key).cloned();
        let spatial_support: Rc<Vec<(Vec<u8>, f64)>> = match cached {
            Some(s) => s,
            None => {
                let computed = match &self.spec {
                    ProcessSpec::Iid { probs } => {
                        iid_support(probs, sorted_targets.len(), &sorted_given, support_cap)?
                    }
                    ProcessSpec::BlockFactor { latent_probs, width, map, .. } => {
                        let chain =
                            ChainGeometry::build(&self.graph, &sorted_targets, &sorted_given, *width)?;
                        chain_support(latent_probs, *width, map, &chain, support_cap)?
                    }
                };
                match computed {
                    None => return Ok(None),
                    Some(v) => {
                        let rc = Rc::new(v);
                        let mut cache = self.support_cache.borrow_mut();
                        if cache.len() < SUPPORT_CACHE_MAX {
                            cache.insert(set_key, Rc::clone(&rc));
                        }
                        rc
                    }
                }
            }
        };
        if targets == sorted_targets.as_slice() {
            return Ok(Some(spatial_support));
        }
        let perm: Vec<usize> = targets
            .iter()
            .map(|v| sorted_targets.binary_search(v).expect("target present"))
            .collect();
        let remapped = spatial_support
            .iter()
            .map(|(tuple, w)| (perm.iter().map(|&i| tuple[i]).collect(), *w))
            .collect();
        Ok(Some(Rc::new(remapped)))
    }

    /// Brute-force route: enumerates every latent configuration on the
    /// dependency window, weighting by the latent product law. Slow and
    /// obviously correct; used by the test suite as the oracle of record.
    pub fn conditional_distribution_brute(
        &self,
        query: &ConditionalQuery,
    ) -> Result<ConditionalLaw> {
        let (targets, given) = self.dedupe_query(query)?;
        self.check_capacity(&targets, &given)?;
        let mut mass: HashMap<Vec<u8>, f64> = HashMap::new();
        match &self.spec {
            ProcessSpec::Iid { probs } => {
                for &(_, l) in &given {
                    if probs[l as usize] == 0.0 {
                        return Err(Error::ZeroProbability);
                    }
                }
                let k = targets.len();
                let s = probs.len() as u64;
                let total = s.pow(k as u32);
                for idx in 0..total {
                    let mut tuple = vec![0u8; k];
                    let mut rest = idx;
                    for slot in tuple.iter_mut().rev() {
                        *slot = (rest % s) as u8;
                        rest /= s;
                    }
                    let w: f64 = tuple.iter().map(|&l| probs[l as usize]).product();
                    if w > 0.0 {
                        *mass.entry(tuple).or_insert(0.0) += w;
                    }
                }
            }
            ProcessSpec::BlockFactor { latent_probs, width, map, .. } => {
                let mut sorted_targets = targets.clone();
                sorted_targets.sort_unstable();
                let chain = ChainGeometry::build(&self.graph, &sorted_targets, &given, *width)?;
                let perm: Vec<usize> = targets
                    .iter()
                    .map(|v| sorted_targets.binary_search(v).expect("target present"))
                    .collect();
                let ll = latent_probs.len() as u64;
                let nlat = chain.latent_len;
                let total = ll.pow(nlat as u32);
                let l = latent_probs.len();
                let mut latent = vec![0u8; nlat];
                for idx in 0..total {
                    let mut rest = idx;
                    for slot in latent.iter_mut() {
                        *slot = (rest % ll) as u8;
                        rest /= ll;
                    }
                    let mut w: f64 = latent.iter().map(|&y| latent_probs[y as usize]).product();
                    if w == 0.0 {
                        continue;
                    }
                    let mut sorted_tuple = vec![0u8; sorted_targets.len()];
                    for (pos, role) in chain.roles.iter().enumerate() {
                        let mut mi = 0usize;
                        for j in 0..*width {
                            mi = mi * l + latent[chain.latent_at(pos + j)] as usize;
                        }
                        let label = map[mi];
                        match role {
                            SiteRole::Free => {}
                            SiteRole::Given(tau) => {
                                if label != *tau {
                                    w = 0.0;
                                    break;
                                }
                            }
                            SiteRole::Target(i) => sorted_tuple[*i] = label,
                        }
                    }
                    if w > 0.0 {
                        let tuple: Vec<u8> = perm.iter().map(|&i| sorted_tuple[i]).collect();
                        *mass.entry(tuple).or_insert(0.0) += w;
                    }
                }
            }
        }
        let total: f64 = mass.values().sum();
        if total <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        let mut outcomes: Vec<Vec<u8>> = mass.keys().cloned().collect();
        outcomes.sort_unstable();
        let probs: Vec<f64> = outcomes.iter().map(|o| mass[o] / total).collect();
        Ok(ConditionalLaw { sites: targets, outcomes, dist: TargetDistribution::new(probs)? })
    }

    /// The unconditional joint law on `sites`, serialized in the given order.
    pub fn joint_law(&self, sites: &[Vertex]) -> Result<Rc<ConditionalLaw>> {
        self.conditional_distribution(&ConditionalQuery { targets: sites.to_vec(), given: vec![] })
    }

    /// Exact H(X_F) in bits.
    pub fn marginal_entropy(&self, sites: &[Vertex]) -> Result<f64> {
        Ok(self.joint_law(sites)?.entropy_bits())
    }

    /// Bracket for the entropy rate h(X): upper = H(X_[0,L))/L at the
    /// largest feasible L (non-increasing along intervals); lower =
    /// H(X_[0,L)) - H(X_[0,L-1)). Computed on the infinite line; the rate
    /// is a property of the process, not of the window it runs on.
    pub fn entropy_rate_bracket(&self, max_len: usize) -> Result<EntropyBracket> {
        if max_len < 2 {
            return Err(Error::Usage("bracket needs max_len >= 2".into()));
        }
        let line = Oracle::new(self.spec.clone(), LatticeGraph::line())?;
        let interval = |len: usize| -> Vec<Vertex> { (0..len as i64).map(Vertex::line).collect() };
        let mut len = max_len;
        while line.check_capacity(&interval(len), &[]).is_err() {
            len -= 1;
            if len < 2 {
                return Err(Error::Capacity(f64::INFINITY));
            }
        }
        let h_full = line.marginal_entropy(&interval(len))?;
        let h_prev = line.marginal_entropy(&interval(len - 1))?;
        Ok(EntropyBracket { lower: h_full - h_prev, upper: h_full / len as f64, len })
    }

    /// Declared dependence range, verified exactly on small windows: at
    /// separation > k the joint factorizes into the product of marginals,
    /// and for block factors adjacent sites must show dependence.
    pub fn dependence_range_verified(&self) -> Result<u64> {
        let k = self.spec.dependence_range();
        let line = Oracle::new(self.spec.clone(), LatticeGraph::line())?;
        let u = Vertex::line(0);
        let v = Vertex::line(k as i64 + 1);
        let joint = line.joint_law(&[u, v])?;
        let mu = line.joint_law(&[u])?;
        let mv = line.joint_law(&[v])?;
        for (i, outcome) in joint.outcomes.iter().enumerate() {
            let product = mu.prob_of(&outcome[..1]) * mv.prob_of(&outcome[1..]);
            if (joint.dist.probs()[i] - product).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "declared range {k} fails: joint differs from product at separation {}",
                    k + 1
                )));
            }
        }
        Ok(k)
    }

    /// Largest delta such that every interval F with |dF| <= delta |F| has
    /// H(X_F)/|F| <= h_upper + eps, from a census of interval entropies.
    /// Infinite for iid processes.
    pub fn delta_for_entropy_slack(&self, eps: f64, max_len: usize) -> Result<f64> {
        if matches!(self.spec, ProcessSpec::Iid { .. }) {
            return Ok(f64::INFINITY);
        }
        let bracket = self.entropy_rate_bracket(max_len)?;
        let target = bracket.upper + eps;
        let line = Oracle::new(self.spec.clone(), LatticeGraph::line())?;
        for len in 1..=bracket.len {
            let sites: Vec<Vertex> = (0..len as i64).map(Vertex::line).collect();
            let h = line.marginal_entropy(&sites)?;
            if h / len as f64 <= target + 1e-12 {
                // per-site interval entropy is non-increasing, so every
                // longer interval also satisfies the bound; an interval has
                // |dF| = 2, making the ratio threshold 2/len.
                return Ok(2.0 / len as f64);
            }
        }
        Ok(2.0 / bracket.len as f64)
    }

    /// Sequential access to the conditional law for cells too large to
    /// materialize; sites are visited in spatial order.
    pub fn sequential_law(
        &self,
        targets: &[Vertex],
        given: &[(Vertex, u8)],
    ) -> Result<SequentialLaw> {
        let (targets, given) = self
            .dedupe_query(&ConditionalQuery { targets: targets.to_vec(), given: given.to_vec() })?;
        let mut spatial = targets;
        spatial.sort_unstable();
        match &self.spec {
            ProcessSpec::Iid { probs } => {
                for &(_, l) in &given {
                    if probs[l as usize] == 0.0 {
                        return Err(Error::ZeroProbability);
                    }
                }
                Ok(SequentialLaw {
                    sites: spatial,
                    inner: SeqInner::Iid { probs: probs.clone() },
                    assigned: Vec::new(),
                })
            }
            ProcessSpec::BlockFactor { latent_probs, width, map, .. } => {
                let chain = ChainGeometry::build(&self.graph, &spatial, &given, *width)?;
                let walker = ChainWalker::new(latent_probs, *width, map, chain)?;
                Ok(SequentialLaw {
                    sites: spatial,
                    inner: SeqInner::Chain(Box::new(walker)),
                    assigned: Vec::new(),
                })
            }
        }
    }
}

/// The exact conditional law of each target site given the ones already
/// assigned (spatial order); drives the interval simulation for large cells.
pub struct SequentialLaw {
    sites: Vec<Vertex>,
    inner: SeqInner,
    assigned: Vec<u8>,
}

enum SeqInner {
    Iid { probs: Vec<f64> },
    Chain(Box<ChainWalker>),
}

impl SequentialLaw {
    pub fn sites(&self) -> &[Vertex] {
        &self.sites
    }

    pub fn is_done(&self) -> bool {
        self.assigned.len() == self.sites.len()
    }

    pub fn assigned(&self) -> &[u8] {
        &self.assigned
    }

    /// Law of the next unassigned site given everything so far.
    pub fn next_conditional(&mut self) -> Result<Vec<f64>> {
        debug_assert!(!self.is_done());
        match &mut self.inner {
            SeqInner::Iid { probs } => Ok(probs.clone()),
            SeqInner::Chain(w) => w.next_conditional(),
        }
    }

    pub fn advance(&mut self, label: u8) -> Result<()> {
        debug_assert!(!self.is_done());
        if let SeqInner::Chain(w) = &mut self.inner {
            w.advance(label)?;
        }
        self.assigned.push(label);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Chain machinery for 1-d block factors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum SiteRole {
    Free,
    Given(u8),
    Target(usize),
}

/// Geometry of the latent chain backing a 1-d query: a line hull, or the
/// whole cycle when the site set wraps the torus too tightly to leave a
/// latent-window gap. Position p emits the site at index p of `roles` and
/// consumes the latent at index p + width - 1 (cyclically wrapped onto the
/// initial boundary digits in cyclic mode).
struct ChainGeometry {
    roles: Vec<SiteRole>,
    latent_len: usize,
    cyclic: bool,
}

impl ChainGeometry {
    fn latent_at(&self, pos: usize) -> usize {
        if self.cyclic {
            pos % self.latent_len
        } else {
            pos
        }
    }

    /// `targets` must be spatially sorted; `SiteRole::Target(i)` refers to
    /// the i-th sorted target.
    fn build(
        graph: &LatticeGraph,
        targets: &[Vertex],
        given: &[(Vertex, u8)],
        width: usize,
    ) -> Result<ChainGeometry> {
        let mut sites: Vec<(i64, SiteRole)> = Vec::with_capacity(targets.len() + given.len());
        for (i, v) in targets.iter().enumerate() {
            sites.push((v.x(), SiteRole::Target(i)));
        }
        for &(v, l) in given {
            sites.push((v.x(), SiteRole::Given(l)));
        }
        if sites.is_empty() {
            return Ok(ChainGeometry { roles: vec![], latent_len: 0, cyclic: false });
        }
        sites.sort_unstable_by_key(|s| s.0);
        match graph.kind {
            GraphKind::Torus => {
                let n = graph.n as i64;
                let coords: Vec<i64> = sites.iter().map(|s| s.0).collect();
                let mut best_gap = -1i64;
                let mut cut = 0usize;
                for i in 0..coords.len() {
                    let gap = if coords.len() == 1 {
                        n
                    } else {
                        (coords[(i + 1) % coords.len()] - coords[i]).rem_euclid(n)
                    };
                    if gap > best_gap {
                        best_gap = gap;
                        cut = (i + 1) % coords.len();
                    }
                }
                if best_gap as usize > width {
                    // unwrap the arc onto a line starting at the cut
                    let start = coords[cut];
                    let mut arc: Vec<(i64, SiteRole)> =
                        sites.iter().map(|&(x, r)| ((x - start).rem_euclid(n), r)).collect();
                    arc.sort_unstable_by_key(|s| s.0);
                    Ok(Self::line_geometry(&arc, width))
                } else {
                    let mut roles = vec![SiteRole::Free; n as usize];
                    for &(x, r) in &sites {
                        roles[x as usize] = r;
                    }
                    Ok(ChainGeometry { roles, latent_len: n as usize, cyclic: true })
                }
            }
            _ => Ok(Self::line_geometry(&sites, width)),
        }
    }

    fn line_geometry(sorted: &[(i64, SiteRole)], width: usize) -> ChainGeometry {
        let lo = sorted[0].0;
        let hi = sorted[sorted.len() - 1].0;
        let site_len = (hi - lo) as usize + 1;
        let mut roles = vec![SiteRole::Free; site_len];
        for &(x, r) in sorted {
            roles[(x - lo) as usize] = r;
        }
        ChainGeometry { roles, latent_len: site_len + width - 1, cyclic: false }
    }
}

/// Latent-state bookkeeping shared by the transfer routines. The running
/// state holds the last width-1 latent values, oldest most significant; in
/// cyclic mode the state is augmented with the initial boundary digits.
#[derive(Clone, Copy)]
struct ChainDims {
    l: usize,
    width: usize,
    mem: usize,
    cyclic: bool,
    latent_len: usize,
}

impl ChainDims {
    fn new(l: usize, width: usize, chain: &ChainGeometry) -> Self {
        ChainDims {
            l,
            width,
            mem: l.pow((width - 1) as u32),
            cyclic: chain.cyclic,
            latent_len: chain.latent_len,
        }
    }

    fn states(&self) -> usize {
        if self.cyclic {
            self.mem * self.mem
        } else {
            self.mem
        }
    }

    fn split(&self, state: usize) -> (usize, usize) {
        if self.cyclic {
            (state / self.mem, state % self.mem)
        } else {
            (0, state)
        }
    }

    fn join(&self, boundary: usize, cur: usize) -> usize {
        if self.cyclic {
            boundary * self.mem + cur
        } else {
            cur
        }
    }

    /// Latent values admissible at `pos`: either all of 0..l, or the single
    /// boundary digit forced when the cycle closes.
    fn latent_range(&self, pos: usize, boundary: usize) -> (usize, usize, bool) {
        let consumed = pos + self.width - 1;
        if self.cyclic && consumed >= self.latent_len {
            let digit_idx = consumed - self.latent_len;
            let shift = self.width - 2 - digit_idx;
            let y = (boundary / self.l.pow(shift as u32)) % self.l;
            (y, y + 1, true)
        } else {
            (0, self.l, false)
        }
    }

    fn next_cur(&self, cur: usize, y: usize) -> usize {
        (cur % self.l.pow((self.width - 2) as u32)) * self.l + y
    }

    /// Initial state weights: boundary digits drawn from the latent law in
    /// cyclic mode, the first width-1 line latents otherwise.
    fn initial_weights(&self, latent_probs: &[f64]) -> Vec<f64> {
        let mut weights = vec![0.0f64; self.states()];
        for tuple in 0..self.mem {
            let mut w = 1.0;
            let mut rest = tuple;
            for _ in 0..self.width - 1 {
                w *= latent_probs[rest % self.l];
                rest /= self.l;
            }
            if self.cyclic {
                weights[tuple * self.mem + tuple] = w;
            } else {
                weights[tuple] = w;
            }
        }
        weights
    }
}

/// Support-pruned descent over target assignments with transfer weights.
fn chain_support(
    latent_probs: &[f64],
    width: usize,
    map: &[u8],
    chain: &ChainGeometry,
    support_cap: usize,
) -> Result<Option<Vec<(Vec<u8>, f64)>>> {
    if chain.roles.is_empty() {
        return Ok(Some(vec![(Vec::new(), 1.0)]));
    }
    let dims = ChainDims::new(latent_probs.len(), width, chain);
    let n_targets = chain.roles.iter().filter(|r| matches!(r, SiteRole::Target(_))).count();
    let weights = dims.initial_weights(latent_probs);
    let mut out: Vec<(Vec<u8>, f64)> = Vec::new();
    let mut assignment = vec![0u8; n_targets];
    let overflow = descend(
        latent_probs,
        map,
        chain,
        &dims,
        0,
        &weights,
        &mut assignment,
        &mut out,
        support_cap,
    );
    if overflow {
        return Ok(None);
    }
    Ok(Some(out))
}

/// Returns true if the support cap was exceeded.
#[allow(clippy::too_many_arguments)]
fn descend(
    latent_probs: &[f64],
    map: &[u8],
    chain: &ChainGeometry,
    dims: &ChainDims,
    pos: usize,
    weights: &[f64],
    assignment: &mut Vec<u8>,
    out: &mut Vec<(Vec<u8>, f64)>,
    support_cap: usize,
) -> bool {
    if out.len() > support_cap {
        return true;
    }
    if pos == chain.roles.len() {
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            out.push((assignment.clone(), total));
        }
        return out.len() > support_cap;
    }
    let role = chain.roles[pos];
    let mut per_label: HashMap<u8, Vec<f64>> = HashMap::new();
    for (state, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let (boundary, cur) = dims.split(state);
        let (y_lo, y_hi, forced) = dims.latent_range(pos, boundary);
        for y in y_lo..y_hi {
            let p = if forced { 1.0 } else { latent_probs[y] };
            if p == 0.0 {
                continue;
            }
            let label = map[cur * dims.l + y];
            if let SiteRole::Given(tau) = role {
                if label != tau {
                    continue;
                }
            }
            let nstate = dims.join(boundary, dims.next_cur(cur, y));
            let key = if matches!(role, SiteRole::Target(_)) { label } else { 0 };
            per_label.entry(key).or_insert_with(|| vec![0.0; weights.len()])[nstate] += w * p;
        }
    }
    match role {
        SiteRole::Target(i) => {
            let mut labels: Vec<u8> = per_label.keys().copied().collect();
            labels.sort_unstable();
            for label in labels {
                assignment[i] = label;
                if descend(
                    latent_probs,
                    map,
                    chain,
                    dims,
                    pos + 1,
                    &per_label[&label],
                    assignment,
                    out,
                    support_cap,
                ) {
                    return true;
                }
            }
            false
        }
        _ => match per_label.get(&0) {
            Some(w) => descend(
                latent_probs,
                map,
                chain,
                dims,
                pos + 1,
                w,
                assignment,
                out,
                support_cap,
            ),
            None => false,
        },
    }
}

fn iid_support(
    probs: &[f64],
    n_targets: usize,
    given: &[(Vertex, u8)],
    support_cap: usize,
) -> Result<Option<Vec<(Vec<u8>, f64)>>> {
    for &(_, l) in given {
        if probs[l as usize] == 0.0 {
            return Err(Error::ZeroProbability);
        }
    }
    let live: Vec<u8> = (0..probs.len()).filter(|&i| probs[i] > 0.0).map(|i| i as u8).collect();
    if (live.len() as f64).powi(n_targets as i32) > support_cap as f64 {
        return Ok(None);
    }
    let mut out: Vec<(Vec<u8>, f64)> = vec![(Vec::new(), 1.0)];
    for _ in 0..n_targets {
        let mut next = Vec::with_capacity(out.len() * live.len());
        for (tuple, w) in &out {
            for &label in &live {
                let mut t = Vec::with_capacity(tuple.len() + 1);
                t.extend_from_slice(tuple);
                t.push(label);
                next.push((t, w * probs[label as usize]));
            }
        }
        out = next;
    }
    Ok(Some(out))
}

/// Streaming forward pass over the latent chain with a precomputed backward
/// table; yields single-site conditionals in spatial order.
struct ChainWalker {
    latent_probs: Vec<f64>,
    map: Vec<u8>,
    roles: Vec<SiteRole>,
    dims: ChainDims,
    /// beta[pos][state]: relative probability of satisfying every Given
    /// constraint at positions >= pos, from `state` after position pos-1.
    beta: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    pos: usize,
}

impl ChainWalker {
    fn new(latent_probs: &[f64], width: usize, map: &[u8], chain: ChainGeometry) -> Result<Self> {
        let dims = ChainDims::new(latent_probs.len(), width, &chain);
        let total = chain.roles.len();
        let mut beta = vec![vec![1.0f64; dims.states()]; total + 1];
        for pos in (0..total).rev() {
            let role = chain.roles[pos];
            let mut row = vec![0.0f64; dims.states()];
            for state in 0..dims.states() {
                let (boundary, cur) = dims.split(state);
                let (y_lo, y_hi, forced) = dims.latent_range(pos, boundary);
                let mut acc = 0.0;
                for y in y_lo..y_hi {
                    let p = if forced { 1.0 } else { latent_probs[y] };
                    if p == 0.0 {
                        continue;
                    }
                    let label = map[cur * dims.l + y];
                    if let SiteRole::Given(tau) = role {
                        if label != tau {
                            continue;
                        }
                    }
                    acc += p * beta[pos + 1][dims.join(boundary, dims.next_cur(cur, y))];
                }
                row[state] = acc;
            }
            let mx = row.iter().cloned().fold(0.0f64, f64::max);
            if mx > 0.0 {
                for v in row.iter_mut() {
                    *v /= mx;
                }
            }
            beta[pos] = row;
        }
        let alpha = dims.initial_weights(latent_probs);
        let feasible: f64 = alpha.iter().zip(beta[0].iter()).map(|(a, b)| a * b).sum();
        if feasible <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        Ok(ChainWalker {
            latent_probs: latent_probs.to_vec(),
            map: map.to_vec(),
            roles: chain.roles,
            dims,
            beta,
            alpha,
            pos: 0,
        })
    }

    /// Advances alpha through Free/Given positions up to the next target.
    fn roll_to_target(&mut self) -> Result<()> {
        while self.pos < self.roles.len() {
            let role = self.roles[self.pos];
            if matches!(role, SiteRole::Target(_)) {
                return Ok(());
            }
            let mut next = vec![0.0f64; self.alpha.len()];
            self.push_forward(role, None, &mut next);
            if next.iter().sum::<f64>() <= 0.0 {
                return Err(Error::ZeroProbability);
            }
            normalize(&mut next);
            self.alpha = next;
            self.pos += 1;
        }
        Err(Error::Usage("sequential law advanced past its last site".into()))
    }

    /// One forward transition at `self.pos`, optionally filtered to
    /// transitions emitting `only_label`.
    fn push_forward(&self, role: SiteRole, only_label: Option<u8>, next: &mut [f64]) {
        for (state, &a) in self.alpha.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let (boundary, cur) = self.dims.split(state);
            let (y_lo, y_hi, forced) = self.dims.latent_range(self.pos, boundary);
            for y in y_lo..y_hi {
                let p = if forced { 1.0 } else { self.latent_probs[y] };
                if p == 0.0 {
                    continue;
                }
                let label = self.map[cur * self.dims.l + y];
                if let SiteRole::Given(tau) = role {
                    if label != tau {
                        continue;
                    }
                }
                if let Some(want) = only_label {
                    if label != want {
                        continue;
                    }
                }
                next[self.dims.join(boundary, self.dims.next_cur(cur, y))] += a * p;
            }
        }
    }

    fn next_conditional(&mut self) -> Result<Vec<f64>> {
        self.roll_to_target()?;
        let nlabels = self.map.iter().copied().max().unwrap_or(0) as usize + 1;
        let mut mass = vec![0.0f64; nlabels];
        for (state, &a) in self.alpha.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let (boundary, cur) = self.dims.split(state);
            let (y_lo, y_hi, forced) = self.dims.latent_range(self.pos, boundary);
            for y in y_lo..y_hi {
                let p = if forced { 1.0 } else { self.latent_probs[y] };
                if p == 0.0 {
                    continue;
                }
                let label = self.map[cur * self.dims.l + y];
                let nstate = self.dims.join(boundary, self.dims.next_cur(cur, y));
                mass[label as usize] += a * p * self.beta[self.pos + 1][nstate];
            }
        }
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        for m in mass.iter_mut() {
            *m /= total;
        }
        Ok(mass)
    }

    fn advance(&mut self, chosen: u8) -> Result<()> {
        self.roll_to_target()?;
        let role = self.roles[self.pos];
        let mut next = vec![0.0f64; self.alpha.len()];
        self.push_forward(role, Some(chosen), &mut next);
        if next.iter().sum::<f64>() <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        normalize(&mut next);
        self.alpha = next;
        self.pos += 1;
        Ok(())
    }
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn and_on_line() -> Oracle {
        Oracle::new(ProcessSpec::and_process(), LatticeGraph::line()).unwrap()
    }

    fn v(x: i64) -> Vertex {
        Vertex::line(x)
    }

    #[test]
    fn and_single_site_marginal() {
        let o = and_on_line();
        let law = o.joint_law(&[v(0)]).unwrap();
        assert_eq!(law.outcomes, vec![vec![0], vec![1]]);
        assert_eq!(law.dist.probs(), &[0.75, 0.25]);
    }

    #[test]
    fn and_conditional_next_given_one() {
        let o = and_on_line();
        let law = o
            .conditional_distribution(&ConditionalQuery {
                targets: vec![v(1)],
                given: vec![(v(0), 1)],
            })
            .unwrap();
        assert_eq!(law.dist.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn and_pair_independence_at_distance_two() {
        let o = and_on_line();
        let joint = o.joint_law(&[v(0), v(2)]).unwrap();
        assert!((joint.prob_of(&[1, 1]) - 1.0 / 16.0).abs() < 1e-15);
        let adjacent = o.joint_law(&[v(0), v(1)]).unwrap();
        assert!((adjacent.prob_of(&[1, 1]) - 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn and_marginal_entropy() {
        let o = and_on_line();
        let h1 = o.marginal_entropy(&[v(0)]).unwrap();
        let expect = -(0.25f64.log2()) * 0.25 - (0.75f64.log2()) * 0.75;
        assert!((h1 - expect).abs() < 1e-12);
        assert!((expect - 0.8112781244591328).abs() < 1e-12);
    }

    #[test]
    fn iid_trivia() {
        let o = Oracle::new(ProcessSpec::iid_uniform_bit(), LatticeGraph::line()).unwrap();
        let law = o.joint_law(&[v(0)]).unwrap();
        assert_eq!(law.dist.probs(), &[0.5, 0.5]);
        let h5 = o.marginal_entropy(&(0..5).map(v).collect::<Vec<_>>()).unwrap();
        assert!((h5 - 5.0).abs() < 1e-9);
        let b = o.entropy_rate_bracket(8).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-9 && (b.upper - 1.0).abs() < 1e-9);
        assert_eq!(o.dependence_range_verified().unwrap(), 0);
    }

    #[test]
    fn point_mass_process_bracket() {
        let o = Oracle::new(ProcessSpec::Iid { probs: vec![1.0] }, LatticeGraph::line()).unwrap();
        let b = o.entropy_rate_bracket(6).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
    }

    #[test]
    fn and_entropy_bracket_tightens() {
        let o = and_on_line();
        let b12 = o.entropy_rate_bracket(12).unwrap();
        assert!(b12.lower <= b12.upper);
        // frozen from this computation: width(12) = 0.01271...
        assert!((b12.width() - 0.012714767530407).abs() < 1e-9, "width = {}", b12.width());
        let b16 = o.entropy_rate_bracket(16).unwrap();
        assert!(b16.width() < 0.01, "width = {}", b16.width());
        // upper ends decrease with L; conditional-entropy ends too
        assert!(b16.upper <= b12.upper && b16.lower <= b12.lower + 1e-12);
        assert!(b16.lower > 0.5 && b16.upper < 0.8113);
    }

    #[test]
    fn and_dependence_range_verified() {
        assert_eq!(and_on_line().dependence_range_verified().unwrap(), 1);
    }

    #[test]
    fn infeasible_conditioning_is_zero_probability() {
        let o = and_on_line();
        // (1,0,1) is an impossible AND pattern
        let err = o
            .conditional_distribution(&ConditionalQuery {
                targets: vec![v(5)],
                given: vec![(v(0), 1), (v(1), 0), (v(2), 1)],
            })
            .unwrap_err();
        assert!(matches!(err, Error::ZeroProbability));
    }

    #[test]
    fn capacity_ceiling_enforced() {
        let o = and_on_line();
        let wide: Vec<Vertex> = vec![v(0), v(40)];
        let err = o.joint_law(&wide).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
    }

    #[test]
    fn production_route_matches_brute_force_exactly() {
        // dyadic latent: bitwise equality of every probability
        let graphs = [LatticeGraph::line(), LatticeGraph::torus(1, 11)];
        for g in graphs {
            let o = Oracle::new(ProcessSpec::and_process(), g).unwrap();
            let cases: Vec<(Vec<Vertex>, Vec<(Vertex, u8)>)> = vec![
                (vec![v(3), v(0), v(7)], vec![]),
                (vec![v(2)], vec![(v(0), 1), (v(1), 1)]),
                (vec![v(0), v(1), v(2)], vec![(v(4), 0)]),
                (vec![v(5), v(9)], vec![(v(7), 1), (v(8), 1)]),
            ];
            for (targets, given) in cases {
                let q = ConditionalQuery { targets, given };
                let fast = o.conditional_distribution(&q).unwrap();
                let brute = o.conditional_distribution_brute(&q).unwrap();
                assert_eq!(fast.outcomes, brute.outcomes);
                assert_eq!(fast.dist.probs(), brute.dist.probs());
            }
        }
    }

    #[test]
    fn non_dyadic_latent_matches_brute_force() {
        let spec = ProcessSpec::BlockFactor {
            latent_probs: vec![0.3, 0.7],
            width: 3,
            map: vec![0, 1, 1, 0, 1, 0, 0, 1], // parity of the window
            alphabet_size: 2,
        };
        for g in [LatticeGraph::line(), LatticeGraph::torus(1, 9)] {
            let o = Oracle::new(spec.clone(), g).unwrap();
            let q = ConditionalQuery {
                targets: vec![v(1), v(4)],
                given: vec![(v(2), 1)],
            };
            let fast = o.conditional_distribution(&q).unwrap();
            let brute = o.conditional_distribution_brute(&q).unwrap();
            assert_eq!(fast.outcomes, brute.outcomes);
            for (a, b) in fast.dist.probs().iter().zip(brute.dist.probs()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conditional_consistency_chain_rule() {
        // sum over tau of P(V|U=tau) P(U=tau) = P(U union V)
        let o = and_on_line();
        let u_sites = [v(0), v(1)];
        let v_sites = [v(2), v(3)];
        let mu = o.joint_law(&u_sites).unwrap();
        let joint = o.joint_law(&[v(0), v(1), v(2), v(3)]).unwrap();
        for (ji, jt) in joint.outcomes.iter().enumerate() {
            let tau = &jt[..2];
            let rest = &jt[2..];
            let cond = o
                .conditional_distribution(&ConditionalQuery {
                    targets: v_sites.to_vec(),
                    given: vec![(v(0), tau[0]), (v(1), tau[1])],
                })
                .unwrap();
            let chained = cond.prob_of(rest) * mu.prob_of(tau);
            assert!(
                (chained - joint.dist.probs()[ji]).abs() < 1e-12,
                "chain rule violated at {jt:?}"
            );
        }
    }

    #[test]
    fn separated_cells_conditionally_independent() {
        // cells {0,1}, {3,4}, {6,7} at pairwise distance >= 2; given the
        // conditioning sites, the cell laws multiply.
        let o = and_on_line();
        let given = vec![(v(0), 1u8), (v(3), 0u8), (v(6), 0u8)];
        let all = o
            .conditional_distribution(&ConditionalQuery {
                targets: vec![v(1), v(4), v(7)],
                given: given.clone(),
            })
            .unwrap();
        let singles: Vec<_> = [(v(1), v(0), 1u8), (v(4), v(3), 0u8), (v(7), v(6), 0u8)]
            .iter()
            .map(|&(t, u, tau)| {
                o.conditional_distribution(&ConditionalQuery {
                    targets: vec![t],
                    given: vec![(u, tau)],
                })
                .unwrap()
            })
            .collect();
        for (i, outcome) in all.outcomes.iter().enumerate() {
            let p = all.dist.probs()[i];
            let prod: f64 =
                (0..3).map(|j| singles[j].prob_of(&outcome[j..j + 1])).product();
            assert!((p - prod).abs() < 1e-12, "factorization fails at {outcome:?}");
        }
    }

    #[test]
    fn translation_invariance_bitwise() {
        let o = and_on_line();
        let a = o
            .conditional_distribution(&ConditionalQuery {
                targets: vec![v(2), v(4)],
                given: vec![(v(3), 1)],
            })
            .unwrap();
        let b = o
            .conditional_distribution(&ConditionalQuery {
                targets: vec![v(102), v(104)],
                given: vec![(v(103), 1)],
            })
            .unwrap();
        assert_eq!(a.outcomes, b.outcomes);
        assert_eq!(a.dist.probs(), b.dist.probs());
    }

    #[test]
    fn overlap_convention_drops_conditioned_targets() {
        let o = and_on_line();
        let law = o
            .conditional_distribution(&ConditionalQuery {
                targets: vec![v(0), v(1)],
                given: vec![(v(0), 1)],
            })
            .unwrap();
        assert_eq!(law.sites, vec![v(1)]);
        assert_eq!(law.dist.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn sequential_law_matches_materialized() {
        let specs = [
            ProcessSpec::and_process(),
            ProcessSpec::BlockFactor {
                latent_probs: vec![0.25, 0.75],
                width: 2,
                map: vec![0, 1, 1, 1], // OR
                alphabet_size: 2,
            },
        ];
        for spec in specs {
            for g in [LatticeGraph::line(), LatticeGraph::torus(1, 10)] {
                let o = Oracle::new(spec.clone(), g).unwrap();
                let targets = vec![v(0), v(1), v(2), v(5)];
                let given = vec![(v(3), 0u8)];
                let law = o
                    .conditional_distribution(&ConditionalQuery {
                        targets: targets.clone(),
                        given: given.clone(),
                    })
                    .unwrap();
                // spatial order equals target order here
                for (oi, outcome) in law.outcomes.iter().enumerate() {
                    let mut seq = o.sequential_law(&targets, &given).unwrap();
                    let mut p = 1.0;
                    for (site_i, &label) in outcome.iter().enumerate() {
                        let cond = seq.next_conditional().unwrap();
                        p *= cond[label as usize];
                        if site_i + 1 < outcome.len() {
                            seq.advance(label).unwrap();
                        }
                    }
                    assert!(
                        (p - law.dist.probs()[oi]).abs() < 1e-12,
                        "sequential chain product mismatch at {outcome:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn whole_cycle_chain_handles_wraparound() {
        // every site of a small torus: cyclic transfer with boundary closure
        let g = LatticeGraph::torus(1, 8);
        let o = Oracle::new(ProcessSpec::and_process(), g).unwrap();
        let all: Vec<Vertex> = (0..8).map(v).collect();
        let fast = o.joint_law(&all).unwrap();
        let brute = o
            .conditional_distribution_brute(&ConditionalQuery { targets: all, given: vec![] })
            .unwrap();
        assert_eq!(fast.outcomes, brute.outcomes);
        assert_eq!(fast.dist.probs(), brute.dist.probs());
        // no isolated zero between ones on the cycle, so e.g. 10100000 is out
        assert_eq!(fast.prob_of(&[1, 0, 1, 0, 0, 0, 0, 0]), 0.0);
    }

    #[test]
    fn capped_materialization_gives_up_gracefully() {
        let o = and_on_line();
        let targets: Vec<Vertex> = (0..24).map(v).collect();
        let capped = o
            .conditional_distribution_capped(
                &ConditionalQuery { targets: targets.clone(), given: vec![] },
                16,
            )
            .unwrap();
        assert!(capped.is_none());
        let full = o
            .conditional_distribution_capped(
                &ConditionalQuery { targets, given: vec![] },
                1 << 20,
            )
            .unwrap();
        assert!(full.is_some());
    }
}
