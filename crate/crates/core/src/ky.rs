//! Knuth-Yao simulation of a finite discrete distribution from a stream of
//! unbiased bits, with resumable stopping-time state.
//!
//! Probabilities are canonicalized to 64-bit dyadic rationals, so the
//! implicit DDG tree is complete by depth 64 and every walk halts within 64
//! bits. At depth d the tree has one leaf per outcome whose d-th binary
//! digit is set; leaves occupy the lowest bit-paths, assigned to outcomes in
//! caller order. The caller-supplied outcome order is therefore part of the
//! contract: the engine's equivariance depends on it.

use crate::error::{Error, Result};

const ONE: u128 = 1u128 << 64;

/// A finite discrete distribution over outcomes 0..len, with probabilities
/// canonicalized to dyadic rationals num/2^64 (round to nearest, deficit
/// folded into the last outcome, or the largest if the last cannot absorb
/// it). Canonicalization bias is below 2^-60 per outcome for inputs that
/// sum to 1 within 1e-12.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDistribution {
    probs: Vec<f64>,
    nums: Vec<u128>,
    /// Leaf count per depth 1..=64.
    leaf_counts: [u64; 65],
}

impl TargetDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Usage("distribution needs at least one outcome".into()));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p) || p.is_nan()) {
            return Err(Error::Usage("probabilities must lie in [0, 1]".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Usage(format!("probabilities sum to {total}, not 1")));
        }
        let mut nums: Vec<u128> = probs
            .iter()
            .map(|&p| (p * 18_446_744_073_709_551_616.0).round() as u128)
            .collect();
        let sum: u128 = nums.iter().sum();
        if sum != ONE {
            let deficit = ONE as i128 - sum as i128;
            let last = nums.len() - 1;
            let target = if nums[last] as i128 + deficit >= 0 {
                last
            } else {
                // last outcome too small to absorb; use the heaviest
                nums.iter().enumerate().max_by_key(|(_, &n)| n).map(|(i, _)| i).unwrap()
            };
            let fixed = nums[target] as i128 + deficit;
            if fixed < 0 {
                return Err(Error::Usage("probabilities too unbalanced to canonicalize".into()));
            }
            nums[target] = fixed as u128;
        }
        let mut leaf_counts = [0u64; 65];
        for &n in &nums {
            if n == ONE {
                continue; // point mass: handled by a pre-halted cursor
            }
            let n = n as u64;
            for d in 1..=64u32 {
                if (n >> (64 - d)) & 1 == 1 {
                    leaf_counts[d as usize] += 1;
                }
            }
        }
        Ok(TargetDistribution { probs, nums, leaf_counts })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// The canonical dyadic probability of outcome `i`.
    pub fn dyadic_prob(&self, i: usize) -> f64 {
        self.nums[i] as f64 / ONE as f64
    }

    /// Shannon entropy (base 2) of the canonical distribution.
    pub fn entropy_bits(&self) -> f64 {
        self.nums
            .iter()
            .map(|&n| {
                if n == 0 {
                    0.0
                } else {
                    let p = n as f64 / ONE as f64;
                    -p * p.log2()
                }
            })
            .sum()
    }

    /// Exact expected number of input bits: sum over depths of
    /// d * leaves(d) * 2^-d.
    pub fn expected_bits(&self) -> f64 {
        (1..=64)
            .map(|d| d as f64 * self.leaf_counts[d] as f64 / 2f64.powi(d as i32))
            .sum()
    }

    /// Leaf depths per outcome (one leaf per set binary digit); the exact
    /// census of the DDG tree.
    pub fn leaf_depths(&self, outcome: usize) -> Vec<u32> {
        let n = self.nums[outcome];
        if n == ONE {
            return vec![0];
        }
        let n = n as u64;
        (1..=64u32).filter(|&d| (n >> (64 - d)) & 1 == 1).collect()
    }

    fn point_mass(&self) -> Option<usize> {
        self.nums.iter().position(|&n| n == ONE)
    }

    /// Index of the c-th outcome (0-based) whose digit at `depth` is set.
    fn leaf_outcome(&self, depth: u32, c: u64) -> usize {
        let mut seen = 0u64;
        for (i, &n) in self.nums.iter().enumerate() {
            if n == ONE {
                continue;
            }
            if ((n as u64) >> (64 - depth)) & 1 == 1 {
                if seen == c {
                    return i;
                }
                seen += 1;
            }
        }
        unreachable!("leaf index out of range")
    }
}

/// Detached walk state over a DDG tree; the distribution is passed to each
/// step so callers can own both separately.
#[derive(Debug, Clone)]
pub struct DdgState {
    depth: u32,
    /// Position among the internal nodes at the current depth.
    pos: u64,
    bits_consumed: u32,
    output: Option<usize>,
}

impl DdgState {
    /// Fresh cursor at the root; a point mass halts immediately with zero
    /// bits consumed.
    pub fn new(dist: &TargetDistribution) -> Self {
        DdgState { depth: 0, pos: 0, bits_consumed: 0, output: dist.point_mass() }
    }

    pub fn is_halted(&self) -> bool {
        self.output.is_some()
    }

    pub fn output(&self) -> Option<usize> {
        self.output
    }

    pub fn bits_consumed(&self) -> u32 {
        self.bits_consumed
    }

    /// Advances one level with one input bit; may halt with an output.
    pub fn step(&mut self, dist: &TargetDistribution, bit: bool) -> Result<()> {
        if self.is_halted() {
            return Err(Error::Usage("stepping a halted simulation".into()));
        }
        let next = self.depth + 1;
        debug_assert!(next <= 64, "dyadic mass must be exhausted by depth 64");
        let child = 2 * self.pos + bit as u64;
        self.bits_consumed += 1;
        let leaves = dist.leaf_counts[next as usize];
        if child < leaves {
            self.output = Some(dist.leaf_outcome(next, child));
        } else {
            self.pos = child - leaves;
        }
        self.depth = next;
        Ok(())
    }
}

/// A resumable walk down the implicit DDG tree. Once halted, further bits
/// never change the output.
#[derive(Debug, Clone)]
pub struct DdgSimulation<'a> {
    dist: &'a TargetDistribution,
    state: DdgState,
}

/// Creates a fresh cursor at the root.
pub fn ddg_new(dist: &TargetDistribution) -> DdgSimulation<'_> {
    DdgSimulation { dist, state: DdgState::new(dist) }
}

impl<'a> DdgSimulation<'a> {
    pub fn is_halted(&self) -> bool {
        self.state.is_halted()
    }

    pub fn output(&self) -> Option<usize> {
        self.state.output()
    }

    pub fn bits_consumed(&self) -> u32 {
        self.state.bits_consumed()
    }

    /// Advances one level with one input bit; may halt with an output.
    pub fn step(&mut self, bit: bool) -> Result<()> {
        self.state.step(self.dist, bit)
    }

    /// Feeds bits until halting; returns the outcome index.
    pub fn run<F: FnMut() -> bool>(&mut self, mut bits: F) -> Result<usize> {
        while !self.is_halted() {
            let b = bits();
            self.step(b)?;
        }
        Ok(self.output().unwrap())
    }
}

/// Empirical total-variation distance between simulated outputs and the
/// target, over `n_samples` runs fed from `bits`.
pub fn ddg_output_distribution_check<F: FnMut() -> bool>(
    dist: &TargetDistribution,
    n_samples: u64,
    mut bits: F,
) -> Result<f64> {
    if n_samples < 10_000 {
        return Err(Error::Usage("distribution check needs at least 10^4 samples".into()));
    }
    let mut counts = vec![0u64; dist.len()];
    for _ in 0..n_samples {
        let mut sim = ddg_new(dist);
        let out = sim.run(&mut bits)?;
        counts[out] += 1;
    }
    let tv = counts
        .iter()
        .zip(dist.probs())
        .map(|(&c, &p)| (c as f64 / n_samples as f64 - p).abs())
        .sum::<f64>()
        / 2.0;
    Ok(tv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Vertex;
    use crate::randomness::{FieldView, SeedTriple};
    use crate::graph::LatticeGraph;

    fn bit_source(seed: u64) -> impl FnMut() -> bool {
        let f = FieldView::new(SeedTriple::new_unchecked(seed), LatticeGraph::line());
        let mut i = 0u64;
        move || {
            i += 1;
            f.unbounded_bit(Vertex::origin(), i)
        }
    }

    #[test]
    fn point_mass_halts_immediately() {
        let d = TargetDistribution::new(vec![1.0]).unwrap();
        let sim = ddg_new(&d);
        assert!(sim.is_halted());
        assert_eq!(sim.output(), Some(0));
        assert_eq!(sim.bits_consumed(), 0);
    }

    #[test]
    fn uniform_pair_needs_exactly_one_bit() {
        let d = TargetDistribution::uniform(2).unwrap();
        for bit in [false, true] {
            let mut sim = ddg_new(&d);
            sim.step(bit).unwrap();
            assert!(sim.is_halted());
            assert_eq!(sim.bits_consumed(), 1);
        }
        assert!((d.expected_bits() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dyadic_leaf_depths() {
        let d = TargetDistribution::new(vec![0.5, 0.25, 0.25]).unwrap();
        assert_eq!(d.leaf_depths(0), vec![1]);
        assert_eq!(d.leaf_depths(1), vec![2]);
        assert_eq!(d.leaf_depths(2), vec![2]);
        // canonical labeling: 0 -> a; 10 -> b; 11 -> c
        let mut sim = ddg_new(&d);
        sim.step(true).unwrap();
        assert!(!sim.is_halted());
        sim.step(false).unwrap();
        assert_eq!(sim.output(), Some(1));
        assert_eq!(sim.bits_consumed(), 2);

        let mut sim = ddg_new(&d);
        sim.step(false).unwrap();
        assert_eq!(sim.output(), Some(0));
    }

    #[test]
    fn two_thirds_expected_bits_is_two() {
        // renewal recurrence E = 1.5 + E/4 gives E = 2 for {2/3, 1/3}
        let d = TargetDistribution::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((d.expected_bits() - 2.0).abs() < 1e-12, "E = {}", d.expected_bits());
    }

    #[test]
    fn expected_bits_within_entropy_plus_two() {
        // 20 seeded random distributions with support <= 16
        let f = FieldView::new(SeedTriple::new_unchecked(77), LatticeGraph::line());
        for t in 0..20u64 {
            let support = 2 + (f.ord_block(Vertex::line(t as i64), 0) % 15) as usize;
            let mut w: Vec<f64> = (0..support)
                .map(|i| {
                    let r = f.ord_block(Vertex::line(t as i64), 1 + i as u64);
                    (r >> 11) as f64 / (1u64 << 53) as f64 + 1e-9
                })
                .collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            let d = TargetDistribution::new(w).unwrap();
            assert!(
                d.expected_bits() <= d.entropy_bits() + 2.0 + 1e-9,
                "E = {}, H = {}",
                d.expected_bits(),
                d.entropy_bits()
            );
        }
    }

    #[test]
    fn stopping_time_replay_invariance() {
        let d = TargetDistribution::new(vec![0.3, 0.45, 0.25]).unwrap();
        let mut bits = bit_source(3);
        for _ in 0..50 {
            // drive to halt, recording the prefix
            let mut prefix = Vec::new();
            let mut sim = ddg_new(&d);
            while !sim.is_halted() {
                let b = bits();
                prefix.push(b);
                sim.step(b).unwrap();
            }
            let (time, out) = (sim.bits_consumed(), sim.output().unwrap());
            // 100 random continuations agree on (time, output)
            let mut cont = bit_source(1000 + time as u64);
            for _ in 0..100 {
                let mut replay = ddg_new(&d);
                let mut i = 0;
                while !replay.is_halted() {
                    let b = if i < prefix.len() { prefix[i] } else { cont() };
                    replay.step(b).unwrap();
                    i += 1;
                }
                assert_eq!(replay.bits_consumed(), time);
                assert_eq!(replay.output(), Some(out));
            }
            // stepping past the halt is a usage error
            assert!(sim.step(true).is_err());
        }
    }

    #[test]
    fn output_distribution_tv() {
        let d = TargetDistribution::new(vec![1.0]).unwrap();
        let tv = ddg_output_distribution_check(&d, 10_000, bit_source(1)).unwrap();
        assert_eq!(tv, 0.0);

        let d = TargetDistribution::new(vec![0.5, 0.25, 0.25]).unwrap();
        let tv = ddg_output_distribution_check(&d, 1_000_000, bit_source(2)).unwrap();
        assert!(tv < 0.003, "tv = {tv}");

        let d = TargetDistribution::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let tv = ddg_output_distribution_check(&d, 1_000_000, bit_source(4)).unwrap();
        assert!(tv < 0.003, "tv = {tv}");
    }

    #[test]
    fn empirical_mean_bits_matches_closed_form() {
        let d = TargetDistribution::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let mut bits = bit_source(9);
        let n = 200_000;
        let mut total = 0u64;
        for _ in 0..n {
            let mut sim = ddg_new(&d);
            sim.run(&mut bits).unwrap();
            total += sim.bits_consumed() as u64;
        }
        let mean = total as f64 / n as f64;
        assert!((mean - 2.0).abs() < 0.02, "mean = {mean}");
    }

    #[test]
    fn rejects_bad_distributions() {
        assert!(TargetDistribution::new(vec![]).is_err());
        assert!(TargetDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(TargetDistribution::new(vec![1.2, -0.2]).is_err());
    }
}
