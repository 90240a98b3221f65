//! NUTS with slice-defined acceptable states and recycling of those states.
//!
//! The trajectory is a complete binary tree of `2^d` states in spatial
//! order, the start included. A state is acceptable when its joint
//! log-density exceeds the slice level. The next state is uniform over the
//! acceptable set `𝒜`, and recycled draws come from `𝒜` as well.
//!
//! Every subtree carries a bag summarizing its acceptable states; bags
//! are merged bottom-up while the tree is built, so the evenly-spread
//! scheme never holds more than `K` slots per live subtree.

use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{invalid, Error};
use crate::hmc::{accept_probability_log, Diagnostics, IterationBatch, RecycledDraw};
use crate::integrator::leapfrog_step;
use crate::linalg::dot;
use crate::phase::{MassMatrix, PhasePoint};
use crate::streams::ChainStreams;
use crate::targets::TargetDensity;

/// Energy drop (log-density units) beyond which a leaf counts as divergent.
pub const MAX_ENERGY_DROP: f64 = 1000.0;

/// How acceptable states are turned into recycled draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecycleStrategy {
    None,
    /// `K` draws without replacement from `𝒜` (all of `𝒜` if smaller).
    Simple(usize),
    /// All of `𝒜`, each with weight `1/|𝒜|`. Stores the whole set.
    RaoBlackwell,
    /// Exactly `K` draws spread over the tree in proportion to the
    /// acceptable counts of its subtrees.
    EvenlySpread(usize),
    /// Every leaf built, each accepted or rejected against the start as in
    /// recycled HMC. Not a valid scheme; kept as a negative control.
    AllLeaves,
}

impl RecycleStrategy {
    pub fn validate(&self) -> Result<(), Error> {
        match *self {
            RecycleStrategy::Simple(0) | RecycleStrategy::EvenlySpread(0) => {
                Err(invalid("number of recycled draws must be at least 1"))
            }
            _ => Ok(()),
        }
    }
}

/// Slice level `log u = log π(z₀) − e` with `e ~ Exp(1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SliceVariable {
    pub log_u: f64,
}

impl SliceVariable {
    pub fn admits(&self, z: &PhasePoint) -> bool {
        z.joint_log_density() > self.log_u
    }
}

pub fn draw_slice<R: Rng + ?Sized>(z0: &PhasePoint, rng: &mut R) -> SliceVariable {
    let e: f64 = Exp1.sample(rng);
    SliceVariable {
        log_u: z0.joint_log_density() - e,
    }
}

/// `(θ⁺ − θ⁻)ᵀ M⁻¹ p⁻ < 0` or `(θ⁺ − θ⁻)ᵀ M⁻¹ p⁺ < 0`.
pub fn uturn(left: &PhasePoint, right: &PhasePoint, mass: &MassMatrix) -> bool {
    let span: Vec<f64> = right
        .theta()
        .iter()
        .zip(left.theta())
        .map(|(r, l)| r - l)
        .collect();
    let span = mass.apply_inverse(&span);
    dot(&span, left.momentum()) < 0.0 || dot(&span, right.momentum()) < 0.0
}

#[derive(Clone, Debug)]
pub(crate) struct Leaf {
    point: Rc<PhasePoint>,
    /// Signed leapfrog step index relative to the start.
    position: i64,
}

/// Acceptable-state summary of one subtree.
#[derive(Clone, Debug, Default)]
pub(crate) struct Bag {
    count: usize,
    candidate: Option<Leaf>,
    /// Uniformly random ordered sample of `min(K, count)` distinct states.
    reservoir: Vec<Leaf>,
    /// Evenly-spread slots: the first `n` slots are the allocation for `n`.
    slots: Vec<Leaf>,
    /// Rao-Blackwell: every acceptable state. Negative control: every leaf.
    all: Vec<Leaf>,
}

impl Bag {
    fn leaf(leaf: Leaf, acceptable: bool, strategy: RecycleStrategy) -> Self {
        let mut bag = Bag::default();
        if matches!(strategy, RecycleStrategy::AllLeaves) {
            bag.all.push(leaf.clone());
        }
        if !acceptable {
            return bag;
        }
        bag.count = 1;
        match strategy {
            RecycleStrategy::Simple(_) => bag.reservoir.push(leaf.clone()),
            RecycleStrategy::EvenlySpread(k) => bag.slots = vec![leaf.clone(); k],
            RecycleStrategy::RaoBlackwell => bag.all.push(leaf.clone()),
            RecycleStrategy::None | RecycleStrategy::AllLeaves => {}
        }
        bag.candidate = Some(leaf);
        bag
    }

    /// Joins spatially adjacent bags. Candidate choice consumes `accept`,
    /// recycling bookkeeping consumes `recycle`.
    fn merge<R: Rng + ?Sized>(
        left: Bag,
        right: Bag,
        strategy: RecycleStrategy,
        accept: &mut R,
        recycle: &mut R,
    ) -> Bag {
        let (n1, n2) = (left.count, right.count);
        let total = n1 + n2;
        let candidate = if total == 0 {
            None
        } else if accept.random_range(0..total) < n2 {
            right.candidate
        } else {
            left.candidate
        };
        let mut out = Bag {
            count: total,
            candidate,
            ..Bag::default()
        };
        match strategy {
            RecycleStrategy::Simple(k) => {
                out.reservoir = merge_reservoirs(left.reservoir, n1, right.reservoir, n2, k, recycle)
            }
            RecycleStrategy::EvenlySpread(k) => {
                out.slots = merge_slots(left.slots, n1, right.slots, n2, k, recycle)
            }
            RecycleStrategy::RaoBlackwell | RecycleStrategy::AllLeaves => {
                out.all = left.all;
                out.all.extend(right.all);
            }
            RecycleStrategy::None => {}
        }
        out
    }
}

/// Sequential draw without replacement from the union: each pick comes from
/// the left with probability (left remaining)/(total remaining) and takes
/// the next element of that side's random-order reservoir.
fn merge_reservoirs<R: Rng + ?Sized>(
    left: Vec<Leaf>,
    n1: usize,
    right: Vec<Leaf>,
    n2: usize,
    k: usize,
    rng: &mut R,
) -> Vec<Leaf> {
    let m = k.min(n1 + n2);
    let mut out = Vec::with_capacity(m);
    let (mut l, mut r) = (left.into_iter(), right.into_iter());
    let (mut t1, mut t2) = (0usize, 0usize);
    for _ in 0..m {
        let remaining = n1 + n2 - t1 - t2;
        if rng.random_range(0..remaining) < n1 - t1 {
            out.push(l.next().expect("left reservoir holds min(K, n) states"));
            t1 += 1;
        } else {
            out.push(r.next().expect("right reservoir holds min(K, n) states"));
            t2 += 1;
        }
    }
    out
}

/// Allocation `m(n) = ⌊n·a₁/(a₁+a₂) + U⌋` to the left child for every
/// `n ≤ K`, with one shared `U`. This is `⌊w⌋ + Bernoulli(w − ⌊w⌋)` for each
/// `n`, and `m` grows by zero or one per unit of `n`, so the slots for
/// allocation `n` are a prefix of those for `n + 1`.
fn merge_slots<R: Rng + ?Sized>(
    left: Vec<Leaf>,
    n1: usize,
    right: Vec<Leaf>,
    n2: usize,
    k: usize,
    rng: &mut R,
) -> Vec<Leaf> {
    if n1 + n2 == 0 {
        return Vec::new();
    }
    let u: f64 = rng.random();
    let p = n1 as f64 / (n1 + n2) as f64;
    let mut out = Vec::with_capacity(k);
    let mut m_prev = 0usize;
    for n in 1..=k {
        let m = if n2 == 0 {
            n
        } else if n1 == 0 {
            0
        } else {
            let raw = libm::floor(n as f64 * p + u) as usize;
            raw.clamp(m_prev, m_prev + 1)
        };
        if m > m_prev {
            out.push(left[m - 1].clone());
        } else {
            out.push(right[n - m - 1].clone());
        }
        m_prev = m;
    }
    out
}

struct Subtree {
    left: PhasePoint,
    right: PhasePoint,
    bag: Bag,
    /// U-turn or divergence somewhere inside; the subtree is discarded.
    stop: bool,
}

struct Builder<'a, T: ?Sized> {
    target: &'a T,
    mass: &'a MassMatrix,
    eps: f64,
    slice: SliceVariable,
    joint0: f64,
    strategy: RecycleStrategy,
    streams: &'a mut ChainStreams,
    grad_evals: usize,
    accept_sum: f64,
    divergent: bool,
}

impl<T: TargetDensity + ?Sized> Builder<'_, T> {
    fn build(&mut self, edge: &PhasePoint, edge_pos: i64, dir: i64, depth: usize) -> Subtree {
        if depth == 0 {
            return self.leaf(edge, edge_pos + dir, dir);
        }
        let first = self.build(edge, edge_pos, dir, depth - 1);
        if first.stop {
            return first;
        }
        let half = 1i64 << (depth - 1);
        let outer = if dir > 0 { &first.right } else { &first.left };
        let second = self.build(&outer.clone(), edge_pos + dir * half, dir, depth - 1);
        if second.stop {
            return second;
        }
        let (l, r) = if dir > 0 { (first, second) } else { (second, first) };
        let stop = uturn(&l.left, &r.right, self.mass);
        let bag = Bag::merge(
            l.bag,
            r.bag,
            self.strategy,
            &mut self.streams.accept,
            &mut self.streams.recycle,
        );
        Subtree {
            left: l.left,
            right: r.right,
            bag,
            stop,
        }
    }

    fn leaf(&mut self, edge: &PhasePoint, position: i64, dir: i64) -> Subtree {
        self.grad_evals += 1;
        let step = leapfrog_step(edge, dir as f64 * self.eps, self.target, self.mass);
        let z = match step {
            Ok(z) if self.joint0 - z.joint_log_density() <= MAX_ENERGY_DROP => z,
            _ => {
                self.divergent = true;
                return Subtree {
                    left: edge.clone(),
                    right: edge.clone(),
                    bag: Bag::default(),
                    stop: true,
                };
            }
        };
        self.accept_sum += accept_probability_log(self.joint0, z.joint_log_density());
        let acceptable = self.slice.admits(&z);
        let bag = Bag::leaf(
            Leaf {
                point: Rc::new(z.clone()),
                position,
            },
            acceptable,
            self.strategy,
        );
        Subtree {
            left: z.clone(),
            right: z,
            bag,
            stop: false,
        }
    }
}

/// Slice level and recycled-state densities of one iteration, for checks
/// that need the acceptable set.
#[derive(Clone, Debug)]
pub struct NutsTrace {
    pub slice: SliceVariable,
    pub start_acceptable: bool,
    /// Joint log-density of each recycled draw at selection time.
    pub recycled_joint: Vec<f64>,
}

/// One NUTS iteration: refresh momentum, draw the slice, double until a
/// U-turn, a divergence or `max_depth`, pick the next state uniformly from
/// `𝒜` and recycle according to `strategy`.
#[allow(clippy::too_many_arguments)]
pub fn nuts_iteration<T: TargetDensity + ?Sized>(
    state: &PhasePoint,
    eps: f64,
    target: &T,
    mass: &MassMatrix,
    max_depth: usize,
    strategy: RecycleStrategy,
    streams: &mut ChainStreams,
    iteration: usize,
) -> IterationBatch {
    nuts_iteration_traced(state, eps, target, mass, max_depth, strategy, streams, iteration).0
}

#[allow(clippy::too_many_arguments)]
pub fn nuts_iteration_traced<T: TargetDensity + ?Sized>(
    state: &PhasePoint,
    eps: f64,
    target: &T,
    mass: &MassMatrix,
    max_depth: usize,
    strategy: RecycleStrategy,
    streams: &mut ChainStreams,
    iteration: usize,
) -> (IterationBatch, NutsTrace) {
    let p = mass.draw_momentum(&mut streams.momentum);
    let start = state.clone().with_momentum(p, mass);
    let slice = draw_slice(&start, &mut streams.accept);
    let joint0 = start.joint_log_density();
    let start_acceptable = slice.log_u <= joint0;

    let start_leaf = Leaf {
        point: Rc::new(start.clone()),
        position: 0,
    };
    // the start is acceptable by construction but is not an intermediate
    // state, so the negative control leaves it out
    let mut bag = Bag::leaf(
        start_leaf.clone(),
        true,
        match strategy {
            RecycleStrategy::AllLeaves => RecycleStrategy::None,
            s => s,
        },
    );
    let (mut left, mut right) = (start.clone(), start.clone());
    let (mut left_pos, mut right_pos) = (0i64, 0i64);

    let mut builder = Builder {
        target,
        mass,
        eps,
        slice,
        joint0,
        strategy,
        streams,
        grad_evals: 0,
        accept_sum: 0.0,
        divergent: false,
    };

    let mut depth = 0;
    let mut stopped = false;
    while depth < max_depth {
        let dir: i64 = if builder.streams.accept.random::<bool>() { 1 } else { -1 };
        let sub = if dir > 0 {
            builder.build(&right, right_pos, 1, depth)
        } else {
            builder.build(&left, left_pos, -1, depth)
        };
        if sub.stop {
            stopped = true;
            break;
        }
        let width = 1i64 << depth;
        let (l_bag, r_bag) = if dir > 0 {
            right = sub.right;
            right_pos += width;
            (bag, sub.bag)
        } else {
            left = sub.left;
            left_pos -= width;
            (sub.bag, bag)
        };
        bag = Bag::merge(
            l_bag,
            r_bag,
            strategy,
            &mut builder.streams.accept,
            &mut builder.streams.recycle,
        );
        depth += 1;
        if uturn(&left, &right, mass) {
            stopped = true;
            break;
        }
    }

    let grad_evals = builder.grad_evals;
    let accept_stat = if grad_evals > 0 {
        builder.accept_sum / grad_evals as f64
    } else {
        1.0
    };
    let divergent = builder.divergent;
    let next_leaf = bag.candidate.clone().expect("the start is always acceptable");
    let next: PhasePoint = (*next_leaf.point).clone();

    let (recycled_points, weight): (Vec<Leaf>, f64) = match strategy {
        RecycleStrategy::None => (Vec::new(), 0.0),
        RecycleStrategy::Simple(k) => {
            let n = bag.reservoir.len();
            (core::mem::take(&mut bag.reservoir), k as f64 / n as f64)
        }
        RecycleStrategy::EvenlySpread(_) => {
            let mut s = core::mem::take(&mut bag.slots);
            s.sort_by_key(|l| l.position);
            (s, 1.0)
        }
        RecycleStrategy::RaoBlackwell => {
            let n = bag.all.len();
            (core::mem::take(&mut bag.all), 1.0 / n as f64)
        }
        RecycleStrategy::AllLeaves => {
            let leaves = core::mem::take(&mut bag.all);
            let chosen = leaves
                .into_iter()
                .map(|leaf| {
                    let u: f64 = builder.streams.recycle.random();
                    let a = accept_probability_log(joint0, leaf.point.joint_log_density());
                    if u < a {
                        leaf
                    } else {
                        start_leaf.clone()
                    }
                })
                .collect();
            (chosen, 1.0)
        }
    };
    let recycled_joint = recycled_points
        .iter()
        .map(|l| l.point.joint_log_density())
        .collect();
    let recycled = recycled_points
        .into_iter()
        .enumerate()
        .map(|(slot, leaf)| RecycledDraw {
            theta: leaf.point.theta().to_vec(),
            momentum: None,
            weight,
            iteration,
            slot,
        })
        .collect();

    let max_energy_error = if divergent { f64::INFINITY } else { 0.0 };
    let batch = IterationBatch {
        next,
        recycled,
        diagnostics: Diagnostics {
            accept_stat,
            max_energy_error,
            grad_evals,
            steps: grad_evals,
            accepted: next_leaf.position != 0,
            divergent,
            tree_depth: Some(depth),
            n_acceptable: Some(bag.count),
            max_depth_reached: !stopped && depth == max_depth,
        },
    };
    let trace = NutsTrace {
        slice,
        start_acceptable,
        recycled_joint,
    };
    (batch, trace)
}

/// A finished trajectory with its acceptable states marked, laid out as a
/// complete binary tree of `2^d` leaves in spatial order.
#[derive(Clone, Debug)]
pub struct FrozenTree {
    leaves: Vec<PhasePoint>,
    acceptable: Vec<bool>,
}

impl FrozenTree {
    pub fn new(leaves: Vec<PhasePoint>, acceptable: Vec<bool>) -> Result<Self, Error> {
        if leaves.is_empty() || !leaves.len().is_power_of_two() {
            return Err(invalid("a frozen tree needs 2^d leaves"));
        }
        if acceptable.len() != leaves.len() {
            return Err(Error::DimensionMismatch {
                expected: leaves.len(),
                found: acceptable.len(),
            });
        }
        if !acceptable.iter().any(|a| *a) {
            return Err(Error::Empty);
        }
        Ok(Self { leaves, acceptable })
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn n_acceptable(&self) -> usize {
        self.acceptable.iter().filter(|a| **a).count()
    }

    fn bag<R: Rng + ?Sized>(&self, strategy: RecycleStrategy, accept: &mut R, recycle: &mut R) -> Bag {
        let mut level: Vec<Bag> = self
            .leaves
            .iter()
            .zip(&self.acceptable)
            .enumerate()
            .map(|(i, (z, a))| {
                let leaf = Leaf {
                    point: Rc::new(z.clone()),
                    position: i as i64,
                };
                Bag::leaf(leaf, *a, strategy)
            })
            .collect();
        while level.len() > 1 {
            let mut next = Vec::with_capacity(level.len() / 2);
            let mut it = level.into_iter();
            while let (Some(l), Some(r)) = (it.next(), it.next()) {
                next.push(Bag::merge(l, r, strategy, accept, recycle));
            }
            level = next;
        }
        level.pop().expect("non-empty tree")
    }

    /// Leaf index of the next state chosen by the bottom-up merges.
    pub fn select_uniform<R: Rng + ?Sized>(&self, accept: &mut R, recycle: &mut R) -> usize {
        let bag = self.bag(RecycleStrategy::None, accept, recycle);
        bag.candidate.expect("non-empty acceptable set").position as usize
    }

    /// Leaf indices drawn without replacement by the merged reservoirs.
    pub fn recycle_simple<R: Rng + ?Sized>(&self, k: usize, accept: &mut R, recycle: &mut R) -> Vec<usize> {
        let bag = self.bag(RecycleStrategy::Simple(k), accept, recycle);
        bag.reservoir.iter().map(|l| l.position as usize).collect()
    }

    /// Leaf indices from the streaming evenly-spread merges, in spatial order.
    pub fn recycle_evenly_streaming<R: Rng + ?Sized>(
        &self,
        k: usize,
        accept: &mut R,
        recycle: &mut R,
    ) -> Vec<usize> {
        let bag = self.bag(RecycleStrategy::EvenlySpread(k), accept, recycle);
        let mut idx: Vec<usize> = bag.slots.iter().map(|l| l.position as usize).collect();
        idx.sort_unstable();
        idx
    }
}

/// Top-down evenly-spread allocation: at each node, `n = ⌊w⌋ +
/// Bernoulli(w − ⌊w⌋)` with `w = K·|𝒜′|/(|𝒜′|+|𝒜″|)` go left and `K − n` go
/// right; a single acceptable leaf returns `K` copies.
pub fn recycle_evenly<R: Rng + ?Sized>(
    tree: &FrozenTree,
    k: usize,
    rng: &mut R,
    iteration: usize,
) -> Vec<RecycledDraw> {
    let mut out = Vec::with_capacity(k);
    allocate(tree, 0, tree.n_leaves(), k, rng, &mut out);
    out.into_iter()
        .enumerate()
        .map(|(slot, i)| RecycledDraw {
            theta: tree.leaves[i].theta().to_vec(),
            momentum: None,
            weight: 1.0,
            iteration,
            slot,
        })
        .collect()
}

/// Leaf indices of [`recycle_evenly`].
pub fn recycle_evenly_indices<R: Rng + ?Sized>(tree: &FrozenTree, k: usize, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    allocate(tree, 0, tree.n_leaves(), k, rng, &mut out);
    out
}

fn allocate<R: Rng + ?Sized>(
    tree: &FrozenTree,
    lo: usize,
    len: usize,
    k: usize,
    rng: &mut R,
    out: &mut Vec<usize>,
) {
    if k == 0 {
        return;
    }
    if len == 1 {
        out.extend(core::iter::repeat(lo).take(k));
        return;
    }
    let half = len / 2;
    let count = |a: usize, n: usize| tree.acceptable[a..a + n].iter().filter(|x| **x).count();
    let (a1, a2) = (count(lo, half), count(lo + half, half));
    let w = k as f64 * a1 as f64 / (a1 + a2) as f64;
    let floor = libm::floor(w);
    let n = if a2 == 0 {
        k
    } else {
        let extra = (rng.random::<f64>() < w - floor) as usize;
        (floor as usize + extra).min(k)
    };
    allocate(tree, lo, half, n, rng, out);
    allocate(tree, lo + half, half, k - n, rng, out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{make_gaussian, Gaussian, GaussianSpec};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn std1() -> Gaussian {
        make_gaussian(GaussianSpec::IidStandard { dim: 1 }).unwrap()
    }

    fn pt(t: &Gaussian, theta: &[f64], p: &[f64]) -> PhasePoint {
        PhasePoint::new(theta.to_vec(), p.to_vec(), t, &MassMatrix::identity(theta.len())).unwrap()
    }

    #[test]
    fn slice_is_below_start() {
        let t = std1();
        let z = pt(&t, &[0.4], &[1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let s = draw_slice(&z, &mut rng);
            assert!(s.log_u <= z.joint_log_density());
        }
    }

    #[test]
    fn uturn_examples() {
        let t = make_gaussian(GaussianSpec::IidStandard { dim: 2 }).unwrap();
        let m = MassMatrix::identity(2);
        let a = pt(&t, &[0.3, 0.1], &[1.0, 0.0]);
        assert!(!uturn(&a, &a, &m));
        let l = pt(&t, &[0.0, 0.0], &[1.0, 0.0]);
        let r = pt(&t, &[1.0, 0.0], &[1.0, 0.0]);
        assert!(!uturn(&l, &r, &m));
        let r2 = pt(&t, &[1.0, 0.0], &[-0.1, 5.0]);
        assert!(uturn(&l, &r2, &m));
    }

    #[test]
    fn evenly_base_and_balanced_cases() {
        let t = std1();
        let z = pt(&t, &[0.1], &[0.0]);
        let single = FrozenTree::new(vec![z.clone()], vec![true]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = recycle_evenly(&single, 3, &mut rng, 0);
        assert_eq!(d.len(), 3);
        assert!(d.iter().all(|x| x.theta == vec![0.1]));

        let four: Vec<PhasePoint> = (0..4).map(|i| pt(&t, &[i as f64], &[0.0])).collect();
        let tree = FrozenTree::new(four, vec![true; 4]).unwrap();
        for _ in 0..100 {
            let idx = recycle_evenly_indices(&tree, 2, &mut rng);
            assert_eq!(idx.len(), 2);
            assert!(idx[0] < 2 && idx[1] >= 2);
        }
    }

    #[test]
    fn evenly_skips_empty_subtrees() {
        let t = std1();
        let four: Vec<PhasePoint> = (0..4).map(|i| pt(&t, &[i as f64], &[0.0])).collect();
        let tree = FrozenTree::new(four, vec![false, false, true, false]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(recycle_evenly_indices(&tree, 5, &mut rng), vec![2; 5]);
        let mut a = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(tree.recycle_evenly_streaming(5, &mut rng, &mut a), vec![2; 5]);
    }

    #[test]
    fn rao_blackwell_weights_sum_to_one() {
        let t = std1();
        let m = MassMatrix::identity(1);
        let state = pt(&t, &[0.3], &[0.0]);
        for seed in 0..50 {
            let mut s = ChainStreams::new(seed, 0);
            let b = nuts_iteration(&state, 0.2, &t, &m, 10, RecycleStrategy::RaoBlackwell, &mut s, 0);
            let n = b.diagnostics.n_acceptable.unwrap();
            assert_eq!(b.recycled.len(), n);
            let total: f64 = b.recycled.iter().map(|d| d.weight).sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn slice_guarantee_and_acceptability() {
        let t = make_gaussian(GaussianSpec::Diagonal {
            variances: vec![1.0, 9.0],
        })
        .unwrap();
        let m = MassMatrix::identity(2);
        let mut state = pt(&t, &[0.5, -1.0], &[0.0, 0.0]);
        let mut s = ChainStreams::new(17, 0);
        for strategy in [
            RecycleStrategy::Simple(3),
            RecycleStrategy::EvenlySpread(4),
            RecycleStrategy::RaoBlackwell,
        ] {
            for i in 0..200 {
                let (b, tr) = nuts_iteration_traced(&state, 0.4, &t, &m, 8, strategy, &mut s, i);
                assert!(tr.start_acceptable);
                assert!(b.diagnostics.n_acceptable.unwrap() >= 1);
                assert!(tr.recycled_joint.iter().all(|j| *j > tr.slice.log_u));
                assert!(tr.slice.admits(&b.next) || !b.diagnostics.accepted);
                let d = b.diagnostics.tree_depth.unwrap();
                assert!(b.diagnostics.grad_evals >= (1 << d) - 1);
                assert!(b.diagnostics.grad_evals <= (1 << (d + 1)) - 1);
                state = b.next;
            }
        }
    }

    #[test]
    fn strategies_share_the_next_state_sequence() {
        let t = std1();
        let m = MassMatrix::identity(1);
        let run = |strategy| {
            let mut s = ChainStreams::new(8, 3);
            let mut z = pt(&t, &[0.2], &[0.0]);
            let mut out = Vec::new();
            for i in 0..100 {
                z = nuts_iteration(&z, 0.3, &t, &m, 10, strategy, &mut s, i).next;
                out.push(z.theta()[0]);
            }
            out
        };
        let base = run(RecycleStrategy::None);
        assert_eq!(base, run(RecycleStrategy::Simple(2)));
        assert_eq!(base, run(RecycleStrategy::EvenlySpread(3)));
        assert_eq!(base, run(RecycleStrategy::RaoBlackwell));
    }

    #[test]
    fn max_depth_is_flagged() {
        let t = std1();
        let m = MassMatrix::identity(1);
        let state = pt(&t, &[1.0], &[0.0]);
        let mut s = ChainStreams::new(1, 0);
        // tiny steps cannot reach a U-turn within 3 doublings
        let b = nuts_iteration(&state, 1e-3, &t, &m, 3, RecycleStrategy::None, &mut s, 0);
        assert!(b.diagnostics.max_depth_reached);
        assert_eq!(b.diagnostics.tree_depth, Some(3));
        assert_eq!(b.diagnostics.grad_evals, 7);
    }

    #[test]
    fn simple_strategy_caps_at_acceptable_count() {
        let t = std1();
        let m = MassMatrix::identity(1);
        let state = pt(&t, &[0.0], &[0.0]);
        let mut s = ChainStreams::new(2, 0);
        for i in 0..100 {
            let b = nuts_iteration(&state, 0.5, &t, &m, 10, RecycleStrategy::Simple(1000), &mut s, i);
            let n = b.diagnostics.n_acceptable.unwrap();
            assert_eq!(b.recycled.len(), n);
            assert!(b.recycled.iter().all(|d| (d.weight - 1000.0 / n as f64).abs() < 1e-12));
        }
    }
}
