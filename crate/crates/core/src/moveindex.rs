//! Per-vector move collections answering "cheapest move whose source amount is
//! at least `x0`" in logarithmic time.
//!
//! For every vector `v` over {-1,0,1}^d there is one treap keyed by
//! `(amount, item, source, target)`. Each node carries the position of the
//! cheapest move in its subtree, so a threshold query is a single root-to-leaf
//! walk.

use std::cmp::Ordering;
use std::collections::HashMap;

use num_traits::{Signed, Zero};

use crate::error::Error;
use crate::model::{Assignment, ProblemInstance, SubsetMask};
use crate::numerics::Rational;
use crate::profiles::ProfileVector;

/// Shifting mass of `item` from `source` to `target`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Move {
    pub item: usize,
    pub source: SubsetMask,
    pub target: SubsetMask,
    /// `cost(item, target) - cost(item, source)`.
    pub cost_delta: i64,
}

impl Move {
    /// Ordering used to pick among moves: cheapest first, then lower item,
    /// source, target.
    pub fn preference(&self) -> (i64, usize, SubsetMask, SubsetMask) {
        (self.cost_delta, self.item, self.source, self.target)
    }

    pub fn vector(&self, d: usize) -> Vec<i8> {
        self.source.difference_to(self.target, d)
    }

    pub fn vector_code(&self, d: usize) -> usize {
        diff_code(self.source, self.target, d)
    }
}

/// Base-3 code of `T - S`, matching [`ProfileVector::code`].
pub fn diff_code(source: SubsetMask, target: SubsetMask, d: usize) -> usize {
    (0..d).fold(0, |acc, i| {
        let e = i8::from(target.contains(i)) - i8::from(source.contains(i));
        acc * 3 + (e + 1) as usize
    })
}

const NIL: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Node {
    amount: Rational,
    mv: Move,
    prio: u64,
    left: u32,
    right: u32,
    /// Node holding the preferred move in this subtree.
    best: u32,
    size: u32,
}

/// Arena treap with subtree-minimum augmentation.
#[derive(Clone, Debug, Default)]
struct Treap {
    nodes: Vec<Node>,
    free: Vec<u32>,
    root: u32,
    seed: u64,
}

fn node_key_cmp(a: (&Rational, &Move), b: (&Rational, &Move)) -> Ordering {
    a.0.cmp(b.0)
        .then(a.1.item.cmp(&b.1.item))
        .then(a.1.source.cmp(&b.1.source))
        .then(a.1.target.cmp(&b.1.target))
}

impl Treap {
    fn new(seed: u64) -> Self {
        Self {
            nodes: Vec::new(),
            free: Vec::new(),
            root: NIL,
            seed,
        }
    }

    fn len(&self) -> usize {
        if self.root == NIL {
            0
        } else {
            self.nodes[self.root as usize].size as usize
        }
    }

    fn next_prio(&mut self) -> u64 {
        // splitmix64
        self.seed = self.seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.seed;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn prefer(&self, a: u32, b: u32) -> u32 {
        if a == NIL {
            return b;
        }
        if b == NIL {
            return a;
        }
        if self.nodes[b as usize].mv.preference() < self.nodes[a as usize].mv.preference() {
            b
        } else {
            a
        }
    }

    fn pull(&mut self, t: u32) {
        let (l, r) = {
            let n = &self.nodes[t as usize];
            (n.left, n.right)
        };
        let mut best = t;
        let mut size = 1;
        if l != NIL {
            best = self.prefer(best, self.nodes[l as usize].best);
            size += self.nodes[l as usize].size;
        }
        if r != NIL {
            best = self.prefer(best, self.nodes[r as usize].best);
            size += self.nodes[r as usize].size;
        }
        let n = &mut self.nodes[t as usize];
        n.best = best;
        n.size = size;
    }

    /// Splits into (< key, ≥ key).
    fn split(&mut self, t: u32, amount: &Rational, mv: &Move) -> (u32, u32) {
        if t == NIL {
            return (NIL, NIL);
        }
        let go_left = {
            let n = &self.nodes[t as usize];
            node_key_cmp((&n.amount, &n.mv), (amount, mv)) != Ordering::Less
        };
        if go_left {
            let l = self.nodes[t as usize].left;
            let (a, b) = self.split(l, amount, mv);
            self.nodes[t as usize].left = b;
            self.pull(t);
            (a, t)
        } else {
            let r = self.nodes[t as usize].right;
            let (a, b) = self.split(r, amount, mv);
            self.nodes[t as usize].right = a;
            self.pull(t);
            (t, b)
        }
    }

    fn merge(&mut self, a: u32, b: u32) -> u32 {
        if a == NIL {
            return b;
        }
        if b == NIL {
            return a;
        }
        if self.nodes[a as usize].prio > self.nodes[b as usize].prio {
            let r = self.nodes[a as usize].right;
            let m = self.merge(r, b);
            self.nodes[a as usize].right = m;
            self.pull(a);
            a
        } else {
            let l = self.nodes[b as usize].left;
            let m = self.merge(a, l);
            self.nodes[b as usize].left = m;
            self.pull(b);
            b
        }
    }

    fn insert(&mut self, amount: Rational, mv: Move) {
        let prio = self.next_prio();
        let node = Node {
            amount,
            mv,
            prio,
            left: NIL,
            right: NIL,
            best: NIL,
            size: 1,
        };
        let id = match self.free.pop() {
            Some(id) => {
                self.nodes[id as usize] = node;
                id
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        };
        self.nodes[id as usize].best = id;
        let (amount, mv) = {
            let n = &self.nodes[id as usize];
            (n.amount.clone(), n.mv)
        };
        let (a, b) = self.split(self.root, &amount, &mv);
        let left = self.merge(a, id);
        self.root = self.merge(left, b);
    }

    /// Removes the node with exactly this key; returns whether it existed.
    fn remove(&mut self, amount: &Rational, mv: &Move) -> bool {
        let (a, b) = self.split(self.root, amount, mv);
        // b's leftmost node is the first key ≥ (amount, mv)
        let (hit, rest) = self.pop_leftmost_if(b, amount, mv);
        self.root = self.merge(a, rest);
        if hit != NIL {
            self.free.push(hit);
            true
        } else {
            false
        }
    }

    fn pop_leftmost_if(&mut self, t: u32, amount: &Rational, mv: &Move) -> (u32, u32) {
        if t == NIL {
            return (NIL, NIL);
        }
        let l = self.nodes[t as usize].left;
        if l == NIL {
            let n = &self.nodes[t as usize];
            if node_key_cmp((&n.amount, &n.mv), (amount, mv)) == Ordering::Equal {
                return (t, n.right);
            }
            return (NIL, t);
        }
        let (hit, rest) = self.pop_leftmost_if(l, amount, mv);
        self.nodes[t as usize].left = rest;
        self.pull(t);
        (hit, t)
    }

    fn query(&self, x0: &Rational) -> Option<Move> {
        let mut best = NIL;
        let mut t = self.root;
        while t != NIL {
            let n = &self.nodes[t as usize];
            if n.amount >= *x0 {
                best = self.prefer(best, t);
                if n.right != NIL {
                    best = self.prefer(best, self.nodes[n.right as usize].best);
                }
                t = n.left;
            } else {
                t = n.right;
            }
        }
        (best != NIL).then(|| self.nodes[best as usize].mv)
    }

    fn cheapest(&self) -> Option<Move> {
        (self.root != NIL).then(|| {
            let b = self.nodes[self.root as usize].best;
            self.nodes[b as usize].mv
        })
    }

    fn for_each(&self, t: u32, f: &mut impl FnMut(&Rational, &Move)) {
        if t == NIL {
            return;
        }
        let n = &self.nodes[t as usize];
        self.for_each(n.left, f);
        f(&n.amount, &n.mv);
        self.for_each(n.right, f);
    }
}

/// All moves `(p, S, T)` with `x(p,S) > 0`, grouped by the vector `T - S`.
#[derive(Clone, Debug)]
pub struct MoveIndex {
    d: usize,
    trees: Vec<Treap>,
    options: Vec<Vec<(SubsetMask, i64)>>,
    amounts: HashMap<(usize, SubsetMask), Rational>,
}

impl MoveIndex {
    /// An index over `inst` with no positive variables yet.
    pub fn empty(inst: &ProblemInstance) -> Self {
        let d = inst.d();
        let vectors = 3usize.pow(d as u32);
        Self {
            d,
            trees: (0..vectors).map(|c| Treap::new(c as u64 ^ 0x5eed)).collect(),
            options: inst
                .items
                .iter()
                .map(|it| it.costs.iter().map(|(&m, &c)| (m, c)).collect())
                .collect(),
            amounts: HashMap::new(),
        }
    }

    /// Inserts every move out of every positive variable of `x`.
    pub fn build(x: &Assignment, inst: &ProblemInstance) -> Result<Self, Error> {
        if x.positive_count() == 0 {
            return Err(Error::InvalidInput(
                "move index needs at least one positive variable".into(),
            ));
        }
        let mut idx = Self::empty(inst);
        for (p, s, v) in x.entries() {
            idx.update_amount(p, s, v.clone());
        }
        Ok(idx)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Sets the key amount of every move out of `(item, source)`; zero removes
    /// them.
    pub fn update_amount(&mut self, item: usize, source: SubsetMask, new_amount: Rational) {
        assert!(!new_amount.is_negative(), "negative amount in move index");
        let old = self.amounts.remove(&(item, source));
        if old.as_ref() == Some(&new_amount) {
            self.amounts.insert((item, source), new_amount);
            return;
        }
        let Some(cost_s) = self.option_cost(item, source) else {
            assert!(new_amount.is_zero(), "positive amount on forbidden option");
            return;
        };
        let d = self.d;
        for k in 0..self.options[item].len() {
            let (target, cost_t) = self.options[item][k];
            if target == source {
                continue;
            }
            let mv = Move {
                item,
                source,
                target,
                cost_delta: cost_t - cost_s,
            };
            let tree = &mut self.trees[diff_code(source, target, d)];
            if let Some(old) = &old {
                let removed = tree.remove(old, &mv);
                debug_assert!(removed, "stale move missing from index");
            }
            if !new_amount.is_zero() {
                tree.insert(new_amount.clone(), mv);
            }
        }
        if !new_amount.is_zero() {
            self.amounts.insert((item, source), new_amount);
        }
    }

    fn option_cost(&self, item: usize, option: SubsetMask) -> Option<i64> {
        self.options[item]
            .iter()
            .find(|&&(m, _)| m == option)
            .map(|&(_, c)| c)
    }

    /// Cheapest move for vector `code` among those with source amount ≥ `x0`.
    pub fn query_code(&self, code: usize, x0: &Rational) -> Option<Move> {
        self.trees[code].query(x0)
    }

    /// Cheapest move for vector `code` regardless of amount.
    pub fn cheapest(&self, code: usize) -> Option<Move> {
        self.trees[code].cheapest()
    }

    pub fn query_min_cost(&self, v: &ProfileVector, x0: &Rational) -> Option<Move> {
        assert_eq!(v.dim(), self.d, "vector dimension mismatch");
        self.query_code(v.code(), x0)
    }

    /// Current source amount recorded for `(item, source)`.
    pub fn amount(&self, item: usize, source: SubsetMask) -> Option<&Rational> {
        self.amounts.get(&(item, source))
    }

    pub fn len_for(&self, code: usize) -> usize {
        self.trees[code].len()
    }

    pub fn total_moves(&self) -> usize {
        self.trees.iter().map(Treap::len).sum()
    }

    /// Every stored `(amount, move)`, sorted by vector code then key.
    pub fn moves(&self) -> Vec<(Rational, Move)> {
        let mut out = Vec::with_capacity(self.total_moves());
        for t in &self.trees {
            t.for_each(t.root, &mut |a, m| out.push((a.clone(), *m)));
        }
        out
    }

    /// Moves of one vector in key order.
    pub fn moves_for(&self, code: usize) -> Vec<(Rational, Move)> {
        let t = &self.trees[code];
        let mut out = Vec::with_capacity(t.len());
        t.for_each(t.root, &mut |a, m| out.push((a.clone(), *m)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bin, Item};
    use crate::numerics::{rat, rat_int};
    use std::collections::BTreeMap;

    fn inst(items: Vec<(i64, &[(u32, i64)])>, caps: &[i64]) -> ProblemInstance {
        ProblemInstance::new(
            caps.iter()
                .enumerate()
                .map(|(i, &c)| Bin { id: format!("b{i}"), capacity: c })
                .collect(),
            items
                .into_iter()
                .enumerate()
                .map(|(i, (size, costs))| Item {
                    id: format!("p{i}"),
                    size,
                    costs: costs.iter().map(|&(m, c)| (SubsetMask(m), c)).collect::<BTreeMap<_, _>>(),
                })
                .collect(),
        )
    }

    #[test]
    fn single_item_single_move() {
        let inst = inst(vec![(2, &[(0, 3), (1, 1)])], &[0]);
        let mut x = Assignment::new(1, 1);
        x.set(0, SubsetMask(0), rat_int(2));
        let idx = MoveIndex::build(&x, &inst).unwrap();
        assert_eq!(idx.total_moves(), 1);
        let plus = ProfileVector::new(vec![1]).unwrap();
        let mv = idx.query_min_cost(&plus, &rat_int(0)).unwrap();
        assert_eq!((mv.item, mv.source, mv.target, mv.cost_delta), (0, SubsetMask(0), SubsetMask(1), -2));
    }

    #[test]
    fn empty_assignment_rejected() {
        let inst = inst(vec![(2, &[(0, 3), (1, 1)])], &[1]);
        assert!(MoveIndex::build(&Assignment::new(1, 1), &inst).is_err());
    }

    #[test]
    fn threshold_query() {
        // two items moving ∅ -> {b0}; amounts 3 and 1, deltas -5 and -9
        let inst = inst(vec![(3, &[(0, 5), (1, 0)]), (1, &[(0, 9), (1, 0)])], &[4]);
        let mut idx = MoveIndex::empty(&inst);
        assert!(idx.query_code(2, &rat_int(0)).is_none());
        idx.update_amount(0, SubsetMask(0), rat_int(3));
        idx.update_amount(1, SubsetMask(0), rat_int(1));
        let code = diff_code(SubsetMask(0), SubsetMask(1), 1);
        let m = idx.query_code(code, &rat_int(2)).unwrap();
        assert_eq!((m.item, m.cost_delta), (0, -5));
        let m = idx.query_code(code, &rat_int(0)).unwrap();
        assert_eq!((m.item, m.cost_delta), (1, -9));
        assert!(idx.query_code(code, &rat(7, 2)).is_none());
    }

    #[test]
    fn update_to_zero_and_back() {
        let inst = inst(vec![(2, &[(0, 1), (1, 2), (2, 0), (3, 5)])], &[2, 2]);
        let mut idx = MoveIndex::empty(&inst);
        idx.update_amount(0, SubsetMask(1), rat_int(2));
        assert_eq!(idx.total_moves(), 3);
        idx.update_amount(0, SubsetMask(1), rat(1, 2));
        assert_eq!(idx.total_moves(), 3);
        assert!(idx.moves().iter().all(|(a, _)| *a == rat(1, 2)));
        idx.update_amount(0, SubsetMask(1), rat_int(0));
        assert_eq!(idx.total_moves(), 0);
        idx.update_amount(0, SubsetMask(2), rat_int(1));
        assert_eq!(idx.total_moves(), 3);
    }

    #[test]
    fn ties_prefer_lower_item() {
        let inst = inst(vec![(1, &[(0, 2), (1, 0)]), (1, &[(0, 2), (1, 0)])], &[2]);
        let mut idx = MoveIndex::empty(&inst);
        idx.update_amount(1, SubsetMask(0), rat_int(1));
        idx.update_amount(0, SubsetMask(0), rat(1, 2));
        let code = diff_code(SubsetMask(0), SubsetMask(1), 1);
        assert_eq!(idx.query_code(code, &rat_int(0)).unwrap().item, 0);
        assert_eq!(idx.query_code(code, &rat(3, 4)).unwrap().item, 1);
    }
}
