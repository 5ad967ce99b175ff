//! Independent ground truth for small instances: an exact simplex solver,
//! decomposition of the difference between two assignments into moves and
//! circuits, and exhaustive augmentation search.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::engine::Augmentation;
use crate::error::Error;
use crate::model::{Assignment, ProblemInstance, SubsetMask};
use crate::moveindex::Move;
use crate::numerics::{nullspace_vector, rat_int, IntMatrix, Rational};
use crate::profiles::ProfileCatalog;

/// Largest number of allowed variables the simplex oracle accepts.
pub const MAX_ORACLE_VARIABLES: usize = 512;

/// Largest number of candidate tuples the brute-force search will score.
pub const MAX_BRUTEFORCE_CANDIDATES: u64 = 2_000_000;

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub objective: Rational,
    pub assignment: Assignment,
    /// The padded instance the assignment refers to.
    pub instance: ProblemInstance,
}

/// Dense equality-form LP `min c·x, A x = b, x ≥ 0`.
struct Tableau {
    rows: Vec<Vec<Rational>>,
    obj: Vec<Rational>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> &Rational {
        &self.rows[i][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v /= &p;
        }
        let prow = self.rows[r].clone();
        let eliminate = |row: &mut Vec<Rational>| {
            let f = row[c].clone();
            if !f.is_zero() {
                for (v, pv) in row.iter_mut().zip(&prow) {
                    if !pv.is_zero() {
                        *v -= &f * pv;
                    }
                }
            }
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.obj);
        self.basis[r] = c;
    }

    /// Reduced costs for the given column costs; the last entry is `-c_B·b`.
    fn set_objective(&mut self, cost: &[Rational]) {
        let mut obj: Vec<Rational> = cost.to_vec();
        obj.resize(self.cols + 1, Rational::zero());
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (o, v) in obj.iter_mut().zip(row) {
                *o -= cb * v;
            }
        }
        self.obj = obj;
    }

    /// Bland's rule: lowest entering index, ratio ties to lowest basic index.
    fn run(&mut self, eligible: usize) -> Result<(), Error> {
        loop {
            let Some(c) = (0..eligible).find(|&j| self.obj[j].is_negative()) else {
                return Ok(());
            };
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if !a.is_positive() {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let (r, _) = leave.ok_or_else(|| Error::Invariant("oracle LP is unbounded".into()))?;
            self.pivot(r, c);
        }
    }
}

/// Exact optimum of the LP relaxation. Pads the instance if needed.
pub fn simplex_solve(inst: &ProblemInstance) -> Result<OracleSolution, Error> {
    simplex_solve_ordered(inst, None)
}

/// As [`simplex_solve`], with the variable columns visited in the order
/// given by `order` (a permutation of the allowed-variable list).
pub fn simplex_solve_ordered(inst: &ProblemInstance, order: Option<&[usize]>) -> Result<OracleSolution, Error> {
    inst.validate()?;
    let inst = if inst.is_padded() { inst.clone() } else { inst.pad()? };
    let d = inst.d();
    let mut vars: Vec<(usize, SubsetMask, i64)> = inst
        .items
        .iter()
        .enumerate()
        .flat_map(|(p, it)| it.costs.iter().map(move |(&s, &c)| (p, s, c)))
        .collect();
    if vars.len() > MAX_ORACLE_VARIABLES {
        return Err(Error::Guard(format!(
            "{} variables exceeds the oracle limit of {MAX_ORACLE_VARIABLES}",
            vars.len()
        )));
    }
    if let Some(order) = order {
        let mut seen = vec![false; vars.len()];
        if order.len() != vars.len() || order.iter().any(|&i| i >= vars.len() || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::InvalidInput("order is not a permutation of the variables".into()));
        }
        vars = order.iter().map(|&i| vars[i]).collect();
    }

    let nv = vars.len();
    let m = inst.n() + d;
    let cols = nv + m;
    let mut rows = vec![vec![Rational::zero(); cols + 1]; m];
    for (j, &(p, s, _)) in vars.iter().enumerate() {
        rows[p][j] = Rational::one();
        for i in 0..d {
            if s.contains(i) {
                rows[inst.n() + i][j] = Rational::one();
            }
        }
    }
    for (p, it) in inst.items.iter().enumerate() {
        rows[p][cols] = rat_int(it.size);
    }
    for (i, b) in inst.bins.iter().enumerate() {
        rows[inst.n() + i][cols] = rat_int(b.capacity);
    }
    for (i, row) in rows.iter_mut().enumerate() {
        row[nv + i] = Rational::one();
    }
    let mut t = Tableau {
        rows,
        obj: Vec::new(),
        basis: (nv..cols).collect(),
        cols,
    };

    let mut phase1 = vec![Rational::zero(); cols];
    for c in &mut phase1[nv..] {
        *c = Rational::one();
    }
    t.set_objective(&phase1);
    t.run(cols)?;
    if !t.obj[cols].is_zero() {
        return Err(Error::Invariant("padded instance is infeasible".into()));
    }

    // drive zero-level artificials out of the basis; drop redundant rows
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= nv {
            match (0..nv).find(|&j| !t.rows[i][j].is_zero()) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    let mut phase2: Vec<Rational> = vars.iter().map(|&(_, _, c)| rat_int(c)).collect();
    phase2.resize(cols, Rational::zero());
    t.set_objective(&phase2);
    t.run(nv)?;

    let mut x = Assignment::new(inst.n(), d);
    for (i, &b) in t.basis.iter().enumerate() {
        let v = t.rhs(i);
        if b < nv && v.is_positive() {
            let (p, s, _) = vars[b];
            x.set(p, s, v.clone());
        }
    }
    if !x.is_perfectly_filled(&inst) {
        return Err(Error::Invariant("oracle vertex is not perfectly filled".into()));
    }
    Ok(OracleSolution {
        objective: x.objective(&inst),
        assignment: x,
        instance: inst,
    })
}

fn move_for(inst: &ProblemInstance, item: usize, source: SubsetMask, target: SubsetMask) -> Move {
    let it = &inst.items[item];
    let c = |s| it.cost(s).expect("allowed option");
    Move {
        item,
        source,
        target,
        cost_delta: c(target) - c(source),
    }
}

/// Moves with magnitudes that carry `x` exactly onto `y`, chosen greedily at
/// the lowest `(item, source, target)` each time.
pub fn difference_moves(
    x: &Assignment,
    y: &Assignment,
    inst: &ProblemInstance,
) -> Result<Vec<(Move, Rational)>, Error> {
    if x.items() != inst.n() || y.items() != inst.n() {
        return Err(Error::InvalidInput("assignments do not match the instance".into()));
    }
    let mut z = x.clone();
    let mut out = Vec::new();
    for p in 0..inst.n() {
        loop {
            let diff = |s: SubsetMask, z: &Assignment| z.get(p, s) - y.get(p, s);
            let options: Vec<SubsetMask> = inst.items[p].costs.keys().copied().collect();
            let Some(&s) = options.iter().find(|&&s| diff(s, &z).is_positive()) else {
                break;
            };
            let t = options
                .iter()
                .copied()
                .find(|&t| diff(t, &z).is_negative())
                .ok_or_else(|| Error::InvalidInput(format!("item {p} totals differ between x and y")))?;
            let beta = std::cmp::min(diff(s, &z), -diff(t, &z));
            z.add(p, s, &-beta.clone());
            z.add(p, t, &beta);
            out.push((move_for(inst, p, s, t), beta));
        }
    }
    if z.entries().ne(y.entries()) {
        return Err(Error::Invariant("difference moves do not reproduce y".into()));
    }
    Ok(out)
}

/// Extracts one augmentation from the difference between two perfectly
/// filled assignments. Every returned move has `x(p,S) > y(p,S)` and
/// `x(p,T) < y(p,T)`, so it is applicable to `x`.
pub fn decompose_difference(x: &Assignment, y: &Assignment, inst: &ProblemInstance) -> Result<Augmentation, Error> {
    if !x.is_perfectly_filled(inst) || !y.is_perfectly_filled(inst) {
        return Err(Error::InvalidInput("both assignments must be perfectly filled".into()));
    }
    if x.entries().eq(y.entries()) {
        return Err(Error::InvalidInput("assignments are identical".into()));
    }
    let d = inst.d();
    let steps = difference_moves(x, y, inst)?;
    let vectors: Vec<Vec<i64>> = steps
        .iter()
        .map(|(m, _)| m.vector(d).into_iter().map(i64::from).collect())
        .collect();
    let mut beta: Vec<Rational> = steps.iter().map(|(_, b)| b.clone()).collect();

    loop {
        let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j].is_positive()).collect();
        let (support, mut gamma) = minimal_dependent(&active, &vectors, d)
            .ok_or_else(|| Error::Invariant("active moves are independent but sum to zero".into()))?;
        let first = gamma.iter().find(|g| !g.is_zero()).expect("circuit is non-empty");
        if first.is_negative() {
            for g in gamma.iter_mut() {
                *g = -g.clone();
            }
        }
        if gamma.iter().all(Signed::is_positive) {
            let moves = support.iter().map(|&j| steps[j].0).collect();
            return Augmentation::from_unordered(moves, gamma, d);
        }
        let c = support
            .iter()
            .zip(&gamma)
            .filter(|(_, g)| g.is_negative())
            .map(|(&j, g)| &beta[j] / -g)
            .min()
            .expect("mixed-sign circuit has a negative entry");
        for (&j, g) in support.iter().zip(&gamma) {
            beta[j] += &c * g;
        }
    }
}

/// First circuit found by adding active vectors in order until a dependence
/// appears. Returns its indices and coefficients.
fn minimal_dependent(active: &[usize], vectors: &[Vec<i64>], d: usize) -> Option<(Vec<usize>, Vec<Rational>)> {
    let mut chosen: Vec<usize> = Vec::new();
    for &j in active {
        chosen.push(j);
        let cols: Vec<Vec<i64>> = chosen.iter().map(|&k| vectors[k].clone()).collect();
        if let Some(ns) = nullspace_vector(&IntMatrix::from_columns(d, &cols)) {
            let (idx, coef): (Vec<usize>, Vec<Rational>) = chosen
                .iter()
                .zip(ns)
                .filter(|(_, g)| !g.is_zero())
                .map(|(&k, g)| (k, g))
                .unzip();
            return Some((idx, coef));
        }
    }
    None
}

/// Exhaustive search over every profile and every tuple of available moves,
/// each scored at its own maximum magnitude. Returns the cheapest candidate
/// with negative cost.
pub fn best_augmentation_bruteforce(
    x: &Assignment,
    inst: &ProblemInstance,
    catalog: &ProfileCatalog,
) -> Result<Option<(Augmentation, Rational)>, Error> {
    let d = inst.d();
    if catalog.d() != d {
        return Err(Error::DimensionMismatch {
            catalog: catalog.d(),
            instance: d,
        });
    }
    let mut by_vector: BTreeMap<Vec<i8>, Vec<Move>> = BTreeMap::new();
    for (p, s, _) in x.entries() {
        for &t in inst.items[p].costs.keys() {
            if t != s {
                by_vector.entry(s.difference_to(t, d)).or_default().push(move_for(inst, p, s, t));
            }
        }
    }
    let mut total: u64 = 0;
    for prof in catalog.profiles() {
        let mut k: u64 = 1;
        for v in prof.vectors() {
            k = k.saturating_mul(by_vector.get(v.entries()).map_or(0, |l| l.len()) as u64);
        }
        total = total.saturating_add(k);
    }
    if total > MAX_BRUTEFORCE_CANDIDATES {
        return Err(Error::Guard(format!("{total} candidate augmentations is too many")));
    }

    let mut best: Option<(Vec<Move>, usize, Rational)> = None;
    for (pi, prof) in catalog.profiles().iter().enumerate() {
        let lists: Option<Vec<&Vec<Move>>> = prof.vectors().iter().map(|v| by_vector.get(v.entries())).collect();
        let Some(lists) = lists else {
            continue;
        };
        let mut pick = vec![0usize; lists.len()];
        'tuples: loop {
            let moves: Vec<Move> = pick.iter().zip(&lists).map(|(&i, l)| l[i]).collect();
            let mut load: BTreeMap<(usize, SubsetMask), Rational> = BTreeMap::new();
            for (m, a) in moves.iter().zip(prof.alpha()) {
                *load.entry((m.item, m.source)).or_insert_with(Rational::zero) += a;
            }
            let magnitude = load
                .iter()
                .map(|(&(p, s), a)| x.get(p, s) / a)
                .min()
                .expect("profile has vectors");
            let unit: Rational = moves
                .iter()
                .zip(prof.alpha())
                .map(|(m, a)| a * rat_int(m.cost_delta))
                .sum();
            let cost = magnitude * unit;
            if cost.is_negative() && best.as_ref().is_none_or(|(_, _, b)| cost < *b) {
                best = Some((moves, pi, cost));
            }
            for i in (0..pick.len()).rev() {
                pick[i] += 1;
                if pick[i] < lists[i].len() {
                    continue 'tuples;
                }
                pick[i] = 0;
            }
            break;
        }
    }
    best.map(|(moves, pi, cost)| Ok((Augmentation::new(moves, catalog.profiles()[pi].clone())?, cost)))
        .transpose()
}
