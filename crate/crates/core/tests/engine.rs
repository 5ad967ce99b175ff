mod common;

use std::collections::BTreeMap;

use common::*;
use num_traits::Zero;
use subsetalloc::engine::*;
use subsetalloc::model::{Assignment, SubsetMask};
use subsetalloc::moveindex::{Move, MoveIndex};
use subsetalloc::numerics::{rat, Rational};
use subsetalloc::oracle::simplex_solve;
use subsetalloc::profiles::{canonicalize, ProfileVector};
use subsetalloc::Error;

fn swap_profile() -> subsetalloc::profiles::Profile {
    let v = |e: Vec<i8>| ProfileVector::new(e).unwrap();
    canonicalize(vec![v(vec![-1, 1]), v(vec![1, -1])], vec![rat(1, 1), rat(1, 1)]).unwrap()
}

fn mv(item: usize, source: u32, target: u32) -> Move {
    Move { item, source: SubsetMask(source), target: SubsetMask(target), cost_delta: 0 }
}

#[test]
fn magnitude_with_disjoint_sources() {
    let mut x = Assignment::new(2, 2);
    x.set(0, SubsetMask(1), rat(3, 1));
    x.set(1, SubsetMask(2), rat(2, 1));
    let aug = Augmentation::new(vec![mv(0, 1, 2), mv(1, 2, 1)], swap_profile()).unwrap();
    assert_eq!(max_magnitude(&aug, &x).unwrap(), rat(2, 1));
}

#[test]
fn magnitude_with_shared_source() {
    let mut x = Assignment::new(2, 2);
    x.set(0, SubsetMask(3), rat(3, 1));
    x.set(1, SubsetMask(0), rat(5, 1));
    // {b,c}→{c} and {b,c}→{b} both draw on (0, {b,c})
    let aug = Augmentation::from_unordered(vec![mv(0, 3, 2), mv(0, 3, 1), mv(1, 0, 3)], vec![rat(1, 1); 3], 2).unwrap();
    assert_eq!(aug.grouped()[&(0, SubsetMask(3))], rat(2, 1));
    assert_eq!(max_magnitude(&aug, &x).unwrap(), rat(3, 2));
}

#[test]
fn magnitude_with_half_coefficient() {
    let mut x = Assignment::new(3, 2);
    x.set(0, SubsetMask(3), rat(1, 1));
    x.set(1, SubsetMask(1), rat(9, 1));
    x.set(2, SubsetMask(2), rat(9, 1));
    // (1,1) balanced by (-1,0) and (0,-1): scaled so the first coefficient is 1/2
    let aug = Augmentation::from_unordered(vec![mv(0, 3, 0), mv(1, 1, 3), mv(2, 2, 3)], vec![rat(2, 1), rat(2, 1), rat(2, 1)], 2).unwrap();
    let a: Vec<Rational> = aug.alpha().to_vec();
    assert_eq!(a[0], rat(1, 1));
    assert_eq!(max_magnitude(&aug, &x).unwrap(), rat(1, 1));
}

#[test]
fn magnitude_rejects_empty_source() {
    let x = Assignment::new(2, 2);
    let aug = Augmentation::new(vec![mv(0, 1, 2), mv(1, 2, 1)], swap_profile()).unwrap();
    assert!(max_magnitude(&aug, &x).is_err());
}

#[test]
fn augmentation_rejects_mismatched_vectors() {
    assert!(Augmentation::new(vec![mv(1, 2, 1), mv(0, 1, 2)], swap_profile()).is_err());
    assert!(Augmentation::new(vec![mv(0, 1, 2)], swap_profile()).is_err());
}

#[test]
fn apply_balanced_swap_keeps_loads() {
    let inst = two_item_example(100).pad().unwrap();
    let mut x = inst.initial_assignment().unwrap();
    let (p, q) = (inst.item_index("p").unwrap(), inst.item_index("q").unwrap());
    // put p on {b} and q on {c} first
    x.set(p, SubsetMask(0), Rational::zero());
    x.set(p, SubsetMask(1), rat(1, 1));
    x.set(q, SubsetMask(0), Rational::zero());
    x.set(q, SubsetMask(2), rat(1, 1));
    x.set(0, SubsetMask(1), Rational::zero());
    x.set(0, SubsetMask(0), rat(1, 1));
    x.set(1, SubsetMask(2), Rational::zero());
    x.set(1, SubsetMask(0), rat(1, 1));
    assert!(x.is_perfectly_filled(&inst));
    let mut idx = MoveIndex::build(&x, &inst).unwrap();
    let mk = |item: usize, s: u32, t: u32| {
        let c = |m| inst.items[item].cost(SubsetMask(m)).unwrap();
        Move { item, source: SubsetMask(s), target: SubsetMask(t), cost_delta: c(t) - c(s) }
    };
    let aug = Augmentation::new(vec![mk(p, 1, 2), mk(q, 2, 1)], swap_profile()).unwrap();
    let before = x.objective(&inst);
    let a = max_magnitude(&aug, &x).unwrap();
    assert_eq!(a, rat(1, 1));
    apply(&aug, &a, &mut x, &mut idx).unwrap();
    assert!(x.is_perfectly_filled(&inst));
    assert_eq!(x.get(p, SubsetMask(2)), rat(1, 1));
    assert_eq!(x.get(q, SubsetMask(1)), rat(1, 1));
    assert_eq!(x.objective(&inst) - before, aug.cost_at(&a));
    assert_eq!(idx.amount(p, SubsetMask(1)), None);
    assert_eq!(idx.amount(p, SubsetMask(2)), Some(&rat(1, 1)));
}

#[test]
fn apply_rejects_excess_magnitude() {
    let inst = two_item_example(100).pad().unwrap();
    let mut x = inst.initial_assignment().unwrap();
    let (p, q) = (inst.item_index("p").unwrap(), inst.item_index("q").unwrap());
    x.set(p, SubsetMask(0), Rational::zero());
    x.set(p, SubsetMask(1), rat(1, 1));
    x.set(q, SubsetMask(0), Rational::zero());
    x.set(q, SubsetMask(2), rat(1, 1));
    let aug = Augmentation::new(vec![mv(p, 1, 2), mv(q, 2, 1)], swap_profile()).unwrap();
    assert!(apply_to_assignment(&aug, &rat(2, 1), &mut x.clone()).is_err());
    assert!(apply_to_assignment(&aug, &rat(0, 1), &mut x).is_err());
}

#[test]
fn two_item_example_solves_to_one_half() {
    let inst = two_item_example(100);
    let r = solve(&inst, catalog(2), &SolveConfig::default()).unwrap();
    assert_eq!(r.objective, rat(1, 2));
    let (p, q) = (r.instance.item_index("p").unwrap(), r.instance.item_index("q").unwrap());
    let x = &r.assignment;
    assert_eq!(x.get(p, SubsetMask(3)), rat(1, 2));
    assert_eq!(x.get(p, SubsetMask(0)), rat(1, 2));
    assert_eq!(x.get(q, SubsetMask(1)), rat(1, 2));
    assert_eq!(x.get(q, SubsetMask(2)), rat(1, 2));
    assert!(r.iterations <= r.iteration_budget);
    assert!(is_bfa(x));
}

#[test]
fn initial_search_finds_negative_candidate() {
    let inst = two_item_example(100).pad().unwrap();
    let x = inst.initial_assignment().unwrap();
    let idx = MoveIndex::build(&x, &inst).unwrap();
    let plan = SearchPlan::new(catalog(2), &inst.stats());
    let (found, counters) = find_augmentation(&idx, &plan, false);
    assert!(found.unwrap().predicted_cost < Rational::zero());
    assert!(counters.profile_scans > 0);
}

#[test]
fn nonnegative_deltas_stop_immediately() {
    // every item prefers ∅
    let mut inst = two_item_example(100);
    for it in &mut inst.items {
        for (m, c) in it.costs.iter_mut() {
            *c = if m.is_empty() { 0 } else { 5 };
        }
    }
    let r = solve(&inst, catalog(2), &SolveConfig::default()).unwrap();
    assert_eq!(r.iterations, 0);
    assert_eq!(r.objective, Rational::zero());
}

#[test]
fn sweep_is_power_of_two_bracket() {
    let inst = random_instance(5).pad().unwrap();
    let plan = SearchPlan::new(catalog(inst.d()), &inst.stats());
    let ratio = plan.a_max() / plan.a_min();
    assert!(ratio.is_integer());
    let n = ratio.numer();
    assert!((n & (n - 1u32)).is_zero());
    assert_eq!(plan.sweep().len() as u64, ratio.numer().bits() - 1);
}

#[test]
fn catalog_dimension_must_match() {
    let err = solve(&two_item_example(3), catalog(3), &SolveConfig::default()).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch { catalog: 3, instance: 2 }));
}

#[test]
fn max_iterations_truncates() {
    let r = solve(&two_item_example(100), catalog(2), &SolveConfig { max_iterations: Some(0), ..SolveConfig::default() }).unwrap();
    assert!(!r.converged);
    assert_eq!(r.iterations, 0);
}

#[test]
fn matches_oracle_with_invariants() {
    for seed in 0..60 {
        let inst = random_instance(seed);
        let mut chk = InvariantChecker::default();
        let r = solve_observed(&inst, catalog(inst.d()), &SolveConfig::default(), &mut chk).unwrap();
        let o = simplex_solve(&inst).unwrap();
        assert_eq!(r.objective, o.objective, "seed {seed}");
        assert!(r.iterations <= r.iteration_budget, "seed {seed}");
        assert!(chk.filling_violations.is_empty(), "seed {seed}: {:?}", chk.filling_violations);
        assert!(chk.bfa_violations.is_empty(), "seed {seed}: {:?}", chk.bfa_violations);
        assert!(chk.objective_violations.is_empty(), "seed {seed}: {:?}", chk.objective_violations);
    }
}

#[test]
fn parallel_and_sequential_agree() {
    for seed in 0..12 {
        let inst = random_instance(seed);
        let a = solve(&inst, catalog(inst.d()), &SolveConfig { parallel: true, ..SolveConfig::default() }).unwrap();
        let b = solve(&inst, catalog(inst.d()), &SolveConfig { parallel: false, ..SolveConfig::default() }).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.iterations, b.iterations);
        assert_eq!((a.profile_scans, a.index_queries), (b.profile_scans, b.index_queries));
    }
}

#[test]
fn restore_reaches_basic_structure_without_raising_cost() {
    // start from the average of two oracle vertices, which is usually not basic
    for seed in 0..40 {
        let inst = random_instance(seed).pad().unwrap();
        let y = simplex_solve(&inst).unwrap().assignment;
        let x0 = inst.initial_assignment().unwrap();
        let mut x = Assignment::new(inst.n(), inst.d());
        let half = rat(1, 2);
        let mut sum: BTreeMap<(usize, SubsetMask), Rational> = BTreeMap::new();
        for (p, s, v) in x0.entries().chain(y.entries()) {
            *sum.entry((p, s)).or_insert_with(Rational::zero) += v * &half;
        }
        for ((p, s), v) in sum {
            x.set(p, s, v);
        }
        assert!(x.is_perfectly_filled(&inst));
        let before = x.objective(&inst);
        let frac = x.fractional_stats().0;
        let mut idx = MoveIndex::build(&x, &inst).unwrap();
        let steps = restore(&mut x, &mut idx, &inst).unwrap();
        assert!(steps <= frac);
        assert!(is_bfa(&x), "seed {seed}");
        assert!(x.is_perfectly_filled(&inst));
        assert!(x.objective(&inst) <= before);
        let rebuilt = MoveIndex::build(&x, &inst).unwrap();
        assert_eq!(idx.moves(), rebuilt.moves());
        // already basic: no-op
        let again = x.clone();
        assert_eq!(restore(&mut x, &mut idx, &inst).unwrap(), 0);
        assert_eq!(x, again);
    }
}

#[test]
fn budget_formula() {
    let inst = two_item_example(100).pad().unwrap();
    let s = inst.stats();
    // 4·2·4·ln(2·100·4) = 32·ln 800
    let expect = (32.0 * 800f64.ln()).ceil() as u64 + 1;
    assert_eq!(iteration_budget(&s), expect);
}
