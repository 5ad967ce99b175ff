//! The augmentation solver: search, application, restoration to a basic
//! feasible assignment, and the main loop.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_traits::{One, Signed, Zero};

use crate::error::Error;
use crate::model::{Assignment, InstanceStats, ProblemInstance, SubsetMask};
use crate::moveindex::{Move, MoveIndex};
use crate::numerics::{self, nullspace_vector, rank, rat_int, IntMatrix, Rational};
use crate::profiles::{canonicalize, Profile, ProfileCatalog, ProfileVector};

/// One move per profile vector, in profile order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Augmentation {
    moves: Vec<Move>,
    profile: Profile,
    grouped: BTreeMap<(usize, SubsetMask), Rational>,
}

impl Augmentation {
    /// Pairs `moves[i]` with `profile.vectors()[i]`; the vectors must match.
    pub fn new(moves: Vec<Move>, profile: Profile) -> Result<Self, Error> {
        if moves.len() != profile.len() {
            return Err(Error::InvalidInput("one move per profile vector required".into()));
        }
        let d = profile.dim();
        for (m, v) in moves.iter().zip(profile.vectors()) {
            if m.source == m.target || m.vector(d) != v.entries() {
                return Err(Error::InvalidInput(format!(
                    "move {m:?} does not realize vector {:?}",
                    v.entries()
                )));
            }
        }
        let mut grouped: BTreeMap<(usize, SubsetMask), Rational> = BTreeMap::new();
        for (m, a) in moves.iter().zip(profile.alpha()) {
            *grouped.entry((m.item, m.source)).or_insert_with(Rational::zero) += a;
        }
        Ok(Self {
            moves,
            profile,
            grouped,
        })
    }

    /// Builds an augmentation from moves in any order by canonicalizing their
    /// vectors with the given coefficients.
    pub fn from_unordered(moves: Vec<Move>, coefficients: Vec<Rational>, d: usize) -> Result<Self, Error> {
        let vectors: Vec<ProfileVector> = moves
            .iter()
            .map(|m| ProfileVector::new(m.vector(d)))
            .collect::<Result<_, _>>()?;
        let mut order: Vec<usize> = (0..moves.len()).collect();
        order.sort_by(|&a, &b| vectors[a].cmp(&vectors[b]));
        let profile = canonicalize(vectors, coefficients)?;
        let moves = order.into_iter().map(|i| moves[i]).collect();
        Self::new(moves, profile)
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn alpha(&self) -> &[Rational] {
        self.profile.alpha()
    }

    pub fn move_costs(&self) -> Vec<i64> {
        self.moves.iter().map(|m| m.cost_delta).collect()
    }

    /// `α(p, S)`: summed coefficients of moves sharing a source.
    pub fn grouped(&self) -> &BTreeMap<(usize, SubsetMask), Rational> {
        &self.grouped
    }

    /// Cost change per unit magnitude, `c · α`.
    pub fn unit_cost(&self) -> Rational {
        self.moves
            .iter()
            .zip(self.alpha())
            .fold(Rational::zero(), |acc, (m, a)| acc + a * rat_int(m.cost_delta))
    }

    /// Cost change when applied with magnitude `a`.
    pub fn cost_at(&self, a: &Rational) -> Rational {
        a * self.unit_cost()
    }
}

/// `min over sources (p,S) of x(p,S) / α(p,S)`.
pub fn max_magnitude(aug: &Augmentation, x: &Assignment) -> Result<Rational, Error> {
    let mut best: Option<Rational> = None;
    for (&(p, s), a) in aug.grouped() {
        let amount = x.get(p, s);
        if !amount.is_positive() {
            return Err(Error::InvalidInput(format!(
                "augmentation source ({p}, {s}) has no mass"
            )));
        }
        let m = amount / a;
        if best.as_ref().is_none_or(|b| m < *b) {
            best = Some(m);
        }
    }
    best.ok_or_else(|| Error::InvalidInput("empty augmentation".into()))
}

/// Shifts `a·α_j` from each move's source to its target. Returns the touched
/// variables with their new amounts.
pub fn apply_to_assignment(
    aug: &Augmentation,
    a: &Rational,
    x: &mut Assignment,
) -> Result<Vec<(usize, SubsetMask, Rational)>, Error> {
    if !a.is_positive() {
        return Err(Error::Invariant("augmentation magnitude must be positive".into()));
    }
    let mut delta: BTreeMap<(usize, SubsetMask), Rational> = BTreeMap::new();
    for (m, alpha) in aug.moves().iter().zip(aug.alpha()) {
        let amt = a * alpha;
        *delta.entry((m.item, m.source)).or_insert_with(Rational::zero) -= &amt;
        *delta.entry((m.item, m.target)).or_insert_with(Rational::zero) += amt;
    }
    let mut touched = Vec::with_capacity(delta.len());
    for ((p, s), dv) in &delta {
        let v = x.get(*p, *s) + dv;
        if v.is_negative() {
            return Err(Error::Invariant(format!(
                "magnitude exceeds the maximum: ({p}, {s}) would become {v}"
            )));
        }
        touched.push((*p, *s, v));
    }
    for (p, s, v) in &touched {
        x.set(*p, *s, v.clone());
    }
    Ok(touched)
}

/// Applies the augmentation and keeps the move index in sync.
pub fn apply(aug: &Augmentation, a: &Rational, x: &mut Assignment, idx: &mut MoveIndex) -> Result<(), Error> {
    for (p, s, v) in apply_to_assignment(aug, a, x)? {
        idx.update_amount(p, s, v);
    }
    Ok(())
}

#[derive(Clone, Debug)]
struct PlanProfile {
    codes: Vec<usize>,
    alpha_ids: Vec<usize>,
}

/// Catalog compiled against one instance: vector codes, the magnitude sweep,
/// and the per-coefficient thresholds `a·α` for every sweep value.
#[derive(Clone, Debug)]
pub struct SearchPlan {
    profiles: Vec<PlanProfile>,
    catalog: Vec<Profile>,
    alphas: Vec<Rational>,
    thresholds: Vec<Vec<Rational>>,
    sweep: Vec<Rational>,
    a_max: Rational,
    a_min: Rational,
}

impl SearchPlan {
    pub fn new(catalog: &ProfileCatalog, stats: &InstanceStats) -> Self {
        let d = catalog.d();
        let z = rat_int(stats.max_size.max(1));
        let mut alphas: Vec<Rational> = Vec::new();
        let mut alpha_index: BTreeMap<Rational, usize> = BTreeMap::new();
        let mut profiles = Vec::with_capacity(catalog.len());
        let mut max_sum = Rational::one();
        for p in catalog.profiles() {
            let ids = p
                .alpha()
                .iter()
                .map(|a| {
                    *alpha_index.entry(a.clone()).or_insert_with(|| {
                        alphas.push(a.clone());
                        alphas.len() - 1
                    })
                })
                .collect();
            let sum: Rational = p.alpha().iter().sum();
            if sum > max_sum {
                max_sum = sum;
            }
            profiles.push(PlanProfile {
                codes: p.codes(),
                alpha_ids: ids,
            });
        }
        let min_alpha = alpha_index.keys().next().cloned().unwrap_or_else(Rational::one);

        let hc = Rational::from_integer(numerics::hadamard_bound_ceil(d));
        let hf = Rational::from_integer(numerics::hadamard_bound_floor(d));
        let a_max = std::cmp::max(&hc * &z, &z / &min_alpha);
        let a_min_bound = std::cmp::max(&hc * rat_int(d as i64), &hf * &max_sum).recip();

        let two = rat_int(2);
        let mut sweep = Vec::new();
        let mut a = &a_max / &two;
        loop {
            sweep.push(a.clone());
            if a <= a_min_bound {
                break;
            }
            a /= &two;
        }
        let a_min = sweep.last().cloned().expect("sweep is non-empty");
        let thresholds = alphas
            .iter()
            .map(|al| sweep.iter().map(|a| a * al).collect())
            .collect();
        Self {
            profiles,
            catalog: catalog.profiles().to_vec(),
            alphas,
            thresholds,
            sweep,
            a_max,
            a_min,
        }
    }

    pub fn sweep(&self) -> &[Rational] {
        &self.sweep
    }

    pub fn a_max(&self) -> &Rational {
        &self.a_max
    }

    /// Smallest sweep value; `a_max / a_min` is a power of two.
    pub fn a_min(&self) -> &Rational {
        &self.a_min
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}

/// Result of [`find_augmentation`].
#[derive(Clone, Debug)]
pub struct FoundAugmentation {
    pub augmentation: Augmentation,
    /// `a · Σ c_i α_i` at the sweep value that produced it.
    pub predicted_cost: Rational,
    pub sweep_value: Rational,
    pub profile_index: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchCounters {
    pub profile_scans: u64,
    pub index_queries: u64,
}

impl std::ops::AddAssign for SearchCounters {
    fn add_assign(&mut self, o: Self) {
        self.profile_scans += o.profile_scans;
        self.index_queries += o.index_queries;
    }
}

struct Candidate {
    cost: Rational,
    profile: usize,
    step: usize,
    moves: Vec<Move>,
}

fn better(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (None, b) => b,
        (a, None) => a,
        (Some(a), Some(b)) => {
            if (&b.cost, b.profile, b.step) < (&a.cost, a.profile, a.step) {
                Some(b)
            } else {
                Some(a)
            }
        }
    }
}

fn scan_profile(
    plan: &SearchPlan,
    idx: &MoveIndex,
    pi: usize,
    min_delta: &[Option<i64>],
    counters: &mut SearchCounters,
) -> Option<Candidate> {
    let prof = &plan.profiles[pi];
    counters.profile_scans += 1;
    // Σ α_i·(cheapest delta of vector i) bounds the unit cost at every step
    let mut unit_floor = Rational::zero();
    for (&code, &aid) in prof.codes.iter().zip(&prof.alpha_ids) {
        unit_floor += &plan.alphas[aid] * rat_int(min_delta[code]?);
    }
    if !unit_floor.is_negative() {
        return None;
    }
    let mut best: Option<Candidate> = None;
    let mut moves = Vec::with_capacity(prof.codes.len());
    for (step, a) in plan.sweep.iter().enumerate() {
        // pruning is profile-local so the counters match across scan modes
        if best.as_ref().is_some_and(|b| a * &unit_floor >= b.cost) {
            // later steps have smaller magnitude, so the floor only rises
            break;
        }
        moves.clear();
        let mut unit = Rational::zero();
        for (&code, &aid) in prof.codes.iter().zip(&prof.alpha_ids) {
            counters.index_queries += 1;
            match idx.query_code(code, &plan.thresholds[aid][step]) {
                Some(m) => {
                    unit += &plan.alphas[aid] * rat_int(m.cost_delta);
                    moves.push(m);
                }
                None => break,
            }
        }
        if moves.len() != prof.codes.len() || !unit.is_negative() {
            continue;
        }
        let cost = a * unit;
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            best = Some(Candidate {
                cost,
                profile: pi,
                step,
                moves: moves.clone(),
            });
        }
    }
    best
}

/// Scans every profile over the magnitude sweep and returns the candidate
/// with the most negative predicted cost, or `None` if no candidate has
/// negative cost. Ties go to the lower profile index, then the larger sweep
/// value, independent of `parallel`.
pub fn find_augmentation(
    idx: &MoveIndex,
    plan: &SearchPlan,
    parallel: bool,
) -> (Option<FoundAugmentation>, SearchCounters) {
    let (best, counters) = scan_all(idx, plan, parallel);
    let found = best.map(|c| {
        let profile = plan.catalog[c.profile].clone();
        FoundAugmentation {
            augmentation: Augmentation::new(c.moves, profile).expect("index moves realize profile vectors"),
            predicted_cost: c.cost,
            sweep_value: plan.sweep[c.step].clone(),
            profile_index: c.profile,
        }
    });
    (found, counters)
}

fn scan_all(idx: &MoveIndex, plan: &SearchPlan, parallel: bool) -> (Option<Candidate>, SearchCounters) {
    let min_delta: Vec<Option<i64>> = (0..3usize.pow(idx.d() as u32))
        .map(|c| idx.cheapest(c).map(|m| m.cost_delta))
        .collect();
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return (0..plan.profiles.len())
            .into_par_iter()
            .map(|pi| {
                let mut c = SearchCounters::default();
                let best = scan_profile(plan, idx, pi, &min_delta, &mut c);
                (best, c)
            })
            .reduce(
                || (None, SearchCounters::default()),
                |(a, mut ca), (b, cb)| {
                    ca += cb;
                    (better(a, b), ca)
                },
            );
    }
    let _ = parallel;
    let mut counters = SearchCounters::default();
    let mut best = None;
    for pi in 0..plan.profiles.len() {
        let cand = scan_profile(plan, idx, pi, &min_delta, &mut counters);
        best = better(best, cand);
    }
    (best, counters)
}

/// Picks the base option of a fractional item: largest amount, then lowest
/// mask.
fn pick_base<'a>(options: impl Iterator<Item = (SubsetMask, &'a Rational)>) -> Option<SubsetMask> {
    let mut best: Option<(SubsetMask, &Rational)> = None;
    for (s, v) in options {
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((s, v));
        }
    }
    best.map(|(s, _)| s)
}

fn indicator_diff(s: SubsetMask, base: SubsetMask, d: usize) -> Vec<i64> {
    (0..d)
        .map(|i| i64::from(s.contains(i)) - i64::from(base.contains(i)))
        .collect()
}

/// Non-base fractional variables and their difference vectors for the given
/// base choice, in `(item, mask)` order.
pub fn nonbase_variables(
    x: &Assignment,
    base: &BTreeMap<usize, SubsetMask>,
) -> Vec<(usize, SubsetMask, SubsetMask)> {
    base.iter()
        .flat_map(|(&p, &sp)| {
            x.options_of(p)
                .filter(move |&(s, _)| s != sp)
                .map(move |(s, _)| (p, s, sp))
        })
        .collect()
}

/// Base options selected by the deterministic rule for every item with at
/// least two positive options.
pub fn default_bases(x: &Assignment) -> BTreeMap<usize, SubsetMask> {
    let mut out = BTreeMap::new();
    for p in 0..x.items() {
        if x.options_of(p).nth(1).is_some() {
            out.insert(p, pick_base(x.options_of(p)).expect("item has options"));
        }
    }
    out
}

/// True when the difference vectors of the non-base fractional variables are
/// linearly independent for the given base choice.
pub fn is_bfa_with(x: &Assignment, base: &BTreeMap<usize, SubsetMask>) -> bool {
    let d = x.d();
    let vars = nonbase_variables(x, base);
    if vars.len() > d {
        return false;
    }
    let cols: Vec<Vec<i64>> = vars.iter().map(|&(_, s, sp)| indicator_diff(s, sp, d)).collect();
    rank(&IntMatrix::from_columns(d, &cols)) == cols.len()
}

/// Basic-feasible-assignment test with the default base choice.
pub fn is_bfa(x: &Assignment) -> bool {
    is_bfa_with(x, &default_bases(x))
}

/// Moves mass along linear dependences among the fractional variables until
/// their difference vectors are independent. Never increases the objective.
/// Returns the number of dependence-cancelling steps taken.
pub fn restore(x: &mut Assignment, idx: &mut MoveIndex, inst: &ProblemInstance) -> Result<usize, Error> {
    restore_inner(x, Some(idx), inst)
}

/// [`restore`] without a move index.
pub fn restore_assignment(x: &mut Assignment, inst: &ProblemInstance) -> Result<usize, Error> {
    restore_inner(x, None, inst)
}

fn restore_inner(
    x: &mut Assignment,
    mut idx: Option<&mut MoveIndex>,
    inst: &ProblemInstance,
) -> Result<usize, Error> {
    let d = inst.d();
    let mut base = default_bases(x);
    let initial_frac = x.fractional_stats().0;
    let mut steps = 0usize;
    loop {
        let vars = nonbase_variables(x, &base);
        if vars.is_empty() {
            break;
        }
        let cols: Vec<Vec<i64>> = vars.iter().map(|&(_, s, sp)| indicator_diff(s, sp, d)).collect();
        let m = IntMatrix::from_columns(d, &cols);
        let Some(mut beta) = nullspace_vector(&m) else {
            break;
        };
        steps += 1;
        if steps > initial_frac {
            return Err(Error::Invariant(format!(
                "restore exceeded {initial_frac} steps"
            )));
        }

        let cost = |p: usize, s: SubsetMask| rat_int(inst.items[p].cost(s).expect("allowed option"));
        let derivative = vars
            .iter()
            .zip(&beta)
            .fold(Rational::zero(), |acc, (&(p, s, sp), b)| acc + b * (cost(p, s) - cost(p, sp)));
        if derivative.is_positive() {
            for b in beta.iter_mut() {
                *b = -b.clone();
            }
        }

        // net outflow from each item's base option
        let mut base_out: BTreeMap<usize, Rational> = BTreeMap::new();
        for (&(p, _, _), b) in vars.iter().zip(&beta) {
            *base_out.entry(p).or_insert_with(Rational::zero) += b;
        }
        let mut step: Option<Rational> = None;
        let mut consider = |v: Rational| {
            if step.as_ref().is_none_or(|s| v < *s) {
                step = Some(v);
            }
        };
        for (&(p, s, _), b) in vars.iter().zip(&beta) {
            if b.is_negative() {
                consider(x.get(p, s) / -b);
            }
        }
        for (&p, out) in &base_out {
            if out.is_positive() {
                consider(x.get(p, base[&p]) / out);
            }
        }
        let a = step.ok_or_else(|| Error::Invariant("restore found no bounding variable".into()))?;

        let mut touched: BTreeMap<(usize, SubsetMask), Rational> = BTreeMap::new();
        for (&(p, s, _), b) in vars.iter().zip(&beta) {
            if !b.is_zero() {
                let v = x.add(p, s, &(&a * b));
                touched.insert((p, s), v);
            }
        }
        for (&p, out) in &base_out {
            if !out.is_zero() {
                let sp = base[&p];
                let v = x.add(p, sp, &-(&a * out));
                touched.insert((p, sp), v);
            }
        }
        if let Some(idx) = idx.as_deref_mut() {
            for ((p, s), v) in &touched {
                idx.update_amount(*p, *s, v.clone());
            }
        }

        // re-seat base options that ran empty; drop items that became integral
        let items: Vec<usize> = base_out.keys().copied().collect();
        for p in items {
            if x.options_of(p).nth(1).is_none() {
                base.remove(&p);
            } else if x.get_ref(p, base[&p]).is_none() {
                let nb = pick_base(x.options_of(p)).expect("fractional item has options");
                base.insert(p, nb);
            }
        }
    }
    Ok(steps)
}

/// Upper bound on main-loop iterations: `⌈4d(n+d)·ln(n·C·d^d)⌉ + 1`.
pub fn iteration_budget(stats: &InstanceStats) -> u64 {
    let (n, d, c) = (stats.n as f64, stats.d as f64, stats.max_cost as f64);
    if stats.n == 0 || stats.max_cost == 0 {
        return 1;
    }
    let log = n.ln() + c.ln() + d * d.ln();
    if log <= 0.0 {
        return 1;
    }
    (4.0 * d * (n + d) * log).ceil() as u64 + 1
}

#[derive(Clone, Debug)]
pub struct SolveConfig {
    /// Stop after this many augmentations (testing only).
    pub max_iterations: Option<u64>,
    /// Scan profiles in parallel when the `parallel` feature is enabled.
    pub parallel: bool,
    /// Log per-iteration statistics at `debug` level.
    pub verbose: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            max_iterations: None,
            parallel: cfg!(feature = "parallel"),
            verbose: false,
        }
    }
}

/// Hooks into the main loop, mainly for invariant checking.
pub trait SolveObserver {
    fn before_search(&mut self, _x: &Assignment, _inst: &ProblemInstance) {}
    fn after_apply(&mut self, _x: &Assignment, _inst: &ProblemInstance, _found: &FoundAugmentation, _magnitude: &Rational) {}
    fn after_restore(&mut self, _x: &Assignment, _inst: &ProblemInstance, _steps: usize) {}
}

pub struct NoObserver;

impl SolveObserver for NoObserver {}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub objective: Rational,
    pub assignment: Assignment,
    /// The padded instance the assignment refers to.
    pub instance: ProblemInstance,
    pub iterations: u64,
    pub iteration_budget: u64,
    pub restore_steps: u64,
    pub profile_scans: u64,
    pub index_queries: u64,
    /// False when stopped by `max_iterations` before convergence.
    pub converged: bool,
    pub wall_time: Duration,
}

pub fn solve(inst: &ProblemInstance, catalog: &ProfileCatalog, config: &SolveConfig) -> Result<SolveReport, Error> {
    solve_observed(inst, catalog, config, &mut NoObserver)
}

pub fn solve_observed(
    inst: &ProblemInstance,
    catalog: &ProfileCatalog,
    config: &SolveConfig,
    observer: &mut dyn SolveObserver,
) -> Result<SolveReport, Error> {
    let start = Instant::now();
    inst.validate()?;
    let inst = if inst.is_padded() { inst.clone() } else { inst.pad()? };
    if catalog.d() != inst.d() {
        return Err(Error::DimensionMismatch {
            catalog: catalog.d(),
            instance: inst.d(),
        });
    }
    let stats = inst.stats();
    let budget = iteration_budget(&stats);
    let mut x = inst.initial_assignment()?;
    let mut report = SolveReport {
        objective: Rational::zero(),
        assignment: x.clone(),
        instance: inst.clone(),
        iterations: 0,
        iteration_budget: budget,
        restore_steps: 0,
        profile_scans: 0,
        index_queries: 0,
        converged: true,
        wall_time: Duration::ZERO,
    };
    if x.positive_count() == 0 {
        report.wall_time = start.elapsed();
        return Ok(report);
    }
    let mut idx = MoveIndex::build(&x, &inst)?;
    let plan = SearchPlan::new(catalog, &stats);
    let mut counters = SearchCounters::default();
    loop {
        observer.before_search(&x, &inst);
        let (found, c) = find_augmentation(&idx, &plan, config.parallel);
        counters += c;
        let Some(found) = found else {
            break;
        };
        if config.max_iterations.is_some_and(|m| report.iterations >= m) {
            report.converged = false;
            break;
        }
        report.iterations += 1;
        if report.iterations > budget {
            return Err(Error::BudgetExceeded { budget });
        }
        let a = max_magnitude(&found.augmentation, &x)?;
        // shared sources can make this smaller than the sweep value, never zero
        if !a.is_positive() {
            return Err(Error::Invariant("augmentation has zero magnitude".into()));
        }
        let before = if config.verbose { Some(x.objective(&inst)) } else { None };
        apply(&found.augmentation, &a, &mut x, &mut idx)?;
        observer.after_apply(&x, &inst, &found, &a);
        let steps = restore(&mut x, &mut idx, &inst)?;
        report.restore_steps += steps as u64;
        observer.after_restore(&x, &inst, steps);
        if let Some(before) = before {
            log::debug!(
                "iteration {}: profile {} magnitude {} objective {} -> {} ({} restore steps)",
                report.iterations,
                found.profile_index,
                numerics::format_rational(&a),
                numerics::format_rational(&before),
                numerics::format_rational(&x.objective(&inst)),
                steps
            );
        }
    }
    report.objective = x.objective(&inst);
    report.assignment = x;
    report.profile_scans = counters.profile_scans;
    report.index_queries = counters.index_queries;
    report.wall_time = start.elapsed();
    Ok(report)
}

/// Lcm of all amount denominators must not exceed `⌊d^{d/2}⌋` at a basic
/// feasible assignment.
pub fn denominator_bound_holds(x: &Assignment, d: usize) -> bool {
    x.denominator_lcm() <= numerics::hadamard_bound_floor(d)
}
