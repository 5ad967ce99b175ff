#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_traits::Zero;
use subsetalloc::engine::{FoundAugmentation, SolveObserver};
use subsetalloc::gen::{generate, GenParams};
use subsetalloc::model::{Assignment, Bin, Item, ProblemInstance, SubsetMask};
use subsetalloc::numerics::{hadamard_bound_floor, rat, Rational};
use subsetalloc::profiles::{enumerate_profiles, ProfileCatalog};

pub fn costs(pairs: &[(u32, i64)]) -> BTreeMap<SubsetMask, i64> {
    pairs.iter().map(|&(m, c)| (SubsetMask(m), c)).collect()
}

/// Two unit items on two unit bins whose optimum is fractional.
pub fn two_item_example(c: i64) -> ProblemInstance {
    ProblemInstance::new(
        vec![
            Bin { id: "b".into(), capacity: 1 },
            Bin { id: "c".into(), capacity: 1 },
        ],
        vec![
            Item { id: "p".into(), size: 1, costs: costs(&[(0, 1), (1, c), (2, c), (3, 0)]) },
            Item { id: "q".into(), size: 1, costs: costs(&[(0, c), (1, 0), (2, 0), (3, c)]) },
        ],
    )
}

pub fn catalog(d: usize) -> &'static ProfileCatalog {
    static CATALOGS: [OnceLock<ProfileCatalog>; 4] = [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    CATALOGS[d].get_or_init(|| enumerate_profiles(d).expect("small catalog"))
}

/// Instance drawn from the parameter ranges of the oracle comparison suite.
pub fn random_instance(seed: u64) -> ProblemInstance {
    let d = 1 + (seed % 3) as usize;
    let n = 1 + ((seed / 3) % 8) as usize;
    let forbid = if (seed / 24).is_multiple_of(2) { rat(0, 1) } else { rat(1, 4) };
    generate(&GenParams {
        seed,
        d,
        n,
        max_size: 5,
        max_capacity: 10,
        max_cost: 100,
        forbid_fraction: forbid,
        max_copies: None,
    })
    .expect("valid params")
}

/// Checks perfect filling after every apply and restore, and the basic
/// feasible structure after every restore.
#[derive(Default)]
pub struct InvariantChecker {
    pub applies: usize,
    pub restores: usize,
    pub filling_violations: Vec<String>,
    pub bfa_violations: Vec<String>,
    pub objective_violations: Vec<String>,
    last_objective: Option<Rational>,
}

impl SolveObserver for InvariantChecker {
    fn before_search(&mut self, x: &Assignment, inst: &ProblemInstance) {
        // restore already compared against the previous state
        self.last_objective = Some(x.objective(inst));
    }

    fn after_apply(&mut self, x: &Assignment, inst: &ProblemInstance, found: &FoundAugmentation, a: &Rational) {
        self.applies += 1;
        if !x.is_perfectly_filled(inst) {
            self.filling_violations.push(format!("apply #{}", self.applies));
        }
        let obj = x.objective(inst);
        let prev = self.last_objective.take().unwrap_or_else(Rational::zero);
        if obj.clone() - &prev != found.augmentation.cost_at(a) || obj >= prev {
            self.objective_violations.push(format!("apply #{}: {prev} -> {obj}", self.applies));
        }
        self.last_objective = Some(obj);
    }

    fn after_restore(&mut self, x: &Assignment, inst: &ProblemInstance, _steps: usize) {
        self.restores += 1;
        if !x.is_perfectly_filled(inst) {
            self.filling_violations.push(format!("restore #{}", self.restores));
        }
        let d = inst.d();
        let (vars, items) = x.fractional_stats();
        if vars > 2 * d || items > d {
            self.bfa_violations.push(format!("restore #{}: {vars} fractional variables, {items} items", self.restores));
        }
        if x.denominator_lcm() > hadamard_bound_floor(d) {
            self.bfa_violations.push(format!("restore #{}: denominator lcm {}", self.restores, x.denominator_lcm()));
        }
        let obj = x.objective(inst);
        if let Some(prev) = &self.last_objective {
            if obj > *prev {
                self.objective_violations.push(format!("restore #{}: {prev} -> {obj}", self.restores));
            }
        }
        self.last_objective = Some(obj);
    }
}

/// A vertex of the padded instance's feasible region, found by re-solving
/// with costs drawn from `seed`. Option sets are unchanged, so the result is
/// a feasible assignment for `inst.pad()`.
pub fn random_vertex(inst: &ProblemInstance, seed: u64) -> Assignment {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut alt = inst.clone();
    for it in &mut alt.items {
        for c in it.costs.values_mut() {
            *c = rng.gen_range(0..50);
        }
    }
    subsetalloc::oracle::simplex_solve(&alt).expect("small instance").assignment
}

/// Number of minimally dependent positive subsets of `{-1,0,1}^d \ {0}`,
/// counted straight from the definition by depth-first search over
/// independent prefixes.
pub fn direct_circuit_count(d: usize) -> u64 {
    let vs: Vec<Vec<i128>> = (0..3usize.pow(d as u32))
        .map(|mut c| {
            let mut e = vec![0; d];
            for i in (0..d).rev() {
                e[i] = (c % 3) as i128 - 1;
                c /= 3;
            }
            e
        })
        .filter(|v| v.iter().any(|&x| x != 0))
        .collect();
    let mut count = 0;
    dfs(&vs, d, 0, &mut Vec::new(), &mut count);
    count
}

fn dfs(vs: &[Vec<i128>], d: usize, start: usize, cur: &mut Vec<usize>, count: &mut u64) {
    for u in start..vs.len() {
        cur.push(u);
        let cols: Vec<&Vec<i128>> = cur.iter().map(|&i| &vs[i]).collect();
        match kernel(&cols, d) {
            Kernel::Trivial => {
                if cur.len() <= d {
                    dfs(vs, d, u + 1, cur, count);
                }
            }
            Kernel::Line(k) => {
                if k.iter().all(|&v| v > 0) || k.iter().all(|&v| v < 0) {
                    *count += 1;
                }
            }
            Kernel::Larger => {}
        }
        cur.pop();
    }
}

enum Kernel {
    Trivial,
    Line(Vec<i128>),
    Larger,
}

/// Fraction-free elimination over `i128`.
fn kernel(cols: &[&Vec<i128>], d: usize) -> Kernel {
    let r = cols.len();
    let mut a: Vec<Vec<i128>> = (0..d).map(|i| (0..r).map(|j| cols[j][i]).collect()).collect();
    let mut piv = Vec::new();
    let mut row = 0;
    for c in 0..r {
        if row == d {
            break;
        }
        let Some(p) = (row..d).find(|&i| a[i][c] != 0) else {
            continue;
        };
        a.swap(p, row);
        for i in 0..d {
            if i != row && a[i][c] != 0 {
                let (x, y) = (a[row][c], a[i][c]);
                for k in 0..r {
                    a[i][k] = a[i][k] * x - a[row][k] * y;
                }
                let g = a[i].iter().fold(0i128, |g, &v| gcd(g, v.abs()));
                if g > 1 {
                    for k in 0..r {
                        a[i][k] /= g;
                    }
                }
            }
        }
        piv.push(c);
        row += 1;
    }
    match r - piv.len() {
        0 => Kernel::Trivial,
        1 => {
            let free = (0..r).find(|c| !piv.contains(c)).unwrap();
            let l = piv.iter().enumerate().fold(1i128, |acc, (i, &pc)| lcm(acc, a[i][pc].abs()));
            let mut x = vec![0i128; r];
            x[free] = l;
            for (i, &pc) in piv.iter().enumerate() {
                x[pc] = -a[i][free] * l / a[i][pc];
            }
            Kernel::Line(x)
        }
        _ => Kernel::Larger,
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: i128, b: i128) -> i128 {
    a / gcd(a, b) * b
}

/// Linear-scan model of the move index.
pub struct ShadowIndex {
    pub d: usize,
    pub amounts: BTreeMap<(usize, SubsetMask), Rational>,
    options: Vec<Vec<(SubsetMask, i64)>>,
}

impl ShadowIndex {
    pub fn new(inst: &ProblemInstance) -> Self {
        Self {
            d: inst.d(),
            amounts: BTreeMap::new(),
            options: inst.items.iter().map(|it| it.costs.iter().map(|(&m, &c)| (m, c)).collect()).collect(),
        }
    }

    pub fn set(&mut self, item: usize, source: SubsetMask, v: Rational) {
        if v.is_zero() {
            self.amounts.remove(&(item, source));
        } else {
            self.amounts.insert((item, source), v);
        }
    }

    pub fn query(&self, vector: &[i8], x0: &Rational) -> Option<subsetalloc::moveindex::Move> {
        let mut best: Option<subsetalloc::moveindex::Move> = None;
        for (&(p, s), v) in &self.amounts {
            if v < x0 {
                continue;
            }
            let cs = self.options[p].iter().find(|o| o.0 == s).unwrap().1;
            for &(t, ct) in &self.options[p] {
                if t == s || s.difference_to(t, self.d) != vector {
                    continue;
                }
                let m = subsetalloc::moveindex::Move { item: p, source: s, target: t, cost_delta: ct - cs };
                if best.is_none_or(|b| m.preference() < b.preference()) {
                    best = Some(m);
                }
            }
        }
        best
    }
}

/// Runs `ops` random updates and queries against both the index and the
/// shadow. Returns `(queries, non-empty answers, disagreements)`.
pub fn index_vs_shadow(seed: u64, ops: usize) -> (usize, usize, usize) {
    use rand::{Rng, SeedableRng};
    use subsetalloc::moveindex::MoveIndex;
    use subsetalloc::profiles::ProfileVector;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let inst = random_instance(seed);
    let d = inst.d();
    let mut idx = MoveIndex::empty(&inst);
    let mut shadow = ShadowIndex::new(&inst);
    let vars: Vec<(usize, SubsetMask)> = inst
        .items
        .iter()
        .enumerate()
        .flat_map(|(p, it)| it.costs.keys().map(move |&m| (p, m)))
        .collect();
    let amount = |rng: &mut rand_chacha::ChaCha8Rng| rat(rng.gen_range(0..12), rng.gen_range(1..4));
    let (mut queries, mut found, mut mismatches) = (0, 0, 0);
    for _ in 0..ops {
        if rng.gen_bool(0.5) {
            let (p, s) = vars[rng.gen_range(0..vars.len())];
            let v = if rng.gen_bool(0.2) { rat(0, 1) } else { amount(&mut rng) };
            idx.update_amount(p, s, v.clone());
            shadow.set(p, s, v);
        } else {
            let code = rng.gen_range(0..3usize.pow(d as u32));
            let v = ProfileVector::from_code(code, d);
            if v.is_zero() {
                continue;
            }
            let x0 = amount(&mut rng);
            let got = idx.query_min_cost(&v, &x0);
            queries += 1;
            found += usize::from(got.is_some());
            if got != shadow.query(v.entries(), &x0) {
                mismatches += 1;
            }
        }
    }
    (queries, found, mismatches)
}

pub const CACHE_SPEC: &str = include_str!("../data/cache_spec.json");

/// Expected integer costs for `CACHE_SPEC`, per item, by mask 0..4.
pub const CACHE_TABLE: [(&str, [i64; 4]); 2] = [("p", [312, 69, 75, 66]), ("q", [5, 59, 44, 60])];

/// Mismatches between the generated instance and `CACHE_TABLE`.
pub fn cache_table_mismatches() -> Vec<String> {
    let spec = subsetalloc::costmodel::CostModelSpec::from_json(CACHE_SPEC).expect("fixture parses");
    let inst = spec.generate().expect("fixture generates");
    let mut out = Vec::new();
    for (id, row) in CACHE_TABLE {
        let p = inst.item_index(id).expect("item present");
        for (m, &want) in row.iter().enumerate() {
            let got = inst.items[p].cost(SubsetMask(m as u32));
            if got != Some(want) {
                out.push(format!("{id}/{m}: {got:?} != {want}"));
            }
        }
    }
    let caps: Vec<i64> = inst.bins.iter().map(|b| b.capacity).collect();
    if caps != [64, 256] {
        out.push(format!("capacities {caps:?}"));
    }
    out
}
