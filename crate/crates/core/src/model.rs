//! Problem instances, validation, padding with extra items, and assignments.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Violation};
use crate::numerics::{rat_int, Rational};

/// Largest number of bins an instance may have. Masks are `u32`.
pub const MAX_BINS: usize = 16;

/// A subset of bins; bit `i` set iff bin `i` is a member.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubsetMask(pub u32);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    pub fn singleton(bin: usize) -> Self {
        SubsetMask(1 << bin)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, bin: usize) -> bool {
        self.0 >> bin & 1 == 1
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn in_range(self, d: usize) -> bool {
        d >= 32 || self.0 < (1u32 << d)
    }

    /// Indicator vector of length `d`.
    pub fn indicator(self, d: usize) -> Vec<i64> {
        (0..d).map(|i| i64::from(self.contains(i))).collect()
    }

    /// `indicator(other) - indicator(self)`, the bin-load change of moving one
    /// unit from `self` to `other`.
    pub fn difference_to(self, other: SubsetMask, d: usize) -> Vec<i8> {
        (0..d)
            .map(|i| i8::from(other.contains(i)) - i8::from(self.contains(i)))
            .collect()
    }

    /// All masks over `d` bins in increasing order.
    pub fn all(d: usize) -> impl Iterator<Item = SubsetMask> {
        (0..1u32 << d).map(SubsetMask)
    }
}

impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bin {
    pub id: String,
    pub capacity: i64,
}

/// An item with its allowed placement options. Options missing from `costs`
/// are forbidden.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Item {
    pub id: String,
    pub size: i64,
    pub costs: BTreeMap<SubsetMask, i64>,
}

impl Item {
    pub fn cost(&self, option: SubsetMask) -> Option<i64> {
        self.costs.get(&option).copied()
    }

    pub fn allows(&self, option: SubsetMask) -> bool {
        self.costs.contains_key(&option)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemInstance {
    pub bins: Vec<Bin>,
    pub items: Vec<Item>,
    padded: bool,
    extra_items: usize,
}

impl ProblemInstance {
    pub fn new(bins: Vec<Bin>, items: Vec<Item>) -> Self {
        Self {
            bins,
            items,
            padded: false,
            extra_items: 0,
        }
    }

    pub fn d(&self) -> usize {
        self.bins.len()
    }

    pub fn n(&self) -> usize {
        self.items.len()
    }

    pub fn is_padded(&self) -> bool {
        self.padded
    }

    /// Number of extra items at the front of `items` (0 when unpadded).
    pub fn extra_items(&self) -> usize {
        self.extra_items
    }

    /// Number of items that came from the user, excluding extra items.
    pub fn original_items(&self) -> usize {
        self.items.len() - self.extra_items
    }

    pub fn stats(&self) -> InstanceStats {
        InstanceStats {
            max_cost: self
                .items
                .iter()
                .flat_map(|it| it.costs.values().copied())
                .max()
                .unwrap_or(0),
            max_size: self.items.iter().map(|it| it.size).max().unwrap_or(0),
            n: self.original_items(),
            d: self.d(),
        }
    }

    /// Checks every structural invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), Error> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(violations))
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let d = self.d();
        if d == 0 {
            out.push(Violation::NoBins);
        }
        if d > MAX_BINS {
            out.push(Violation::TooManyBins { d, max: MAX_BINS });
        }
        let mut seen = HashSet::new();
        for b in &self.bins {
            if !seen.insert(b.id.as_str()) {
                out.push(Violation::DuplicateBinId(b.id.clone()));
            }
            if b.capacity < 0 {
                out.push(Violation::NegativeCapacity {
                    bin: b.id.clone(),
                    capacity: b.capacity,
                });
            }
        }
        let mut seen = HashSet::new();
        for (idx, it) in self.items.iter().enumerate() {
            if !seen.insert(it.id.as_str()) {
                out.push(Violation::DuplicateItemId(it.id.clone()));
            }
            let is_extra = idx < self.extra_items;
            if it.size < 1 && !is_extra {
                out.push(Violation::NonPositiveSize {
                    item: it.id.clone(),
                    size: it.size,
                });
            }
            if !it.allows(SubsetMask::EMPTY) {
                out.push(Violation::MissingEmptyOption(it.id.clone()));
            }
            for (&mask, &cost) in &it.costs {
                if d <= MAX_BINS && !mask.in_range(d) {
                    out.push(Violation::MaskOutOfRange {
                        item: it.id.clone(),
                        mask: mask.0,
                        d,
                    });
                }
                if cost < 0 {
                    out.push(Violation::NegativeCost {
                        item: it.id.clone(),
                        mask: mask.0,
                        cost,
                    });
                }
            }
        }
        out
    }

    /// Prepends one zero-cost extra item per bin with positive capacity.
    ///
    /// The extra item for bin `i` has size `capacity(b_i)` and is allowed only
    /// on `∅` and `{b_i}`. Original item indices shift by the number of extra
    /// items added.
    pub fn pad(&self) -> Result<ProblemInstance, Error> {
        if self.padded {
            return Err(Error::AlreadyPadded);
        }
        let mut items = Vec::with_capacity(self.items.len() + self.bins.len());
        for (i, b) in self.bins.iter().enumerate() {
            if b.capacity == 0 {
                continue;
            }
            let mut costs = BTreeMap::new();
            costs.insert(SubsetMask::EMPTY, 0);
            costs.insert(SubsetMask::singleton(i), 0);
            items.push(Item {
                id: format!("extra:{}", b.id),
                size: b.capacity,
                costs,
            });
        }
        let extra_items = items.len();
        items.extend(self.items.iter().cloned());
        let padded = ProblemInstance {
            bins: self.bins.clone(),
            items,
            padded: true,
            extra_items,
        };
        // extra ids may collide with user ids
        padded.validate()?;
        Ok(padded)
    }

    /// Every extra item fills its bin; every original item starts at `∅`.
    pub fn initial_assignment(&self) -> Result<Assignment, Error> {
        if !self.padded {
            return Err(Error::NotPadded);
        }
        let mut x = Assignment::new(self.n(), self.d());
        for (idx, it) in self.items.iter().enumerate() {
            let option = if idx < self.extra_items {
                extra_item_bin(it).expect("extra item has a singleton option")
            } else {
                SubsetMask::EMPTY
            };
            x.set(idx, option, rat_int(it.size));
        }
        Ok(x)
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|it| it.id == id)
    }
}

fn extra_item_bin(item: &Item) -> Option<SubsetMask> {
    item.costs.keys().copied().find(|m| !m.is_empty())
}

/// Quantities derived from an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InstanceStats {
    /// Largest finite cost (C).
    pub max_cost: i64,
    /// Largest item size (Z), extra items included once padded.
    pub max_size: i64,
    /// Number of original items.
    pub n: usize,
    pub d: usize,
}

/// Sparse assignment `x(p, S)` with cached bin loads and item totals.
///
/// Only strictly positive amounts are stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    amounts: BTreeMap<(usize, SubsetMask), Rational>,
    loads: Vec<Rational>,
    totals: Vec<Rational>,
}

impl Assignment {
    pub fn new(items: usize, d: usize) -> Self {
        Self {
            amounts: BTreeMap::new(),
            loads: vec![Rational::zero(); d],
            totals: vec![Rational::zero(); items],
        }
    }

    pub fn d(&self) -> usize {
        self.loads.len()
    }

    pub fn items(&self) -> usize {
        self.totals.len()
    }

    pub fn get(&self, item: usize, option: SubsetMask) -> Rational {
        self.amounts
            .get(&(item, option))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn get_ref(&self, item: usize, option: SubsetMask) -> Option<&Rational> {
        self.amounts.get(&(item, option))
    }

    /// Sets `x(item, option)`; zero removes the entry. Panics on a negative
    /// amount.
    pub fn set(&mut self, item: usize, option: SubsetMask, value: Rational) {
        assert!(
            !value.is_negative(),
            "negative amount for item {item} option {option}"
        );
        let old = self.amounts.remove(&(item, option)).unwrap_or_else(Rational::zero);
        let delta = &value - &old;
        if !delta.is_zero() {
            self.totals[item] += &delta;
            for (b, load) in self.loads.iter_mut().enumerate() {
                if option.contains(b) {
                    *load += &delta;
                }
            }
        }
        if !value.is_zero() {
            self.amounts.insert((item, option), value);
        }
    }

    /// Adds `delta` (possibly negative) to `x(item, option)` and returns the
    /// new amount.
    pub fn add(&mut self, item: usize, option: SubsetMask, delta: &Rational) -> Rational {
        let v = self.get(item, option) + delta;
        self.set(item, option, v.clone());
        v
    }

    /// Positive entries in `(item, mask)` order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, SubsetMask, &Rational)> {
        self.amounts.iter().map(|(&(p, s), v)| (p, s, v))
    }

    /// Positive options of one item in mask order.
    pub fn options_of(&self, item: usize) -> impl Iterator<Item = (SubsetMask, &Rational)> {
        self.amounts
            .range((item, SubsetMask(0))..=(item, SubsetMask(u32::MAX)))
            .map(|(&(_, s), v)| (s, v))
    }

    pub fn positive_count(&self) -> usize {
        self.amounts.len()
    }

    pub fn load(&self, bin: usize) -> &Rational {
        &self.loads[bin]
    }

    pub fn item_total(&self, item: usize) -> &Rational {
        &self.totals[item]
    }

    /// Exact `Σ cost(p,S)·x(p,S)`. Amounts on forbidden options are a logic
    /// error and panic.
    pub fn objective(&self, inst: &ProblemInstance) -> Rational {
        self.entries().fold(Rational::zero(), |acc, (p, s, v)| {
            let c = inst.items[p]
                .cost(s)
                .unwrap_or_else(|| panic!("amount on forbidden option ({p}, {s})"));
            acc + v * rat_int(c)
        })
    }

    /// Item totals equal sizes and every bin load equals its capacity,
    /// recomputed from the entries rather than the caches. Also rejects any
    /// mass on a forbidden option.
    pub fn is_perfectly_filled(&self, inst: &ProblemInstance) -> bool {
        if self.items() != inst.n() || self.d() != inst.d() {
            return false;
        }
        let mut totals = vec![Rational::zero(); inst.n()];
        let mut loads = vec![Rational::zero(); inst.d()];
        for (p, s, v) in self.entries() {
            if !v.is_positive() || !inst.items[p].allows(s) {
                return false;
            }
            totals[p] += v;
            for (b, load) in loads.iter_mut().enumerate() {
                if s.contains(b) {
                    *load += v;
                }
            }
        }
        totals
            .iter()
            .zip(&inst.items)
            .all(|(t, it)| *t == rat_int(it.size))
            && loads
                .iter()
                .zip(&inst.bins)
                .all(|(l, b)| *l == rat_int(b.capacity))
    }

    /// `(variables with 0 < x < size, items with ≥ 2 positive options)`,
    /// where an item's size is taken from its current total.
    pub fn fractional_stats(&self) -> (usize, usize) {
        let mut vars = 0;
        let mut items = 0;
        let mut current: Option<(usize, usize)> = None;
        for (p, _, v) in self.entries() {
            if *v < self.totals[p] {
                vars += 1;
            }
            match current {
                Some((q, ref mut k)) if q == p => *k += 1,
                _ => {
                    if let Some((_, k)) = current {
                        items += usize::from(k >= 2);
                    }
                    current = Some((p, 1));
                }
            }
        }
        if let Some((_, k)) = current {
            items += usize::from(k >= 2);
        }
        (vars, items)
    }

    /// Least common multiple of all amount denominators.
    pub fn denominator_lcm(&self) -> BigInt {
        crate::numerics::lcm_of_denominators(self.amounts.values())
    }

    /// True when every amount is an integer.
    pub fn is_integral(&self) -> bool {
        self.amounts.values().all(|v| v.denom().is_one())
    }
}
