//! Cost tables for cache placement, derived from memory-bank specifications
//! and per-item request statistics.
//!
//! For a placement `S` of item `p`:
//!
//! ```text
//! cost(p, S) = read_freq·read(p, S) + write_freq·write(p, S)
//!            + Σ_F fail(F)·(read(p, S \ F) + write(p, F ∩ S))
//! ```
//!
//! where `read` is the fastest bank in `S` (or the recompute time when `S`
//! is empty) and `write` is the slowest bank in `S` or the sum over `S`,
//! depending on the write mode. `F` ranges over single-bank failures or
//! nothing. Costs are scaled and rounded half-up to integers.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::io::RationalJson;
use crate::model::{Bin, Item, ProblemInstance, SubsetMask};
use crate::numerics::{parse_rational, rat_int, Rational};

/// Largest number of banks accepted.
pub const MAX_BANKS: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BankSpec {
    pub id: String,
    pub capacity_bytes: i64,
    pub read_latency: Rational,
    pub write_latency: Rational,
    pub read_bandwidth: Rational,
    pub write_bandwidth: Rational,
    pub fail_prob: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ItemSpec {
    pub id: String,
    pub size_bytes: i64,
    pub read_freq: Rational,
    pub write_freq: Rational,
    /// Service time when the item is not cached.
    pub recompute_time: Rational,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WriteMode {
    /// Copies are written concurrently; the slowest bank dominates.
    #[default]
    Parallel,
    /// Copies are written one after another.
    Sequential,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureEvents {
    /// Any one bank may fail; two never fail together.
    #[default]
    Singletons,
    None,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostModelConfig {
    pub write_mode: WriteMode,
    pub failure_events: FailureEvents,
    pub max_copies: usize,
    pub scale: i64,
}

impl Default for CostModelConfig {
    fn default() -> Self {
        Self {
            write_mode: WriteMode::Parallel,
            failure_events: FailureEvents::Singletons,
            max_copies: 2,
            scale: 1_000_000,
        }
    }
}

fn banks_in(banks: &[BankSpec], s: SubsetMask) -> impl Iterator<Item = &BankSpec> {
    banks.iter().enumerate().filter(move |(i, _)| s.contains(*i)).map(|(_, b)| b)
}

fn size(p: &ItemSpec) -> Rational {
    rat_int(p.size_bytes)
}

/// Fastest read among the banks in `s`; the recompute time when `s` is empty.
pub fn read_time(p: &ItemSpec, banks: &[BankSpec], s: SubsetMask) -> Rational {
    banks_in(banks, s)
        .map(|b| &b.read_latency + size(p) / &b.read_bandwidth)
        .min()
        .unwrap_or_else(|| p.recompute_time.clone())
}

/// Time to write every copy in `s`; zero when `s` is empty.
pub fn write_time(p: &ItemSpec, banks: &[BankSpec], s: SubsetMask, mode: WriteMode) -> Rational {
    let times = banks_in(banks, s).map(|b| &b.write_latency + size(p) / &b.write_bandwidth);
    match mode {
        WriteMode::Parallel => times.max().unwrap_or_else(Rational::zero),
        WriteMode::Sequential => times.sum(),
    }
}

/// Unscaled expected cost of placing `p` on `s`.
pub fn exact_cost(p: &ItemSpec, banks: &[BankSpec], s: SubsetMask, cfg: &CostModelConfig) -> Rational {
    let mut cost = &p.read_freq * read_time(p, banks, s) + &p.write_freq * write_time(p, banks, s, cfg.write_mode);
    if cfg.failure_events == FailureEvents::Singletons {
        for (i, b) in banks.iter().enumerate() {
            let f = SubsetMask::singleton(i);
            let survivors = SubsetMask(s.0 & !f.0);
            let lost = SubsetMask(s.0 & f.0);
            cost += &b.fail_prob * (read_time(p, banks, survivors) + write_time(p, banks, lost, cfg.write_mode));
        }
    }
    cost
}

/// Nearest integer, halves rounded up.
pub fn round_half_up(v: &Rational) -> BigInt {
    let two = BigInt::from(2);
    (v.numer() * &two + v.denom()).div_floor(&(v.denom() * two))
}

fn check(banks: &[BankSpec], items: &[ItemSpec], cfg: &CostModelConfig) -> Result<(), Error> {
    let bad = |m: String| Err(Error::InvalidInput(m));
    if banks.is_empty() || banks.len() > MAX_BANKS {
        return bad(format!("between 1 and {MAX_BANKS} banks required, got {}", banks.len()));
    }
    if cfg.max_copies < 1 || cfg.scale < 1 {
        return bad("max_copies and scale must be at least 1".into());
    }
    for b in banks {
        if !b.read_bandwidth.is_positive() || !b.write_bandwidth.is_positive() {
            return bad(format!("bank {}: bandwidths must be positive", b.id));
        }
        if b.fail_prob.is_negative() || b.fail_prob >= rat_int(1) {
            return bad(format!("bank {}: fail_prob must lie in [0, 1)", b.id));
        }
        if b.read_latency.is_negative() || b.write_latency.is_negative() {
            return bad(format!("bank {}: latencies must be non-negative", b.id));
        }
    }
    for p in items {
        if p.size_bytes < 1 {
            return bad(format!("item {}: size must be at least 1", p.id));
        }
        if p.read_freq.is_negative() || p.write_freq.is_negative() || p.recompute_time.is_negative() {
            return bad(format!("item {}: frequencies and recompute time must be non-negative", p.id));
        }
    }
    Ok(())
}

/// Builds an instance with one bin per bank and every placement of at most
/// `max_copies` banks allowed.
pub fn generate_costs(banks: &[BankSpec], items: &[ItemSpec], cfg: &CostModelConfig) -> Result<ProblemInstance, Error> {
    check(banks, items, cfg)?;
    let d = banks.len();
    let scale = rat_int(cfg.scale);
    let bins = banks
        .iter()
        .map(|b| Bin {
            id: b.id.clone(),
            capacity: b.capacity_bytes,
        })
        .collect();
    let items = items
        .iter()
        .map(|p| {
            let mut costs = BTreeMap::new();
            for s in SubsetMask::all(d).filter(|s| s.len() as usize <= cfg.max_copies) {
                let c = round_half_up(&(&scale * exact_cost(p, banks, s, cfg)));
                let c = c
                    .to_i64()
                    .ok_or_else(|| Error::InvalidInput(format!("item {}: scaled cost overflows i64", p.id)))?;
                costs.insert(s, c);
            }
            Ok(Item {
                id: p.id.clone(),
                size: p.size_bytes,
                costs,
            })
        })
        .collect::<Result<_, Error>>()?;
    let inst = ProblemInstance::new(bins, items);
    inst.validate()?;
    Ok(inst)
}

/// A rational in a spec file: `{"num","den"}`, an integer, or a string such
/// as `"3/4"` or `"0.25"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum RationalIn {
    Pair(RationalJson),
    Int(i64),
    Text(String),
}

impl TryFrom<RationalIn> for Rational {
    type Error = Error;

    fn try_from(r: RationalIn) -> Result<Self, Error> {
        match r {
            RationalIn::Pair(p) => (&p).try_into(),
            RationalIn::Int(i) => Ok(rat_int(i)),
            RationalIn::Text(t) => parse_decimal(&t).or_else(|| parse_rational(&t)).ok_or_else(|| Error::Parse(format!("bad rational {t:?}"))),
        }
    }
}

fn parse_decimal(t: &str) -> Option<Rational> {
    let t = t.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (whole, frac) = body.split_once('.')?;
    if whole.is_empty() && frac.is_empty() || !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{whole}{frac}").parse().ok()?;
    let v = Rational::new(digits, BigInt::from(10).pow(frac.len() as u32));
    Some(if neg { -v } else { v })
}

#[derive(Deserialize)]
struct BankIn {
    id: String,
    capacity_bytes: i64,
    read_latency: RationalIn,
    write_latency: RationalIn,
    read_bandwidth: RationalIn,
    write_bandwidth: RationalIn,
    #[serde(default = "zero_in")]
    fail_prob: RationalIn,
}

#[derive(Deserialize)]
struct ItemSpecIn {
    id: String,
    size_bytes: i64,
    read_freq: RationalIn,
    write_freq: RationalIn,
    recompute_time: RationalIn,
}

#[derive(Deserialize, Default)]
#[serde(default)]
struct ConfigIn {
    write_mode: Option<WriteMode>,
    failure_events: Option<FailureEvents>,
    max_copies: Option<usize>,
    scale: Option<i64>,
}

#[derive(Deserialize)]
struct SpecIn {
    banks: Vec<BankIn>,
    items: Vec<ItemSpecIn>,
    #[serde(default)]
    config: ConfigIn,
}

fn zero_in() -> RationalIn {
    RationalIn::Int(0)
}

/// A parsed cost-model spec file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostModelSpec {
    pub banks: Vec<BankSpec>,
    pub items: Vec<ItemSpec>,
    pub config: CostModelConfig,
}

impl CostModelSpec {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let raw: SpecIn = serde_json::from_str(text)?;
        let banks = raw
            .banks
            .into_iter()
            .map(|b| {
                Ok(BankSpec {
                    id: b.id,
                    capacity_bytes: b.capacity_bytes,
                    read_latency: b.read_latency.try_into()?,
                    write_latency: b.write_latency.try_into()?,
                    read_bandwidth: b.read_bandwidth.try_into()?,
                    write_bandwidth: b.write_bandwidth.try_into()?,
                    fail_prob: b.fail_prob.try_into()?,
                })
            })
            .collect::<Result<_, Error>>()?;
        let items = raw
            .items
            .into_iter()
            .map(|p| {
                Ok(ItemSpec {
                    id: p.id,
                    size_bytes: p.size_bytes,
                    read_freq: p.read_freq.try_into()?,
                    write_freq: p.write_freq.try_into()?,
                    recompute_time: p.recompute_time.try_into()?,
                })
            })
            .collect::<Result<_, Error>>()?;
        let def = CostModelConfig::default();
        let config = CostModelConfig {
            write_mode: raw.config.write_mode.unwrap_or(def.write_mode),
            failure_events: raw.config.failure_events.unwrap_or(def.failure_events),
            max_copies: raw.config.max_copies.unwrap_or(def.max_copies),
            scale: raw.config.scale.unwrap_or(def.scale),
        };
        Ok(Self { banks, items, config })
    }

    pub fn generate(&self) -> Result<ProblemInstance, Error> {
        generate_costs(&self.banks, &self.items, &self.config)
    }
}
