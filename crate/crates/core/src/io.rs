//! JSON formats for instances and solved assignments.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::Error;
use crate::model::{Assignment, Bin, Item, ProblemInstance, SubsetMask};
use crate::numerics::{rat_int, Rational};

/// A rational as decimal-string numerator and denominator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalJson {
    pub num: String,
    pub den: String,
}

impl From<&Rational> for RationalJson {
    fn from(r: &Rational) -> Self {
        Self {
            num: r.numer().to_string(),
            den: r.denom().to_string(),
        }
    }
}

impl TryFrom<&RationalJson> for Rational {
    type Error = Error;

    fn try_from(r: &RationalJson) -> Result<Self, Error> {
        let num: BigInt = r.num.trim().parse().map_err(|_| Error::Parse(format!("bad numerator {:?}", r.num)))?;
        let den: BigInt = r.den.trim().parse().map_err(|_| Error::Parse(format!("bad denominator {:?}", r.den)))?;
        if den.is_zero() {
            return Err(Error::Parse("zero denominator".into()));
        }
        Ok(Rational::new(num, den))
    }
}

#[derive(Serialize, Deserialize)]
struct BinJson {
    id: String,
    capacity: i64,
}

#[derive(Deserialize)]
struct ItemIn {
    id: String,
    size: i64,
    costs: BTreeMap<String, i64>,
}

#[derive(Deserialize)]
struct InstanceIn {
    bins: Vec<BinJson>,
    items: Vec<ItemIn>,
}

struct CostsOut<'a>(&'a BTreeMap<SubsetMask, i64>);

impl Serialize for CostsOut<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (m, c) in self.0 {
            map.serialize_entry(&m.0.to_string(), c)?;
        }
        map.end()
    }
}

#[derive(Serialize)]
struct ItemOut<'a> {
    id: &'a str,
    size: i64,
    costs: CostsOut<'a>,
}

#[derive(Serialize)]
struct InstanceOut<'a> {
    bins: Vec<BinJson>,
    items: Vec<ItemOut<'a>>,
}

fn parse_mask(key: &str, item: &str) -> Result<SubsetMask, Error> {
    key.trim()
        .parse::<u32>()
        .map(SubsetMask)
        .map_err(|_| Error::Parse(format!("item {item}: mask key {key:?} is not a decimal integer")))
}

/// Parses an instance. Structural checks are left to
/// [`ProblemInstance::validate`].
pub fn instance_from_json(text: &str) -> Result<ProblemInstance, Error> {
    let raw: InstanceIn = serde_json::from_str(text)?;
    let bins = raw
        .bins
        .into_iter()
        .map(|b| Bin {
            id: b.id,
            capacity: b.capacity,
        })
        .collect();
    let items = raw
        .items
        .into_iter()
        .map(|it| {
            let mut costs = BTreeMap::new();
            for (k, c) in &it.costs {
                if costs.insert(parse_mask(k, &it.id)?, *c).is_some() {
                    return Err(Error::Parse(format!("item {}: mask {k:?} given twice", it.id)));
                }
            }
            Ok(Item {
                id: it.id,
                size: it.size,
                costs,
            })
        })
        .collect::<Result<_, Error>>()?;
    Ok(ProblemInstance::new(bins, items))
}

/// Serializes the user-visible part of an instance (extra items are
/// omitted), masks in increasing order.
pub fn instance_to_json(inst: &ProblemInstance) -> String {
    let out = InstanceOut {
        bins: inst
            .bins
            .iter()
            .map(|b| BinJson {
                id: b.id.clone(),
                capacity: b.capacity,
            })
            .collect(),
        items: inst.items[inst.extra_items()..]
            .iter()
            .map(|it| ItemOut {
                id: &it.id,
                size: it.size,
                costs: CostsOut(&it.costs),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&out).expect("instance serializes")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryJson {
    pub item: String,
    pub mask: u32,
    pub amount: RationalJson,
}

/// Solved assignment restricted to the user's items.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentReport {
    pub objective: RationalJson,
    pub entries: Vec<EntryJson>,
    #[serde(default)]
    pub stats: BTreeMap<String, String>,
}

impl AssignmentReport {
    pub fn new(inst: &ProblemInstance, x: &Assignment, stats: BTreeMap<String, String>) -> Self {
        let entries = x
            .entries()
            .filter(|&(p, _, _)| p >= inst.extra_items())
            .map(|(p, s, v)| EntryJson {
                item: inst.items[p].id.clone(),
                mask: s.0,
                amount: v.into(),
            })
            .collect();
        Self {
            objective: (&x.objective(inst)).into(),
            entries,
            stats,
        }
    }

    pub fn objective(&self) -> Result<Rational, Error> {
        (&self.objective).try_into()
    }

    /// Rebuilds the full assignment over `inst`, filling each bin's extra
    /// item with the capacity left over by the user's items.
    pub fn to_assignment(&self, inst: &ProblemInstance) -> Result<Assignment, Error> {
        let mut x = Assignment::new(inst.n(), inst.d());
        for e in &self.entries {
            let p = inst.items[inst.extra_items()..]
                .iter()
                .position(|it| it.id == e.item)
                .map(|i| i + inst.extra_items())
                .ok_or_else(|| Error::InvalidInput(format!("unknown item {:?}", e.item)))?;
            let v: Rational = (&e.amount).try_into()?;
            if !v.is_positive() || x.get_ref(p, SubsetMask(e.mask)).is_some() {
                return Err(Error::InvalidInput(format!("bad entry for item {:?}", e.item)));
            }
            x.set(p, SubsetMask(e.mask), v);
        }
        for p in 0..inst.extra_items() {
            let it = &inst.items[p];
            let bin_mask = *it.costs.keys().find(|m| !m.is_empty()).expect("extra item has a bin");
            let bin = bin_mask.0.trailing_zeros() as usize;
            let free = rat_int(inst.bins[bin].capacity) - x.load(bin);
            if free.is_negative() || free > rat_int(it.size) {
                return Err(Error::InvalidInput(format!("bin {} is overfilled", inst.bins[bin].id)));
            }
            let empty = rat_int(it.size) - &free;
            x.set(p, bin_mask, free);
            x.set(p, SubsetMask::EMPTY, empty);
        }
        Ok(x)
    }
}

pub fn report_to_json(r: &AssignmentReport) -> String {
    serde_json::to_string_pretty(r).expect("report serializes")
}

pub fn report_from_json(text: &str) -> Result<AssignmentReport, Error> {
    Ok(serde_json::from_str(text)?)
}
