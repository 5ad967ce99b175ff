//! Seeded random instances.
//!
//! Uses ChaCha8 seeded from a `u64` and draws only `u64` ranges, so output is
//! identical across platforms.

use std::collections::BTreeMap;

use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::model::{Bin, Item, ProblemInstance, SubsetMask, MAX_BINS};
use crate::numerics::Rational;

#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub seed: u64,
    pub d: usize,
    pub n: usize,
    pub max_size: i64,
    pub max_capacity: i64,
    pub max_cost: i64,
    /// Probability that a non-empty option is forbidden, in `[0, 1)`.
    pub forbid_fraction: Rational,
    /// Options with more bins than this are never offered.
    pub max_copies: Option<usize>,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            seed: 0,
            d: 2,
            n: 4,
            max_size: 5,
            max_capacity: 10,
            max_cost: 100,
            forbid_fraction: Rational::zero(),
            max_copies: None,
        }
    }
}

impl GenParams {
    pub fn check(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::InvalidInput(m.into()));
        if self.d == 0 || self.d > MAX_BINS {
            return bad("d must be between 1 and 16");
        }
        if self.max_size < 1 || self.max_capacity < 0 || self.max_cost < 0 {
            return bad("max_size must be positive; max_capacity and max_cost non-negative");
        }
        if self.forbid_fraction < Rational::zero() || self.forbid_fraction >= Rational::from_integer(1.into()) {
            return bad("forbid_fraction must lie in [0, 1)");
        }
        if self.max_copies == Some(0) {
            return bad("max_copies must be at least 1");
        }
        Ok(())
    }
}

/// Builds an unpadded instance with bins `b0..` and items `p0..`.
pub fn generate(params: &GenParams) -> Result<ProblemInstance, Error> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let forbid_num = params.forbid_fraction.numer().to_u64().expect("fraction in range");
    let forbid_den = params.forbid_fraction.denom().to_u64().ok_or_else(|| Error::InvalidInput("forbid_fraction denominator too large".into()))?;
    let bins = (0..params.d)
        .map(|i| Bin {
            id: format!("b{i}"),
            capacity: rng.gen_range(0..=params.max_capacity as u64) as i64,
        })
        .collect();
    let max_copies = params.max_copies.unwrap_or(params.d) as u32;
    let items = (0..params.n)
        .map(|p| {
            let size = rng.gen_range(1..=params.max_size as u64) as i64;
            let mut costs = BTreeMap::new();
            for m in SubsetMask::all(params.d) {
                if m.len() > max_copies {
                    continue;
                }
                if !m.is_empty() && forbid_num > 0 && rng.gen_range(0..forbid_den) < forbid_num {
                    continue;
                }
                costs.insert(m, rng.gen_range(0..=params.max_cost as u64) as i64);
            }
            Item {
                id: format!("p{p}"),
                size,
                costs,
            }
        })
        .collect();
    let inst = ProblemInstance::new(bins, items);
    inst.validate()?;
    Ok(inst)
}
