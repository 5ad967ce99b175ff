//! Augmentation profiles: minimally dependent, positive sets of vectors over
//! {-1, 0, 1}^d together with their balancing coefficients.
//!
//! [`enumerate_profiles`] walks every size-d subset of non-zero vectors, solves
//! `A α = w` for every non-zero `w`, keeps the non-negative solutions, and
//! deduplicates the resulting sets by canonical form.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::numerics::{self, format_rational, parse_rational, rank, rat_int, IntMatrix, Rational};

/// Largest dimension the enumerator accepts. d = 5 is allowed but very slow.
pub const MAX_ENUM_DIM: usize = 5;

const CACHE_FORMAT: &str = "subsetalloc-profiles";
const CACHE_VERSION: u32 = 1;

/// A vector over {-1, 0, 1}. Ordering is lexicographic with -1 < 0 < 1.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProfileVector(Vec<i8>);

impl ProfileVector {
    pub fn new(entries: Vec<i8>) -> Result<Self, Error> {
        if entries.iter().any(|e| !(-1..=1).contains(e)) {
            return Err(Error::InvalidInput(format!(
                "profile vector entries must be in {{-1,0,1}}: {entries:?}"
            )));
        }
        Ok(Self(entries))
    }

    /// Decodes a base-3 index produced by [`ProfileVector::code`].
    pub fn from_code(mut code: usize, d: usize) -> Self {
        let mut e = vec![0i8; d];
        for i in (0..d).rev() {
            e[i] = (code % 3) as i8 - 1;
            code /= 3;
        }
        Self(e)
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Base-3 index with the first coordinate most significant; numeric order
    /// equals the lexicographic order of vectors.
    pub fn code(&self) -> usize {
        self.0.iter().fold(0, |acc, &e| acc * 3 + (e + 1) as usize)
    }

    pub fn as_i64(&self) -> Vec<i64> {
        self.0.iter().map(|&e| i64::from(e)).collect()
    }

    fn to_text(&self) -> String {
        self.0
            .iter()
            .map(|&e| match e {
                -1 => '-',
                0 => '0',
                _ => '+',
            })
            .collect()
    }

    fn from_text(s: &str) -> Option<Self> {
        s.chars()
            .map(|c| match c {
                '-' => Some(-1),
                '0' => Some(0),
                '+' => Some(1),
                _ => None,
            })
            .collect::<Option<Vec<i8>>>()
            .map(Self)
    }
}

/// A canonical profile: vectors sorted lexicographically, `alpha[0] == 1`,
/// `Σ alpha_i · vectors_i = 0`, all `alpha_i > 0`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Profile {
    vectors: Vec<ProfileVector>,
    alpha: Vec<Rational>,
}

impl Profile {
    pub fn vectors(&self) -> &[ProfileVector] {
        &self.vectors
    }

    pub fn alpha(&self) -> &[Rational] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, ProfileVector::dim)
    }

    pub fn codes(&self) -> Vec<usize> {
        self.vectors.iter().map(ProfileVector::code).collect()
    }

    /// Independent check of every profile invariant.
    pub fn verify(&self) -> Result<(), String> {
        let r = self.vectors.len();
        let d = self.dim();
        if r < 2 {
            return Err(format!("profile has {r} vectors"));
        }
        if r != self.alpha.len() {
            return Err("alpha length mismatch".into());
        }
        if r > d + 1 {
            return Err(format!("profile has {r} > d+1 vectors"));
        }
        if self.vectors.iter().any(|v| v.dim() != d) {
            return Err("mixed vector dimensions".into());
        }
        if self.vectors.iter().any(ProfileVector::is_zero) {
            return Err("zero vector in profile".into());
        }
        if self.vectors.windows(2).any(|w| w[0] >= w[1]) {
            return Err("vectors not strictly sorted".into());
        }
        if !self.alpha[0].is_one() {
            return Err("first coefficient is not 1".into());
        }
        if self.alpha.iter().any(|a| !a.is_positive()) {
            return Err("non-positive coefficient".into());
        }
        if !balances(&self.vectors, &self.alpha) {
            return Err("coefficients do not balance".into());
        }
        let cols: Vec<Vec<i64>> = self.vectors.iter().map(ProfileVector::as_i64).collect();
        if rank(&IntMatrix::from_columns(d, &cols)) != r - 1 {
            return Err("vector set is not dependent with a one-dimensional kernel".into());
        }
        for skip in 0..r {
            let sub: Vec<Vec<i64>> = cols
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != skip)
                .map(|(_, c)| c.clone())
                .collect();
            if rank(&IntMatrix::from_columns(d, &sub)) != r - 1 {
                return Err("a proper subset is dependent".into());
            }
        }
        Ok(())
    }
}

fn balances(vectors: &[ProfileVector], alpha: &[Rational]) -> bool {
    let d = vectors.first().map_or(0, ProfileVector::dim);
    (0..d).all(|k| {
        vectors
            .iter()
            .zip(alpha)
            .fold(Rational::zero(), |acc, (v, a)| acc + a * rat_int(i64::from(v.0[k])))
            .is_zero()
    })
}

/// Sorts the vectors, permutes `alpha` to match, and rescales so the first
/// coefficient is 1.
pub fn canonicalize(vectors: Vec<ProfileVector>, alpha: Vec<Rational>) -> Result<Profile, Error> {
    if vectors.len() != alpha.len() || vectors.is_empty() {
        return Err(Error::InvalidInput("vector and coefficient counts differ".into()));
    }
    if vectors.iter().any(ProfileVector::is_zero) {
        return Err(Error::InvalidInput("zero vector in profile".into()));
    }
    if alpha.iter().any(|a| !a.is_positive()) {
        return Err(Error::InvalidInput("coefficients must be positive".into()));
    }
    if !balances(&vectors, &alpha) {
        return Err(Error::InvalidInput("coefficients do not balance the vectors".into()));
    }
    let mut pairs: Vec<(ProfileVector, Rational)> = vectors.into_iter().zip(alpha).collect();
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    let scale = pairs[0].1.clone();
    let (vectors, alpha) = pairs.into_iter().map(|(v, a)| (v, a / &scale)).unzip();
    Ok(Profile { vectors, alpha })
}

/// The deduplicated set of all profiles in one dimension, in canonical order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProfileCatalog {
    d: usize,
    profiles: Vec<Profile>,
}

impl ProfileCatalog {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Catalog size plus the degenerate `{0}` set; see [`profile_count`].
    pub fn defined_count(&self) -> usize {
        self.profiles.len() + 1
    }

    /// `binom(3^d, d+1)`.
    pub fn upper_bound(&self) -> BigInt {
        profile_upper_bound(self.d)
    }

    /// Builds a catalog from arbitrary profiles, verifying and deduplicating.
    pub fn from_profiles(d: usize, profiles: Vec<Profile>) -> Result<Self, Error> {
        let mut set = BTreeSet::new();
        for p in profiles {
            if p.dim() != d {
                return Err(Error::Catalog(format!("profile of dimension {} in catalog {d}", p.dim())));
            }
            p.verify().map_err(Error::Catalog)?;
            set.insert(p);
        }
        Ok(Self {
            d,
            profiles: set.into_iter().collect(),
        })
    }

    pub fn verify_all(&self) -> Result<(), String> {
        if self.profiles.windows(2).any(|w| w[0] >= w[1]) {
            return Err("catalog not strictly ordered".into());
        }
        for p in &self.profiles {
            if p.dim() != self.d {
                return Err("dimension mismatch".into());
            }
            p.verify()?;
        }
        Ok(())
    }

    /// Writes the cache file format.
    pub fn to_json(&self) -> String {
        let file = CacheFile {
            format: CACHE_FORMAT.into(),
            version: CACHE_VERSION,
            d: self.d,
            count: self.profiles.len(),
            profiles: self
                .profiles
                .iter()
                .map(|p| CachedProfile {
                    vectors: p.vectors.iter().map(ProfileVector::to_text).collect(),
                    alpha: p.alpha.iter().map(format_rational).collect(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("catalog serializes")
    }

    /// Parses and re-verifies a cache file. Any defect rejects the whole file.
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let file: CacheFile =
            serde_json::from_str(text).map_err(|e| Error::Catalog(e.to_string()))?;
        if file.format != CACHE_FORMAT || file.version != CACHE_VERSION {
            return Err(Error::Catalog(format!(
                "unsupported cache format {} v{}",
                file.format, file.version
            )));
        }
        if file.count != file.profiles.len() {
            return Err(Error::Catalog(format!(
                "header count {} but {} profiles",
                file.count,
                file.profiles.len()
            )));
        }
        let mut profiles = Vec::with_capacity(file.profiles.len());
        for cp in file.profiles {
            let vectors = cp
                .vectors
                .iter()
                .map(|s| ProfileVector::from_text(s))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::Catalog("bad vector text".into()))?;
            let alpha = cp
                .alpha
                .iter()
                .map(|s| parse_rational(s))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::Catalog("bad coefficient text".into()))?;
            profiles.push(Profile { vectors, alpha });
        }
        let catalog = Self {
            d: file.d,
            profiles,
        };
        catalog.verify_all().map_err(Error::Catalog)?;
        Ok(catalog)
    }

    pub fn cache_path(dir: &Path, d: usize) -> PathBuf {
        dir.join(format!("profiles-d{d}.json"))
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, Error> {
        fs::create_dir_all(dir)?;
        let path = Self::cache_path(dir, self.d);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, self.to_json())?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    pub fn load(dir: &Path, d: usize) -> Result<Option<Self>, Error> {
        let path = Self::cache_path(dir, d);
        if !path.exists() {
            return Ok(None);
        }
        let catalog = Self::from_json(&fs::read_to_string(&path)?)?;
        if catalog.d != d {
            return Err(Error::Catalog(format!("{} holds d = {}", path.display(), catalog.d)));
        }
        Ok(Some(catalog))
    }

    /// Loads the cached catalog for `d`, or enumerates and stores it.
    pub fn load_or_build(dir: &Path, d: usize, parallel: bool) -> Result<Self, Error> {
        if let Some(c) = Self::load(dir, d)? {
            return Ok(c);
        }
        let catalog = enumerate_profiles_with(d, parallel)?;
        catalog.save(dir)?;
        Ok(catalog)
    }
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    format: String,
    version: u32,
    d: usize,
    count: usize,
    profiles: Vec<CachedProfile>,
}

#[derive(Serialize, Deserialize)]
struct CachedProfile {
    vectors: Vec<String>,
    alpha: Vec<String>,
}

pub fn profile_upper_bound(d: usize) -> BigInt {
    let n = 3usize.pow(d as u32);
    let k = d + 1;
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Enumerates the catalog, in parallel when the `parallel` feature is on.
pub fn enumerate_profiles(d: usize) -> Result<ProfileCatalog, Error> {
    enumerate_profiles_with(d, cfg!(feature = "parallel"))
}

/// f(d): the number of vector sets whose balancing coefficients (first one
/// fixed to 1) are unique and positive. This is the catalog plus the
/// degenerate set `{0}`, which the catalog leaves out because its only move
/// is a no-op.
pub fn profile_count(d: usize) -> Result<usize, Error> {
    Ok(enumerate_profiles(d)?.defined_count())
}

// A canonical profile packed as (code+1, weight) byte pairs, most significant
// first. Codes are < 3^5 and weights ≤ 5^(5/2) < 256, so d ≤ 5 fits in 12 bytes.
type PackedKey = u128;

pub fn enumerate_profiles_with(d: usize, parallel: bool) -> Result<ProfileCatalog, Error> {
    if d == 0 || d > MAX_ENUM_DIM {
        return Err(Error::InvalidInput(format!(
            "profile enumeration supports 1 ≤ d ≤ {MAX_ENUM_DIM}, got {d}"
        )));
    }
    if d == MAX_ENUM_DIM {
        log::warn!("enumerating profiles for d = {d}; this is extremely expensive");
    }
    let vectors: Vec<Vec<i64>> = (0..3usize.pow(d as u32))
        .map(|c| ProfileVector::from_code(c, d))
        .filter(|v| !v.is_zero())
        .map(|v| v.as_i64())
        .collect();

    let firsts: Vec<usize> = (0..vectors.len()).collect();
    let keys: BTreeSet<PackedKey> = {
        #[cfg(feature = "parallel")]
        {
            if parallel {
                use rayon::prelude::*;
                firsts
                    .par_iter()
                    .map(|&f| profiles_with_first(d, &vectors, f))
                    .reduce(HashSet::new, |mut a, b| {
                        a.extend(b);
                        a
                    })
                    .into_iter()
                    .collect()
            } else {
                sequential_keys(d, &vectors, &firsts)
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = parallel;
            sequential_keys(d, &vectors, &firsts)
        }
    };

    let mut profiles: Vec<Profile> = keys.into_iter().map(|k| unpack(k, d)).collect();
    profiles.sort();
    Ok(ProfileCatalog { d, profiles })
}

fn sequential_keys(d: usize, vectors: &[Vec<i64>], firsts: &[usize]) -> BTreeSet<PackedKey> {
    let mut all = HashSet::new();
    for &f in firsts {
        all.extend(profiles_with_first(d, vectors, f));
    }
    all.into_iter().collect()
}

/// All canonical keys generated by size-d subsets whose smallest member is
/// `vectors[first]`.
fn profiles_with_first(d: usize, vectors: &[Vec<i64>], first: usize) -> HashSet<PackedKey> {
    let m = vectors.len();
    let mut out = HashSet::new();
    if m - first < d {
        return out;
    }
    let mut idx: Vec<usize> = (0..d).map(|i| first + i).collect();
    let mut a = IntMatrix::zeros(d, d);
    let mut num = vec![0i64; d];
    let mut pairs: Vec<(usize, i64)> = Vec::with_capacity(d + 1);
    loop {
        for (j, &vi) in idx.iter().enumerate() {
            for i in 0..d {
                a.set(i, j, vectors[vi][i]);
            }
        }
        let (det, adj) = numerics::small_det_adjugate(&a);
        if det != 0 {
            let sign = det.signum();
            'w: for w in vectors {
                for i in 0..d {
                    let v: i64 = (0..d).map(|j| adj[i * d + j] * w[j]).sum::<i64>() * sign;
                    if v < 0 {
                        continue 'w;
                    }
                    num[i] = v;
                }
                pairs.clear();
                for i in 0..d {
                    if num[i] > 0 {
                        pairs.push((code_of(&vectors[idx[i]]), num[i]));
                    }
                }
                let neg_w: Vec<i64> = w.iter().map(|e| -e).collect();
                pairs.push((code_of(&neg_w), det.abs()));
                out.insert(pack(&mut pairs));
            }
        }
        // next combination of the remaining d-1 slots
        let mut k = d;
        loop {
            if k == 1 {
                return out;
            }
            k -= 1;
            if idx[k] < m - (d - k) {
                break;
            }
        }
        idx[k] += 1;
        for j in k + 1..d {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn code_of(v: &[i64]) -> usize {
    v.iter().fold(0, |acc, &e| acc * 3 + (e + 1) as usize)
}

fn pack(pairs: &mut [(usize, i64)]) -> PackedKey {
    pairs.sort_unstable();
    let g = pairs.iter().fold(0i64, |g, &(_, w)| g.gcd(&w));
    let mut key: PackedKey = 0;
    for &(code, w) in pairs.iter() {
        key = (key << 16) | (((code + 1) as u128) << 8) | (w / g) as u128;
    }
    key
}

fn unpack(mut key: PackedKey, d: usize) -> Profile {
    let mut pairs = Vec::new();
    while key != 0 {
        let w = (key & 0xff) as i64;
        let code = ((key >> 8) & 0xff) as usize - 1;
        pairs.push((code, w));
        key >>= 16;
    }
    pairs.reverse();
    let first = pairs[0].1;
    Profile {
        vectors: pairs
            .iter()
            .map(|&(c, _)| ProfileVector::from_code(c, d))
            .collect(),
        alpha: pairs.iter().map(|&(_, w)| numerics::rat(w, first)).collect(),
    }
}
