mod common;

use common::*;
use num_traits::{One, Signed};
use subsetalloc::numerics::{hadamard_bound_floor, rat_int, IntMatrix};
use subsetalloc::profiles::*;

/// Every subset of `{-1,0,1}^2 \ {0}` of size 2 or 3, tested directly for
/// minimal dependence with all-positive balancing coefficients.
fn exhaustive_d2() -> Vec<Vec<Vec<i64>>> {
    let vs: Vec<Vec<i64>> = (0..9).map(|c| vec![c / 3 - 1, c % 3 - 1]).filter(|v| v != &vec![0, 0]).collect();
    let mut out = Vec::new();
    for a in 0..vs.len() {
        for b in a + 1..vs.len() {
            // pair: positive multiples of each other's negation
            if vs[a][0] == -vs[b][0] && vs[a][1] == -vs[b][1] {
                out.push(vec![vs[a].clone(), vs[b].clone()]);
            }
            for c in b + 1..vs.len() {
                let set = [&vs[a], &vs[b], &vs[c]];
                // no two of them parallel
                let par = |u: &Vec<i64>, v: &Vec<i64>| u[0] * v[1] == u[1] * v[0];
                if par(set[0], set[1]) || par(set[0], set[2]) || par(set[1], set[2]) {
                    continue;
                }
                // coefficients by Cramer: x·u + y·v = -w with x, y > 0
                let det = set[0][0] * set[1][1] - set[0][1] * set[1][0];
                let x = -set[2][0] * set[1][1] + set[2][1] * set[1][0];
                let y = -set[0][0] * set[2][1] + set[0][1] * set[2][0];
                if det != 0 && x * det > 0 && y * det > 0 {
                    out.push(set.iter().map(|v| (*v).clone()).collect());
                }
            }
        }
    }
    out
}

#[test]
fn d2_matches_exhaustive_subsets() {
    let mut expect: Vec<Vec<Vec<i64>>> = exhaustive_d2();
    for s in &mut expect {
        s.sort();
    }
    expect.sort();
    let mut got: Vec<Vec<Vec<i64>>> = catalog(2).profiles().iter().map(|p| p.vectors().iter().map(|v| v.as_i64()).collect()).collect();
    got.sort();
    assert_eq!(got, expect);
    assert_eq!(profile_count(2).unwrap(), expect.len() + 1);
}

#[test]
fn small_catalogs_match_direct_definition() {
    for d in 1..=3 {
        assert_eq!(catalog(d).len() as u64, direct_circuit_count(d), "d={d}");
    }
}

#[test]
fn d1_single_profile() {
    let c = catalog(1);
    assert_eq!(c.len(), 1);
    let p = &c.profiles()[0];
    assert_eq!(p.vectors().iter().map(|v| v.as_i64()).collect::<Vec<_>>(), vec![vec![-1], vec![1]]);
    assert_eq!(p.alpha(), &[rat_int(1), rat_int(1)]);
    assert_eq!(profile_count(1).unwrap(), 2);
}

#[test]
fn d3_count() {
    assert_eq!(catalog(3).len(), 777);
    assert_eq!(profile_count(3).unwrap(), 778);
}

#[test]
fn every_profile_verifies_and_is_canonical() {
    for d in 1..=3 {
        let c = catalog(d);
        c.verify_all().unwrap();
        for w in c.profiles().windows(2) {
            assert!(w[0] < w[1]);
        }
        for p in c.profiles() {
            assert!(p.len() <= d + 1);
            assert!(p.alpha()[0].is_one());
            assert!(p.alpha().iter().all(|a| a.is_positive()));
            let again = canonicalize(p.vectors().iter().rev().cloned().collect(), p.alpha().iter().rev().map(|a| a * rat_int(3)).collect()).unwrap();
            assert_eq!(&again, p);
        }
    }
}

#[test]
fn coefficient_ratios_within_bracket() {
    // some coefficient j puts every ratio α_i/α_j inside [1/⌊d^{d/2}⌋, d]
    for d in 1..=3 {
        let lo = subsetalloc::numerics::Rational::new(1.into(), hadamard_bound_floor(d));
        let hi = rat_int(d as i64);
        for p in catalog(d).profiles() {
            let ok = p.alpha().iter().any(|aj| p.alpha().iter().all(|ai| {
                let r = ai / aj;
                r >= lo && r <= hi
            }));
            assert!(ok, "{:?}", p);
        }
    }
}

#[test]
fn balancing_holds() {
    for p in catalog(3).profiles() {
        let cols: Vec<Vec<i64>> = p.vectors().iter().map(|v| v.as_i64()).collect();
        let m = IntMatrix::from_columns(3, &cols);
        assert!(m.mul_vec(p.alpha()).iter().all(|v| v == &rat_int(0)));
    }
}

#[test]
fn parallel_and_sequential_enumeration_agree() {
    for d in 1..=3 {
        assert_eq!(enumerate_profiles_with(d, true).unwrap(), enumerate_profiles_with(d, false).unwrap());
    }
}

#[test]
fn cache_round_trip_and_rejection() {
    let dir = tempfile::tempdir().unwrap();
    let c = catalog(2);
    let path = c.save(dir.path()).unwrap();
    assert_eq!(ProfileCatalog::load(dir.path(), 2).unwrap().as_ref(), Some(c));
    assert_eq!(ProfileCatalog::load_or_build(dir.path(), 2, false).unwrap(), *c);
    assert!(ProfileCatalog::load(dir.path(), 3).unwrap().is_none());
    let text = std::fs::read_to_string(&path).unwrap().replacen("\"+-\"", "\"++\"", 1);
    std::fs::write(&path, text).unwrap();
    assert!(ProfileCatalog::load(dir.path(), 2).is_err());
}

#[test]
fn out_of_range_dimension() {
    assert!(enumerate_profiles(0).is_err());
    assert!(enumerate_profiles(MAX_ENUM_DIM + 1).is_err());
}

#[test]
fn upper_bound_values() {
    assert_eq!(profile_upper_bound(2), 84.into());
    assert_eq!(profile_upper_bound(3), 17550.into());
}
