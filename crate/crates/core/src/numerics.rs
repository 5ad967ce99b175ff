//! Exact scalars and small dense linear algebra over the integers and rationals.
//!
//! Everything here is exact. Determinant and rank use fraction-free (Bareiss)
//! elimination so intermediate values stay integral; solving and kernel
//! extraction work over [`Rational`].

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational, always kept in lowest terms with a positive
/// denominator.
pub type Rational = num_rational::BigRational;

/// Dense vector of exact rationals.
pub type RationalVector = Vec<Rational>;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `"k"` or `"k/l"`.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Rational::new(n, d))
        }
        None => s.parse::<BigInt>().ok().map(Rational::from_integer),
    }
}

/// Formats as `"k"` when integral, otherwise `"k/l"`.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Least common multiple of the denominators of `values` (1 for an empty input).
pub fn lcm_of_denominators<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// `floor(sqrt(n))` for a non-negative integer.
pub fn isqrt(n: &BigInt) -> BigInt {
    assert!(!n.is_negative(), "isqrt of negative value");
    n.sqrt()
}

/// `ceil(d^(d/2))`, the Hadamard bound for d×d matrices over {-1,0,1}
/// rounded up to an integer.
pub fn hadamard_bound_ceil(d: usize) -> BigInt {
    let dd = BigInt::from(d).pow(d as u32);
    let r = isqrt(&dd);
    if &r * &r == dd {
        r
    } else {
        r + 1
    }
}

/// `floor(d^(d/2))`.
pub fn hadamard_bound_floor(d: usize) -> BigInt {
    isqrt(&BigInt::from(d).pow(d as u32))
}

/// Row-major integer matrix. In this crate entries are almost always in
/// {-1, 0, 1}, but any `i64` is accepted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    /// Builds from row slices; panics if the rows are ragged.
    pub fn from_rows<R: AsRef<[i64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged matrix rows");
            entries.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            entries,
        }
    }

    /// Builds a matrix whose j-th column is `columns[j]`. `height` is used when
    /// there are no columns.
    pub fn from_columns<C: AsRef<[i64]>>(height: usize, columns: &[C]) -> Self {
        let mut m = Self::zeros(height, columns.len());
        for (j, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            assert_eq!(c.len(), height, "column length mismatch");
            for (i, &v) in c.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: i64) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Exact product with a rational vector.
    pub fn mul_vec(&self, x: &[Rational]) -> RationalVector {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                (0..self.cols).fold(Rational::zero(), |acc, j| {
                    let a = self.get(i, j);
                    if a == 0 {
                        acc
                    } else {
                        acc + &x[j] * rat_int(a)
                    }
                })
            })
            .collect()
    }

    fn to_big_rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| BigInt::from(self.get(i, j))).collect())
            .collect()
    }

    fn to_rational_rows(&self) -> Vec<Vec<Rational>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| rat_int(self.get(i, j))).collect())
            .collect()
    }
}

/// Fraction-free elimination. Returns the rank and, for square input, the
/// determinant (with row-swap sign applied).
fn bareiss(m: &IntMatrix) -> (usize, BigInt) {
    let mut a = m.to_big_rows();
    let (rows, cols) = (m.rows, m.cols);
    let mut prev = BigInt::one();
    let mut sign = 1i32;
    let mut rank = 0usize;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        if p != rank {
            a.swap(p, rank);
            sign = -sign;
        }
        for r in rank + 1..rows {
            for c in col + 1..cols {
                let v = (&a[rank][col] * &a[r][c] - &a[r][col] * &a[rank][c]) / &prev;
                a[r][c] = v;
            }
            a[r][col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
    }
    let det = if m.is_square() && rank == rows {
        if rows == 0 {
            BigInt::one()
        } else {
            prev * sign
        }
    } else {
        BigInt::zero()
    };
    (rank, det)
}

/// Exact determinant of a square matrix.
pub fn determinant(m: &IntMatrix) -> BigInt {
    assert!(m.is_square(), "determinant of non-square matrix");
    bareiss(m).1
}

/// Exact rank over the rationals.
pub fn rank(m: &IntMatrix) -> usize {
    bareiss(m).0
}

/// Reduced row echelon form over the rationals; returns the pivot column of
/// each non-zero row.
fn rref(a: &mut [Vec<Rational>], cols: usize) -> Vec<usize> {
    let rows = a.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(p, r);
        let inv = a[r][c].recip();
        for v in a[r].iter_mut() {
            *v *= &inv;
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for k in 0..a[i].len() {
                    let delta = &f * &a[r][k];
                    a[i][k] -= delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Solves `A x = b` exactly. Returns `None` if `A` is singular.
pub fn solve_square(a: &IntMatrix, b: &[i64]) -> Option<RationalVector> {
    assert!(a.is_square(), "solve_square needs a square matrix");
    assert_eq!(a.rows, b.len());
    let n = a.rows;
    let mut aug: Vec<Vec<Rational>> = a
        .to_rational_rows()
        .into_iter()
        .zip(b)
        .map(|(mut row, &bi)| {
            row.push(rat_int(bi));
            row
        })
        .collect();
    let pivots = rref(&mut aug, n);
    if pivots.len() < n {
        return None;
    }
    Some(aug.into_iter().map(|row| row[n].clone()).collect())
}

/// A non-zero kernel vector of `m`, or `None` when the columns are
/// independent. The lowest-index free column gets coefficient 1, the other
/// free columns 0, and the pivot columns are read off the RREF.
pub fn nullspace_vector(m: &IntMatrix) -> Option<RationalVector> {
    let mut a = m.to_rational_rows();
    let pivots = rref(&mut a, m.cols);
    let free = (0..m.cols).find(|c| !pivots.contains(c))?;
    let mut beta = vec![Rational::zero(); m.cols];
    beta[free] = Rational::one();
    for (row, &pc) in pivots.iter().enumerate() {
        beta[pc] = -a[row][free].clone();
    }
    Some(beta)
}

/// Determinant and adjugate of a small square matrix using `i64` arithmetic.
///
/// Intended for the {-1,0,1} matrices of profile enumeration, where every
/// cofactor is bounded by (d-1)^((d-1)/2) and `i64` cannot overflow for the
/// supported dimensions. Returns `(det, adj)` with `adj` row-major.
pub fn small_det_adjugate(m: &IntMatrix) -> (i64, Vec<i64>) {
    assert!(m.is_square());
    let n = m.rows;
    let det = small_det(&m.entries, n);
    if n == 1 {
        return (det, vec![1]);
    }
    let mut adj = vec![0i64; n * n];
    let mut minor = vec![0i64; (n - 1) * (n - 1)];
    for i in 0..n {
        for j in 0..n {
            let mut k = 0;
            for r in (0..n).filter(|&r| r != i) {
                for c in (0..n).filter(|&c| c != j) {
                    minor[k] = m.entries[r * n + c];
                    k += 1;
                }
            }
            let cof = small_det(&minor, n - 1);
            let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
            // adj = transpose of the cofactor matrix
            adj[j * n + i] = sign * cof;
        }
    }
    (det, adj)
}

/// Integer Bareiss determinant on a row-major `n×n` slice.
fn small_det(entries: &[i64], n: usize) -> i64 {
    if n == 0 {
        return 1;
    }
    let mut a = entries.to_vec();
    let mut prev = 1i64;
    let mut sign = 1i64;
    for k in 0..n {
        if a[k * n + k] == 0 {
            let Some(p) = (k + 1..n).find(|&r| a[r * n + k] != 0) else {
                return 0;
            };
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            sign = -sign;
        }
        let piv = a[k * n + k];
        for r in k + 1..n {
            for c in k + 1..n {
                a[r * n + c] = (piv * a[r * n + c] - a[r * n + k] * a[k * n + c]) / prev;
            }
            a[r * n + k] = 0;
        }
        prev = piv;
    }
    sign * a[(n - 1) * n + (n - 1)]
}

/// Converts a rational that is known to fit into an `f64` for reporting.
pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
