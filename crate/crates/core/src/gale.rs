//! Hypertoric data and Gale duality.
//!
//! A configuration is an `n x d` integer matrix `U` whose columns
//! `u_1, ..., u_d` span `Q^n`. Its Gale dual is the configuration given by
//! the integer kernel of `U`, written in Hermite normal form.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GaleError {
    #[error("columns span rank {rank}, expected {n}")]
    RankDeficient { rank: usize, n: usize },
    #[error("configurations have {left} and {right} columns")]
    DimensionMismatch { left: usize, right: usize },
    #[error("column {index} has length {len}, expected {n}")]
    BadColumn { index: usize, len: usize, n: usize },
    #[error("{count} columns given, header says d = {d}")]
    ColumnCount { count: usize, d: usize },
    #[error("n = {n} exceeds d = {d}")]
    TooManyRows { n: usize, d: usize },
    #[error("entry does not fit in 64 bits")]
    Overflow,
}

#[derive(Serialize, Deserialize)]
struct RawConfig {
    n: usize,
    d: usize,
    columns: Vec<Vec<i64>>,
}

/// Vector configuration `u_1, ..., u_d` in `Z^n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct ToricConfig {
    n: usize,
    d: usize,
    columns: Vec<Vec<i64>>,
}

impl TryFrom<RawConfig> for ToricConfig {
    type Error = GaleError;
    fn try_from(raw: RawConfig) -> Result<Self, GaleError> {
        ToricConfig::new(raw.n, raw.d, raw.columns)
    }
}

impl From<ToricConfig> for RawConfig {
    fn from(c: ToricConfig) -> RawConfig {
        RawConfig { n: c.n, d: c.d, columns: c.columns }
    }
}

impl ToricConfig {
    pub fn new(n: usize, d: usize, columns: Vec<Vec<i64>>) -> Result<Self, GaleError> {
        if columns.len() != d {
            return Err(GaleError::ColumnCount { count: columns.len(), d });
        }
        if n > d {
            return Err(GaleError::TooManyRows { n, d });
        }
        for (index, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(GaleError::BadColumn { index, len: col.len(), n });
            }
        }
        Ok(ToricConfig { n, d, columns })
    }

    /// Configuration from the rows of an `n x d` matrix.
    pub fn from_rows(rows: &[Vec<i64>], d: usize) -> Result<Self, GaleError> {
        let n = rows.len();
        let columns =
            (0..d).map(|j| rows.iter().map(|r| r.get(j).copied().unwrap_or(0)).collect()).collect();
        ToricConfig::new(n, d, columns)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn columns(&self) -> &[Vec<i64>] {
        &self.columns
    }

    /// The `n x d` matrix `U`.
    pub fn rows(&self) -> Vec<Vec<i64>> {
        (0..self.n).map(|i| self.columns.iter().map(|c| c[i]).collect()).collect()
    }

    fn big_rows(&self) -> Vec<Vec<BigInt>> {
        to_big(&self.rows())
    }

    pub fn rank(&self) -> usize {
        hermite_normal_form(&self.big_rows()).len()
    }

    fn check_rank(&self) -> Result<(), GaleError> {
        let rank = self.rank();
        if rank < self.n {
            return Err(GaleError::RankDeficient { rank, n: self.n });
        }
        Ok(())
    }
}

fn to_big(m: &[Vec<i64>]) -> Vec<Vec<BigInt>> {
    m.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
}

fn to_small(m: &[Vec<BigInt>]) -> Result<Vec<Vec<i64>>, GaleError> {
    m.iter().map(|r| r.iter().map(|x| x.to_i64().ok_or(GaleError::Overflow)).collect()).collect()
}

/// Row-style Hermite normal form of the lattice spanned by `rows`: nonzero
/// rows only, positive pivots, entries above each pivot reduced into `[0, pivot)`.
pub fn hermite_normal_form(rows: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let mut m: Vec<Vec<BigInt>> = rows.to_vec();
    let width = m.first().map_or(0, Vec::len);
    let mut pivot_row = 0;
    let mut pivots = Vec::new();
    for col in 0..width {
        if pivot_row == m.len() {
            break;
        }
        // Euclid on the column below pivot_row
        loop {
            let nonzero: Vec<usize> =
                (pivot_row..m.len()).filter(|&r| !m[r][col].is_zero()).collect();
            if nonzero.is_empty() {
                break;
            }
            let best = *nonzero.iter().min_by_key(|&&r| m[r][col].abs()).expect("nonempty");
            m.swap(pivot_row, best);
            let mut done = true;
            for r in pivot_row + 1..m.len() {
                if m[r][col].is_zero() {
                    continue;
                }
                let q = m[r][col].div_floor(&m[pivot_row][col]);
                let (head, tail) = m.split_at_mut(r);
                for (x, p) in tail[0].iter_mut().zip(&head[pivot_row]) {
                    *x -= &q * p;
                }
                if !m[r][col].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if m[pivot_row][col].is_zero() {
            continue;
        }
        if m[pivot_row][col].is_negative() {
            for x in &mut m[pivot_row] {
                *x = -&*x;
            }
        }
        pivots.push((pivot_row, col));
        pivot_row += 1;
    }
    m.truncate(pivot_row);
    for &(r, col) in &pivots {
        for above in 0..r {
            let q = m[above][col].div_floor(&m[r][col]);
            if q.is_zero() {
                continue;
            }
            let (head, tail) = m.split_at_mut(r);
            for (x, p) in head[above].iter_mut().zip(&tail[0]) {
                *x -= &q * p;
            }
        }
    }
    m
}

/// Basis of `{a in Z^d : U a = 0}` in Hermite normal form.
fn integer_kernel(rows: &[Vec<BigInt>], d: usize) -> Vec<Vec<BigInt>> {
    // reduce [U^T | I_d]; rows whose U^T part vanishes span the kernel
    let n = rows.len();
    let mut aug: Vec<Vec<BigInt>> = (0..d)
        .map(|j| {
            let mut r: Vec<BigInt> = rows.iter().map(|row| row[j].clone()).collect();
            r.extend((0..d).map(|k| if k == j { BigInt::one() } else { BigInt::zero() }));
            r
        })
        .collect();
    let mut pivot_row = 0;
    for col in 0..n {
        loop {
            let nonzero: Vec<usize> = (pivot_row..d).filter(|&r| !aug[r][col].is_zero()).collect();
            if nonzero.is_empty() {
                break;
            }
            let best = *nonzero.iter().min_by_key(|&&r| aug[r][col].abs()).expect("nonempty");
            aug.swap(pivot_row, best);
            let mut done = true;
            for r in pivot_row + 1..d {
                if aug[r][col].is_zero() {
                    continue;
                }
                let q = aug[r][col].div_floor(&aug[pivot_row][col]);
                let (head, tail) = aug.split_at_mut(r);
                for (x, p) in tail[0].iter_mut().zip(&head[pivot_row]) {
                    *x -= &q * p;
                }
                if !aug[r][col].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if pivot_row < d && !aug[pivot_row][col].is_zero() {
            pivot_row += 1;
        }
    }
    let basis: Vec<Vec<BigInt>> = aug[pivot_row..].iter().map(|r| r[n..].to_vec()).collect();
    hermite_normal_form(&basis)
}

/// Integer kernel of `U` as a `(d - n) x d` matrix in Hermite normal form.
pub fn kernel_lattice(c: &ToricConfig) -> Result<Vec<Vec<i64>>, GaleError> {
    c.check_rank()?;
    to_small(&integer_kernel(&c.big_rows(), c.d))
}

/// Configuration whose columns are the coordinate functionals `w_i` on the kernel.
pub fn gale_dual(c: &ToricConfig) -> Result<ToricConfig, GaleError> {
    let k = kernel_lattice(c)?;
    ToricConfig::from_rows(&k, c.d)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DualityReport {
    pub n: usize,
    pub d: usize,
    pub dim_primal: usize,
    pub dim_dual: usize,
    pub fi_primal: usize,
    pub fi_dual: usize,
    pub isometry_rank_primal: usize,
    pub isometry_rank_dual: usize,
    /// Index of the lattice spanned by the columns in `Z^n`.
    pub torsion_order: String,
    /// Columns whose entries have a common factor (or vanish).
    pub nonprimitive_columns: Vec<usize>,
}

pub fn duality_report(c: &ToricConfig) -> Result<DualityReport, GaleError> {
    c.check_rank()?;
    let cols = to_big(&c.columns);
    let torsion: BigInt = hermite_normal_form(&cols)
        .iter()
        .map(|row| row.iter().find(|x| !x.is_zero()).cloned().unwrap_or_else(BigInt::one))
        .product();
    let nonprimitive = c
        .columns
        .iter()
        .enumerate()
        .filter(|(_, col)| col.iter().fold(0i64, |g, &x| g.gcd(&x)) != 1 && c.n > 0)
        .map(|(i, _)| i)
        .collect();
    let k = c.d - c.n;
    Ok(DualityReport {
        n: c.n,
        d: c.d,
        dim_primal: 4 * c.n,
        dim_dual: 4 * k,
        fi_primal: k,
        fi_dual: c.n,
        isometry_rank_primal: c.n,
        isometry_rank_dual: k,
        torsion_order: torsion.to_string(),
        nonprimitive_columns: nonprimitive,
    })
}

/// True when the row lattice of `b` is exactly the integer kernel of `a`.
pub fn is_gale_dual_pair(a: &ToricConfig, b: &ToricConfig) -> Result<bool, GaleError> {
    if a.d != b.d {
        return Err(GaleError::DimensionMismatch { left: a.d, right: b.d });
    }
    a.check_rank()?;
    b.check_rank()?;
    Ok(hermite_normal_form(&b.big_rows()) == integer_kernel(&a.big_rows(), a.d))
}

/// Hermite normal form of the row lattice of `c`.
pub fn row_lattice(c: &ToricConfig) -> Vec<Vec<i64>> {
    to_small(&hermite_normal_form(&c.big_rows())).expect("reduced entries stay bounded")
}
