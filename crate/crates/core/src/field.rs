//! Exact linear algebra over prime fields GF(p).
//!
//! Elements are plain `u32` values in `[0, p)`; the modulus lives in the
//! [`PrimeField`] descriptor carried by every [`FMatrix`]. All elimination is
//! exact, and [`FMatrix::rref`] yields the canonical reduced row-echelon form,
//! so ranks and row-space tests are deterministic.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A prime field GF(p).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimeField {
    p: u32,
}

impl PrimeField {
    /// Builds GF(p). Composite moduli, anything below 2, and moduli of 2^31 or
    /// more are rejected.
    pub fn new(p: u64) -> Result<Self> {
        if !(2..1 << 31).contains(&p) || !is_prime(p) {
            return Err(Error::CompositeModulus(p));
        }
        Ok(PrimeField { p: p as u32 })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// Checks that `value` is a canonical element.
    pub fn element(&self, value: u64) -> Result<u32> {
        if value >= self.p as u64 {
            return Err(Error::EntryOutOfRange { value, p: self.p });
        }
        Ok(value as u32)
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        ((a as u64 + b as u64) % self.p as u64) as u32
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        ((a as u64 + self.p as u64 - b as u64) % self.p as u64) as u32
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.p as u64) as u32
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    /// Multiplicative inverse; `a` must be nonzero.
    pub fn inv(&self, a: u32) -> u32 {
        assert!(a != 0, "zero has no inverse");
        self.pow(a, self.p as u64 - 2)
    }

    pub fn pow(&self, mut base: u32, mut exp: u64) -> u32 {
        let mut acc = 1u32 % self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }
}

impl fmt::Display for PrimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({})", self.p)
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut k = 2u64;
    while k * k <= n {
        if n.is_multiple_of(k) {
            return false;
        }
        k += 1;
    }
    true
}

/// Dense row-major matrix over a prime field.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FMatrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    entries: Vec<u32>,
}

/// Canonical reduced row-echelon form together with its pivot columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rref {
    pub matrix: FMatrix,
    pub pivots: Vec<usize>,
}

impl Rref {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// The nonzero rows of the reduced form: a canonical basis of the row space.
    pub fn basis(&self) -> FMatrix {
        self.matrix.select_rows(0..self.rank())
    }
}

impl FMatrix {
    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        FMatrix {
            field,
            rows,
            cols,
            entries: vec![0; rows * cols],
        }
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.entries[i * n + i] = 1;
        }
        m
    }

    /// Builds a matrix from row-major entries, checking length and range.
    pub fn from_entries(field: PrimeField, rows: usize, cols: usize, entries: Vec<u64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        let entries = entries
            .into_iter()
            .map(|v| field.element(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(FMatrix {
            field,
            rows,
            cols,
            entries,
        })
    }

    /// Builds a matrix from nested rows. `cols` is only consulted when there
    /// are no rows.
    pub fn from_rows(field: PrimeField, rows: &[Vec<u64>], cols: usize) -> Result<Self> {
        let width = rows.first().map_or(cols, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} entries, expected {width}",
                r.len()
            )));
        }
        let flat = rows.iter().flatten().copied().collect();
        Self::from_entries(field, rows.len(), width, flat)
    }

    pub(crate) fn from_raw(field: PrimeField, rows: usize, cols: usize, entries: Vec<u32>) -> Self {
        debug_assert_eq!(entries.len(), rows * cols);
        FMatrix {
            field,
            rows,
            cols,
            entries,
        }
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: u32) {
        debug_assert!(value < self.field.p);
        self.entries[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0)
    }

    pub fn select_rows(&self, range: impl IntoIterator<Item = usize>) -> FMatrix {
        let mut entries = Vec::new();
        let mut rows = 0;
        for r in range {
            entries.extend_from_slice(self.row(r));
            rows += 1;
        }
        FMatrix::from_raw(self.field, rows, self.cols, entries)
    }

    /// Columns `start..start + width` as a new matrix.
    pub fn column_block(&self, start: usize, width: usize) -> FMatrix {
        assert!(start + width <= self.cols);
        let mut entries = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            entries.extend_from_slice(&self.row(r)[start..start + width]);
        }
        FMatrix::from_raw(self.field, self.rows, width, entries)
    }

    /// Copies `block` into this matrix with its top-left corner at `(row, col)`.
    pub fn place(&mut self, row: usize, col: usize, block: &FMatrix) {
        assert!(row + block.rows <= self.rows && col + block.cols <= self.cols);
        for r in 0..block.rows {
            let dst = (row + r) * self.cols + col;
            self.entries[dst..dst + block.cols].copy_from_slice(block.row(r));
        }
    }

    pub fn transpose(&self) -> FMatrix {
        let mut t = FMatrix::zeros(self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.entries[c * self.rows + r] = self.get(r, c);
            }
        }
        t
    }

    pub fn mul(&self, rhs: &FMatrix) -> Result<FMatrix> {
        self.same_field(rhs)?;
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = FMatrix::zeros(self.field, self.rows, rhs.cols);
        self.mul_into(rhs, &mut out.entries);
        Ok(out)
    }

    /// `out += self * rhs` (shapes assumed compatible).
    pub(crate) fn mul_into(&self, rhs: &FMatrix, out: &mut [u32]) {
        let f = self.field;
        let p = f.p as u64;
        for r in 0..self.rows {
            let orow = &mut out[r * rhs.cols..(r + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0 {
                    continue;
                }
                let rrow = rhs.row(k);
                for (o, &b) in orow.iter_mut().zip(rrow) {
                    if b != 0 {
                        *o = ((*o as u64 + a as u64 * b as u64) % p) as u32;
                    }
                }
            }
        }
    }

    pub fn add(&self, rhs: &FMatrix) -> Result<FMatrix> {
        self.same_field(rhs)?;
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let entries = self
            .entries
            .iter()
            .zip(&rhs.entries)
            .map(|(&a, &b)| self.field.add(a, b))
            .collect();
        Ok(FMatrix::from_raw(self.field, self.rows, self.cols, entries))
    }

    pub fn scale(&self, k: u32) -> FMatrix {
        let entries = self.entries.iter().map(|&a| self.field.mul(a, k)).collect();
        FMatrix::from_raw(self.field, self.rows, self.cols, entries)
    }

    fn same_field(&self, other: &FMatrix) -> Result<()> {
        if self.field != other.field {
            return Err(Error::FieldMismatch {
                left: self.field.p,
                right: other.field.p,
            });
        }
        Ok(())
    }

    /// Rank via forward elimination.
    pub fn rank(&self) -> usize {
        let mut work = self.entries.clone();
        forward_rank(self.field, self.rows, self.cols, &mut work)
    }

    /// Canonical reduced row-echelon form.
    pub fn rref(&self) -> Rref {
        let mut matrix = self.clone();
        let pivots = reduce_in_place(self.field, self.rows, self.cols, self.cols, &mut matrix.entries);
        Rref { matrix, pivots }
    }

    /// Two-sided inverse of a square matrix, if it exists.
    pub fn inverse(&self) -> Option<FMatrix> {
        if self.rows != self.cols {
            return None;
        }
        let id = FMatrix::identity(self.field, self.rows);
        solve_decoder(self, &id).ok().flatten()
    }

    /// True when every row of `target` lies in the row space of `self`.
    pub fn spans(&self, target: &FMatrix) -> Result<bool> {
        self.same_field(target)?;
        if self.cols != target.cols {
            return Err(Error::DimensionMismatch(format!(
                "row spaces of width {} and {}",
                self.cols, target.cols
            )));
        }
        let r = self.rank();
        let both = stack_refs(self.field, self.cols, &[self, target])?;
        Ok(both.rank() == r)
    }
}

impl fmt::Debug for FMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FMatrix[{}; {}x{}]", self.field, self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "\n  {:?}", self.row(r))?;
        }
        Ok(())
    }
}

/// Forward elimination; returns the rank. `work` is clobbered.
pub(crate) fn forward_rank(field: PrimeField, rows: usize, cols: usize, work: &mut [u32]) -> usize {
    let p = field.p as u64;
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(piv) = (rank..rows).find(|&r| work[r * cols + col] != 0) else {
            continue;
        };
        if piv != rank {
            for c in col..cols {
                work.swap(piv * cols + c, rank * cols + c);
            }
        }
        let inv = field.inv(work[rank * cols + col]) as u64;
        for r in rank + 1..rows {
            let lead = work[r * cols + col];
            if lead == 0 {
                continue;
            }
            let factor = (lead as u64 * inv) % p;
            for c in col..cols {
                let pv = work[rank * cols + c];
                if pv != 0 {
                    let cur = work[r * cols + c] as u64;
                    work[r * cols + c] = ((cur + p - (factor * pv as u64) % p) % p) as u32;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Full reduction to RREF, pivoting only within the first `pivot_cols`
/// columns (the rest ride along, e.g. an identity used to track the
/// transformation). Returns the pivot columns.
fn reduce_in_place(field: PrimeField, rows: usize, cols: usize, pivot_cols: usize, work: &mut [u32]) -> Vec<usize> {
    let p = field.p as u64;
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..pivot_cols {
        if rank == rows {
            break;
        }
        let Some(piv) = (rank..rows).find(|&r| work[r * cols + col] != 0) else {
            continue;
        };
        if piv != rank {
            for c in 0..cols {
                work.swap(piv * cols + c, rank * cols + c);
            }
        }
        let inv = field.inv(work[rank * cols + col]) as u64;
        for c in 0..cols {
            let v = work[rank * cols + c] as u64;
            work[rank * cols + c] = ((v * inv) % p) as u32;
        }
        for r in 0..rows {
            if r == rank {
                continue;
            }
            let factor = work[r * cols + col] as u64;
            if factor == 0 {
                continue;
            }
            for c in 0..cols {
                let pv = work[rank * cols + c];
                if pv != 0 {
                    let cur = work[r * cols + c] as u64;
                    work[r * cols + c] = ((cur + p - (factor * pv as u64) % p) % p) as u32;
                }
            }
        }
        pivots.push(col);
        rank += 1;
    }
    pivots
}

/// Vertical concatenation. `cols` is the declared width, used when `ms` is empty.
pub fn stack(field: PrimeField, cols: usize, ms: &[FMatrix]) -> Result<FMatrix> {
    let refs: Vec<&FMatrix> = ms.iter().collect();
    stack_refs(field, cols, &refs)
}

pub fn stack_refs(field: PrimeField, cols: usize, ms: &[&FMatrix]) -> Result<FMatrix> {
    let mut entries = Vec::with_capacity(ms.iter().map(|m| m.entries.len()).sum());
    let mut rows = 0;
    for (i, m) in ms.iter().enumerate() {
        if m.field != field {
            return Err(Error::FieldMismatch {
                left: field.p,
                right: m.field.p,
            });
        }
        if m.cols != cols {
            return Err(Error::DimensionMismatch(format!(
                "stack operand {i} has {} columns, expected {cols}",
                m.cols
            )));
        }
        entries.extend_from_slice(&m.entries);
        rows += m.rows;
    }
    Ok(FMatrix::from_raw(field, rows, cols, entries))
}

/// Finds `D` with `D * basis = target`, or `None` when some row of `target`
/// is outside the row space of `basis`.
pub fn solve_decoder(basis: &FMatrix, target: &FMatrix) -> Result<Option<FMatrix>> {
    basis.same_field(target)?;
    if basis.cols != target.cols {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} columns, target has {}",
            basis.cols, target.cols
        )));
    }
    let field = basis.field;
    let (r, c) = (basis.rows, basis.cols);
    let width = c + r;
    // [basis | I] reduced on the basis columns: the right block records the
    // row operations, so each reduced row is a known combination of basis rows.
    let mut aug = vec![0u32; r * width];
    for i in 0..r {
        aug[i * width..i * width + c].copy_from_slice(basis.row(i));
        aug[i * width + c + i] = 1;
    }
    let pivots = reduce_in_place(field, r, width, c, &mut aug);

    let mut out = FMatrix::zeros(field, target.rows, r);
    let mut residual = vec![0u32; c];
    for t in 0..target.rows {
        residual.copy_from_slice(target.row(t));
        let drow = &mut out.entries[t * r..(t + 1) * r];
        for (k, &pc) in pivots.iter().enumerate() {
            let coef = residual[pc];
            if coef == 0 {
                continue;
            }
            let reduced = &aug[k * width..(k + 1) * width];
            for j in 0..c {
                residual[j] = field.sub(residual[j], field.mul(coef, reduced[j]));
            }
            for j in 0..r {
                drow[j] = field.add(drow[j], field.mul(coef, reduced[c + j]));
            }
        }
        if residual.iter().any(|&v| v != 0) {
            return Ok(None);
        }
    }
    Ok(Some(out))
}

/// JSON fixture form `{"p", "rows", "cols", "entries"}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct MatrixDoc {
    pub p: u64,
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<u64>,
}

impl From<&FMatrix> for MatrixDoc {
    fn from(m: &FMatrix) -> Self {
        MatrixDoc {
            p: m.field.p as u64,
            rows: m.rows,
            cols: m.cols,
            entries: m.entries.iter().map(|&v| v as u64).collect(),
        }
    }
}

impl TryFrom<MatrixDoc> for FMatrix {
    type Error = Error;

    fn try_from(doc: MatrixDoc) -> Result<Self> {
        let field = PrimeField::new(doc.p)?;
        FMatrix::from_entries(field, doc.rows, doc.cols, doc.entries)
    }
}

impl Serialize for FMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for FMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = MatrixDoc::deserialize(d)?;
        FMatrix::try_from(doc).map_err(serde::de::Error::custom)
    }
}
