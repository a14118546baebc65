//! Exact arithmetic over F_p: binomials via Lucas' theorem, the shifted Pascal
//! matrix `P^(η,u)` with entries `C(i + j - η_j, j)·u_j mod p`, its named
//! submatrices, the alternating vector `ξ_t` and the identities tying them
//! together.

use std::ops::Range;
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};

/// Largest dimension for which a full `dim x dim` matrix may be materialized.
pub const MAX_MATERIALIZED_DIM: usize = 1 << 12;

/// A prime modulus, checked at construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prime(u32);

impl Prime {
    pub fn new(p: u32) -> Result<Self> {
        if is_prime(p as u64) {
            Ok(Prime(p))
        } else {
            Err(Error::NotPrime(p as u64))
        }
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    /// `p^e`, or `None` on `u64` overflow.
    pub fn checked_pow(self, e: u32) -> Option<u64> {
        (self.0 as u64).checked_pow(e)
    }

    pub fn pow_big(self, e: u64) -> BigUint {
        let e = u32::try_from(e).expect("exponent exceeds u32");
        BigUint::from(self.0).pow(e)
    }

    #[inline]
    pub fn add(self, a: u32, b: u32) -> u32 {
        ((a as u64 + b as u64) % self.0 as u64) as u32
    }

    #[inline]
    pub fn sub(self, a: u32, b: u32) -> u32 {
        let p = self.0 as u64;
        ((a as u64 + p - b as u64 % p) % p) as u32
    }

    #[inline]
    pub fn mul(self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.0 as u64) as u32
    }

    #[inline]
    pub fn neg(self, a: u32) -> u32 {
        self.sub(0, a)
    }

    pub fn pow_mod(self, mut base: u32, mut e: u64) -> u32 {
        let mut acc = 1 % self.0;
        base %= self.0;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse of a nonzero residue (Fermat).
    pub fn inv(self, a: u32) -> u32 {
        debug_assert!(!a.is_multiple_of(self.0), "zero has no inverse");
        self.pow_mod(a, self.0 as u64 - 2)
    }

    pub fn reduce_i64(self, x: i64) -> u32 {
        x.rem_euclid(self.0 as i64) as u32
    }
}

impl std::fmt::Display for Prime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// `C(a, b) mod p` for single base-p digits `a, b < p`.
fn digit_binom(a: u64, b: u64, p: Prime) -> u32 {
    if b > a {
        return 0;
    }
    let b = b.min(a - b);
    let (mut num, mut den) = (1u32, 1u32);
    for i in 0..b {
        num = p.mul(num, ((a - i) % p.get() as u64) as u32);
        den = p.mul(den, ((i + 1) % p.get() as u64) as u32);
    }
    p.mul(num, p.inv(den))
}

/// `C(n, r) mod p` for machine-word arguments, digit by digit (Lucas).
pub fn binom_mod_u64(mut n: u64, mut r: u64, p: Prime) -> u32 {
    if r > n {
        return 0;
    }
    let q = p.get() as u64;
    let mut acc = 1 % p.get();
    while r > 0 {
        let (a, b) = (n % q, r % q);
        if b > a {
            return 0;
        }
        acc = p.mul(acc, digit_binom(a, b, p));
        n /= q;
        r /= q;
    }
    acc
}

/// `C(n, r) mod p` for arbitrary-precision arguments. `C(n, r) = 0` when `r > n`.
pub fn binom_mod(n: &BigUint, r: &BigUint, p: Prime) -> u32 {
    if r > n {
        return 0;
    }
    if let (Some(n), Some(r)) = (n.to_u64(), r.to_u64()) {
        return binom_mod_u64(n, r, p);
    }
    let n_digits = radix_digits(n, p);
    let r_digits = radix_digits(r, p);
    let mut acc = 1 % p.get();
    for (i, &b) in r_digits.iter().enumerate() {
        let a = n_digits.get(i).copied().unwrap_or(0);
        if b > a {
            return 0;
        }
        acc = p.mul(acc, digit_binom(a as u64, b as u64, p));
    }
    acc
}

/// Little-endian base-p digits of `n` (empty for zero).
pub fn radix_digits(n: &BigUint, p: Prime) -> Vec<u32> {
    if n.is_zero() {
        return Vec::new();
    }
    if p.get() <= 256 {
        return n.to_radix_le(p.get()).into_iter().map(u32::from).collect();
    }
    let base = BigUint::from(p.get());
    let mut rest = n.clone();
    let mut out = Vec::new();
    while !rest.is_zero() {
        let digit = (&rest % &base).to_u32().unwrap();
        out.push(digit);
        rest /= &base;
    }
    out
}

/// Column shifts `η_j`: start at zero, each step up by zero or one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShiftProfile(Vec<u64>);

impl ShiftProfile {
    pub fn new(eta: Vec<u64>) -> Result<Self> {
        if let Some(&first) = eta.first() {
            if first != 0 {
                return Err(Error::InvalidProfile(format!("eta_0 = {first}, expected 0")));
            }
        }
        for (j, pair) in eta.windows(2).enumerate() {
            if pair[1] < pair[0] || pair[1] > pair[0] + 1 {
                return Err(Error::InvalidProfile(format!(
                    "eta_{} - eta_{} = {} - {} is not 0 or 1",
                    j + 1,
                    j,
                    pair[1],
                    pair[0]
                )));
            }
        }
        Ok(ShiftProfile(eta))
    }

    pub fn zeros(len: usize) -> Self {
        ShiftProfile(vec![0; len])
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut eta = Vec::with_capacity(len);
        let mut cur = 0u64;
        for j in 0..len {
            if j > 0 && rng.gen_bool(0.5) {
                cur += 1;
            }
            eta.push(cur);
        }
        ShiftProfile(eta)
    }

    #[inline]
    pub fn get(&self, j: usize) -> u64 {
        self.0[j]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }
}

/// Column scalings `u_j`, all units mod p.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitProfile(Vec<u32>);

impl UnitProfile {
    pub fn new(u: Vec<u32>, p: Prime) -> Result<Self> {
        for (j, &x) in u.iter().enumerate() {
            if x >= p.get() {
                return Err(Error::InvalidProfile(format!("u_{j} = {x} is not reduced mod {p}")));
            }
            if x == 0 {
                return Err(Error::InvalidProfile(format!("u_{j} is 0 mod {p}")));
            }
        }
        Ok(UnitProfile(u))
    }

    pub fn ones(len: usize) -> Self {
        UnitProfile(vec![1; len])
    }

    pub fn random<R: Rng + ?Sized>(len: usize, p: Prime, rng: &mut R) -> Self {
        UnitProfile((0..len).map(|_| rng.gen_range(1..p.get())).collect())
    }

    #[inline]
    pub fn get(&self, j: usize) -> u32 {
        self.0[j]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&x| x == 1)
    }
}

/// Dense row-major matrix of residues.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<u32>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::LengthMismatch { expected: n_cols, actual: row.len() });
            }
            data.extend(row);
        }
        Ok(Matrix { rows: n_rows, cols: n_cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[u32]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    /// Number of entries equal to `value`.
    pub fn count_value(&self, value: u32) -> usize {
        self.data.iter().filter(|&&x| x == value).count()
    }

    /// `M · v` over F_p.
    pub fn mul_vec(&self, v: &[u32], p: Prime) -> Result<Vec<u32>> {
        if v.len() != self.cols {
            return Err(Error::LengthMismatch { expected: self.cols, actual: v.len() });
        }
        Ok(self.iter_rows().map(|row| dot(row, v, p)).collect())
    }

    /// `v · M` over F_p (row vector times matrix).
    pub fn left_mul_vec(&self, v: &[u32], p: Prime) -> Result<Vec<u32>> {
        if v.len() != self.rows {
            return Err(Error::LengthMismatch { expected: self.rows, actual: v.len() });
        }
        let q = p.get() as u64;
        let mut acc = vec![0u64; self.cols];
        for (row, &coef) in self.iter_rows().zip(v) {
            if coef == 0 {
                continue;
            }
            for (a, &x) in acc.iter_mut().zip(row) {
                *a = (*a + coef as u64 * x as u64) % q;
            }
        }
        Ok(acc.into_iter().map(|x| x as u32).collect())
    }
}

/// Dot product over F_p.
pub fn dot(a: &[u32], b: &[u32], p: Prime) -> u32 {
    let q = p.get() as u64;
    a.iter()
        .zip(b)
        .fold(0u64, |acc, (&x, &y)| (acc + x as u64 * y as u64) % q) as u32
}

/// Row-echelon reduction with first-nonzero pivoting; returns the rank.
fn eliminate(m: &mut Matrix, p: Prime, augmented_cols: usize) -> usize {
    let pivot_cols = m.cols - augmented_cols;
    let mut rank = 0;
    for col in 0..pivot_cols {
        let Some(pivot) = (rank..m.rows).find(|&r| m.get(r, col) != 0) else {
            continue;
        };
        if pivot != rank {
            for j in 0..m.cols {
                m.data.swap(pivot * m.cols + j, rank * m.cols + j);
            }
        }
        let inv = p.inv(m.get(rank, col));
        for j in col..m.cols {
            let v = p.mul(m.get(rank, j), inv);
            m.set(rank, j, v);
        }
        for r in 0..m.rows {
            if r == rank {
                continue;
            }
            let factor = m.get(r, col);
            if factor == 0 {
                continue;
            }
            for j in col..m.cols {
                let v = p.sub(m.get(r, j), p.mul(factor, m.get(rank, j)));
                m.set(r, j, v);
            }
        }
        rank += 1;
        if rank == m.rows {
            break;
        }
    }
    rank
}

pub fn rank(mat: &Matrix, p: Prime) -> usize {
    let mut work = mat.clone();
    eliminate(&mut work, p, 0)
}

/// True iff the square matrix has nonzero determinant mod p.
pub fn is_regular(mat: &Matrix, p: Prime) -> Result<bool> {
    if !mat.is_square() {
        return Err(Error::NonSquare { rows: mat.rows, cols: mat.cols });
    }
    Ok(rank(mat, p) == mat.rows)
}

/// Unique solution of `mat · x = rhs` over F_p, or `None` if `mat` is singular.
pub fn solve(mat: &Matrix, rhs: &[u32], p: Prime) -> Result<Option<Vec<u32>>> {
    if !mat.is_square() {
        return Err(Error::NonSquare { rows: mat.rows, cols: mat.cols });
    }
    if rhs.len() != mat.rows {
        return Err(Error::LengthMismatch { expected: mat.rows, actual: rhs.len() });
    }
    let n = mat.rows;
    let mut aug = Matrix::zeros(n, n + 1);
    for i in 0..n {
        for j in 0..n {
            aug.set(i, j, mat.get(i, j) % p.get());
        }
        aug.set(i, n, rhs[i] % p.get());
    }
    if eliminate(&mut aug, p, 1) < n {
        return Ok(None);
    }
    Ok(Some((0..n).map(|i| aug.get(i, n)).collect()))
}

/// `ξ_t = ((-1)^{t+1} C(t,0), (-1)^{t+2} C(t,1), …, (-1)^{2t} C(t,t-1)) mod p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XiVector {
    t: usize,
    entries: Vec<u32>,
}

impl XiVector {
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn dot(&self, v: &[u32], p: Prime) -> Result<u32> {
        if v.len() != self.t {
            return Err(Error::LengthMismatch { expected: self.t, actual: v.len() });
        }
        Ok(dot(&self.entries, v, p))
    }

    /// `ξ_t · M` for a matrix with `t` rows.
    pub fn apply(&self, mat: &Matrix, p: Prime) -> Result<Vec<u32>> {
        mat.left_mul_vec(&self.entries, p)
    }
}

pub fn xi(t: usize, p: Prime) -> Result<XiVector> {
    if t == 0 {
        return Err(Error::InvalidArgument("xi requires t >= 1".into()));
    }
    let entries = (0..t)
        .map(|i| {
            let c = binom_mod_u64(t as u64, i as u64, p);
            if (t + 1 + i).is_multiple_of(2) {
                c
            } else {
                p.neg(c)
            }
        })
        .collect();
    Ok(XiVector { t, entries })
}

/// Lazily evaluated `P^(η,u)` with entries `C(i + j - η_j, j)·u_j mod p`.
///
/// Rows are cached on first use; the cache is safe to share across threads.
pub struct PascalView {
    p: Prime,
    eta: ShiftProfile,
    u: UnitProfile,
    rows: Vec<OnceLock<Box<[u32]>>>,
}

impl Clone for PascalView {
    fn clone(&self) -> Self {
        PascalView::from_parts(self.p, self.eta.clone(), self.u.clone())
    }
}

impl std::fmt::Debug for PascalView {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PascalView")
            .field("p", &self.p)
            .field("dim", &self.dim())
            .field("eta", &self.eta)
            .field("u", &self.u)
            .finish()
    }
}

impl PartialEq for PascalView {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.eta == other.eta && self.u == other.u
    }
}

impl Eq for PascalView {}

impl PascalView {
    pub fn new(p: Prime, eta: ShiftProfile, u: UnitProfile) -> Result<Self> {
        if eta.len() != u.len() {
            return Err(Error::LengthMismatch { expected: eta.len(), actual: u.len() });
        }
        if let Some((j, &x)) = u.as_slice().iter().enumerate().find(|(_, &x)| x == 0 || x >= p.get()) {
            return Err(Error::InvalidProfile(format!("u_{j} = {x} is not a unit mod {p}")));
        }
        Ok(Self::from_parts(p, eta, u))
    }

    fn from_parts(p: Prime, eta: ShiftProfile, u: UnitProfile) -> Self {
        let dim = eta.len();
        PascalView { p, eta, u, rows: (0..dim).map(|_| OnceLock::new()).collect() }
    }

    /// The unshifted, unscaled matrix `C(i + j, j) mod p`.
    pub fn levin(p: Prime, dim: usize) -> Self {
        Self::from_parts(p, ShiftProfile::zeros(dim), UnitProfile::ones(dim))
    }

    pub fn prime(&self) -> Prime {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.eta.len()
    }

    pub fn eta(&self) -> &ShiftProfile {
        &self.eta
    }

    pub fn u(&self) -> &UnitProfile {
        &self.u
    }

    #[inline]
    fn raw_entry(&self, i: usize, j: usize) -> u32 {
        let top = i as u64 + j as u64 - self.eta.get(j);
        self.p.mul(binom_mod_u64(top, j as u64, self.p), self.u.get(j))
    }

    pub fn entry(&self, i: usize, j: usize) -> Result<u32> {
        let dim = self.dim();
        if i >= dim || j >= dim {
            return Err(Error::IndexOutOfRange { row: i, col: j, dim });
        }
        Ok(self.raw_entry(i, j))
    }

    /// Row `i`, computed once and cached.
    pub fn row(&self, i: usize) -> Result<&[u32]> {
        let dim = self.dim();
        if i >= dim {
            return Err(Error::IndexOutOfRange { row: i, col: 0, dim });
        }
        Ok(self.rows[i].get_or_init(|| (0..dim).map(|j| self.raw_entry(i, j)).collect()))
    }

    /// Entries of column `j` (not cached).
    pub fn column(&self, j: usize) -> Result<Vec<u32>> {
        let dim = self.dim();
        if j >= dim {
            return Err(Error::IndexOutOfRange { row: 0, col: j, dim });
        }
        Ok((0..dim).map(|i| self.raw_entry(i, j)).collect())
    }

    /// The full matrix; only allowed up to [`MAX_MATERIALIZED_DIM`].
    pub fn materialize(&self) -> Result<Matrix> {
        let dim = self.dim();
        if dim > MAX_MATERIALIZED_DIM {
            return Err(Error::BudgetExceeded {
                needed: format!("{dim}x{dim} matrix"),
                budget: format!("{MAX_MATERIALIZED_DIM}x{MAX_MATERIALIZED_DIM}"),
            });
        }
        self.window(0..dim, 0..dim)
    }

    pub fn window(&self, rows: Range<usize>, cols: Range<usize>) -> Result<Matrix> {
        let dim = self.dim();
        if rows.start > rows.end || cols.start > cols.end || rows.end > dim || cols.end > dim {
            return Err(Error::WindowOutOfRange {
                rows: (rows.start, rows.end),
                cols: (cols.start, cols.end),
                dim,
            });
        }
        let mut out = Matrix::zeros(rows.len(), cols.len());
        for (r, i) in rows.enumerate() {
            let row = self.row(i)?;
            for (c, j) in cols.clone().enumerate() {
                out.set(r, c, row[j]);
            }
        }
        Ok(out)
    }

    fn check_ab(&self, k: usize, t: usize) -> Result<()> {
        if t == 0 || k + t > self.dim() {
            return Err(Error::WindowOutOfRange { rows: (k, k + t), cols: (0, t), dim: self.dim() });
        }
        Ok(())
    }

    fn check_cd(&self, k: usize, t: usize) -> Result<()> {
        if t == 0 || k + t >= self.dim() {
            return Err(Error::WindowOutOfRange {
                rows: (k + t, k + t + 1),
                cols: (0, t),
                dim: self.dim(),
            });
        }
        Ok(())
    }

    /// `A_{k,t}`: rows `k..k+t`, columns `0..t`.
    pub fn submatrix_a(&self, k: usize, t: usize) -> Result<Matrix> {
        self.check_ab(k, t)?;
        self.window(k..k + t, 0..t)
    }

    /// `B_{k,t}`: rows `k..k+t`, columns `t..dim`.
    pub fn submatrix_b(&self, k: usize, t: usize) -> Result<Matrix> {
        self.check_ab(k, t)?;
        self.window(k..k + t, t..self.dim())
    }

    /// `c_{k+t,t}`: row `k+t`, columns `0..t`.
    pub fn row_c(&self, k: usize, t: usize) -> Result<Vec<u32>> {
        self.check_cd(k, t)?;
        Ok(self.row(k + t)?[..t].to_vec())
    }

    /// `d_{k+t,t}`: row `k+t`, columns `t..dim`.
    pub fn row_d(&self, k: usize, t: usize) -> Result<Vec<u32>> {
        self.check_cd(k, t)?;
        Ok(self.row(k + t)?[t..].to_vec())
    }

    /// Row `row` of the tail matrix built from `(η_t, η_{t+1}, …)` and
    /// `(u_t, u_{t+1}, …)`: entries `C(row + j - η_{t+j}, j)·u_{t+j}` for
    /// `j in 0..dim-t`. The tail profile need not start at zero, so it is not
    /// itself a valid [`ShiftProfile`].
    pub fn tail_row(&self, row: usize, t: usize) -> Result<Vec<u32>> {
        let dim = self.dim();
        // row >= t keeps row + j - η_{t+j} non-negative
        if t > dim || row >= dim || row < t {
            return Err(Error::WindowOutOfRange { rows: (row, row + 1), cols: (t, dim), dim });
        }
        Ok((0..dim - t)
            .map(|j| {
                let top = row as u64 + j as u64 - self.eta.get(t + j);
                self.p.mul(binom_mod_u64(top, j as u64, self.p), self.u.get(t + j))
            })
            .collect())
    }

    /// `ξ_t · A_{k,t}`, which must equal [`Self::row_c`].
    pub fn predict_c_row(&self, k: usize, t: usize) -> Result<Vec<u32>> {
        self.check_cd(k, t)?;
        xi(t, self.p)?.apply(&self.submatrix_a(k, t)?, self.p)
    }

    /// `ξ_t · B_{k,t} + c^{(η^(t),u^(t))}_{k+t,dim-t}`, which must equal [`Self::row_d`].
    pub fn predict_d_row(&self, k: usize, t: usize) -> Result<Vec<u32>> {
        self.check_cd(k, t)?;
        let xb = xi(t, self.p)?.apply(&self.submatrix_b(k, t)?, self.p)?;
        let tail = self.tail_row(k + t, t)?;
        Ok(xb.iter().zip(&tail).map(|(&a, &b)| self.p.add(a, b)).collect())
    }
}

/// `Σ_{j=1}^{u} C(i + j, j) mod p`, summed term by term.
pub fn hockey_stick_sum(i: u64, u: u64, p: Prime) -> u32 {
    (1..=u).fold(0, |acc, j| p.add(acc, binom_mod_u64(i + j, j, p)))
}

/// `Σ_{j=1}^{u} C(i + j, j) ≡ C(i + 1 + u, u) - 1 (mod p)`, closed form.
pub fn hockey_stick(i: u64, u: u64, p: Prime) -> u32 {
    p.sub(binom_mod_u64(i + 1 + u, u, p), 1)
}

/// `Σ_{i=max(η_j-k,0)}^{upper} (-1)^{t+i+1} C(t,i) C(k+j+i-η_j, j) mod p`, the
/// alternating sum behind the `ξ_t` row identities. Requires `η_j <= j`.
pub fn xi_weighted_sum(t: u64, k: u64, j: u64, eta_j: u64, upper: u64, p: Prime) -> u32 {
    let start = eta_j.saturating_sub(k);
    let mut acc = 0u32;
    for i in start..=upper {
        let term = p.mul(binom_mod_u64(t, i, p), binom_mod_u64(k + j + i - eta_j, j, p));
        acc = if (t + i + 1).is_multiple_of(2) { p.add(acc, term) } else { p.sub(acc, term) };
    }
    acc
}

/// `C(n, r) mod p` with `C(n, r) = 0` for negative `r`.
pub fn binom_mod_signed(n: u64, r: i64, p: Prime) -> u32 {
    if r < 0 {
        0
    } else {
        binom_mod_u64(n, r as u64, p)
    }
}

/// The matrix `D_m` of residues `C(i + 1 + j, j) - 1 mod p` over a row and
/// column window.
#[derive(Clone, Debug)]
pub struct DmMatrix {
    pub p: Prime,
    pub row_start: u64,
    pub col_start: u64,
    pub matrix: Matrix,
}

impl DmMatrix {
    /// Count of entries equal to `p - 1`, i.e. of vanishing binomials.
    pub fn count_top(&self) -> usize {
        self.matrix.count_value(self.p.get() - 1)
    }

    /// Per-column counts of `p - 1` entries.
    pub fn column_top_counts(&self) -> Vec<usize> {
        let top = self.p.get() - 1;
        (0..self.matrix.cols())
            .map(|j| (0..self.matrix.rows()).filter(|&i| self.matrix.get(i, j) == top).count())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.matrix.rows() * self.matrix.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Row window of `D_m`: `[p^{m-3} - p(p^3-1)p^{m-7}, p^{m-3})`; columns `[0, p^{m-7})`.
pub fn dm_window(m: u32, p: Prime) -> Result<(Range<u64>, Range<u64>)> {
    if m <= 7 {
        return Err(Error::RegimeViolation(format!("D_m is defined for m > 7, got m = {m}")));
    }
    let q = p.get() as u64;
    let pw = |e: u32| {
        q.checked_pow(e)
            .ok_or_else(|| Error::BudgetExceeded { needed: format!("{p}^{e}"), budget: "u64".into() })
    };
    let top = pw(m - 3)?;
    let height = q * (q * q * q - 1) * pw(m - 7)?;
    Ok((top - height..top, 0..pw(m - 7)?))
}

/// `D_m` in the regime `m > 7`.
pub fn dm_matrix(m: u32, p: Prime) -> Result<DmMatrix> {
    let (rows, cols) = dm_window(m, p)?;
    dm_matrix_window(p, rows, cols)
}

/// `C(i + 1 + j, j) - 1 mod p` over an explicit window, for probing below `m = 8`.
pub fn dm_matrix_window(p: Prime, rows: Range<u64>, cols: Range<u64>) -> Result<DmMatrix> {
    let n = (rows.end - rows.start) as u128 * (cols.end - cols.start) as u128;
    if n > 1 << 28 {
        return Err(Error::BudgetExceeded { needed: format!("{n} entries"), budget: format!("{}", 1u64 << 28) });
    }
    let mut matrix = Matrix::zeros((rows.end - rows.start) as usize, (cols.end - cols.start) as usize);
    for (r, i) in rows.clone().enumerate() {
        for (c, j) in cols.clone().enumerate() {
            matrix.set(r, c, p.sub(binom_mod_u64(i + 1 + j, j, p), 1));
        }
    }
    Ok(DmMatrix { p, row_start: rows.start, col_start: cols.start, matrix })
}

/// Number of nonzero residues `C(j, i) mod p` for `0 <= i, j < p^r`.
pub fn pascal_nonzero_count(r: u32, p: Prime) -> Result<u64> {
    let side = p
        .checked_pow(r)
        .filter(|&s| s <= 1 << 14)
        .ok_or_else(|| Error::BudgetExceeded { needed: format!("{p}^{r} square"), budget: "2^14 side".into() })?;
    Ok((0..side)
        .map(|j| (0..side).filter(|&i| binom_mod_u64(j, i, p) != 0).count() as u64)
        .sum())
}
