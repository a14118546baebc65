//! Affine necklace blocks `A_m` over F_p and the digit stream obtained by
//! concatenating `A_1 A_2 A_3 …`.
//!
//! Block `A_m` lists the columns `d(n) = P^(η,u)·e(n) + z` for
//! `n = 0, 1, …, p^{p^m} - 1` one after another (column-major: all rows `k`
//! for a fixed `n`, then the next `n`). `e(n)` holds the base-p digits of `n`,
//! least significant first. Swapping this order for row-major silently breaks
//! every normality and discrepancy property downstream.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ffmat::{radix_digits, solve, PascalView, Prime, ShiftProfile, UnitProfile};
use crate::necklace::Word;

/// Largest `p^m` accepted for a single level.
pub const MAX_LEVEL_DIM: usize = 1 << 22;

/// Parameters `(z, η, u)` of one affine block `A_m`.
pub struct AffineParams {
    m: u32,
    z: Vec<u8>,
    view: PascalView,
    columns: Vec<OnceLock<Box<[u8]>>>,
}

impl Clone for AffineParams {
    fn clone(&self) -> Self {
        AffineParams::from_parts(self.m, self.z.clone(), self.view.clone())
    }
}

impl fmt::Debug for AffineParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AffineParams")
            .field("m", &self.m)
            .field("z", &self.z)
            .field("view", &self.view)
            .finish()
    }
}

impl PartialEq for AffineParams {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.z == other.z && self.view == other.view
    }
}

impl Eq for AffineParams {}

fn level_dim(m: u32, p: Prime) -> Result<usize> {
    if m == 0 {
        return Err(Error::InvalidArgument("level m must be at least 1".into()));
    }
    if p.get() > 255 {
        return Err(Error::InvalidArgument(format!("prime {p} does not fit a byte digit")));
    }
    p.checked_pow(m)
        .map(|d| d as usize)
        .filter(|&d| d <= MAX_LEVEL_DIM)
        .ok_or_else(|| Error::BudgetExceeded {
            needed: format!("{p}^{m} rows"),
            budget: MAX_LEVEL_DIM.to_string(),
        })
}

impl AffineParams {
    pub fn new(m: u32, z: Vec<u8>, eta: ShiftProfile, u: UnitProfile, p: Prime) -> Result<Self> {
        let dim = level_dim(m, p)?;
        for (name, len) in [("z", z.len()), ("eta", eta.len()), ("u", u.len())] {
            if len != dim {
                return Err(Error::InvalidProfile(format!("{name} has length {len}, expected {dim}")));
            }
        }
        if let Some((k, &zk)) = z.iter().enumerate().find(|(_, &zk)| zk as u32 >= p.get()) {
            return Err(Error::InvalidProfile(format!("z_{k} = {zk} is not reduced mod {p}")));
        }
        let view = PascalView::new(p, eta, u)?;
        Ok(Self::from_parts(m, z, view))
    }

    fn from_parts(m: u32, z: Vec<u8>, view: PascalView) -> Self {
        let columns = (0..view.dim()).map(|_| OnceLock::new()).collect();
        AffineParams { m, z, view, columns }
    }

    /// Levin's choice: `z = 0`, `η = 0`, `u = 1`.
    pub fn levin(m: u32, p: Prime) -> Result<Self> {
        let dim = level_dim(m, p)?;
        Ok(Self::from_parts(m, vec![0; dim], PascalView::levin(p, dim)))
    }

    /// Uniformly random `z` and `u`, and a random staircase `η`.
    pub fn random<R: Rng + ?Sized>(m: u32, p: Prime, rng: &mut R) -> Result<Self> {
        let dim = level_dim(m, p)?;
        let eta = ShiftProfile::random(dim, rng);
        let u = UnitProfile::random(dim, p, rng);
        let z = (0..dim).map(|_| rng.gen_range(0..p.get()) as u8).collect();
        AffineParams::new(m, z, eta, u, p)
    }

    /// Same matrix, different offset vector.
    pub fn with_z(&self, z: Vec<u8>) -> Result<Self> {
        AffineParams::new(self.m, z, self.view.eta().clone(), self.view.u().clone(), self.prime())
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn prime(&self) -> Prime {
        self.view.prime()
    }

    /// `p^m`, the number of rows of a block and the length of each column.
    pub fn dim(&self) -> usize {
        self.view.dim()
    }

    pub fn z(&self) -> &[u8] {
        &self.z
    }

    pub fn view(&self) -> &PascalView {
        &self.view
    }

    pub fn is_levin(&self) -> bool {
        self.z.iter().all(|&x| x == 0) && self.view.eta().is_zero() && self.view.u().is_one()
    }

    /// Column `j` of `P^(η,u)` as bytes, cached.
    fn column(&self, j: usize) -> &[u8] {
        self.columns[j].get_or_init(|| {
            self.view
                .column(j)
                .expect("column index below dim")
                .into_iter()
                .map(|x| x as u8)
                .collect()
        })
    }

    /// Number of columns `p^{p^m}`.
    pub fn column_count(&self) -> BigUint {
        self.prime().pow_big(self.dim() as u64)
    }

    /// Digits `p^m · p^{p^m}` of the block.
    pub fn block_len(&self) -> BigUint {
        self.column_count() * BigUint::from(self.dim())
    }

    fn check_n(&self, n: &BigUint) -> Result<Vec<u32>> {
        let e = radix_digits(n, self.prime());
        if e.len() > self.dim() {
            return Err(Error::InvalidArgument(format!(
                "column index {n} is not below {}^{}",
                self.prime(),
                self.dim()
            )));
        }
        Ok(e)
    }

    /// `d_k(n) = Σ_j P_{k,j} e_j(n) + z_k mod p`.
    pub fn digit(&self, k: usize, n: &BigUint) -> Result<u8> {
        let dim = self.dim();
        if k >= dim {
            return Err(Error::IndexOutOfRange { row: k, col: 0, dim });
        }
        let p = self.prime();
        let e = self.check_n(n)?;
        let mut acc = self.z[k] as u32;
        for (j, &ej) in e.iter().enumerate() {
            if ej != 0 {
                acc = p.add(acc, p.mul(self.view.entry(k, j)?, ej));
            }
        }
        Ok(acc as u8)
    }

    /// The whole column `d(n)`.
    pub fn column_digits(&self, n: &BigUint) -> Result<Vec<u8>> {
        let e = self.check_n(n)?;
        let mut d = self.z.clone();
        for (j, &ej) in e.iter().enumerate() {
            for _ in 0..ej {
                add_column(&mut d, self.column(j), self.prime());
            }
        }
        Ok(d)
    }

    /// Solves `P z' = z`, so that `d_k(n) = Σ_j P_{k,j} (e_j(n) + z'_j)`.
    pub fn z_prime(&self) -> Result<Vec<u8>> {
        let mat = self.view.materialize()?;
        let rhs: Vec<u32> = self.z.iter().map(|&x| x as u32).collect();
        let sol = solve(&mat, &rhs, self.prime())?
            .ok_or_else(|| Error::InvalidArgument("matrix is singular".into()))?;
        Ok(sol.into_iter().map(|x| x as u8).collect())
    }

    /// `d_k(n)` evaluated through a precomputed `z'` (see [`Self::z_prime`]).
    pub fn digit_via_z_prime(&self, k: usize, n: &BigUint, z_prime: &[u8]) -> Result<u8> {
        let dim = self.dim();
        if k >= dim {
            return Err(Error::IndexOutOfRange { row: k, col: 0, dim });
        }
        if z_prime.len() != dim {
            return Err(Error::LengthMismatch { expected: dim, actual: z_prime.len() });
        }
        let p = self.prime();
        let e = self.check_n(n)?;
        let row = self.view.row(k)?;
        let mut acc = 0u32;
        for (j, &zj) in z_prime.iter().enumerate() {
            let ej = e.get(j).copied().unwrap_or(0);
            acc = p.add(acc, p.mul(row[j], p.add(ej, zj as u32)));
        }
        Ok(acc as u8)
    }
}

fn add_column(d: &mut [u8], col: &[u8], p: Prime) {
    let p = p.get() as u16;
    for (x, &c) in d.iter_mut().zip(col) {
        *x = ((*x as u16 + c as u16) % p) as u8;
    }
}

/// Location of a digit inside a block: level `m`, column `n`, row `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockIndex {
    pub m: u32,
    pub n: BigUint,
    pub k: usize,
}

/// `n_m = Σ_{j=1}^{m-1} p^j · p^{p^j}`, the number of digits before `A_m`.
pub fn n_offset(m: u32, p: Prime) -> Result<BigUint> {
    if m == 0 {
        return Err(Error::InvalidArgument("level m must be at least 1".into()));
    }
    let mut total = BigUint::zero();
    for j in 1..m {
        let pj = p
            .checked_pow(j)
            .ok_or_else(|| Error::BudgetExceeded { needed: format!("{p}^{j}"), budget: "u64".into() })?;
        total += BigUint::from(pj) * p.pow_big(pj);
    }
    Ok(total)
}

/// Levin parameters for level `m`.
pub fn levin_params(m: u32, p: Prime) -> Result<AffineParams> {
    AffineParams::levin(m, p)
}

/// Walks the columns `d(n), d(n+1), …` of one block, updating the current
/// column incrementally: moving from `n` to `n+1` adds column `j` of `P` once
/// for every base-p digit position `j` the increment touches (each carry
/// position rolls over from `p-1` to `0`, which also adds one copy of `P e_j`).
pub struct ColumnCursor {
    params: Arc<AffineParams>,
    e: Vec<u32>,
    d: Vec<u8>,
    done: bool,
}

impl ColumnCursor {
    pub fn new(params: Arc<AffineParams>, n: &BigUint) -> Result<Self> {
        let mut e = params.check_n(n)?;
        e.resize(params.dim(), 0);
        let d = params.column_digits(n)?;
        Ok(ColumnCursor { params, e, d, done: false })
    }

    /// The current column, or `None` once the block is exhausted.
    pub fn current(&self) -> Option<&[u8]> {
        (!self.done).then_some(self.d.as_slice())
    }

    pub fn advance(&mut self) {
        if self.done {
            return;
        }
        let p = self.params.prime();
        let top = p.get() - 1;
        for j in 0..self.e.len() {
            add_column(&mut self.d, self.params.column(j), p);
            if self.e[j] == top {
                self.e[j] = 0;
            } else {
                self.e[j] += 1;
                return;
            }
        }
        self.done = true;
    }
}

/// Materializes block `A_m`. Fails when its length exceeds `budget` digits.
pub fn block(params: &AffineParams, budget: u64) -> Result<Word> {
    let len = params.block_len();
    let len = len
        .to_u64()
        .filter(|&l| l <= budget)
        .ok_or_else(|| Error::BudgetExceeded { needed: format!("{len} digits"), budget: budget.to_string() })?
        as usize;
    let dim = params.dim();
    let columns = len / dim;
    let params = Arc::new(params.clone());
    let mut digits = vec![0u8; len];
    const CHUNK_COLUMNS: usize = 1 << 12;
    digits
        .par_chunks_mut(CHUNK_COLUMNS * dim)
        .enumerate()
        .try_for_each(|(chunk, out)| -> Result<()> {
            let start = chunk * CHUNK_COLUMNS;
            let mut cursor = ColumnCursor::new(params.clone(), &BigUint::from(start))?;
            for slot in out.chunks_mut(dim) {
                slot.copy_from_slice(cursor.current().expect("block has this many columns"));
                cursor.advance();
            }
            Ok(())
        })?;
    debug_assert_eq!(columns * dim, digits.len());
    Word::new(params.prime().get() as u16, digits)
}

type ParamSource = dyn Fn(u32) -> Result<AffineParams> + Send + Sync;

/// The digits of `α = 0.A_1 A_2 A_3 …`, with per-level parameters supplied by
/// a callback and materialized lazily.
pub struct DigitStream {
    p: Prime,
    max_level: u32,
    source: Box<ParamSource>,
    levels: Vec<OnceLock<Arc<AffineParams>>>,
    offsets: Vec<BigUint>,
}

impl fmt::Debug for DigitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DigitStream").field("p", &self.p).field("max_level", &self.max_level).finish()
    }
}

impl DigitStream {
    /// `source(m)` must return parameters of level `m` for prime `p`.
    pub fn with_source<F>(p: Prime, max_level: u32, source: F) -> Result<Self>
    where
        F: Fn(u32) -> Result<AffineParams> + Send + Sync + 'static,
    {
        if max_level == 0 {
            return Err(Error::InvalidArgument("max_level must be at least 1".into()));
        }
        // offsets n_1 ..= n_{max_level + 1}
        let mut offsets = vec![BigUint::zero()];
        for m in 1..=max_level {
            let pm = p
                .checked_pow(m)
                .ok_or_else(|| Error::BudgetExceeded { needed: format!("{p}^{m}"), budget: "u64".into() })?;
            let next = offsets.last().unwrap() + BigUint::from(pm) * p.pow_big(pm);
            offsets.push(next);
        }
        let levels = (0..max_level).map(|_| OnceLock::new()).collect();
        Ok(DigitStream { p, max_level, source: Box::new(source), levels, offsets })
    }

    pub fn levin(p: Prime, max_level: u32) -> Result<Self> {
        Self::with_source(p, max_level, move |m| AffineParams::levin(m, p))
    }

    /// Independent random parameters per level, reproducible from `seed`.
    pub fn random(p: Prime, max_level: u32, seed: u64) -> Result<Self> {
        Self::with_source(p, max_level, move |m| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(m as u64);
            AffineParams::random(m, p, &mut rng)
        })
    }

    pub fn prime(&self) -> Prime {
        self.p
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// `n_m` for `1 <= m <= max_level + 1`.
    pub fn offset(&self, m: u32) -> Option<&BigUint> {
        self.offsets.get((m as usize).checked_sub(1)?)
    }

    /// Total number of digits up to the end of `A_{max_level}`.
    pub fn len(&self) -> &BigUint {
        self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn params(&self, m: u32) -> Result<Arc<AffineParams>> {
        if m == 0 || m > self.max_level {
            return Err(Error::LevelBudgetExceeded { level: m, max_level: self.max_level });
        }
        let slot = &self.levels[m as usize - 1];
        if let Some(p) = slot.get() {
            return Ok(p.clone());
        }
        let params = (self.source)(m)?;
        if params.m() != m || params.prime() != self.p {
            return Err(Error::InvalidArgument(format!(
                "parameter source returned level {} over {} for level {m} over {}",
                params.m(),
                params.prime(),
                self.p
            )));
        }
        Ok(slot.get_or_init(|| Arc::new(params)).clone())
    }

    /// Level, column and row of absolute (0-indexed) digit position `i`.
    pub fn locate(&self, i: &BigUint) -> Result<BlockIndex> {
        // offsets[m] = n_{m+1}
        let m = self.offsets.partition_point(|o| o <= i) as u32;
        if m > self.max_level {
            return Err(Error::LevelBudgetExceeded { level: self.level_beyond(i), max_level: self.max_level });
        }
        let local = i - &self.offsets[m as usize - 1];
        let dim = BigUint::from(self.p.checked_pow(m).unwrap());
        let n = &local / &dim;
        let k = (&local % &dim).to_usize().unwrap();
        Ok(BlockIndex { m, n, k })
    }

    /// Level containing position `i`, for `i` past the last allowed level.
    fn level_beyond(&self, i: &BigUint) -> u32 {
        let mut level = self.max_level + 1;
        let mut end = self.len().clone();
        loop {
            let Some(pm) = self.p.checked_pow(level) else { return level };
            // once p^{p^m} has more bits than i, block m surely reaches past it
            if pm > i.bits() {
                return level;
            }
            end += BigUint::from(pm) * self.p.pow_big(pm);
            if &end > i {
                return level;
            }
            level += 1;
        }
    }

    /// Digit at absolute 0-indexed position `i` (`α_1` is position 0).
    pub fn digit(&self, i: &BigUint) -> Result<u8> {
        let idx = self.locate(i)?;
        self.params(idx.m)?.digit(idx.k, &idx.n)
    }

    /// Sequential digits from position `start`.
    pub fn iter_from(&self, start: &BigUint) -> Result<StreamIter<'_>> {
        let idx = self.locate(start)?;
        let params = self.params(idx.m)?;
        let cursor = ColumnCursor::new(params, &idx.n)?;
        Ok(StreamIter { stream: self, m: idx.m, k: idx.k, cursor: Some(cursor), error: None })
    }

    /// `len` digits from position `start`, crossing level boundaries.
    pub fn slice(&self, start: &BigUint, len: usize) -> Result<Word> {
        let mut it = self.iter_from(start)?;
        let digits: Vec<u8> = it.by_ref().take(len).collect();
        if let Some(e) = it.error.take() {
            return Err(e);
        }
        if digits.len() < len {
            return Err(Error::LevelBudgetExceeded { level: self.max_level + 1, max_level: self.max_level });
        }
        Word::new(self.p.get() as u16, digits)
    }

    /// Dump format: a `p=<p> start=<i> len=<len>` line, then the word text.
    pub fn dump(&self, start: &BigUint, len: usize) -> Result<String> {
        let w = self.slice(start, len)?;
        Ok(format!("p={} start={start} len={len}\n{}", self.p, w.to_text()))
    }
}

/// Sequential digit iterator over a [`DigitStream`]. Stops at the end of the
/// last allowed level; [`StreamIter::error`] records why it stopped early.
pub struct StreamIter<'a> {
    stream: &'a DigitStream,
    m: u32,
    k: usize,
    cursor: Option<ColumnCursor>,
    error: Option<Error>,
}

impl StreamIter<'_> {
    /// The level the next digit comes from.
    pub fn level(&self) -> u32 {
        self.m
    }

    pub fn error(&self) -> Option<&Error> {
        self.error.as_ref()
    }
}

impl Iterator for StreamIter<'_> {
    type Item = u8;

    fn next(&mut self) -> Option<u8> {
        loop {
            let cursor = self.cursor.as_mut()?;
            if let Some(col) = cursor.current() {
                let digit = col[self.k];
                self.k += 1;
                if self.k == col.len() {
                    self.k = 0;
                    cursor.advance();
                }
                return Some(digit);
            }
            self.cursor = None;
            if self.m == self.stream.max_level {
                self.error = Some(Error::LevelBudgetExceeded {
                    level: self.m + 1,
                    max_level: self.stream.max_level,
                });
                return None;
            }
            self.m += 1;
            let next = self
                .stream
                .params(self.m)
                .and_then(|params| ColumnCursor::new(params, &BigUint::zero()));
            match next {
                Ok(c) => self.cursor = Some(c),
                Err(e) => {
                    self.error = Some(e);
                    return None;
                }
            }
        }
    }
}

/// Parses the header line of a digit dump.
pub fn parse_dump_header(line: &str) -> Result<(u32, BigUint, usize)> {
    let mut p = None;
    let mut start = None;
    let mut len = None;
    for field in line.split_whitespace() {
        let (key, value) =
            field.split_once('=').ok_or_else(|| Error::Parse(format!("bad header field {field:?}")))?;
        let bad = |e: String| Error::Parse(format!("{key}: {e}"));
        match key {
            "p" => p = Some(value.parse::<u32>().map_err(|e| bad(e.to_string()))?),
            "start" => start = Some(value.parse::<BigUint>().map_err(|e| bad(e.to_string()))?),
            "len" => len = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            _ => return Err(Error::Parse(format!("unknown header field {key:?}"))),
        }
    }
    match (p, start, len) {
        (Some(p), Some(s), Some(l)) => Ok((p, s, l)),
        _ => Err(Error::Parse(format!("incomplete header {line:?}"))),
    }
}

impl BlockIndex {
    /// Absolute position of this digit in the stream.
    pub fn position(&self, p: Prime) -> Result<BigUint> {
        let dim = BigUint::from(
            p.checked_pow(self.m)
                .ok_or_else(|| Error::BudgetExceeded { needed: format!("{p}^{}", self.m), budget: "u64".into() })?,
        );
        Ok(n_offset(self.m, p)? + &self.n * dim + BigUint::from(self.k))
    }
}
