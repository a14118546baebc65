//! The interval construction behind the `(log N)²` lower bound for Levin's
//! number, made executable at sizes where every block can be enumerated.
//!
//! A plan fixes levels `w_0 > w_1 > … > w_M`, all `≡ p-1 (mod p)`, and splits
//! the columns `n` of block `A_m` into runs `B_l ≤ n < B_l + p^{w_l}` with
//! `B_l = Σ_{i<l} p^{w_i}`. For each run the points
//! `x_{n,k} = {p^{n_m + p^m n + k} α}` are examined at resolution `p^{-w_l}`:
//! for a target cell `[U/p^{w_l}, (U+1)/p^{w_l})` and each row `k` with
//! `k + w_l < p^m` exactly one `n` lands in the cell, and the next digit `γ`
//! (which of the `p` sub-cells it hits) is an explicit affine function of the
//! digits of `U`. The chain `J_M, …, J_0` of adjacent intervals collects the
//! most popular sub-cells and so contains more points than its length allows.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::construct::{n_offset, AffineParams, ColumnCursor, DigitStream};
use crate::discrepancy::extract_points;
use crate::error::{Error, Result};
use crate::ffmat::{dm_matrix, dot, hockey_stick, solve, xi, PascalView, Prime};

use std::sync::Arc;

/// Levels, run offsets and the target count `N = n_m + p^m Σ p^{w_l}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LowerBoundPlan {
    p: Prime,
    m: u32,
    dim: usize,
    w: Vec<usize>,
    offsets: Vec<BigUint>,
    n_m: BigUint,
    n_total: BigUint,
    paper_schedule: bool,
}

fn pow_u64(p: Prime, e: u32) -> Result<u64> {
    p.checked_pow(e)
        .ok_or_else(|| Error::BudgetExceeded { needed: format!("{p}^{e}"), budget: "u64".into() })
}

/// Largest `p^m` a plan may use.
pub const MAX_PLAN_DIM: u64 = 1 << 22;

/// The schedule `w_l = p^{m-3} - 1 - p^3 l` for `l = 0, …, M = p^{m-7} - 1`.
pub fn make_plan(m: u32, p: Prime) -> Result<LowerBoundPlan> {
    if m < 8 {
        return Err(Error::RegimeViolation(format!("the schedule needs m >= 8, got m = {m}")));
    }
    let q = p.get() as u64;
    let top = pow_u64(p, m - 3)?;
    let blocks = pow_u64(p, m - 7)?;
    let w = (0..blocks).map(|l| (top - 1 - q * q * q * l) as usize).collect();
    build_plan(p, m, w, true)
}

/// A caller-chosen schedule with the same structural constraints.
pub fn make_custom_plan(p: Prime, m: u32, w: Vec<usize>) -> Result<LowerBoundPlan> {
    build_plan(p, m, w, false)
}

fn build_plan(p: Prime, m: u32, w: Vec<usize>, paper_schedule: bool) -> Result<LowerBoundPlan> {
    if m == 0 {
        return Err(Error::InvalidSchedule("level m must be at least 1".into()));
    }
    let dim = pow_u64(p, m)?;
    if dim > MAX_PLAN_DIM {
        return Err(Error::BudgetExceeded { needed: format!("{p}^{m} rows"), budget: MAX_PLAN_DIM.to_string() });
    }
    let dim = dim as usize;
    let q = p.get() as usize;
    let bad = |msg: String| Err(Error::InvalidSchedule(msg));
    if w.is_empty() {
        return bad("empty schedule".into());
    }
    if w.windows(2).any(|pair| pair[0] <= pair[1]) {
        return bad(format!("{w:?} is not strictly decreasing"));
    }
    if let Some(&x) = w.iter().find(|&&x| x % q != q - 1) {
        return bad(format!("w = {x} is not congruent to {} mod {p}", q - 1));
    }
    if w[0] >= dim {
        return bad(format!("w_0 = {} leaves no row k with k + w_0 < {dim}", w[0]));
    }
    let mut offsets = Vec::with_capacity(w.len());
    let mut acc = BigUint::zero();
    for &x in &w {
        offsets.push(acc.clone());
        acc += p.pow_big(x as u64);
    }
    if acc > p.pow_big(dim as u64) {
        return bad(format!("runs need {acc} columns, block A_{m} has {p}^{dim}"));
    }
    let n_m = n_offset(m, p)?;
    let n_total = &n_m + BigUint::from(dim) * acc;
    Ok(LowerBoundPlan { p, m, dim, w, offsets, n_m, n_total, paper_schedule })
}

impl LowerBoundPlan {
    pub fn prime(&self) -> Prime {
        self.p
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// `p^m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn w(&self) -> &[usize] {
        &self.w
    }

    /// `M`, the index of the last (shortest) run.
    pub fn last(&self) -> usize {
        self.w.len() - 1
    }

    /// `B_l`.
    pub fn offsets(&self) -> &[BigUint] {
        &self.offsets
    }

    pub fn n_m(&self) -> &BigUint {
        &self.n_m
    }

    /// `N = n_m + p^m Σ p^{w_l}`.
    pub fn n_total(&self) -> &BigUint {
        &self.n_total
    }

    pub fn is_paper_schedule(&self) -> bool {
        self.paper_schedule
    }

    /// Common gap `w_{l-1} - w_l`, if all gaps agree (always for one run).
    pub fn uniform_spacing(&self) -> Option<usize> {
        let gaps: Vec<usize> = self.w.windows(2).map(|pair| pair[0] - pair[1]).collect();
        match gaps.first() {
            None => Some(0),
            Some(&g) => gaps.iter().all(|&x| x == g).then_some(g),
        }
    }

    /// Base-p digits of `B_l` from position `w_l` up: ones at `w_i - w_l`
    /// for `i < l`, length `p^m - w_l`.
    pub fn block_vector(&self, l: usize) -> Result<Vec<u32>> {
        let wl = *self.w.get(l).ok_or_else(|| Error::InvalidArgument(format!("no run {l}")))?;
        let mut v = vec![0u32; self.dim - wl];
        for &wi in &self.w[..l] {
            v[wi - wl] = 1;
        }
        Ok(v)
    }

    /// First absolute digit position of run `l`: `n_m + p^m B_l`.
    pub fn run_start(&self, l: usize) -> BigUint {
        &self.n_m + BigUint::from(self.dim) * &self.offsets[l]
    }
}

/// Digits of `U` as `(u_0, …, u_{w-1})`, most significant first, so that
/// `U = u_{w-1} + u_{w-2} p + … + u_0 p^{w-1}`.
pub fn u_digits(u: u64, w: usize, p: Prime) -> Vec<u32> {
    let q = p.get() as u64;
    let mut out = vec![0u32; w];
    let mut rest = u;
    for slot in out.iter_mut().rev() {
        *slot = (rest % q) as u32;
        rest /= q;
    }
    out
}

fn check_k(view: &PascalView, k: usize, w: usize) -> Result<()> {
    if w == 0 || k + w >= view.dim() {
        return Err(Error::RegimeViolation(format!(
            "need 1 <= w and k + w < {}, got k = {k}, w = {w}",
            view.dim()
        )));
    }
    Ok(())
}

/// `γ ≡ ξ_w · u + c^{(η^{(w)}, u^{(w)})}_{k+w, p^m-w} · v (mod p)`: the sub-cell
/// hit by the unique point of row `k` in cell `U`, for `z = 0`.
pub fn predict_gamma(view: &PascalView, k: usize, w: usize, u: &[u32], v: &[u32]) -> Result<u32> {
    check_k(view, k, w)?;
    if u.len() != w {
        return Err(Error::LengthMismatch { expected: w, actual: u.len() });
    }
    if v.len() != view.dim() - w {
        return Err(Error::LengthMismatch { expected: view.dim() - w, actual: v.len() });
    }
    let p = view.prime();
    let head = xi(w, p)?.dot(u, p)?;
    let tail = dot(&view.tail_row(k + w, w)?, v, p);
    Ok(p.add(head, tail))
}

/// Closed form for `η = 0`, `u = 1` when the block vector has `l` ones at
/// offsets `s, 2s, …, l s` with `s` a power of `p`:
/// `γ ≡ ξ_w · u + C(⌊(k+w)/s⌋ + 1 + l, l) - 1`.
pub fn predict_gamma_levin(k: usize, w: usize, l: usize, spacing: usize, u: &[u32], p: Prime) -> Result<u32> {
    if l > 0 && !is_power_of(spacing as u64, p.get() as u64) {
        return Err(Error::RegimeViolation(format!("spacing {spacing} is not a power of {p}")));
    }
    if u.len() != w || w == 0 {
        return Err(Error::LengthMismatch { expected: w, actual: u.len() });
    }
    let head = xi(w, p)?.dot(u, p)?;
    let term = if l == 0 { 0 } else { levin_tail_term(k, w, l, spacing, p) };
    Ok(p.add(head, term))
}

/// `C(⌊(k+w)/s⌋ + 1 + l, l) - 1 mod p`, the `k`-dependent part of `γ`.
pub fn levin_tail_term(k: usize, w: usize, l: usize, spacing: usize, p: Prime) -> u32 {
    if l == 0 {
        return 0;
    }
    hockey_stick(((k + w) / spacing) as u64, l as u64, p)
}

fn is_power_of(x: u64, q: u64) -> bool {
    let mut x = x;
    if x == 0 {
        return false;
    }
    while x.is_multiple_of(q) {
        x /= q;
    }
    x == 1
}

/// Solution of the cell condition `A_{k,w} e ≡ u - B_{k,w} v` together with
/// the digit `γ = c·e + d·v` it produces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellSolution {
    /// Low digits `e_0, …, e_{w-1}` of `n - B_l`, least significant first.
    pub e: Vec<u32>,
    pub gamma: u32,
}

impl CellSolution {
    /// `n - B_l`.
    pub fn offset(&self, p: Prime) -> BigUint {
        self.e.iter().rev().fold(BigUint::zero(), |acc, &d| acc * p.get() + d)
    }
}

/// Solves the cell condition directly and substitutes into the next row.
pub fn solve_unique_n(view: &PascalView, k: usize, w: usize, u: &[u32], v: &[u32]) -> Result<CellSolution> {
    check_k(view, k, w)?;
    if u.len() != w {
        return Err(Error::LengthMismatch { expected: w, actual: u.len() });
    }
    let p = view.prime();
    let a = view.submatrix_a(k, w)?;
    let b = view.submatrix_b(k, w)?;
    let bv = b.mul_vec(v, p)?;
    let rhs: Vec<u32> = u.iter().zip(&bv).map(|(&x, &y)| p.sub(x, y)).collect();
    let e = solve(&a, &rhs, p)?
        .ok_or_else(|| Error::RegimeViolation(format!("A_{{{k},{w}}} is singular")))?;
    let gamma = p.add(dot(&view.row_c(k, w)?, &e, p), dot(&view.row_d(k, w)?, v, p));
    Ok(CellSolution { e, gamma })
}

/// Result of checking every `(k, U)` pair of one run against the points.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GammaVerification {
    pub pairs: usize,
    /// Pairs where the cell was hit by zero or several `n`.
    pub not_unique: usize,
    pub matrix_mismatches: usize,
    pub closed_form_mismatches: usize,
    pub closed_form_checked: usize,
    pub substitution_mismatches: usize,
    pub shift_checked: usize,
    pub shift_mismatches: usize,
}

impl GammaVerification {
    pub fn is_clean(&self) -> bool {
        self.not_unique == 0
            && self.matrix_mismatches == 0
            && self.closed_form_mismatches == 0
            && self.substitution_mismatches == 0
            && self.shift_mismatches == 0
    }
}

/// Largest `p^{w}` for which a run's cell table is enumerated.
pub const MAX_CELL_TABLE: u64 = 1 << 20;

/// Enumerates run `l` of block `A_m` and checks, for every row `k` with
/// `k + w_l < p^m` and every cell `U`, that exactly one column `n` lands in
/// the cell and that its next digit matches [`predict_gamma`],
/// [`solve_unique_n`] and (for Levin parameters with power-of-p spacing)
/// [`predict_gamma_levin`]; also checks `γ(U+1) ≡ γ(U) + p - 1` whenever
/// `U ≢ p-1`.
pub fn verify_gamma(plan: &LowerBoundPlan, params: &Arc<AffineParams>, l: usize) -> Result<GammaVerification> {
    check_params(plan, params)?;
    let p = plan.p;
    let q = p.get() as u64;
    let w = plan.w[l];
    let cells = pow_u64(p, w as u32).ok().filter(|&c| c <= MAX_CELL_TABLE).ok_or_else(|| {
        Error::BudgetExceeded { needed: format!("{p}^{w} cells"), budget: MAX_CELL_TABLE.to_string() }
    })? as usize;
    let rows = plan.dim - w;
    // hits[k][U] and the digit after the cell for the last hit
    let mut hits = vec![0u32; rows * cells];
    let mut next = vec![0u8; rows * cells];
    let mut cursor = ColumnCursor::new(params.clone(), &plan.offsets[l])?;
    for _ in 0..cells {
        let col = cursor.current().ok_or_else(|| Error::InvalidArgument("run exceeds the block".into()))?;
        for k in 0..rows {
            let cell = col[k..k + w].iter().fold(0usize, |acc, &d| acc * q as usize + d as usize);
            hits[k * cells + cell] += 1;
            next[k * cells + cell] = col[k + w];
        }
        cursor.advance();
    }
    let view = params.view();
    let v = plan.block_vector(l)?;
    let closed_form = params.is_levin() && plan.uniform_spacing().is_some_and(|s| l == 0 || is_power_of(s as u64, q));
    let mut report = GammaVerification::default();
    for k in 0..rows {
        let tail = dot(&view.tail_row(k + w, w)?, &v, p);
        let xi_w = xi(w, p)?;
        for cell in 0..cells {
            report.pairs += 1;
            let idx = k * cells + cell;
            if hits[idx] != 1 {
                report.not_unique += 1;
                continue;
            }
            let u = u_digits(cell as u64, w, p);
            let observed = next[idx] as u32;
            let predicted = p.add(xi_w.dot(&u, p)?, tail);
            if predicted != observed {
                report.matrix_mismatches += 1;
            }
            if closed_form {
                report.closed_form_checked += 1;
                let s = plan.uniform_spacing().unwrap_or(0);
                if predict_gamma_levin(k, w, l, s, &u, p)? != observed {
                    report.closed_form_mismatches += 1;
                }
            }
            if solve_unique_n(view, k, w, &u, &v)?.gamma != observed {
                report.substitution_mismatches += 1;
            }
            if (cell as u64) % q != q - 1 && cell + 1 < cells && hits[idx + 1] == 1 {
                report.shift_checked += 1;
                if next[idx + 1] as u32 != p.add(observed, p.get() - 1) {
                    report.shift_mismatches += 1;
                }
            }
        }
    }
    Ok(report)
}

fn check_params(plan: &LowerBoundPlan, params: &AffineParams) -> Result<()> {
    if params.m() != plan.m || params.prime() != plan.p {
        return Err(Error::InvalidArgument(format!(
            "parameters are for level {} over {}, plan is level {} over {}",
            params.m(),
            params.prime(),
            plan.m,
            plan.p
        )));
    }
    if params.z().iter().any(|&x| x != 0) {
        return Err(Error::RegimeViolation("the cell analysis assumes z = 0".into()));
    }
    Ok(())
}

/// Cells `c` of width `p^{-t}` that do not receive exactly `p^m` of the points
/// `x_{n,k}`, `0 <= k < p^m`, `B p^t <= n < (B+1) p^t`. The stream must reach
/// a little past block `A_m`, so build it with at least `m + 1` levels.
pub fn exceptional_cs(stream: &DigitStream, m: u32, t: u32, b: &BigUint, budget: u64) -> Result<Vec<u64>> {
    let p = stream.prime();
    let dim = pow_u64(p, m)?;
    if t == 0 || t as u64 > dim {
        return Err(Error::InvalidArgument(format!("t = {t} outside 1..={dim}")));
    }
    if *b >= p.pow_big(dim - t as u64) {
        return Err(Error::InvalidArgument(format!("B = {b} is not below {p}^({dim} - {t})")));
    }
    let cells = pow_u64(p, t)?;
    let count = cells
        .checked_mul(dim)
        .filter(|&c| c <= budget)
        .ok_or_else(|| Error::BudgetExceeded { needed: format!("{dim}·{p}^{t} points"), budget: budget.to_string() })?;
    let start = n_offset(m, p)? + BigUint::from(dim) * b * BigUint::from(cells);
    let points = extract_points(stream, &start, count as usize, t)?;
    let mut hist = vec![0u64; cells as usize];
    for &x in points.numerators() {
        hist[x as usize] += 1;
    }
    Ok(hist.iter().enumerate().filter(|(_, &h)| h != dim).map(|(c, _)| c as u64).collect())
}

/// One interval `J_l = [U(l)/p^{w_l}, V(l)/p^{w_l})` of the chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChainLevel {
    pub l: usize,
    pub w: usize,
    pub u: u64,
    /// `p · V(l)`, an integer.
    pub v_times_p: u64,
    /// `γ` for each row `k` with `k + w_l < p^m`.
    pub gammas: Vec<u32>,
    /// `A_δ(l)` for `δ = 0, …, p-1`.
    pub counts: Vec<usize>,
    /// Smallest `δ` attaining `A(l) = max_δ A_δ(l)`.
    pub gamma_star: u32,
}

impl ChainLevel {
    /// `A(l)`.
    pub fn a(&self) -> usize {
        self.counts[self.gamma_star as usize]
    }

    /// True when `J_l` has width `(2p-1)/p` cells (the `γ* = p-1` case).
    pub fn is_wide(&self, p: Prime) -> bool {
        self.gamma_star == p.get() - 1
    }
}

/// The adjacent intervals `J_M, …, J_0`, stored by `l`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalChain {
    p: Prime,
    levels: Vec<ChainLevel>,
}

fn big_ratio(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl IntervalChain {
    /// The chain with no intervals.
    pub fn empty(p: Prime) -> Self {
        IntervalChain { p, levels: Vec::new() }
    }

    pub fn levels(&self) -> &[ChainLevel] {
        &self.levels
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// `[U(l)/p^{w_l}, V(l)/p^{w_l})`.
    pub fn interval(&self, l: usize) -> (BigRational, BigRational) {
        let lev = &self.levels[l];
        let den = self.p.pow_big(lev.w as u64);
        let lo = big_ratio(BigUint::from(lev.u), den.clone());
        let hi = big_ratio(BigUint::from(lev.v_times_p), den * self.p.get());
        (lo, hi)
    }

    /// `λ(J)`.
    pub fn length(&self) -> BigRational {
        (0..self.levels.len()).fold(BigRational::zero(), |acc, l| {
            let (lo, hi) = self.interval(l);
            acc + hi - lo
        })
    }

    /// `J = [left, right)` (the intervals are adjacent), or `None` if empty.
    pub fn span(&self) -> Option<(BigRational, BigRational)> {
        let last = self.levels.len().checked_sub(1)?;
        Some((self.interval(last).0, self.interval(0).1))
    }

    /// `V(l)/p^{w_l} = U(l-1)/p^{w_{l-1}}` for every `l >= 1`.
    pub fn is_adjacent(&self) -> bool {
        (1..self.levels.len()).all(|l| self.interval(l).1 == self.interval(l - 1).0)
    }

    /// `0 < V(l) - U(l) < 2` and `V(l) < p^{w_l}` for every level.
    pub fn widths_valid(&self) -> bool {
        let q = self.p.get() as u64;
        self.levels.iter().all(|lev| {
            let gap = lev.v_times_p.saturating_sub(lev.u * q);
            gap > 0
                && gap < 2 * q
                && BigUint::from(lev.v_times_p) < self.p.pow_big(lev.w as u64) * self.p.get()
        })
    }
}

/// Builds the chain. `U(M)` is the least value `≢ p-1 (mod p)` for which every
/// cell the per-run fair-count argument relies on is non-exceptional: for run
/// `l`, the cells of width `p^{-w_l}` covered by `J_M ∪ … ∪ J_{l+1}`, plus the
/// full cell `U(l)` when `J_l` is wide. The stream must carry `z = 0` at level
/// `m` and reach at least level `m + 1`.
pub fn build_chain(plan: &LowerBoundPlan, stream: &DigitStream, budget: u64) -> Result<IntervalChain> {
    let p = plan.p;
    let q = p.get() as u64;
    let params = stream.params(plan.m)?;
    check_params(plan, &params)?;
    pow_u64(p, plan.w[0] as u32 + 1)?;
    let view = params.view();
    let exceptional: Vec<Vec<u64>> = (0..plan.w.len())
        .map(|l| {
            let b = &plan.offsets[l] / p.pow_big(plan.w[l] as u64);
            exceptional_cs(stream, plan.m, plan.w[l] as u32, &b, budget)
        })
        .collect::<Result<_>>()?;
    // k-dependent parts of γ per level, and ξ_w per level
    let tails: Vec<Vec<u32>> = (0..plan.w.len())
        .map(|l| {
            let w = plan.w[l];
            let v = plan.block_vector(l)?;
            (0..plan.dim - w).map(|k| Ok(dot(&view.tail_row(k + w, w)?, &v, p))).collect()
        })
        .collect::<Result<_>>()?;
    let xis: Vec<_> = plan.w.iter().map(|&w| xi(w, p)).collect::<Result<_>>()?;
    let last = plan.last();
    let first_cells = pow_u64(p, plan.w[last] as u32)?;
    'candidate: for u_last in (0..first_cells).filter(|u| u % q != q - 1) {
        let mut levels = Vec::with_capacity(plan.w.len());
        let mut u = u_last;
        for l in (0..=last).rev() {
            let w = plan.w[l];
            let cells = pow_u64(p, w as u32)?;
            let head = xis[l].dot(&u_digits(u, w, p), p)?;
            let gammas: Vec<u32> = tails[l].iter().map(|&t| p.add(head, t)).collect();
            let mut counts = vec![0usize; q as usize];
            for &g in &gammas {
                counts[g as usize] += 1;
            }
            let best = *counts.iter().max().unwrap();
            let gamma_star = counts.iter().position(|&c| c == best).unwrap() as u32;
            let wide = gamma_star == p.get() - 1;
            let v_times_p = u * q + if wide { 2 * q - 1 } else { q - 1 };
            if v_times_p >= cells * q {
                continue 'candidate;
            }
            let covered_from = u_last * pow_u64(p, (w - plan.w[last]) as u32)?;
            let covered_to = if wide { u + 1 } else { u };
            if exceptional[l].iter().any(|&c| c >= covered_from && c < covered_to) {
                continue 'candidate;
            }
            levels.push(ChainLevel { l, w, u, v_times_p, gammas, counts, gamma_star });
            if l > 0 {
                let gap = (plan.w[l - 1] - w) as u32;
                u = v_times_p * pow_u64(p, gap - 1)?;
            }
        }
        levels.reverse();
        return Ok(IntervalChain { p, levels });
    }
    Err(Error::NoExceptionFreeZone(format!(
        "no admissible U(M) below {p}^{} for w = {:?}",
        plan.w[last], plan.w
    )))
}

/// Count of run `l`'s points in `J_M ∪ … ∪ J_l` against the bound
/// `p^m p^{w_l} λ(J_M ∪ … ∪ J_l) + A(l) - (p-1)/p · p^m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunSurplus {
    pub l: usize,
    pub count: u64,
    /// `p^m p^{w_l} λ(J_M ∪ … ∪ J_l)`.
    pub fair: BigRational,
    pub a: usize,
    pub required: BigRational,
}

impl RunSurplus {
    pub fn holds(&self) -> bool {
        BigRational::from_integer(BigInt::from(self.count)) >= self.required
    }
}

/// Exact `Δ = #{n < N : x_n ∈ J} - N λ(J)` with its decomposition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurplusReport {
    pub n_total: BigUint,
    pub lambda: BigRational,
    pub count: u64,
    pub delta: BigRational,
    /// `#{n < n_m : x_n ∈ J} - n_m λ(J)`.
    pub prefix_delta: BigRational,
    pub runs: Vec<RunSurplus>,
}

/// Counts the first `N` points in `J`. Points are truncated to `w_0 + 1`
/// digits, which decides membership exactly because every endpoint of `J`
/// lies on that grid.
pub fn count_surplus(plan: &LowerBoundPlan, chain: &IntervalChain, stream: &DigitStream, budget: u64) -> Result<SurplusReport> {
    let p = plan.p;
    let n_total = plan.n_total.to_u64().filter(|&n| n <= budget).ok_or_else(|| Error::BudgetExceeded {
        needed: format!("{} points", plan.n_total),
        budget: budget.to_string(),
    })?;
    let Some((lo, hi)) = chain.span() else {
        return Ok(SurplusReport {
            n_total: plan.n_total.clone(),
            lambda: BigRational::zero(),
            count: 0,
            delta: BigRational::zero(),
            prefix_delta: BigRational::zero(),
            runs: Vec::new(),
        });
    };
    let precision = plan.w[0] as u32 + 1;
    let scale = BigInt::from(pow_u64(p, precision)?);
    let on_grid = |r: &BigRational| -> Result<u64> {
        let x = r * BigRational::from_integer(scale.clone());
        if !x.is_integer() {
            return Err(Error::InvalidArgument(format!("endpoint {r} is off the p^-{precision} grid")));
        }
        Ok(x.to_integer().to_u64().unwrap())
    };
    let (lo_n, hi_n) = (on_grid(&lo)?, on_grid(&hi)?);
    let points = extract_points(stream, &BigUint::zero(), n_total as usize, precision)?;
    let xs = points.numerators();
    let in_range = |slice: &[u64], a: u64, b: u64| slice.iter().filter(|&&x| x >= a && x < b).count() as u64;
    let count = in_range(xs, lo_n, hi_n);
    let lambda = chain.length();
    let as_rat = |x: &BigUint| BigRational::from_integer(BigInt::from(x.clone()));
    let delta = BigRational::from_integer(BigInt::from(count)) - as_rat(&plan.n_total) * &lambda;
    let n_m = plan.n_m.to_usize().unwrap();
    let prefix_delta =
        BigRational::from_integer(BigInt::from(in_range(&xs[..n_m], lo_n, hi_n))) - as_rat(&plan.n_m) * &lambda;
    let dim = plan.dim;
    let mut runs = Vec::with_capacity(plan.w.len());
    let q = BigRational::new(BigInt::from(p.get() - 1), BigInt::from(p.get()));
    for l in 0..plan.w.len() {
        let start = plan.run_start(l).to_usize().unwrap();
        let len = dim * pow_u64(p, plan.w[l] as u32)? as usize;
        let right = on_grid(&chain.interval(l).1)?;
        let count = in_range(&xs[start..start + len], lo_n, right);
        let part = chain.interval(l).1 - &lo;
        let fair = BigRational::from_integer(BigInt::from(len)) * part;
        let a = chain.levels[l].a();
        let required = &fair + BigRational::from_integer(BigInt::from(a)) - &q * BigInt::from(dim);
        runs.push(RunSurplus { l, count, fair, a, required });
    }
    Ok(SurplusReport { n_total: plan.n_total.clone(), lambda, count, delta, prefix_delta, runs })
}

/// `(p^3-1)/p^3 · (p^5-1)/p^5 - (p-1)/p - (2p-1)/((p-1) p^{p^3})`.
pub fn final_constant(p: Prime) -> BigRational {
    let q = BigInt::from(p.get());
    let one = BigRational::one();
    let pw = |e: u32| BigRational::from_integer(q.pow(e));
    let a = (&one - one.clone() / pw(3)) * (&one - one.clone() / pw(5));
    let b = &one - one.clone() / pw(1);
    let cube = p.get().pow(3);
    let c = BigRational::new(BigInt::from(2 * p.get() - 1), BigInt::from(p.get() - 1) * q.pow(cube));
    a - b - c
}


/// Counts behind `Σ_l A(l) ≥ p^3 · #{(p-1)s in D_m}` on the `m >= 8` schedule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ALowerBound {
    pub p: Prime,
    pub m: u32,
    /// `(p-1)`-count in column `l` of `D_m`.
    pub column_counts: Vec<usize>,
    /// `#{k : k + w_l < p^m, C(⌊(k+w_l)/p^3⌋+1+l, l) - 1 ≡ p-1}`.
    pub top_counts: Vec<usize>,
    /// `A(l)`: the largest class of the `k`-dependent part of `γ`.
    pub a: Vec<usize>,
    /// Whether the `k`-dependent part, evaluated through the Pascal matrix,
    /// agreed with the closed form for every `(l, k)`. `None` if not evaluated.
    pub matrix_agrees: Option<bool>,
    /// `p^3 · #{(p-1)s in D_m}`.
    pub lower: u64,
    /// `(M+1) p^m (p^3-1)/p^3 · (p^5-1)/p^5`.
    pub target: BigRational,
    /// Whether `1 - ((p+1)/2p)^{m-7} >= (p^5-1)/p^5`.
    pub regime: bool,
}

impl ALowerBound {
    /// `A(l) >= #top(l) >= p^3 · (column l count)` for every `l`.
    pub fn columns_hold(&self) -> bool {
        let cube = (self.p.get() as usize).pow(3);
        self.a
            .iter()
            .zip(&self.top_counts)
            .zip(&self.column_counts)
            .all(|((&a, &top), &col)| a >= top && top >= cube * col)
    }

    /// `Σ A(l) >= p^3 · #{(p-1)s}`.
    pub fn sum_holds(&self) -> bool {
        self.a.iter().sum::<usize>() as u64 >= self.lower
    }

    /// `p^3 · #{(p-1)s} >= target`; only guaranteed when [`Self::regime`] holds.
    pub fn aggregate_holds(&self) -> bool {
        BigRational::from_integer(BigInt::from(self.lower)) >= self.target
    }
}

/// Evaluates the `D_m` counting argument for the `m >= 8` schedule. With
/// `through_matrix` the `k`-dependent part of `γ` is also computed as
/// `c_{k+w_l} · v_l` from the Levin Pascal matrix and compared with the
/// closed form.
pub fn a_l_lower_bound(m: u32, p: Prime, through_matrix: bool) -> Result<ALowerBound> {
    let plan = make_plan(m, p)?;
    let dm = dm_matrix(m, p)?;
    let q = p.get() as usize;
    let top = p.get() - 1;
    let spacing = q * q * q;
    let view = through_matrix.then(|| PascalView::levin(p, plan.dim));
    let mut top_counts = Vec::with_capacity(plan.w.len());
    let mut a = Vec::with_capacity(plan.w.len());
    let mut agrees = true;
    for (l, &w) in plan.w.iter().enumerate() {
        let v = plan.block_vector(l)?;
        let mut classes = vec![0usize; q];
        for k in 0..plan.dim - w {
            let term = levin_tail_term(k, w, l, spacing, p);
            classes[term as usize] += 1;
            if let Some(view) = &view {
                agrees &= dot(&view.tail_row(k + w, w)?, &v, p) == term;
            }
        }
        top_counts.push(classes[top as usize]);
        a.push(*classes.iter().max().unwrap());
    }
    let lower = (spacing * dm.count_top()) as u64;
    let rat = |n: u64, d: u64| BigRational::new(BigInt::from(n), BigInt::from(d));
    let (p3, p5) = ((q as u64).pow(3), (q as u64).pow(5));
    let target = BigRational::from_integer(BigInt::from(plan.w.len() * plan.dim))
        * rat(p3 - 1, p3)
        * rat(p5 - 1, p5);
    let base = rat(q as u64 + 1, 2 * q as u64);
    let mut power = BigRational::one();
    for _ in 0..m - 7 {
        power *= &base;
    }
    let regime = BigRational::one() - power >= rat(p5 - 1, p5);
    Ok(ALowerBound {
        p,
        m,
        column_counts: dm.column_top_counts(),
        top_counts,
        a,
        matrix_agrees: through_matrix.then_some(agrees),
        lower,
        target,
        regime,
    })
}

/// Serializable summary of a plan and, when built, its chain and surplus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PlanReport {
    pub p: u32,
    pub m: u32,
    pub w: Vec<usize>,
    #[serde(rename = "B")]
    pub b: Vec<String>,
    #[serde(rename = "N")]
    pub n: String,
    #[serde(rename = "U")]
    pub u: Vec<String>,
    /// `V(l)` as `"num/p"`.
    #[serde(rename = "V")]
    pub v: Vec<String>,
    /// `γ` per run `l` and row `k`.
    pub gamma_table: Vec<Vec<u32>>,
    pub delta_num: Option<String>,
    pub delta_den: Option<String>,
}

impl PlanReport {
    pub fn new(plan: &LowerBoundPlan, chain: Option<&IntervalChain>, surplus: Option<&SurplusReport>) -> Self {
        let levels = chain.map(|c| c.levels()).unwrap_or(&[]);
        PlanReport {
            p: plan.p.get(),
            m: plan.m,
            w: plan.w.clone(),
            b: plan.offsets.iter().map(|b| b.to_string()).collect(),
            n: plan.n_total.to_string(),
            u: levels.iter().map(|lev| lev.u.to_string()).collect(),
            v: levels.iter().map(|lev| format!("{}/{}", lev.v_times_p, plan.p)).collect(),
            gamma_table: levels.iter().map(|lev| lev.gammas.clone()).collect(),
            delta_num: surplus.map(|s| s.delta.numer().to_string()),
            delta_den: surplus.map(|s| s.delta.denom().to_string()),
        }
    }
}
