//! Exact star discrepancy of prefixes of `({p^n α})` and the upper bounds for
//! concatenations of nested semi-perfect necklaces.
//!
//! Points are truncated to `L` base-p digits, so each one is a numerator over
//! `S = p^L`. Every quantity is computed exactly; floats only appear in CSV
//! columns whose names end in `_approx`.

use std::io::Write;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::construct::DigitStream;
use crate::error::{Error, Result};
use crate::ffmat::Prime;

/// `N` points `a_i / p^L` with integer numerators `0 <= a_i < p^L`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointSet {
    p: Prime,
    precision: u32,
    scale: u64,
    numerators: Vec<u64>,
}

/// `p^L`, if it fits the `u64` numerator range.
pub fn precision_scale(p: Prime, precision: u32) -> Result<u64> {
    if precision == 0 {
        return Err(Error::InvalidArgument("precision must be at least 1".into()));
    }
    p.checked_pow(precision)
        .ok_or_else(|| Error::PrecisionTooLarge(format!("{p}^{precision} exceeds 64 bits")))
}

/// `⌈log_p N⌉ + 16`, lowered if needed so that `p^L` fits 64 bits.
pub fn default_precision(n: u64, p: Prime) -> u32 {
    let mut digits = 0u32;
    let mut reach = 1u128;
    while reach < n as u128 {
        reach *= p.get() as u128;
        digits += 1;
    }
    let max = (64.0 / (p.get() as f64).log2()).floor() as u32;
    let mut l = (digits + 16).min(max);
    while p.checked_pow(l).is_none() {
        l -= 1;
    }
    l
}

impl PointSet {
    pub fn new(p: Prime, precision: u32, numerators: Vec<u64>) -> Result<Self> {
        let scale = precision_scale(p, precision)?;
        if let Some(&a) = numerators.iter().find(|&&a| a >= scale) {
            return Err(Error::InvalidArgument(format!("numerator {a} is not below {p}^{precision}")));
        }
        Ok(PointSet { p, precision, scale, numerators })
    }

    pub fn prime(&self) -> Prime {
        self.p
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    /// `p^L`.
    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }

    pub fn numerators(&self) -> &[u64] {
        &self.numerators
    }

    pub fn point(&self, i: usize) -> BigRational {
        ratio(self.numerators[i] as u128, self.scale as u128)
    }

    /// The first `n` points.
    pub fn prefix(&self, n: usize) -> PointSet {
        PointSet { numerators: self.numerators[..n.min(self.len())].to_vec(), ..self.clone() }
    }

    /// Multiset union; both sets must share `p` and `L`.
    pub fn union(&self, other: &PointSet) -> Result<PointSet> {
        if self.p != other.p || self.precision != other.precision {
            return Err(Error::InvalidArgument("point sets use different precisions".into()));
        }
        let mut numerators = self.numerators.clone();
        numerators.extend_from_slice(&other.numerators);
        Ok(PointSet { numerators, ..self.clone() })
    }
}

fn ratio(num: u128, den: u128) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Points `x_n = 0.α_{n+1} … α_{n+L}` for `n = start, …, start + count - 1`.
pub fn extract_points(stream: &DigitStream, start: &BigUint, count: usize, precision: u32) -> Result<PointSet> {
    let p = stream.prime();
    let scale = precision_scale(p, precision)?;
    const CHUNK: usize = 1 << 16;
    let chunks: Vec<Vec<u64>> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| -> Result<Vec<u64>> {
            let lo = c * CHUNK;
            let len = CHUNK.min(count - lo);
            let mut it = stream.iter_from(&(start + BigUint::from(lo)))?;
            let mut x = 0u64;
            for _ in 0..precision {
                let d = it.next().ok_or_else(|| stream_end(&it))?;
                x = x * p.get() as u64 + d as u64;
            }
            let mut out = Vec::with_capacity(len);
            out.push(x);
            let p = p.get() as u128;
            for _ in 1..len {
                let d = it.next().ok_or_else(|| stream_end(&it))?;
                x = ((x as u128 * p) % scale as u128) as u64 + d as u64;
                out.push(x);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let numerators = if count == 0 { Vec::new() } else { chunks.concat() };
    Ok(PointSet { p, precision, scale, numerators })
}

fn stream_end(it: &crate::construct::StreamIter<'_>) -> Error {
    it.error().cloned().unwrap_or(Error::InvalidArgument("digit stream ended".into()))
}

/// The interval at which the supremum in `D*_N` is attained.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    /// Right endpoint, one of the points.
    pub a: BigRational,
    /// `true` for the limit interval `[0, a]` (too many points), `false` for
    /// `[0, a)` (too few).
    pub closed: bool,
}

/// Exact `D*_N` and the interval attaining it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StarDiscrepancy {
    pub n: usize,
    /// `N · D*_N`.
    pub scaled: BigRational,
    pub witness: Witness,
}

impl StarDiscrepancy {
    pub fn value(&self) -> BigRational {
        &self.scaled / BigRational::from_integer(BigInt::from(self.n))
    }
}

/// Best candidate over sorted numerators, as `(S·N·D*, position, closed)`.
/// Only entries with `keep(index)` take part.
fn sorted_sup(sorted: &[(u64, u32)], scale: u64, n: usize, mut keep: impl FnMut(u32) -> bool) -> (u128, u64, bool) {
    // with i points at or below x: deficit i·S - N·x on [0,x], excess N·x - (i-1)·S on [0,x)
    let (s, nn) = (scale as u128, n as u128);
    let mut best = (0u128, 0u64, false);
    let mut i = 0u128;
    for &(x, idx) in sorted {
        if !keep(idx) {
            continue;
        }
        i += 1;
        let nx = nn * x as u128;
        let over = i * s;
        if over >= nx && over - nx > best.0 {
            best = (over - nx, x, true);
        }
        let under = (i - 1) * s;
        if nx >= under && nx - under > best.0 {
            best = (nx - under, x, false);
        }
    }
    best
}

fn to_report(best: (u128, u64, bool), n: usize, scale: u64) -> StarDiscrepancy {
    let (value, x, closed) = best;
    StarDiscrepancy {
        n,
        scaled: ratio(value, scale as u128),
        witness: Witness { a: ratio(x as u128, scale as u128), closed },
    }
}

/// Exact star discrepancy via the sorted-points formula
/// `N·D*_N = max_i max(i - N x_(i), N x_(i) - (i - 1))`.
pub fn star_discrepancy(ps: &PointSet) -> Result<StarDiscrepancy> {
    if ps.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if ps.len() > u32::MAX as usize {
        return Err(Error::InvalidArgument("more than 2^32 points".into()));
    }
    let mut sorted: Vec<(u64, u32)> = ps.numerators.iter().enumerate().map(|(i, &x)| (x, i as u32)).collect();
    sorted.par_sort_unstable();
    Ok(to_report(sorted_sup(&sorted, ps.scale, ps.len(), |_| true), ps.len(), ps.scale))
}

/// `Δ(P, [a, c)) = #{x ∈ [a, c)} - N·(c - a)`.
pub fn local_discrepancy(ps: &PointSet, a: &BigRational, c: &BigRational) -> Result<BigRational> {
    if !(BigRational::zero() <= *a && a < c && *c <= BigRational::one()) {
        return Err(Error::InvalidArgument(format!("[{a}, {c}) is not a subinterval of [0, 1)")));
    }
    let s = BigInt::from(ps.scale);
    // x/S >= a  <=>  x·den(a) >= num(a)·S
    let lo = a.numer() * &s;
    let hi = c.numer() * &s;
    let count = ps
        .numerators
        .iter()
        .filter(|&&x| {
            let x = BigInt::from(x);
            &x * a.denom() >= lo && &x * c.denom() < hi
        })
        .count();
    Ok(BigRational::from_integer(BigInt::from(count)) - BigRational::from_integer(BigInt::from(ps.len())) * (c - a))
}

/// Necklace parameters `f(j)`, `g(j)` and base `b` of a concatenation
/// `(f(1),g(1)), (f(2),g(2)), …` of nested semi-perfect necklaces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BoundProfile {
    /// `f(j) = g(j) = b^j`: the affine blocks `A_j`.
    Power { b: u64 },
    /// Explicit values for `j = 1, 2, …, len`.
    Table { b: u64, f: Vec<u64>, g: Vec<u64> },
}

impl BoundProfile {
    pub fn base(&self) -> u64 {
        match self {
            BoundProfile::Power { b } | BoundProfile::Table { b, .. } => *b,
        }
    }

    fn pair(&self, j: u32) -> Result<(u64, u64)> {
        match self {
            BoundProfile::Power { b } => {
                let v = b
                    .checked_pow(j)
                    .ok_or_else(|| Error::BudgetExceeded { needed: format!("{b}^{j}"), budget: "u64".into() })?;
                Ok((v, v))
            }
            BoundProfile::Table { f, g, .. } => {
                let idx = j as usize - 1;
                match (f.get(idx), g.get(idx)) {
                    (Some(&f), Some(&g)) => Ok((f, g)),
                    _ => Err(Error::InvalidArgument(format!("profile table has no entry for j = {j}"))),
                }
            }
        }
    }

    pub fn f(&self, j: u32) -> Result<u64> {
        self.pair(j).map(|(f, _)| f)
    }

    pub fn g(&self, j: u32) -> Result<u64> {
        self.pair(j).map(|(_, g)| g)
    }

    /// Length `g(j)·b^{f(j)}` of necklace `j`.
    pub fn block_len(&self, j: u32) -> Result<BigUint> {
        let (f, g) = self.pair(j)?;
        Ok(BigUint::from(g) * BigUint::from(self.base()).pow(f as u32))
    }
}

/// The level `m` and both forms of the upper bound on `N·D*_N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Thm1Bound {
    pub m: u32,
    /// `Σ_{j<m} f(j) + Σ_{j≤m} g(j) + (b-1)f(m)²/2 + (b-1)f(m)g(m)`.
    pub bound: BigRational,
    /// The sharper value the argument actually produces:
    /// `… + (b-1)f(m)(f(m)-1)/2 + (b-1)f(m)g(m) - (b-1)f(m) - m`.
    pub proof_bound: BigRational,
}

/// Upper bound on `N·D*_N` with `m` chosen so that
/// `Σ_{j<m} g(j)b^{f(j)} <= N < Σ_{j<=m} g(j)b^{f(j)}`. For `N` inside the
/// first necklace this is `m = 1` (the empty sum is zero).
pub fn thm1_bound(n: u64, profile: &BoundProfile) -> Result<Thm1Bound> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    let n_big = BigUint::from(n);
    let mut m = 1u32;
    let mut end = profile.block_len(1)?;
    while end <= n_big {
        m += 1;
        end += profile.block_len(m)?;
    }
    let mut sum_f = 0u128;
    let mut sum_g = 0u128;
    for j in 1..m {
        let (f, g) = profile.pair(j)?;
        sum_f += f as u128;
        sum_g += g as u128;
    }
    let (fm, gm) = profile.pair(m)?;
    sum_g += gm as u128;
    let b1 = profile.base() as u128 - 1;
    let (fm, gm) = (fm as u128, gm as u128);
    let int = |x: u128| BigRational::from_integer(BigInt::from(x));
    let half = |x: u128| BigRational::new(BigInt::from(x), BigInt::from(2));
    let base = int(sum_f + sum_g) + int(b1 * fm * gm);
    let bound = &base + half(b1 * fm * fm);
    let proof_bound = base + half(b1 * fm * (fm - 1)) - int(b1 * fm) - int(m as u128);
    Ok(Thm1Bound { m, bound, proof_bound })
}

/// `Σ_{j<m} f(j) + Σ_{j<m} g(j)`, the bound on `n_m·D*_{n_m}` at the end of
/// necklace `m - 1`.
pub fn cor1_bound(m: u32, profile: &BoundProfile) -> Result<BigUint> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("m = {m}, expected m >= 2")));
    }
    let mut total = BigUint::zero();
    for j in 1..m {
        let (f, g) = profile.pair(j)?;
        total += BigUint::from(f) + BigUint::from(g);
    }
    Ok(total)
}

/// `Σ_{j<m} g(j)b^{f(j)}`, where necklace `m` starts.
pub fn necklace_offset(m: u32, profile: &BoundProfile) -> Result<BigUint> {
    let mut total = BigUint::zero();
    for j in 1..m {
        total += profile.block_len(j)?;
    }
    Ok(total)
}

/// One row of a discrepancy scan.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscrepancyReport {
    pub n: u64,
    pub precision: u32,
    /// `p^L`.
    pub scale: u64,
    pub star: StarDiscrepancy,
    pub thm1: Thm1Bound,
    /// Present when `N` is a necklace boundary `n_m` with `m >= 2`.
    pub cor1: Option<(u32, BigUint)>,
}

impl DiscrepancyReport {
    /// `D*_N` of the truncated points.
    pub fn d_star(&self) -> BigRational {
        self.star.value()
    }

    /// `N·D*_N`.
    pub fn nd_star(&self) -> &BigRational {
        &self.star.scaled
    }

    /// `N·p^{-L}`: how far truncation can move `N·D*_N`.
    pub fn truncation_slack(&self) -> BigRational {
        ratio(self.n as u128, self.scale as u128)
    }

    /// `N·D*_N ≤ bound` for the truncated points.
    pub fn within_bound(&self) -> bool {
        *self.nd_star() <= self.thm1.bound
    }

    /// `N·D*_N + N·p^{-L} ≤ bound`, which implies the bound for the exact points.
    pub fn certified(&self) -> bool {
        self.nd_star() + self.truncation_slack() <= self.thm1.bound
    }

    /// `n_m·D*_{n_m} + slack ≤ Σ f + Σ g` when `N = n_m`.
    pub fn cor1_certified(&self) -> Option<bool> {
        self.cor1.as_ref().map(|(_, c)| {
            self.nd_star() + self.truncation_slack() <= BigRational::from_integer(BigInt::from(c.clone()))
        })
    }

    /// `N·D*_N / bound`.
    pub fn ratio(&self) -> BigRational {
        self.nd_star() / &self.thm1.bound
    }
}

/// Reports for every `N` in `ns` (strictly increasing, all positive) over the
/// points `x_0, x_1, …` of `stream`. The points for the largest `N` are
/// sorted once; each report then takes one pass over that order.
pub fn scan(stream: &DigitStream, ns: &[u64], precision: Option<u32>, profile: &BoundProfile) -> Result<Vec<DiscrepancyReport>> {
    let Some(&n_max) = ns.last() else {
        return Ok(Vec::new());
    };
    if ns[0] == 0 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("N values must be positive and strictly increasing".into()));
    }
    if n_max > u32::MAX as u64 {
        return Err(Error::BudgetExceeded { needed: format!("{n_max} points"), budget: u32::MAX.to_string() });
    }
    let p = stream.prime();
    let precision = precision.unwrap_or_else(|| default_precision(n_max, p));
    let ps = extract_points(stream, &BigUint::zero(), n_max as usize, precision)?;
    let mut sorted: Vec<(u64, u32)> = ps.numerators.iter().enumerate().map(|(i, &x)| (x, i as u32)).collect();
    sorted.par_sort_unstable();
    let boundaries: Vec<(u32, BigUint)> = (2..)
        .map(|m| necklace_offset(m, profile).map(|o| (m, o)))
        .take_while(|r| r.as_ref().map_or(true, |(_, o)| *o <= BigUint::from(n_max)))
        .collect::<Result<_>>()?;
    ns.par_iter()
        .map(|&n| {
            let best = sorted_sup(&sorted, ps.scale, n as usize, |idx| (idx as u64) < n);
            let cor1 = boundaries
                .iter()
                .find(|(_, o)| *o == BigUint::from(n))
                .map(|&(m, _)| cor1_bound(m, profile).map(|c| (m, c)))
                .transpose()?;
            Ok(DiscrepancyReport {
                n,
                precision,
                scale: ps.scale,
                star: to_report(best, n as usize, ps.scale),
                thm1: thm1_bound(n, profile)?,
                cor1,
            })
        })
        .collect()
}

/// About `count` integers spread geometrically over `[lo, hi]`, always
/// including both ends, increasing and deduplicated.
pub fn log_spaced(lo: u64, hi: u64, count: usize) -> Vec<u64> {
    if lo == 0 || hi < lo || count == 0 {
        return Vec::new();
    }
    if count == 1 || lo == hi {
        return vec![hi];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<u64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp().round() as u64)
        .map(|x| x.clamp(lo, hi))
        .collect();
    out[0] = lo;
    *out.last_mut().unwrap() = hi;
    out.dedup();
    out
}

fn rational_text(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn approx(r: &BigRational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

/// CSV header written by [`write_csv`].
pub const CSV_COLUMNS: [&str; 14] = [
    "N",
    "Dstar_num",
    "Dstar_den",
    "NDstar",
    "thm1_bound",
    "cor1_bound",
    "ratio",
    "witness_a",
    "witness_closed",
    "thm1_m",
    "proof_bound",
    "two_Dstar",
    "NDstar_approx",
    "log2_trend_approx",
];

/// Writes one row per report. Exact rationals are written as `num/den`; the
/// `_approx` columns are floating-point conveniences. `log2_trend_approx` is
/// `N·D*_N / (ln N)²`.
pub fn write_csv<W: Write>(reports: &[DiscrepancyReport], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for r in reports {
        let d = r.d_star();
        let nd = approx(r.nd_star());
        let ln = (r.n as f64).ln();
        let trend = if r.n > 1 { nd / (ln * ln) } else { f64::NAN };
        w.write_record([
            r.n.to_string(),
            d.numer().to_string(),
            d.denom().to_string(),
            rational_text(r.nd_star()),
            rational_text(&r.thm1.bound),
            r.cor1.as_ref().map(|(_, c)| c.to_string()).unwrap_or_default(),
            rational_text(&r.ratio()),
            rational_text(&r.star.witness.a),
            r.star.witness.closed.to_string(),
            r.thm1.m.to_string(),
            rational_text(&r.thm1.proof_bound),
            rational_text(&(d * BigInt::from(2))),
            format!("{nd:.6}"),
            format!("{trend:.6}"),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(())
}

/// `gcd`-reduced `a/b` as a rational; convenience for callers building endpoints.
pub fn rational(a: i64, b: i64) -> BigRational {
    let g = a.gcd(&b).max(1);
    BigRational::new(BigInt::from(a / g), BigInt::from(b / g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;
    use proptest::prelude::*;

    fn p(x: u32) -> Prime {
        Prime::new(x).unwrap()
    }

    fn int(x: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(x))
    }

    #[test]
    fn levin_first_points() {
        let s = DigitStream::levin(p(2), 3).unwrap();
        let ps = extract_points(&s, &BigUint::zero(), 4, 4).unwrap();
        assert_eq!(ps.numerators(), &[3, 7, 14, 12]);
        assert!(extract_points(&s, &BigUint::zero(), 0, 4).unwrap().is_empty());
    }

    #[test]
    fn star_examples() {
        let single = PointSet::new(p(2), 3, vec![0]).unwrap();
        assert_eq!(star_discrepancy(&single).unwrap().value(), int(1));
        let two = PointSet::new(p(2), 2, vec![1, 3]).unwrap();
        let d = star_discrepancy(&two).unwrap();
        assert_eq!(d.value(), rational(1, 4));
        let lattice = PointSet::new(p(2), 5, (0..8).map(|i| i * 4).collect()).unwrap();
        assert_eq!(star_discrepancy(&lattice).unwrap().value(), rational(1, 8));
        assert_eq!(star_discrepancy(&PointSet::new(p(2), 3, vec![]).unwrap()), Err(Error::EmptyPointSet));
    }

    #[test]
    fn local_examples() {
        let single = PointSet::new(p(2), 3, vec![0]).unwrap();
        assert_eq!(local_discrepancy(&single, &int(0), &int(1)).unwrap(), int(0));
        assert_eq!(local_discrepancy(&single, &int(0), &rational(1, 2)).unwrap(), rational(1, 2));
        assert!(local_discrepancy(&single, &rational(1, 2), &rational(1, 2)).is_err());
    }

    #[test]
    fn bound_examples() {
        let prof = BoundProfile::Power { b: 2 };
        let b = thm1_bound(72, &prof).unwrap();
        assert_eq!((b.m, b.bound.clone()), (3, int(116)));
        let b = thm1_bound(8, &prof).unwrap();
        assert_eq!((b.m, b.bound.clone()), (2, int(32)));
        // 2 + 6 + (8·7/2)... spelled out: Σf=2, Σg=6, f(m)(f(m)-1)/2=6, f·g=16, -f(m)=-4, -m=-2
        assert_eq!(b.proof_bound, int(2 + 6 + 6 + 16 - 4 - 2));
        assert_eq!(thm1_bound(1, &prof).unwrap().m, 1);
        assert_eq!(thm1_bound(71, &prof).unwrap().m, 2);
        assert_eq!(cor1_bound(2, &prof).unwrap(), BigUint::from(4u32));
        assert_eq!(cor1_bound(3, &prof).unwrap(), BigUint::from(12u32));
        assert_eq!(cor1_bound(3, &BoundProfile::Power { b: 3 }).unwrap(), BigUint::from(24u32));
        assert!(cor1_bound(1, &prof).is_err());
        let odd = BoundProfile::Table { b: 2, f: vec![1], g: vec![1] };
        assert_eq!(thm1_bound(1, &odd).unwrap().bound, rational(5, 2));
    }

    #[test]
    fn scan_matches_direct_evaluation() {
        let s = DigitStream::levin(p(2), 4).unwrap();
        let prof = BoundProfile::Power { b: 2 };
        let ns = [1u64, 5, 8, 30, 72, 100];
        let reports = scan(&s, &ns, Some(20), &prof).unwrap();
        for r in &reports {
            let ps = extract_points(&s, &BigUint::zero(), r.n as usize, 20).unwrap();
            assert_eq!(star_discrepancy(&ps).unwrap().scaled, r.star.scaled);
            assert!(r.certified());
        }
        assert_eq!(reports[2].cor1, Some((2, BigUint::from(4u32))));
        assert_eq!(reports[4].cor1, Some((3, BigUint::from(12u32))));
        assert!(reports[3].cor1.is_none());
        let mut buf = Vec::new();
        write_csv(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("N,Dstar_num,Dstar_den,NDstar,thm1_bound,cor1_bound,ratio,witness_a"));
        assert_eq!(text.lines().count(), ns.len() + 1);
    }

    #[test]
    fn log_spacing() {
        let v = log_spaced(1, 1_000_000, 200);
        assert_eq!((v[0], *v.last().unwrap()), (1, 1_000_000));
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert!(v.len() > 150);
    }

    #[test]
    fn default_precision_fits() {
        assert_eq!(default_precision(1_000_000, p(2)), 36);
        assert_eq!(default_precision(8, p(2)), 19);
        let l = default_precision(1 << 40, p(251));
        assert!(p(251).checked_pow(l).is_some());
    }

    /// Sup over every candidate endpoint, counting points directly.
    fn brute_force(ps: &PointSet) -> BigRational {
        let n = ps.len() as i64;
        let mut best = int(0);
        for i in 0..ps.len() {
            let x = ps.point(i);
            let below = ps.numerators().iter().filter(|&&y| y < ps.numerators()[i]).count() as i64;
            let at_most = ps.numerators().iter().filter(|&&y| y <= ps.numerators()[i]).count() as i64;
            let open = (int(below) - &x * int(n)).abs();
            let closed = (int(at_most) - &x * int(n)).abs();
            best = best.max(open).max(closed);
        }
        best / int(n)
    }

    proptest! {
        #[test]
        fn closed_formula_matches_brute_force(xs in proptest::collection::vec(0u64..1024, 1..200)) {
            let ps = PointSet::new(p(2), 10, xs).unwrap();
            prop_assert_eq!(star_discrepancy(&ps).unwrap().value(), brute_force(&ps));
        }

        #[test]
        fn star_is_permutation_invariant(mut xs in proptest::collection::vec(0u64..729, 1..100), seed in any::<u64>()) {
            let a = star_discrepancy(&PointSet::new(p(3), 6, xs.clone()).unwrap()).unwrap();
            let len = xs.len();
            xs.rotate_left(seed as usize % len);
            xs.reverse();
            let b = star_discrepancy(&PointSet::new(p(3), 6, xs).unwrap()).unwrap();
            prop_assert_eq!(a.scaled, b.scaled);
        }

        #[test]
        fn local_is_additive(xs in proptest::collection::vec(0u64..256, 2..60), split in 1usize..59, a in 0i64..128, w in 1i64..128) {
            let split = split.min(xs.len() - 1);
            let all = PointSet::new(p(2), 8, xs.clone()).unwrap();
            let left = PointSet::new(p(2), 8, xs[..split].to_vec()).unwrap();
            let right = PointSet::new(p(2), 8, xs[split..].to_vec()).unwrap();
            let (lo, hi) = (rational(a, 256), rational(a + w, 256));
            let sum = local_discrepancy(&left, &lo, &hi).unwrap() + local_discrepancy(&right, &lo, &hi).unwrap();
            prop_assert_eq!(local_discrepancy(&all, &lo, &hi).unwrap(), sum);
            prop_assert_eq!(left.union(&right).unwrap(), all);
        }
    }
}
