//! Property suites behind `necklace lemmas`.

use std::fmt;

use necklace_normal::construct::{block, AffineParams, DigitStream};
use necklace_normal::ffmat::{
    dm_matrix, hockey_stick, hockey_stick_sum, is_regular, pascal_nonzero_count, PascalView, ShiftProfile, UnitProfile,
};
use necklace_normal::lowerbound::exceptional_cs;
use necklace_normal::necklace::is_nested_perfect;
use necklace_normal::{Error, Prime, Result};
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Largest `p^m` the matrix suites enumerate.
const MAX_SUITE_DIM: usize = 81;

#[derive(Clone, Debug, Serialize)]
pub struct LemmaResult {
    pub name: &'static str,
    pub checked: u64,
    pub failed: u64,
    /// Why the suite was not run, if it was not.
    pub skipped: Option<String>,
}

impl LemmaResult {
    fn skipped(name: &'static str, why: String) -> Self {
        LemmaResult { name, checked: 0, failed: 0, skipped: Some(why) }
    }
}

impl fmt::Display for LemmaResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.skipped {
            Some(why) => write!(f, "{:<6} skipped: {why}", self.name),
            None => write!(
                f,
                "{:<6} {} {}/{} passed",
                self.name,
                if self.failed == 0 { "PASS" } else { "FAIL" },
                self.checked - self.failed,
                self.checked
            ),
        }
    }
}

fn views(p: Prime, dim: usize, seed: u64, profiles: usize) -> Vec<PascalView> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![PascalView::levin(p, dim)];
    for _ in 0..profiles {
        out.push(PascalView::new(p, ShiftProfile::random(dim, &mut rng), UnitProfile::random(dim, p, &mut rng)).unwrap());
    }
    out
}

fn rank(p: Prime, dim: usize, all: &[PascalView]) -> Result<LemmaResult> {
    let (mut checked, mut failed) = (0, 0);
    for view in all {
        for t in 1..=dim {
            for l in 0..=dim - t {
                let eta = view.eta().get(l) as usize;
                for mat in [view.window(l..l + t, 0..t)?, view.window(eta..eta + t, l..l + t)?] {
                    checked += 1;
                    failed += u64::from(!is_regular(&mat, p)?);
                }
            }
        }
    }
    Ok(LemmaResult { name: "rank", checked, failed, skipped: None })
}

fn lem_c(dim: usize, all: &[PascalView]) -> Result<LemmaResult> {
    let (mut checked, mut failed) = (0, 0);
    for view in all {
        for t in 1..dim {
            for k in 0..dim - t {
                checked += 1;
                let ok = view.predict_c_row(k, t)? == view.row_c(k, t)? && view.predict_d_row(k, t)? == view.row_d(k, t)?;
                failed += u64::from(!ok);
            }
        }
    }
    Ok(LemmaResult { name: "lem_c", checked, failed, skipped: None })
}

fn hockey(p: Prime, dim: usize) -> LemmaResult {
    let (mut checked, mut failed) = (0, 0);
    let top = (4 * dim as u64).max(32);
    for i in 0..top {
        for u in 0..top {
            checked += 1;
            failed += u64::from(hockey_stick(i, u, p) != hockey_stick_sum(i, u, p));
        }
    }
    LemmaResult { name: "1a", checked, failed, skipped: None }
}

fn lemma_1b(p: Prime, m: u32) -> Result<LemmaResult> {
    let q = p.get() as u64;
    let (mut checked, mut failed) = (0, 0);
    for r in 0..=m.min(5) {
        if let Ok(count) = pascal_nonzero_count(r, p) {
            checked += 1;
            failed += u64::from(count != (q * (q + 1) / 2).pow(r));
        }
    }
    if m >= 8 {
        let d = dm_matrix(m, p)?;
        // (1 - ((p+1)/2p)^{m-7})·size, exactly: size - size·(p+1)^{m-7}/(2p)^{m-7}
        let e = m - 7;
        let size = d.len() as u128;
        let num = size * (q as u128 + 1).pow(e);
        let den = (2 * q as u128).pow(e);
        checked += 1;
        failed += u64::from(!num.is_multiple_of(den) || d.count_top() as u128 != size - num / den);
    }
    Ok(LemmaResult { name: "1b", checked, failed, skipped: None })
}

fn lemma_2gen(p: Prime, m: u32, dim: usize, seed: u64, profiles: usize, budget: u64) -> Result<LemmaResult> {
    let total = (dim as f64) * (p.get() as f64).powi(dim as i32) * dim as f64;
    if total > budget as f64 {
        return Ok(LemmaResult::skipped("2gen", format!("needs about {total:.0} points, budget {budget}")));
    }
    let mut streams = vec![DigitStream::levin(p, m + 1)?];
    for s in 0..profiles as u64 {
        streams.push(DigitStream::random(p, m + 1, seed.wrapping_add(s))?);
    }
    let (mut checked, mut failed) = (0, 0);
    for s in &streams {
        for t in 1..=dim as u32 {
            let blocks = p.checked_pow(dim as u32 - t).unwrap();
            for b in 0..blocks {
                checked += 1;
                let exc = exceptional_cs(s, m, t, &BigUint::from(b), budget)?;
                failed += u64::from(exc.len() > 2 * (t as usize - 1));
            }
        }
    }
    Ok(LemmaResult { name: "2gen", checked, failed, skipped: None })
}

fn prop1(p: Prime, m: u32, dim: usize, seed: u64, profiles: usize, budget: u64) -> Result<LemmaResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all = vec![AffineParams::levin(m, p)?];
    for _ in 0..profiles {
        all.push(AffineParams::random(m, p, &mut rng)?);
    }
    let (mut checked, mut failed) = (0, 0);
    for params in &all {
        let w = match block(params, budget) {
            Ok(w) => w,
            Err(Error::BudgetExceeded { needed, .. }) => {
                return Ok(LemmaResult::skipped("prop1", format!("block needs {needed}, budget {budget}")))
            }
            Err(e) => return Err(e),
        };
        checked += 1;
        failed += u64::from(!is_nested_perfect(&w, dim, dim)?);
    }
    Ok(LemmaResult { name: "prop1", checked, failed, skipped: None })
}

/// Runs every suite that fits; oversized ones are reported as skipped.
pub fn run_suite(p: Prime, m: u32, seed: u64, profiles: usize, budget: u64) -> Result<Vec<LemmaResult>> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let dim = p.checked_pow(m).map(|d| d as usize).unwrap_or(usize::MAX);
    let mut out = Vec::new();
    if dim <= MAX_SUITE_DIM {
        let all = views(p, dim, seed, profiles);
        out.push(rank(p, dim, &all)?);
        out.push(lem_c(dim, &all)?);
    } else {
        let why = format!("{p}^{m} exceeds {MAX_SUITE_DIM}");
        out.push(LemmaResult::skipped("rank", why.clone()));
        out.push(LemmaResult::skipped("lem_c", why));
    }
    out.push(hockey(p, dim.min(MAX_SUITE_DIM)));
    out.push(lemma_1b(p, m)?);
    if dim <= MAX_SUITE_DIM {
        out.push(lemma_2gen(p, m, dim, seed, profiles, budget)?);
        out.push(prop1(p, m, dim, seed, profiles, budget)?);
    } else {
        out.push(LemmaResult::skipped("2gen", format!("{p}^{m} exceeds {MAX_SUITE_DIM}")));
        out.push(LemmaResult::skipped("prop1", format!("{p}^{m} exceeds {MAX_SUITE_DIM}")));
    }
    Ok(out)
}
