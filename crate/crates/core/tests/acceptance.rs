//! Acceptance criteria 1-11. Runs as a plain binary so each criterion prints
//! exactly one PASS/FAIL line; exits non-zero if any criterion fails.

use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use necklace_normal::construct::{block, n_offset, AffineParams, DigitStream};
use necklace_normal::discrepancy::{log_spaced, scan, BoundProfile, DiscrepancyReport};
use necklace_normal::ffmat::{
    binom_mod, dm_matrix, is_regular, pascal_nonzero_count, xi_weighted_sum, PascalView, ShiftProfile, UnitProfile,
};
use necklace_normal::lowerbound::{exceptional_cs, final_constant, make_custom_plan, verify_gamma};
use necklace_normal::necklace::{is_nested_perfect, search_class, NecklaceClass};
use necklace_normal::Prime;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20240601;

type Outcome = Result<String, String>;

fn p(x: u32) -> Prime {
    Prime::new(x).unwrap()
}

fn rng(tag: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(SEED);
    r.set_stream(tag);
    r
}

fn random_view(prime: Prime, dim: usize, r: &mut ChaCha8Rng) -> PascalView {
    PascalView::new(prime, ShiftProfile::random(dim, r), UnitProfile::random(dim, prime, r)).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Affine blocks are (p^m, p^m)-nested perfect.
fn nested_perfect_blocks() -> Outcome {
    let mut checked = 0;
    let mut failures = Vec::new();
    for (pp, m) in [(2, 1), (2, 2), (2, 3), (3, 1), (5, 1)] {
        let prime = p(pp);
        let dim = prime.checked_pow(m).unwrap() as usize;
        let mut r = rng(100 + pp as u64 * 10 + m as u64);
        let mut all = vec![AffineParams::levin(m, prime).unwrap()];
        all.extend((0..20).map(|_| AffineParams::random(m, prime, &mut r).unwrap()));
        for params in &all {
            let word = block(params, 1 << 24).map_err(|e| e.to_string())?;
            checked += 1;
            if !is_nested_perfect(&word, dim, dim).map_err(|e| e.to_string())? {
                failures.push(format!("(p={pp}, m={m}, z={:?})", params.z()));
            }
        }
    }
    check(failures.is_empty(), format!("{checked} blocks, {} failures {failures:?}", failures.len()))
}

fn thm1_scan(prime: Prime, ns: &[u64]) -> Result<Vec<DiscrepancyReport>, String> {
    let stream = DigitStream::levin(prime, 6).map_err(|e| e.to_string())?;
    scan(&stream, ns, None, &BoundProfile::Power { b: prime.get() as u64 }).map_err(|e| e.to_string())
}

fn grid(all_to: u64, log_to: u64, count: usize, extra: &[u64]) -> Vec<u64> {
    let mut ns: Vec<u64> = (1..=all_to).collect();
    ns.extend(log_spaced(all_to + 1, log_to, count));
    ns.extend_from_slice(extra);
    ns.sort_unstable();
    ns.dedup();
    ns
}

/// Exact `N·D*_N` never exceeds the upper bound; also feeds the trend report.
fn upper_bound_scan(trend: &mut Vec<DiscrepancyReport>) -> Outcome {
    let n5 = n_offset(5, p(2)).unwrap().to_u64().unwrap();
    let n3 = n_offset(3, p(3)).unwrap().to_u64().unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for (prime, ns) in [(p(2), grid(2120, n5, 200, &[1_000_000])), (p(3), grid(81, n3, 100, &[]))] {
        let reports = thm1_scan(prime, &ns)?;
        let bad = reports.iter().filter(|r| !r.certified()).count();
        let worst = reports.iter().map(|r| r.ratio()).max().unwrap();
        ok &= bad == 0;
        lines.push(format!(
            "p={prime}: {} N, {bad} violations, max ratio {:.4}",
            reports.len(),
            worst.to_f64().unwrap()
        ));
        if prime.get() == 2 {
            *trend = reports;
        }
    }
    check(ok, lines.join("; "))
}

/// `n_m·D*_{n_m}` against `Σ f + Σ g` at necklace boundaries.
fn block_boundary_bound() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (pp, ms) in [(2, vec![2, 3, 4, 5]), (3, vec![2])] {
        let prime = p(pp);
        let ns: Vec<u64> = ms.iter().map(|&m| n_offset(m, prime).unwrap().to_u64().unwrap()).collect();
        let reports = thm1_scan(prime, &ns)?;
        for (m, r) in ms.iter().zip(&reports) {
            let Some((_, bound)) = &r.cor1 else {
                return Err(format!("N = {} not recognised as n_{m}", r.n));
            };
            let certified = r.cor1_certified() == Some(true);
            ok &= certified;
            let slack = BigRational::from_integer(BigInt::from(bound.clone())) - r.nd_star();
            lines.push(format!("p={pp} n_{m}={}: slack {slack}", r.n));
        }
    }
    check(ok, lines.join("; "))
}

/// Lucas residues agree with exact Pascal-triangle integers.
fn lucas() -> Outcome {
    const TOP: usize = 3000;
    let primes = [2u32, 3, 5, 7];
    let mut row: Vec<BigUint> = vec![BigUint::one()];
    let mut mismatches = 0u64;
    let mut checked = 0u64;
    for n in 0..=TOP {
        if n > 0 {
            let mut next = Vec::with_capacity(n + 1);
            next.push(BigUint::one());
            for r in 1..n {
                next.push(&row[r - 1] + &row[r]);
            }
            next.push(BigUint::one());
            row = next;
        }
        let nb = BigUint::from(n);
        for r in 0..=TOP {
            let exact = row.get(r).cloned().unwrap_or_default();
            let rb = BigUint::from(r);
            for &q in &primes {
                checked += 1;
                let want = (&exact % q).to_u32().unwrap();
                if binom_mod(&nb, &rb, p(q)) != want {
                    mismatches += 1;
                }
            }
        }
    }
    check(mismatches == 0, format!("{checked} residues, {mismatches} mismatches"))
}

/// Item (1) on the unshifted matrix; items (2), (3) on every window.
fn regularity() -> Outcome {
    let mut windows = 0u64;
    let mut singular = Vec::new();
    let mut structure_bad = 0u64;
    for pp in [2, 3] {
        for m in [1u32, 2] {
            let prime = p(pp);
            let dim = prime.checked_pow(m).unwrap() as usize;
            let levin = PascalView::levin(prime, dim);
            for i in 0..dim {
                for j in 0..dim {
                    let e = levin.entry(i, j).unwrap();
                    let expect_zero = i + j >= dim;
                    let first = i == 0 || j == 0;
                    if (expect_zero && e != 0) || (i + j == dim - 1 && e == 0) || (first && e != 1) {
                        structure_bad += 1;
                    }
                }
            }
            let mut r = rng(500 + pp as u64 * 10 + m as u64);
            let mut views = vec![levin];
            views.extend((0..50).map(|_| random_view(prime, dim, &mut r)));
            for view in &views {
                for t in 1..=dim {
                    for l in 0..=dim - t {
                        let first = view.window(l..l + t, 0..t).unwrap();
                        let eta = view.eta().get(l) as usize;
                        let corner = view.window(eta..eta + t, l..l + t).unwrap();
                        for (family, mat) in [(2, first), (3, corner)] {
                            windows += 1;
                            if !is_regular(&mat, prime).unwrap() {
                                singular.push(format!("p={pp} m={m} item {family} l={l} t={t}"));
                            }
                        }
                    }
                }
            }
        }
    }
    let ok = singular.is_empty() && structure_bad == 0;
    check(
        ok,
        format!("{windows} windows, {} singular, {structure_bad} item-1 entry failures {singular:?}", singular.len()),
    )
}

fn binom_exact(n: i64, r: i64) -> i128 {
    if r < 0 || n < 0 || r > n {
        return 0;
    }
    let mut acc: i128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc
}

fn alternating(t: i64, k: i64, j: i64, eta: i64, upper: i64) -> i128 {
    let start = (eta - k).max(0);
    (start..=upper)
        .map(|i| {
            let sign = if (t + i + 1) % 2 == 0 { 1 } else { -1 };
            sign * binom_exact(t, i) * binom_exact(k + j + i - eta, j)
        })
        .sum()
}

/// ξ-identities: scalar identities over the integers and mod p, and the
/// predicted c/d rows against extraction on every window.
fn xi_identities() -> Outcome {
    let mut scalar = 0u64;
    let mut scalar_bad = Vec::new();
    for t in 0..=12i64 {
        for k in 0..=12i64 {
            for j in 0..=12i64 {
                for eta in 0..=j {
                    scalar += 1;
                    let lhs = alternating(t, k, j, eta, t);
                    let rhs = -binom_exact(k + j - eta, j - t);
                    let head = alternating(t, k, j, eta, t - 1);
                    let next = binom_exact(k + j + t - eta, j);
                    let ok_d = lhs == rhs;
                    let ok_b = if j < t { lhs == 0 && head == next } else { head == next - binom_exact(k + j - eta, j - t) };
                    let ok_mod = [2u32, 3, 5].iter().all(|&q| {
                        xi_weighted_sum(t as u64, k as u64, j as u64, eta as u64, t as u64, p(q))
                            == (rhs.rem_euclid(q as i128)) as u32
                    });
                    if !(ok_d && ok_b && ok_mod) {
                        scalar_bad.push((t, k, j, eta));
                    }
                }
            }
        }
    }
    let mut rows = 0u64;
    let mut row_bad = Vec::new();
    for pp in [2, 3] {
        for m in [1u32, 2] {
            let prime = p(pp);
            let dim = prime.checked_pow(m).unwrap() as usize;
            let mut r = rng(600 + pp as u64 * 10 + m as u64);
            let mut views = vec![PascalView::levin(prime, dim)];
            views.extend((0..50).map(|_| random_view(prime, dim, &mut r)));
            for view in &views {
                for t in 1..dim {
                    for k in 0..dim - t {
                        rows += 2;
                        if view.predict_c_row(k, t).unwrap() != view.row_c(k, t).unwrap()
                            || view.predict_d_row(k, t).unwrap() != view.row_d(k, t).unwrap()
                        {
                            row_bad.push(format!("p={pp} m={m} k={k} t={t}"));
                        }
                    }
                }
            }
        }
    }
    let ok = scalar_bad.is_empty() && row_bad.is_empty();
    check(
        ok,
        format!(
            "{scalar} scalar cases ({} bad), {rows} rows ({} bad)",
            scalar_bad.len(),
            row_bad.len()
        ),
    )
}

/// Exact (p-1)-counts of `D_m` and nonzero counts of Pascal blocks.
fn dm_counts() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (pp, m) in [(2, 8), (2, 9), (3, 8)] {
        let d = dm_matrix(m, p(pp)).map_err(|e| e.to_string())?;
        let size = BigRational::from_integer(BigInt::from(d.len()));
        let base = BigRational::new(BigInt::from(pp + 1), BigInt::from(2 * pp));
        let mut power = BigRational::one();
        for _ in 0..m - 7 {
            power *= &base;
        }
        let predicted = (BigRational::one() - power) * size;
        let got = BigRational::from_integer(BigInt::from(d.count_top()));
        ok &= predicted == got;
        lines.push(format!("D_{m} p={pp}: {got}/{} (predicted {predicted})", d.len()));
    }
    for pp in [2u64, 3, 5] {
        for r in 0..=5u32 {
            let got = pascal_nonzero_count(r, p(pp as u32)).map_err(|e| e.to_string())?;
            ok &= got == (pp * (pp + 1) / 2).pow(r);
        }
    }
    lines.push("Pascal nonzero counts r<=5 checked".into());
    check(ok, lines.join("; "))
}

/// Exception sets are small; complementary cells hold exactly p^m points.
fn exceptions() -> Outcome {
    let mut calls = 0u64;
    let mut worst = 0usize;
    let mut bad = Vec::new();
    for (pp, m) in [(2u32, 2u32), (2, 3), (3, 1)] {
        let prime = p(pp);
        let dim = prime.checked_pow(m).unwrap() as u32;
        let mut streams = vec![("levin".to_string(), DigitStream::levin(prime, m + 1).unwrap())];
        for s in 0..10u64 {
            streams.push((format!("seed {s}"), DigitStream::random(prime, m + 1, SEED + s).unwrap()));
        }
        for (name, stream) in &streams {
            for t in 1..=dim {
                let blocks = prime.checked_pow(dim - t).unwrap();
                for b in 0..blocks {
                    calls += 1;
                    let exc = exceptional_cs(stream, m, t, &BigUint::from(b), 1 << 24).map_err(|e| e.to_string())?;
                    worst = worst.max(exc.len());
                    if exc.len() > 2 * (t as usize - 1) || exc.len() > 2 * dim as usize {
                        bad.push(format!("p={pp} m={m} {name} t={t} B={b}: {}", exc.len()));
                    }
                }
            }
        }
    }
    check(bad.is_empty(), format!("{calls} (t, B) blocks, largest exception set {worst}, {} over budget {bad:?}", bad.len()))
}

/// Unique solutions, predicted sub-cells and the shift law on desk plans.
fn gamma_machinery() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    let plans: [(u32, u32, Vec<usize>); 5] = [
        (2, 3, vec![7, 5, 3]),
        (2, 3, vec![5, 1]),
        (3, 1, vec![2]),
        (2, 4, vec![7, 5, 3]),
        (2, 4, vec![15, 13, 11]),
    ];
    for (pp, m, w) in plans {
        let prime = p(pp);
        let plan = make_custom_plan(prime, m, w.clone()).map_err(|e| e.to_string())?;
        let dim = plan.dim();
        let mut r = rng(900 + pp as u64 * 10 + m as u64);
        let mut all = vec![Arc::new(AffineParams::levin(m, prime).unwrap())];
        for _ in 0..5 {
            let view = random_view(prime, dim, &mut r);
            all.push(Arc::new(
                AffineParams::new(m, vec![0; dim], view.eta().clone(), view.u().clone(), prime).unwrap(),
            ));
        }
        let (mut pairs, mut issues, mut shifts) = (0, 0, 0);
        for params in &all {
            for l in 0..w.len() {
                let v = verify_gamma(&plan, params, l).map_err(|e| e.to_string())?;
                pairs += v.pairs;
                shifts += v.shift_checked;
                issues += v.not_unique
                    + v.matrix_mismatches
                    + v.closed_form_mismatches
                    + v.substitution_mismatches
                    + v.shift_mismatches;
            }
        }
        ok &= issues == 0;
        lines.push(format!("p={pp} m={m} w={w:?}: {pairs} pairs, {shifts} shifts, {issues} mismatches"));
    }
    check(ok, lines.join("; "))
}

/// The lower-bound constant is positive; the trend CSV is written.
fn lower_bound_substitute(trend: &[DiscrepancyReport], prior: &[bool]) -> Outcome {
    let mut ok = prior.iter().all(|&x| x);
    let mut lines = vec![format!("criteria 7-9 {}", if ok { "passed" } else { "failed" })];
    for pp in [2, 3, 5, 7] {
        let c = final_constant(p(pp));
        ok &= c > BigRational::zero();
        lines.push(format!("p={pp}: {:.6}", c.to_f64().unwrap()));
    }
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let path = dir.join("trend_p2.csv");
    let mut out = csv::Writer::from_writer(File::create(&path).map_err(|e| e.to_string())?);
    out.write_record(["N", "NDstar_approx", "ratio_over_ln2", "running_max"]).map_err(|e| e.to_string())?;
    let mut running = 0f64;
    let mut rows = 0;
    for r in trend.iter().filter(|r| r.n >= 2 && r.n <= 1_000_000) {
        let nd = r.nd_star().to_f64().unwrap();
        let ln = (r.n as f64).ln();
        let ratio = nd / (ln * ln);
        running = running.max(ratio);
        out.write_record([r.n.to_string(), format!("{nd:.6}"), format!("{ratio:.6}"), format!("{running:.6}")])
            .map_err(|e| e.to_string())?;
        rows += 1;
    }
    out.flush().map_err(|e| e.to_string())?;
    ok &= rows > 0;
    lines.push(format!("trend: {rows} rows, max n·D*/(ln n)^2 = {running:.4}, {}", path.display()));
    check(ok, lines.join("; "))
}

/// No (3,1)-nested semi-perfect binary necklace; (2,1)-perfect ones exist.
fn small_search() -> Outcome {
    let none = search_class(NecklaceClass { k: 3, l: 1, base: 2, nested: true, semi: true }, 1 << 10)
        .map_err(|e| e.to_string())?;
    let some = search_class(NecklaceClass { k: 2, l: 1, base: 2, nested: false, semi: false }, 1 << 10)
        .map_err(|e| e.to_string())?;
    check(
        none.is_empty() && !some.is_empty(),
        format!("(3,1) nested semi-perfect: {}, (2,1) perfect: {}", none.len(), some.len()),
    )
}

fn run(id: u32, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed < l);
    let (pass, detail) = match outcome {
        Ok(d) if in_time => (true, d),
        Ok(d) => (false, format!("{d}; over time limit {:?}", limit.unwrap())),
        Err(d) => (false, d),
    };
    println!("criterion {id:>2}: {} [{:.2}s] {detail}", if pass { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
    pass
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let mut trend = Vec::new();
    let mut results = vec![
        run(1, secs(60), nested_perfect_blocks),
        run(2, secs(600), || upper_bound_scan(&mut trend)),
        run(3, None, block_boundary_bound),
        run(4, None, lucas),
        run(5, None, regularity),
        run(6, None, xi_identities),
        run(7, None, dm_counts),
        run(8, None, exceptions),
        run(9, None, gamma_machinery),
    ];
    let prior = results[6..9].to_vec();
    results.push(run(10, None, || lower_bound_substitute(&trend, &prior)));
    results.push(run(11, Some(Duration::from_secs(1)), small_search));
    let failed = results.iter().filter(|&&x| !x).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
