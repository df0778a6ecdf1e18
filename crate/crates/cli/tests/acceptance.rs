use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use abundancy_core::abundancy::{b_via_flags, b_via_multiplicativity, b_via_recursion};
use abundancy_core::genfunc::{
    cauchy_check, default_truncation, exp_series, h_value, hr_ratio, partition_numbers,
};
use abundancy_core::limit_stats::{
    cesaro_mean, empirical_moment, l2_third_moment_product, l3_second_moment_factors, mu_constant,
    theoretical_moment, zeta,
};
use abundancy_core::perm_oracle::{
    b_from_bruteforce, bell_transform, enumerate_a, one_orbit_row, OracleBudget,
};
use abundancy_core::qseries::{standard_grid, verify_power_rule};
use abundancy_core::sieve::{sieve_b, SieveConfig};
use abundancy_core::tori::{default_double_count_budget, double_count_check};
use abundancy_core::ExactRational;
use serde_json::Value;

const NMAX: u64 = 1_000_000;
const MEAN_E: f64 = -0.385_084_872_921_619_86;
const MU: f64 = 0.385_079_332_231_326_07;
const ORACLE_CASES: [(u32, u32); 2] = [(2, 6), (3, 4)];

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(pass: bool, elapsed: Duration, limit: Duration) -> bool {
    pass && elapsed <= limit
}

fn abundancy(cache: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_abundancy"))
        .args(args)
        .env("ABUNDANCY_CACHE_DIR", cache)
        .output()
        .map_err(|e| e.to_string())?;
    match out.status.code() {
        Some(0) => Ok(String::from_utf8_lossy(&out.stdout).into_owned()),
        code => Err(format!(
            "exit {code:?}: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        )),
    }
}

fn conjecture_run(dir: &Path, tag: &str) -> Result<(Value, String), String> {
    let table = dir.join("b2.csv");
    if !table.exists() {
        let t = table.display().to_string();
        abundancy(
            dir,
            &["sieve", "--ell", "2", "--nmax", "1000000", "--out", &t],
        )?;
    }
    let (hist, summary) = (
        dir.join(format!("hist{tag}.csv")),
        dir.join(format!("s{tag}.json")),
    );
    abundancy(
        dir,
        &[
            "verify-conjecture",
            "--table",
            &table.display().to_string(),
            "--bins",
            "250",
            "--hist",
            &hist.display().to_string(),
            "--summary",
            &summary.display().to_string(),
        ],
    )?;
    let s = fs::read_to_string(&summary).map_err(|e| e.to_string())?;
    let h = fs::read_to_string(&hist).map_err(|e| e.to_string())?;
    Ok((serde_json::from_str(&s).map_err(|e| e.to_string())?, h))
}

fn criterion_1(dir: &Path) -> Outcome {
    let start = Instant::now();
    let (s, _) = match conjecture_run(dir, "") {
        Ok(v) => v,
        Err(e) => return outcome(false, e),
    };
    let elapsed = start.elapsed();
    let mean = s["mean_E"].as_f64().unwrap_or(f64::NAN);
    let rel = s["rel_err"].as_f64().unwrap_or(f64::NAN);
    let pass = (mean - MEAN_E).abs() <= 1e-8 && (rel - 1.4e-5).abs() <= 0.05e-5;
    outcome(
        within(pass, elapsed, Duration::from_secs(10)),
        format!(
            "mean_E = {mean:.17} (gap {:.2e}), rel_err = {rel:.4e}, {elapsed:.2?}",
            (mean - MEAN_E).abs()
        ),
    )
}

fn criterion_2() -> Outcome {
    let mu = mu_constant();
    outcome(
        (mu - MU).abs() <= 1e-14,
        format!("mu = {mu:.17}, gap {:.1e}", (mu - MU).abs()),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let cfg = SieveConfig::default();
    let m2 = sieve_b(2, NMAX, &cfg).map(|t| cesaro_mean(&t, NMAX));
    let m3 = sieve_b(3, NMAX, &cfg).map(|t| cesaro_mean(&t, NMAX));
    let elapsed = start.elapsed();
    let (Ok(Ok(m2)), Ok(Ok(m3))) = (m2, m3) else {
        return outcome(false, "table or mean failed".into());
    };
    let z2 = zeta(2, 1e-17);
    let z23 = z2 * zeta(3, 1e-17);
    let pass = (m2 - z2).abs() <= 2e-5 && (m3 - z23).abs() <= 1e-3;
    outcome(
        within(pass, elapsed, Duration::from_secs(10)),
        format!(
            "l=2 gap {:.2e}, l=3 gap {:.2e}, {elapsed:.2?}",
            (m2 - z2).abs(),
            (m3 - z23).abs()
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let grid = standard_grid();
    let failures = grid
        .iter()
        .filter(|(ell, z, q)| !verify_power_rule(*ell, z, q, 1e-12).is_ok_and(|c| c.bound_ok))
        .count();
    let elapsed = start.elapsed();
    outcome(
        within(failures == 0, elapsed, Duration::from_secs(1)),
        format!("{} cases, {failures} failures, {elapsed:.2?}", grid.len()),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let budget = OracleBudget::default();
    let mut checked = 0;
    for (ell, top) in ORACLE_CASES {
        let Ok(series) = exp_series(ell, top as usize) else {
            return outcome(false, format!("series failed for l = {ell}"));
        };
        let one_orbit = one_orbit_row(ell, top);
        for n in 1..=top {
            let brute = enumerate_a(ell, n, &budget);
            let rows_ok = match &brute {
                Ok(b) => {
                    bell_transform(ell, n, &one_orbit).ok().as_ref() == Some(b)
                        && series.a_row(n as usize).ok().as_ref() == Some(b)
                }
                Err(_) => false,
            };
            let b = b_from_bruteforce(ell, n, &budget).ok();
            let m = n as u64;
            let b_ok = b.is_some()
                && b == b_via_flags(ell, m).ok()
                && b == b_via_recursion(ell, m).ok()
                && b == b_via_multiplicativity(ell, m).ok();
            if !(rows_ok && b_ok) {
                return outcome(false, format!("disagreement at l = {ell}, n = {n}"));
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        within(true, elapsed, Duration::from_secs(60)),
        format!("{checked} (l, n) cases agree, {elapsed:.2?}"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let budget = default_double_count_budget();
    let mut checked = 0;
    for (ell, top) in ORACLE_CASES {
        for n in 1..=top {
            match double_count_check(ell, n, &budget) {
                Ok(r) if r.matches && r.all_valid => checked += 1,
                Ok(r) => return outcome(false, format!("{r:?}")),
                Err(e) => return outcome(false, e.to_string()),
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        within(true, elapsed, Duration::from_secs(120)),
        format!("{checked} (l, n) cases match, {elapsed:.2?}"),
    )
}

fn criterion_7() -> Outcome {
    let cutoff = 10_000_000;
    let (Ok(m1), Ok(m2), Ok(m3)) = (
        theoretical_moment(2, 1, cutoff, 1e-12),
        theoretical_moment(2, 2, cutoff, 1e-12),
        theoretical_moment(2, 3, cutoff, 1e-12),
    ) else {
        return outcome(false, "moment evaluation failed".into());
    };
    let z = |s| zeta(s, 1e-17);
    let second = z(2) * z(2) * z(3) / z(4);
    let third = l2_third_moment_product(cutoff);
    let emp = sieve_b(2, NMAX, &SieveConfig::default())
        .ok()
        .and_then(|t| empirical_moment(&t, 2, NMAX).ok())
        .unwrap_or(f64::NAN);
    let factors = l3_second_moment_factors(&abundancy_core::arith::primes_up_to(1000));
    let l3_ok = factors
        .iter()
        .all(|f| (f.local - f.quadratic).abs() <= 1e-12 * f.local && f.linear > f.local);
    let gaps = [
        (m1.theoretical - z(2)).abs(),
        (m2.theoretical - second).abs(),
        (m3.theoretical - third).abs(),
        (emp - m2.theoretical).abs(),
    ];
    let pass =
        gaps[0] <= m1.tail_bound && gaps[1] <= 1e-6 && gaps[2] <= 1e-6 && gaps[3] <= 1e-2 && l3_ok;
    outcome(
        pass,
        format!(
            "m1 gap {:.1e} (bound {:.1e}), m2 gap {:.1e}, m3 gap {:.1e}, empirical gap {:.1e}, l=3 factor shape {}",
            gaps[0],
            m1.tail_bound,
            gaps[1],
            gaps[2],
            gaps[3],
            if l3_ok { "ok" } else { "off" }
        ),
    )
}

fn criterion_8() -> Outcome {
    let p = partition_numbers(200);
    let Ok(table) = sieve_b(2, 200, &SieveConfig::default()) else {
        return outcome(false, "table failed".into());
    };
    let one = ExactRational::from_integer(1.into());
    let exact = (0..=200)
        .all(|n| h_value(&table, n, &one) == ExactRational::from_integer(p[n].clone().into()));
    let gaps: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&n| hr_ratio(n, 1.0).map_or(f64::NAN, |r| (r - 1.0).abs()))
        .collect();
    let pass = exact && gaps[0] > gaps[1] && gaps[1] > gaps[2];
    outcome(
        pass,
        format!(
            "H(1) = p(n) for n <= 200: {exact}, |ratio - 1| = {:.3e}, {:.3e}, {:.3e}",
            gaps[0], gaps[1], gaps[2]
        ),
    )
}

fn criterion_9() -> Outcome {
    let trunc = default_truncation(2, 5, 0.3);
    let err = |m| cauchy_check(2, 5, 2, 0.3, m, trunc).map_or(f64::NAN, |c| c.abs_err);
    let fine = err(2048);
    let coarse: Vec<f64> = [4, 8, 16, 32].into_iter().map(err).collect();
    let shrinks = coarse.windows(2).all(|w| w[1] < w[0]) && fine <= coarse[3];
    outcome(
        fine <= 1e-8 && shrinks,
        format!(
            "M = 2048 error {fine:.1e}; M = 4, 8, 16, 32 errors {:.1e}, {:.1e}, {:.1e}, {:.1e}",
            coarse[0], coarse[1], coarse[2], coarse[3]
        ),
    )
}

fn criterion_10(dir: &Path) -> Outcome {
    let (Ok((_, a)), Ok((_, b))) = (conjecture_run(dir, "_a"), conjecture_run(dir, "_b")) else {
        return outcome(false, "verify-conjecture failed".into());
    };
    let rows: Vec<&str> = a.lines().skip(1).collect();
    let total: u64 = rows
        .iter()
        .map(|l| {
            l.rsplit(',')
                .next()
                .and_then(|c| c.parse::<u64>().ok())
                .unwrap_or(0)
        })
        .sum();
    let pass = rows.len() == 250 && total == NMAX && a == b;
    outcome(
        pass,
        format!(
            "{} bins, counts sum to {total}, reruns identical: {}",
            rows.len(),
            a == b
        ),
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<(&str, Check)> = vec![
        (
            "error mean reproduction",
            Box::new(|| criterion_1(dir.path())),
        ),
        ("mu constant", Box::new(criterion_2)),
        ("Cesaro means", Box::new(criterion_3)),
        ("power rule grid", Box::new(criterion_4)),
        ("oracle triangle", Box::new(criterion_5)),
        ("tori double counting", Box::new(criterion_6)),
        ("moments", Box::new(criterion_7)),
        ("partitions and asymptotics", Box::new(criterion_8)),
        ("Cauchy contour", Box::new(criterion_9)),
        ("histogram artifact", Box::new(|| criterion_10(dir.path()))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {name}: {verdict} ({})", i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
