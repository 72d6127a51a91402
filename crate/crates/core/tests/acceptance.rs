//! Acceptance run: one PASS/FAIL line per criterion, followed by indented
//! details. Exits non-zero if any criterion fails.
//!
//! Pass `--slow` (or set `CARMICHAEL_SLOW=1`) to add the optional 10^8 counts
//! and sums.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use carmichael_core::estimate::{
    dubner_chain_constants_u44, estimate_by_integral, estimate_by_sum_at, singular_constant, Boundary,
};
use carmichael_core::forms::{construct_theorem_form, family_ukl, family_wk, verify_universal, CoefficientTuple};
use carmichael_core::korselt::{carmichael_oracle, korselt_check};
use carmichael_core::primality::{build_wheel, default_wheel_primes, is_prime_64};
use carmichael_core::search::{
    count_at_checkpoints, load_checkpoint, save_checkpoint, scan_into, search_range, SearchCheckpoint,
    SearchOptions,
};
use carmichael_core::UniversalForm;
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CUTOFF: u64 = 10_000_000;

struct Table {
    name: &'static str,
    form: UniversalForm,
    /// `N(10^j)` for j = 3..=9.
    actual: [u64; 7],
    /// Printed `E(10^j)` for j = 3..=9.
    expected: [i64; 7],
}

fn tables() -> Vec<Table> {
    vec![
        Table {
            name: "U_{4,4}",
            form: family_ukl(4, 4).unwrap(),
            actual: [2, 17, 87, 487, 2959, 18960, 126997],
            expected: [2, 16, 90, 506, 3021, 19143, 127204],
        },
        Table {
            name: "U_{5,5}",
            form: family_ukl(5, 5).unwrap(),
            actual: [2, 5, 22, 107, 616, 3516, 22163],
            expected: [1, 2, 19, 105, 596, 3555, 22261],
        },
        Table {
            name: "W_4",
            form: family_wk(4).unwrap(),
            actual: [10, 33, 149, 824, 5116, 32077, 213075],
            expected: [7, 30, 155, 862, 5108, 32170, 212716],
        },
    ]
}

struct Report {
    id: &'static str,
    title: &'static str,
    pass: bool,
    details: Vec<String>,
}

impl Report {
    fn new(id: &'static str, title: &'static str) -> Self {
        Self { id, title, pass: true, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.details.push(format!("{} {line}", if ok { "ok  " } else { "MISS" }));
    }

    fn note(&mut self, line: String) {
        self.details.push(format!("     {line}"));
    }

    fn print(&self) {
        println!("criterion {} ({}): {}", self.id, self.title, if self.pass { "PASS" } else { "FAIL" });
        for d in &self.details {
            println!("    {d}");
        }
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

fn wheel_opts(wheel: &carmichael_core::primality::ResidueWheel) -> SearchOptions<'_> {
    SearchOptions { wheel: Some(wheel), threads: 0, ..SearchOptions::default() }
}

/// Criteria 1 to 3: exact counts at 10^3..10^6 in under a minute. For the
/// first table the 10^6 checkpoint is saved, reloaded and extended to 10^7.
fn actual_counts(id: &'static str, t: &Table, extend: bool, slow: bool) -> Report {
    let mut r = Report::new(id, "actual counts");
    r.title = match id {
        "1" => "U_{4,4} actual counts",
        "2" => "U_{5,5} actual counts",
        _ => "W_4 actual counts",
    };
    let wheel = build_wheel(&t.form, &default_wheel_primes(&t.form)).unwrap();
    let start = Instant::now();
    let (table, cp) = count_at_checkpoints(&t.form, &[3, 4, 5, 6], None, &wheel_opts(&wheel), |_| Ok(())).unwrap();
    let elapsed = start.elapsed();
    for (row, want) in table.rows.iter().zip(&t.actual) {
        let got = row.actual.unwrap();
        r.check(got == *want, format!("N({}) = {got}, expected {want}", row.m));
    }
    r.check(elapsed < Duration::from_secs(60), format!("10^3..10^6 took {}", secs(elapsed)));
    if slow {
        let start = Instant::now();
        let (table, _) = count_at_checkpoints(&t.form, &[8], Some(cp.clone()), &wheel_opts(&wheel), |_| Ok(())).unwrap();
        let got = table.rows[0].actual.unwrap();
        r.check(
            got == t.actual[5],
            format!("optional: N(10^8) = {got}, expected {} ({})", t.actual[5], secs(start.elapsed())),
        );
    }
    if extend {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u44.ckpt");
        save_checkpoint(&cp, &path).unwrap();
        let resumed = load_checkpoint(&path).unwrap();
        let start = Instant::now();
        let (table, _) =
            count_at_checkpoints(&t.form, &[7], Some(resumed), &wheel_opts(&wheel), |_| Ok(())).unwrap();
        let got = table.rows[0].actual.unwrap();
        r.check(
            got == t.actual[4],
            format!("resumed from 10^6: N(10^7) = {got}, expected {} ({})", t.actual[4], secs(start.elapsed())),
        );
    }
    r
}

fn constants() -> Report {
    let mut r = Report::new("4", "correction constants");
    let chain = dubner_chain_constants_u44(CUTOFF).unwrap();
    for (name, got, want) in [("C_r", chain.c_r, 3.520865), ("C_s", chain.c_s, 1.623609), ("C_t", chain.c_t, 2.904708)] {
        let diff = got - want;
        r.check(diff.abs() <= 2e-5, format!("{name} = {got:.7}, expected {want} +- 2e-5 (diff {diff:+.2e})"));
    }
    for (t, want, tol) in tables().iter().zip([41.511967, 263.4285, 66.419105]).zip([2e-5, 1e-3, 1e-3]).map(|((t, w), tol)| (t, w, tol)) {
        let c = singular_constant(&t.form, CUTOFF).unwrap();
        let diff = c.value - want;
        r.check(
            diff.abs() <= tol,
            format!(
                "{} constant = {:.6}, expected {want} +- {tol:e} (diff {diff:+.2e}, tail bound {:.1e})",
                t.name,
                c.value,
                c.abs_tail_bound()
            ),
        );
    }
    let product = chain.product();
    r.note(format!(
        "2.5 * C_r * C_s * C_t = {product:.6}; with the constants rounded to six places: {:.6}",
        2.5 * 3.520865 * 1.623609 * 2.904708
    ));
    let coarse = dubner_chain_constants_u44(100_000).unwrap();
    r.note(format!(
        "at primes <= 10^5 the chain constants are {:.6}, {:.6}, {:.6}",
        coarse.c_r, coarse.c_s, coarse.c_t
    ));
    r
}

fn estimates(slow: bool) -> Report {
    let mut r = Report::new("5", "expected counts");
    let decades: Vec<u64> = (3..=7).map(|j| 10u64.pow(j)).collect();
    for t in tables() {
        let c = singular_constant(&t.form, CUTOFF).unwrap().value;
        let rows = estimate_by_sum_at(&t.form, c, &decades).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let want = t.expected[i];
            let tol = (0.01 * want as f64).max(1.0);
            let ok = ((row.rounded - want) as f64).abs() <= tol;
            r.check(ok, format!("{} sum E({}) = {:.2} -> {}, printed {want} +- {tol:.0}", t.name, row.m, row.e, row.rounded));
        }
        for row in rows.iter().filter(|row| row.m >= 100_000) {
            let full = estimate_by_integral(&t.form, c, row.m, Boundary::Full).unwrap().e;
            let upper = estimate_by_integral(&t.form, c, row.m, Boundary::UpperOnly).unwrap().e;
            let rel = (full - row.e).abs() / row.e;
            r.check(
                rel <= 0.02,
                format!(
                    "{} integral E({}) = {full:.2} vs sum {:.2} ({:.2}% apart, limit 2%); upper-limit terms only: {upper:.2}",
                    t.name,
                    row.m,
                    row.e,
                    100.0 * rel
                ),
            );
        }
        let upper: Vec<String> = (3..=9)
            .map(|j| {
                let e = estimate_by_integral(&t.form, c, 10u64.pow(j), Boundary::UpperOnly).unwrap();
                format!("{}/{}", e.rounded, t.expected[j as usize - 3])
            })
            .collect();
        r.note(format!("{} upper-limit closed form vs printed, 10^3..10^9: {}", t.name, upper.join(" ")));
        if slow {
            let start = Instant::now();
            let row = estimate_by_sum_at(&t.form, c, &[100_000_000]).unwrap()[0];
            let want = t.expected[5];
            let tol = (0.01 * want as f64).max(1.0);
            r.check(
                ((row.rounded - want) as f64).abs() <= tol,
                format!("{} sum E(10^8) = {:.2}, printed {want} +- {tol:.0} ({})", t.name, row.e, secs(start.elapsed())),
            );
        }
    }
    r
}

fn verification() -> Report {
    let mut r = Report::new("6", "theorem verification");
    let start = Instant::now();
    let example: [(&[u64], &[u64]); 6] = [
        (&[2, 3, 10, 15], &[60, 90, 300, 450, 900]),
        (&[2, 12, 28, 42], &[168, 1008, 2352, 3528, 7056]),
        (&[3, 22, 30, 110, 165], &[990, 7260, 9900, 36300, 54450, 108900]),
        (&[6, 14, 15, 70, 105], &[1260, 2940, 3150, 14700, 22050, 44100]),
        (&[9, 12, 14, 28, 63, 126], &[2268, 3024, 3528, 7056, 15876, 31752, 63504]),
        (&[15, 20, 21, 70, 84, 210], &[6300, 8400, 8820, 29400, 35280, 88200, 176400]),
    ];
    for (tuple, printed) in example {
        let a = match CoefficientTuple::new(tuple) {
            Ok(a) => a,
            Err(e) => {
                r.note(format!("{tuple:?} rejected as printed ({e}); using the gcd-normalized tuple"));
                CoefficientTuple::normalized(tuple).unwrap()
            }
        };
        for k in [a.r(), a.r() + 1] {
            let form = construct_theorem_form(&a, k).unwrap();
            let report = verify_universal(&form).unwrap();
            r.check(report.is_verified(), format!("{form}: {report}"));
        }
        let literal = UniversalForm::custom(printed, 1).unwrap();
        let constructed = construct_theorem_form(&a, a.r() + 1).unwrap();
        if a.values() == tuple {
            r.check(constructed.alphas() == printed, format!("slopes for {tuple:?}, k = {} match the printed form", a.r() + 1));
        } else {
            let report = verify_universal(&literal).unwrap();
            r.check(report.is_verified(), format!("printed form {printed:?} as a custom form: {report}"));
        }
    }
    let mut failures = Vec::new();
    let mut count = 0;
    for k in 3..=8 {
        for l in 3..=k {
            count += 1;
            let f = family_ukl(k, l).unwrap();
            if !verify_universal(&f).unwrap().is_verified() {
                failures.push(f.to_string());
            }
        }
        count += 1;
        let f = family_wk(k).unwrap();
        if !verify_universal(&f).unwrap().is_verified() {
            failures.push(f.to_string());
        }
    }
    r.check(failures.is_empty(), format!("{count} family members U_{{k,l}} and W_k verified, failures: {failures:?}"));
    let elapsed = start.elapsed();
    r.check(elapsed < Duration::from_secs(30), format!("took {}", secs(elapsed)));
    r
}

fn factorize(mut n: u64) -> Vec<u64> {
    let mut f = Vec::new();
    let mut d = 2;
    while d * d <= n {
        while n % d == 0 {
            f.push(d);
            n /= d;
        }
        d += 1;
    }
    if n > 1 {
        f.push(n);
    }
    f
}

fn korselt_equivalence() -> Report {
    let mut r = Report::new("7", "Korselt oracle equivalence");
    let start = Instant::now();
    let mut disagreements = Vec::new();
    let mut carmichael = Vec::new();
    let mut checked = 0;
    for n in (9..=100_000u64).step_by(2) {
        let factors = factorize(n);
        if factors.len() < 2 {
            continue;
        }
        checked += 1;
        let big: Vec<BigInt> = factors.iter().map(|&p| BigInt::from(p)).collect();
        let korselt = korselt_check(&BigInt::from(n), &big).unwrap().is_accepted();
        let oracle = carmichael_oracle(n).unwrap();
        if korselt != oracle {
            disagreements.push(n);
        }
        if oracle {
            carmichael.push(n);
        }
    }
    r.check(
        disagreements.is_empty(),
        format!("{checked} odd composites <= 10^5, disagreements: {disagreements:?}"),
    );
    r.note(format!("{} Carmichael numbers found, first {:?}", carmichael.len(), &carmichael[..5]));
    let elapsed = start.elapsed();
    r.check(elapsed < Duration::from_secs(120), format!("took {}", secs(elapsed)));
    r
}

fn properties() -> Report {
    let mut r = Report::new("8", "property suites");
    let forms: Vec<UniversalForm> = tables().into_iter().map(|t| t.form).collect();

    for form in &forms {
        let wheel = build_wheel(form, &default_wheel_primes(form)).unwrap();
        let base = search_range(form, 1, 100_000, &SearchOptions::default()).unwrap();
        let same = [1, 2, 8].iter().all(|&threads| {
            let opts = SearchOptions { wheel: Some(&wheel), threads, chunk_size: 8_192, force: false };
            search_range(form, 1, 100_000, &opts).unwrap() == base
        });
        r.check(same, format!("{form}: identical hits on [1, 10^5] with 1/2/8 workers ({} hits)", base.len()));
    }

    let mut wheel_forms = forms.clone();
    wheel_forms.extend((3..=8).map(|k| family_ukl(k, 3).unwrap()));
    for form in &wheel_forms {
        let wheel = build_wheel(form, &default_wheel_primes(form)).unwrap();
        let off = search_range(form, 1, 10_000, &SearchOptions::default()).unwrap();
        let on = search_range(form, 1, 10_000, &SearchOptions { wheel: Some(&wheel), ..SearchOptions::default() }).unwrap();
        r.check(on == off, format!("{form}: wheel on/off agree at M <= 10^4 ({} hits)", on.len()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(20_241_015);
    let mut resume_ok = true;
    let mut splits = Vec::new();
    for form in &forms {
        let opts = SearchOptions { chunk_size: 5_000, ..SearchOptions::default() };
        let mut whole = SearchCheckpoint::new(form).unwrap();
        scan_into(form, &mut whole, 200_000, &opts, &mut |_| Ok(())).unwrap();
        for _ in 0..8 {
            let y = rng.gen_range(1..200_000u64);
            splits.push(y);
            let mut part = SearchCheckpoint::new(form).unwrap();
            scan_into(form, &mut part, y, &opts, &mut |_| Ok(())).unwrap();
            let mut part = SearchCheckpoint::from_text(&part.to_text()).unwrap();
            scan_into(form, &mut part, 200_000, &opts, &mut |_| Ok(())).unwrap();
            resume_ok &= part == whole;
        }
    }
    r.check(resume_ok, format!("resume at {} random split points equals a single run to 2*10^5", splits.len()));

    let mut hits = 0;
    let mut certified = 0;
    for form in &forms {
        let wheel = build_wheel(form, &default_wheel_primes(form)).unwrap();
        for h in search_range(form, 1, 1_000_000, &wheel_opts(&wheel)).unwrap() {
            hits += 1;
            let own = h.certificate.as_ref().is_some_and(|c| c.n == h.n);
            if own && korselt_check(&h.n, &h.factors).unwrap().is_accepted() {
                certified += 1;
            }
        }
    }
    r.check(hits == certified, format!("{certified}/{hits} hits up to 10^6 carry an accepted certificate"));

    let start = Instant::now();
    let mismatches: Vec<u64> = (0..=1_000_000u64)
        .filter(|&n| is_prime_64(n) != (n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)))
        .collect();
    r.check(
        mismatches.is_empty(),
        format!("is_prime_64 agrees with trial division on 0..=10^6 ({}), mismatches {mismatches:?}", secs(start.elapsed())),
    );
    r
}

fn main() -> ExitCode {
    let slow = std::env::args().any(|a| a == "--slow") || std::env::var_os("CARMICHAEL_SLOW").is_some();
    let t = tables();
    let reports = [
        actual_counts("1", &t[0], true, slow),
        actual_counts("2", &t[1], false, slow),
        actual_counts("3", &t[2], false, slow),
        constants(),
        estimates(slow),
        verification(),
        korselt_equivalence(),
        properties(),
    ];
    for r in &reports {
        r.print();
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!("acceptance: {} passed, {failed} failed", reports.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
