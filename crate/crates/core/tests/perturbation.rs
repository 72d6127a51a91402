//! Perturbing one slope of a verified form should usually break universality.
//! Every refutation must be backed by a real counterexample; perturbed forms
//! that still verify are printed rather than failed.

use carmichael_core::forms::{evaluate, family_ukl, family_wk, verify_universal, Verdict};
use num_bigint::BigInt;

#[test]
fn perturbed_slopes() {
    let mut survivors = Vec::new();
    let mut refuted = 0;
    let forms: Vec<_> = (3..=6)
        .flat_map(|k| (3..=k).map(move |l| family_ukl(k, l).unwrap()))
        .chain((3..=6).map(|k| family_wk(k).unwrap()))
        .collect();
    for form in forms {
        for i in 0..form.k() {
            let alpha = form.alphas()[i];
            for delta in [-2i64, -1, 1, 2] {
                let Some(a) = alpha.checked_add_signed(delta).filter(|&a| a > 0) else { continue };
                let Ok(p) = form.with_alpha(i, a) else { continue };
                let report = verify_universal(&p).unwrap();
                match report.verdict() {
                    Verdict::Verified => survivors.push(p.to_string()),
                    Verdict::Refuted { factor, m } => {
                        refuted += 1;
                        let n = evaluate(&p, m).unwrap().product;
                        let modulus = BigInt::from(p.scaled_alphas()[factor]) * m;
                        assert_ne!((n - 1u32) % modulus, BigInt::from(0), "{p} at M = {m}");
                    }
                    Verdict::Inconclusive => survivors.push(format!("{p} (inconclusive)")),
                }
            }
        }
    }
    for s in &survivors {
        println!("perturbed form still verifies: {s}");
    }
    println!("{refuted} perturbations refuted, {} survived", survivors.len());
    assert!(refuted > 0);
}
