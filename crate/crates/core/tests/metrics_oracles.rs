mod common;

use common::{pairwise_auc, random_auc_instance};
use fedud::metrics::*;
use fedud::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn rank_auc_equals_pairwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..300 {
        let (s, y) = random_auc_instance(&mut rng);
        assert!((auc(&s, &y).unwrap() - pairwise_auc(&s, &y)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auc_invariant_under_monotone_maps(
        data in proptest::collection::vec((-5.0f64..5.0, any::<bool>()), 2..200),
        a in 0.1f64..3.0, b in -2.0f64..2.0,
    ) {
        let s: Vec<f64> = data.iter().map(|d| d.0).collect();
        let y: Vec<f64> = data.iter().map(|d| f64::from(u8::from(d.1))).collect();
        prop_assume!(y.iter().any(|&v| v > 0.5) && y.iter().any(|&v| v < 0.5));
        let mapped: Vec<f64> = s.iter().map(|v| (a * v + b).tanh() + v.powi(3)).collect();
        prop_assert!((auc(&s, &y).unwrap() - auc(&mapped, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn auc_complement_without_ties(
        data in proptest::collection::btree_map(-1_000_000i64..1_000_000, any::<bool>(), 2..200),
    ) {
        let s: Vec<f64> = data.keys().map(|&k| k as f64).collect();
        let y: Vec<f64> = data.values().map(|&v| f64::from(u8::from(v))).collect();
        prop_assume!(y.iter().any(|&v| v > 0.5) && y.iter().any(|&v| v < 0.5));
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((auc(&neg, &y).unwrap() - (1.0 - auc(&s, &y).unwrap())).abs() < 1e-12);
    }

    #[test]
    fn logloss_matches_direct_sum(data in proptest::collection::vec((0.0f64..1.0, any::<bool>()), 1..100)) {
        let s: Vec<f64> = data.iter().map(|d| d.0).collect();
        let y: Vec<f64> = data.iter().map(|d| f64::from(u8::from(d.1))).collect();
        let direct = s.iter().zip(&y).map(|(&p, &t)| {
            let p = p.clamp(1e-7, 1.0 - 1e-7);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        }).sum::<f64>() / s.len() as f64;
        prop_assert!((logloss(&s, &y).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn slice_counts_add_up(rows in proptest::collection::vec((0.0f64..1.0, any::<bool>(), any::<bool>()), 1..100)) {
        let preds = PredictionSet { rows: rows.iter().enumerate().map(|(i, r)| Prediction {
            key: format!("k{i}"), score: r.0, label: f64::from(u8::from(r.1)),
            slice: if r.2 { Slice::Aligned } else { Slice::Unaligned },
        }).collect() };
        let rep = slice_report(&preds).unwrap();
        prop_assert_eq!(rep.slices.aligned.n + rep.slices.unaligned.n, rep.slices.overall.n);
        prop_assert_eq!(rep.slices.aligned.n_pos + rep.slices.unaligned.n_pos, rep.slices.overall.n_pos);
    }
}

#[test]
fn logloss_is_minimized_at_the_base_rate() {
    let y: Vec<f64> = (0..37).map(|i| f64::from(u8::from(i % 5 == 0))).collect();
    let rate = y.iter().sum::<f64>() / y.len() as f64;
    let f = |c: f64| logloss(&vec![c; y.len()], &y).unwrap();
    let (mut lo, mut hi) = (1e-6, 1.0 - 1e-6);
    for _ in 0..200 {
        let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    assert!(((lo + hi) / 2.0 - rate).abs() < 1e-6);
}

#[test]
fn logloss_reference_values() {
    assert!((logloss(&[0.5; 4], &[0.0, 1.0, 1.0, 0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    let ll = logloss(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
    assert!(ll > 0.0 && ll < 2e-7);
    assert!(matches!(logloss(&[0.5], &[1.0, 0.0]), Err(Error::Shape(_))));
}

#[test]
fn mixed_report_overall_equals_concatenated_slices() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rows: Vec<Prediction> = (0..300)
        .map(|i| Prediction {
            key: format!("k{i}"),
            label: f64::from(u8::from(rng.random_bool(0.3))),
            score: rng.random(),
            slice: if i % 3 == 0 { Slice::Unaligned } else { Slice::Aligned },
        })
        .collect();
    let preds = PredictionSet { rows };
    let rep = slice_report(&preds).unwrap();
    let (mut s, mut y) = (Vec::new(), Vec::new());
    for sl in [Slice::Aligned, Slice::Unaligned] {
        for p in preds.slice(sl) {
            s.push(p.score);
            y.push(p.label);
        }
    }
    assert!((rep.slices.overall.auc.unwrap() - auc(&s, &y).unwrap()).abs() < 1e-12);
}

#[test]
fn prediction_csv_round_trips() {
    let preds = PredictionSet {
        rows: vec![
            Prediction { key: "a".into(), label: 1.0, score: 0.123456789012345, slice: Slice::Aligned },
            Prediction { key: "b".into(), label: 0.0, score: 1e-9, slice: Slice::Unaligned },
        ],
    };
    let f = tempfile::NamedTempFile::new().unwrap();
    preds.write_csv(f.path()).unwrap();
    assert_eq!(PredictionSet::read_csv(f.path()).unwrap(), preds);
}

/// Density of Student's t with 7 degrees of freedom:
/// Γ(4) / (√(7π) Γ(7/2)) = 16 / (5π√7).
fn t7_pdf(x: f64) -> f64 {
    16.0 / (5.0 * std::f64::consts::PI * 7f64.sqrt()) * (1.0 + x * x / 7.0).powi(-4)
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = (a + b) / 2.0;
    let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f((a + b) / 2.0), f(b));
    simpson(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), 1e-14, 50)
}

#[test]
fn paired_ttest_matches_numerical_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let a: Vec<f64> = (0..8).map(|_| rng.random_range(0.7..0.8)).collect();
        let b: Vec<f64> = a.iter().map(|x| x - rng.random_range(-0.01..0.02)).collect();
        let got = paired_ttest(&a, &b).unwrap();

        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let mean = d.iter().sum::<f64>() / 8.0;
        let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 7.0).sqrt();
        let t = mean / (sd / 8f64.sqrt());
        let p = 1.0 - 2.0 * integrate(&t7_pdf, 0.0, t.abs());
        assert_eq!(got.df, 7);
        assert!((got.t - t).abs() < 1e-8, "t {} vs {t}", got.t);
        assert!((got.p - p).abs() < 1e-8, "p {} vs {p}", got.p);
    }
}

#[test]
fn ttest_degenerate_cases() {
    let a = [0.7, 0.71, 0.72, 0.73, 0.74];
    assert!(matches!(paired_ttest(&a, &a), Err(Error::DegenerateTest)));
    let b: Vec<f64> = a.iter().map(|x| x - 0.01).collect();
    assert!(paired_ttest(&a, &b).unwrap().p < 1e-12);
}
