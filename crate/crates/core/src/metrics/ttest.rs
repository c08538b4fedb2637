use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
}

/// Two-sided paired t-test on per-run differences `a_i − b_i`.
///
/// Zero-variance differences with a non-zero mean give `t = ±∞` and `p = 0`;
/// all-zero differences are [`Error::DegenerateTest`] (report as `p = 1`).
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("paired samples of length {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Shape("a paired t-test needs at least two pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateTest);
    }
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let df = d.len() - 1;
    // exact zero variance (or variance lost to rounding of a constant shift)
    if var <= (mean.abs() * 1e-12).powi(2) {
        return Ok(TTest {
            t: f64::INFINITY.copysign(mean),
            p: 0.0,
            df,
        });
    }
    let t = mean / (var / n).sqrt();
    Ok(TTest {
        t,
        p: student_t_two_sided_p(t, df as f64),
        df,
    })
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5)
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7, n = 9
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized incomplete beta `I_x(a, b)` via Lentz's continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // the fraction converges fast for x < (a+1)/(a+b+2); otherwise use the symmetry
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_runs_are_degenerate() {
        assert!(matches!(paired_ttest(&[0.7, 0.71, 0.72], &[0.7, 0.71, 0.72]), Err(Error::DegenerateTest)));
    }

    #[test]
    fn constant_shift_has_vanishing_p() {
        let b = [0.70, 0.71, 0.69, 0.72, 0.705];
        let a: Vec<f64> = b.iter().map(|x| x + 0.01).collect();
        let r = paired_ttest(&a, &b).unwrap();
        assert!(r.p < 1e-12 && r.t > 0.0);
    }

    #[test]
    fn closed_forms_for_small_df() {
        // df = 1 is Cauchy: p = 1 − 2·atan(|t|)/π
        for t in [0.3, 1.0, 4.0] {
            let exact = 1.0 - 2.0 * f64::atan(t) / std::f64::consts::PI;
            assert!((student_t_two_sided_p(t, 1.0) - exact).abs() < 1e-13);
        }
        // df = 2: p = 1 − |t|/sqrt(2 + t²)
        for t in [0.5f64, 2.0, 9.0] {
            let exact = 1.0 - t / (2.0 + t * t).sqrt();
            assert!((student_t_two_sided_p(t, 2.0) - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn incomplete_beta_edges_and_symmetry() {
        assert_eq!(regularized_incomplete_beta(0.0, 2.0, 3.0), 0.0);
        assert_eq!(regularized_incomplete_beta(1.0, 2.0, 3.0), 1.0);
        let x = 0.37;
        let lhs = regularized_incomplete_beta(x, 2.5, 4.0);
        let rhs = 1.0 - regularized_incomplete_beta(1.0 - x, 4.0, 2.5);
        assert!((lhs - rhs).abs() < 1e-14);
        // I_x(1, b) = 1 − (1 − x)^b
        assert!((regularized_incomplete_beta(0.2, 1.0, 3.0) - (1.0 - 0.8f64.powi(3))).abs() < 1e-14);
    }
}
