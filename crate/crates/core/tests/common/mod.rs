//! Independent reference computations shared by the integration tests.
#![allow(dead_code, clippy::excessive_precision, clippy::too_many_arguments)]

/// Direct linear-domain estimates for a column of small log-likelihoods.
#[derive(Debug, Clone, Copy)]
pub struct Naive {
    pub log_mu: f64,
    pub mu_log: f64,
    pub sigma2_log: f64,
    pub log_sigma2: f64,
    pub wapdi: f64,
    pub pdi_log: f64,
    pub waic_term: f64,
}

pub fn naive(column: &[f64]) -> Naive {
    let s = column.len() as f64;
    let lik: Vec<f64> = column.iter().map(|l| l.exp()).collect();
    let mu = lik.iter().sum::<f64>() / s;
    let sigma2 = lik.iter().map(|p| (p - mu) * (p - mu)).sum::<f64>() / (s - 1.0);
    let mu_log = column.iter().sum::<f64>() / s;
    let sigma2_log = column.iter().map(|l| (l - mu_log) * (l - mu_log)).sum::<f64>() / (s - 1.0);
    Naive {
        log_mu: mu.ln(),
        mu_log,
        sigma2_log,
        log_sigma2: sigma2.ln(),
        wapdi: sigma2_log / mu.ln(),
        pdi_log: (sigma2 / mu).ln(),
        waic_term: -mu.ln() + sigma2_log,
    }
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs()
    }
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature over `[a, b]` to relative tolerance `rel`.
/// The range is first split into 64 panels so narrow peaks are not missed.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel: f64) -> f64 {
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    let panels: Vec<(f64, f64, f64, f64, f64, f64)> = (0..pieces)
        .map(|i| {
            let (lo, hi) = (a + h * i as f64, a + h * (i + 1) as f64);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            (lo, hi, fa, fm, fb, simpson(lo, hi, fa, fm, fb))
        })
        .collect();
    let scale = panels.iter().map(|p| p.5).sum::<f64>().abs();
    let tol = rel * scale / pieces as f64;
    panels.iter().map(|&(lo, hi, fa, fm, fb, whole)| adaptive(&f, lo, hi, fa, fm, fb, whole, tol, 24)).sum()
}

/// Lanczos approximation (g = 7, n = 9), accurate to ~1e-15 relative.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Shape/rate gamma density, written out directly.
pub fn gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x).exp()
}

/// Standard error of the mean of a correlated series by non-overlapping
/// batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> =
        (0..batches).map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

/// Delta-method standard error of `log((1/S) sum exp(l_s))` for i.i.d. draws.
pub fn log_mean_exp_se(column: &[f64]) -> f64 {
    let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = column.iter().map(|l| (l - max).exp()).collect();
    let s = w.len() as f64;
    let m = w.iter().sum::<f64>() / s;
    let sd = (w.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (s - 1.0)).sqrt();
    sd / (s.sqrt() * m)
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
