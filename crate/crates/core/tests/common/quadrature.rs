//! Adaptive Simpson quadrature of the Beta density.

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(f, a, b, fa, fm, fb, whole, eps, 60)
}

/// `I_x(a, b)` as a ratio of two integrals of the unnormalized density,
/// scaled by its value at the mode so both pieces are O(1).
pub fn quad_inc_beta(x: f64, a: f64, b: f64) -> f64 {
    let mode = if a + b > 2.0 { (a - 1.0) / (a + b - 2.0) } else { 0.5 };
    let log_peak = (a - 1.0) * mode.max(1e-300).ln() + (b - 1.0) * (1.0 - mode).max(1e-300).ln();
    let dens = move |t: f64| {
        if t <= 0.0 || t >= 1.0 {
            let edge = if t <= 0.0 { a } else { b };
            return if edge == 1.0 { (-log_peak).exp() } else { 0.0 };
        }
        ((a - 1.0) * t.ln() + (b - 1.0) * (-t).ln_1p() - log_peak).exp()
    };
    // split at the mode too so the peak is resolved on both sides
    let mut cuts = vec![0.0, x, 1.0];
    if mode > 0.0 && mode < 1.0 {
        cuts.push(mode);
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut lower = 0.0;
    let mut upper = 0.0;
    for w in cuts.windows(2) {
        let piece = integrate(&dens, w[0], w[1], 1e-15);
        if w[1] <= x {
            lower += piece;
        } else {
            upper += piece;
        }
    }
    lower / (lower + upper)
}
