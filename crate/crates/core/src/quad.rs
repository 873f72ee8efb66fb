//! Adaptive Simpson quadrature.

const MAX_DEPTH: u32 = 48;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    adapt(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

/// Integrates over `[a, b]` after splitting at every breakpoint inside it,
/// so kinks and jumps of `f` sit on panel boundaries.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: f64,
) -> f64 {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let pieces = cuts.len() + 1;
    let mut lo = a;
    let mut total = 0.0;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        total += integrate(f, lo, hi, tol / pieces as f64);
        lo = hi;
    }
    total
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
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
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adapt(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adapt(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}
