use crate::scalar::Real;

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T, max_depth: u32) -> T {
    if !(b > a) {
        return T::zero();
    }
    let half = T::lit(0.5);
    let m = (a + b) * half;
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: u32) -> T {
    let half = T::lit(0.5);
    let m = (a + b) * half;
    let lm = (a + m) * half;
    let rm = (m + b) * half;
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::lit(15.0) * tol {
        return left + right + delta / T::lit(15.0);
    }
    recurse(f, a, m, fa, flm, fm, left, tol * half, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, tol * half, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_exponential() {
        let v = adaptive_simpson(&|x: f64| (-x).exp(), 0.0, 3.0, 1e-13, 40);
        assert!((v - (1.0 - (-3.0f64).exp())).abs() < 1e-12);
    }
}
