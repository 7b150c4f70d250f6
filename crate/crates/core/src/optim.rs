//! One-dimensional maximization on a closed interval.

const GRID: usize = 256;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximum of `f` on `[lo, hi]` and its location.
///
/// Scans a uniform grid, then refines every local maximum of the grid with
/// golden-section search. When `df` is supplied, brackets where `df` changes
/// sign from positive to negative are bisected on the derivative instead.
pub fn maximize<F, D>(f: F, df: Option<D>, lo: f64, hi: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    assert!(hi >= lo, "empty interval");
    let step = (hi - lo) / GRID as f64;
    let xs: Vec<f64> = (0..=GRID).map(|k| lo + step * k as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();

    let mut best = (xs[0], ys[0]);
    let mut consider = |x: f64, y: f64| {
        if y > best.1 {
            best = (x, y);
        }
    };
    consider(xs[GRID], ys[GRID]);

    match &df {
        Some(df) => {
            let ds: Vec<f64> = xs.iter().map(|&x| df(x)).collect();
            for k in 0..GRID {
                if ds[k] > 0.0 && ds[k + 1] <= 0.0 {
                    let x = bisect_root(df, xs[k], xs[k + 1], tol);
                    consider(x, f(x));
                } else if ds[k] == 0.0 {
                    consider(xs[k], ys[k]);
                }
            }
        }
        None => {
            for k in 1..GRID {
                if ys[k] >= ys[k - 1] && ys[k] >= ys[k + 1] {
                    let x = golden(&f, xs[k - 1], xs[k + 1], tol);
                    consider(x, f(x));
                }
            }
        }
    }
    best
}

/// Root of `g` in `[a, b]` given `g(a) > 0 ≥ g(b)`.
pub fn bisect_root<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let mid = 0.5 * (a + b);
        if g(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub fn golden<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if b - a <= tol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Sign-change root of a continuous function on `[a, b]`.
pub fn bisect_sign_change<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let (mut ga, gb) = (g(a), g(b));
    if ga == 0.0 {
        return Some(a);
    }
    if gb == 0.0 {
        return Some(b);
    }
    if ga.signum() == gb.signum() {
        return None;
    }
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let mid = 0.5 * (a + b);
        let gm = g(mid);
        if gm == 0.0 {
            return Some(mid);
        }
        if gm.signum() == ga.signum() {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    const NONE: Option<fn(f64) -> f64> = None;

    #[test]
    fn interior_and_boundary_maxima() {
        let (x, y) = maximize(|x| -(x - 0.3).powi(2), Some(|x: f64| -2.0 * (x - 0.3)), -1.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-10 && y.abs() < 1e-20);
        let (x, _) = maximize(|x| x, NONE, -1.0, 1.0, 1e-12);
        assert_eq!(x, 1.0);
        let (x, _) = maximize(|x| -(x + 0.77).powi(2), NONE, -1.0, 1.0, 1e-12);
        assert!((x + 0.77).abs() < 1e-6);
    }

    #[test]
    fn picks_global_of_two_peaks() {
        let f = |x: f64| -(x * x - 0.5).powi(2) + 0.1 * x;
        let df = |x: f64| -4.0 * x * (x * x - 0.5) + 0.1;
        let (x, _) = maximize(f, Some(df), -1.0, 1.0, 1e-13);
        assert!(x > 0.0);
        let (xg, _) = maximize(f, NONE, -1.0, 1.0, 1e-13);
        assert!((x - xg).abs() < 1e-6);
    }

    #[test]
    fn sign_change() {
        let r = bisect_sign_change(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect_sign_change(|x| x * x + 1.0, 0.0, 2.0, 1e-14).is_none());
    }
}
