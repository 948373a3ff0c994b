#![allow(dead_code, unused_imports)]

pub use pxlap::inequality::sample_positive_field as random_positive;

/// Symmetric positive solution of `-u'' = F(u)` on `(0, 1)`, `u(0) = u(1) = 0`,
/// sampled at `x_k = k/n`: RK4 from `x = 1/2` with `u' = 0`, bisection on the
/// centre value so that `u(1) = 0`.
pub fn shoot(f: impl Fn(f64) -> f64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    assert!(n.is_multiple_of(2));
    let sub = 64;
    let steps = n / 2 * sub;
    let h = 0.5 / steps as f64;
    let rhs = |u: f64| -f(u.max(0.0));
    let run = |a: f64, record: bool| -> (f64, Vec<f64>) {
        let (mut u, mut v) = (a, 0.0);
        let mut out = vec![a];
        for i in 0..steps {
            let (k1u, k1v) = (v, rhs(u));
            let (k2u, k2v) = (v + 0.5 * h * k1v, rhs(u + 0.5 * h * k1u));
            let (k3u, k3v) = (v + 0.5 * h * k2v, rhs(u + 0.5 * h * k2u));
            let (k4u, k4v) = (v + h * k3v, rhs(u + h * k3u));
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            if record && (i + 1) % sub == 0 {
                out.push(u);
            }
        }
        (u, out)
    };
    let (mut lo, mut hi) = (lo, hi);
    assert!(run(lo, false).0 < 0.0 && run(hi, false).0 > 0.0, "bracket does not straddle");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if run(mid, false).0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let half = run(0.5 * (lo + hi), true).1;
    // half[j] = u(1/2 + j/n)
    (0..=n)
        .map(|k| {
            let j = (k as isize - (n / 2) as isize).unsigned_abs();
            if j == n / 2 {
                0.0
            } else {
                half[j]
            }
        })
        .collect()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
