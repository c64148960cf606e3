//! Small numerical kernels shared by the modules.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::factorial::ln_binomial;

/// Compensated (Neumaier) summation. Returns the sum and the sum of magnitudes.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(terms: I) -> (f64, f64) {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut abs = 0.0f64;
    for x in terms {
        abs += x.abs();
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    (sum + comp, abs)
}

/// Bracketed root of `f` on [lo, hi]: bisection with secant steps when they stay inside the bracket.
pub fn find_root<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64, ftol: f64) -> Option<f64> {
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if !flo.is_finite() || !fhi.is_finite() {
        return None;
    }
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for iter in 0..200 {
        let mid = 0.5 * (lo + hi);
        let sec = hi - fhi * (hi - lo) / (fhi - flo);
        // alternate bisection and secant so the bracket always shrinks
        let x = if iter % 2 == 1 && sec > lo && sec < hi { sec } else { mid };
        let fx = f(x);
        if !fx.is_finite() {
            return None;
        }
        if fx.abs() < ftol || (hi - lo) < xtol * (1.0 + x.abs()) {
            return Some(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Bisection on a monotone predicate: returns x in [lo, hi] where `pred` switches from `true` to `false`.
pub fn bisect_predicate<F: FnMut(f64) -> bool>(mut pred: F, mut lo: f64, mut hi: f64, rtol: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= rtol * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Physicists' Hermite polynomial H_n(x) by three-term recurrence.
pub fn hermite(n: usize, x: f64) -> f64 {
    let mut h0 = 1.0;
    if n == 0 {
        return h0;
    }
    let mut h1 = 2.0 * x;
    for k in 1..n {
        let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// Roots of H_n, ascending, from the symmetric Jacobi matrix.
pub fn hermite_roots(n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let mut roots: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().copied().collect();
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}

/// Largest root of H_n.
pub fn hermite_largest_root(n: usize) -> f64 {
    *hermite_roots(n).last().unwrap_or(&0.0)
}

/// Laguerre polynomial L_n(x) by recurrence.
pub fn laguerre(n: usize, x: f64) -> f64 {
    let mut l0 = 1.0;
    if n == 0 {
        return l0;
    }
    let mut l1 = 1.0 - x;
    for k in 1..n {
        let kf = k as f64;
        let l2 = ((2.0 * kf + 1.0 - x) * l1 - kf * l0) / (kf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

/// L_{n-1}(x), L_n(x), L_{n+1}(x) as mantissas sharing the scale e^{log_scale}.
fn laguerre_triple(n: usize, x: f64) -> (f64, f64, f64, f64) {
    let (mut prev, mut cur) = (0.0, 1.0);
    let mut log_scale = 0.0;
    for k in 0..=n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        if k == n {
            return (prev, cur, next, log_scale);
        }
        prev = cur;
        cur = next;
        let big = cur.abs().max(prev.abs());
        if big > 1e150 {
            prev /= big;
            cur /= big;
            log_scale += big.ln();
        }
    }
    unreachable!()
}

/// Gauss-Laguerre nodes and weights for the weight e^{-x} on [0, inf). Nodes from the Jacobi matrix
/// are polished by Newton steps and the weights use the closed form, so tiny weights keep their
/// relative accuracy.
pub fn gauss_laguerre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jac[(k, k)] = 2.0 * k as f64 + 1.0;
        if k + 1 < n {
            let b = k as f64 + 1.0;
            jac[(k, k + 1)] = b;
            jac[(k + 1, k)] = b;
        }
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    let nf = n as f64;
    let weights = nodes
        .iter_mut()
        .map(|x| {
            for _ in 0..3 {
                let (lm, l, _, _) = laguerre_triple(n, *x);
                let deriv = nf * (l - lm);
                if deriv != 0.0 {
                    *x -= *x * l / deriv;
                }
            }
            let (_, _, lp, log_scale) = laguerre_triple(n, *x);
            (x.ln() - 2.0 * (nf + 1.0).ln() - 2.0 * (lp.abs().ln() + log_scale)).exp()
        })
        .collect();
    (nodes, weights)
}

/// `n` points log-spaced between `lo` and `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Central difference with one Richardson step.
pub fn richardson_derivative<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
    let h2 = 0.5 * h;
    let d2 = (f(x + h2) - f(x - h2)) / (2.0 * h2);
    (4.0 * d2 - d1) / 3.0
}

/// Binomial coefficient as f64.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Binomial(m, t) probabilities for k = 0..=m.
pub fn binomial_pmf(m: usize, t: f64) -> Vec<f64> {
    let mut out = vec![0.0; m + 1];
    if t <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    if t >= 1.0 {
        out[m] = 1.0;
        return out;
    }
    let (lt, lq) = (t.ln(), (1.0 - t).ln());
    for (k, o) in out.iter_mut().enumerate() {
        *o = (ln_binomial(m as u64, k as u64) + k as f64 * lt + (m - k) as f64 * lq).exp();
    }
    out
}

/// Nelder-Mead minimization. Returns the best vertex and its value.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], step: f64, ftol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let dim = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = f(&x);
        simplex.push((x, v));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[dim].1);
        if (worst - best).abs() <= ftol * (best.abs() + ftol) {
            break;
        }
        let centroid: Vec<f64> = (0..dim).map(|j| simplex[..dim].iter().map(|p| p.0[j]).sum::<f64>() / dim as f64).collect();
        let towards = |c: f64| -> Vec<f64> { (0..dim).map(|j| centroid[j] + c * (simplex[dim].0[j] - centroid[j])).collect() };
        let xr = towards(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = towards(-2.0);
            let fe = f(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let xc = if fr < worst { towards(-0.5) } else { towards(0.5) };
            let fc = f(&xc);
            if fc < worst.min(fr) {
                simplex[dim] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    for j in 0..dim {
                        p.0[j] = x0[j] + 0.5 * (p.0[j] - x0[j]);
                    }
                    p.1 = f(&p.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}
