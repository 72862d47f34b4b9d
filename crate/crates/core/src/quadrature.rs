//! Quadrature rules used by the decoherence integrals.

use std::f64::consts::PI;

use num_complex::Complex;
use num_traits::Zero;

use crate::scalar::Real;

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    /// Nodes are found by Newton iteration on the Legendre recurrence in `f64`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut nodes = vec![0.0f64; n];
        let mut weights = vec![0.0f64; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre {
            nodes: nodes.into_iter().map(T::lit).collect(),
            weights: weights.into_iter().map(T::lit).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrates `f` over `[a, b]` with a single panel.
    pub fn integrate<F>(&self, a: T, b: T, mut f: F) -> Complex<T>
    where
        F: FnMut(T) -> Complex<T>,
    {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        let mut acc = Complex::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += f(mid + half * *x) * *w;
        }
        acc * half
    }

    /// Composite rule with panels no longer than `max_panel`.
    pub fn integrate_composite<F>(&self, a: T, b: T, max_panel: T, mut f: F) -> Complex<T>
    where
        F: FnMut(T) -> Complex<T>,
    {
        if b <= a {
            return Complex::zero();
        }
        let panels = ((b - a) / max_panel).ceil().max(T::one());
        let n = num_traits::ToPrimitive::to_usize(&panels).unwrap_or(1).max(1);
        let h = (b - a) / T::of_usize(n);
        let mut acc = Complex::zero();
        for k in 0..n {
            let lo = a + h * T::of_usize(k);
            let hi = if k + 1 == n { b } else { lo + h };
            acc += self.integrate(lo, hi, &mut f);
        }
        acc
    }

    /// Mapped nodes and weights of one panel, for callers that batch evaluations.
    pub fn panel(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + half * *x, *w * half))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Sorted union of a uniform grid `lo + k h` (clipped to `[lo, hi]`), both
/// end points and any extra break points inside the interval. Points closer
/// than `1e-9 h` are merged.
pub fn merged_nodes<T: Real>(lo: T, hi: T, h: T, extra: &[T]) -> Vec<T> {
    let mut pts = Vec::new();
    pts.push(lo);
    let n = num_traits::ToPrimitive::to_usize(&((hi - lo) / h).floor()).unwrap_or(0);
    for k in 1..=n {
        let t = lo + h * T::of_usize(k);
        if t < hi {
            pts.push(t);
        }
    }
    pts.push(hi);
    pts.extend(extra.iter().copied().filter(|t| *t > lo && *t < hi));
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite nodes"));
    let tol = h * T::lit(1e-9);
    let mut out: Vec<T> = Vec::with_capacity(pts.len());
    for t in pts {
        match out.last() {
            Some(&last) if (t - last).abs() <= tol => {
                // keep exact break points over grid points
                if extra.iter().any(|e| *e == t) {
                    *out.last_mut().unwrap() = t;
                }
            }
            _ => out.push(t),
        }
    }
    if let Some(last) = out.last_mut() {
        *last = hi;
    }
    out
}

/// Simpson's rule on one segment given end values and the midpoint value.
#[inline]
pub fn simpson<T: Real>(h: T, left: Complex<T>, mid: Complex<T>, right: Complex<T>) -> Complex<T> {
    (left + mid * T::lit(4.0) + right) * (h / T::lit(6.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let gl = GaussLegendre::<f64>::new(6);
        // degree 11 is the limit for 6 points
        let got = gl.integrate(-1.0, 2.0, |x| Complex::new(x.powi(11) - 3.0 * x.powi(4), 0.0));
        let exact = (2f64.powi(12) - 1.0) / 12.0 - 3.0 * (2f64.powi(5) + 1.0) / 5.0;
        assert!((got.re - exact).abs() < 1e-10 * exact.abs());
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 8, 16] {
            let gl = GaussLegendre::<f64>::new(n);
            let s: f64 = gl.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "order {n}");
        }
    }

    #[test]
    fn composite_gaussian_integral() {
        let gl = GaussLegendre::<f64>::new(8);
        let got = gl.integrate_composite(-10.0, 10.0, 0.5, |x| Complex::new((-x * x).exp(), 0.0));
        assert!((got.re - PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn merged_nodes_keep_breaks() {
        let nodes = merged_nodes(0.0, 1.0, 0.25, &[0.3, 0.5, 1.5]);
        assert_eq!(nodes, vec![0.0, 0.25, 0.3, 0.5, 0.75, 1.0]);
    }
}
