//! Gauss–Legendre rules, including a geometrically graded variant for
//! integrands with an integrable logarithmic singularity at one endpoint.

use crate::scalar::Scalar;

/// `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> GaussLegendre<T> {
    /// Nodes by Newton iteration on the three-term recurrence, computed in
    /// `f64` and converted.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0f64; n];
        let mut weights = vec![0.0f64; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
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
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self {
            nodes: nodes.into_iter().map(T::lit).collect(),
            weights: weights.into_iter().map(T::lit).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let half = (b - a) / T::lit(2.0);
        let mid = a + half;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, w * half))
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        self.mapped(a, b).fold(T::zero(), |acc, (x, w)| acc + w * f(x))
    }

    /// Integral of `f` over the interval between `singular` and `regular`,
    /// where `f` may blow up logarithmically at `singular`. Panels shrink
    /// geometrically by `ratio` towards the singular end, at most `levels`
    /// times, and each panel gets this rule.
    pub fn integrate_graded<F: FnMut(T) -> T>(
        &self,
        singular: T,
        regular: T,
        levels: usize,
        ratio: T,
        mut f: F,
    ) -> T {
        let mut acc = T::zero();
        let span = regular - singular;
        let floor = T::lit(512.0) * T::epsilon() * singular.abs();
        let mut outer = T::one();
        for _ in 0..levels {
            let inner = outer * ratio;
            if (span * inner).abs() <= floor {
                break;
            }
            let (p, q) = (singular + span * inner, singular + span * outer);
            acc += self.integrate(p, q, &mut f);
            outer = inner;
        }
        let last = singular + span * outer;
        if last != singular {
            acc += self.integrate(singular, last, &mut f);
        }
        if span < T::zero() {
            -acc
        } else {
            acc
        }
    }
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weights_sum_to_two() {
        for n in 1..=20 {
            let g = GaussLegendre::<f64>::new(n);
            let s: f64 = g.weights().iter().sum();
            assert_abs_diff_eq!(s, 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn exact_for_degree_2n_minus_1() {
        let g = GaussLegendre::<f64>::new(5);
        let v = g.integrate(0.0, 2.0, |x| x.powi(9));
        assert_abs_diff_eq!(v, 2f64.powi(10) / 10.0, epsilon = 1e-10);
    }

    #[test]
    fn three_point_nodes() {
        let g = GaussLegendre::<f64>::new(3);
        assert_abs_diff_eq!(g.nodes()[2], (0.6f64).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(g.weights()[1], 8.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn graded_rule_handles_log_endpoint() {
        let g = GaussLegendre::<f64>::new(12);
        let v = g.integrate_graded(0.0, 1.0, 80, 0.35, |t| t.ln());
        assert_abs_diff_eq!(v, -1.0, epsilon = 1e-13);
        let w = g.integrate_graded(1.0, 0.0, 80, 0.35, |t| (1.0 - t).ln());
        assert_abs_diff_eq!(w, -1.0, epsilon = 1e-11);
    }
}
