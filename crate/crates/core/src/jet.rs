//! Third-order jets of scalar fields on ℝ^n.
//!
//! Models are assembled from a handful of primitives (coordinates, weighted
//! squared distances, univariate profiles) with exact Leibniz and chain rules,
//! so every derivative up to third order is analytic.

/// Value and all partial derivatives up to third order of `φ: ℝ^n → ℝ` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarJet {
    n: usize,
    pub value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
    third: Vec<f64>,
}

impl ScalarJet {
    pub fn constant(n: usize, c: f64) -> Self {
        Self {
            n,
            value: c,
            grad: vec![0.0; n],
            hess: vec![0.0; n * n],
            third: vec![0.0; n * n * n],
        }
    }

    /// The coordinate function `x ↦ x_i` evaluated at `x`.
    pub fn coordinate(x: &[f64], i: usize) -> Self {
        let mut j = Self::constant(x.len(), x[i]);
        j.grad[i] = 1.0;
        j
    }

    /// `Σ_i w_i (x_i − c_i)²`.
    pub fn weighted_square_distance(x: &[f64], center: &[f64], weights: &[f64]) -> Self {
        let n = x.len();
        let mut j = Self::constant(n, 0.0);
        for i in 0..n {
            let d = x[i] - center[i];
            j.value += weights[i] * d * d;
            j.grad[i] = 2.0 * weights[i] * d;
            j.hess[i * n + i] = 2.0 * weights[i];
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d1(&self, i: usize) -> f64 {
        self.grad[i]
    }

    #[inline]
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.n + j]
    }

    #[inline]
    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.third[(i * self.n + j) * self.n + k]
    }

    pub fn gradient(&self) -> &[f64] {
        &self.grad
    }

    pub fn scale(mut self, c: f64) -> Self {
        self.value *= c;
        self.grad.iter_mut().for_each(|v| *v *= c);
        self.hess.iter_mut().for_each(|v| *v *= c);
        self.third.iter_mut().for_each(|v| *v *= c);
        self
    }

    pub fn plus(mut self, other: &Self) -> Self {
        self.value += other.value;
        let pairs = [
            (&mut self.grad, &other.grad),
            (&mut self.hess, &other.hess),
            (&mut self.third, &other.third),
        ];
        for (a, b) in pairs {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self
    }

    /// Leibniz rule for the product of two jets.
    pub fn mul(&self, o: &Self) -> Self {
        let n = self.n;
        let mut r = Self::constant(n, self.value * o.value);
        for i in 0..n {
            r.grad[i] = self.grad[i] * o.value + self.value * o.grad[i];
            for j in 0..n {
                r.hess[i * n + j] = self.d2(i, j) * o.value
                    + self.grad[i] * o.grad[j]
                    + self.grad[j] * o.grad[i]
                    + self.value * o.d2(i, j);
                for k in 0..n {
                    r.third[(i * n + j) * n + k] = self.d3(i, j, k) * o.value
                        + self.d2(i, j) * o.grad[k]
                        + self.d2(i, k) * o.grad[j]
                        + self.d2(j, k) * o.grad[i]
                        + self.grad[i] * o.d2(j, k)
                        + self.grad[j] * o.d2(i, k)
                        + self.grad[k] * o.d2(i, j)
                        + self.value * o.d3(i, j, k);
                }
            }
        }
        r
    }

    /// Chain rule for `F ∘ φ`, given `[F, F′, F″, F‴]` evaluated at `φ(x)`.
    pub fn compose(&self, outer: [f64; 4]) -> Self {
        let n = self.n;
        let [f0, f1, f2, f3] = outer;
        let mut r = Self::constant(n, f0);
        for i in 0..n {
            let ui = self.grad[i];
            r.grad[i] = f1 * ui;
            for j in 0..n {
                let uj = self.grad[j];
                r.hess[i * n + j] = f2 * ui * uj + f1 * self.d2(i, j);
                for k in 0..n {
                    let uk = self.grad[k];
                    r.third[(i * n + j) * n + k] = f3 * ui * uj * uk
                        + f2 * (self.d2(i, j) * uk + self.d2(i, k) * uj + self.d2(j, k) * ui)
                        + f1 * self.d3(i, j, k);
                }
            }
        }
        r
    }

    pub(crate) fn scale_second(&mut self, c: f64) {
        self.hess.iter_mut().for_each(|v| *v *= c);
    }

    /// `sqrt(φ)`, defined where `φ > 0`.
    pub fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.compose([s, 0.5 / s, -0.25 / (s * s * s), 0.375 / (s * s * s * s * s)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(x: &[f64]) -> ScalarJet {
        // x0 * x1^2 * exp(|x|^2 / 4)
        let q = ScalarJet::weighted_square_distance(x, &[0.0; 3], &[0.25; 3]);
        let e = q.value.exp();
        let exp = q.compose([e, e, e, e]);
        let x0 = ScalarJet::coordinate(x, 0);
        let x1 = ScalarJet::coordinate(x, 1);
        x0.mul(&x1).mul(&x1).mul(&exp)
    }

    #[test]
    fn derivatives_match_central_differences() {
        let x = [0.3, -0.7, 0.45];
        let j = field(&x);
        let h = 1e-5;
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (p, m) = (field(&xp), field(&xm));
            assert!(((p.value - m.value) / (2.0 * h) - j.d1(k)).abs() < 1e-8);
            for a in 0..3 {
                assert!(((p.d1(a) - m.d1(a)) / (2.0 * h) - j.d2(a, k)).abs() < 1e-8);
                for b in 0..3 {
                    let fd = (p.d2(a, b) - m.d2(a, b)) / (2.0 * h);
                    assert!((fd - j.d3(a, b, k)).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn third_derivatives_are_symmetric() {
        let j = field(&[0.1, 0.2, -0.3]);
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    assert!((j.d3(a, b, c) - j.d3(c, a, b)).abs() < 1e-14);
                    assert!((j.d3(a, b, c) - j.d3(b, a, c)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn sqrt_of_square_distance_is_norm() {
        let x = [1.0, 2.0, 2.0];
        let r = ScalarJet::weighted_square_distance(&x, &[0.0; 3], &[1.0; 3]).sqrt();
        assert!((r.value - 3.0).abs() < 1e-15);
        assert!((r.d1(1) - 2.0 / 3.0).abs() < 1e-15);
        // ∂_ij |x| = (δ_ij − x_i x_j/r²)/r
        assert!((r.d2(0, 0) - (1.0 - 1.0 / 9.0) / 3.0).abs() < 1e-15);
    }
}
