//! Antisymmetrised contraction kernels.
//!
//! Every curvature quantity of the mass formulae is a generalised Kronecker
//! delta contracted against a product of small factors. The kernels here never
//! sum over all `n^{2k}` index tuples: they enumerate sorted index subsets,
//! pick one canonical ordering of the antisymmetric pair slots, and sum the
//! lower row over permutations of the upper row with the permutation parity.
//! The multiplicity of the discarded orderings is folded back in analytically.
//!
//! Index convention: a [`Matrix`] `M` stores `M[(a, b)] = M_a^b`, first index
//! lower (input slot), second index upper (output slot). Acting on a vector
//! `v^a` therefore reads `(M v)^b = Σ_a v^a M_a^b`, which is `Mᵀ v` in
//! nalgebra terms; see [`apply`] and [`compose`].

use std::sync::OnceLock;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::error::{GbcError, Result};
use crate::numerics::factorial;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Largest antisymmetrised slot count with a cached permutation table.
pub const MAX_SLOTS: usize = 10;

/// An ordered list of indices in `[0, n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.len() > n {
            return Err(GbcError::Argument(format!(
                "multi-index of length {} exceeds dimension {n}",
                indices.len()
            )));
        }
        if let Some(bad) = indices.iter().find(|&&i| i >= n) {
            return Err(GbcError::Argument(format!(
                "index {bad} out of range [0, {n})"
            )));
        }
        Ok(Self(indices))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Generalised Kronecker delta δ^{upper}_{lower}.
///
/// Equals the determinant of `[δ^{upper_i}_{lower_j}]`: the parity of the
/// permutation carrying `upper` onto `lower`, or 0 when either list repeats an
/// entry or the two lists are not permutations of each other.
pub fn gen_kronecker_delta(upper: &MultiIndex, lower: &MultiIndex) -> Result<i32> {
    if upper.len() != lower.len() {
        return Err(GbcError::Argument(format!(
            "upper and lower index lists differ in length ({} vs {})",
            upper.len(),
            lower.len()
        )));
    }
    Ok(permutation_parity(upper.as_slice(), lower.as_slice()))
}

fn permutation_parity(upper: &[usize], lower: &[usize]) -> i32 {
    let k = upper.len();
    let mut positions = Vec::with_capacity(k);
    for l in lower {
        match upper.iter().position(|u| u == l) {
            Some(p) if !positions.contains(&p) => positions.push(p),
            _ => return 0,
        }
    }
    if upper.iter().all_unique() {
        inversion_sign(&positions)
    } else {
        0
    }
}

fn inversion_sign(perm: &[usize]) -> i32 {
    let mut inversions = 0usize;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    if inversions.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// A permutation of `0..k` together with its sign.
#[derive(Debug, Clone)]
pub struct SignedPermutation {
    pub image: Vec<usize>,
    pub sign: f64,
}

/// All permutations of `0..k` in lexicographic order, cached per `k`.
pub fn permutations(k: usize) -> &'static [SignedPermutation] {
    static TABLES: [OnceLock<Vec<SignedPermutation>>; MAX_SLOTS + 1] =
        [const { OnceLock::new() }; MAX_SLOTS + 1];
    assert!(
        k <= MAX_SLOTS,
        "permutation table limited to {MAX_SLOTS} slots"
    );
    TABLES[k].get_or_init(|| {
        (0..k)
            .permutations(k)
            .map(|image| {
                let sign = inversion_sign(&image) as f64;
                SignedPermutation { image, sign }
            })
            .collect()
    })
}

/// Canonical pairings of `items`: each pair increasing, pairs ordered by
/// their first element. There are `(len − 1)!!` of them.
pub fn pairings(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let first = items[0];
    let mut out = Vec::new();
    for partner in 1..items.len() {
        let rest: Vec<usize> = items
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != 0 && i != partner)
            .map(|(_, &v)| v)
            .collect();
        for tail in pairings(&rest) {
            let mut p = Vec::with_capacity(items.len());
            p.push(first);
            p.push(items[partner]);
            p.extend(tail);
            out.push(p);
        }
    }
    out
}

/// Rank-3 array with flat storage, `get(i, j, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    t.data[(i * n + j) * n + k] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        crate::numerics::max_abs(self.data.iter().zip(&other.data).map(|(a, b)| a - b))
    }

    pub fn max_abs(&self) -> f64 {
        crate::numerics::max_abs(self.data.iter().copied())
    }
}

/// Rank-4 array with flat storage, `get(a, b, c, d)`.
///
/// Holds both the inner products `⟨B_a^b, B_c^d⟩` and, through [`Riemann4`],
/// curvature tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        t.data[((a * n + b) * n + c) * n + d] = f(a, b, c, d);
                    }
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.data[((a * self.n + b) * self.n + c) * self.n + d]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        crate::numerics::max_abs(self.data.iter().zip(&other.data).map(|(a, b)| a - b))
    }

    pub fn max_abs(&self) -> f64 {
        crate::numerics::max_abs(self.data.iter().copied())
    }
}

/// Curvature tensor `R_{ab}^{cd}`: lower pair `(a, b)`, upper pair `(c, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Riemann4(Tensor4);

impl Riemann4 {
    pub fn zeros(n: usize) -> Self {
        Self(Tensor4::zeros(n))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        Self(Tensor4::from_fn(n, f))
    }

    /// Raise the last two slots of a fully covariant `R_{abkl}`.
    pub fn from_covariant(lowered: &Tensor4, g_inv: &Matrix) -> Self {
        let n = lowered.dim();
        let mut half = Tensor4::zeros(n);
        for a in 0..n {
            for b in 0..n {
                for k in 0..n {
                    for d in 0..n {
                        let s: f64 = (0..n)
                            .map(|l| lowered.get(a, b, k, l) * g_inv[(l, d)])
                            .sum();
                        half.data[((a * n + b) * n + k) * n + d] = s;
                    }
                }
            }
        }
        Self(Tensor4::from_fn(n, |a, b, c, d| {
            (0..n).map(|k| g_inv[(c, k)] * half.get(a, b, k, d)).sum()
        }))
    }

    /// Lower the upper pair: `R_{abcd} = R_{ab}^{kl} g_{kc} g_{ld}`.
    pub fn covariant(&self, g: &Matrix) -> Tensor4 {
        let n = self.dim();
        Tensor4::from_fn(n, |a, b, c, d| {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += self.get(a, b, k, l) * g[(k, c)] * g[(l, d)];
                }
            }
            s
        })
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.0.get(a, b, c, d)
    }

    pub fn as_tensor(&self) -> &Tensor4 {
        &self.0
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0.max_abs_diff(&other.0)
    }

    /// Largest violation of the algebraic curvature symmetries: antisymmetry
    /// in each pair and, after lowering with `g`, pair exchange.
    pub fn symmetry_residual(&self, g: &Matrix) -> f64 {
        let n = self.dim();
        let low = self.covariant(g);
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let r = self.get(a, b, c, d);
                        worst = worst
                            .max((r + self.get(b, a, c, d)).abs())
                            .max((r + self.get(a, b, d, c)).abs())
                            .max((low.get(a, b, c, d) - low.get(c, d, a, b)).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Apply a mixed tensor to a vector: `(M v)^b = Σ_a v^a M_a^b`.
pub fn apply(m: &Matrix, v: &Vector) -> Vector {
    m.tr_mul(v)
}

/// Operator composition `outer ∘ inner` in the lower-first convention.
pub fn compose(outer: &Matrix, inner: &Matrix) -> Matrix {
    inner * outer
}

fn check_pair_order(q: usize, n: usize) -> Result<()> {
    if q == 0 || 2 * q >= n {
        return Err(GbcError::Argument(format!(
            "order q = {q} outside 1 ≤ q < n/2 (n = {n})"
        )));
    }
    if 2 * q > MAX_SLOTS {
        return Err(GbcError::Argument(format!(
            "order q = {q} exceeds kernel limit"
        )));
    }
    Ok(())
}

/// The q-th Gauss–Bonnet curvature
/// `L_(q) = 2^{−q} δ^{a_1…a_{2q}}_{b_1…b_{2q}} Π_s R_{a_{2s−1}a_{2s}}^{b_{2s−1}b_{2s}}`.
///
/// Requires `1 ≤ q ≤ n/2`.
pub fn lovelock_scalar(riemann: &Riemann4, q: usize) -> Result<f64> {
    let n = riemann.dim();
    if q == 0 || 2 * q > n || 2 * q > MAX_SLOTS {
        return Err(GbcError::Argument(format!(
            "order q = {q} outside 1 ≤ q ≤ n/2 (n = {n})"
        )));
    }
    let k = 2 * q;
    let perms = permutations(k);
    let mut lower = vec![0usize; k];
    let mut total = 0.0;
    for set in (0..n).combinations(k) {
        for upper in pairings(&set) {
            for p in perms {
                for (slot, &src) in lower.iter_mut().zip(&p.image) {
                    *slot = upper[src];
                }
                let mut prod = p.sign;
                for s in 0..q {
                    prod *= riemann.get(
                        upper[2 * s],
                        upper[2 * s + 1],
                        lower[2 * s],
                        lower[2 * s + 1],
                    );
                    if prod == 0.0 {
                        break;
                    }
                }
                total += prod;
            }
        }
    }
    // 2^{-q} times the 2^q q! orderings represented by one canonical pairing.
    Ok(total * factorial(q))
}

/// Newton tensor `T_(2q−1)` for one normal direction.
///
/// `inner` holds `⟨B_a^b, B_c^d⟩` and must be symmetric under
/// `(a, b) ↔ (c, d)`; `last` is the mixed second fundamental form of the
/// chosen normal direction (the shape operator `A_α`).
pub fn newton_tensor(inner: &Tensor4, last: &Matrix, q: usize) -> Result<Matrix> {
    let n = inner.dim();
    check_pair_order(q, n)?;
    if last.nrows() != n || last.ncols() != n {
        return Err(GbcError::Argument(
            "shape operator dimension mismatch".into(),
        ));
    }
    let k = 2 * q;
    let perms = permutations(k);
    let scale = 2f64.powi(q as i32 - 1) * factorial(q - 1) / factorial(k - 1);
    let mut out = Matrix::zeros(n, n);
    let mut lower = vec![0usize; k];
    let mut upper = vec![0usize; k];
    for set in (0..n).combinations(k) {
        for &j in &set {
            let rest: Vec<usize> = set.iter().copied().filter(|&v| v != j).collect();
            for &slot_elem in &rest {
                let others: Vec<usize> = rest.iter().copied().filter(|&v| v != slot_elem).collect();
                for pairing in pairings(&others) {
                    upper[..k - 2].copy_from_slice(&pairing);
                    upper[k - 2] = slot_elem;
                    upper[k - 1] = j;
                    for p in perms {
                        for (slot, &src) in lower.iter_mut().zip(&p.image) {
                            *slot = upper[src];
                        }
                        let i = lower[k - 1];
                        let mut prod = p.sign * last[(upper[k - 2], lower[k - 2])];
                        for s in 0..q - 1 {
                            if prod == 0.0 {
                                break;
                            }
                            prod *= inner.get(
                                upper[2 * s],
                                lower[2 * s],
                                upper[2 * s + 1],
                                lower[2 * s + 1],
                            );
                        }
                        out[(i, j)] += prod;
                    }
                }
            }
        }
    }
    Ok(out * scale)
}

/// The flux field `X^i = P_(q)^{ijkl} g_{jk,l}` without materialising `P_(q)`.
///
/// `dg.get(j, k, l)` is `∂_l g_{jk}`. The metric-inverse factors of `P_(q)` are
/// absorbed into `Y_j^{cd} = g^{ck} g^{dl} g_{jk,l}` before the contraction.
pub fn p_tensor_contract_flux(
    riemann: &Riemann4,
    dg: &Tensor3,
    inverse_metric: &Matrix,
    q: usize,
) -> Result<Vec<f64>> {
    let n = riemann.dim();
    check_pair_order(q, n)?;
    if dg.dim() != n || inverse_metric.nrows() != n {
        return Err(GbcError::Argument(
            "flux contraction dimension mismatch".into(),
        ));
    }
    // Y[j][c][d]
    let mut half = Tensor3::zeros(n);
    for j in 0..n {
        for k in 0..n {
            for d in 0..n {
                let s: f64 = (0..n)
                    .map(|l| dg.get(j, k, l) * inverse_metric[(d, l)])
                    .sum();
                half.data[(j * n + k) * n + d] = s;
            }
        }
    }
    let y = Tensor3::from_fn(n, |j, c, d| {
        (0..n)
            .map(|k| inverse_metric[(c, k)] * half.get(j, k, d))
            .sum()
    });

    let k = 2 * q;
    let perms = permutations(k);
    let mut x = vec![0.0; n];
    let mut lower = vec![0usize; k];
    let mut upper = vec![0usize; k];
    for set in (0..n).combinations(k) {
        for &i in &set {
            for &j in &set {
                if i == j {
                    continue;
                }
                let others: Vec<usize> =
                    set.iter().copied().filter(|&v| v != i && v != j).collect();
                for pairing in pairings(&others) {
                    upper[..k - 2].copy_from_slice(&pairing);
                    upper[k - 2] = i;
                    upper[k - 1] = j;
                    for p in perms {
                        for (slot, &src) in lower.iter_mut().zip(&p.image) {
                            *slot = upper[src];
                        }
                        let mut prod = p.sign * y.get(j, lower[k - 2], lower[k - 1]);
                        for s in 0..q - 1 {
                            if prod == 0.0 {
                                break;
                            }
                            prod *= riemann.get(
                                upper[2 * s],
                                upper[2 * s + 1],
                                lower[2 * s],
                                lower[2 * s + 1],
                            );
                        }
                        x[i] += prod;
                    }
                }
            }
        }
    }
    // 2^{-q} times the 2^{q-1} (q-1)! orderings of the curvature slots.
    let scale = factorial(q - 1) / 2.0;
    Ok(x.into_iter().map(|v| v * scale).collect())
}

/// The r-th mean curvature `H_r = (1/r!) δ^{a_1…a_r}_{b_1…b_r} Π_s K_{a_s}^{b_s}`,
/// i.e. the r-th elementary symmetric function of the eigenvalues of `K`.
pub fn mean_curvature_r(k_op: &Matrix, r: usize) -> Result<f64> {
    let d = k_op.nrows();
    if r == 0 || r > d || r > MAX_SLOTS {
        return Err(GbcError::Argument(format!(
            "mean curvature order r = {r} outside 1 ≤ r ≤ {d}"
        )));
    }
    let perms = permutations(r);
    let mut total = 0.0;
    for set in (0..d).combinations(r) {
        for p in perms {
            let mut prod = p.sign;
            for s in 0..r {
                prod *= k_op[(set[s], set[p.image[s]])];
            }
            total += prod;
        }
    }
    Ok(total)
}


#[cfg(test)]
mod tests {
    use super::oracle::*;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mi(v: &[usize], n: usize) -> MultiIndex {
        MultiIndex::new(v.to_vec(), n).unwrap()
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        let m = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        (&m + m.transpose()) * 0.5
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        let m = Matrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
        Matrix::identity(n, n) + m.transpose() * m
    }

    /// Inner products and curvature of a random codimension-m configuration.
    fn random_gauss_data(
        seed: u64,
        n: usize,
        m: usize,
    ) -> (Tensor4, Riemann4, Vec<Matrix>, Matrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g_inv = random_spd(&mut rng, n).try_inverse().unwrap();
        let u_inv = random_spd(&mut rng, m).try_inverse().unwrap();
        let shapes: Vec<Matrix> = (0..m)
            .map(|_| random_symmetric(&mut rng, n) * &g_inv)
            .collect();
        let inner = Tensor4::from_fn(n, |a, b, c, d| {
            let mut s = 0.0;
            for al in 0..m {
                for ga in 0..m {
                    s += u_inv[(al, ga)] * shapes[al][(a, b)] * shapes[ga][(c, d)];
                }
            }
            s
        });
        let riemann = Riemann4::from_fn(n, |a, b, c, d| {
            inner.get(a, c, b, d) - inner.get(a, d, b, c)
        });
        (inner, riemann, shapes, g_inv)
    }

    #[test]
    fn delta_small_cases() {
        assert_eq!(
            gen_kronecker_delta(&mi(&[1, 2], 3), &mi(&[1, 2], 3)).unwrap(),
            1
        );
        assert_eq!(
            gen_kronecker_delta(&mi(&[1, 2], 3), &mi(&[2, 1], 3)).unwrap(),
            -1
        );
        assert_eq!(
            gen_kronecker_delta(&mi(&[1, 2], 3), &mi(&[1, 1], 3)).unwrap(),
            0
        );
        assert_eq!(
            gen_kronecker_delta(&mi(&[0, 1], 3), &mi(&[1, 2], 3)).unwrap(),
            0
        );
        assert!(gen_kronecker_delta(&mi(&[0, 1], 3), &mi(&[1], 3)).is_err());
        assert!(MultiIndex::new(vec![0, 4], 3).is_err());
    }

    #[test]
    fn delta_matches_determinant_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let u: Vec<usize> = (0..4).map(|_| rng.random_range(0..6)).collect();
            let l: Vec<usize> = (0..4).map(|_| rng.random_range(0..6)).collect();
            let got = gen_kronecker_delta(&mi(&u, 6), &mi(&l, 6)).unwrap();
            assert_eq!(got, delta_determinant(&u, &l), "{u:?} {l:?}");
        }
    }

    proptest! {
        #[test]
        fn delta_is_antisymmetric(
            u in proptest::collection::vec(0usize..6, 4),
            l in proptest::collection::vec(0usize..6, 4),
            i in 0usize..4, j in 0usize..4,
        ) {
            prop_assume!(i != j);
            let base = gen_kronecker_delta(&mi(&u, 6), &mi(&l, 6)).unwrap();
            let mut us = u.clone();
            us.swap(i, j);
            let mut ls = l.clone();
            ls.swap(i, j);
            prop_assert_eq!(gen_kronecker_delta(&mi(&us, 6), &mi(&l, 6)).unwrap(), -base);
            prop_assert_eq!(gen_kronecker_delta(&mi(&u, 6), &mi(&ls, 6)).unwrap(), -base);
        }
    }

    #[test]
    fn pairing_counts_are_double_factorials() {
        assert_eq!(pairings(&[]).len(), 1);
        assert_eq!(pairings(&[0, 1]).len(), 1);
        assert_eq!(pairings(&[0, 1, 2, 3]).len(), 3);
        assert_eq!(pairings(&[0, 1, 2, 3, 4, 5]).len(), 15);
    }

    #[test]
    fn lovelock_flat_is_zero() {
        assert_eq!(lovelock_scalar(&Riemann4::zeros(5), 2).unwrap(), 0.0);
    }

    #[test]
    fn lovelock_q1_is_twice_sum_of_sectional_pairs() {
        let (_, r, _, _) = random_gauss_data(3, 5, 2);
        let mut oracle = 0.0;
        for a in 0..5 {
            for b in 0..5 {
                if a < b {
                    oracle += 2.0 * r.get(a, b, a, b);
                }
            }
        }
        let got = lovelock_scalar(&r, 1).unwrap();
        assert!((got - oracle).abs() < 1e-12 * (1.0 + oracle.abs()));
    }

    #[test]
    fn lovelock_round_four_sphere() {
        let rho: f64 = 1.7;
        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let r = Riemann4::from_fn(4, |a, b, c, e| {
            rho.powi(-2) * (d(a, c) * d(b, e) - d(a, e) * d(b, c))
        });
        let got = lovelock_scalar(&r, 2).unwrap();
        let naive = lovelock_naive(&r, 2);
        assert!((naive - 24.0 * rho.powi(-4)).abs() < 1e-12);
        assert!((got - 24.0 * rho.powi(-4)).abs() < 1e-12);
    }

    #[test]
    fn lovelock_rejects_bad_order() {
        let r = Riemann4::zeros(4);
        assert!(lovelock_scalar(&r, 0).is_err());
        assert!(lovelock_scalar(&r, 3).is_err());
    }

    #[test]
    fn lovelock_is_relabeling_invariant() {
        let (_, r, _, _) = random_gauss_data(11, 5, 2);
        let perm = [3usize, 0, 4, 1, 2];
        let relabeled =
            Riemann4::from_fn(5, |a, b, c, d| r.get(perm[a], perm[b], perm[c], perm[d]));
        for q in 1..=2 {
            let a = lovelock_scalar(&r, q).unwrap();
            let b = lovelock_scalar(&relabeled, q).unwrap();
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()), "q={q}: {a} vs {b}");
        }
    }

    #[test]
    fn pruned_kernels_match_naive_sums() {
        for n in 3..=6 {
            for seed in 0..3u64 {
                let (inner, r, shapes, g_inv) = random_gauss_data(100 * n as u64 + seed, n, 2);
                for q in 1..=n / 2 {
                    let fast = lovelock_scalar(&r, q).unwrap();
                    let slow = lovelock_naive(&r, q);
                    assert!(
                        (fast - slow).abs() <= 1e-12 * slow.abs().max(1.0),
                        "L n={n} q={q}"
                    );
                    if 2 * q >= n {
                        continue;
                    }
                    let t_fast = newton_tensor(&inner, &shapes[1], q).unwrap();
                    let t_slow = newton_naive(&inner, &shapes[1], q);
                    let scale = t_slow.amax().max(1.0);
                    assert!((&t_fast - &t_slow).amax() <= 1e-12 * scale, "T n={n} q={q}");
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let dg = Tensor3::from_fn(n, |_, _, _| rng.random_range(-1.0..1.0));
                    let x_fast = p_tensor_contract_flux(&r, &dg, &g_inv, q).unwrap();
                    let x_slow = flux_naive(&r, &dg, &g_inv, q);
                    let scale = crate::numerics::max_abs(x_slow.iter().copied()).max(1.0);
                    for (a, b) in x_fast.iter().zip(&x_slow) {
                        assert!((a - b).abs() <= 1e-12 * scale, "X n={n} q={q}");
                    }
                }
            }
        }
    }

    #[test]
    fn newton_zero_and_first_order() {
        let n = 4;
        let zero = newton_tensor(&Tensor4::zeros(n), &Matrix::zeros(n, n), 1).unwrap();
        assert_eq!(zero.amax(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_symmetric(&mut rng, n);
        let inner = Tensor4::from_fn(n, |p, q, r, s| a[(p, q)] * a[(r, s)] / 2.0);
        let t = newton_tensor(&inner, &a, 1).unwrap();
        let classical = Matrix::identity(n, n) * a.trace() - &a;
        assert!((t - classical).amax() < 1e-13);
    }

    #[test]
    fn newton_commutes_with_commuting_shape_operators() {
        // Diagonal shape operators in an orthonormal frame: a flat normal bundle.
        let n = 5;
        let a1 = Matrix::from_diagonal(&Vector::from_vec(vec![0.3, -0.2, 0.5, 0.1, 0.7]));
        let a2 = Matrix::from_diagonal(&Vector::from_vec(vec![0.4, 0.6, -0.1, 0.2, 0.05]));
        let u_inv = Matrix::from_row_slice(2, 2, &[0.8, -0.1, -0.1, 0.6]);
        let shapes = [a1, a2];
        let inner = Tensor4::from_fn(n, |a, b, c, d| {
            (0..2)
                .flat_map(|x| (0..2).map(move |y| (x, y)))
                .map(|(x, y)| u_inv[(x, y)] * shapes[x][(a, b)] * shapes[y][(c, d)])
                .sum()
        });
        for q in 1..=2 {
            for shape in &shapes {
                let t = newton_tensor(&inner, shape, q).unwrap();
                assert!((&t - t.transpose()).amax() < 1e-14);
                for other in &shapes {
                    let c = compose(&t, other) - compose(other, &t);
                    assert!(c.amax() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn q1_flux_matches_direct_four_loop() {
        let n = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g_inv = random_spd(&mut rng, n).try_inverse().unwrap();
        let dg = Tensor3::from_fn(n, |_, _, _| rng.random_range(-1.0..1.0));
        let x = p_tensor_contract_flux(&Riemann4::zeros(n), &dg, &g_inv, 1).unwrap();
        for i in 0..n {
            let mut direct = 0.0;
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        direct += 0.5
                            * (g_inv[(i, k)] * g_inv[(j, l)] - g_inv[(j, k)] * g_inv[(i, l)])
                            * dg.get(j, k, l);
                    }
                }
            }
            assert!((x[i] - direct).abs() < 1e-13);
        }
        let zero =
            p_tensor_contract_flux(&Riemann4::zeros(n), &Tensor3::zeros(n), &g_inv, 1).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mean_curvature_of_spheres() {
        let rho = 2.5;
        let k = Matrix::identity(4, 4) / rho;
        for r in 1..=4 {
            let h = mean_curvature_r(&k, r).unwrap();
            let expected = crate::numerics::binomial(4, r) * rho.powi(-(r as i32));
            assert!((h - expected).abs() < 1e-14);
            assert_eq!(mean_curvature_r(&Matrix::zeros(4, 4), r).unwrap(), 0.0);
        }
        assert!(mean_curvature_r(&k, 0).is_err());
        assert!(mean_curvature_r(&k, 5).is_err());
    }

    #[test]
    fn mean_curvature_is_elementary_symmetric_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let k = random_symmetric(&mut rng, 4);
            let eig = k.clone().symmetric_eigen().eigenvalues;
            let mut e2 = 0.0;
            for i in 0..4 {
                for j in i + 1..4 {
                    e2 += eig[i] * eig[j];
                }
            }
            assert!((mean_curvature_r(&k, 2).unwrap() - e2).abs() < 1e-12);
        }
    }
}
