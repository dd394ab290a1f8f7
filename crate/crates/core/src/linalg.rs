//! Small direct solvers for the banded systems that show up along a rod.

/// Solves a tridiagonal system with the Thomas algorithm.
///
/// `lower[i]` couples row `i + 1` to column `i`, `upper[i]` couples row `i`
/// to column `i + 1`. Returns `None` when a pivot vanishes.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Some(Vec::new());
    }
    debug_assert!(lower.len() + 1 >= n && upper.len() + 1 >= n && rhs.len() == n);

    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot.abs() < f64::MIN_POSITIVE {
        return None;
    }
    if n > 1 {
        c_prime[0] = upper[0] / pivot;
    }
    d_prime[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i - 1] * c_prime[i - 1];
        if pivot.abs() < f64::MIN_POSITIVE || !pivot.is_finite() {
            return None;
        }
        if i + 1 < n {
            c_prime[i] = upper[i] / pivot;
        }
        d_prime[i] = (rhs[i] - lower[i - 1] * d_prime[i - 1]) / pivot;
    }

    let mut x = d_prime;
    for i in (0..n - 1).rev() {
        x[i] -= c_prime[i] * x[i + 1];
    }
    Some(x)
}

/// Solves a cyclic tridiagonal system via Sherman-Morrison.
///
/// `corner_low` is `A[n-1][0]`, `corner_high` is `A[0][n-1]`. Needs `n >= 3`.
pub fn solve_cyclic_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    corner_low: f64,
    corner_high: f64,
    rhs: &[f64],
) -> Option<Vec<f64>> {
    let n = diag.len();
    if n < 3 {
        return None;
    }
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - corner_low * corner_high / gamma;

    let mut x = solve_tridiagonal(lower, &bb, upper, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = corner_low;
    let z = solve_tridiagonal(lower, &bb, upper, &u)?;

    let denom = 1.0 + z[0] + corner_high * z[n - 1] / gamma;
    if denom.abs() < f64::MIN_POSITIVE {
        return None;
    }
    let fact = (x[0] + corner_high * x[n - 1] / gamma) / denom;
    for (xi, zi) in x.iter_mut().zip(&z) {
        *xi -= fact * zi;
    }
    Some(x)
}

/// Symmetric positive-definite band matrix with half-bandwidth `p`,
/// stored by rows as `A[i][i - k]` for `k = 0..=p`.
#[derive(Debug, Clone)]
pub struct SymBand {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            data: vec![0.0; n * (p + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, k: usize) -> usize {
        i * (self.p + 1) + k
    }

    /// Entry `A[i][j]`, zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        if k > self.p {
            0.0
        } else {
            self.data[self.idx(i, k)]
        }
    }

    /// Adds `v` to `A[i][j]` (and implicitly `A[j][i]`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        assert!(k <= self.p, "entry ({i}, {j}) outside band {}", self.p);
        let idx = self.idx(i, k);
        self.data[idx] += v;
    }

    /// Replaces row/column `i` with the identity row, returning the removed
    /// off-diagonal couplings `(j, A[i][j])` so callers can move known values
    /// to the right-hand side.
    pub fn pin(&mut self, i: usize) -> Vec<(usize, f64)> {
        let mut removed = Vec::new();
        let lo = i.saturating_sub(self.p);
        let hi = (i + self.p).min(self.n - 1);
        for j in lo..=hi {
            if j == i {
                continue;
            }
            let v = self.get(i, j);
            if v != 0.0 {
                removed.push((j, v));
                let (a, b) = if i >= j { (i, j) } else { (j, i) };
                let idx = self.idx(a, a - b);
                self.data[idx] = 0.0;
            }
        }
        let idx = self.idx(i, 0);
        self.data[idx] = 1.0;
        removed
    }

    /// In-place band Cholesky. Returns `None` if the matrix is not positive definite.
    pub fn cholesky(mut self) -> Option<BandCholesky> {
        let (n, p) = (self.n, self.p);
        for i in 0..n {
            let j0 = i.saturating_sub(p);
            for j in j0..=i {
                let mut sum = self.data[self.idx(i, i - j)];
                let k0 = j0.max(j.saturating_sub(p));
                for k in k0..j {
                    sum -= self.data[self.idx(i, i - k)] * self.data[self.idx(j, j - k)];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return None;
                    }
                    let idx = self.idx(i, 0);
                    self.data[idx] = sum.sqrt();
                } else {
                    let idx = self.idx(i, i - j);
                    self.data[idx] = sum / self.data[self.idx(j, 0)];
                }
            }
        }
        Some(BandCholesky { factor: self })
    }
}

/// Lower band Cholesky factor of a [`SymBand`].
#[derive(Debug, Clone)]
pub struct BandCholesky {
    factor: SymBand,
}

impl BandCholesky {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let l = &self.factor;
        let (n, p) = (l.n, l.p);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(p)..i {
                s -= l.data[l.idx(i, i - k)] * b[k];
            }
            b[i] = s / l.data[l.idx(i, 0)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..=(i + p).min(n - 1) {
                s -= l.data[l.idx(k, k - i)] * b[k];
            }
            b[i] = s / l.data[l.idx(i, 0)];
        }
    }
}
