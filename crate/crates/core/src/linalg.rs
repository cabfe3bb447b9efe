//! Small dense Cholesky factorization and triangular solves.
//!
//! Matrices are row-major `n × n` slices; only the lower triangle of the
//! factor is meaningful.

/// Lower Cholesky factor of `a + jitter·I`, or `None` if a pivot is not
/// safely positive.
pub fn cholesky(a: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    let floor = n.max(1) as f64 * f64::EPSILON;
    for i in 0..n {
        for j in 0..=i {
            let (row_i, row_j) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            let dot = dot(row_i, row_j);
            if i == j {
                let diag = a[i * n + i] + jitter;
                let s = diag - dot;
                if !(s > floor * diag) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - dot) / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L x = b` in place.
pub fn solve_lower_in_place(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let s = dot(&l[i * n..i * n + i], &b[..i]);
        b[i] = (b[i] - s) / l[i * n + i];
    }
}

/// Solves `Lᵀ x = b` in place.
pub fn solve_upper_in_place(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Inner product with eight independent partial sums, so the loop
/// vectorizes.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Running sum with an error term carried alongside (twice the working
/// precision, as in Ogita, Rump and Oishi's Dot2).
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    err: f64,
}

impl Compensated {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let s = self.sum + v;
        let z = s - self.sum;
        self.err += (self.sum - (s - z)) + (v - z);
        self.sum = s;
    }

    /// Adds `a·b`, keeping the rounding error of the product.
    #[inline]
    pub fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.err += a.mul_add(b, -p);
        self.add(p);
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.sum + self.err
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_and_solve() {
        let a = [4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let l = cholesky(&a, 3, 0.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((v - a[i * 3 + j]).abs() < 1e-14);
            }
        }
        let mut b = [1.0, -2.0, 0.5];
        solve_lower_in_place(&l, 3, &mut b);
        solve_upper_in_place(&l, 3, &mut b);
        let back: Vec<f64> = (0..3).map(|i| dot(&a[i * 3..i * 3 + 3], &b)).collect();
        for (x, y) in back.iter().zip([1.0, -2.0, 0.5]) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn compensated_dot_survives_cancellation() {
        let a = [1e16, 1.0, -1e16, 3.0];
        let b = [1.0, 1.0, 1.0, 1e-17];
        let dot2 = |a: &[f64], b: &[f64]| {
            let mut acc = Compensated::default();
            a.iter().zip(b).for_each(|(x, y)| acc.add_product(*x, *y));
            acc.value()
        };
        assert_eq!(dot2(&a, &b), 1.0 + 3e-17);
        assert_ne!(dot(&a, &b), 1.0 + 3e-17);
        let x = 1.0 + f64::EPSILON;
        // (1+ε)² − 1 − 2ε = ε², lost entirely by a plain product
        assert_eq!(
            dot2(&[x, -1.0, -2.0 * f64::EPSILON], &[x, 1.0, 1.0]),
            f64::EPSILON * f64::EPSILON
        );
    }

    #[test]
    fn rejects_indefinite() {
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2, 0.0).is_none());
        assert!(cholesky(&[1.0, 1.0, 1.0, 1.0], 2, 0.0).is_none());
        assert!(cholesky(&[1.0, 1.0, 1.0, 1.0], 2, 1e-6).is_some());
    }
}
