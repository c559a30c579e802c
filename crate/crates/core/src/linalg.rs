//! Dense LU solve with partial pivoting.

use crate::scalar::Scalar;

/// Solve `a x = b` in place for a row-major `m x m` matrix. Returns `None`
/// when a pivot is negligible relative to the matrix scale.
pub(crate) fn lu_solve<T: Scalar>(m: usize, mut a: Vec<T>, mut b: Vec<T>) -> Option<Vec<T>> {
    debug_assert_eq!(a.len(), m * m);
    debug_assert_eq!(b.len(), m);
    let scale = a.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()));
    if m == 0 {
        return Some(b);
    }
    if scale == T::zero() {
        return None;
    }
    let tiny = scale * T::epsilon() * T::of(m as f64);

    for col in 0..m {
        let pivot_row = (col..m)
            .max_by(|&r, &s| {
                a[r * m + col]
                    .abs()
                    .partial_cmp(&a[s * m + col].abs())
                    .expect("finite matrix")
            })
            .expect("non-empty range");
        if a[pivot_row * m + col].abs() <= tiny {
            return None;
        }
        if pivot_row != col {
            for k in 0..m {
                a.swap(col * m + k, pivot_row * m + k);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * m + col];
        for r in col + 1..m {
            let factor = a[r * m + col] / pivot;
            if factor == T::zero() {
                continue;
            }
            a[r * m + col] = T::zero();
            for k in col + 1..m {
                a[r * m + k] = a[r * m + k] - factor * a[col * m + k];
            }
            b[r] = b[r] - factor * b[col];
        }
    }

    let mut x = vec![T::zero(); m];
    for r in (0..m).rev() {
        let mut acc = b[r];
        for k in r + 1..m {
            acc = acc - a[r * m + k] * x[k];
        }
        x[r] = acc / a[r * m + r];
    }
    Some(x)
}
