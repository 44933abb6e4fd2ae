//! Row-major matrix kernels.
//!
//! All parallelism in the model routes through these functions (plus the
//! per-sequence attention loops), and every parallel path is bitwise
//! deterministic: work splits over disjoint output rows and each row is
//! reduced sequentially, so thread count and scheduling cannot change a
//! single bit of the result. Serial mode exists for the single-threaded
//! training contract, not for correctness.

use rayon::prelude::*;
use ual_loss::Scalar;

/// Rows below this stay serial even in parallel mode.
const PAR_MIN_ROWS: usize = 8;

/// `out = a · b` where `a` is m×k, `b` is k×n, `out` is m×n. Overwrites.
pub(crate) fn matmul_into<F: Scalar>(
    out: &mut [F],
    a: &[F],
    b: &[F],
    m: usize,
    k: usize,
    n: usize,
    parallel: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    let row = |out_row: &mut [F], i: usize| {
        out_row.fill(F::zero());
        for kk in 0..k {
            let aik = a[i * k + kk];
            let b_row = &b[kk * n..(kk + 1) * n];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    };
    if parallel && m >= PAR_MIN_ROWS {
        out.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, out_row)| row(out_row, i));
    } else {
        for (i, out_row) in out.chunks_mut(n).enumerate() {
            row(out_row, i);
        }
    }
}

/// `out += aᵀ · b` where `a` is m×k, `b` is m×n, `out` is k×n. Accumulates —
/// the shape every weight gradient takes (`dW = inputᵀ · d_output`).
pub(crate) fn acc_at_b<F: Scalar>(
    out: &mut [F],
    a: &[F],
    b: &[F],
    m: usize,
    k: usize,
    n: usize,
    parallel: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    let row = |out_row: &mut [F], i: usize| {
        for r in 0..m {
            let ari = a[r * k + i];
            let b_row = &b[r * n..(r + 1) * n];
            for (o, &brj) in out_row.iter_mut().zip(b_row) {
                *o += ari * brj;
            }
        }
    };
    if parallel && k >= PAR_MIN_ROWS {
        out.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, out_row)| row(out_row, i));
    } else {
        for (i, out_row) in out.chunks_mut(n).enumerate() {
            row(out_row, i);
        }
    }
}

/// `out += a · bᵀ` where `a` is m×k, `b` is n×k, `out` is m×n. Accumulates —
/// the shape every input gradient takes (`d_input = d_output · Wᵀ`).
pub(crate) fn acc_a_bt<F: Scalar>(
    out: &mut [F],
    a: &[F],
    b: &[F],
    m: usize,
    k: usize,
    n: usize,
    parallel: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    let row = |out_row: &mut [F], i: usize| {
        let a_row = &a[i * k..(i + 1) * k];
        for (j, o) in out_row.iter_mut().enumerate() {
            let b_row = &b[j * k..(j + 1) * k];
            let mut dot = F::zero();
            for (&x, &y) in a_row.iter().zip(b_row) {
                dot += x * y;
            }
            *o += dot;
        }
    };
    if parallel && m >= PAR_MIN_ROWS {
        out.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, out_row)| row(out_row, i));
    } else {
        for (i, out_row) in out.chunks_mut(n).enumerate() {
            row(out_row, i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // 2×3 matrix used across the hand-worked cases.
    const A: [f64; 6] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];

    #[test]
    fn matmul_matches_hand_computation() {
        let b = [7.0, 8.0, 9.0, 10.0, 11.0, 12.0]; // 3×2
        let mut out = vec![0.0f64; 4];
        matmul_into(&mut out, &A, &b, 2, 3, 2, false);
        assert_eq!(out, vec![58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn at_b_agrees_with_explicit_transposition() {
        let b = [7.0, 8.0, 9.0, 10.0, 11.0, 12.0]; // 2×3, so aᵀ·b is 3×3
        let mut direct = vec![0.0f64; 9];
        acc_at_b(&mut direct, &A, &b, 2, 3, 3, false);
        let a_t = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0]; // 3×2
        let mut reference = vec![0.0f64; 9];
        matmul_into(&mut reference, &a_t, &b, 3, 2, 3, false);
        assert_eq!(direct, reference);
    }

    #[test]
    fn a_bt_agrees_with_explicit_transposition() {
        let b = [7.0, 8.0, 9.0, 10.0, 11.0, 12.0]; // 2×3, so a·bᵀ is 2×2
        let mut direct = vec![0.0f64; 4];
        acc_a_bt(&mut direct, &A, &b, 2, 3, 2, false);
        let b_t = [7.0, 10.0, 8.0, 11.0, 9.0, 12.0]; // 3×2
        let mut reference = vec![0.0f64; 4];
        matmul_into(&mut reference, &A, &b_t, 2, 3, 2, false);
        assert_eq!(direct, reference);
    }

    #[test]
    fn accumulating_kernels_add_onto_existing_values() {
        let b = [1.0; 6];
        let mut out = vec![100.0f64; 4];
        acc_a_bt(&mut out, &A, &b, 2, 3, 2, false);
        assert_eq!(out, vec![106.0, 106.0, 115.0, 115.0]);
    }

    #[test]
    fn parallel_and_serial_paths_are_bitwise_identical() {
        // Sizes above the parallel threshold, values without exact structure.
        let (m, k, n) = (64, 37, 29);
        let a: Vec<f32> = (0..m * k)
            .map(|i| ((i as u64 * 2654435761) % 1000) as f32 * 1e-3 - 0.5)
            .collect();
        let b: Vec<f32> = (0..k * n)
            .map(|i| ((i as u64 * 40503) % 997) as f32 * 1e-3 - 0.5)
            .collect();
        let b_mn: Vec<f32> = (0..m * n)
            .map(|i| ((i as u64 * 69069) % 991) as f32 * 1e-3 - 0.5)
            .collect();

        let mut serial = vec![0.0f32; m * n];
        let mut par = vec![0.0f32; m * n];
        matmul_into(&mut serial, &a, &b, m, k, n, false);
        matmul_into(&mut par, &a, &b, m, k, n, true);
        assert_eq!(serial, par);

        let mut serial = vec![0.1f32; k * n];
        let mut par = vec![0.1f32; k * n];
        acc_at_b(&mut serial, &a, &b_mn, m, k, n, false);
        acc_at_b(&mut par, &a, &b_mn, m, k, n, true);
        assert_eq!(serial, par);

        let mut serial = vec![0.1f32; m * k];
        let mut par = vec![0.1f32; m * k];
        // a·bᵀ with a as m×n and b as k×n.
        acc_a_bt(&mut serial, &b_mn, &b[..k * n], m, n, k, false);
        acc_a_bt(&mut par, &b_mn, &b[..k * n], m, n, k, true);
        assert_eq!(serial, par);
    }
}
