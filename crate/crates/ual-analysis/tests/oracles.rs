//! Independent-oracle checks: the silhouette against a from-scratch
//! double-loop reimplementation (exact agreement), and the hand-rolled
//! principal-component path against nalgebra's SVD (to 1e-8, modulo the
//! fixed sign convention). Also the metric's isometry invariance.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ual_analysis::{pca_2d, silhouette};

/// Straight double-loop silhouette written from the definition.
fn silhouette_oracle(features: &[f64], dim: usize, labels: &[bool]) -> f64 {
    let n = labels.len();
    let dist = |i: usize, j: usize| -> f64 {
        let (a, b) = (&features[i * dim..(i + 1) * dim], &features[j * dim..(j + 1) * dim]);
        a.iter()
            .zip(b)
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let mut total = 0.0;
    for i in 0..n {
        let mut same = 0.0;
        let mut same_n = 0usize;
        let mut other = 0.0;
        let mut other_n = 0usize;
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = dist(i, j);
            if labels[i] == labels[j] {
                same += d;
                same_n += 1;
            } else {
                other += d;
                other_n += 1;
            }
        }
        let a = same / same_n as f64;
        let b = other / other_n as f64;
        let m = a.max(b);
        total += if m == 0.0 { 0.0 } else { (b - a) / m };
    }
    total / n as f64
}

#[test]
fn silhouette_matches_brute_force_oracle_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for case in 0..100 {
        let n = rng.gen_range(4..=200);
        let dim = rng.gen_range(1..=32);
        let features: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        // Guarantee two members per class, then randomize the rest.
        let mut labels = vec![false, false, true, true];
        labels.extend((4..n).map(|_| rng.gen_bool(0.5)));

        let got = silhouette(&features, dim, &labels).unwrap();
        let expected = silhouette_oracle(&features, dim, &labels);
        assert_eq!(got, expected, "case {case}: {got} vs {expected}");
        assert!((-1.0..=1.0).contains(&got));
    }
}

#[test]
fn silhouette_is_isometry_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let n = 60;
    let dim = 8;
    let features: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let base = silhouette(&features, dim, &labels).unwrap();

    // A random rotation composed from plane rotations, plus a translation.
    let mut rotated = features.clone();
    for _ in 0..24 {
        let p = rng.gen_range(0..dim);
        let mut q = rng.gen_range(0..dim - 1);
        if q >= p {
            q += 1;
        }
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let (s, c) = angle.sin_cos();
        for row in rotated.chunks_mut(dim) {
            let (xp, xq) = (row[p], row[q]);
            row[p] = c * xp - s * xq;
            row[q] = s * xp + c * xq;
        }
    }
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
    for row in rotated.chunks_mut(dim) {
        for (x, &t) in row.iter_mut().zip(&shift) {
            *x += t;
        }
    }

    let moved = silhouette(&rotated, dim, &labels).unwrap();
    assert!(
        (base - moved).abs() <= 1e-9,
        "isometry moved the score: {base} vs {moved}"
    );
}

/// Principal directions and explained fractions from nalgebra's SVD of the
/// centered data matrix, with the same sign convention applied.
fn svd_oracle(features: &[f64], dim: usize) -> ([Vec<f64>; 2], [f64; 2], Vec<[f64; 2]>) {
    let n = features.len() / dim;
    let mut mean = vec![0.0f64; dim];
    for row in features.chunks(dim) {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let centered: Vec<f64> = features
        .chunks(dim)
        .flat_map(|row| row.iter().zip(&mean).map(|(&x, &m)| x - m))
        .collect();
    let matrix = DMatrix::from_row_slice(n, dim, &centered);
    let svd = matrix.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors");

    let mut basis = [vec![0.0f64; dim], vec![0.0f64; dim]];
    let mut explained = [0.0f64; 2];
    let total: f64 = svd.singular_values.iter().map(|&s| s * s).sum();
    for k in 0..2 {
        for i in 0..dim {
            basis[k][i] = v_t[(k, i)];
        }
        let mut best = 0usize;
        for i in 0..dim {
            if basis[k][i].abs() > basis[k][best].abs() {
                best = i;
            }
        }
        if basis[k][best] < 0.0 {
            for x in basis[k].iter_mut() {
                *x = -*x;
            }
        }
        explained[k] = svd.singular_values[k] * svd.singular_values[k] / total;
    }
    let points: Vec<[f64; 2]> = centered
        .chunks(dim)
        .map(|row| {
            [
                row.iter().zip(&basis[0]).map(|(&x, &b)| x * b).sum(),
                row.iter().zip(&basis[1]).map(|(&x, &b)| x * b).sum(),
            ]
        })
        .collect();
    (basis, explained, points)
}

#[test]
fn pca_matches_svd_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    for (n, dim) in [(50usize, 8usize), (120, 16), (40, 3), (10, 2)] {
        let features: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let proj = pca_2d(&features, dim).unwrap();
        proj.check_invariants().unwrap();

        let (oracle_basis, oracle_explained, oracle_points) = svd_oracle(&features, dim);
        for k in 0..2 {
            for i in 0..dim {
                assert!(
                    (proj.basis[k][i] - oracle_basis[k][i]).abs() <= 1e-8,
                    "n={n} d={dim} basis[{k}][{i}]: {} vs {}",
                    proj.basis[k][i],
                    oracle_basis[k][i]
                );
            }
            assert!(
                (proj.explained[k] - oracle_explained[k]).abs() <= 1e-10,
                "explained[{k}]: {} vs {}",
                proj.explained[k],
                oracle_explained[k]
            );
        }
        for (p, q) in proj.points.iter().zip(&oracle_points) {
            assert!((p[0] - q[0]).abs() <= 1e-8 && (p[1] - q[1]).abs() <= 1e-8);
        }
    }
}
