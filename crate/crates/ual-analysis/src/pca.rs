//! Principal-component projection to two dimensions.
//!
//! The top-2 eigenvectors of the sample covariance come from a cyclic Jacobi
//! eigendecomposition written here in full — symmetric rotations until the
//! off-diagonal mass vanishes — so the production path shares no code with
//! the SVD oracle the tests compare against. Basis signs follow one fixed
//! convention: the largest-magnitude coordinate of each direction is made
//! positive, which pins down the ±v ambiguity.

use crate::error::AnalysisError;

/// A 2D projection: orthonormal basis rows, projected points, and the
/// fraction of total variance each direction explains.
#[derive(Debug, Clone)]
pub struct Projection2D {
    pub basis: [Vec<f64>; 2],
    pub points: Vec<[f64; 2]>,
    pub explained: [f64; 2],
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major d×d).
/// Returns eigenvalues and, column-per-eigenvalue, an orthonormal
/// eigenvector matrix.
fn jacobi_eigen(mut a: Vec<f64>, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0f64; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                s += a[p * d + q] * a[p * d + q];
            }
        }
        s
    };
    let scale: f64 = (0..d).map(|i| a[i * d + i].abs()).sum::<f64>().max(1.0);
    let threshold = (scale * 1e-15).powi(2);

    for _sweep in 0..64 {
        if off(&a) <= threshold {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                // Smaller-angle root of t² + 2θt − 1 = 0, stable for large θ.
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for i in 0..d {
                    let aip = a[i * d + p];
                    let aiq = a[i * d + q];
                    a[i * d + p] = c * aip - s * aiq;
                    a[i * d + q] = s * aip + c * aiq;
                }
                for j in 0..d {
                    let apj = a[p * d + j];
                    let aqj = a[q * d + j];
                    a[p * d + j] = c * apj - s * aqj;
                    a[q * d + j] = s * apj + c * aqj;
                }
                for i in 0..d {
                    let vip = v[i * d + p];
                    let viq = v[i * d + q];
                    v[i * d + p] = c * vip - s * viq;
                    v[i * d + q] = s * vip + c * viq;
                }
            }
        }
    }
    let eigenvalues = (0..d).map(|i| a[i * d + i]).collect();
    (eigenvalues, v)
}

/// Flips a direction so its largest-magnitude coordinate is positive.
fn fix_sign(direction: &mut [f64]) {
    let mut best = 0usize;
    for (i, &x) in direction.iter().enumerate() {
        if x.abs() > direction[best].abs() {
            best = i;
        }
    }
    if direction[best] < 0.0 {
        for x in direction.iter_mut() {
            *x = -*x;
        }
    }
}

/// Projects row-major n×dim data onto its top two principal directions.
pub fn pca_2d(features: &[f64], dim: usize) -> Result<Projection2D, AnalysisError> {
    if dim < 2 {
        return Err(AnalysisError::InvalidInput(format!(
            "projection needs dimensionality at least 2, got {dim}"
        )));
    }
    if features.len() % dim != 0 {
        return Err(AnalysisError::InvalidInput(format!(
            "feature length {} is not a multiple of dim {dim}",
            features.len()
        )));
    }
    let n = features.len() / dim;
    if n < 3 {
        return Err(AnalysisError::InvalidInput(format!(
            "projection needs at least 3 points, got {n}"
        )));
    }
    if features.iter().any(|x| !x.is_finite()) {
        return Err(AnalysisError::InvalidInput(
            "features contain a non-finite value".into(),
        ));
    }

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

    // Sample covariance (divisor n−1; the explained fractions are divisor-
    // independent since they are eigenvalue ratios).
    let mut cov = vec![0.0f64; dim * dim];
    for row in centered.chunks(dim) {
        for i in 0..dim {
            for j in i..dim {
                cov[i * dim + j] += row[i] * row[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..dim {
        for j in i..dim {
            cov[i * dim + j] /= denom;
            cov[j * dim + i] = cov[i * dim + j];
        }
    }

    let total: f64 = (0..dim).map(|i| cov[i * dim + i]).sum();
    if total <= 0.0 {
        return Err(AnalysisError::DegenerateData);
    }

    let (eigenvalues, vectors) = jacobi_eigen(cov, dim);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eigenvalues[j].partial_cmp(&eigenvalues[i]).unwrap());

    let mut basis = [vec![0.0f64; dim], vec![0.0f64; dim]];
    let mut explained = [0.0f64; 2];
    for k in 0..2 {
        let col = order[k];
        for i in 0..dim {
            basis[k][i] = vectors[i * dim + col];
        }
        fix_sign(&mut basis[k]);
        explained[k] = (eigenvalues[col] / total).clamp(0.0, 1.0);
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

    let projection = Projection2D {
        basis,
        points,
        explained,
    };
    debug_assert!(projection.check_invariants().is_ok());
    Ok(projection)
}

impl Projection2D {
    /// Orthonormal basis (to 1e-10) and non-increasing explained fractions.
    pub fn check_invariants(&self) -> Result<(), String> {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(&x, &y)| x * y).sum::<f64>();
        let n00 = dot(&self.basis[0], &self.basis[0]);
        let n11 = dot(&self.basis[1], &self.basis[1]);
        let n01 = dot(&self.basis[0], &self.basis[1]);
        if (n00 - 1.0).abs() > 1e-10 || (n11 - 1.0).abs() > 1e-10 || n01.abs() > 1e-10 {
            return Err(format!("basis not orthonormal: |v0|²={n00}, |v1|²={n11}, v0·v1={n01}"));
        }
        let [e0, e1] = self.explained;
        if !(0.0..=1.0).contains(&e0) || !(0.0..=1.0).contains(&e1) || e1 > e0 {
            return Err(format!("explained fractions out of order: {e0}, {e1}"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_have_one_component() {
        // Points on y=x: first direction (1,1)/√2, nothing left for the second.
        let pts = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0, -1.0, -1.0];
        let proj = pca_2d(&pts, 2).unwrap();
        let r = 0.5f64.sqrt();
        assert!((proj.basis[0][0] - r).abs() < 1e-12);
        assert!((proj.basis[0][1] - r).abs() < 1e-12);
        assert!((proj.explained[0] - 1.0).abs() < 1e-12);
        assert!(proj.explained[1].abs() < 1e-12);
        proj.check_invariants().unwrap();
    }

    #[test]
    fn square_corners_split_variance_evenly() {
        let pts = [1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0];
        let proj = pca_2d(&pts, 2).unwrap();
        assert!((proj.explained[0] - 0.5).abs() < 1e-12);
        assert!((proj.explained[1] - 0.5).abs() < 1e-12);
        proj.check_invariants().unwrap();
    }

    #[test]
    fn identical_points_are_degenerate() {
        let pts = [3.0, 4.0, 3.0, 4.0, 3.0, 4.0];
        assert!(matches!(pca_2d(&pts, 2), Err(AnalysisError::DegenerateData)));
    }

    #[test]
    fn too_few_points_or_dims_are_rejected() {
        assert!(matches!(
            pca_2d(&[1.0, 2.0, 3.0, 4.0], 2),
            Err(AnalysisError::InvalidInput(_))
        ));
        assert!(matches!(
            pca_2d(&[1.0, 2.0, 3.0], 1),
            Err(AnalysisError::InvalidInput(_))
        ));
    }

    #[test]
    fn sign_convention_pins_the_direction() {
        // Same data reflected: directions must come out identical because
        // the convention forces the dominant coordinate positive.
        let pts = [0.0, 0.0, 1.0, 2.0, 2.0, 4.0, 3.0, 6.0];
        let reflected: Vec<f64> = pts.iter().map(|&x| -x).collect();
        let a = pca_2d(&pts, 2).unwrap();
        let b = pca_2d(&reflected, 2).unwrap();
        for i in 0..2 {
            assert!((a.basis[0][i] - b.basis[0][i]).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_preserves_pairwise_structure() {
        // For 2D data the projection is a rotation (+ centering): pairwise
        // distances survive exactly.
        let pts = [0.0, 0.0, 3.0, 1.0, -2.0, 2.5, 1.0, -4.0, 5.0, 0.5];
        let proj = pca_2d(&pts, 2).unwrap();
        let n = 5;
        for i in 0..n {
            for j in (i + 1)..n {
                let orig = ((pts[2 * i] - pts[2 * j]).powi(2)
                    + (pts[2 * i + 1] - pts[2 * j + 1]).powi(2))
                .sqrt();
                let p = ((proj.points[i][0] - proj.points[j][0]).powi(2)
                    + (proj.points[i][1] - proj.points[j][1]).powi(2))
                .sqrt();
                assert!((orig - p).abs() < 1e-10, "pair {i},{j}: {orig} vs {p}");
            }
        }
    }
}
