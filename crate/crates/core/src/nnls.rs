//! Nonnegative least squares by cyclic coordinate descent on banded columns.

/// A design column that is zero outside `start..start + values.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandColumn {
    pub start: usize,
    pub values: Vec<f64>,
}

impl BandColumn {
    fn dot(&self, r: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(&r[self.start..self.start + self.values.len()])
            .map(|(a, b)| a * b)
            .sum()
    }

    fn axpy(&self, alpha: f64, r: &mut [f64]) {
        for (ri, v) in r[self.start..self.start + self.values.len()]
            .iter_mut()
            .zip(&self.values)
        {
            *ri += alpha * v;
        }
    }
}

/// Minimizes ‖y − Σ x_j c_j‖² over x ≥ 0.
///
/// Stops when no coordinate moves by more than `tol` relative to the largest
/// coefficient, or after `max_sweeps`.
pub fn nnls(columns: &[BandColumn], y: &[f64], tol: f64, max_sweeps: usize) -> Vec<f64> {
    let norms: Vec<f64> = columns
        .iter()
        .map(|c| c.values.iter().map(|v| v * v).sum())
        .collect();
    let mut x = vec![0.0; columns.len()];
    let mut r = y.to_vec();
    for _ in 0..max_sweeps {
        let mut max_step = 0.0f64;
        for (j, c) in columns.iter().enumerate() {
            if norms[j] <= 0.0 {
                continue;
            }
            let new = (x[j] + c.dot(&r) / norms[j]).max(0.0);
            let step = new - x[j];
            if step != 0.0 {
                c.axpy(-step, &mut r);
                x[j] = new;
                max_step = max_step.max(step.abs());
            }
        }
        let scale = x.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        if max_step <= tol * scale {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(c: &[f64]) -> BandColumn {
        BandColumn {
            start: 0,
            values: c.to_vec(),
        }
    }

    #[test]
    fn exact_nonnegative_solution() {
        let cols = vec![
            BandColumn { start: 0, values: vec![1.0, 0.5, 0.1] },
            BandColumn { start: 2, values: vec![0.2, 1.0, 0.3] },
        ];
        let y = vec![2.0, 1.0, 0.2 + 0.6, 3.0, 0.9];
        let x = nnls(&cols, &y, 1e-14, 10_000);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 3.0).abs() < 1e-9, "{x:?}");
    }

    #[test]
    fn clamps_at_zero() {
        // Unconstrained solution of this system is (1, -1).
        let cols = vec![dense(&[1.0, 0.0, 1.0]), dense(&[0.0, 1.0, 1.0])];
        let y = [1.0, -1.0, 0.0];
        let x = nnls(&cols, &y, 1e-14, 10_000);
        assert_eq!(x[1], 0.0);
        // With x1 = 0 the best x0 is the projection of y on c0.
        assert!((x[0] - 0.5).abs() < 1e-12);
    }
}
