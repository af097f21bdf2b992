//! Piecewise-cubic Hermite curves with several channels sharing one knot vector.
//!
//! A curve is stored as knot values and knot slopes, so it is C¹ by
//! construction. Least-squares fitting ties the slopes to the values through
//! the not-a-knot C² spline conditions; that keeps the number of unknowns at
//! one per knot and reproduces cubic polynomials exactly.

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HermiteCurve {
    knots: Vec<f64>,
    // n_knots × channels
    values: DMatrix<f64>,
    slopes: DMatrix<f64>,
}

/// `n_segments + 1` equally spaced knots covering `[t0, t1]`.
pub fn uniform_knots(t0: f64, t1: f64, n_segments: usize) -> Vec<f64> {
    (0..=n_segments)
        .map(|i| {
            if i == n_segments {
                t1
            } else {
                t0 + (t1 - t0) * i as f64 / n_segments as f64
            }
        })
        .collect()
}

fn check_knots(knots: &[f64]) -> Result<()> {
    if knots.len() < 2 {
        return Err(invalid("a Hermite curve needs at least two knots"));
    }
    if knots.iter().any(|k| !k.is_finite()) || knots.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("Hermite knots must be finite and strictly increasing"));
    }
    Ok(())
}

// Hermite basis on the unit interval: (h00, h10, h01, h11).
fn basis(s: f64) -> [f64; 4] {
    let s2 = s * s;
    let s3 = s2 * s;
    [2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2]
}

fn basis_derivative(s: f64) -> [f64; 4] {
    let s2 = s * s;
    [6.0 * s2 - 6.0 * s, 3.0 * s2 - 4.0 * s + 1.0, -6.0 * s2 + 6.0 * s, 3.0 * s2 - 2.0 * s]
}

/// Linear map from knot values to knot slopes of the not-a-knot cubic spline
/// (a parabola for two segments, a line for one).
fn slope_operator(knots: &[f64]) -> Result<DMatrix<f64>> {
    let n = knots.len() - 1;
    let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
    let mut a = DMatrix::zeros(n + 1, n + 1);
    let mut c = DMatrix::zeros(n + 1, n + 1);
    // δ_i = (y_{i+1} − y_i)/h_i as a row over y.
    let delta = |c: &mut DMatrix<f64>, row: usize, i: usize, w: f64| {
        c[(row, i + 1)] += w / h[i];
        c[(row, i)] -= w / h[i];
    };
    if n == 1 {
        a[(0, 0)] = 1.0;
        a[(1, 1)] = 1.0;
        delta(&mut c, 0, 0, 1.0);
        delta(&mut c, 1, 0, 1.0);
    } else {
        for i in 1..n {
            // (2m_{i-1} + 4m_i − 6δ_{i-1})/h_{i-1} = (6δ_i − 4m_i − 2m_{i+1})/h_i
            a[(i, i - 1)] = 2.0 / h[i - 1];
            a[(i, i)] = 4.0 / h[i - 1] + 4.0 / h[i];
            a[(i, i + 1)] = 2.0 / h[i];
            delta(&mut c, i, i - 1, 6.0 / h[i - 1]);
            delta(&mut c, i, i, 6.0 / h[i]);
        }
        if n == 2 {
            // Zero third derivative on the first and last segment.
            a[(0, 0)] = 1.0;
            a[(0, 1)] = 1.0;
            delta(&mut c, 0, 0, 2.0);
            a[(2, 1)] = 1.0;
            a[(2, 2)] = 1.0;
            delta(&mut c, 2, 1, 2.0);
        } else {
            // Continuous third derivative across the first and last interior knots:
            // (m_{j-1} + m_j − 2δ_{j-1})/h_{j-1}² = (m_j + m_{j+1} − 2δ_j)/h_j².
            for (row, j) in [(0, 1), (n, n - 1)] {
                let (l, r) = (1.0 / (h[j - 1] * h[j - 1]), 1.0 / (h[j] * h[j]));
                a[(row, j - 1)] += l;
                a[(row, j)] += l - r;
                a[(row, j + 1)] -= r;
                delta(&mut c, row, j - 1, 2.0 * l);
                delta(&mut c, row, j, -2.0 * r);
            }
        }
    }
    let lu = a.lu();
    lu.solve(&c).ok_or_else(|| invalid("singular spline slope system"))
}

impl HermiteCurve {
    /// Curve from explicit knot values and slopes (`n_knots × channels`).
    pub fn from_parts(knots: Vec<f64>, values: DMatrix<f64>, slopes: DMatrix<f64>) -> Result<Self> {
        check_knots(&knots)?;
        if values.nrows() != knots.len() || values.shape() != slopes.shape() {
            return Err(invalid("Hermite values/slopes must have one row per knot"));
        }
        if values.iter().chain(slopes.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("Hermite values/slopes must be finite"));
        }
        Ok(Self { knots, values, slopes })
    }

    /// C¹ interpolant through `values` with centred-difference (Catmull–Rom)
    /// slopes and one-sided slopes at the ends.
    pub fn catmull_rom(knots: Vec<f64>, values: DMatrix<f64>) -> Result<Self> {
        check_knots(&knots)?;
        let n = knots.len();
        let mut slopes = DMatrix::zeros(n, values.ncols());
        for ch in 0..values.ncols() {
            for i in 0..n {
                let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
                slopes[(i, ch)] = (values[(hi, ch)] - values[(lo, ch)]) / (knots[hi] - knots[lo]);
            }
        }
        Self::from_parts(knots, values, slopes)
    }

    /// Not-a-knot cubic spline interpolating `values` at the knots.
    pub fn spline_interpolant(knots: Vec<f64>, values: DMatrix<f64>) -> Result<Self> {
        check_knots(&knots)?;
        let slopes = slope_operator(&knots)? * &values;
        Self::from_parts(knots, values, slopes)
    }

    /// Least-squares fit of a not-a-knot spline on `knots` to samples
    /// `data` (`times.len() × channels`). Returns the curve and the RMSE over
    /// all samples and channels.
    pub fn fit_least_squares(knots: Vec<f64>, times: &[f64], data: &DMatrix<f64>) -> Result<(Self, f64)> {
        check_knots(&knots)?;
        if times.len() != data.nrows() {
            return Err(invalid("fit: one data row per time sample required"));
        }
        if times.len() < knots.len() {
            return Err(invalid(alloc::format!(
                "fit: {} samples cannot determine {} knot values",
                times.len(),
                knots.len()
            )));
        }
        let m = slope_operator(&knots)?;
        let nk = knots.len();
        let mut b = DMatrix::zeros(times.len(), nk);
        for (row, &t) in times.iter().enumerate() {
            let (seg, s, h) = locate(&knots, t).ok_or_else(|| invalid(alloc::format!("fit: sample time {t} outside the knot range")))?;
            let w = basis(s);
            b[(row, seg)] += w[0];
            b[(row, seg + 1)] += w[2];
            for k in 0..nk {
                b[(row, k)] += h * (w[1] * m[(seg, k)] + w[3] * m[(seg + 1, k)]);
            }
        }
        let svd = b.clone().svd(true, true);
        let tol = 1e-12 * svd.singular_values.max();
        let values = svd.solve(data, tol).map_err(|e| invalid(alloc::format!("fit: {e}")))?;
        let slopes = &m * &values;
        let resid = &b * &values - data;
        let rmse = (resid.norm_squared() / resid.len().max(1) as f64).sqrt();
        Ok((Self::from_parts(knots, values, slopes)?, rmse))
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn channels(&self) -> usize {
        self.values.ncols()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn slopes(&self) -> &DMatrix<f64> {
        &self.slopes
    }

    /// Values at `t`; `None` outside the knot range (a relative slack of
    /// 1e-9 of the domain length is clamped).
    pub fn eval(&self, t: f64) -> Option<Vec<f64>> {
        let (seg, s, h) = locate(&self.knots, t)?;
        let w = basis(s);
        Some(
            (0..self.channels())
                .map(|c| {
                    w[0] * self.values[(seg, c)]
                        + w[1] * h * self.slopes[(seg, c)]
                        + w[2] * self.values[(seg + 1, c)]
                        + w[3] * h * self.slopes[(seg + 1, c)]
                })
                .collect(),
        )
    }

    /// Time derivative at `t`.
    pub fn derivative(&self, t: f64) -> Option<Vec<f64>> {
        let (seg, s, h) = locate(&self.knots, t)?;
        let w = basis_derivative(s);
        Some(
            (0..self.channels())
                .map(|c| {
                    (w[0] * self.values[(seg, c)] + w[2] * self.values[(seg + 1, c)]) / h
                        + w[1] * self.slopes[(seg, c)]
                        + w[3] * self.slopes[(seg + 1, c)]
                })
                .collect(),
        )
    }
}

// Segment index, local coordinate in [0, 1] and segment length.
fn locate(knots: &[f64], t: f64) -> Option<(usize, f64, f64)> {
    let (lo, hi) = (knots[0], knots[knots.len() - 1]);
    let slack = 1e-9 * (hi - lo);
    if !(t >= lo - slack && t <= hi + slack) {
        return None;
    }
    let t = t.clamp(lo, hi);
    let seg = match knots.binary_search_by(|k| k.total_cmp(&t)) {
        Ok(i) => i.min(knots.len() - 2),
        Err(i) => i.saturating_sub(1).min(knots.len() - 2),
    };
    let h = knots[seg + 1] - knots[seg];
    Some((seg, ((t - knots[seg]) / h).clamp(0.0, 1.0), h))
}
