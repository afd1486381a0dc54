//! Power coefficient surface.
//!
//! The rotor's power coefficient is modelled as a polynomial that is
//! quadratic in both tip-speed ratio and pitch angle:
//!
//! ```text
//! Cp(λ, β) = [c11 β² + c12 β + c13] λ² + [c21 β² + c22 β + c23] λ + [c31 β² + c32 β + c33]
//! ```
//!
//! Coefficients are obtained by least squares against the classic
//! exponential reference surface, see [`reference_cp`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Betz limit: no rotor can extract more than 16/27 of the wind's power.
pub const BETZ_LIMIT: f64 = 16.0 / 27.0;

const GOLDEN_TOL: f64 = 1e-10;

/// Coefficients `c[i][j]` of the Cp polynomial plus its optimum at the
/// minimum pitch angle.
///
/// Row `i` multiplies `λ²`, `λ`, `1`; column `j` multiplies `β²`, `β`, `1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpCoefficients {
    pub c: [[f64; 3]; 3],
    /// Tip-speed ratio maximising Cp at `beta_ref`.
    pub lambda_opt: f64,
    /// Cp at `(lambda_opt, beta_ref)`.
    pub cp_max: f64,
    /// Pitch angle (deg) at which the optimum was located.
    pub beta_ref: f64,
}

impl CpCoefficients {
    /// Builds coefficients and locates the optimum tip-speed ratio over
    /// `lambda_range` at pitch `beta_ref` by golden-section search.
    pub fn new(c: [[f64; 3]; 3], beta_ref: f64, lambda_range: (f64, f64)) -> Result<Self> {
        let (lo, hi) = lambda_range;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::Domain(format!(
                "tip-speed ratio search range [{lo}, {hi}] must be positive and non-empty"
            )));
        }
        let mut coeffs = CpCoefficients {
            c,
            lambda_opt: f64::NAN,
            cp_max: f64::NAN,
            beta_ref,
        };
        let lambda_opt = golden_section_max(|l| coeffs.eval(l, beta_ref), lo, hi, GOLDEN_TOL);
        coeffs.lambda_opt = lambda_opt;
        coeffs.cp_max = coeffs.eval(lambda_opt, beta_ref);
        Ok(coeffs)
    }

    /// Raw polynomial value, without the clamp at zero.
    #[inline]
    pub fn polynomial(&self, lambda: f64, beta: f64) -> f64 {
        let (a, b, c) = self.beta_quadratic(lambda);
        (a * beta + b) * beta + c
    }

    /// Polynomial clamped below at zero. Assumes `lambda > 0`; see
    /// [`cp_eval`] for the checked entry point.
    #[inline]
    pub fn eval(&self, lambda: f64, beta: f64) -> f64 {
        self.polynomial(lambda, beta).max(0.0)
    }

    /// Groups the polynomial at fixed `lambda` into `a β² + b β + c`.
    #[inline]
    pub fn beta_quadratic(&self, lambda: f64) -> (f64, f64, f64) {
        let c = &self.c;
        let l2 = lambda * lambda;
        (
            c[0][0] * l2 + c[1][0] * lambda + c[2][0],
            c[0][1] * l2 + c[1][1] * lambda + c[2][1],
            c[0][2] * l2 + c[1][2] * lambda + c[2][2],
        )
    }
}

/// Evaluates the Cp polynomial, clamped below at zero.
pub fn cp_eval(lambda: f64, beta: f64, coeffs: &CpCoefficients) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!(
            "tip-speed ratio must be positive, got {lambda}"
        )));
    }
    Ok(coeffs.eval(lambda, beta))
}

/// Classic analytic power-coefficient surface (β in degrees).
pub fn reference_cp(lambda: f64, beta: f64) -> f64 {
    let inv_li = 1.0 / (lambda + 0.08 * beta) - 0.035 / (beta.powi(3) + 1.0);
    0.5176 * (116.0 * inv_li - 0.4 * beta - 5.0) * (-21.0 * inv_li).exp() + 0.0068 * lambda
}

/// Rectangular sampling grid for the Cp regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpGrid {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_step: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_step: f64,
}

impl Default for CpGrid {
    fn default() -> Self {
        CpGrid {
            lambda_min: 3.0,
            lambda_max: 12.0,
            lambda_step: 0.25,
            beta_min: 0.0,
            beta_max: 20.0,
            beta_step: 1.0,
        }
    }
}

impl CpGrid {
    /// Grid points in row-major (β outer, λ inner) order.
    pub fn points(&self) -> Result<Vec<(f64, f64)>> {
        let lambdas = axis(self.lambda_min, self.lambda_max, self.lambda_step, "lambda")?;
        let betas = axis(self.beta_min, self.beta_max, self.beta_step, "beta")?;
        if lambdas[0] <= 0.0 {
            return Err(Error::Domain(
                "grid tip-speed ratios must be positive".into(),
            ));
        }
        Ok(betas
            .iter()
            .flat_map(|&b| lambdas.iter().map(move |&l| (l, b)))
            .collect())
    }
}

fn axis(lo: f64, hi: f64, step: f64, name: &str) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
        return Err(Error::Domain(format!("{name} range [{lo}, {hi}] is empty")));
    }
    if hi == lo {
        return Ok(vec![lo]);
    }
    if !(step > 0.0) {
        return Err(Error::Domain(format!("{name} step must be positive")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| lo + k as f64 * step).collect())
}

/// Result of fitting the polynomial to the reference surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpFit {
    pub coeffs: CpCoefficients,
    pub rmse: f64,
    pub r_squared: f64,
    pub max_abs_error: f64,
    pub samples: usize,
}

/// Polynomial basis in the same order as the flattened coefficient matrix.
pub(crate) fn basis(lambda: f64, beta: f64) -> [f64; 9] {
    let (l2, b2) = (lambda * lambda, beta * beta);
    [
        b2 * l2,
        beta * l2,
        l2,
        b2 * lambda,
        beta * lambda,
        lambda,
        b2,
        beta,
        1.0,
    ]
}

/// Least-squares fit of the nine polynomial coefficients against
/// [`reference_cp`] sampled on `grid`.
pub fn fit_cp(grid: &CpGrid) -> Result<CpFit> {
    let points = grid.points()?;
    if points.len() < 9 {
        return Err(Error::Fit(format!(
            "need at least 9 grid points, got {}",
            points.len()
        )));
    }
    let target: Vec<f64> = points.iter().map(|&(l, b)| reference_cp(l, b)).collect();

    let rows = points.len();
    let mut design = DMatrix::<f64>::zeros(rows, 9);
    for (r, &(l, b)) in points.iter().enumerate() {
        for (k, v) in basis(l, b).into_iter().enumerate() {
            design[(r, k)] = v;
        }
    }
    // Equilibrate columns; the raw basis spans several orders of magnitude.
    let mut scale = [0.0; 9];
    for (k, s) in scale.iter_mut().enumerate() {
        let norm = design.column(k).norm();
        if norm == 0.0 {
            return Err(Error::Fit(format!("basis column {k} vanishes on the grid")));
        }
        *s = norm;
        design.column_mut(k).scale_mut(1.0 / norm);
    }

    let svd = design.svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-10 * smax) {
        return Err(Error::Fit(format!(
            "rank-deficient design (condition {:.3e}); the grid must vary both λ and β",
            smax / smin
        )));
    }
    let rhs = DVector::from_vec(target.clone());
    let solution = svd
        .solve(&rhs, 1e-14 * smax)
        .map_err(|e| Error::Fit(e.to_string()))?;

    let mut c = [[0.0; 3]; 3];
    for k in 0..9 {
        c[k / 3][k % 3] = solution[k] / scale[k];
    }
    let coeffs = CpCoefficients::new(c, grid.beta_min, (grid.lambda_min, grid.lambda_max))?;

    let (rmse, r_squared, max_abs_error) = fit_stats(&coeffs, &points, &target);
    Ok(CpFit {
        coeffs,
        rmse,
        r_squared,
        max_abs_error,
        samples: rows,
    })
}

fn fit_stats(coeffs: &CpCoefficients, points: &[(f64, f64)], target: &[f64]) -> (f64, f64, f64) {
    let n = target.len() as f64;
    let mean = target.iter().sum::<f64>() / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut max_abs = 0.0_f64;
    for (&(l, b), &y) in points.iter().zip(target) {
        let r = coeffs.polynomial(l, b) - y;
        ss_res += r * r;
        ss_tot += (y - mean) * (y - mean);
        max_abs = max_abs.max(r.abs());
    }
    ((ss_res / n).sqrt(), 1.0 - ss_res / ss_tot, max_abs)
}

/// Golden-section search for the maximiser of a unimodal `f` on `[a, b]`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fitted() -> CpFit {
        fit_cp(&CpGrid::default()).unwrap()
    }

    #[test]
    fn zero_polynomial_is_zero() {
        let z = CpCoefficients {
            c: [[0.0; 3]; 3],
            lambda_opt: 1.0,
            cp_max: 0.0,
            beta_ref: 0.0,
        };
        assert_eq!(cp_eval(7.0, 3.0, &z).unwrap(), 0.0);
        assert_eq!(cp_eval(0.1, 25.0, &z).unwrap(), 0.0);
    }

    #[test]
    fn non_positive_lambda_is_rejected() {
        let fit = fitted();
        assert!(matches!(
            cp_eval(0.0, 0.0, &fit.coeffs),
            Err(Error::Domain(_))
        ));
        assert!(cp_eval(-1.0, 0.0, &fit.coeffs).is_err());
    }

    #[test]
    fn reference_optimum_near_eight() {
        let l = golden_section_max(|l| reference_cp(l, 0.0), 3.0, 12.0, 1e-10);
        assert!((l - 8.1).abs() < 0.1, "reference optimum at {l}");
        assert!((reference_cp(l, 0.0) - 0.48).abs() < 0.005);
    }

    #[test]
    fn optimum_is_consistent_with_coefficients() {
        let fit = fitted();
        let k = &fit.coeffs;
        assert!((cp_eval(k.lambda_opt, 0.0, k).unwrap() - k.cp_max).abs() < 1e-9);
        // quadratic in λ at β = 0: vertex at -b / 2a
        let vertex = -k.c[1][2] / (2.0 * k.c[0][2]);
        assert!((vertex - k.lambda_opt).abs() < 1e-6);
        assert!(k.cp_max > 0.0 && k.cp_max < BETZ_LIMIT);
    }

    #[test]
    fn pitched_point_close_to_reference() {
        let fit = fitted();
        let cp = cp_eval(6.0, 10.0, &fit.coeffs).unwrap();
        assert!(cp > 0.0 && cp < fit.coeffs.cp_max);
        assert!((cp - reference_cp(6.0, 10.0)).abs() <= 0.02);
    }

    #[test]
    fn fixed_beta_grid_is_rank_deficient() {
        let grid = CpGrid {
            beta_min: 5.0,
            beta_max: 5.0,
            ..CpGrid::default()
        };
        assert!(matches!(fit_cp(&grid), Err(Error::Fit(_))));
    }

    #[test]
    fn too_few_points_is_a_fit_error() {
        let grid = CpGrid {
            lambda_min: 5.0,
            lambda_max: 6.0,
            lambda_step: 1.0,
            beta_min: 0.0,
            beta_max: 2.0,
            beta_step: 2.0,
        };
        assert!(matches!(fit_cp(&grid), Err(Error::Fit(_))));
    }

    /// Independent route: solve the normal equations by Gaussian elimination
    /// in extended precision-free form and compare residual sums of squares.
    #[test]
    fn fit_matches_normal_equation_oracle() {
        let grid = CpGrid::default();
        let pts = grid.points().unwrap();
        let y: Vec<f64> = pts.iter().map(|&(l, b)| reference_cp(l, b)).collect();
        // scaled variables keep the normal matrix well conditioned
        let (ls, bs) = (12.0, 20.0);
        let mut ata = [[0.0f64; 9]; 9];
        let mut aty = [0.0f64; 9];
        for (&(l, b), &t) in pts.iter().zip(&y) {
            let row = basis(l / ls, b / bs);
            for i in 0..9 {
                aty[i] += row[i] * t;
                for j in 0..9 {
                    ata[i][j] += row[i] * row[j];
                }
            }
        }
        let sol = gauss_solve(ata, aty);
        let ssr_oracle: f64 = pts
            .iter()
            .zip(&y)
            .map(|(&(l, b), &t)| {
                let row = basis(l / ls, b / bs);
                let f: f64 = row.iter().zip(&sol).map(|(a, c)| a * c).sum();
                (f - t).powi(2)
            })
            .sum();
        let fit = fitted();
        let rmse_oracle = (ssr_oracle / pts.len() as f64).sqrt();
        assert!(
            (fit.rmse - rmse_oracle).abs() < 1e-9,
            "{} vs {}",
            fit.rmse,
            rmse_oracle
        );
    }

    fn gauss_solve(mut a: [[f64; 9]; 9], mut b: [f64; 9]) -> [f64; 9] {
        for col in 0..9 {
            let piv = (col..9)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for r in col + 1..9 {
                let f = a[r][col] / a[col][col];
                let pivot_row = a[col];
                for (x, p) in a[r].iter_mut().zip(pivot_row).skip(col) {
                    *x -= f * p;
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = [0.0; 9];
        for r in (0..9).rev() {
            let s: f64 = (r + 1..9).map(|k| a[r][k] * x[k]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    #[test]
    fn second_differences_are_constant() {
        let k = fitted().coeffs;
        let h = 0.37;
        let d2 = |f: &dyn Fn(f64) -> f64, x: f64| f(x + h) - 2.0 * f(x) + f(x - h);
        for &l in &[4.0, 7.5, 10.0] {
            let f = |b: f64| k.polynomial(l, b);
            let (a, c) = (d2(&f, 2.0), d2(&f, 15.0));
            assert!((a - c).abs() <= 1e-9 * a.abs().max(1e-12) + 1e-13);
        }
        for &b in &[0.0, 6.0, 18.0] {
            let f = |l: f64| k.polynomial(l, b);
            let (a, c) = (d2(&f, 4.0), d2(&f, 11.0));
            assert!((a - c).abs() <= 1e-9 * a.abs().max(1e-12) + 1e-13);
        }
    }

    #[test]
    fn fitted_values_stay_physical_on_grid() {
        let fit = fitted();
        for (l, b) in CpGrid::default().points().unwrap() {
            let cp = cp_eval(l, b, &fit.coeffs).unwrap();
            assert!((0.0..=0.6).contains(&cp));
        }
    }
}
