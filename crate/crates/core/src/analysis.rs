//! Curve fitting: saturating-exponential shutdown fits, Rabi calibration of
//! the drive, and the weak-coupling power law.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of x₀ starting values for the saturating-exponential fit.
pub const FIT_STARTS: usize = 10;

/// `y = A (1 − exp(−(x − x₀)/r))`
pub fn saturating_exponential(x: f64, a: f64, x0: f64, r: f64) -> f64 {
    a * (1.0 - (-(x - x0) / r).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(rename = "A")]
    pub a: f64,
    pub x0: f64,
    pub r: f64,
    /// Parameter covariance in the order (A, x₀, r).
    pub covariance: [[f64; 3]; 3],
    /// √(Σ wᵢ rᵢ²)
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Which of the x₀ starts produced this optimum.
    pub start: usize,
    pub residuals: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<String>,
}

impl FitResult {
    pub fn eval(&self, x: f64) -> f64 {
        saturating_exponential(x, self.a, self.x0, self.r)
    }

    /// Standard errors from the covariance diagonal.
    pub fn stderr(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.covariance[i][i].max(0.0).sqrt())
    }

    /// x₀ + r, where the fitted curve has reached 1 − 1/e of its plateau.
    pub fn knee(&self) -> f64 {
        self.x0 + self.r
    }
}

fn jacobian_row(x: f64, p: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let (a, x0, r) = (p[0], p[1], p[2]);
    let e = (-(x - x0) / r).exp();
    let f = a * (1.0 - e);
    // ∂f/∂A, ∂f/∂x₀, ∂f/∂r
    (f, Vector3::new(1.0 - e, -a * e / r, -a * e * (x - x0) / (r * r)))
}

struct Lm {
    p: Vector3<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
}

fn cost(x: &[f64], y: &[f64], w: &[f64], p: &Vector3<f64>) -> f64 {
    x.iter()
        .zip(y)
        .zip(w)
        .map(|((&xi, &yi), &wi)| {
            let r = yi - saturating_exponential(xi, p[0], p[1], p[2]);
            wi * r * r
        })
        .sum()
}

fn normal_equations(x: &[f64], y: &[f64], w: &[f64], p: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
        let (f, j) = jacobian_row(xi, p);
        jtj += wi * j * j.transpose();
        jtr += wi * (yi - f) * j;
    }
    (jtj, jtr)
}

/// Levenberg-Marquardt with Marquardt's diagonal scaling, which keeps the
/// iteration invariant under rescaling of x.
fn levenberg_marquardt(x: &[f64], y: &[f64], w: &[f64], start: Vector3<f64>) -> Lm {
    let mut p = start;
    let mut c = cost(x, y, w, &p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let scale_y = y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    while iterations < 1000 {
        iterations += 1;
        let (jtj, jtr) = normal_equations(x, y, w, &p);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for i in 0..3 {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            if !(trial[2] > 0.0) || !trial.iter().all(|v| v.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let ct = cost(x, y, w, &trial);
            if ct <= c {
                let small_step = (0..3).all(|i| step[i].abs() <= 1e-13 * (p[i].abs() + 1e-300) + 1e-300);
                let small_gain = c - ct <= 1e-28 * scale_y;
                p = trial;
                c = ct;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if small_step || small_gain {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: stationary to working precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    Lm {
        p,
        cost: c,
        iterations,
        converged,
    }
}

/// Least-squares fit of [`saturating_exponential`] with per-point weights
/// (pass `None` for unweighted). Starts from [`FIT_STARTS`] values of x₀
/// spread evenly over `[min x, max x]`, with r = (max − min)/4 and the
/// linear optimum for A; keeps the lowest-cost converged run.
pub fn fit_saturating_exponential(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<FitResult> {
    if x.len() != y.len() {
        return Err(Error::Fit(format!("{} x values but {} y values", x.len(), y.len())));
    }
    if x.len() < 5 {
        return Err(Error::Fit(format!("need at least 5 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite data".into()));
    }
    let unit = vec![1.0; x.len()];
    let w = weights.unwrap_or(&unit);
    if w.len() != x.len() || w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::Fit("weights must be finite, non-negative and one per point".into()));
    }
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return Err(Error::Fit("x values must span a range".into()));
    }

    let r0 = (hi - lo) / 4.0;
    let mut best: Option<(usize, Lm)> = None;
    for s in 0..FIT_STARTS {
        let x0 = lo + (hi - lo) * s as f64 / (FIT_STARTS - 1) as f64;
        // A minimising the cost with x₀, r held fixed
        let (mut num, mut den) = (0.0, 0.0);
        for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
            let b = 1.0 - (-(xi - x0) / r0).exp();
            num += wi * b * yi;
            den += wi * b * b;
        }
        let a0 = if den > 0.0 { num / den } else { 1.0 };
        let run = levenberg_marquardt(x, y, w, Vector3::new(a0, x0, r0));
        let better = match &best {
            None => true,
            Some((_, b)) => (run.converged && !b.converged) || (run.converged == b.converged && run.cost < b.cost),
        };
        if better {
            best = Some((s, run));
        }
    }
    let (start, run) = best.expect("at least one start");
    let p = run.p;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(&xi, &yi)| yi - saturating_exponential(xi, p[0], p[1], p[2])).collect();
    let (jtj, _) = normal_equations(x, y, w, &p);
    let dof = (x.len() as f64 - 3.0).max(1.0);
    let s2 = run.cost / dof;
    let inv = jtj.try_inverse();
    let covariance = match inv {
        Some(m) => [0, 1, 2].map(|i| [0, 1, 2].map(|j| s2 * m[(i, j)])),
        None => [[f64::NAN; 3]; 3],
    };
    let converged = run.converged && p[2] > 0.0 && run.cost.is_finite();
    let diagnostics = if converged {
        None
    } else if inv.is_none() {
        Some("normal matrix is singular at the optimum".into())
    } else {
        Some(format!("no convergence after {} iterations (cost {:e})", run.iterations, run.cost))
    };
    Ok(FitResult {
        a: p[0],
        x0: p[1],
        r: p[2],
        covariance,
        residual_norm: run.cost.sqrt(),
        converged,
        iterations: run.iterations,
        start,
        residuals,
        diagnostics,
    })
}

/// Ω/2π per drive unit and the misfit at that slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMap {
    /// Hz per drive unit.
    pub slope: f64,
    /// √(Σ (predicted − observed)²) at the optimum.
    pub goodness: f64,
    pub evaluations: usize,
}

impl CalibrationMap {
    /// Ω in rad/s for a drive level.
    pub fn rabi_omega(&self, drive: f64) -> f64 {
        2.0 * std::f64::consts::PI * self.slope * drive
    }
}

/// Number of slopes tried before the golden-section refinement.
pub const CALIBRATION_GRID: usize = 64;

/// Slope range searched by default: from 1/50 to 4 times the slope that
/// would make the largest drive a two-state π pulse of length `pulse`.
pub fn default_slope_bounds(pulse: f64, max_drive: f64) -> (f64, f64) {
    let s_pi = 1.0 / (2.0 * pulse * max_drive);
    (0.02 * s_pi, 4.0 * s_pi)
}

/// Find the slope s for which `predict(Ω = 2π s d)` best matches the
/// observed transferred fractions: a geometric grid of
/// [`CALIBRATION_GRID`] slopes over `bounds`, then golden-section search in
/// the bracket around the best grid point.
pub fn fit_rabi_calibration(
    points: &[(f64, f64)],
    bounds: (f64, f64),
    mut predict: impl FnMut(f64) -> Result<f64>,
) -> Result<CalibrationMap> {
    if points.len() < 5 {
        return Err(Error::Fit(format!("calibration needs at least 5 drive levels, got {}", points.len())));
    }
    if points.iter().all(|&(_, f)| f.abs() < 1e-12) {
        return Err(Error::Fit("all transferred fractions are zero; the slope is undetermined".into()));
    }
    if !(bounds.0 > 0.0 && bounds.1 > bounds.0) {
        return Err(Error::Fit(format!("slope bounds {bounds:?} must be positive and increasing")));
    }
    let mut evaluations = 0;
    let mut misfit = |s: f64| -> Result<f64> {
        let mut acc = 0.0;
        for &(d, f) in points {
            let p = predict(2.0 * std::f64::consts::PI * s * d)?;
            evaluations += 1;
            acc += (p - f) * (p - f);
        }
        Ok(acc)
    };
    let ratio = (bounds.1 / bounds.0).ln();
    let grid: Vec<f64> = (0..CALIBRATION_GRID)
        .map(|i| bounds.0 * (ratio * i as f64 / (CALIBRATION_GRID - 1) as f64).exp())
        .collect();
    let mut costs = Vec::with_capacity(grid.len());
    for &s in &grid {
        costs.push(misfit(s)?);
    }
    let best = costs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(grid.len() - 1)];
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (misfit(c)?, misfit(d)?);
    while (b - a) > 1e-10 * (a + b) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = misfit(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = misfit(d)?;
        }
    }
    let slope = 0.5 * (a + b);
    let goodness = misfit(slope)?.sqrt();
    Ok(CalibrationMap {
        slope,
        goodness,
        evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub exponent: f64,
    pub stderr: f64,
    /// ln of the prefactor.
    pub intercept: f64,
    pub n_points: usize,
}

/// Ordinary least-squares slope of ln(fraction / coupling_on) against ln Ω₀,
/// over the points whose fraction is below a tenth of `plateau`.
pub fn power_law_exponent(omega0: &[f64], fraction: &[f64], coupling_on: f64, plateau: f64) -> Result<PowerLaw> {
    if omega0.len() != fraction.len() {
        return Err(Error::Fit("omega0 and fraction lengths differ".into()));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = omega0
        .iter()
        .zip(fraction)
        .filter(|(&w, &f)| w > 0.0 && f > 0.0 && f < 0.1 * plateau)
        .map(|(&w, &f)| (w.ln(), (f / coupling_on).ln()))
        .unzip();
    let n = lx.len();
    if n < 4 {
        return Err(Error::Fit(format!(
            "weak-regime filter (0 < fraction < 0.1 x plateau {plateau}) keeps {n} points, need 4"
        )));
    }
    let nf = n as f64;
    let mx = lx.iter().sum::<f64>() / nf;
    let my = ly.iter().sum::<f64>() / nf;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (sse / (nf - 2.0) / sxx).sqrt();
    Ok(PowerLaw {
        exponent: slope,
        stderr,
        intercept,
        n_points: n,
    })
}
