//! Resolved-sideband spectroscopy model and mean-phonon-number estimation.
//!
//! Excitation on the red and blue motional sidebands of a thermal state is
//! modeled in the Lamb-Dicke regime. Synthetic scans carry binomial
//! projection noise; the estimator fits a Gaussian to each sideband and
//! converts the amplitude ratio `R = A_red / A_blue` into `n̄ = R / (1 − R)`.

use alloc::vec::Vec;

use nalgebra::{SMatrix, SVector};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::constants::HBAR;
use crate::numeric::golden_max;

/// Thermal tail mass below which the Fock sum is truncated.
pub const TAIL_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ThermoError {
    #[error("invalid scan: {0}")]
    InvalidScan(&'static str),
    #[error("mean phonon number must be non-negative (got {0})")]
    NegativeOccupation(f64),
    #[error("sideband amplitude ratio {ratio} >= 1: not a thermal state")]
    NonThermal { ratio: f64 },
    #[error("fit did not converge: {0}")]
    FitFailed(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sideband {
    Red,
    Blue,
    Carrier,
}

impl Sideband {
    pub fn as_str(self) -> &'static str {
        match self {
            Sideband::Red => "red",
            Sideband::Blue => "blue",
            Sideband::Carrier => "carrier",
        }
    }
}

/// Lamb-Dicke parameter `k √(ħ / (2 m ω))` for wavevector projection `k`
/// on the mode, rad/m.
pub fn lamb_dicke(k_projection: f64, mass: f64, mode_frequency: f64) -> f64 {
    k_projection.abs() * (HBAR / (2.0 * mass * mode_frequency)).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SidebandScan {
    /// Secular frequency of the probed mode, rad/s.
    pub mode_frequency: f64,
    pub eta: f64,
    /// Carrier Rabi frequency Ω₀, rad/s.
    pub rabi_frequency: f64,
    pub probe_time: f64,
    /// Laser detuning from the sideband center, rad/s.
    pub detunings: Vec<f64>,
    pub shots: u32,
}

impl SidebandScan {
    /// Probe time of a π pulse on the blue sideband from `n = 0`.
    pub fn blue_pi_time(eta: f64, rabi_frequency: f64) -> f64 {
        core::f64::consts::PI / (eta * rabi_frequency)
    }

    /// `points` detunings evenly spaced over `±half_span`.
    pub fn uniform_detunings(half_span: f64, points: usize) -> Vec<f64> {
        if points < 2 {
            return alloc::vec![0.0; points];
        }
        (0..points)
            .map(|i| -half_span + 2.0 * half_span * i as f64 / (points - 1) as f64)
            .collect()
    }

    pub fn validate(&self) -> Result<(), ThermoError> {
        if !(self.eta > 0.0 && self.eta < 0.5) {
            return Err(ThermoError::InvalidScan("eta must lie in (0, 0.5)"));
        }
        if self.shots < 1 {
            return Err(ThermoError::InvalidScan("at least one shot per point"));
        }
        if !(self.probe_time > 0.0) {
            return Err(ThermoError::InvalidScan("probe time must be positive"));
        }
        if !(self.rabi_frequency > 0.0 && self.mode_frequency > 0.0) {
            return Err(ThermoError::InvalidScan("frequencies must be positive"));
        }
        Ok(())
    }

    /// Rabi frequency of the transition starting from Fock state `n`.
    pub fn rabi(&self, sideband: Sideband, n: usize) -> f64 {
        let n = n as f64;
        match sideband {
            Sideband::Red => self.eta * self.rabi_frequency * n.sqrt(),
            Sideband::Blue => self.eta * self.rabi_frequency * (n + 1.0).sqrt(),
            Sideband::Carrier => self.rabi_frequency * (1.0 - self.eta * self.eta * n),
        }
    }
}

/// Thermal occupation probabilities `n̄ⁿ / (n̄ + 1)ⁿ⁺¹`, truncated once the
/// remaining tail mass is below [`TAIL_TOLERANCE`].
pub fn thermal_weights(nbar: f64) -> Vec<f64> {
    let r = nbar / (nbar + 1.0);
    let mut p = 1.0 / (nbar + 1.0);
    let mut w = Vec::new();
    // tail mass beyond index n is r^(n+1)
    let mut tail = r;
    loop {
        w.push(p);
        if tail < TAIL_TOLERANCE || p == 0.0 {
            break;
        }
        p *= r;
        tail *= r;
    }
    w
}

/// Excitation probability after the probe pulse at `detuning` from the
/// sideband center.
pub fn excitation_probability(
    scan: &SidebandScan,
    sideband: Sideband,
    nbar: f64,
    detuning: f64,
) -> f64 {
    excitation_with_weights(scan, sideband, &thermal_weights(nbar), detuning)
}

fn excitation_with_weights(
    scan: &SidebandScan,
    sideband: Sideband,
    weights: &[f64],
    detuning: f64,
) -> f64 {
    let d2 = detuning * detuning;
    let mut p = 0.0;
    for (n, &w) in weights.iter().enumerate() {
        let om = scan.rabi(sideband, n);
        let g2 = om * om + d2;
        if g2 == 0.0 {
            continue;
        }
        let s = (g2.sqrt() * scan.probe_time * 0.5).sin();
        p += w * om * om / g2 * s * s;
    }
    p.clamp(0.0, 1.0)
}

/// Measured (or exact) excitation fractions over a detuning grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanData {
    pub sideband: Sideband,
    pub detunings: Vec<f64>,
    pub excited: Vec<f64>,
    /// `None` for noiseless data.
    pub shots: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Noise {
    /// Exact probabilities.
    Analytic,
    /// Binomial projection noise with `scan.shots` repetitions.
    Binomial { seed: u64 },
}

/// Red and blue sideband scans of a thermal state with mean occupation
/// `nbar`.
pub fn synthesize_scan(
    scan: &SidebandScan,
    nbar: f64,
    noise: Noise,
) -> Result<(ScanData, ScanData), ThermoError> {
    scan.validate()?;
    if !(nbar >= 0.0) {
        return Err(ThermoError::NegativeOccupation(nbar));
    }
    let weights = thermal_weights(nbar);
    let mut rng = match noise {
        Noise::Binomial { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Noise::Analytic => None,
    };
    let mut one = |sb: Sideband| -> ScanData {
        let excited = scan
            .detunings
            .iter()
            .map(|&d| {
                let p = excitation_with_weights(scan, sb, &weights, d);
                match rng.as_mut() {
                    Some(r) => {
                        let draws = Binomial::new(u64::from(scan.shots), p)
                            .expect("p within [0, 1]")
                            .sample(r);
                        draws as f64 / f64::from(scan.shots)
                    }
                    None => p,
                }
            })
            .collect();
        ScanData {
            sideband: sb,
            detunings: scan.detunings.clone(),
            excited,
            shots: rng.as_ref().map(|_| scan.shots),
        }
    };
    let red = one(Sideband::Red);
    let blue = one(Sideband::Blue);
    Ok((red, blue))
}

/// `A exp(−(x − μ)² / (2σ²)) + c` with 1 s.d. parameter uncertainties.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub offset: f64,
    /// Standard errors of `[amplitude, center, width, offset]`.
    pub errors: [f64; 4],
    pub reduced_chi2: f64,
}

impl GaussianFit {
    pub fn eval(&self, x: f64) -> f64 {
        gaussian(
            &SVector::from([self.amplitude, self.center, self.width, self.offset]),
            x,
        )
    }
}

fn gaussian(p: &SVector<f64, 4>, x: f64) -> f64 {
    let u = (x - p[1]) / p[2];
    p[0] * (-0.5 * u * u).exp() + p[3]
}

fn gaussian_grad(p: &SVector<f64, 4>, x: f64) -> SVector<f64, 4> {
    let u = (x - p[1]) / p[2];
    let g = (-0.5 * u * u).exp();
    SVector::from([g, p[0] * g * u / p[2], p[0] * g * u * u / p[2], 1.0])
}

/// Levenberg–Marquardt weighted least squares for a model with `P`
/// parameters. Returns the parameters, `(JᵀWJ)⁻¹` and `χ²`.
fn levenberg_marquardt<const P: usize>(
    x: &[f64],
    y: &[f64],
    w: &[f64],
    mut p: SVector<f64, P>,
    model: impl Fn(&SVector<f64, P>, f64) -> f64,
    grad: impl Fn(&SVector<f64, P>, f64) -> SVector<f64, P>,
) -> Result<(SVector<f64, P>, SMatrix<f64, P, P>, f64), ThermoError> {
    let chi2 = |p: &SVector<f64, P>| -> f64 {
        x.iter()
            .zip(y)
            .zip(w)
            .map(|((&x, &y), &w)| w * (y - model(p, x)).powi(2))
            .sum()
    };
    let normal = |p: &SVector<f64, P>| {
        let mut jtj = SMatrix::<f64, P, P>::zeros();
        let mut jtr = SVector::<f64, P>::zeros();
        for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
            let g = grad(p, xi);
            jtj += g * g.transpose() * wi;
            jtr += g * (wi * (yi - model(p, xi)));
        }
        (jtj, jtr)
    };
    let mut lambda = 1e-3;
    let mut cost = chi2(&p);
    let mut converged = false;
    for _ in 0..500 {
        let (jtj, jtr) = normal(&p);
        let mut improved = false;
        for _ in 0..40 {
            let mut a = jtj;
            for k in 0..P {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let c = chi2(&trial);
            if c.is_finite() && c <= cost {
                let rel = (cost - c) / cost.max(1e-300);
                let small = step.norm() <= 1e-12 * (p.norm() + 1e-12);
                p = trial;
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-14 || small {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved || converged {
            converged = true;
            break;
        }
    }
    if !converged || !p.iter().all(|v| v.is_finite()) {
        return Err(ThermoError::FitFailed("no convergence"));
    }
    let (jtj, _) = normal(&p);
    let inv = jtj
        .try_inverse()
        .ok_or(ThermoError::FitFailed("singular normal matrix"))?;
    Ok((p, inv, cost))
}

fn gaussian_start(x: &[f64], y: &[f64]) -> Result<SVector<f64, 4>, ThermoError> {
    if x.len() != y.len() || x.len() < 5 {
        return Err(ThermoError::InvalidScan("need at least five points"));
    }
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(ThermoError::InvalidScan("empty scan"))?;
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let span = x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - x.iter().copied().fold(f64::INFINITY, f64::min);
    // centroid of the baseline-subtracted data as the center guess
    let (mut sw, mut sx) = (0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let w = (yi - ymin).max(0.0);
        sw += w;
        sx += w * xi;
    }
    let center = if sw > 0.0 { sx / sw } else { x[imax] };
    Ok(SVector::from([
        (ymax - ymin).max(1e-6),
        center,
        span / 6.0,
        ymin,
    ]))
}

fn to_fit(p: &SVector<f64, 4>, cov: &SMatrix<f64, 4, 4>, reduced_chi2: f64) -> GaussianFit {
    GaussianFit {
        amplitude: p[0],
        center: p[1],
        width: p[2].abs(),
        offset: p[3],
        errors: [
            cov[(0, 0)].sqrt(),
            cov[(1, 1)].sqrt(),
            cov[(2, 2)].sqrt(),
            cov[(3, 3)].sqrt(),
        ],
        reduced_chi2,
    }
}

/// Unweighted least-squares Gaussian fit with offset; the covariance is
/// scaled by the residual variance.
pub fn fit_gaussian(x: &[f64], y: &[f64]) -> Result<GaussianFit, ThermoError> {
    let start = gaussian_start(x, y)?;
    let ones = alloc::vec![1.0; x.len()];
    let (p, inv, cost) = levenberg_marquardt(x, y, &ones, start, gaussian, gaussian_grad)?;
    let s2 = cost / x.len().saturating_sub(4).max(1) as f64;
    Ok(to_fit(&p, &(inv * s2), s2))
}

/// Gaussian fit to excitation fractions from `shots` repetitions, weighted
/// by the binomial variance of the fitted curve (iteratively reweighted).
/// The covariance is inflated by the reduced χ² when it exceeds one.
pub fn fit_gaussian_binomial(x: &[f64], y: &[f64], shots: u32) -> Result<GaussianFit, ThermoError> {
    if shots < 1 {
        return Err(ThermoError::InvalidScan("at least one shot per point"));
    }
    let n = f64::from(shots);
    let mut p =
        SVector::from(fit_gaussian(x, y).map(|f| [f.amplitude, f.center, f.width, f.offset])?);
    let mut out = None;
    for _ in 0..4 {
        // regularized binomial variance stays finite at p = 0 and 1
        let w: Vec<f64> = x
            .iter()
            .map(|&xi| {
                let q = (gaussian(&p, xi).clamp(0.0, 1.0) * n + 0.5) / (n + 1.0);
                n / (q * (1.0 - q))
            })
            .collect();
        let (np, inv, cost) = levenberg_marquardt(x, y, &w, p, gaussian, gaussian_grad)?;
        p = np;
        out = Some((inv, cost));
    }
    let (inv, cost) = out.expect("at least one pass");
    let red = cost / x.len().saturating_sub(4).max(1) as f64;
    Ok(to_fit(&p, &(inv * red.max(1.0)), red))
}

fn fit_scan(data: &ScanData) -> Result<GaussianFit, ThermoError> {
    match data.shots {
        Some(n) => fit_gaussian_binomial(&data.detunings, &data.excited, n),
        None => fit_gaussian(&data.detunings, &data.excited),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalEstimate {
    pub nbar: f64,
    /// 1 s.d., propagated from the fit covariances.
    pub uncertainty: f64,
    pub ratio: f64,
    pub ratio_uncertainty: f64,
    pub red: GaussianFit,
    pub blue: GaussianFit,
}

/// `n̄ = R / (1 − R)`; negative ratios (noise) map to zero.
pub fn nbar_from_ratio(ratio: f64) -> Result<f64, ThermoError> {
    if !(ratio < 1.0) {
        return Err(ThermoError::NonThermal { ratio });
    }
    Ok(ratio.max(0.0) / (1.0 - ratio.max(0.0)))
}

/// Mean phonon number from Gaussian fits to red and blue sideband scans.
/// Scans with a shot count are fitted with binomial weights.
pub fn estimate_nbar(red: &ScanData, blue: &ScanData) -> Result<ThermalEstimate, ThermoError> {
    let r = fit_scan(red)?;
    let b = fit_scan(blue)?;
    if !(b.amplitude > 0.0) {
        return Err(ThermoError::FitFailed(
            "blue sideband amplitude is not positive",
        ));
    }
    let ratio = r.amplitude / b.amplitude;
    let nbar = nbar_from_ratio(ratio)?;
    let rel_r = if r.amplitude != 0.0 {
        r.errors[0] / r.amplitude
    } else {
        0.0
    };
    let ratio_uncertainty = if r.amplitude != 0.0 {
        ratio.abs() * (rel_r * rel_r + (b.errors[0] / b.amplitude).powi(2)).sqrt()
    } else {
        r.errors[0] / b.amplitude
    };
    let uncertainty = ratio_uncertainty / (1.0 - ratio).powi(2);
    Ok(ThermalEstimate {
        nbar,
        uncertainty,
        ratio,
        ratio_uncertainty,
        red: r,
        blue: b,
    })
}

/// Secondary estimator: fits the full thermal lineshape model to both scans
/// jointly with `n̄` as the only free parameter. Returns `(n̄, 1 s.d.)`.
pub fn estimate_nbar_lineshape(
    scan: &SidebandScan,
    red: &ScanData,
    blue: &ScanData,
) -> Result<(f64, f64), ThermoError> {
    scan.validate()?;
    let rss = |n: f64| -> f64 {
        let w = thermal_weights(n);
        let mut s = 0.0;
        for (data, sb) in [(red, Sideband::Red), (blue, Sideband::Blue)] {
            for (&d, &y) in data.detunings.iter().zip(&data.excited) {
                let e = y - excitation_with_weights(scan, sb, &w, d);
                s += e * e;
            }
        }
        s
    };
    // coarse scan then golden refinement
    let grid: Vec<f64> = (0..=200)
        .map(|k| 5.0 * (k as f64 / 200.0).powi(2))
        .collect();
    let k = (0..grid.len())
        .min_by(|&a, &b| rss(grid[a]).total_cmp(&rss(grid[b])))
        .unwrap_or(0);
    let lo = grid[k.saturating_sub(1)];
    let hi = grid[(k + 1).min(grid.len() - 1)];
    let (nbar, neg) = golden_max(|n| -rss(n), lo, hi, 1e-10);
    let points = red.excited.len() + blue.excited.len();
    let s2 = -neg / (points.saturating_sub(1).max(1) as f64);
    let h = 1e-6 * (1.0 + nbar);
    let (wp, wm) = (
        thermal_weights(nbar + h),
        thermal_weights((nbar - h).max(0.0)),
    );
    let dn = nbar + h - (nbar - h).max(0.0);
    let mut jtj = 0.0;
    for (data, sb) in [(red, Sideband::Red), (blue, Sideband::Blue)] {
        for &d in &data.detunings {
            let j = (excitation_with_weights(scan, sb, &wp, d)
                - excitation_with_weights(scan, sb, &wm, d))
                / dn;
            jtj += j * j;
        }
    }
    if !(jtj > 0.0) {
        return Err(ThermoError::FitFailed(
            "lineshape insensitive to occupation",
        ));
    }
    Ok((nbar, (s2 / jtj).sqrt()))
}
