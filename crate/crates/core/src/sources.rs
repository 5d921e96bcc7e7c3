//! Input states: two-mode squeezed vacuum, the thermal-loss channel on the
//! relay arm, and random normal forms.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, TwoModeNormalForm, BONA_FIDE_TOL};
use crate::linalg::golden_max;

/// Rejection budget of [`sample_normal_form`].
pub const MAX_SAMPLING_ATTEMPTS: usize = 100_000;

/// Thermal-loss channel: transmissivity `eta` in `(0, 1]`, environment
/// variance `omega >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalLossParams {
    eta: f64,
    omega: f64,
}

impl ThermalLossParams {
    pub fn new(eta: f64, omega: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "transmissivity must lie in (0, 1], got {eta}"
            )));
        }
        if !(omega >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "thermal noise variance must be >= 1, got {omega}"
            )));
        }
        Ok(Self { eta, omega })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
}

/// Two-mode squeezed vacuum with quadrature variance `mu`.
pub fn tmsv(mu: f64) -> Result<TwoModeNormalForm> {
    if !(mu >= 1.0) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "TMSV variance must be >= 1, got {mu}"
        )));
    }
    TwoModeNormalForm::new(mu, mu, (mu * mu - 1.0).sqrt())
}

/// Sends mode `A` of a TMSV through a thermal-loss channel:
/// `x = ημ + (1-η)ω`, `y = μ`, `z = √η·√(μ²-1)`.
pub fn thermal_loss_on_a(nf: &TwoModeNormalForm, ch: &ThermalLossParams) -> Result<TwoModeNormalForm> {
    let mu = nf.y;
    let tmsv_z = (mu * mu - 1.0).max(0.0).sqrt();
    if (nf.x - mu).abs() > 1e-9 * mu || (nf.z.abs() - tmsv_z).abs() > 1e-9 * mu {
        return Err(Error::InvalidParameter(
            "thermal_loss_on_a expects a two-mode squeezed vacuum".into(),
        ));
    }
    let (eta, omega) = (ch.eta, ch.omega);
    TwoModeNormalForm::new(
        eta * mu + (1.0 - eta) * omega,
        mu,
        eta.sqrt() * (mu * mu - 1.0).sqrt(),
    )
}

/// Thermal-loss channel on one mode of an arbitrary state:
/// `V → K·V·Kᵀ + (1-η)ω·I_mode` with `K = √η` on that mode.
pub fn thermal_loss(state: &GaussianState, mode: usize, ch: &ThermalLossParams) -> Result<GaussianState> {
    let n = state.n_modes();
    if mode >= n {
        return Err(Error::ModeIndex { index: mode, n_modes: n });
    }
    let mut k = DMatrix::identity(2 * n, 2 * n);
    let mut noise = DMatrix::zeros(2 * n, 2 * n);
    for q in [2 * mode, 2 * mode + 1] {
        k[(q, q)] = ch.eta.sqrt();
        noise[(q, q)] = (1.0 - ch.eta) * ch.omega;
    }
    let cov = &k * state.cov() * k.transpose() + noise;
    GaussianState::new(&k * state.mean(), cov)
}

/// Largest `|z|` for which the normal form `(x, y, z)` is bona fide:
/// `z² ≤ min((x-1)(y+1), (x+1)(y-1))`.
pub fn max_correlation(x: f64, y: f64) -> f64 {
    ((x - 1.0) * (y + 1.0))
        .min((x + 1.0) * (y - 1.0))
        .max(0.0)
        .sqrt()
}

/// Output log-negativity of two-user swapping, `-ln(y - z²/x)`, without
/// clamping at zero.
pub fn two_user_output_raw(nf: &TwoModeNormalForm) -> f64 {
    -(nf.y - nf.z * nf.z / nf.x).ln()
}

/// A sampled normal form together with its entanglement before and after
/// two-user swapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledForm {
    pub nf: TwoModeNormalForm,
    /// Log-negativity of the input state.
    pub e_in: f64,
    /// Log-negativity between the two `B` modes after two-user swapping.
    pub e_out: f64,
    /// Number of draws it took, including the accepted one.
    pub attempts: usize,
}

impl SampledForm {
    pub fn asymmetry(&self) -> f64 {
        self.nf.asymmetry()
    }
}

/// Draws an entangled bona-fide normal form: `x`, `y` log-uniform on
/// `[1, x_max]`, `z` uniform on `[-z_max, z_max]` with `z_max` the
/// bona-fide bound; separable or unphysical draws are rejected.
pub fn sample_normal_form<R: Rng + ?Sized>(rng: &mut R, x_max: f64) -> Result<SampledForm> {
    if !(x_max > 1.0) || !x_max.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "x_max must be finite and > 1, got {x_max}"
        )));
    }
    let log_max = x_max.ln();
    for attempt in 1..=MAX_SAMPLING_ATTEMPTS {
        let x = (rng.random::<f64>() * log_max).exp();
        let y = (rng.random::<f64>() * log_max).exp();
        let z_max = max_correlation(x, y);
        let z = (2.0 * rng.random::<f64>() - 1.0) * z_max;
        let Ok(nf) = TwoModeNormalForm::new(x, y, z) else {
            continue;
        };
        let e_in = nf.log_negativity();
        if e_in <= 0.0 {
            continue;
        }
        return Ok(SampledForm {
            nf,
            e_in,
            e_out: two_user_output_raw(&nf).max(0.0),
            attempts: attempt,
        });
    }
    Err(Error::SamplingExhausted(MAX_SAMPLING_ATTEMPTS))
}

/// Two-user output log-negativity of the TMSV whose input log-negativity is
/// `e_in`: the TMSV with `μ = cosh(e_in)` swaps to `ln μ`.
pub fn tmsv_output_bound(e_in: f64) -> f64 {
    e_in.cosh().ln()
}

/// Tolerance of the asymmetry-frontier search.
pub const FRONTIER_TOL: f64 = 1e-6;

/// Largest two-user output log-negativity over bona-fide normal forms with
/// asymmetry `d` and `x, y ∈ [1, x_max]`.
///
/// Golden-section search over `z` at each point of a grid in `x`, then the
/// grid is repeatedly narrowed around the best point until its spacing
/// drops below [`FRONTIER_TOL`]. Returns `(value, argmax nf)`, or `None`
/// when no admissible `x` exists for this `d`.
pub fn max_output_for_asymmetry(d: f64, x_max: f64) -> Option<(f64, TwoModeNormalForm)> {
    // y = x - 2d must also lie in [1, x_max].
    let lo = 1.0_f64.max(1.0 + 2.0 * d);
    let hi = x_max.min(x_max + 2.0 * d);
    if !(hi >= lo) {
        return None;
    }
    let best_z = |x: f64| -> (f64, f64) {
        let y = x - 2.0 * d;
        let z_max = max_correlation(x, y);
        if z_max == 0.0 {
            return (0.0, -(y.ln()));
        }
        golden_max(
            |z| {
                let v = y - z * z / x;
                if v > 0.0 {
                    -v.ln()
                } else {
                    f64::NEG_INFINITY
                }
            },
            0.0,
            z_max,
            FRONTIER_TOL * z_max.max(1.0),
        )
    };

    const GRID: usize = 33;
    let (mut a, mut b) = (lo, hi);
    let mut best = (f64::NEG_INFINITY, lo, 0.0);
    loop {
        let step = (b - a) / (GRID - 1) as f64;
        for i in 0..GRID {
            let x = a + step * i as f64;
            let (z, value) = best_z(x);
            if value > best.0 {
                best = (value, x, z);
            }
        }
        if step <= FRONTIER_TOL || b == a {
            break;
        }
        a = (best.1 - step).max(lo);
        b = (best.1 + step).min(hi);
    }
    let (value, x, z) = best;
    let nf = TwoModeNormalForm::new(x, x - 2.0 * d, z)
        .or_else(|_| TwoModeNormalForm::new(x, x - 2.0 * d, z * (1.0 - BONA_FIDE_TOL)))
        .ok()?;
    Some((value.max(0.0), nf))
}
