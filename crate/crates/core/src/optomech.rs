//! Linearized cavity optomechanics.
//!
//! Fluctuations of one optomechanical cavity, ordered `(q, p, X, P)`
//! (mechanics, then cavity), obey `u̇ = A·u + noise` with diffusion `D`.
//! The steady-state covariance solves `A·V + V·Aᵀ = -D`. With vacuum
//! variance 1, `D = diag(0, 2γ_m(2n̄+1), 2κ, 2κ)`, which makes the
//! uncoupled steady state exactly `diag(2n̄+1, 2n̄+1, 1, 1)`.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::linalg::{max_abs, spd_sqrt, symmetrize};
use crate::relay::{bell_detect, build_relay, BellOutcome};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;

/// Accepted Lyapunov residual relative to `‖D‖`.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-8;

/// How a quoted cavity decay of "31.4 MHz" is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaConvention {
    /// The number is already an angular rate: κ = 3.14×10⁷ rad/s.
    Angular,
    /// The number is an ordinary frequency: κ = 2π × 31.4 MHz.
    Ordinary,
}

impl KappaConvention {
    pub fn kappa(self, quoted_hz: f64) -> f64 {
        match self {
            KappaConvention::Angular => quoted_hz,
            KappaConvention::Ordinary => 2.0 * std::f64::consts::PI * quoted_hz,
        }
    }
}

impl FromStr for KappaConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "angular" => Ok(Self::Angular),
            "ordinary" => Ok(Self::Ordinary),
            other => Err(Error::InvalidParameter(format!(
                "unknown kappa convention '{other}' (expected angular or ordinary)"
            ))),
        }
    }
}

/// Parameters of one optomechanical building block. Rates are in rad/s,
/// temperature in kelvin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptomechParams {
    pub omega_m: f64,
    pub gamma_m: f64,
    pub kappa: f64,
    pub delta: f64,
    pub g_eff: f64,
    pub temp: f64,
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

impl OptomechParams {
    pub fn new(omega_m: f64, gamma_m: f64, kappa: f64, delta: f64, g_eff: f64, temp: f64) -> Result<Self> {
        let p = Self {
            omega_m,
            gamma_m,
            kappa,
            delta,
            g_eff,
            temp,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let all = [self.omega_m, self.gamma_m, self.kappa, self.delta, self.g_eff, self.temp];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite optomechanical parameter".into()));
        }
        if self.omega_m <= 0.0 {
            return Err(Error::InvalidParameter("omega_m must be positive".into()));
        }
        if self.gamma_m < 0.0 || self.kappa < 0.0 || self.g_eff < 0.0 || self.temp < 0.0 {
            return Err(Error::InvalidParameter(
                "gamma_m, kappa, g_eff and temp must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Benchmark block: `ω_m/2π = 10 MHz`, `γ_m/2π = 100 Hz`, quoted
    /// `κ = 31.4 MHz`, `T = 0.4 mK`; `g_eff` given as an ordinary frequency
    /// (Hz) and `delta` as a multiple of `ω_m`.
    pub fn benchmark(convention: KappaConvention, g_eff_hz: f64, delta_over_omega_m: f64) -> Self {
        let omega_m = TWO_PI * 10e6;
        Self {
            omega_m,
            gamma_m: TWO_PI * 100.0,
            kappa: convention.kappa(31.4e6),
            delta: delta_over_omega_m * omega_m,
            g_eff: TWO_PI * g_eff_hz,
            temp: 0.4e-3,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_temp(mut self, temp: f64) -> Self {
        self.temp = temp;
        self
    }

    pub fn with_g_eff(mut self, g_eff: f64) -> Self {
        self.g_eff = g_eff;
        self
    }

    /// Bath occupation, always derived from `temp` and `omega_m`.
    pub fn n_bar(&self) -> f64 {
        mean_occupation(self.omega_m, self.temp).expect("validated parameters")
    }
}

/// Bose–Einstein occupation `1/(exp(ħω/k_B T) - 1)`; zero at `T = 0`.
pub fn mean_occupation(omega_m: f64, temp: f64) -> Result<f64> {
    if temp < 0.0 || !temp.is_finite() {
        return Err(Error::InvalidParameter(format!("temperature must be >= 0, got {temp}")));
    }
    if omega_m <= 0.0 {
        return Err(Error::InvalidParameter("omega_m must be positive".into()));
    }
    if temp == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (HBAR * omega_m / (K_B * temp)).exp_m1())
}

/// Drift and diffusion matrices in rad/s, ordering `(q, p, X, P)`.
pub fn drift_diffusion(p: &OptomechParams) -> (DMatrix<f64>, DMatrix<f64>) {
    let OptomechParams {
        omega_m: w,
        gamma_m: g,
        kappa: k,
        delta: d,
        g_eff: c,
        ..
    } = *p;
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        0.0,  w,   0.0, 0.0,
        -w,   -g,  c,   0.0,
        0.0,  0.0, -k,  d,
        c,    0.0, -d,  -k,
    ]);
    let n_bar = p.n_bar();
    let diffusion = DMatrix::from_diagonal(&DVector::from_vec(vec![
        0.0,
        2.0 * g * (2.0 * n_bar + 1.0),
        2.0 * k,
        2.0 * k,
    ]));
    (a, diffusion)
}

/// Largest real part among the eigenvalues of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `true` iff every eigenvalue of `a` has real part below `-1e-12·‖a‖_F`.
pub fn is_stable(a: &DMatrix<f64>) -> bool {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return false;
    }
    spectral_abscissa(a) < -1e-12 * a.norm()
}

/// Solves `A·X + X·Aᵀ = -D` through the Kronecker form
/// `(I ⊗ A + A ⊗ I)·vec X = -vec D`.
pub fn solve_lyapunov(a: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || d.nrows() != n || d.ncols() != n {
        return Err(Error::Dimension("Lyapunov operands must be square and equal".into()));
    }
    let id = DMatrix::<f64>::identity(n, n);
    let system = id.kronecker(a) + a.kronecker(&id);
    let rhs = DVector::from_iterator(n * n, d.iter().map(|v| -v));
    let vec_x = system.lu().solve(&rhs).ok_or(Error::Singular)?;
    let x = symmetrize(&DMatrix::from_column_slice(n, n, vec_x.as_slice()));
    let residual = lyapunov_residual(a, d, &x);
    let scale = max_abs(d).max(f64::MIN_POSITIVE);
    if residual > LYAPUNOV_RESIDUAL_TOL * scale {
        return Err(Error::LyapunovResidual(residual / scale));
    }
    Ok(x)
}

/// `‖A·X + X·Aᵀ + D‖_max`.
pub fn lyapunov_residual(a: &DMatrix<f64>, d: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    max_abs(&(a * x + x * a.transpose() + d))
}

/// Steady-state covariance matrix in units of `ω_m`, ordering `(q, p, X, P)`,
/// with the normalized drift and diffusion used to obtain it.
pub fn steady_state_raw(p: &OptomechParams) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    p.validate()?;
    let (a, d) = drift_diffusion(p);
    let (a, d) = (a / p.omega_m, d / p.omega_m);
    if !is_stable(&a) {
        return Err(Error::Unstable(spectral_abscissa(&a)));
    }
    let v = solve_lyapunov(&a, &d)?;
    Ok((a, d, v))
}

/// Two-mode steady state ordered `(A, B) = (cavity, mechanics)`.
pub fn steady_state_cm(p: &OptomechParams) -> Result<GaussianState> {
    let (_, _, v) = steady_state_raw(p)?;
    let order = [2, 3, 0, 1];
    let reordered = DMatrix::from_fn(4, 4, |r, c| v[(order[r], order[c])]);
    GaussianState::zero_mean(reordered)
}

/// Local symplectic bringing a two-mode covariance matrix to standard form
/// `[[a·I, C], [Cᵀ, b·I]]` with `C = diag(c₊, c₋)`, `c₊ ≥ |c₋|`.
///
/// Each local block `M` is first mapped to `√det M · I` by
/// `(det M)^{1/4}·M^{-1/2}`, then proper rotations diagonalize the
/// cross block.
pub fn standard_form_transform(state: &GaussianState) -> Result<DMatrix<f64>> {
    if state.n_modes() != 2 {
        return Err(Error::Dimension("standard form needs a two-mode state".into()));
    }
    let v = state.cov();
    let normalize = |m: DMatrix<f64>| -> Result<DMatrix<f64>> {
        let root = spd_sqrt(&m).ok_or(Error::NotPositiveDefinite)?;
        let inv = root.try_inverse().ok_or(Error::Singular)?;
        Ok(inv * m.determinant().powf(0.25))
    };
    let sa = normalize(v.view((0, 0), (2, 2)).into_owned())?;
    let sb = normalize(v.view((2, 2), (2, 2)).into_owned())?;
    let cross = &sa * v.view((0, 2), (2, 2)) * sb.transpose();

    let svd = cross.svd(true, true);
    let mut u = svd.u.expect("u requested");
    let mut w = svd.v_t.expect("v_t requested").transpose();
    // Make both rotations proper; a single reflection moves into c₋'s sign.
    if u.determinant() < 0.0 {
        u.column_mut(1).neg_mut();
    }
    if w.determinant() < 0.0 {
        w.column_mut(1).neg_mut();
    }

    let mut s = DMatrix::zeros(4, 4);
    s.view_mut((0, 0), (2, 2)).copy_from(&(u.transpose() * sa));
    s.view_mut((2, 2), (2, 2)).copy_from(&(w.transpose() * sb));
    Ok(s)
}

/// Applies [`standard_form_transform`].
pub fn to_standard_form(state: &GaussianState) -> Result<GaussianState> {
    state.apply_symplectic(&standard_form_transform(state)?)
}

/// A mechanical cluster produced by the relay from `N` identical cavities.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanicalCluster {
    /// Conditional state of the `N` mechanical modes.
    pub state: GaussianState,
    /// Log-negativity between any two mechanical modes.
    pub e_mech: f64,
    /// Optical–mechanical log-negativity of one building block.
    pub e_in: f64,
}

pub fn mechanical_cluster(
    p: &OptomechParams,
    n_users: usize,
    local_preprocessing: bool,
) -> Result<MechanicalCluster> {
    let block = steady_state_cm(p)?;
    let e_in = block.log_negativity(&[1])?;
    let block = if local_preprocessing {
        to_standard_form(&block)?
    } else {
        block
    };
    let plan = build_relay(n_users)?;
    let state = bell_detect(&vec![block; n_users], &plan, &BellOutcome::zeros(n_users))?;
    let e_mech = state.reduce(&[0, 1])?.log_negativity(&[1])?;
    Ok(MechanicalCluster { state, e_mech, e_in })
}

/// One point of a detuning sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub delta_over_omega_m: f64,
    pub n_users: usize,
    pub stable: bool,
    /// `NaN` when unstable.
    pub e_in: f64,
    /// `NaN` when unstable.
    pub e_mech: f64,
}

pub fn sweep_point(p: &OptomechParams, n_users: usize, local_preprocessing: bool) -> Result<SweepPoint> {
    let delta_over_omega_m = p.delta / p.omega_m;
    match mechanical_cluster(p, n_users, local_preprocessing) {
        Ok(c) => Ok(SweepPoint {
            delta_over_omega_m,
            n_users,
            stable: true,
            e_in: c.e_in,
            e_mech: c.e_mech,
        }),
        Err(Error::Unstable(_)) => Ok(SweepPoint {
            delta_over_omega_m,
            n_users,
            stable: false,
            e_in: f64::NAN,
            e_mech: f64::NAN,
        }),
        Err(e) => Err(e),
    }
}
