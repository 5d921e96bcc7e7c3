//! Gaussian states in the covariance-matrix formalism.
//!
//! Quadratures are ordered `(X₁, P₁, X₂, P₂, …)` and normalized so that
//! `[ξ_l, ξ_m] = 2iΩ_lm`; the vacuum covariance matrix is the identity.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    max_abs, quadrature_indices, relative_asymmetry, spd_sqrt, submatrix, subvector, symmetrize,
};

/// Allowed shortfall of the smallest symplectic eigenvalue below one.
pub const BONA_FIDE_TOL: f64 = 1e-9;
/// Relative asymmetry accepted for a covariance matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Absolute deviation of `SΩSᵀ` from `Ω` accepted for a symplectic matrix.
pub const SYMPLECTIC_TOL: f64 = 1e-10;
/// Spread allowed inside each pair of doubled singular values, relative to
/// the largest one.
pub const PAIRING_TOL: f64 = 1e-8;

/// Block-diagonal symplectic form `⊕ [[0, 1], [-1, 0]]` on `n_modes` modes.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// Symplectic eigenvalues of a symmetric positive-definite covariance matrix,
/// ascending.
///
/// These are the moduli of the eigenvalues of `iΩV`. `ΩV` is similar to the
/// antisymmetric `K = V^{1/2} Ω V^{1/2}`, whose singular values are exactly
/// those moduli, each appearing twice; the SVD keeps absolute error at the
/// level of `ε·ν_max` without a non-symmetric eigensolver.
pub fn symplectic_eigenvalues(cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    let dim = cov.nrows();
    if dim == 0 || !dim.is_multiple_of(2) || cov.ncols() != dim {
        return Err(Error::Dimension(format!(
            "covariance matrix must be 2n x 2n, got {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let asym = relative_asymmetry(cov);
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let root = spd_sqrt(&symmetrize(cov)).ok_or(Error::NotPositiveDefinite)?;
    let k = &root * symplectic_form(dim / 2) * &root;
    let mut sv: Vec<f64> = k.singular_values().iter().copied().collect();
    sv.sort_by(f64::total_cmp);
    let largest = sv.last().copied().unwrap_or(1.0).max(1.0);
    Ok(sv
        .chunks_exact(2)
        .map(|pair| {
            debug_assert!(
                (pair[1] - pair[0]).abs() <= PAIRING_TOL * largest,
                "unpaired symplectic spectrum {pair:?}"
            );
            0.5 * (pair[0] + pair[1])
        })
        .collect())
}

/// Partial transposition: flips the sign of `P` on every mode in `modes`.
/// Applying it twice returns the input exactly.
pub fn partial_transpose(cov: &DMatrix<f64>, modes: &[usize]) -> DMatrix<f64> {
    let mut out = cov.clone();
    for &m in modes {
        let p = 2 * m + 1;
        out.row_mut(p).neg_mut();
        out.column_mut(p).neg_mut();
    }
    out
}

/// A Gaussian state: mean vector and covariance matrix on `n_modes` modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "StateRecord", try_from = "StateRecord")]
pub struct GaussianState {
    n_modes: usize,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Validates shape, symmetry and the bona-fide condition.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = cov.nrows();
        if dim == 0 || !dim.is_multiple_of(2) || cov.ncols() != dim || mean.len() != dim {
            return Err(Error::Dimension(format!(
                "mean of length {} with {}x{} covariance",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        let asym = relative_asymmetry(&cov);
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        let cov = symmetrize(&cov);
        let nu_min = symplectic_eigenvalues(&cov)?[0];
        if nu_min < 1.0 - BONA_FIDE_TOL {
            return Err(Error::Unphysical(nu_min));
        }
        Ok(Self {
            n_modes: dim / 2,
            mean,
            cov,
        })
    }

    pub fn zero_mean(cov: DMatrix<f64>) -> Result<Self> {
        let dim = cov.nrows();
        Self::new(DVector::zeros(dim), cov)
    }

    /// Internal constructor for results of operations that preserve physicality
    /// up to rounding; only the symmetry is restored.
    pub(crate) fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self {
            n_modes: cov.nrows() / 2,
            mean,
            cov: symmetrize(&cov),
        }
    }

    pub fn vacuum(n_modes: usize) -> Self {
        Self::thermal(n_modes, 1.0).expect("vacuum is bona fide")
    }

    /// Product of identical thermal states with quadrature variance `variance`.
    pub fn thermal(n_modes: usize, variance: f64) -> Result<Self> {
        if n_modes == 0 || variance < 1.0 - BONA_FIDE_TOL {
            return Err(Error::InvalidParameter(format!(
                "thermal state needs n_modes >= 1 and variance >= 1, got {n_modes}, {variance}"
            )));
        }
        Ok(Self::from_parts(
            DVector::zeros(2 * n_modes),
            DMatrix::identity(2 * n_modes, 2 * n_modes) * variance,
        ))
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        symplectic_eigenvalues(&self.cov)
    }

    /// Checks the bona-fide condition, returning the smallest symplectic
    /// eigenvalue clamped to one when it is within tolerance.
    pub fn check_bona_fide(&self) -> Result<f64> {
        let nu_min = self.symplectic_eigenvalues()?[0];
        if nu_min < 1.0 - BONA_FIDE_TOL {
            Err(Error::Unphysical(nu_min))
        } else {
            Ok(nu_min.max(1.0))
        }
    }

    fn check_mode(&self, index: usize) -> Result<()> {
        if index >= self.n_modes {
            Err(Error::ModeIndex {
                index,
                n_modes: self.n_modes,
            })
        } else {
            Ok(())
        }
    }

    /// Log-negativity (natural log) across the bipartition `partition | rest`.
    pub fn log_negativity(&self, partition: &[usize]) -> Result<f64> {
        if partition.is_empty() {
            return Err(Error::InvalidPartition("partition is empty".into()));
        }
        for &m in partition {
            self.check_mode(m)?;
        }
        let mut distinct = partition.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() != partition.len() {
            return Err(Error::InvalidPartition("repeated mode index".into()));
        }
        if distinct.len() == self.n_modes {
            return Err(Error::InvalidPartition(
                "partition contains every mode".into(),
            ));
        }
        let nus = symplectic_eigenvalues(&partial_transpose(&self.cov, partition))?;
        Ok(nus.iter().map(|nu| (-nu.ln()).max(0.0)).sum())
    }

    /// Applies `S` to the mean and `S·V·Sᵀ` to the covariance.
    pub fn apply_symplectic(&self, s: &DMatrix<f64>) -> Result<Self> {
        let dim = 2 * self.n_modes;
        if s.nrows() != dim || s.ncols() != dim {
            return Err(Error::Dimension(format!(
                "{}x{} transformation on a {}-mode state",
                s.nrows(),
                s.ncols(),
                self.n_modes
            )));
        }
        let omega = symplectic_form(self.n_modes);
        let dev = max_abs(&(s * &omega * s.transpose() - &omega));
        if dev > SYMPLECTIC_TOL {
            return Err(Error::NotSymplectic(dev));
        }
        Ok(Self::from_parts(s * &self.mean, s * &self.cov * s.transpose()))
    }

    pub fn displace(&self, mode: usize, dx: f64, dp: f64) -> Result<Self> {
        self.check_mode(mode)?;
        let mut mean = self.mean.clone();
        mean[2 * mode] += dx;
        mean[2 * mode + 1] += dp;
        Ok(Self {
            n_modes: self.n_modes,
            mean,
            cov: self.cov.clone(),
        })
    }

    /// Direct sum: the modes of `other` follow the modes of `self`.
    pub fn tensor(&self, other: &Self) -> Self {
        let (da, db) = (2 * self.n_modes, 2 * other.n_modes);
        let mut cov = DMatrix::zeros(da + db, da + db);
        cov.view_mut((0, 0), (da, da)).copy_from(&self.cov);
        cov.view_mut((da, da), (db, db)).copy_from(&other.cov);
        let mean = DVector::from_iterator(
            da + db,
            self.mean.iter().chain(other.mean.iter()).copied(),
        );
        Self {
            n_modes: self.n_modes + other.n_modes,
            mean,
            cov,
        }
    }

    /// Tensor product of several states, in order.
    pub fn tensor_all<'a, I>(states: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a GaussianState>,
    {
        states
            .into_iter()
            .fold(None, |acc: Option<Self>, s| match acc {
                None => Some(s.clone()),
                Some(a) => Some(a.tensor(s)),
            })
    }

    /// Marginal on `kept`, in the order given.
    pub fn reduce(&self, kept: &[usize]) -> Result<Self> {
        if kept.is_empty() {
            return Err(Error::InvalidPartition("no modes kept".into()));
        }
        for &m in kept {
            self.check_mode(m)?;
        }
        let idx = quadrature_indices(kept);
        Ok(Self {
            n_modes: kept.len(),
            mean: subvector(&self.mean, &idx),
            cov: submatrix(&self.cov, &idx, &idx),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// JSON layout: `n_modes`, flat `mean`, row-major flat `cov`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct StateRecord {
    n_modes: usize,
    mean: Vec<f64>,
    cov: Vec<f64>,
}

impl From<GaussianState> for StateRecord {
    fn from(s: GaussianState) -> Self {
        let dim = 2 * s.n_modes;
        let cov = (0..dim)
            .flat_map(|r| (0..dim).map(move |c| (r, c)))
            .map(|(r, c)| s.cov[(r, c)])
            .collect();
        Self {
            n_modes: s.n_modes,
            mean: s.mean.iter().copied().collect(),
            cov,
        }
    }
}

impl TryFrom<StateRecord> for GaussianState {
    type Error = Error;

    fn try_from(r: StateRecord) -> Result<Self> {
        let dim = 2 * r.n_modes;
        if r.cov.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "cov has {} entries, expected {}",
                r.cov.len(),
                dim * dim
            )));
        }
        GaussianState::new(
            DVector::from_vec(r.mean),
            DMatrix::from_row_slice(dim, dim, &r.cov),
        )
    }
}

/// Two-mode covariance matrix in normal form `[[x·I, z·Z], [z·Z, y·I]]`,
/// `Z = diag(1, -1)`, with mode `A` first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeNormalForm {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl TwoModeNormalForm {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::InvalidParameter("non-finite normal form".into()));
        }
        if x < 1.0 - BONA_FIDE_TOL || y < 1.0 - BONA_FIDE_TOL {
            return Err(Error::InvalidParameter(format!(
                "local variances must be >= 1, got x={x}, y={y}"
            )));
        }
        let nf = Self { x, y, z };
        let nu_min = nf.smallest_symplectic_eigenvalue();
        if nu_min < 1.0 - BONA_FIDE_TOL {
            return Err(Error::Unphysical(nu_min));
        }
        Ok(nf)
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let Self { x, y, z } = *self;
        DMatrix::from_row_slice(
            4,
            4,
            &[
                x, 0.0, z, 0.0, //
                0.0, x, 0.0, -z, //
                z, 0.0, y, 0.0, //
                0.0, -z, 0.0, y,
            ],
        )
    }

    pub fn to_state(&self) -> GaussianState {
        GaussianState::from_parts(DVector::zeros(4), self.covariance())
    }

    /// Asymmetry `d = (x - y)/2`.
    pub fn asymmetry(&self) -> f64 {
        0.5 * (self.x - self.y)
    }

    /// Closed-form smallest symplectic eigenvalue from the two-mode invariants.
    pub fn smallest_symplectic_eigenvalue(&self) -> f64 {
        let Self { x, y, z } = *self;
        let delta = x * x + y * y - 2.0 * z * z;
        let det = (x * y - z * z).powi(2);
        let disc = (delta * delta - 4.0 * det).max(0.0);
        (0.5 * (delta - disc.sqrt())).max(0.0).sqrt()
    }

    /// Log-negativity between `A` and `B`.
    pub fn log_negativity(&self) -> f64 {
        self.to_state()
            .log_negativity(&[1])
            .expect("normal form is a valid two-mode state")
    }
}
