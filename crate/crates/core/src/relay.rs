//! The multipartite Bell relay.
//!
//! `N` copies of a two-mode state `ρ_AB` are combined; the `A` modes go
//! through a cascade of `N - 1` beam splitters with transmissivities
//! `T_k = 1 - 1/k` and every output is homodyned (`P` on the first output,
//! `X` on the others). The `B` modes are left in a permutation-symmetric
//! Gaussian cluster state whose covariance matrix is also available in
//! closed form through [`cluster_closed_form`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, TwoModeNormalForm};
use crate::linalg::{quadrature_indices, submatrix, subvector};

/// Absolute tolerance on `O·Oᵀ = I` for the relay's mode-mixing matrix.
pub const ORTHO_TOL: f64 = 1e-12;
/// Singular values below this fraction of the largest are dropped in the
/// pseudo-inverse used for conditioning.
pub const PINV_CUTOFF: f64 = 1e-12;
/// Smallest measured-quadrature variance that can be conditioned on.
pub const MIN_MEASURED_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    X,
    P,
}

impl Quadrature {
    /// Phase-space angle of the measured direction `(cos θ, sin θ)`.
    pub fn angle(self) -> f64 {
        match self {
            Quadrature::X => 0.0,
            Quadrature::P => std::f64::consts::FRAC_PI_2,
        }
    }

    fn direction(self) -> [f64; 2] {
        match self {
            Quadrature::X => [1.0, 0.0],
            Quadrature::P => [0.0, 1.0],
        }
    }
}

/// The relay's interferometer and homodyne schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayPlan {
    n_users: usize,
    ortho: DMatrix<f64>,
    /// `(output mode, quadrature)`, 0-based, in measurement order.
    measurements: Vec<(usize, Quadrature)>,
}

impl RelayPlan {
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    /// Mode-mixing matrix acting identically on the `X` and `P` vectors of
    /// the `A` modes.
    pub fn ortho(&self) -> &DMatrix<f64> {
        &self.ortho
    }

    pub fn measurements(&self) -> &[(usize, Quadrature)] {
        &self.measurements
    }

    /// Same relay with the homodynes performed in a different order.
    pub fn with_measurement_order(&self, order: &[usize]) -> Result<Self> {
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..self.measurements.len()).collect::<Vec<_>>() {
            return Err(Error::InvalidParameter(
                "measurement order must be a permutation".into(),
            ));
        }
        Ok(Self {
            n_users: self.n_users,
            ortho: self.ortho.clone(),
            measurements: order.iter().map(|&i| self.measurements[i]).collect(),
        })
    }

    /// `ortho ⊗ I₂`, the symplectic action of the interferometer on the `A`
    /// modes in interleaved ordering.
    pub fn symplectic(&self) -> DMatrix<f64> {
        let n = self.n_users;
        DMatrix::from_fn(2 * n, 2 * n, |r, c| {
            if r % 2 == c % 2 {
                self.ortho[(r / 2, c / 2)]
            } else {
                0.0
            }
        })
    }
}

fn check_users(n_users: usize) -> Result<()> {
    if n_users < 2 {
        Err(Error::InvalidParameter(format!(
            "the relay needs at least 2 users, got {n_users}"
        )))
    } else {
        Ok(())
    }
}

/// Builds the `N`-user relay from its output quadrature rows: row 0 is the
/// uniform average `(1/√N)·Σ e_i` (measured in `P`); row `k-1`, `k = 2..N`,
/// is `√(1 - 1/k)·(e_k - (k-1)⁻¹·Σ_{i<k} e_i)` (measured in `X`).
pub fn build_relay(n_users: usize) -> Result<RelayPlan> {
    check_users(n_users)?;
    let n = n_users;
    let mut ortho = DMatrix::zeros(n, n);
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    for c in 0..n {
        ortho[(0, c)] = inv_sqrt_n;
    }
    for k in 2..=n {
        let scale = (1.0 - 1.0 / k as f64).sqrt();
        let share = 1.0 / (k - 1) as f64;
        for i in 0..k - 1 {
            ortho[(k - 1, i)] = -scale * share;
        }
        ortho[(k - 1, k - 1)] = scale;
    }
    let measurements = std::iter::once((0, Quadrature::P))
        .chain((1..n).map(|k| (k, Quadrature::X)))
        .collect();
    Ok(RelayPlan {
        n_users: n,
        ortho,
        measurements,
    })
}

/// Real orthogonal matrix of a beam splitter with transmissivity `t` between
/// modes `a` and `b` of an `n`-mode register:
/// `a' = √t·a + √(1-t)·b`, `b' = -√(1-t)·a + √t·b`.
pub fn beam_splitter(n: usize, a: usize, b: usize, t: f64) -> DMatrix<f64> {
    let (ct, st) = (t.sqrt(), (1.0 - t).sqrt());
    let mut m = DMatrix::identity(n, n);
    m[(a, a)] = ct;
    m[(a, b)] = st;
    m[(b, a)] = -st;
    m[(b, b)] = ct;
    m
}

/// The same interferometer assembled as the product of `N - 1` beam
/// splitters: splitter `k` (`T_k = 1 - 1/k`) mixes the running average held
/// in mode 0 with input `k`.
pub fn cascade_matrix(n_users: usize) -> Result<DMatrix<f64>> {
    check_users(n_users)?;
    Ok((2..=n_users).fold(DMatrix::identity(n_users, n_users), |acc, k| {
        beam_splitter(n_users, 0, k - 1, 1.0 - 1.0 / k as f64) * acc
    }))
}

/// The `N` homodyne readouts, in measurement order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellOutcome {
    pub gamma: Vec<f64>,
}

impl BellOutcome {
    pub fn zeros(n_users: usize) -> Self {
        Self {
            gamma: vec![0.0; n_users],
        }
    }
}

/// Conditions `state` on a homodyne of `quadrature` on `mode` with result
/// `outcome`; the measured mode is removed.
pub fn homodyne_condition(
    state: &GaussianState,
    mode: usize,
    quadrature: Quadrature,
    outcome: f64,
) -> Result<GaussianState> {
    condition_along(state, mode, quadrature.direction(), outcome)
}

/// Homodyne of the rotated quadrature `cos θ·X + sin θ·P`.
pub fn homodyne_condition_angle(
    state: &GaussianState,
    mode: usize,
    theta: f64,
    outcome: f64,
) -> Result<GaussianState> {
    condition_along(state, mode, [theta.cos(), theta.sin()], outcome)
}

fn condition_along(
    state: &GaussianState,
    mode: usize,
    direction: [f64; 2],
    outcome: f64,
) -> Result<GaussianState> {
    let n = state.n_modes();
    if mode >= n {
        return Err(Error::ModeIndex { index: mode, n_modes: n });
    }
    if n < 2 {
        return Err(Error::NothingLeft);
    }
    let measured = [2 * mode, 2 * mode + 1];
    let kept: Vec<usize> = quadrature_indices(&(0..n).filter(|&m| m != mode).collect::<Vec<_>>());
    let cov = state.cov();
    let va = submatrix(cov, &measured, &measured);
    let vb = submatrix(cov, &kept, &kept);
    let c = submatrix(cov, &kept, &measured);
    let mean_a = subvector(state.mean(), &measured);
    let mean_b = subvector(state.mean(), &kept);

    let pi = DVector::from_row_slice(&direction);
    let variance = (pi.transpose() * &va * &pi)[(0, 0)];
    if variance < MIN_MEASURED_VARIANCE {
        return Err(Error::DegenerateMeasurement(variance));
    }
    let proj = &pi * pi.transpose();
    let projected = &proj * &va * &proj;
    let sigma_max = projected.clone().singular_values().max();
    let pinv = projected
        .pseudo_inverse(PINV_CUTOFF * sigma_max)
        .map_err(|_| Error::Singular)?;
    let gain = &c * pinv;
    let cov_out = &vb - &gain * c.transpose();
    let innovation = &pi * outcome - &proj * mean_a;
    let mean_out = mean_b + &gain * innovation;
    Ok(GaussianState::from_parts(mean_out, cov_out))
}

/// Marginal mean and variance of the quadrature along `direction` on `mode`.
fn quadrature_marginal(state: &GaussianState, mode: usize, direction: [f64; 2]) -> (f64, f64) {
    let (i, j) = (2 * mode, 2 * mode + 1);
    let [u, v] = direction;
    let mean = u * state.mean()[i] + v * state.mean()[j];
    let cov = state.cov();
    let var = u * u * cov[(i, i)] + 2.0 * u * v * cov[(i, j)] + v * v * cov[(j, j)];
    (mean, var)
}

fn check_copies(copies: &[GaussianState], plan: &RelayPlan) -> Result<()> {
    if copies.len() != plan.n_users {
        return Err(Error::Dimension(format!(
            "{} copies for a {}-user relay",
            copies.len(),
            plan.n_users
        )));
    }
    if let Some(bad) = copies.iter().find(|c| c.n_modes() != 2) {
        return Err(Error::Dimension(format!(
            "each copy must have 2 modes (A, B), got {}",
            bad.n_modes()
        )));
    }
    Ok(())
}

/// Runs the relay on `copies` (each ordered `A`, `B`), producing the state of
/// the `N` `B` modes conditioned on each readout supplied by `next_outcome`.
fn run_relay<F>(copies: &[GaussianState], plan: &RelayPlan, mut next_outcome: F) -> Result<(GaussianState, BellOutcome)>
where
    F: FnMut(usize, &GaussianState, usize, [f64; 2]) -> f64,
{
    check_copies(copies, plan)?;
    let n = plan.n_users;
    let joint = GaussianState::tensor_all(copies).expect("at least two copies");

    // Embed ortho ⊗ I₂ on the A modes (positions 0, 2, 4, …); identity on B.
    let relay = plan.symplectic();
    let mut s = DMatrix::identity(4 * n, 4 * n);
    for r in 0..2 * n {
        for c in 0..2 * n {
            let (gr, gc) = (4 * (r / 2) + r % 2, 4 * (c / 2) + c % 2);
            s[(gr, gc)] = relay[(r, c)];
        }
    }
    let mut state = joint.apply_symplectic(&s)?;

    // Original mode labels of the rows still present in `state`.
    let mut labels: Vec<usize> = (0..2 * n).collect();
    let mut gamma = Vec::with_capacity(n);
    for (step, &(output, quad)) in plan.measurements.iter().enumerate() {
        let label = 2 * output;
        let pos = labels
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| Error::InvalidParameter(format!("output {output} measured twice")))?;
        let outcome = next_outcome(step, &state, pos, quad.direction());
        state = homodyne_condition(&state, pos, quad, outcome)?;
        labels.remove(pos);
        gamma.push(outcome);
    }
    Ok((state, BellOutcome { gamma }))
}

/// Bell detection on the supplied readouts. Returns the conditional state of
/// the `B` modes, `B₁ … B_N`, including its conditional mean.
pub fn bell_detect(
    copies: &[GaussianState],
    plan: &RelayPlan,
    outcome: &BellOutcome,
) -> Result<GaussianState> {
    if outcome.gamma.len() != plan.n_users {
        return Err(Error::Dimension(format!(
            "{} readouts for a {}-user relay",
            outcome.gamma.len(),
            plan.n_users
        )));
    }
    run_relay(copies, plan, |step, _, _, _| outcome.gamma[step]).map(|(s, _)| s)
}

/// Bell detection with each readout drawn from its exact conditional
/// Gaussian marginal.
pub fn bell_detect_sampled<R: Rng + ?Sized>(
    copies: &[GaussianState],
    plan: &RelayPlan,
    rng: &mut R,
) -> Result<(GaussianState, BellOutcome)> {
    run_relay(copies, plan, |_, state, pos, direction| {
        let (mean, var) = quadrature_marginal(state, pos, direction);
        let normal = Normal::new(mean, var.max(0.0).sqrt()).expect("finite variance");
        normal.sample(rng)
    })
}

/// Local displacements that cancel the conditional mean; the covariance is
/// untouched.
pub fn displacement_correction(
    state: &GaussianState,
    outcome: &BellOutcome,
) -> Result<GaussianState> {
    if outcome.gamma.len() != state.n_modes() {
        return Err(Error::Dimension(format!(
            "{} readouts for a {}-mode cluster",
            outcome.gamma.len(),
            state.n_modes()
        )));
    }
    (0..state.n_modes()).try_fold(state.clone(), |s, m| {
        let (dx, dp) = (s.mean()[2 * m], s.mean()[2 * m + 1]);
        s.displace(m, -dx, -dp)
    })
}

/// The diagonal block `V'` and off-diagonal block `C'` of the symmetric
/// cluster covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterBlocks {
    pub n_users: usize,
    pub v_prime: DMatrix<f64>,
    pub c_prime: DMatrix<f64>,
}

impl ClusterBlocks {
    /// The `2N × 2N` covariance matrix with `V'` on the diagonal and `C'`
    /// everywhere else.
    pub fn assemble(&self) -> DMatrix<f64> {
        let n = self.n_users;
        DMatrix::from_fn(2 * n, 2 * n, |r, c| {
            let block = if r / 2 == c / 2 {
                &self.v_prime
            } else {
                &self.c_prime
            };
            block[(r % 2, c % 2)]
        })
    }

    pub fn to_state(&self) -> Result<GaussianState> {
        GaussianState::zero_mean(self.assemble())
    }
}

/// Closed-form conditional cluster for `N` identical normal-form inputs:
/// `V' = diag(y - (N-1)z²/(Nx), y - z²/(Nx))`, `C' = z²/(Nx)·diag(1, -1)`.
pub fn cluster_closed_form(nf: &TwoModeNormalForm, n_users: usize) -> Result<ClusterBlocks> {
    check_users(n_users)?;
    let TwoModeNormalForm { x, y, z } = *nf;
    if x <= 0.0 {
        return Err(Error::InvalidParameter(format!("x must be positive, got {x}")));
    }
    let n = n_users as f64;
    let c = z * z / (n * x);
    Ok(ClusterBlocks {
        n_users,
        v_prime: DMatrix::from_row_slice(2, 2, &[y - (n - 1.0) * c, 0.0, 0.0, y - c]),
        c_prime: DMatrix::from_row_slice(2, 2, &[c, 0.0, 0.0, -c]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tmsv(mu: f64) -> TwoModeNormalForm {
        TwoModeNormalForm::new(mu, mu, (mu * mu - 1.0).sqrt()).unwrap()
    }

    #[test]
    fn two_user_relay_is_a_balanced_beam_splitter() {
        let plan = build_relay(2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((plan.ortho()[(1, 0)] + r).abs() < 1e-15);
        assert!((plan.ortho()[(1, 1)] - r).abs() < 1e-15);
        assert_eq!(
            plan.measurements(),
            &[(0, Quadrature::P), (1, Quadrature::X)]
        );
    }

    #[test]
    fn three_user_rows() {
        let plan = build_relay(3).unwrap();
        let s = (2.0_f64 / 3.0).sqrt();
        let expected = [-s / 2.0, -s / 2.0, s];
        for (c, e) in expected.iter().enumerate() {
            assert!((plan.ortho()[(2, c)] - e).abs() < 1e-15);
        }
    }

    #[test]
    fn relay_is_orthogonal_and_matches_cascade() {
        for n in 2..=12 {
            let plan = build_relay(n).unwrap();
            let o = plan.ortho();
            assert!(max_abs(&(o * o.transpose() - DMatrix::identity(n, n))) < ORTHO_TOL);
            let cascade = cascade_matrix(n).unwrap();
            assert!(max_abs(&(cascade - o)) < 1e-12, "n = {n}");
            let s = plan.symplectic();
            let omega = crate::gaussian::symplectic_form(n);
            assert!(max_abs(&(&s * &omega * s.transpose() - omega)) < 1e-12);
        }
        assert!(build_relay(1).is_err());
        assert!(cascade_matrix(0).is_err());
    }

    #[test]
    fn homodyne_on_product_vacuum() {
        let vac = GaussianState::vacuum(2);
        let out = homodyne_condition(&vac, 0, Quadrature::X, 2.7).unwrap();
        assert_eq!(out.cov(), &DMatrix::identity(2, 2));
        assert_eq!(out.mean().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn homodyne_on_tmsv_arm() {
        let mu = 2.5;
        let out = homodyne_condition(&tmsv(mu).to_state(), 0, Quadrature::X, 0.0).unwrap();
        assert!((out.cov()[(0, 0)] - 1.0 / mu).abs() < 1e-12);
        assert!((out.cov()[(1, 1)] - mu).abs() < 1e-12);
        assert!(out.cov()[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn homodyne_cov_is_outcome_independent() {
        let s = tmsv(1.8).to_state();
        let a = homodyne_condition(&s, 1, Quadrature::P, 0.0).unwrap();
        let b = homodyne_condition(&s, 1, Quadrature::P, 7.3).unwrap();
        assert_eq!(a.cov(), b.cov());
        // P_B is anticorrelated with P_A: a positive readout pulls the mean down.
        assert!(b.mean()[1] < 0.0);
    }

    #[test]
    fn homodyne_errors() {
        assert_eq!(
            homodyne_condition(&GaussianState::vacuum(1), 0, Quadrature::X, 0.0),
            Err(Error::NothingLeft)
        );
        assert!(matches!(
            homodyne_condition(&GaussianState::vacuum(2), 2, Quadrature::X, 0.0),
            Err(Error::ModeIndex { .. })
        ));
        let mut cov = DMatrix::identity(4, 4);
        cov[(0, 0)] = 1e-14;
        cov[(1, 1)] = 1e14;
        let squeezed = GaussianState::from_parts(DVector::zeros(4), cov);
        assert!(matches!(
            homodyne_condition(&squeezed, 0, Quadrature::X, 0.0),
            Err(Error::DegenerateMeasurement(_))
        ));
    }

    #[test]
    fn angle_homodyne_matches_fixed_quadratures() {
        let s = tmsv(2.0).to_state();
        let x = homodyne_condition(&s, 0, Quadrature::X, 0.3).unwrap();
        let xa = homodyne_condition_angle(&s, 0, 0.0, 0.3).unwrap();
        assert!(max_abs(&(x.cov() - xa.cov())) < 1e-15);
        let p = homodyne_condition(&s, 0, Quadrature::P, 0.3).unwrap();
        let pa = homodyne_condition_angle(&s, 0, Quadrature::P.angle(), 0.3).unwrap();
        assert!(max_abs(&(p.cov() - pa.cov())) < 1e-12);
    }

    #[test]
    fn two_user_tmsv_swap_matches_closed_form() {
        let nf = TwoModeNormalForm::new(5.0 / 3.0, 5.0 / 3.0, 4.0 / 3.0).unwrap();
        let copies = vec![nf.to_state(); 2];
        let out = bell_detect(&copies, &build_relay(2).unwrap(), &BellOutcome::zeros(2)).unwrap();
        let blocks = cluster_closed_form(&nf, 2).unwrap();
        assert!(max_abs(&(out.cov() - blocks.assemble())) < 1e-10);
        assert!(out.mean().iter().all(|m| *m == 0.0));
        // V' = diag(17/15, 17/15), C' = (8/15)·Z.
        assert!((blocks.v_prime[(0, 0)] - 17.0 / 15.0).abs() < 1e-14);
        assert!((blocks.v_prime[(1, 1)] - 17.0 / 15.0).abs() < 1e-14);
        assert!((blocks.c_prime[(0, 0)] - 8.0 / 15.0).abs() < 1e-14);
        assert!((blocks.c_prime[(1, 1)] + 8.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn product_inputs_leave_b_marginals() {
        let nf = TwoModeNormalForm::new(2.0, 3.0, 0.0).unwrap();
        let out = bell_detect(
            &vec![nf.to_state(); 3],
            &build_relay(3).unwrap(),
            &BellOutcome { gamma: vec![0.4, -1.0, 2.0] },
        )
        .unwrap();
        assert!(max_abs(&(out.cov() - DMatrix::identity(6, 6) * 3.0)) < 1e-12);
        let blocks = cluster_closed_form(&nf, 5).unwrap();
        assert_eq!(blocks.v_prime, DMatrix::identity(2, 2) * 3.0);
        assert_eq!(blocks.c_prime, DMatrix::zeros(2, 2));
    }

    #[test]
    fn ghz_variance_for_three_users() {
        let mu = 10.0;
        let out = bell_detect(
            &vec![tmsv(mu).to_state(); 3],
            &build_relay(3).unwrap(),
            &BellOutcome::zeros(3),
        )
        .unwrap();
        let v = out.cov();
        let var_p_sum: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| v[(2 * i + 1, 2 * j + 1)])
            .sum();
        assert!((var_p_sum - 0.3).abs() < 1e-10);
    }

    #[test]
    fn conditioning_order_does_not_change_cov() {
        let nf = TwoModeNormalForm::new(3.0, 2.0, 1.5).unwrap();
        let copies = vec![nf.to_state(); 4];
        let plan = build_relay(4).unwrap();
        let forward = bell_detect(&copies, &plan, &BellOutcome::zeros(4)).unwrap();
        let reversed_plan = plan.with_measurement_order(&[3, 2, 1, 0]).unwrap();
        let reversed = bell_detect(&copies, &reversed_plan, &BellOutcome::zeros(4)).unwrap();
        assert!(max_abs(&(forward.cov() - reversed.cov())) < 1e-12);
        assert!(plan.with_measurement_order(&[0, 0, 1, 2]).is_err());
    }

    #[test]
    fn sampled_detection_and_correction() {
        let nf = tmsv(2.0);
        let copies = vec![nf.to_state(); 3];
        let plan = build_relay(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (state, outcome) = bell_detect_sampled(&copies, &plan, &mut rng).unwrap();
        assert_eq!(outcome.gamma.len(), 3);
        assert!(state.mean().iter().any(|m| *m != 0.0));

        // The same readouts replayed give the same conditional state.
        let replay = bell_detect(&copies, &plan, &outcome).unwrap();
        assert!(max_abs(&(replay.cov() - state.cov())) == 0.0);
        assert_eq!(replay.mean(), state.mean());

        let corrected = displacement_correction(&state, &outcome).unwrap();
        assert!(corrected.mean().iter().all(|m| *m == 0.0));
        assert_eq!(corrected.cov(), state.cov());

        let zero = bell_detect(&copies, &plan, &BellOutcome::zeros(3)).unwrap();
        assert_eq!(displacement_correction(&zero, &BellOutcome::zeros(3)).unwrap(), zero);
    }

    #[test]
    fn bell_detect_input_errors() {
        let plan = build_relay(2).unwrap();
        let nf = tmsv(2.0).to_state();
        assert!(matches!(
            bell_detect(std::slice::from_ref(&nf), &plan, &BellOutcome::zeros(2)),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            bell_detect(
                &[nf.clone(), GaussianState::vacuum(3)],
                &plan,
                &BellOutcome::zeros(2)
            ),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            bell_detect(&[nf.clone(), nf], &plan, &BellOutcome::zeros(3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn closed_form_rejects_bad_x() {
        let nf = TwoModeNormalForm { x: 0.0, y: 1.0, z: 0.0 };
        assert!(cluster_closed_form(&nf, 2).is_err());
        assert!(cluster_closed_form(&tmsv(2.0), 1).is_err());
    }
}
