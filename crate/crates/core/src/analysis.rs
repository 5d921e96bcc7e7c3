//! Entanglement of the network cluster produced from lossy two-mode squeezed
//! vacua: closed-form pairwise, Gaussian-localizable and block
//! log-negativities, each paired with a numerical evaluation on the
//! cluster covariance matrix.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{symplectic_eigenvalues, partial_transpose, GaussianState, TwoModeNormalForm};
use crate::linalg::golden_max;
use crate::relay::{cluster_closed_form, homodyne_condition_angle, ClusterBlocks};
use crate::sources::{thermal_loss_on_a, tmsv, ThermalLossParams};

/// One point of the lossy-network parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkPoint {
    mu: f64,
    channel: ThermalLossParams,
    n_users: usize,
}

impl NetworkPoint {
    pub fn new(mu: f64, eta: f64, omega: f64, n_users: usize) -> Result<Self> {
        if !(mu >= 1.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu must be >= 1, got {mu}")));
        }
        if n_users < 2 {
            return Err(Error::InvalidParameter(format!(
                "at least 2 users required, got {n_users}"
            )));
        }
        Ok(Self {
            mu,
            channel: ThermalLossParams::new(eta, omega)?,
            n_users,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eta(&self) -> f64 {
        self.channel.eta()
    }

    pub fn omega(&self) -> f64 {
        self.channel.omega()
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    /// `α = η(μ² - 1) / [η + (1-η)μω]`.
    pub fn alpha(&self) -> f64 {
        let (mu, eta, omega) = (self.mu, self.eta(), self.omega());
        eta * (mu * mu - 1.0) / (eta + (1.0 - eta) * mu * omega)
    }

    /// Two-user log-negativity `ln[(ημ + (1-η)ω) / (η + (1-η)μω)]`, unclamped.
    pub fn two_user_raw(&self) -> f64 {
        let (mu, eta, omega) = (self.mu, self.eta(), self.omega());
        ((eta * mu + (1.0 - eta) * omega) / (eta + (1.0 - eta) * mu * omega)).ln()
    }

    /// Input normal form after the `A` arm crosses the channel.
    pub fn normal_form(&self) -> Result<TwoModeNormalForm> {
        thermal_loss_on_a(&tmsv(self.mu)?, &self.channel)
    }

    /// Closed-form cluster produced by the relay at this point.
    pub fn cluster(&self) -> Result<ClusterBlocks> {
        cluster_closed_form(&self.normal_form()?, self.n_users)
    }
}

/// A closed-form log-negativity: `value` is clamped at zero, `raw` is not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormulaValue {
    pub value: f64,
    pub raw: f64,
    pub clamped: bool,
}

impl FormulaValue {
    fn from_raw(raw: f64) -> Self {
        Self {
            value: raw.max(0.0),
            raw,
            clamped: raw < 0.0,
        }
    }
}

/// `E^(2) - ½·ln(1 + α(N-2)/N)`.
pub fn pairwise_logneg_formula(pt: &NetworkPoint) -> FormulaValue {
    let n = pt.n_users as f64;
    FormulaValue::from_raw(pt.two_user_raw() - 0.5 * (1.0 + pt.alpha() * (n - 2.0) / n).ln())
}

/// `E^(2) - ½·ln(1 + (N-2)/(N/α + 2))`. The correction is written as
/// `(N-2)α/(N + 2α)` so that `α = 0` needs no special case.
pub fn gle_formula(pt: &NetworkPoint) -> FormulaValue {
    let n = pt.n_users as f64;
    let alpha = pt.alpha();
    FormulaValue::from_raw(pt.two_user_raw() - 0.5 * (1.0 + (n - 2.0) * alpha / (n + 2.0 * alpha)).ln())
}

/// `E^(2) - ½·ln(1 + α(N - 2N')/N)` for two groups of `n_prime` users.
pub fn block_logneg_formula(pt: &NetworkPoint, n_prime: usize) -> Result<FormulaValue> {
    if n_prime == 0 || 2 * n_prime > pt.n_users {
        return Err(Error::InvalidPartition(format!(
            "need 1 <= N' and 2N' <= N, got N' = {n_prime}, N = {}",
            pt.n_users
        )));
    }
    let n = pt.n_users as f64;
    let np = n_prime as f64;
    Ok(FormulaValue::from_raw(
        pt.two_user_raw() - 0.5 * (1.0 + pt.alpha() * (n - 2.0 * np) / n).ln(),
    ))
}

fn check_pair(cluster: &GaussianState, i: usize, j: usize) -> Result<()> {
    for m in [i, j] {
        if m >= cluster.n_modes() {
            return Err(Error::ModeIndex {
                index: m,
                n_modes: cluster.n_modes(),
            });
        }
    }
    if i == j {
        return Err(Error::InvalidPartition(format!("pair ({i}, {j}) repeats a mode")));
    }
    Ok(())
}

/// Log-negativity of the two-mode marginal on `(i, j)`.
pub fn pairwise_logneg_numeric(cluster: &GaussianState, i: usize, j: usize) -> Result<f64> {
    check_pair(cluster, i, j)?;
    cluster.reduce(&[i, j])?.log_negativity(&[0])
}

/// `-ln ν̃₋` of a two-mode state, unclamped: smooth where the log-negativity
/// is flat at zero.
fn two_mode_entanglement_raw(state: &GaussianState) -> Result<f64> {
    let nus = symplectic_eigenvalues(&partial_transpose(state.cov(), &[1]))?;
    Ok(-nus[0].ln())
}

/// Result of the localizing-measurement search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GleResult {
    /// Maximized pairwise log-negativity, clamped at zero.
    pub value: f64,
    /// Homodyne angle per assisting mode (in increasing mode order).
    pub angles: Vec<f64>,
    pub passes: usize,
}

/// Angles tried per assisting mode before golden-section refinement.
pub const GLE_ANGLE_GRID: usize = 64;
/// Coordinate ascent stops once a full pass gains less than this.
pub const GLE_PASS_TOL: f64 = 1e-8;
const GLE_MAX_PASSES: usize = 50;

/// Homodynes every mode other than `i` and `j` at optimized angles and
/// returns the largest log-negativity left between `i` and `j`.
///
/// Angles are optimized by coordinate ascent: for each assisting mode a
/// grid of [`GLE_ANGLE_GRID`] angles on `[0, π)` is scanned and the best
/// one is refined by golden-section search; passes repeat until a pass
/// improves the objective by less than [`GLE_PASS_TOL`].
pub fn gle_numeric(cluster: &GaussianState, i: usize, j: usize) -> Result<GleResult> {
    check_pair(cluster, i, j)?;
    let assisting: Vec<usize> = (0..cluster.n_modes()).filter(|&m| m != i && m != j).collect();
    if assisting.is_empty() {
        let raw = two_mode_entanglement_raw(&cluster.reduce(&[i, j])?)?;
        return Ok(GleResult {
            value: raw.max(0.0),
            angles: Vec::new(),
            passes: 0,
        });
    }

    // Assisting modes are measured last-to-first so earlier indices stay valid;
    // the pair ends up as modes (0, 1) in the order (min, max).
    let objective = |angles: &[f64]| -> Result<f64> {
        let mut state = cluster.clone();
        for (k, &mode) in assisting.iter().enumerate().rev() {
            state = homodyne_condition_angle(&state, mode, angles[k], 0.0)?;
        }
        two_mode_entanglement_raw(&state)
    };

    let mut angles = vec![0.0; assisting.len()];
    let mut current = objective(&angles)?;
    let step = PI / GLE_ANGLE_GRID as f64;
    let mut passes = 0;
    while passes < GLE_MAX_PASSES {
        passes += 1;
        let start = current;
        for k in 0..assisting.len() {
            let mut eval = |theta: f64| -> f64 {
                let mut trial = angles.clone();
                trial[k] = theta;
                objective(&trial).unwrap_or(f64::NEG_INFINITY)
            };
            let (mut best_theta, mut best) = (angles[k], current);
            for g in 0..GLE_ANGLE_GRID {
                let theta = step * g as f64;
                let v = eval(theta);
                if v > best {
                    best = v;
                    best_theta = theta;
                }
            }
            let (theta, v) = golden_max(&mut eval, best_theta - step, best_theta + step, 1e-10);
            if v > best {
                best = v;
                best_theta = theta;
            }
            angles[k] = best_theta.rem_euclid(PI);
            current = best;
        }
        if current - start < GLE_PASS_TOL {
            break;
        }
    }
    Ok(GleResult {
        value: current.max(0.0),
        angles,
        passes,
    })
}

/// Log-negativity between two disjoint groups of modes of `cluster`.
pub fn block_logneg_numeric(
    cluster: &GaussianState,
    group_a: &[usize],
    group_b: &[usize],
) -> Result<f64> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(Error::InvalidPartition("empty group".into()));
    }
    if group_a.iter().any(|m| group_b.contains(m)) {
        return Err(Error::InvalidPartition("groups overlap".into()));
    }
    let kept: Vec<usize> = group_a.iter().chain(group_b).copied().collect();
    let reduced = cluster.reduce(&kept)?;
    let partition: Vec<usize> = (0..group_a.len()).collect();
    reduced.log_negativity(&partition)
}

/// The symmetric splitting used for block entanglement: users
/// `0..N'` against `N-N'..N`.
pub fn symmetric_groups(n_users: usize, n_prime: usize) -> (Vec<usize>, Vec<usize>) {
    (
        (0..n_prime).collect(),
        (n_users - n_prime..n_users).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cluster_state(pt: &NetworkPoint) -> GaussianState {
        pt.cluster().unwrap().to_state().unwrap()
    }

    #[test]
    fn pairwise_formula_examples() {
        let pt = NetworkPoint::new(5.0 / 3.0, 1.0, 1.0, 2).unwrap();
        assert!((pairwise_logneg_formula(&pt).value - (5.0_f64 / 3.0).ln()).abs() < 1e-14);
        let pt = NetworkPoint::new(5.0 / 3.0, 1.0, 1.0, 4).unwrap();
        assert!((pt.alpha() - 16.0 / 9.0).abs() < 1e-14);
        let expected = (5.0_f64 / 3.0).ln() - 0.5 * (17.0_f64 / 9.0).ln();
        assert!((pairwise_logneg_formula(&pt).value - expected).abs() < 1e-14);
        assert!((expected - 0.19283).abs() < 1e-5);
        for (eta, omega, n) in [(0.3, 2.0, 3), (1.0, 1.0, 7), (0.8, 4.0, 2)] {
            let pt = NetworkPoint::new(1.0, eta, omega, n).unwrap();
            assert_eq!(pairwise_logneg_formula(&pt).value, 0.0);
        }
    }

    #[test]
    fn negative_formula_is_clamped_and_flagged() {
        // Heavy thermal noise on the relay arm leaves no entanglement.
        let pt = NetworkPoint::new(3.0, 0.6, 2.0, 4).unwrap();
        let f = pairwise_logneg_formula(&pt);
        assert!(f.clamped && f.raw < 0.0 && f.value == 0.0);
        assert_eq!(pairwise_logneg_numeric(&cluster_state(&pt), 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn pairwise_numeric_is_pair_independent_and_matches() {
        let pt = NetworkPoint::new(4.0, 0.9, 1.2, 5).unwrap();
        let cluster = cluster_state(&pt);
        let reference = pairwise_logneg_numeric(&cluster, 0, 1).unwrap();
        for (i, j) in [(0, 4), (2, 3), (4, 1)] {
            assert!((pairwise_logneg_numeric(&cluster, i, j).unwrap() - reference).abs() < 1e-12);
        }
        assert!((reference - pairwise_logneg_formula(&pt).value).abs() < 1e-9);
        assert!(pairwise_logneg_numeric(&cluster, 1, 1).is_err());
        assert!(pairwise_logneg_numeric(&cluster, 0, 5).is_err());
    }

    #[test]
    fn gle_two_users_is_two_user_entanglement() {
        let pt = NetworkPoint::new(3.0, 0.7, 1.1, 2).unwrap();
        let g = gle_formula(&pt);
        assert_eq!(g.raw, pt.two_user_raw());
        let numeric = gle_numeric(&cluster_state(&pt), 0, 1).unwrap();
        assert!(numeric.angles.is_empty());
        assert!((numeric.value - g.value).abs() < 1e-12);
    }

    #[test]
    fn gle_without_input_entanglement() {
        let pt = NetworkPoint::new(1.0, 0.5, 2.0, 5).unwrap();
        assert_eq!(pt.alpha(), 0.0);
        let g = gle_formula(&pt);
        assert!(g.raw.is_finite());
        assert_eq!(g.value, 0.0);
    }

    #[test]
    fn gle_numeric_matches_formula_for_pure_inputs() {
        for n in [3, 4, 5] {
            let pt = NetworkPoint::new(2.0, 1.0, 1.0, n).unwrap();
            let cluster = cluster_state(&pt);
            let numeric = gle_numeric(&cluster, 0, 1).unwrap();
            let formula = gle_formula(&pt).value;
            assert!((numeric.value - formula).abs() < 1e-6, "N = {n}");
            assert!(numeric.value >= pairwise_logneg_numeric(&cluster, 0, 1).unwrap() - 1e-12);
        }
    }

    #[test]
    fn block_formula_examples() {
        let pt = NetworkPoint::new(3.0, 0.8, 1.5, 6).unwrap();
        assert_eq!(block_logneg_formula(&pt, 3).unwrap().raw, pt.two_user_raw());
        assert_eq!(
            block_logneg_formula(&pt, 1).unwrap(),
            pairwise_logneg_formula(&pt)
        );
        assert!(block_logneg_formula(&pt, 4).is_err());
        assert!(block_logneg_formula(&pt, 0).is_err());
    }

    #[test]
    fn block_numeric_matches_formula() {
        let pt = NetworkPoint::new(6.0, 0.95, 1.0, 6).unwrap();
        let cluster = cluster_state(&pt);
        for np in 1..=3 {
            let (a, b) = symmetric_groups(6, np);
            let numeric = block_logneg_numeric(&cluster, &a, &b).unwrap();
            let formula = block_logneg_formula(&pt, np).unwrap().value;
            assert!((numeric - formula).abs() < 1e-9, "N' = {np}");
        }
        assert!(block_logneg_numeric(&cluster, &[0, 1], &[1, 2]).is_err());
        assert!(block_logneg_numeric(&cluster, &[], &[1]).is_err());
    }

    #[test]
    fn pairwise_formula_decreases_with_users() {
        let pt = |n| NetworkPoint::new(4.0, 0.7, 1.3, n).unwrap();
        for n in 2..16 {
            assert!(pairwise_logneg_formula(&pt(n + 1)).raw < pairwise_logneg_formula(&pt(n)).raw);
        }
    }
}
