//! Loss-weight schedulers: fixed weights, inverse-gradient-norm balancing,
//! and learning-rate annealing.
//!
//! All schemes act on the full term set: every PDE residual term plus every
//! boundary term. With no balancing the weights stay pinned at 1 and the
//! loss is exactly the unweighted sum.
//!
//! - GN: recomputes targets `λ̂_i = m̄ / ‖∇L_i‖₂` every 1000 steps (m̄ =
//!   arithmetic mean of the raw norms, so `‖λ̂_i ∇L_i‖₂ = m̄` for all i) and
//!   relaxes toward them with momentum 0.9.
//! - LRA: every step, `λ̂_i = max_j(max-abs-grad_j) / max-abs-grad_i`, EMA
//!   with α = 0.1.
//!
//! Divisions are floored at 1e-12 so a collapsing term (vanishing PDE
//! gradients) produces large-but-finite weights instead of a NaN; the
//! resulting blow-up is observable through `max_weight_seen`.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BalanceScheme {
    None,
    Gn,
    Lra,
}

impl BalanceScheme {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "gn" => Ok(Self::Gn),
            "lra" => Ok(Self::Lra),
            _ => Err(Error::BadConfig(format!(
                "unknown balance scheme `{s}` (expected none|gn|lra)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Gn => "gn",
            Self::Lra => "lra",
        }
    }
}

/// Which per-term gradient statistic the scheme needs this step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatKind {
    /// ‖∇L_i‖₂ per term.
    L2Norm,
    /// max_j |∂L_i/∂θ_j| per term.
    MaxAbs,
}

const GN_MOMENTUM: f64 = 0.9;
const GN_UPDATE_EVERY: usize = 1000;
const LRA_ALPHA: f64 = 0.1;
const FLOOR: f64 = 1e-12;

/// Per-run balancing state: current weights plus diagnostics.
#[derive(Debug, Clone)]
pub struct BalanceState {
    pub scheme: BalanceScheme,
    weights: Vec<f64>,
    /// Most recent cold targets λ̂ (before EMA), for inspection.
    pub last_targets: Option<Vec<f64>>,
    /// Largest weight ever held, for collapse forensics.
    pub max_weight_seen: f64,
    /// Updates skipped because every statistic was zero.
    pub stalled_updates: usize,
}

impl BalanceState {
    pub fn new(scheme: BalanceScheme, num_terms: usize) -> Self {
        Self {
            scheme,
            weights: vec![1.0; num_terms],
            last_targets: None,
            max_weight_seen: 1.0,
            stalled_updates: 0,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Statistic required at this (0-based) step, if any.
    pub fn stats_needed(&self, step: usize) -> Option<StatKind> {
        match self.scheme {
            BalanceScheme::None => None,
            BalanceScheme::Gn => (step % GN_UPDATE_EVERY == 0).then_some(StatKind::L2Norm),
            BalanceScheme::Lra => Some(StatKind::MaxAbs),
        }
    }

    /// GN target recomputation from per-term gradient norms.
    pub fn gn_update(&mut self, per_term_grad_norms: &[f64]) -> &[f64] {
        assert_eq!(per_term_grad_norms.len(), self.weights.len());
        if per_term_grad_norms.iter().all(|&n| n == 0.0) {
            self.stalled_updates += 1;
            return &self.weights;
        }
        let mean: f64 =
            per_term_grad_norms.iter().sum::<f64>() / per_term_grad_norms.len() as f64;
        let targets: Vec<f64> = per_term_grad_norms
            .iter()
            .map(|&n| mean / n.max(FLOOR))
            .collect();
        for (w, t) in self.weights.iter_mut().zip(&targets) {
            *w = GN_MOMENTUM * *w + (1.0 - GN_MOMENTUM) * t;
            self.max_weight_seen = self.max_weight_seen.max(*w);
        }
        self.last_targets = Some(targets);
        &self.weights
    }

    /// LRA update from per-term maximum absolute gradient components.
    pub fn lra_update(&mut self, per_term_max_abs: &[f64]) -> &[f64] {
        assert_eq!(per_term_max_abs.len(), self.weights.len());
        let top = per_term_max_abs.iter().fold(0.0f64, |m, &x| m.max(x));
        if top == 0.0 {
            self.stalled_updates += 1;
            return &self.weights;
        }
        let targets: Vec<f64> = per_term_max_abs
            .iter()
            .map(|&m| top / m.max(FLOOR))
            .collect();
        for (w, t) in self.weights.iter_mut().zip(&targets) {
            *w = (1.0 - LRA_ALPHA) * *w + LRA_ALPHA * t;
            self.max_weight_seen = self.max_weight_seen.max(*w);
        }
        self.last_targets = Some(targets);
        &self.weights
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn none_scheme_never_wants_stats() {
        let st = BalanceState::new(BalanceScheme::None, 4);
        for step in 0..3000 {
            assert_eq!(st.stats_needed(step), None);
        }
        assert!(st.weights().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn gn_cadence_is_every_thousand_steps() {
        let st = BalanceState::new(BalanceScheme::Gn, 2);
        assert_eq!(st.stats_needed(0), Some(StatKind::L2Norm));
        assert_eq!(st.stats_needed(1), None);
        assert_eq!(st.stats_needed(999), None);
        assert_eq!(st.stats_needed(1000), Some(StatKind::L2Norm));
    }

    #[test]
    fn gn_equal_norms_stay_at_one() {
        let mut st = BalanceState::new(BalanceScheme::Gn, 3);
        st.gn_update(&[0.7, 0.7, 0.7]);
        assert_eq!(st.last_targets.as_deref(), Some(&[1.0, 1.0, 1.0][..]));
        for &w in st.weights() {
            assert!((w - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gn_targets_equalize_weighted_norms() {
        let mut st = BalanceState::new(BalanceScheme::Gn, 2);
        let norms = [2.0, 1.0];
        st.gn_update(&norms);
        let targets = st.last_targets.clone().unwrap();
        assert!((targets[0] - 0.75).abs() < 1e-15);
        assert!((targets[1] - 1.5).abs() < 1e-15);
        // ‖λ̂_i·g_i‖ = m̄ = 1.5 for both terms
        for (t, n) in targets.iter().zip(&norms) {
            assert!((t * n - 1.5).abs() < 1e-12 * 1.5);
        }
        // EMA applied on top of λ = 1
        assert!((st.weights()[0] - (0.9 + 0.1 * 0.75)).abs() < 1e-15);
        assert!((st.weights()[1] - (0.9 + 0.1 * 1.5)).abs() < 1e-15);
    }

    #[test]
    fn gn_zero_norm_engages_floor() {
        let mut st = BalanceState::new(BalanceScheme::Gn, 2);
        st.gn_update(&[1.0, 0.0]);
        assert!(st.weights().iter().all(|w| w.is_finite() && *w > 0.0));
        // all-zero stats leave weights untouched but are counted
        let before = st.weights().to_vec();
        st.gn_update(&[0.0, 0.0]);
        assert_eq!(st.weights(), &before[..]);
        assert_eq!(st.stalled_updates, 1);
    }

    #[test]
    fn lra_equal_components_are_unit_targets() {
        let mut st = BalanceState::new(BalanceScheme::Lra, 3);
        st.lra_update(&[4.0, 4.0, 4.0]);
        assert_eq!(st.last_targets.as_deref(), Some(&[1.0, 1.0, 1.0][..]));
    }

    #[test]
    fn lra_max_normalizer() {
        let mut st = BalanceState::new(BalanceScheme::Lra, 2);
        st.lra_update(&[10.0, 1.0]);
        let t = st.last_targets.clone().unwrap();
        assert!((t[0] - 1.0).abs() < 1e-15);
        assert!((t[1] - 10.0).abs() < 1e-15);
        assert!((st.weights()[1] - (0.9 + 0.1 * 10.0)).abs() < 1e-15);
    }

    #[test]
    fn lra_vanishing_term_grows_without_bound() {
        let mut st = BalanceState::new(BalanceScheme::Lra, 2);
        let mut prev = 1.0;
        for step in 0..4000 {
            // term 1's gradient collapses while term 0 stays O(1)
            let collapsing = 1e-1 * (0.99f64).powi(step);
            st.lra_update(&[1.0, collapsing]);
            let w = st.weights()[1];
            if step % 500 == 499 {
                assert!(w > prev, "weight should keep growing");
                prev = w;
            }
        }
        assert!(st.max_weight_seen > 1e6, "max weight {}", st.max_weight_seen);
        assert!(st.weights().iter().all(|w| w.is_finite()));
    }

    proptest! {
        #[test]
        fn weights_stay_positive(
            stats in proptest::collection::vec(0.0f64..1e6, 4),
            rounds in 1usize..50,
        ) {
            let mut gn = BalanceState::new(BalanceScheme::Gn, 4);
            let mut lra = BalanceState::new(BalanceScheme::Lra, 4);
            for _ in 0..rounds {
                gn.gn_update(&stats);
                lra.lra_update(&stats);
            }
            prop_assert!(gn.weights().iter().all(|&w| w > 0.0 && w.is_finite()));
            prop_assert!(lra.weights().iter().all(|&w| w > 0.0 && w.is_finite()));
        }
    }
}
