//! Mechanism constants: sample size K, switching horizon n̂, minimum
//! population N′, per-switch subsidy and the coin bias δ.

use serde::{Deserialize, Serialize};

use crate::beliefs::{self, EntryEvent, EventProbs, SwitchExpectations};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Relative distance below which a real-valued count is treated as the
/// integer it approximates before taking the ceiling.
const COUNT_SNAP: f64 = 1e-9;

/// Ceiling of a real-valued count, absorbing floating-point noise around
/// exact integers (e.g. `0.75 / 0.025` evaluates to `30.000000000000004`).
pub fn ceil_count(x: f64) -> u64 {
    let nearest = x.round();
    if (x - nearest).abs() <= COUNT_SNAP * nearest.abs().max(1.0) {
        nearest.max(0.0) as u64
    } else {
        x.ceil().max(0.0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediatorParams {
    /// Sample size K.
    pub k: u64,
    /// Probability that the coin lands 1 (postpone exploitation after R1).
    pub delta: f64,
    pub n_hat: u64,
    pub n_prime: u64,
    pub beta: f64,
    /// Payment per switch recommendation, β/(2K).
    pub subsidy: f64,
    pub eps: f64,
}

impl MediatorParams {
    /// Number of subsidized switches after which the switching phase ends.
    pub fn switch_target(&self) -> u64 {
        2 * self.k
    }

    /// Total promised for `units` subsidized messages. Never exceeds β for
    /// `units <= 2K`.
    pub fn promised_amount(&self, units: u64) -> f64 {
        self.beta * (units as f64 / self.switch_target() as f64)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "beta must be positive, got {beta}"
        )))
    }
}

/// Smallest K for which the K-sample mean lands on the correct side of the
/// midpoint with probability at least 1 − eps in both states (Chebyshev).
pub fn accuracy_sample_size(model: &ModelParams, eps: f64) -> Result<u64> {
    check_eps(eps)?;
    model.validate()?;
    let gap = model.p_h - model.p_l;
    let spread = (4.0 * model.p_h * (1.0 - model.p_h)).max(4.0 * model.p_l * (1.0 - model.p_l));
    Ok(ceil_count(spread / (eps * gap * gap)).max(1))
}

/// The tolerance that makes a low sample mean push the posterior mean below b.
pub fn low_mean_tolerance(model: &ModelParams) -> f64 {
    (0.5_f64).min((1.0 - model.q) * (model.b - model.p_l) / 2.0)
}

/// K large enough for ε/4-accurate classification and for a low sample
/// mean to make S the best response.
pub fn required_sample_size(model: &ModelParams, eps: f64) -> Result<u64> {
    check_eps(eps)?;
    let accuracy = accuracy_sample_size(model, eps / 4.0)?;
    let low_mean = accuracy_sample_size(model, low_mean_tolerance(model))?;
    Ok(accuracy.max(low_mean))
}

/// Tail target min(β/4K, ε/4) for falling short of K risky failures.
pub fn horizon_tail(k: u64, beta: f64, eps: f64) -> f64 {
    (beta / (4.0 * k as f64)).min(eps / 4.0)
}

/// Number of risky pulls after which fewer than K failures has probability
/// at most [`horizon_tail`] in either state (Chebyshev on the H-state binomial).
pub fn switching_horizon(model: &ModelParams, k: u64, beta: f64, eps: f64) -> Result<u64> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    check_beta(beta)?;
    check_eps(eps)?;
    if model.p_h >= 1.0 {
        return Err(Error::InvalidArgument(
            "p_H = 1 never produces a risky failure, so the switching horizon is undefined".into(),
        ));
    }
    let fail = 1.0 - model.p_h;
    let k = k as f64;
    let gamma = horizon_tail(k as u64, beta, eps);
    let linear = fail * (2.0 * k + model.p_h / gamma);
    let disc = linear * linear - 4.0 * fail * fail * k * k;
    Ok(ceil_count(
        (linear + disc.max(0.0).sqrt()) / (2.0 * fail * fail),
    ))
}

/// N′ = (2/ε)(K + n̂).
pub fn population_bound(k: u64, n_hat: u64, eps: f64) -> Result<u64> {
    check_eps(eps)?;
    Ok(ceil_count(2.0 / eps * (k + n_hat) as f64))
}

/// δ together with the unclamped linear solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaSolution {
    pub delta: f64,
    pub unclamped: f64,
    pub probs: EventProbs,
    pub expectations: SwitchExpectations,
}

/// E(t | switching signal) as a function of the coin bias: the mixture of
/// the three entry events, with R1 thinned by δ.
pub fn blind_expectation(probs: &EventProbs, exps: &SwitchExpectations, delta: f64) -> f64 {
    let weights = [
        (delta * probs.p_r1(), exps.e1),
        (probs.p_r2(), exps.e2),
        (probs.p_s(), exps.e3),
    ];
    let (num, den) = weights
        .iter()
        .fold((0.0, 0.0), |(num, den), &(w, e)| match e {
            Some(e) => (num + w * e, den + w),
            None => (num, den),
        });
    num / den
}

/// Linear solution of `blind_expectation(δ) = b`, as `(clamped, unclamped)`.
///
/// Fails when R1 has zero probability or E(t|R1) ≤ b: no bias in [0, 1]
/// can then lift the mixture up to b.
pub fn indifference_delta(
    b: f64,
    probs: &EventProbs,
    exps: &SwitchExpectations,
) -> Result<(f64, f64)> {
    let p_r1 = probs.p_r1();
    let e1 = match exps.e1 {
        Some(e1) if p_r1 > 0.0 && e1 > b => e1,
        _ => {
            return Err(Error::DegenerateDelta(format!(
                "P(R1)={p_r1}, E(t|R1)={:?} with b={b}",
                exps.e1
            )))
        }
    };
    let below = [EntryEvent::R2, EntryEvent::S]
        .iter()
        .filter_map(|&z| exps.get(z).map(|e| probs.marginal(z) * (b - e)))
        .sum::<f64>();
    let unclamped = below / (p_r1 * (e1 - b));
    Ok((unclamped.clamp(0.0, 1.0), unclamped))
}

/// Coin bias that leaves an agent who sees only the switching signal
/// indifferent between the arms. Clamped to [0, 1].
pub fn solve_delta(model: &ModelParams, k: u64) -> Result<DeltaSolution> {
    let probs = beliefs::event_probabilities(model, k)?;
    let exps = beliefs::switch_expectations(model, &probs);
    let (delta, unclamped) = indifference_delta(model.b, &probs, &exps).map_err(|e| match e {
        Error::DegenerateDelta(why) => Error::DegenerateDelta(format!("K={k}: {why}")),
        other => other,
    })?;
    Ok(DeltaSolution {
        delta,
        unclamped,
        probs,
        expectations: exps,
    })
}

/// Everything computed along the way, for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub e1: Option<f64>,
    pub e2: Option<f64>,
    pub e3: Option<f64>,
    pub p_r1: f64,
    pub p_r2: f64,
    pub p_s: f64,
    pub event_probs: EventProbs,
    pub unclamped_delta: f64,
    pub gamma: f64,
    pub low_mean_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    #[serde(flatten)]
    pub params: MediatorParams,
    pub diagnostics: Diagnostics,
}

/// Mechanism constants for an explicit sample size K. Used directly by
/// [`calibrate`] and by experiments that override K.
pub fn calibrate_with_k(model: &ModelParams, k: u64, eps: f64, beta: f64) -> Result<Calibration> {
    model.validate()?;
    check_eps(eps)?;
    check_beta(beta)?;
    let n_hat = switching_horizon(model, k, beta, eps)?;
    let n_prime = population_bound(k, n_hat, eps)?;
    let sol = solve_delta(model, k)?;
    let params = MediatorParams {
        k,
        delta: sol.delta,
        n_hat,
        n_prime,
        beta,
        subsidy: beta / (2.0 * k as f64),
        eps,
    };
    let diagnostics = Diagnostics {
        e1: sol.expectations.e1,
        e2: sol.expectations.e2,
        e3: sol.expectations.e3,
        p_r1: sol.probs.p_r1(),
        p_r2: sol.probs.p_r2(),
        p_s: sol.probs.p_s(),
        event_probs: sol.probs,
        unclamped_delta: sol.unclamped,
        gamma: horizon_tail(k, beta, eps),
        low_mean_tolerance: low_mean_tolerance(model),
    };
    Ok(Calibration {
        params,
        diagnostics,
    })
}

/// Full calibration for target optimality `eps` and budget `beta`.
pub fn calibrate(model: &ModelParams, eps: f64, beta: f64) -> Result<Calibration> {
    model.validate()?;
    check_beta(beta)?;
    let k = required_sample_size(model, eps)?;
    calibrate_with_k(model, k, eps, beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANONICAL: ModelParams = ModelParams::new(0.5, 0.8, 0.3, 0.5);

    #[test]
    fn ceil_count_snaps_representation_noise() {
        assert_eq!(ceil_count(0.75 / 0.025), 30);
        assert_eq!(ceil_count(33.6), 34);
        assert_eq!(ceil_count(3375.0000000000005), 3375);
        assert_eq!(ceil_count(3375.001), 3376);
    }

    #[test]
    fn accuracy_sample_size_examples() {
        assert_eq!(accuracy_sample_size(&CANONICAL, 0.1).unwrap(), 34);
        assert_eq!(accuracy_sample_size(&CANONICAL, 0.025).unwrap(), 135);
        let sym = ModelParams::new(0.6, 0.75, 0.25, 0.5);
        assert_eq!(accuracy_sample_size(&sym, 0.1).unwrap(), 30);
        assert!(accuracy_sample_size(&CANONICAL, 0.0).is_err());
        assert!(accuracy_sample_size(&CANONICAL, -1.0).is_err());
    }

    #[test]
    fn required_sample_size_examples() {
        assert_eq!(low_mean_tolerance(&CANONICAL), 0.05);
        assert_eq!(required_sample_size(&CANONICAL, 0.1).unwrap(), 135);
        assert_eq!(required_sample_size(&CANONICAL, 0.4).unwrap(), 68);
    }

    #[test]
    fn horizon_examples() {
        assert_eq!(switching_horizon(&CANONICAL, 135, 1.0, 0.1).unwrap(), 3375);
        assert_eq!(switching_horizon(&CANONICAL, 34, 1.0, 0.1).unwrap(), 850);
        let sure = ModelParams::new(0.5, 1.0, 0.3, 0.5);
        assert!(switching_horizon(&sure, 10, 1.0, 0.1).is_err());
        assert!(switching_horizon(&CANONICAL, 0, 1.0, 0.1).is_err());
    }

    #[test]
    fn horizon_satisfies_chebyshev_bound() {
        for &(k, beta, eps) in &[(135, 1.0, 0.1), (34, 1.0, 0.1), (50, 0.2, 0.3)] {
            let n = switching_horizon(&CANONICAL, k, beta, eps).unwrap() as f64;
            let fail = 1.0 - CANONICAL.p_h;
            let tail = n * CANONICAL.p_h * fail / (k as f64 - n * fail).powi(2);
            let gamma = horizon_tail(k, beta, eps);
            assert!(tail <= gamma * (1.0 + 1e-9), "k={k}: {tail} > {gamma}");
        }
    }

    #[test]
    fn population_examples() {
        assert_eq!(population_bound(135, 3375, 0.1).unwrap(), 70200);
        assert_eq!(population_bound(34, 850, 0.1).unwrap(), 17680);
        assert_eq!(population_bound(7, 11, 2.0).unwrap(), 18);
        assert!(population_bound(7, 11, 0.0).is_err());
    }

    #[test]
    fn delta_k1() {
        let sol = solve_delta(&CANONICAL, 1).unwrap();
        assert!((sol.delta - 4.0 / 9.0).abs() < 1e-12);
        let mix = blind_expectation(&sol.probs, &sol.expectations, sol.delta);
        assert!((mix - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn delta_degenerate_when_high_event_not_above_safe() {
        let probs = event_probabilities_fixture();
        let flat = SwitchExpectations {
            e1: Some(0.5),
            e2: Some(0.4),
            e3: None,
        };
        assert!(matches!(
            indifference_delta(0.5, &probs, &flat),
            Err(Error::DegenerateDelta(_))
        ));
        let missing = SwitchExpectations {
            e1: None,
            e2: Some(0.4),
            e3: None,
        };
        assert!(matches!(
            indifference_delta(0.5, &probs, &missing),
            Err(Error::DegenerateDelta(_))
        ));
    }

    fn event_probabilities_fixture() -> EventProbs {
        beliefs::event_probabilities(&CANONICAL, 1).unwrap()
    }

    #[test]
    fn canonical_calibration() {
        let cal = calibrate(&CANONICAL, 0.1, 1.0).unwrap();
        let p = cal.params;
        assert_eq!((p.k, p.n_hat, p.n_prime), (135, 3375, 70200));
        assert_eq!(p.subsidy, 1.0 / 270.0);
        assert!((0.0..=1.0).contains(&p.delta));
        assert_eq!(p.promised_amount(p.switch_target()), 1.0);
    }

    #[test]
    fn calibration_json_keys() {
        let cal = calibrate(&CANONICAL, 0.1, 1.0).unwrap();
        let v = serde_json::to_value(cal).unwrap();
        for key in [
            "k",
            "delta",
            "n_hat",
            "n_prime",
            "beta",
            "subsidy",
            "eps",
            "diagnostics",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert!(v["diagnostics"].get("unclamped_delta").is_some());
        assert_eq!(v["k"], 135);
    }
}
