use defcast_core::engine::{verify_step_supermartingale, Advice, EvaluatorState, ExpertAdvice};
use defcast_core::loss::{substitution, LossFunction, LossSpec, Outcome, Prediction};
use defcast_core::specialist::{SpecialistConfig, SpecialistState};
use proptest::prelude::*;

fn builtin() -> impl Strategy<Value = LossSpec> {
    prop::sample::select(LossSpec::builtins())
}

fn prediction() -> impl Strategy<Value = Prediction> {
    prop_oneof![
        1 => Just(Prediction::ZERO),
        1 => Just(Prediction::ONE),
        8 => (0.0f64..=1.0).prop_map(Prediction::clamped),
    ]
}

fn outcome() -> impl Strategy<Value = Outcome> {
    any::<bool>().prop_map(|b| if b { Outcome::One } else { Outcome::Zero })
}

/// `e^{−η λ(γ,ω)}` summed with weights, straight from the definition.
fn mixed(loss: &LossSpec, eta: f64, u: &[f64], g: &[Prediction], omega: Outcome) -> f64 {
    u.iter().zip(g).map(|(u, &g)| u * (-eta * loss.evaluate(g, omega)).exp()).sum()
}

fn weights(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn substitution_dominates_the_mixture(
        loss in builtin(),
        pairs in prop::collection::vec((0.01f64..1.0, prediction()), 1..6),
    ) {
        let eta = loss.mixability_constant().unwrap();
        let raw: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let u = weights(&raw);
        let g: Vec<Prediction> = pairs.iter().map(|p| p.1).collect();
        let pi = substitution(&loss, eta, &u, &g).unwrap();
        for omega in Outcome::BOTH {
            let lhs = (-eta * loss.evaluate(pi, omega)).exp();
            prop_assert!(lhs >= mixed(&loss, eta, &u, &g, omega) - 1e-9, "{loss} u={u:?} g={g:?} pi={pi}");
        }
    }

    #[test]
    fn step_inequality_holds_below_the_mixability_constant(
        loss in builtin(),
        frac in 0.01f64..=1.0,
        gamma in prediction(),
        pi in prediction(),
    ) {
        let eta = loss.mixability_constant().unwrap() * frac;
        let advice = ExpertAdvice::predict(gamma, eta, loss.clone());
        prop_assert!(verify_step_supermartingale(&advice, pi));
    }

    #[test]
    fn defensive_forecasts_never_let_q_grow(
        experts in prop::collection::vec((builtin(), 0.05f64..=1.0), 1..6),
        rounds in prop::collection::vec((prop::collection::vec(prediction(), 6), outcome()), 1..40),
    ) {
        let n = experts.len();
        let mut state = EvaluatorState::new(n);
        let mut q = state.mixture();
        for (gammas, omega) in rounds {
            let advice: Vec<ExpertAdvice> = experts
                .iter()
                .zip(&gammas)
                .map(|((l, f), &g)| ExpertAdvice::predict(g, l.mixability_constant().unwrap() * f, l.clone()))
                .collect();
            let pi = state.choose_prediction(&advice).unwrap().prediction;
            for w in Outcome::BOTH {
                prop_assert!(state.f_t(&advice, pi, w).unwrap() <= 1e-9);
            }
            state.update(&advice, pi, omega).unwrap();
            let next = state.mixture();
            prop_assert!(next <= q + 1e-9);
            prop_assert!(state.log_values().iter().all(|&lq| lq <= (n as f64).ln() + 1e-9));
            q = next;
        }
    }

    #[test]
    fn specialist_weights_follow_the_learner_benchmark(
        n in 1usize..5,
        rounds in prop::collection::vec((prop::collection::vec(prop::option::weighted(0.6, prediction()), 5), outcome()), 1..30),
    ) {
        let cfg = SpecialistConfig::uniform(LossSpec::Square, 2.0, n).unwrap();
        let mut state = SpecialistState::new(&cfg);
        for (moves, omega) in rounds {
            let advice: Vec<Advice> = moves[..n].iter().map(|m| m.map_or(Advice::Abstain, Advice::Predict)).collect();
            let pi = state.predict(&cfg, &advice).unwrap();
            let before = state.log_weights().to_vec();
            let total = state.log_total_weight();
            state.update(&cfg, &advice, pi, omega).unwrap();
            prop_assert!(state.log_total_weight() <= total + 1e-12);
            let own = cfg.loss().evaluate(pi, omega);
            for (k, a) in advice.iter().enumerate() {
                let (b, w) = (before[k], state.log_weights()[k]);
                match a.prediction() {
                    None => prop_assert_eq!(b, w),
                    Some(g) => {
                        let theirs = cfg.loss().evaluate(g, omega);
                        if theirs < own { prop_assert!(w > b) }
                        if theirs > own { prop_assert!(w < b) }
                        if theirs == own { prop_assert_eq!(b, w) }
                    }
                }
            }
        }
    }
}

#[test]
fn defensive_forecasting_is_bayes_for_log_loss() {
    let gammas = [0.1, 0.35, 0.5, 0.8, 0.95];
    let mut state = EvaluatorState::new(gammas.len());
    // unnormalised log posterior of each expert
    let mut log_like = vec![0.0f64; gammas.len()];
    for t in 0..500usize {
        let shift: Vec<f64> = gammas.iter().map(|g| (g + 0.013 * t as f64) % 1.0).collect();
        let advice: Vec<ExpertAdvice> = shift
            .iter()
            .map(|&g| ExpertAdvice::predict(Prediction::new(g).unwrap(), 1.0, LossSpec::Log))
            .collect();
        let pi = state.choose_prediction(&advice).unwrap().prediction;
        let m = log_like.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_like.iter().map(|l| (l - m).exp()).collect();
        let bayes = w.iter().zip(&shift).map(|(w, g)| w * g).sum::<f64>() / w.iter().sum::<f64>();
        assert!((pi.get() - bayes).abs() < 1e-9, "t={t}: {} vs {bayes}", pi.get());
        let omega = if (t * 7) % 3 == 0 { Outcome::One } else { Outcome::Zero };
        for (l, g) in log_like.iter_mut().zip(&shift) {
            *l += if omega == Outcome::One { g.ln() } else { (1.0 - g).ln() };
        }
        state.update(&advice, pi, omega).unwrap();
    }
}
