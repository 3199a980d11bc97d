//! Loss functions on `[0,1] × {0,1}` and their geometry.
//!
//! A loss value is an `f64` in `[0, +∞]`; `f64::INFINITY` is the infinite
//! loss (log loss of a confident wrong prediction).
//!
//! Mixability and properness are certified numerically on a grid of
//! predictions. These are certificates at test scale, not proofs.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::math::{bisect_decreasing, exp, ln, ln_1p, loss_diff};

/// Default number of grid points used by the numeric certificates.
pub const DEFAULT_GRID: usize = 1001;
/// Tolerance of the mixability, superprediction and substitution checks.
pub const GEOMETRY_TOL: f64 = 1e-9;
/// Tolerance of the properness check.
pub const PROPER_TOL: f64 = 1e-12;
/// Width at which the substitution bisection stops. Zero bisects down to
/// floating-point resolution, which matters when the mixture sits close to
/// an endpoint and a small absolute error is a large relative one.
pub const SUBSTITUTION_TOL: f64 = 0.0;
/// Iteration cap of the substitution bisection.
pub const SUBSTITUTION_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("prediction {0} is outside [0, 1]")]
    PredictionOutOfRange(f64),
    #[error("outcome {0} is not 0 or 1")]
    InvalidOutcome(i64),
    #[error("loss has no known mixability constant")]
    UnsupportedLoss,
    #[error("learning rate {eta} exceeds the mixability constant {eta_max}")]
    MixabilityViolation { eta: f64, eta_max: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("{weights} weights but {predictions} predictions")]
    LengthMismatch { weights: usize, predictions: usize },
    #[error("pi = {0} must lie strictly inside (0, 1)")]
    Domain(f64),
    #[error("cannot parse loss spec `{0}`")]
    Parse(String),
    #[error("no prediction satisfies the substitution inequality")]
    NoSubstitution,
}

/// A prediction `γ ∈ [0,1]`, read as the forecast probability that the
/// outcome is 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Prediction(f64);

impl Prediction {
    pub const ZERO: Prediction = Prediction(0.0);
    pub const HALF: Prediction = Prediction(0.5);
    pub const ONE: Prediction = Prediction(1.0);

    pub fn new(value: f64) -> Result<Self, LossError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Prediction(value))
        } else {
            Err(LossError::PredictionOutOfRange(value))
        }
    }

    /// Clamps into `[0,1]`; NaN maps to `0.5`.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            Prediction::HALF
        } else {
            Prediction(value.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// `i`-th point of an evenly spaced grid of `n ≥ 2` points on `[0,1]`.
    pub(crate) fn grid(i: usize, n: usize) -> Self {
        if i + 1 == n {
            Prediction::ONE
        } else {
            Prediction(i as f64 / (n - 1) as f64)
        }
    }
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// A binary outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Zero,
    One,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Zero, Outcome::One];

    pub fn from_bit(bit: i64) -> Result<Self, LossError> {
        match bit {
            0 => Ok(Outcome::Zero),
            1 => Ok(Outcome::One),
            other => Err(LossError::InvalidOutcome(other)),
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Outcome::Zero => 0,
            Outcome::One => 1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Outcome::Zero => Outcome::One,
            Outcome::One => Outcome::Zero,
        }
    }
}

/// A loss function `λ(γ, ω)`.
pub trait LossFunction {
    /// Loss of prediction `gamma` when `outcome` happens; may be `+∞`.
    fn evaluate(&self, gamma: Prediction, outcome: Outcome) -> f64;

    /// Largest `η` for which the loss is claimed to be `η`-mixable.
    fn mixability_constant(&self) -> Result<f64, LossError> {
        Err(LossError::UnsupportedLoss)
    }

    /// The pair `(λ(γ,0), λ(γ,1))`.
    fn point(&self, gamma: Prediction) -> (f64, f64) {
        (self.evaluate(gamma, Outcome::Zero), self.evaluate(gamma, Outcome::One))
    }
}

impl<L: LossFunction + ?Sized> LossFunction for &L {
    fn evaluate(&self, gamma: Prediction, outcome: Outcome) -> f64 {
        (**self).evaluate(gamma, outcome)
    }

    fn mixability_constant(&self) -> Result<f64, LossError> {
        (**self).mixability_constant()
    }
}

/// The built-in loss catalogue.
///
/// Text form: `log`, `square`, `genlog:<eta>`, `zero`, `scaled:<c>:<base>`.
#[derive(Debug, Clone, PartialEq)]
pub enum LossSpec {
    /// `λ(γ,0) = −ln(1−γ)`, `λ(γ,1) = −ln γ`.
    Log,
    /// `(ω − γ)²`.
    Square,
    /// Log loss divided by `eta`; exactly `eta`-mixable.
    GeneralizedLog { eta: f64 },
    /// Identically zero. Encodes an expert who is asleep.
    Zero,
    /// `factor · base`.
    Scaled { base: Box<LossSpec>, factor: f64 },
}

impl LossSpec {
    pub fn generalized_log(eta: f64) -> Result<Self, LossError> {
        positive("generalized log eta", eta)?;
        Ok(LossSpec::GeneralizedLog { eta })
    }

    pub fn scaled(base: LossSpec, factor: f64) -> Result<Self, LossError> {
        positive("scale factor", factor)?;
        Ok(LossSpec::Scaled { base: Box::new(base), factor })
    }

    /// Identifier; the same string as the text form.
    pub fn id(&self) -> String {
        format!("{self}")
    }

    /// Every catalogue loss is a proper scoring rule (positive scaling
    /// preserves properness).
    pub fn is_proper(&self) -> bool {
        true
    }

    /// Checks the parameters of every nested kind.
    pub fn validate(&self) -> Result<(), LossError> {
        match self {
            LossSpec::GeneralizedLog { eta } => positive("generalized log eta", *eta),
            LossSpec::Scaled { base, factor } => {
                positive("scale factor", *factor)?;
                base.validate()
            }
            _ => Ok(()),
        }
    }

    /// The loss functions exercised by the certificate suites.
    pub fn builtins() -> Vec<LossSpec> {
        alloc::vec![
            LossSpec::Log,
            LossSpec::Square,
            LossSpec::GeneralizedLog { eta: 0.5 },
            LossSpec::Zero,
            LossSpec::Scaled { base: Box::new(LossSpec::Square), factor: 3.0 },
        ]
    }
}

fn positive(what: &str, value: f64) -> Result<(), LossError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(LossError::InvalidParameter(format!("{what} must be positive and finite, got {value}")))
    }
}

fn log_loss(gamma: f64, outcome: Outcome) -> f64 {
    match outcome {
        Outcome::One => -ln(gamma),
        Outcome::Zero => -ln_1p(-gamma),
    }
}

impl LossFunction for LossSpec {
    fn evaluate(&self, gamma: Prediction, outcome: Outcome) -> f64 {
        let g = gamma.get();
        match self {
            LossSpec::Log => log_loss(g, outcome),
            LossSpec::Square => {
                let d = f64::from(outcome.bit()) - g;
                d * d
            }
            LossSpec::GeneralizedLog { eta } => log_loss(g, outcome) / eta,
            LossSpec::Zero => 0.0,
            LossSpec::Scaled { base, factor } => factor * base.evaluate(gamma, outcome),
        }
    }

    fn mixability_constant(&self) -> Result<f64, LossError> {
        Ok(match self {
            LossSpec::Log => 1.0,
            LossSpec::Square => 2.0,
            LossSpec::GeneralizedLog { eta } => *eta,
            LossSpec::Zero => 1.0,
            LossSpec::Scaled { base, factor } => base.mixability_constant()? / factor,
        })
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossSpec::Log => f.write_str("log"),
            LossSpec::Square => f.write_str("square"),
            LossSpec::GeneralizedLog { eta } => write!(f, "genlog:{eta}"),
            LossSpec::Zero => f.write_str("zero"),
            LossSpec::Scaled { base, factor } => write!(f, "scaled:{factor}:{base}"),
        }
    }
}

impl FromStr for LossSpec {
    type Err = LossError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || LossError::Parse(String::from(s));
        match s {
            "log" => return Ok(LossSpec::Log),
            "square" => return Ok(LossSpec::Square),
            "zero" => return Ok(LossSpec::Zero),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("genlog:") {
            let eta: f64 = rest.parse().map_err(|_| bad())?;
            return LossSpec::generalized_log(eta);
        }
        if let Some(rest) = s.strip_prefix("scaled:") {
            let (factor, base) = rest.split_once(':').ok_or_else(bad)?;
            let factor: f64 = factor.parse().map_err(|_| bad())?;
            return LossSpec::scaled(base.parse()?, factor);
        }
        Err(bad())
    }
}

/// `Σ`-query point `(x, y)` with `x, y ∈ [0, +∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperpredictionQuery {
    x: f64,
    y: f64,
}

impl SuperpredictionQuery {
    pub fn new(x: f64, y: f64) -> Result<Self, LossError> {
        if x >= 0.0 && y >= 0.0 {
            Ok(SuperpredictionQuery { x, y })
        } else {
            Err(LossError::InvalidParameter(format!("query ({x}, {y}) must be nonnegative")))
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }
}

/// `e^{−η·λ}` with `e^{−∞} = 0`.
#[inline]
fn exp_neg(eta: f64, loss: f64) -> f64 {
    if loss == f64::INFINITY {
        0.0
    } else {
        exp(-eta * loss)
    }
}

/// `p · x` where a zero weight annihilates an infinite value.
#[inline]
fn weighted(p: f64, x: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * x
    }
}

/// Grid certificate that the image of the superprediction set under
/// `(x, y) ↦ (e^{−ηx}, e^{−ηy})` is convex.
///
/// The sampled image points are reduced to their Pareto frontier, the
/// frontier is joined by straight segments, and every chord midpoint between
/// two frontier points must lie below-left of that polyline within
/// [`GEOMETRY_TOL`].
pub fn check_eta_mixable<L: LossFunction + ?Sized>(loss: &L, eta: f64, grid_n: usize) -> bool {
    assert!(eta > 0.0, "eta must be positive");
    let grid_n = grid_n.max(3);
    let mut points: Vec<(f64, f64)> = (0..grid_n)
        .map(|i| {
            let (x, y) = loss.point(Prediction::grid(i, grid_n));
            (exp_neg(eta, x), exp_neg(eta, y))
        })
        .collect();
    let frontier = pareto_frontier(&mut points);
    for i in 0..frontier.len() {
        for j in i + 1..frontier.len() {
            let mu = 0.5 * (frontier[i].0 + frontier[j].0);
            let mv = 0.5 * (frontier[i].1 + frontier[j].1);
            if mv > envelope(&frontier, mu) + GEOMETRY_TOL {
                return false;
            }
        }
    }
    true
}

/// Non-dominated points, ordered by decreasing first coordinate (and so
/// strictly increasing second coordinate).
fn pareto_frontier(points: &mut [(f64, f64)]) -> Vec<(f64, f64)> {
    points.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    let mut frontier: Vec<(f64, f64)> = Vec::new();
    let mut best_v = f64::NEG_INFINITY;
    for &(u, v) in points.iter() {
        if v > best_v {
            if let Some(last) = frontier.last_mut() {
                if last.0 == u {
                    last.1 = v;
                    best_v = v;
                    continue;
                }
            }
            frontier.push((u, v));
            best_v = v;
        }
    }
    frontier
}

/// Height of the downward closure of the frontier polyline at abscissa `u`.
fn envelope(frontier: &[(f64, f64)], u: f64) -> f64 {
    let first = frontier[0];
    if u > first.0 {
        return f64::NEG_INFINITY;
    }
    let last = frontier[frontier.len() - 1];
    if u <= last.0 {
        return last.1;
    }
    // frontier[k].0 >= u > frontier[k + 1].0
    let k = frontier.partition_point(|p| p.0 >= u) - 1;
    let (u0, v0) = frontier[k];
    let (u1, v1) = frontier[k + 1];
    let t = (u0 - u) / (u0 - u1);
    v0 + t * (v1 - v0)
}

/// Grid certificate of properness: for every pair of grid beliefs `π` and
/// reports `π'`, reporting the belief never has a larger expected loss
/// (within [`PROPER_TOL`]). Infinite expected losses compare above every
/// finite value.
pub fn check_proper<L: LossFunction + ?Sized>(loss: &L, grid_n: usize) -> bool {
    let grid_n = grid_n.max(3);
    let points: Vec<(f64, f64)> = (0..grid_n).map(|i| loss.point(Prediction::grid(i, grid_n))).collect();
    let expected = |p: f64, (l0, l1): (f64, f64)| weighted(p, l1) + weighted(1.0 - p, l0);
    for (i, &own) in points.iter().enumerate() {
        let p = Prediction::grid(i, grid_n).get();
        let honest = expected(p, own);
        for &other in &points {
            let report = expected(p, other);
            if honest == f64::INFINITY {
                if report != f64::INFINITY {
                    return false;
                }
            } else if honest > report + PROPER_TOL {
                return false;
            }
        }
    }
    true
}

/// Grid-sampled Assumptions 1–3 for a loss function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssumptionReport {
    /// Modulus of continuity shrinks under grid refinement on each side of
    /// every infinite endpoint.
    pub continuous: bool,
    /// Some prediction has both losses finite.
    pub some_finite: bool,
    /// No prediction has both losses infinite.
    pub never_both_infinite: bool,
}

impl AssumptionReport {
    pub fn holds(&self) -> bool {
        self.continuous && self.some_finite && self.never_both_infinite
    }
}

pub fn check_assumptions<L: LossFunction + ?Sized>(loss: &L, grid_n: usize) -> AssumptionReport {
    let grid_n = grid_n.max(3);
    let mut some_finite = false;
    let mut never_both_infinite = true;
    for i in 0..grid_n {
        let (a, b) = loss.point(Prediction::grid(i, grid_n));
        some_finite |= a.is_finite() && b.is_finite();
        never_both_infinite &= a.is_finite() || b.is_finite();
    }
    let continuous = Outcome::BOTH.iter().all(|&w| {
        let coarse = modulus(loss, w, grid_n);
        let fine = modulus(loss, w, 2 * grid_n - 1);
        fine <= 0.75 * coarse + 1e-12
    });
    AssumptionReport { continuous, some_finite, never_both_infinite }
}

/// Largest jump between neighbouring grid points on `[0.01, 0.99]`.
fn modulus<L: LossFunction + ?Sized>(loss: &L, outcome: Outcome, grid_n: usize) -> f64 {
    let at = |i: usize| {
        let g = 0.01 + 0.98 * i as f64 / (grid_n - 1) as f64;
        loss.evaluate(Prediction::clamped(g), outcome)
    };
    (1..grid_n).map(|i| (at(i) - at(i - 1)).abs()).fold(0.0, f64::max)
}

/// Whether some prediction's loss pair is dominated by `q`.
///
/// Scans the grid for the prediction minimising the larger excess
/// `max(λ(γ,0) − x, λ(γ,1) − y)`, then refines around it by golden-section
/// search. Accepts when that excess is at most [`GEOMETRY_TOL`].
pub fn superprediction_contains<L: LossFunction + ?Sized>(
    loss: &L,
    q: SuperpredictionQuery,
    grid_n: usize,
) -> bool {
    let grid_n = grid_n.max(3);
    let excess = |g: f64| {
        let (a, b) = loss.point(Prediction::clamped(g));
        // ∞ against an infinite bound is dominated
        let over = |l: f64, bound: f64| if l == bound { f64::NEG_INFINITY } else { l - bound };
        over(a, q.x).max(over(b, q.y))
    };
    let (best_i, best) = (0..grid_n)
        .map(|i| (i, excess(Prediction::grid(i, grid_n).get())))
        .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
    if best <= GEOMETRY_TOL {
        return true;
    }
    let step = 1.0 / (grid_n - 1) as f64;
    let mut lo = (best_i as f64 * step - step).max(0.0);
    let mut hi = (best_i as f64 * step + step).min(1.0);
    let ratio = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (excess(c), excess(d));
    for _ in 0..200 {
        if hi - lo < 1e-15 {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = excess(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = excess(d);
        }
        if fc.min(fd) <= GEOMETRY_TOL {
            return true;
        }
    }
    fc.min(fd) <= GEOMETRY_TOL
}

/// The `π`-point `(−ln(1−π)/η, −ln π/η)` of `e^{−ηx} + e^{−ηy} = 1`.
pub fn shift_pi_point(eta: f64, pi: f64) -> Result<(f64, f64), LossError> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(LossError::Domain(pi));
    }
    positive("eta", eta)?;
    Ok((-ln_1p(-pi) / eta, -ln(pi) / eta))
}

/// Grid certificate that for every interior grid `π` the loss pairs lie
/// Northeast of the shift of `e^{−ηx} + e^{−ηy} = 1` whose `π`-point is
/// `Λ_π = (λ(π,0), λ(π,1))`.
///
/// A point `(x, y)` is Northeast of that shift iff
/// `(1−π)·e^{η(a−x)} + π·e^{η(b−y)} ≤ 1` with `(a, b) = Λ_π`.
pub fn check_northeast_of_shift<L: LossFunction + ?Sized>(loss: &L, eta: f64, grid_n: usize) -> bool {
    let grid_n = grid_n.max(3);
    let points: Vec<(f64, f64)> = (0..grid_n).map(|i| loss.point(Prediction::grid(i, grid_n))).collect();
    for i in 1..grid_n - 1 {
        let pi = Prediction::grid(i, grid_n).get();
        let (a, b) = points[i];
        if !(a.is_finite() && b.is_finite()) {
            continue;
        }
        for &(x, y) in &points {
            let value = (1.0 - pi) * exp(eta * loss_diff(a, x)) + pi * exp(eta * loss_diff(b, y));
            if value > 1.0 + GEOMETRY_TOL {
                return false;
            }
        }
    }
    true
}

/// The mixture point `Σᵢ uᵢ·e^{−ηλ(γᵢ,ω)}` for both outcomes.
pub fn mixture_exp<L: LossFunction + ?Sized>(loss: &L, eta: f64, weights: &[f64], preds: &[Prediction]) -> [f64; 2] {
    let mut mix = [0.0; 2];
    for (&u, &g) in weights.iter().zip(preds) {
        for (k, &w) in Outcome::BOTH.iter().enumerate() {
            mix[k] += u * exp_neg(eta, loss.evaluate(g, w));
        }
    }
    mix
}

/// Smallest slack `e^{−ηλ(γ,ω)} − Σᵢ uᵢ·e^{−ηλ(γᵢ,ω)}` over both outcomes.
/// The substitution inequality holds iff this is nonnegative.
pub fn substitution_slack<L: LossFunction + ?Sized>(
    loss: &L,
    eta: f64,
    weights: &[f64],
    preds: &[Prediction],
    gamma: Prediction,
) -> f64 {
    let mix = mixture_exp(loss, eta, weights, preds);
    Outcome::BOTH
        .iter()
        .enumerate()
        .map(|(k, &w)| exp_neg(eta, loss.evaluate(gamma, w)) - mix[k])
        .fold(f64::INFINITY, f64::min)
}

/// Substitution function of the Aggregating Algorithm.
///
/// Returns `γ` with `e^{−ηλ(γ,ω)} ≥ Σᵢ uᵢ·e^{−ηλ(γᵢ,ω)}` for both outcomes.
/// The mixture is turned into the point `g(ω) = −(1/η)·ln Σᵢ uᵢ·e^{−ηλ(γᵢ,ω)}`;
/// an endpoint is returned when it already dominates `g`, otherwise the
/// slack-balance `d(γ) = (λ(γ,0) − g(0)) − (λ(γ,1) − g(1))` is bisected to a
/// root. If the root fails the inequality (flat pieces or corners of the
/// prediction set) the grid is scanned instead. With no predictions the
/// answer is `0.5`.
pub fn substitution<L: LossFunction + ?Sized>(
    loss: &L,
    eta: f64,
    weights: &[f64],
    preds: &[Prediction],
) -> Result<Prediction, LossError> {
    positive("eta", eta)?;
    let eta_max = loss.mixability_constant()?;
    if eta > eta_max * (1.0 + 1e-12) {
        return Err(LossError::MixabilityViolation { eta, eta_max });
    }
    if weights.len() != preds.len() {
        return Err(LossError::LengthMismatch { weights: weights.len(), predictions: preds.len() });
    }
    if preds.is_empty() {
        return Ok(Prediction::HALF);
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(LossError::InvalidWeights(format!("weight {w} is not a nonnegative number")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(LossError::InvalidWeights(format!("weights sum to {total}, not 1")));
    }
    if preds.iter().all(|&g| g == preds[0]) {
        return Ok(preds[0]);
    }

    let mix = mixture_exp(loss, eta, weights, preds);
    let target = mix.map(|m| if m <= 0.0 { f64::INFINITY } else { -ln(m) / eta });
    let dominates = |g: Prediction| {
        let (a, b) = loss.point(g);
        a <= target[0] && b <= target[1]
    };
    if dominates(Prediction::ZERO) {
        return Ok(Prediction::ZERO);
    }
    if dominates(Prediction::ONE) {
        return Ok(Prediction::ONE);
    }

    let balance = |g: f64| {
        let (a, b) = loss.point(Prediction::clamped(g));
        loss_diff(a, target[0]) - loss_diff(b, target[1])
    };
    let (d0, d1) = (balance(0.0), balance(1.0));
    if d0 < 0.0 && d1 > 0.0 {
        if let Some(bracket) =
            bisect_decreasing(|g| -balance(g), 0.0, 1.0, SUBSTITUTION_TOL, SUBSTITUTION_MAX_ITER)
        {
            // the side of the bracket with the larger worst-case ratio
            let gamma = [bracket.lo, bracket.midpoint(), bracket.hi]
                .into_iter()
                .map(Prediction::clamped)
                .map(|g| (g, log_ratio_slack(loss, eta, &mix, g)))
                .fold((Prediction::HALF, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc })
                .0;
            if substitution_slack(loss, eta, weights, preds, gamma) >= -GEOMETRY_TOL {
                return Ok(gamma);
            }
        }
    }
    scan_for_substitute(loss, eta, &mix)
}

/// `min_ω (−ηλ(γ,ω) − ln mix_ω)`, the log of the worst ratio between the
/// two sides of the substitution inequality.
fn log_ratio_slack<L: LossFunction + ?Sized>(loss: &L, eta: f64, mix: &[f64; 2], gamma: Prediction) -> f64 {
    let (a, b) = loss.point(gamma);
    let side = |l: f64, m: f64| if m <= 0.0 { f64::INFINITY } else { loss_diff(-ln(m) / eta, l) * eta };
    side(a, mix[0]).min(side(b, mix[1]))
}

fn scan_for_substitute<L: LossFunction + ?Sized>(loss: &L, eta: f64, mix: &[f64; 2]) -> Result<Prediction, LossError> {
    let (best, slack) = (0..DEFAULT_GRID)
        .map(|i| {
            let g = Prediction::grid(i, DEFAULT_GRID);
            let (a, b) = loss.point(g);
            (g, (exp_neg(eta, a) - mix[0]).min(exp_neg(eta, b) - mix[1]))
        })
        .fold((Prediction::HALF, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
    if slack >= -GEOMETRY_TOL {
        Ok(best)
    } else {
        Err(LossError::NoSubstitution)
    }
}
