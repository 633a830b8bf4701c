//! Reaction terms `f(x, t, s)` together with their structural constants:
//! the one-sided Lipschitz constant `lambda` (`f(s1) - f(s2) >= -lambda (s1 - s2)`
//! for `s1 >= s2`), an optional invariant range `[sigma1, sigma2]` with
//! `f(sigma1) <= 0 <= f(sigma2)`, and an optional two-sided constant
//! `lambda_bar`.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

const MODULE: &str = "nonlinearity";

/// `(x, t, s) -> value`.
pub type ReactionFn = Arc<dyn Fn(&[f64], f64, f64) -> f64 + Send + Sync>;

/// `(x, t) -> value`, used for the coefficients of linear reactions.
pub type SpaceTimeFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    /// `(s^3 - s) / alpha`
    AllenCahn { alpha: f64 },
    /// `s^2 - s`
    Fisher,
    /// `c(x, t) s + F(x, t)`; `c_bounds` are the declared `inf c` and `sup c`.
    Linear { c_bounds: (f64, f64) },
    Zero,
    Custom,
}

#[derive(Clone)]
pub struct Nonlinearity {
    kind: Kind,
    eval: ReactionFn,
    deriv: Option<ReactionFn>,
    lambda: f64,
    range: Option<(f64, f64)>,
    lambda_bar: Option<f64>,
    truncation: Option<(f64, f64)>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("kind", &self.kind)
            .field("lambda", &self.lambda)
            .field("range", &self.range)
            .field("lambda_bar", &self.lambda_bar)
            .field("truncation", &self.truncation)
            .field("has_derivative", &self.deriv.is_some())
            .finish()
    }
}

impl Nonlinearity {
    pub fn allen_cahn(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(
                MODULE,
                format!("allen_cahn needs alpha in (0, 1), got {alpha}"),
            ));
        }
        let inv = 1.0 / alpha;
        Ok(Nonlinearity {
            kind: Kind::AllenCahn { alpha },
            eval: Arc::new(move |_, _, s| (s * s * s - s) * inv),
            deriv: Some(Arc::new(move |_, _, s| (3.0 * s * s - 1.0) * inv)),
            lambda: inv,
            range: Some((-1.0, 1.0)),
            lambda_bar: None,
            truncation: None,
        })
    }

    /// `s^2 - s`, truncated to `[0, 1]` (outside that interval the raw
    /// quadratic violates any one-sided bound on a long enough range).
    pub fn fisher() -> Self {
        let raw = Nonlinearity {
            kind: Kind::Fisher,
            eval: Arc::new(|_, _, s| s * s - s),
            deriv: Some(Arc::new(|_, _, s| 2.0 * s - 1.0)),
            lambda: 1.0,
            range: Some((0.0, 1.0)),
            lambda_bar: None,
            truncation: None,
        };
        raw.truncate(0.0, 1.0).expect("valid interval")
    }

    /// `c s` with a constant coefficient.
    pub fn linear(c: f64) -> Self {
        Self::linear_field(
            Arc::new(move |_, _| c),
            Arc::new(|_, _| 0.0),
            (c, c),
        )
        .expect("constant coefficient bounds are consistent")
    }

    /// `c(x, t) s + F(x, t)` with declared bounds `inf c` and `sup c`.
    pub fn linear_field(c: SpaceTimeFn, source: SpaceTimeFn, c_bounds: (f64, f64)) -> Result<Self> {
        let (lo, hi) = c_bounds;
        if !(lo <= hi) {
            return Err(Error::invalid(MODULE, "linear: inf c must not exceed sup c"));
        }
        let cc = c.clone();
        Ok(Nonlinearity {
            kind: Kind::Linear { c_bounds },
            eval: Arc::new(move |x, t, s| c(x, t) * s + source(x, t)),
            deriv: Some(Arc::new(move |x, t, _| cc(x, t))),
            lambda: (-lo).max(0.0),
            range: None,
            lambda_bar: Some(lo.abs().max(hi.abs())),
            truncation: None,
        })
    }

    pub fn zero() -> Self {
        Nonlinearity {
            kind: Kind::Zero,
            eval: Arc::new(|_, _, _| 0.0),
            deriv: Some(Arc::new(|_, _, _| 0.0)),
            lambda: 0.0,
            range: None,
            lambda_bar: Some(0.0),
            truncation: None,
        }
    }

    /// User-supplied reaction with a declared one-sided constant. The
    /// constant is trusted; [`verify_assumptions`] can spot-check it.
    pub fn custom(eval: ReactionFn, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(MODULE, format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Nonlinearity {
            kind: Kind::Custom,
            eval,
            deriv: None,
            lambda,
            range: None,
            lambda_bar: None,
            truncation: None,
        })
    }

    pub fn with_derivative(mut self, deriv: ReactionFn) -> Self {
        self.deriv = Some(deriv);
        self
    }

    pub fn with_range(mut self, sigma1: f64, sigma2: f64) -> Result<Self> {
        check_interval(sigma1, sigma2)?;
        self.range = Some((sigma1, sigma2));
        Ok(self)
    }

    pub fn with_lambda_bar(mut self, lambda_bar: f64) -> Result<Self> {
        if !(lambda_bar >= self.lambda) {
            return Err(Error::invalid(MODULE, "lambda_bar must be >= lambda"));
        }
        self.lambda_bar = Some(lambda_bar);
        Ok(self)
    }

    /// Built-ins by name: `allen_cahn` (parameter alpha), `fisher`, `zero`
    /// and `linear` (parameter c).
    pub fn builtin(name: &str, param: Option<f64>) -> Result<Self> {
        match name {
            "allen_cahn" => Self::allen_cahn(param.ok_or_else(|| {
                Error::invalid(MODULE, "allen_cahn needs its alpha parameter")
            })?),
            "fisher" => Ok(Self::fisher()),
            "zero" => Ok(Self::zero()),
            "linear" => Ok(Self::linear(
                param.ok_or_else(|| Error::invalid(MODULE, "linear needs its coefficient c"))?,
            )),
            "custom" => Err(Error::invalid(
                MODULE,
                "custom nonlinearities are only available through the library API",
            )),
            other => Err(Error::invalid(MODULE, format!("unknown nonlinearity '{other}'"))),
        }
    }

    /// `f(x, t, clamp(s, sigma1, sigma2))`. The one-sided constant can only
    /// improve, because clamping is monotone and 1-Lipschitz; for the
    /// built-ins it is recomputed sharply on the interval.
    pub fn truncate(&self, sigma1: f64, sigma2: f64) -> Result<Self> {
        check_interval(sigma1, sigma2)?;
        let (lo, hi) = (sigma1, sigma2);
        let inner = self.eval.clone();
        let eval: ReactionFn = Arc::new(move |x, t, s| inner(x, t, s.clamp(lo, hi)));
        let deriv = self.deriv.clone().map(|d| -> ReactionFn {
            Arc::new(move |x, t, s| if s < lo || s > hi { 0.0 } else { d(x, t, s) })
        });
        let (min_d, max_abs_d) = match self.kind {
            Kind::AllenCahn { alpha } => {
                // f' = (3 s^2 - 1)/alpha on [lo, hi]
                let s_min = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()) };
                let s_max = lo.abs().max(hi.abs());
                let d_min = (3.0 * s_min * s_min - 1.0) / alpha;
                let d_max = (3.0 * s_max * s_max - 1.0) / alpha;
                (Some(d_min), Some(d_min.abs().max(d_max.abs())))
            }
            Kind::Fisher => {
                let d_min = 2.0 * lo - 1.0;
                let d_max = 2.0 * hi - 1.0;
                (Some(d_min), Some(d_min.abs().max(d_max.abs())))
            }
            Kind::Linear { c_bounds } => (Some(c_bounds.0), self.lambda_bar),
            Kind::Zero => (Some(0.0), Some(0.0)),
            Kind::Custom => (None, self.lambda_bar),
        };
        let lambda = match min_d {
            Some(d) => (-d).max(0.0).min(self.lambda),
            None => self.lambda,
        };
        Ok(Nonlinearity {
            kind: self.kind,
            eval,
            deriv,
            lambda,
            range: self.range,
            lambda_bar: max_abs_d.map(|v| v.max(lambda)),
            truncation: Some(match self.truncation {
                Some((a, b)) => (a.max(lo).min(hi), b.min(hi).max(lo)),
                None => (lo, hi),
            }),
        })
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn eval(&self, x: &[f64], t: f64, s: f64) -> f64 {
        (self.eval)(x, t, s)
    }

    /// `df/ds`, by central difference when no derivative was supplied.
    pub fn deriv(&self, x: &[f64], t: f64, s: f64) -> f64 {
        match &self.deriv {
            Some(d) => d(x, t, s),
            None => {
                let h = f64::EPSILON.cbrt() * s.abs().max(1.0);
                ((self.eval)(x, t, s + h) - (self.eval)(x, t, s - h)) / (2.0 * h)
            }
        }
    }

    pub fn has_derivative(&self) -> bool {
        self.deriv.is_some()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        self.range
    }

    pub fn lambda_bar(&self) -> Option<f64> {
        self.lambda_bar
    }

    /// Interval applied by [`Nonlinearity::truncate`], if any.
    pub fn truncation(&self) -> Option<(f64, f64)> {
        self.truncation
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            Kind::AllenCahn { .. } => "allen_cahn",
            Kind::Fisher => "fisher",
            Kind::Linear { .. } => "linear",
            Kind::Zero => "zero",
            Kind::Custom => "custom",
        }
    }
}

fn check_interval(sigma1: f64, sigma2: f64) -> Result<()> {
    if !(sigma1 <= 0.0) || !(sigma2 >= 0.0) {
        return Err(Error::invalid(
            MODULE,
            format!("need sigma1 <= 0 <= sigma2, got [{sigma1}, {sigma2}]"),
        ));
    }
    Ok(())
}

/// Where and how densely to sample when spot-checking the assumptions.
#[derive(Debug, Clone)]
pub struct SamplingSpec {
    pub s_range: (f64, f64),
    pub pairs: usize,
    /// Points `x` to sample; an empty point means a space-independent `f`.
    pub points: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub seed: u64,
}

impl SamplingSpec {
    pub fn new(s_min: f64, s_max: f64, pairs: usize) -> Self {
        SamplingSpec {
            s_range: (s_min, s_max),
            pairs,
            points: vec![vec![]],
            times: vec![0.0, 0.5, 1.0],
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// `min (f(s1) - f(s2)) / (s1 - s2) + lambda` over sampled pairs;
    /// negative means a violation.
    pub a1_margin: f64,
    pub a1_pass: bool,
    /// `min(-f(sigma1), f(sigma2))` over sampled `(x, t)`, when a range is
    /// declared.
    pub a2_margin: Option<f64>,
    pub a2_pass: Option<bool>,
}

/// Sampled check of the one-sided Lipschitz bound and of the sign
/// conditions at the range ends. Sampling cannot prove either property.
pub fn verify_assumptions(f: &Nonlinearity, spec: &SamplingSpec) -> AssumptionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (a, b) = spec.s_range;
    let points: Vec<Vec<f64>> = if spec.points.is_empty() {
        vec![vec![]]
    } else {
        spec.points.clone()
    };
    let times = if spec.times.is_empty() { vec![0.0] } else { spec.times.clone() };
    let mut a1_margin = f64::INFINITY;
    for i in 0..spec.pairs {
        let x = &points[i % points.len()];
        let t = times[i % times.len()];
        let u: f64 = rng.gen_range(a..=b);
        let v: f64 = rng.gen_range(a..=b);
        let (s1, s2) = if u >= v { (u, v) } else { (v, u) };
        if s1 - s2 < 1e-9 * (1.0 + s1.abs()) {
            continue;
        }
        let slope = (f.eval(x, t, s1) - f.eval(x, t, s2)) / (s1 - s2);
        a1_margin = a1_margin.min(slope + f.lambda);
    }
    // roundoff in the secant of an exactly sharp bound
    let a1_tol = 1e-9 * (1.0 + f.lambda);
    let (a2_margin, a2_pass) = match f.range {
        Some((s1, s2)) => {
            let mut m = f64::INFINITY;
            for x in &points {
                for &t in &times {
                    m = m.min(-f.eval(x, t, s1)).min(f.eval(x, t, s2));
                }
            }
            (Some(m), Some(m >= 0.0))
        }
        None => (None, None),
    };
    AssumptionReport {
        a1_margin,
        a1_pass: a1_margin >= -a1_tol,
        a2_margin,
        a2_pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn allen_cahn_constants() {
        let f = Nonlinearity::allen_cahn(0.5).unwrap();
        assert_eq!(f.eval(&[], 0.0, 0.0), 0.0);
        assert_eq!(f.deriv(&[], 0.0, 0.0), -2.0);
        assert_eq!(f.lambda(), 2.0);
        assert_eq!(f.range(), Some((-1.0, 1.0)));
        assert_eq!(f.lambda_bar(), None);
        assert!(Nonlinearity::allen_cahn(1.0).is_err());
        assert!(Nonlinearity::allen_cahn(0.0).is_err());
    }

    #[test]
    fn fisher_is_truncated() {
        let f = Nonlinearity::fisher();
        assert_eq!(f.eval(&[], 0.0, 0.5), -0.25);
        assert_eq!(f.eval(&[], 0.0, 2.0), 0.0);
        assert_eq!(f.eval(&[], 0.0, -3.0), 0.0);
        assert_eq!(f.deriv(&[], 0.0, 2.0), 0.0);
        assert_eq!(f.lambda(), 1.0);
        assert_eq!(f.lambda_bar(), Some(1.0));
        assert_eq!(f.range(), Some((0.0, 1.0)));
    }

    #[test]
    fn truncated_allen_cahn() {
        let f = Nonlinearity::allen_cahn(0.5).unwrap().truncate(-1.0, 1.0).unwrap();
        assert_eq!(f.eval(&[], 0.0, 0.5), (0.125 - 0.5) / 0.5);
        assert_eq!(f.eval(&[], 0.0, 3.0), 0.0);
        assert_eq!(f.eval(&[], 0.0, -3.0), 0.0);
        assert_eq!(f.lambda(), 2.0);
        assert_eq!(f.lambda_bar(), Some(4.0));
        // away from zero the interval's one-sided constant drops
        let g = Nonlinearity::allen_cahn(0.5).unwrap().truncate(0.0, 0.0).unwrap();
        assert_eq!(g.lambda(), 2.0);
        assert!(Nonlinearity::zero().truncate(0.5, 1.0).is_err());
        assert!(Nonlinearity::zero().truncate(-1.0, -0.5).is_err());
    }

    #[test]
    fn linear_constants() {
        let f = Nonlinearity::linear(-3.0);
        assert_eq!(f.lambda(), 3.0);
        assert_eq!(f.lambda_bar(), Some(3.0));
        let g = Nonlinearity::linear(2.0);
        assert_eq!(g.lambda(), 0.0);
        assert_eq!(g.eval(&[], 0.0, 1.5), 3.0);
    }

    #[test]
    fn builtin_names() {
        assert_eq!(Nonlinearity::builtin("allen_cahn", Some(0.3)).unwrap().name(), "allen_cahn");
        assert_eq!(Nonlinearity::builtin("fisher", None).unwrap().name(), "fisher");
        assert!(Nonlinearity::builtin("allen_cahn", None).is_err());
        assert!(Nonlinearity::builtin("allen_cahn", Some(1.2)).is_err());
        assert!(Nonlinearity::builtin("custom", None).is_err());
        assert!(Nonlinearity::builtin("sine_gordon", None).is_err());
    }

    #[test]
    fn custom_uses_finite_difference_derivative() {
        let f = Nonlinearity::custom(Arc::new(|_, _, s| s.sin()), 1.0).unwrap();
        assert!(!f.has_derivative());
        assert!((f.deriv(&[], 0.0, 0.3) - 0.3f64.cos()).abs() < 1e-9);
        assert!(Nonlinearity::custom(Arc::new(|_, _, s| s), -1.0).is_err());
    }

    #[test]
    fn assumption_examples() {
        let f = Nonlinearity::allen_cahn(0.5).unwrap();
        let rep = verify_assumptions(&f, &SamplingSpec::new(-2.0, 2.0, 1000));
        assert!(rep.a1_pass && rep.a1_margin >= -1e-12);

        let g = Nonlinearity::custom(Arc::new(|_, _, s| -s * s), 0.0).unwrap();
        let rep = verify_assumptions(&g, &SamplingSpec::new(0.0, 10.0, 1000));
        assert!(!rep.a1_pass && rep.a1_margin < -1.0);
        assert_eq!(rep.a2_pass, None);

        let f = Nonlinearity::allen_cahn(0.3).unwrap();
        let rep = verify_assumptions(&f, &SamplingSpec::new(-2.0, 2.0, 100));
        assert_eq!(rep.a2_pass, Some(true));
        assert_eq!(rep.a2_margin, Some(0.0));
    }

    #[test]
    fn builtins_pass_their_assumptions() {
        for a in [0.3, 0.5, 0.7] {
            let f = Nonlinearity::allen_cahn(a).unwrap();
            let rep = verify_assumptions(&f, &SamplingSpec::new(-3.0, 3.0, 5000));
            assert!(rep.a1_pass && rep.a2_pass == Some(true), "alpha {a}: {rep:?}");
        }
        let rep = verify_assumptions(&Nonlinearity::fisher(), &SamplingSpec::new(-3.0, 3.0, 5000));
        assert!(rep.a1_pass && rep.a2_pass == Some(true));
        // a declared lambda too small for the cubic is caught
        let f = Nonlinearity::custom(Arc::new(|_, _, s| s * s * s - s), 0.5).unwrap();
        assert!(!verify_assumptions(&f, &SamplingSpec::new(-1.0, 1.0, 5000)).a1_pass);
    }

    #[test]
    fn space_time_dependence_is_sampled() {
        let c: SpaceTimeFn = Arc::new(|x, t| x[0] - 1.0 - t);
        let f = Nonlinearity::linear_field(c, Arc::new(|_, _| 0.0), (-2.0, 1.0)).unwrap();
        assert_eq!(f.lambda(), 2.0);
        let mut spec = SamplingSpec::new(-1.0, 1.0, 2000);
        spec.points = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert!(verify_assumptions(&f, &spec).a1_pass);
        spec.times = vec![2.0];
        assert!(!verify_assumptions(&f, &spec).a1_pass);
    }

    proptest! {
        #[test]
        fn truncation_idempotent(s in -10.0f64..10.0, lo in -2.0f64..0.0, hi in 0.0f64..2.0, a in 0.1f64..0.9) {
            let f = Nonlinearity::allen_cahn(a).unwrap();
            let once = f.truncate(lo, hi).unwrap();
            let twice = once.truncate(lo, hi).unwrap();
            prop_assert_eq!(once.eval(&[], 0.0, s), twice.eval(&[], 0.0, s));
            prop_assert_eq!(once.deriv(&[], 0.0, s), twice.deriv(&[], 0.0, s));
            prop_assert_eq!(once.lambda(), twice.lambda());
            prop_assert_eq!(once.lambda_bar(), twice.lambda_bar());
        }

        #[test]
        fn allen_cahn_is_odd(s in -5.0f64..5.0, a in 0.1f64..0.9) {
            let f = Nonlinearity::allen_cahn(a).unwrap();
            prop_assert_eq!(f.eval(&[], 0.0, -s), -f.eval(&[], 0.0, s));
        }

        #[test]
        fn truncated_constants_hold(lo in -2.0f64..0.0, hi in 0.0f64..2.0, a in 0.1f64..0.9) {
            let f = Nonlinearity::allen_cahn(a).unwrap().truncate(lo, hi).unwrap();
            let rep = verify_assumptions(&f, &SamplingSpec::new(-4.0, 4.0, 500));
            prop_assert!(rep.a1_pass, "{:?}", rep);
            let lb = f.lambda_bar().unwrap();
            for k in 0..=40 {
                let s = -4.0 + 0.2 * k as f64;
                prop_assert!(f.deriv(&[], 0.0, s).abs() <= lb * (1.0 + 1e-12));
            }
        }
    }
}
