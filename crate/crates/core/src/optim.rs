//! Loss, learning-rate schedule and parameter update rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{softmax, Param};
use crate::tensor::{Scalar, Tensor};

/// Probabilities are clamped to this before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

fn check_class<T: Scalar>(t: &Tensor<T>, class: usize) -> Result<()> {
    if class >= t.len() {
        return Err(Error::ClassIndex {
            index: class,
            classes: t.len(),
        });
    }
    Ok(())
}

/// `-ln p[class]`, in nats.
pub fn cross_entropy<T: Scalar>(probs: &Tensor<T>, class: usize) -> Result<T> {
    check_class(probs, class)?;
    let p = probs.data()[class].max(T::of(PROB_FLOOR));
    Ok(-p.ln())
}

/// Gradient of `cross_entropy(softmax(logits), class)` w.r.t. the logits:
/// `softmax(logits) - onehot(class)`.
pub fn softmax_xent_grad<T: Scalar>(logits: &Tensor<T>, class: usize) -> Result<Tensor<T>> {
    check_class(logits, class)?;
    xent_grad_from_probs(&softmax(logits), class)
}

/// Same as [`softmax_xent_grad`] when the softmax output is already known.
pub fn xent_grad_from_probs<T: Scalar>(probs: &Tensor<T>, class: usize) -> Result<Tensor<T>> {
    check_class(probs, class)?;
    let mut g = probs.clone();
    g.data_mut()[class] -= T::one();
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule {
    Constant { initial: f64 },
    /// `initial * factor^floor(epoch / interval)`
    Step { initial: f64, factor: f64, interval: usize },
    /// `initial * factor^epoch`
    Exponential { initial: f64, factor: f64 },
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule::Step {
            initial: 1e-3,
            factor: 0.5,
            interval: 10,
        }
    }
}

impl LrSchedule {
    /// Learning rate for a zero-based epoch index.
    pub fn rate_at(&self, epoch: usize) -> f64 {
        match *self {
            LrSchedule::Constant { initial } => initial,
            LrSchedule::Step {
                initial,
                factor,
                interval,
            } => initial * factor.powi((epoch / interval.max(1)) as i32),
            LrSchedule::Exponential { initial, factor } => initial * factor.powi(epoch as i32),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (initial, factor) = match *self {
            LrSchedule::Constant { initial } => (initial, 1.0),
            LrSchedule::Step {
                initial,
                factor,
                interval,
            } => {
                if interval == 0 {
                    return Err(Error::config("step schedule interval must be >= 1"));
                }
                (initial, factor)
            }
            LrSchedule::Exponential { initial, factor } => (initial, factor),
        };
        if !(initial > 0.0 && initial.is_finite()) {
            return Err(Error::config(format!("initial learning rate must be positive, got {initial}")));
        }
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(Error::config(format!("decay factor must lie in (0, 1], got {factor}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UpdateRule {
    Sgd,
    /// `v = mu v + g; w -= lr v`
    Momentum { mu: f64 },
    /// Adaptive moments with bias correction.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for UpdateRule {
    fn default() -> Self {
        UpdateRule::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl UpdateRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            UpdateRule::Sgd => Ok(()),
            UpdateRule::Momentum { mu } if (0.0..1.0).contains(&mu) => Ok(()),
            UpdateRule::Adam { beta1, beta2, eps }
                if (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0 =>
            {
                Ok(())
            }
            other => Err(Error::config(format!("invalid optimizer settings {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    rule: UpdateRule,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
    steps: u64,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(rule: UpdateRule) -> Self {
        Optimizer {
            rule,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    pub fn rule(&self) -> UpdateRule {
        self.rule
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update to every parameter from its accumulated gradient.
    /// Accumulators are created on the first call and must keep matching
    /// parameter shapes afterwards.
    pub fn step(&mut self, params: &mut [&mut Param<T>], lr: f64) -> Result<()> {
        if self.first.is_empty() && self.steps == 0 {
            self.first = params.iter().map(|p| vec![T::zero(); p.value.len()]).collect();
            if matches!(self.rule, UpdateRule::Adam { .. }) {
                self.second = self.first.clone();
            }
        }
        if self.first.len() != params.len()
            || self.first.iter().zip(params.iter()).any(|(m, p)| m.len() != p.value.len())
        {
            return Err(Error::shape("optimizer state does not match parameter shapes"));
        }
        for p in params.iter() {
            if p.grad.shape() != p.value.shape() {
                return Err(Error::shape("gradient shape differs from parameter shape"));
            }
        }
        self.steps += 1;
        let lr_t = T::of(lr);
        match self.rule {
            UpdateRule::Sgd => {
                for p in params.iter_mut() {
                    let Param { value, grad } = &mut **p;
                    for (w, &g) in value.data_mut().iter_mut().zip(grad.data()) {
                        *w -= lr_t * g;
                    }
                }
            }
            UpdateRule::Momentum { mu } => {
                let mu = T::of(mu);
                for (p, vel) in params.iter_mut().zip(&mut self.first) {
                    let Param { value, grad } = &mut **p;
                    for ((w, &g), v) in value.data_mut().iter_mut().zip(grad.data()).zip(vel.iter_mut()) {
                        *v = mu * *v + g;
                        *w -= lr_t * *v;
                    }
                }
            }
            UpdateRule::Adam { beta1, beta2, eps } => {
                let t = self.steps as i32;
                let c1 = T::of(1.0 - beta1.powi(t));
                let c2 = T::of(1.0 - beta2.powi(t));
                let (b1, b2, eps) = (T::of(beta1), T::of(beta2), T::of(eps));
                let one = T::one();
                for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
                    let Param { value, grad } = &mut **p;
                    for (((w, &g), mi), vi) in value
                        .data_mut()
                        .iter_mut()
                        .zip(grad.data())
                        .zip(m.iter_mut())
                        .zip(v.iter_mut())
                    {
                        *mi = b1 * *mi + (one - b1) * g;
                        *vi = b2 * *vi + (one - b2) * g * g;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *w -= lr_t * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn param(v: f64, g: f64) -> Param<f64> {
        let mut p = Param::new(Tensor::vector(&[v]));
        p.grad = Tensor::vector(&[g]);
        p
    }

    #[test]
    fn cross_entropy_values() {
        let sure = Tensor::vector(&[1.0f64, 0.0]);
        assert!(cross_entropy(&sure, 0).unwrap().abs() < 1e-6);
        let half = Tensor::vector(&[0.5f64, 0.5]);
        assert!((cross_entropy(&half, 0).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        // floored rather than infinite
        assert!((cross_entropy(&sure, 1).unwrap() - (-(1e-12f64).ln())).abs() < 1e-9);
        assert!(matches!(cross_entropy(&half, 2), Err(Error::ClassIndex { index: 2, .. })));
    }

    #[test]
    fn fused_gradient_at_origin() {
        let g = softmax_xent_grad(&Tensor::vector(&[0.0f64, 0.0]), 0).unwrap();
        assert_eq!(g.data(), &[-0.5, 0.5]);
        assert!(softmax_xent_grad(&Tensor::vector(&[0.0f64, 0.0]), 2).is_err());
    }

    #[test]
    fn sgd_step() {
        let mut p = param(1.0, 1.0);
        Optimizer::new(UpdateRule::Sgd).step(&mut [&mut p], 0.1).unwrap();
        assert!((p.value.data()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_gradients_leave_params_alone() {
        for rule in [UpdateRule::Sgd, UpdateRule::Momentum { mu: 0.9 }] {
            let mut p = param(0.7, 0.0);
            Optimizer::new(rule).step(&mut [&mut p], 0.5).unwrap();
            assert_eq!(p.value.data(), &[0.7]);
        }
    }

    #[test]
    fn momentum_two_step_recurrence() {
        // v1 = g, v2 = 0.9 g + g; total update = lr g (1 + 1.9)
        let (lr, g) = (0.1, 2.0);
        let mut p = param(0.0, g);
        let mut opt = Optimizer::new(UpdateRule::Momentum { mu: 0.9 });
        opt.step(&mut [&mut p], lr).unwrap();
        opt.step(&mut [&mut p], lr).unwrap();
        assert!((p.value.data()[0] + lr * g * 2.9).abs() < 1e-12);
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        // With bias correction the first step is lr * g / (|g| + eps).
        let mut p = param(1.0, 3.0);
        Optimizer::new(UpdateRule::default()).step(&mut [&mut p], 0.01).unwrap();
        assert!((p.value.data()[0] - (1.0 - 0.01)).abs() < 1e-8);
    }

    #[test]
    fn state_shape_mismatch() {
        let mut opt = Optimizer::new(UpdateRule::Sgd);
        let mut a = param(1.0, 1.0);
        opt.step(&mut [&mut a], 0.1).unwrap();
        let mut b = Param::new(Tensor::vector(&[1.0, 2.0]));
        assert!(matches!(opt.step(&mut [&mut b], 0.1), Err(Error::Shape(_))));
    }

    #[test]
    fn schedules() {
        let step = LrSchedule::Step { initial: 0.01, factor: 0.5, interval: 10 };
        assert_eq!(step.rate_at(0), 0.01);
        assert_eq!(step.rate_at(9), 0.01);
        assert!((step.rate_at(10) - 0.005).abs() < 1e-15);
        let exp = LrSchedule::Exponential { initial: 0.01, factor: 0.9 };
        assert!((exp.rate_at(2) - 0.0081).abs() < 1e-15);
        assert!(LrSchedule::Step { initial: 0.01, factor: 0.5, interval: 0 }.validate().is_err());
        assert!(LrSchedule::Exponential { initial: -1.0, factor: 0.5 }.validate().is_err());
    }

    proptest! {
        #[test]
        fn fused_gradient_is_softmax_minus_onehot(a in -10.0f64..10.0, b in -10.0f64..10.0, c in 0usize..2) {
            let logits = Tensor::vector(&[a, b]);
            let g = softmax_xent_grad(&logits, c).unwrap();
            let p = softmax(&logits);
            for i in 0..2 {
                let y = if i == c { 1.0 } else { 0.0 };
                prop_assert_eq!(g.data()[i], p.data()[i] - y);
            }
            prop_assert!(g.sum().abs() < 1e-7);
        }

        #[test]
        fn fused_gradient_matches_finite_differences(a in -5.0f64..5.0, b in -5.0f64..5.0, c in 0usize..2) {
            let loss = |x: f64, y: f64| cross_entropy(&softmax(&Tensor::vector(&[x, y])), c).unwrap();
            let h = 1e-5;
            let fd = [
                (loss(a + h, b) - loss(a - h, b)) / (2.0 * h),
                (loss(a, b + h) - loss(a, b - h)) / (2.0 * h),
            ];
            let g = softmax_xent_grad(&Tensor::vector(&[a, b]), c).unwrap();
            for (analytic, numeric) in g.data().iter().zip(fd) {
                prop_assert!((analytic - numeric).abs() < 1e-6);
            }
        }

        #[test]
        fn cross_entropy_decreases_with_confidence(p in 0.001f64..0.998, dp in 0.0005f64..0.001) {
            let lo = cross_entropy(&Tensor::vector(&[p, 1.0 - p]), 0).unwrap();
            let hi = cross_entropy(&Tensor::vector(&[p + dp, 1.0 - p - dp]), 0).unwrap();
            prop_assert!(lo >= 0.0 && hi >= 0.0);
            prop_assert!(hi < lo);
        }

        #[test]
        fn one_step_moves_toward_minimum(w0 in -10.0f64..10.0, target in -10.0f64..10.0, rule_pick in 0usize..3) {
            prop_assume!((w0 - target).abs() > 1e-3);
            let rule = [UpdateRule::Sgd, UpdateRule::Momentum { mu: 0.9 }, UpdateRule::default()][rule_pick];
            // loss = (w - target)^2 / 2
            let mut p = param(w0, w0 - target);
            Optimizer::new(rule).step(&mut [&mut p], 1e-4).unwrap();
            prop_assert!((p.value.data()[0] - target).abs() < (w0 - target).abs());
        }

        #[test]
        fn schedules_never_increase(initial in 1e-5f64..1.0, factor in 0.01f64..=1.0, interval in 1usize..20, e in 0usize..200) {
            for s in [LrSchedule::Step { initial, factor, interval }, LrSchedule::Exponential { initial, factor }] {
                prop_assert!(s.rate_at(e + 1) <= s.rate_at(e));
                prop_assert_eq!(s.rate_at(0), initial);
            }
        }
    }
}
