//! Adaptive-moment (Adam) state shared by the estimators.

#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// Clears the first moment, keeping the scale estimates.
    pub fn reset_momentum(&mut self) {
        self.m.iter_mut().for_each(|m| *m = 0.0);
    }

    /// Folds `grad` into the moment estimates.
    pub fn observe(&mut self, grad: &[f64]) {
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        for ((m, v), g) in self.m.iter_mut().zip(&mut self.v).zip(grad) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
        }
    }

    /// Bias-corrected direction `m_hat / (sqrt(v_hat) + eps)` and the
    /// per-coordinate preconditioner `1 / (sqrt(v_hat) + eps)`.
    pub fn direction(&self, dir: &mut [f64], scale: &mut [f64]) {
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (k, (d, s)) in dir.iter_mut().zip(scale.iter_mut()).enumerate() {
            let inv = 1.0 / ((self.v[k] / c2).sqrt() + self.eps);
            *s = inv;
            *d = self.m[k] / c1 * inv;
        }
    }

    /// One ascent step `x += lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn ascend(&mut self, x: &mut [f64], grad: &[f64], lr: f64) {
        self.observe(grad);
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (k, xi) in x.iter_mut().enumerate() {
            *xi += lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_has_unit_magnitude() {
        let mut adam = Adam::new(2);
        let mut x = vec![0.0, 0.0];
        adam.ascend(&mut x, &[3.0, -0.01], 0.1);
        assert!((x[0] - 0.1).abs() < 1e-6);
        assert!((x[1] + 0.1).abs() < 1e-4);
    }

    #[test]
    fn maximizes_concave_quadratic() {
        let mut adam = Adam::new(1);
        let mut x = vec![5.0];
        for _ in 0..3000 {
            let g = -2.0 * (x[0] - 1.5);
            adam.ascend(&mut x, &[g], 0.05);
        }
        assert!((x[0] - 1.5).abs() < 1e-3);
    }
}
