use crate::error::{Error, Result};

/// Adam optimizer state over an ordered list of parameter buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl AdamState {
    /// Standard moments (`β1 = 0.9`, `β2 = 0.999`, `ε = 1e-8`).
    pub fn new(shapes: &[usize], learning_rate: f64) -> Self {
        Self::with_hyper(shapes, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(
        shapes: &[usize],
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Self {
        assert!(beta1 > 0.0 && beta1 < 1.0, "beta1 must lie in (0, 1)");
        assert!(beta2 > 0.0 && beta2 < 1.0, "beta2 must lie in (0, 1)");
        Self {
            t: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            beta1,
            beta2,
            epsilon,
            learning_rate,
        }
    }

    pub fn shapes(&self) -> Vec<usize> {
        self.m.iter().map(Vec::len).collect()
    }

    /// One bias-corrected Adam update, in place.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        let shapes = self.shapes();
        let param_shapes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        let grad_shapes: Vec<usize> = grads.iter().map(|g| g.len()).collect();
        if param_shapes != shapes || grad_shapes != shapes {
            return Err(Error::shape(
                "AdamState::step",
                format!("{shapes:?}"),
                format!("params {param_shapes:?}, grads {grad_shapes:?}"),
            ));
        }
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
