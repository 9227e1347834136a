use crate::model::Parameters;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam with bias correction and no weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Parameters,
    v: Parameters,
    t: u32,
}

impl Adam {
    pub fn new(params: &Parameters) -> Adam {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    pub fn step(&mut self, params: &mut Parameters, grads: &Parameters, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t as i32);
        let c2 = 1.0 - BETA2.powi(self.t as i32);
        let tensors = params.tensors_mut();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, g), m), v) in tensors.into_iter().zip(grads.tensors()).zip(ms).zip(vs) {
            for i in 0..p.len() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + EPSILON);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Linear;

    #[test]
    fn first_step_moves_by_lr() {
        let mut params = Parameters {
            trunk: Linear::zeros(1, 1),
            heads: [Linear::zeros(1, 1), Linear::zeros(1, 1), Linear::zeros(1, 1)],
        };
        let mut grads = params.zeros_like();
        grads.trunk.weight[0] = 3.0;
        grads.heads[2].bias[0] = -0.5;
        let mut adam = Adam::new(&params);
        adam.step(&mut params, &grads, 0.1);
        assert!((params.trunk.weight[0] + 0.1).abs() < 1e-8);
        assert!((params.heads[2].bias[0] - 0.1).abs() < 1e-7);
        assert_eq!(params.heads[0].weight[0], 0.0);
    }
}
