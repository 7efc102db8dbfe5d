use crate::grid::Scalar;
use crate::net::NetworkState;

/// Multiplies the learning rate by `factor` once the epoch-mean training
/// loss has failed to improve for `patience` consecutive epochs.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateauSchedule {
    lr: f64,
    factor: f64,
    patience: usize,
    best: f64,
    stale: usize,
}

impl PlateauSchedule {
    pub fn new(lr0: f64, factor: f64, patience: usize) -> Self {
        Self {
            lr: lr0,
            factor,
            patience: patience.max(1),
            best: f64::INFINITY,
            stale: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Records one epoch's loss and returns the learning rate for the next.
    pub fn step(&mut self, epoch_loss: f64) -> f64 {
        if epoch_loss < self.best {
            self.best = epoch_loss;
            self.stale = 0;
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                self.lr *= self.factor;
                self.stale = 0;
            }
        }
        self.lr
    }
}

/// SGD with optional heavy-ball momentum: `v = m v + g; theta -= lr v`.
pub struct Sgd<T> {
    momentum: f64,
    velocity: Option<NetworkState<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(momentum: f64) -> Self {
        Self {
            momentum,
            velocity: None,
        }
    }

    pub fn step(&mut self, state: &mut NetworkState<T>, grads: &NetworkState<T>, lr: f64) {
        if self.momentum == 0.0 {
            state.add_scaled(grads, T::from_f64(-lr));
            return;
        }
        let m = T::from_f64(self.momentum);
        let v = self.velocity.get_or_insert_with(|| {
            let mut z = grads.clone();
            for (_, t) in z.tensors_mut() {
                t.data_mut().fill(T::ZERO);
            }
            z
        });
        for ((_, vt), (_, gt)) in v.tensors_mut().into_iter().zip(grads.tensors()) {
            for (a, &g) in vt.data_mut().iter_mut().zip(gt.data()) {
                *a = m * *a + g;
            }
        }
        state.add_scaled(v, T::from_f64(-lr));
    }
}
