/// Minimum decrease that counts as a new best validation loss.
pub const IMPROVEMENT_DELTA: f64 = 1e-6;

/// What the scheduler decided after one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochDecision {
    pub improved: bool,
    pub halved: bool,
    pub stop: bool,
}

/// Plateau learning-rate halving plus early stopping. Both counters measure
/// epochs since the last new best and reset only on a new best; the rate is
/// halved each time that count reaches a multiple of the plateau patience.
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    lr: f64,
    factor: f64,
    plateau_patience: usize,
    early_stop_patience: usize,
    best: f64,
    since_best: usize,
}

impl PlateauScheduler {
    pub fn new(initial_lr: f64, factor: f64, plateau_patience: usize, early_stop_patience: usize) -> Self {
        Self { lr: initial_lr, factor, plateau_patience, early_stop_patience, best: f64::INFINITY, since_best: 0 }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn observe(&mut self, val_loss: f64) -> EpochDecision {
        if val_loss < self.best - IMPROVEMENT_DELTA {
            self.best = val_loss;
            self.since_best = 0;
            return EpochDecision { improved: true, halved: false, stop: false };
        }
        self.since_best += 1;
        let halved = self.since_best % self.plateau_patience == 0;
        if halved {
            self.lr *= self.factor;
        }
        EpochDecision { improved: false, halved, stop: self.since_best >= self.early_stop_patience }
    }
}
