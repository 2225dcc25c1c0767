use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopConfig {
    pub enabled: bool,
    pub patience: usize,
    pub min_delta: f64,
    /// Epoch cap while early stopping is enabled.
    pub cap: usize,
}

impl Default for EarlyStopConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            patience: 5,
            min_delta: 1e-3,
            cap: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Stale,
    Stop,
}

/// Tracks a maximized monitor. A value counts as an improvement when
/// `value - min_delta > best`.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    min_delta: f64,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        Self {
            patience,
            min_delta,
            best: None,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, value: f64) -> Verdict {
        let improved = match self.best {
            None => true,
            Some((_, best)) => value - self.min_delta > best,
        };
        if improved {
            self.best = Some((epoch, value));
            self.stale = 0;
            return Verdict::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            Verdict::Stop
        } else {
            Verdict::Stale
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }

    pub fn best_value(&self) -> Option<f64> {
        self.best.map(|(_, v)| v)
    }
}
