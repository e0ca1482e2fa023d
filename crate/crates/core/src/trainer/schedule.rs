/// Step-decay learning rate: `base_lr * factor^floor(epoch / step)`, with
/// `epoch` counted from 0.
pub fn lr_at_epoch(base_lr: f64, factor: f64, step: usize, epoch: usize) -> f64 {
    let decays = (epoch / step.max(1)) as i32;
    base_lr * factor.powi(decays)
}

/// True when each of the last `patience` entries failed to strictly lower
/// the running minimum of the history.
pub fn early_stop_check(dev_loss_history: &[f64], patience: usize) -> bool {
    match best_index(dev_loss_history) {
        Some(best) => dev_loss_history.len() - 1 - best >= patience,
        None => false,
    }
}

/// Index of the entry that last set a new strict minimum.
fn best_index(history: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &loss) in history.iter().enumerate() {
        if loss.is_nan() {
            continue;
        }
        match best {
            Some((_, min)) if loss >= min => {}
            _ => best = Some((i, loss)),
        }
    }
    best.map(|(i, _)| i).or((!history.is_empty()).then_some(0))
}

/// Tracks dev losses across epochs (1-based) for early stopping.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    history: Vec<f64>,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            history: Vec::new(),
        }
    }

    /// Records an epoch's dev loss; returns whether it is a new best.
    pub fn record(&mut self, dev_loss: f64) -> bool {
        self.history.push(dev_loss);
        best_index(&self.history) == Some(self.history.len() - 1)
    }

    pub fn should_stop(&self) -> bool {
        early_stop_check(&self.history, self.patience)
    }

    /// 1-based epoch with the lowest dev loss so far.
    pub fn best_epoch(&self) -> Option<usize> {
        best_index(&self.history).map(|i| i + 1)
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }
}
