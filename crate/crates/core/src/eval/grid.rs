use std::cmp::Ordering;

use crate::autoenc::{Architecture, EncoderTransfer, TrainConfig};

use super::{run_kfold, EvalReport, Execution, KFoldOptions};

/// One point of the hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub k_hidden: usize,
    pub sparsity_weight: f64,
    pub l2_weight: f64,
    pub enc_transfer: EncoderTransfer,
}

impl HyperParams {
    /// Lexicographic order on `(k_hidden, sparsity_weight, l2_weight, enc_transfer)`.
    pub fn lexicographic(&self, other: &Self) -> Ordering {
        self.k_hidden
            .cmp(&other.k_hidden)
            .then(self.sparsity_weight.total_cmp(&other.sparsity_weight))
            .then(self.l2_weight.total_cmp(&other.l2_weight))
            .then(self.enc_transfer.cmp(&other.enc_transfer))
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            k_hidden: self.k_hidden,
            enc_transfer: self.enc_transfer,
        }
    }

    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            sparsity_weight: self.sparsity_weight,
            l2_weight: self.l2_weight,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub hidden_sizes: Vec<usize>,
    pub sparsity_weights: Vec<f64>,
    pub l2_weights: Vec<f64>,
    pub encoders: Vec<EncoderTransfer>,
}

impl HyperGrid {
    /// Hidden size {8, 16, 32, 64} × sparsity {1, 0.5, 0} × L2 {1e-2, 1e-3, 1e-4}
    /// × encoder {logsig, satlin}: 72 configurations.
    pub fn reference() -> Self {
        HyperGrid {
            hidden_sizes: vec![8, 16, 32, 64],
            sparsity_weights: vec![1.0, 0.5, 0.0],
            l2_weights: vec![0.01, 0.001, 0.0001],
            encoders: vec![EncoderTransfer::LogSig, EncoderTransfer::SatLin],
        }
    }

    pub fn single(params: HyperParams) -> Self {
        HyperGrid {
            hidden_sizes: vec![params.k_hidden],
            sparsity_weights: vec![params.sparsity_weight],
            l2_weights: vec![params.l2_weight],
            encoders: vec![params.enc_transfer],
        }
    }

    pub fn len(&self) -> usize {
        self.hidden_sizes.len() * self.sparsity_weights.len() * self.l2_weights.len() * self.encoders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The cross product in declaration order.
    pub fn configs(&self) -> Vec<HyperParams> {
        let mut out = Vec::with_capacity(self.len());
        for &k_hidden in &self.hidden_sizes {
            for &sparsity_weight in &self.sparsity_weights {
                for &l2_weight in &self.l2_weights {
                    for &enc_transfer in &self.encoders {
                        out.push(HyperParams {
                            k_hidden,
                            sparsity_weight,
                            l2_weight,
                            enc_transfer,
                        });
                    }
                }
            }
        }
        out
    }
}

/// One ranked configuration. Failed configurations keep their error message
/// and rank after every successful one.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEntry {
    pub params: HyperParams,
    pub mean_auc: Option<f64>,
    pub report: Result<EvalReport, String>,
}

fn rank(a: &GridEntry, b: &GridEntry) -> Ordering {
    let by_auc = match (a.mean_auc, b.mean_auc) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    by_auc.then_with(|| a.params.lexicographic(&b.params))
}

/// Runs the k-fold protocol for every configuration and ranks them by mean
/// fold AUC, descending. Ties go to the smaller hidden size, then to
/// lexicographic configuration order; exact duplicates keep grid order.
pub fn grid_search<X: AsRef<[f64]> + Sync>(
    unjammed: &[X],
    jammed: &[X],
    grid: &HyperGrid,
    base: &TrainConfig,
    opts: &KFoldOptions,
) -> Vec<GridEntry> {
    let inner = KFoldOptions {
        execution: Execution::Sequential,
        ..opts.clone()
    };
    let mut entries = opts.execution.map(grid.configs(), |params| {
        let report = run_kfold(unjammed, jammed, params.architecture(), &params.apply(base), &inner)
            .map_err(|e| e.to_string());
        GridEntry {
            params,
            mean_auc: report.as_ref().ok().map(EvalReport::mean_auc),
            report,
        }
    });
    entries.sort_by(rank);
    entries
}
