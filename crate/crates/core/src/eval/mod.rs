//! Cross-validated evaluation of the detector.
//!
//! Unjammed and jammed images are each shuffled and split into `k` disjoint
//! subsets. Fold `i` trains on every unjammed subset except the `i`-th, then
//! scores the `i`-th unjammed and `i`-th jammed subsets.

mod grid;
mod metrics;
mod stats;

pub use grid::{grid_search, GridEntry, HyperGrid, HyperParams};
pub use metrics::{metrics, roc_auc, ConfusionCounts, Metrics, Roc};
pub use stats::{
    confidence_interval, ln_gamma, reg_inc_beta, student_t_cdf, student_t_quantile, Interval,
};

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::autoenc::{self, Architecture, TrainConfig};
use crate::error::{Error, Result};
use crate::seed;

/// Whether independent folds and configurations run on the rayon pool.
/// Results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Sequential,
    Parallel,
}

impl Execution {
    pub(crate) fn map<T, R, F>(self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.into_iter().map(f).collect(),
            Execution::Parallel => items.into_par_iter().map(f).collect(),
        }
    }
}

/// Indices of the test subsets of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub unjammed: Vec<usize>,
    pub jammed: Vec<usize>,
}

fn partition(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let (base, extra) = (n / k, n % k);
    let mut parts = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        parts.push(order[start..start + len].to_vec());
        start += len;
    }
    parts
}

/// Seeded shuffle-and-partition of both classes into `k` paired folds.
pub fn kfold_split(n_unjammed: usize, n_jammed: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k-fold needs k >= 2, got {k}")));
    }
    let shortest = n_unjammed.min(n_jammed);
    if shortest < k {
        return Err(Error::TooFewValues { needed: k, got: shortest });
    }
    let u = partition(n_unjammed, k, seed::derive_seed(seed, "kfold-unjammed", 0));
    let j = partition(n_jammed, k, seed::derive_seed(seed, "kfold-jammed", 0));
    Ok(u.into_iter()
        .zip(j)
        .map(|(unjammed, jammed)| Fold { unjammed, jammed })
        .collect())
}

/// Unjammed training indices of fold `i`: every other fold's unjammed
/// subset, in fold order, optionally truncated to `max_train`.
pub fn training_indices(folds: &[Fold], i: usize, max_train: Option<usize>) -> Vec<usize> {
    let mut idx: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(other, _)| *other != i)
        .flat_map(|(_, f)| f.unjammed.iter().copied())
        .collect();
    if let Some(cap) = max_train {
        idx.truncate(cap);
    }
    idx
}

/// Outcome of training and testing on one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub fold_index: usize,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    pub auc: f64,
    pub tau: f64,
    pub train_size: usize,
    pub unjammed_mses: Vec<f64>,
    pub jammed_mses: Vec<f64>,
}

/// Trains on `train_unjammed`, thresholds, and scores both test sets.
pub fn evaluate_fold<X: AsRef<[f64]>>(
    train_unjammed: &[X],
    test_unjammed: &[X],
    test_jammed: &[X],
    arch: Architecture,
    cfg: &TrainConfig,
) -> Result<FoldReport> {
    if test_unjammed.is_empty() || test_jammed.is_empty() {
        return Err(Error::Empty("fold test sets must be non-empty"));
    }
    let outcome = autoenc::train(train_unjammed, cfg, arch)?;
    let tau = autoenc::threshold(&outcome.train_mses)?;
    let score = |set: &[X]| -> Result<Vec<f64>> {
        set.iter()
            .map(|x| {
                let x = x.as_ref();
                let f = outcome.model.forward(x)?;
                Ok(autoenc::mse(x, &f.reconstruction)?.value())
            })
            .collect()
    };
    let unjammed_mses = score(test_unjammed)?;
    let jammed_mses = score(test_jammed)?;
    let counts = ConfusionCounts::from_scores(&unjammed_mses, &jammed_mses, tau);
    let auc = roc_auc(&unjammed_mses, &jammed_mses)?.auc;
    Ok(FoldReport {
        fold_index: 0,
        counts,
        metrics: metrics(&counts),
        auc,
        tau,
        train_size: train_unjammed.len(),
        unjammed_mses,
        jammed_mses,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KFoldOptions {
    pub k: usize,
    pub seed: u64,
    /// Caps the number of training images per fold.
    pub max_train: Option<usize>,
    pub execution: Execution,
}

impl Default for KFoldOptions {
    fn default() -> Self {
        KFoldOptions {
            k: 10,
            seed: 0,
            max_train: None,
            execution: Execution::Sequential,
        }
    }
}

/// Per-metric means and 95% intervals across folds. A metric is `None` when
/// fewer than two folds define it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub accuracy: Option<Interval>,
    pub tpr_paper: Option<Interval>,
    pub tnr_paper: Option<Interval>,
    pub recall: Option<Interval>,
    pub specificity: Option<Interval>,
    pub auc: Option<Interval>,
}

impl Summary {
    pub const METRICS: [&'static str; 6] =
        ["accuracy", "tpr_paper", "tnr_paper", "recall", "specificity", "auc"];

    pub fn from_folds(folds: &[FoldReport]) -> Self {
        let ci = |pick: &dyn Fn(&FoldReport) -> Option<f64>| {
            let values: Vec<f64> = folds.iter().filter_map(pick).collect();
            confidence_interval(&values, 0.95).ok()
        };
        Summary {
            accuracy: ci(&|f| f.metrics.accuracy),
            tpr_paper: ci(&|f| f.metrics.tpr_paper),
            tnr_paper: ci(&|f| f.metrics.tnr_paper),
            recall: ci(&|f| f.metrics.recall),
            specificity: ci(&|f| f.metrics.specificity),
            auc: ci(&|f| Some(f.auc)),
        }
    }

    pub fn get(&self, metric: &str) -> Option<Interval> {
        match metric {
            "accuracy" => self.accuracy,
            "tpr_paper" => self.tpr_paper,
            "tnr_paper" => self.tnr_paper,
            "recall" => self.recall,
            "specificity" => self.specificity,
            "auc" => self.auc,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub folds: Vec<FoldReport>,
    pub summary: Summary,
}

impl EvalReport {
    pub fn mean_auc(&self) -> f64 {
        self.folds.iter().map(|f| f.auc).sum::<f64>() / self.folds.len() as f64
    }

    /// Mean of a per-fold metric over the folds where it is defined.
    pub fn mean_metric(&self, pick: impl Fn(&Metrics) -> Option<f64>) -> Option<f64> {
        let values: Vec<f64> = self.folds.iter().filter_map(|f| pick(&f.metrics)).collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn pick<'a, X: AsRef<[f64]>>(set: &'a [X], idx: &[usize]) -> Vec<&'a [f64]> {
    idx.iter().map(|&t| set[t].as_ref()).collect()
}

/// Runs the full k-fold protocol. Fold `i` trains with the child seed
/// `derive_seed(opts.seed, "fold-train", i)`.
pub fn run_kfold<X: AsRef<[f64]> + Sync>(
    unjammed: &[X],
    jammed: &[X],
    arch: Architecture,
    cfg: &TrainConfig,
    opts: &KFoldOptions,
) -> Result<EvalReport> {
    let folds = kfold_split(unjammed.len(), jammed.len(), opts.k, opts.seed)?;
    let work: Vec<(usize, Fold)> = folds.iter().cloned().enumerate().collect();
    let reports = opts.execution.map(work, |(i, fold)| {
        let train_idx = training_indices(&folds, i, opts.max_train);
        let train = pick(unjammed, &train_idx);
        let test_u = pick(unjammed, &fold.unjammed);
        let test_j = pick(jammed, &fold.jammed);
        let fold_cfg = TrainConfig {
            seed: seed::derive_seed(opts.seed, "fold-train", i as u64),
            ..cfg.clone()
        };
        evaluate_fold(&train, &test_u, &test_j, arch, &fold_cfg).map(|mut r| {
            r.fold_index = i;
            r
        })
    });
    let folds = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = Summary::from_folds(&folds);
    Ok(EvalReport { folds, summary })
}
