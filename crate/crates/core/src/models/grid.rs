use serde::{Deserialize, Serialize};

use super::forest::{fit_forest_binned, ForestParams};
use super::gbt::{fit_gbt_binned, GbtParams};
use super::logistic::{fit_logistic, LogisticParams, Penalty};
use super::tree::BinnedMatrix;
use super::{predict_proba, Model};
use crate::dataset::{kfold_windows, Dataset, DatasetWindow, FeatureSpec, LabelingConfig};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::metrics::auprc;

/// One trainable configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    RandomForest(ForestParams),
    Logistic(LogisticParams),
    GradientBoosting(GbtParams),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::RandomForest(ForestParams::default())
    }
}

impl ModelSpec {
    pub fn training_weight(&self) -> f64 {
        match self {
            ModelSpec::RandomForest(p) => p.training_weight,
            ModelSpec::Logistic(p) => p.training_weight,
            ModelSpec::GradientBoosting(p) => p.training_weight,
        }
    }

    pub fn with_training_weight(mut self, tw: f64) -> Self {
        match &mut self {
            ModelSpec::RandomForest(p) => p.training_weight = tw,
            ModelSpec::Logistic(p) => p.training_weight = tw,
            ModelSpec::GradientBoosting(p) => p.training_weight = tw,
        }
        self
    }

    /// Ordering key for "smaller model": fewer trees, then shallower, then
    /// larger leaves; for logistic regression, stronger regularization.
    pub fn size_key(&self) -> (usize, usize, i64, f64) {
        let depth = |d: Option<usize>| d.unwrap_or(usize::MAX);
        match self {
            ModelSpec::RandomForest(p) => (
                p.n_trees,
                depth(p.max_depth),
                -(p.min_samples_leaf as i64),
                0.0,
            ),
            ModelSpec::GradientBoosting(p) => (
                p.n_rounds,
                depth(p.max_depth),
                -(p.min_child_weight as i64),
                p.learning_rate,
            ),
            ModelSpec::Logistic(p) => (
                0,
                0,
                0,
                match p.penalty {
                    Penalty::L2 { c } => c,
                    Penalty::None => f64::INFINITY,
                },
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::RandomForest(p) => p.validate(),
            ModelSpec::Logistic(p) => p.validate(),
            ModelSpec::GradientBoosting(p) => p.validate(),
        }
    }
}

/// Training matrix with its binned form computed once.
pub struct Prepared {
    pub x: FeatureMatrix,
    pub y: Vec<u8>,
    binned: Option<BinnedMatrix>,
}

impl Prepared {
    pub fn new(x: FeatureMatrix, y: Vec<u8>, needs_bins: bool) -> Result<Self> {
        super::tree::validate_training(&x, &y, None)?;
        let binned = if needs_bins {
            Some(BinnedMatrix::new(&x)?)
        } else {
            None
        };
        Ok(Self { x, y, binned })
    }

    pub fn fit(&self, spec: &ModelSpec, seed: u64) -> Result<Model> {
        let bins = || {
            self.binned
                .as_ref()
                .ok_or_else(|| Error::invalid("tree models need binned training data"))
        };
        Ok(match spec {
            ModelSpec::RandomForest(p) => {
                Model::RandomForest(fit_forest_binned(bins()?, &self.y, None, p, seed)?)
            }
            ModelSpec::GradientBoosting(p) => {
                Model::GradientBoosting(fit_gbt_binned(bins()?, &self.y, None, p)?.0)
            }
            ModelSpec::Logistic(p) => {
                Model::Logistic(fit_logistic(&self.x, &self.y, &vec![1.0; self.y.len()], p)?)
            }
        })
    }
}

/// Cells of a hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub cells: Vec<ModelSpec>,
}

pub const DEFAULT_TREE_COUNTS: [usize; 4] = [10, 40, 70, 100];
pub const DEFAULT_DEPTHS: [Option<usize>; 7] = [
    None,
    Some(1),
    Some(2),
    Some(6),
    Some(15),
    Some(39),
    Some(100),
];
pub const DEFAULT_MIN_SAMPLES: [usize; 3] = [1, 2, 4];
pub const DEFAULT_LEARNING_RATES: [f64; 4] = [0.001, 0.01, 0.1, 1.0];
pub const DEFAULT_L2_COEFFICIENTS: [f64; 7] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];

impl GridSpec {
    pub fn forest(
        trees: &[usize],
        depths: &[Option<usize>],
        min_samples: &[usize],
        base: ForestParams,
    ) -> Self {
        let mut cells = Vec::new();
        for &n_trees in trees {
            for &max_depth in depths {
                for &min_samples_leaf in min_samples {
                    cells.push(ModelSpec::RandomForest(ForestParams {
                        n_trees,
                        max_depth,
                        min_samples_leaf,
                        ..base
                    }));
                }
            }
        }
        Self { cells }
    }

    pub fn gbt(
        rounds: &[usize],
        depths: &[Option<usize>],
        min_child: &[f64],
        rates: &[f64],
        base: GbtParams,
    ) -> Self {
        let mut cells = Vec::new();
        for &n_rounds in rounds {
            for &max_depth in depths {
                for &min_child_weight in min_child {
                    for &learning_rate in rates {
                        cells.push(ModelSpec::GradientBoosting(GbtParams {
                            n_rounds,
                            max_depth,
                            min_child_weight,
                            learning_rate,
                            ..base
                        }));
                    }
                }
            }
        }
        Self { cells }
    }

    pub fn logistic(penalties: &[Penalty], base: LogisticParams) -> Self {
        Self {
            cells: penalties
                .iter()
                .map(|&penalty| ModelSpec::Logistic(LogisticParams { penalty, ..base }))
                .collect(),
        }
    }

    pub fn default_forest() -> Self {
        Self::forest(
            &DEFAULT_TREE_COUNTS,
            &DEFAULT_DEPTHS,
            &DEFAULT_MIN_SAMPLES,
            ForestParams::default(),
        )
    }

    pub fn default_gbt() -> Self {
        let mc: Vec<f64> = DEFAULT_MIN_SAMPLES.iter().map(|&v| v as f64).collect();
        Self::gbt(
            &DEFAULT_TREE_COUNTS,
            &DEFAULT_DEPTHS,
            &mc,
            &DEFAULT_LEARNING_RATES,
            GbtParams::default(),
        )
    }

    pub fn default_logistic() -> Self {
        let mut p = vec![Penalty::None];
        p.extend(DEFAULT_L2_COEFFICIENTS.iter().map(|&c| Penalty::L2 { c }));
        Self::logistic(&p, LogisticParams::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub spec: ModelSpec,
    /// Held-out AUPRC per fold; `None` when the fold has no positive hours.
    pub fold_auprc: Vec<Option<f64>>,
    pub mean_auprc: f64,
    pub std_auprc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub k: usize,
    pub seed: u64,
    pub cells: Vec<CvCell>,
    pub best: usize,
}

impl CvResult {
    pub fn best_cell(&self) -> &CvCell {
        &self.cells[self.best]
    }
}

/// Window-grouped k-fold grid search scored by held-out AUPRC.
///
/// The best cell has the highest mean AUPRC; exact ties go to the smaller
/// model. Every cell sees the same folds and the same training seed.
pub fn grid_search_cv(
    windows: &[&DatasetWindow],
    spec: &FeatureSpec,
    labeling: &LabelingConfig,
    grid: &GridSpec,
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    if grid.cells.is_empty() {
        return Err(Error::invalid("hyperparameter grid is empty"));
    }
    for c in &grid.cells {
        c.validate()?;
    }
    let folds = kfold_windows(windows, k, seed)?;
    let needs_bins = grid
        .cells
        .iter()
        .any(|c| !matches!(c, ModelSpec::Logistic(_)));
    let mut scores = vec![Vec::with_capacity(k); grid.cells.len()];
    for (f, held) in folds.iter().enumerate() {
        let mut in_fold = vec![false; windows.len()];
        for &i in held {
            in_fold[i] = true;
        }
        let train: Vec<&DatasetWindow> = (0..windows.len())
            .filter(|&i| !in_fold[i])
            .map(|i| windows[i])
            .collect();
        let test: Vec<&DatasetWindow> = held.iter().map(|&i| windows[i]).collect();
        let train = Dataset::build(&train, spec, labeling)?;
        let test = Dataset::build(&test, spec, labeling)?;
        let prepared = Prepared::new(train.matrix(), train.labels(), needs_bins)?;
        let (tx, ty) = (test.matrix(), test.labels());
        let has_pos = ty.contains(&1);
        for (c, cell) in grid.cells.iter().enumerate() {
            let model = prepared.fit(cell, seed)?;
            let s = if has_pos {
                Some(auprc(&predict_proba(&model, &tx)?, &ty)?)
            } else {
                None
            };
            log::debug!("fold {f} cell {c}: {s:?}");
            scores[c].push(s);
        }
    }
    let cells: Vec<CvCell> = grid
        .cells
        .iter()
        .zip(scores)
        .map(|(spec, fold_auprc)| {
            let vals: Vec<f64> = fold_auprc.iter().flatten().copied().collect();
            let n = vals.len() as f64;
            let mean = if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / n
            };
            let var = if vals.len() > 1 {
                vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            CvCell {
                spec: *spec,
                fold_auprc,
                mean_auprc: mean,
                std_auprc: var.sqrt(),
            }
        })
        .collect();
    if cells.iter().all(|c| c.mean_auprc.is_nan()) {
        return Err(Error::invalid(
            "no fold contains a positive hour; AUPRC is undefined",
        ));
    }
    let mut best = 0;
    for (i, c) in cells.iter().enumerate().skip(1) {
        let b = &cells[best];
        let better = if b.mean_auprc.is_nan() {
            !c.mean_auprc.is_nan()
        } else if c.mean_auprc != b.mean_auprc {
            c.mean_auprc > b.mean_auprc
        } else {
            c.spec.size_key().partial_cmp(&b.spec.size_key()) == Some(std::cmp::Ordering::Less)
        };
        if better {
            best = i;
        }
    }
    Ok(CvResult {
        k,
        seed,
        cells,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grids_have_expected_sizes() {
        assert_eq!(GridSpec::default_forest().cells.len(), 84);
        assert_eq!(GridSpec::default_gbt().cells.len(), 336);
        assert_eq!(GridSpec::default_logistic().cells.len(), 8);
    }

    #[test]
    fn smaller_models_sort_first() {
        let a = ModelSpec::RandomForest(ForestParams {
            n_trees: 10,
            max_depth: None,
            ..Default::default()
        });
        let b = ModelSpec::RandomForest(ForestParams {
            n_trees: 10,
            max_depth: Some(6),
            ..Default::default()
        });
        let c = ModelSpec::RandomForest(ForestParams {
            n_trees: 40,
            max_depth: Some(1),
            ..Default::default()
        });
        assert!(b.size_key() < a.size_key());
        assert!(a.size_key() < c.size_key());
    }

    #[test]
    fn empty_grid_is_an_error() {
        let r = grid_search_cv(
            &[],
            &FeatureSpec::default(),
            &LabelingConfig::default(),
            &GridSpec { cells: vec![] },
            2,
            0,
        );
        assert!(r.is_err());
    }
}
