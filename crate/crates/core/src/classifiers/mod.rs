//! Logistic regression, RBF SVM and random forest behind one fit/predict
//! surface. Inputs may be any [`Scalar`]; fitting runs in `f64`.

mod forest;
mod logistic;
mod svm;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use forest::{gini, ForestParams, MaxFeatures, Node, RandomForest, Tree};
pub use logistic::{loss_and_gradient, n_params, LogisticModel, LogisticParams, LogisticTrace};
pub use svm::{
    default_gamma, dual_objective, kernel_matrix, rbf_kernel, solve_dual, BinarySvm, DualSolution, SvmModel, SvmParams,
};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lr,
    Svm,
    Rf,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Svm => "svm",
            ModelKind::Rf => "rf",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" | "logistic" => Ok(ModelKind::Lr),
            "svm" => Ok(ModelKind::Svm),
            "rf" | "forest" => Ok(ModelKind::Rf),
            _ => Err(Error::invalid(format!("unknown model `{s}`"))),
        }
    }
}

/// A model kind together with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Lr(LogisticParams),
    Svm(SvmParams),
    Rf(ForestParams),
}

impl ModelSpec {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Lr => ModelSpec::Lr(LogisticParams::default()),
            ModelKind::Svm => ModelSpec::Svm(SvmParams::default()),
            ModelKind::Rf => ModelSpec::Rf(ForestParams::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Lr(_) => ModelKind::Lr,
            ModelSpec::Svm(_) => ModelKind::Svm,
            ModelSpec::Rf(_) => ModelKind::Rf,
        }
    }

    /// Fits a fresh model. `seed` only matters for stochastic learners.
    pub fn fit<T: Scalar>(&self, x: ArrayView2<'_, T>, y: &[usize], n_classes: usize, seed: u64) -> Result<Model> {
        Ok(match self {
            ModelSpec::Lr(p) => Model::Lr(LogisticModel::fit(x, y, n_classes, p)?),
            ModelSpec::Svm(p) => Model::Svm(SvmModel::fit(x, y, n_classes, p)?),
            ModelSpec::Rf(p) => Model::Rf(RandomForest::fit(x, y, n_classes, p, seed)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Lr(LogisticModel),
    Svm(SvmModel),
    Rf(RandomForest),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Lr(_) => ModelKind::Lr,
            Model::Svm(_) => ModelKind::Svm,
            Model::Rf(_) => ModelKind::Rf,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Model::Lr(m) => m.n_classes,
            Model::Svm(m) => m.n_classes,
            Model::Rf(m) => m.n_classes,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Lr(m) => m.n_features,
            Model::Svm(m) => m.n_features,
            Model::Rf(m) => m.n_features,
        }
    }

    pub fn predict<T: Scalar>(&self, x: ArrayView2<'_, T>) -> Result<Vec<usize>> {
        match self {
            Model::Lr(m) => m.predict(x),
            Model::Svm(m) => m.predict(x),
            Model::Rf(m) => m.predict(x),
        }
    }

    pub fn predict_proba<T: Scalar>(&self, x: ArrayView2<'_, T>) -> Result<Array2<f64>> {
        match self {
            Model::Lr(m) => m.predict_proba(x),
            Model::Svm(_) => Err(Error::Unsupported("SVM does not produce probabilities".into())),
            Model::Rf(m) => m.predict_proba(x),
        }
    }

    /// Impurity importances by column position.
    pub fn importances(&self) -> Result<&[f64]> {
        match self {
            Model::Rf(m) => Ok(&m.importances),
            other => Err(Error::Unsupported(format!(
                "{} has no feature importances",
                other.kind()
            ))),
        }
    }

    /// Impurity importances keyed by column name.
    pub fn feature_importances(&self, names: &[String]) -> Result<BTreeMap<String, f64>> {
        let imp = self.importances()?;
        if names.len() != imp.len() {
            return Err(Error::invalid(format!(
                "{} names for {} features",
                names.len(),
                imp.len()
            )));
        }
        Ok(names.iter().cloned().zip(imp.iter().copied()).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema_version: u32,
            model: &'a Model,
        }
        Ok(serde_json::to_string(&Doc {
            schema_version: MODEL_SCHEMA_VERSION,
            model: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            schema_version: u32,
            model: Model,
        }
        let doc: Doc = serde_json::from_str(text)?;
        if doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "model schema version {} (expected {MODEL_SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        Ok(doc.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

pub(crate) fn to_f64<T: Scalar>(x: ArrayView2<'_, T>) -> Array2<f64> {
    x.mapv(|v| v.as_f64())
}

pub(crate) fn check_fit_input<T: Scalar>(x: ArrayView2<'_, T>, y: &[usize], n_classes: usize) -> Result<()> {
    let (n, d) = x.dim();
    if n != y.len() {
        return Err(Error::invalid(format!("{n} rows but {} labels", y.len())));
    }
    if n < 2 || d == 0 {
        return Err(Error::invalid(format!(
            "need at least 2 rows and 1 feature, got {n}x{d}"
        )));
    }
    if n_classes < 2 {
        return Err(Error::invalid("need at least 2 classes"));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::invalid(format!("label {bad} outside 0..{n_classes}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite feature value"));
    }
    Ok(())
}

pub(crate) fn check_predict_input<T: Scalar>(x: ArrayView2<'_, T>, n_features: usize) -> Result<()> {
    if x.ncols() != n_features {
        return Err(Error::invalid(format!(
            "model expects {n_features} features, got {}",
            x.ncols()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite feature value"));
    }
    Ok(())
}

pub(crate) fn classes_present(y: &[usize], n_classes: usize) -> usize {
    let mut seen = vec![false; n_classes];
    y.iter().for_each(|&c| seen[c] = true);
    seen.iter().filter(|&&s| s).count()
}

/// Row-wise argmax, ties to the smaller index.
pub(crate) fn argmax_rows(a: &Array2<f64>) -> Vec<usize> {
    a.rows()
        .into_iter()
        .map(|r| {
            let mut best = 0;
            for (c, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}
