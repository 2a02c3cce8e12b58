//! Leave-one-year-out regression protocol shared by the community pipeline
//! and both baselines. Each pipeline only supplies per-fold regression
//! targets and a decoder from predicted targets back to taxon distributions;
//! features, folds, row filtering and lambda selection are common.

use nalgebra::DMatrix;

use super::folds::{align, year_folds, Alignment, FoldPlan};
use super::ridge::{loocv_select_lambda, ridge_fit, RidgeRegressor};
use crate::corpus::ObservationCorpus;
use crate::error::{Error, Result};
use crate::model::CommunityModel;
use crate::preprocessing::EnvironmentTable;

/// Clips negative entries to zero and renormalizes. Falls back to the uniform
/// distribution when nothing positive is left.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
    let total: f64 = clipped.iter().sum();
    if total > 0.0 && total.is_finite() {
        clipped.iter().map(|x| x / total).collect()
    } else {
        vec![1.0 / v.len() as f64; v.len()]
    }
}

/// `p · phi` for a community mixture `p`.
pub fn mix_communities(p: &[f64], phi: &DMatrix<f64>) -> Result<Vec<f64>> {
    if p.len() != phi.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} community weights for {} communities",
            p.len(),
            phi.nrows()
        )));
    }
    Ok((0..phi.ncols())
        .map(|v| p.iter().enumerate().map(|(k, pk)| pk * phi[(k, v)]).sum())
        .collect())
}

/// Community mixture predicted from standardized features.
pub fn predict_communities(reg: &RidgeRegressor, x: &[f64]) -> Result<Vec<f64>> {
    Ok(project_to_simplex(&reg.predict(x)?))
}

/// Taxon distribution predicted from standardized features through the
/// community model.
pub fn predict_taxa(reg: &RidgeRegressor, model: &CommunityModel, x: &[f64]) -> Result<Vec<f64>> {
    if reg.n_outputs() != model.n_communities() {
        return Err(Error::DimensionMismatch(format!(
            "regressor predicts {} communities, model has {}",
            reg.n_outputs(),
            model.n_communities()
        )));
    }
    mix_communities(&predict_communities(reg, x)?, model.phi())
}

/// Maps one raw regression output row to a taxon distribution.
pub type Decoder<'a> = Box<dyn Fn(&[f64]) -> Result<Vec<f64>> + 'a>;

/// Regression targets for one fold and the matching decoder.
pub struct PreparedFold<'a> {
    pub targets: DMatrix<f64>,
    pub decode: Decoder<'a>,
}

/// A target space the protocol can regress into.
pub trait FoldTargets {
    /// Builds targets for the given training rows (row indices into the
    /// protocol's aligned data).
    fn prepare(&self, train_rows: &[usize]) -> Result<PreparedFold<'_>>;
}

pub struct FoldOutcome {
    pub year: i32,
    pub lambda: f64,
    pub n_train: usize,
    pub regressor: RidgeRegressor,
}

pub struct ProtocolOutput {
    /// `N × V` held-out taxon distribution predictions.
    pub predictions: DMatrix<f64>,
    /// `N × K` raw regression outputs, before decoding.
    pub target_predictions: DMatrix<f64>,
    pub folds: Vec<FoldOutcome>,
}

/// Features, folds and lambda grid shared by every pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    x: DMatrix<f64>,
    trainable: Vec<bool>,
    plan: FoldPlan,
    lambda_grid: Vec<f64>,
    feature_names: Vec<String>,
}

impl Protocol {
    pub fn new(
        x: DMatrix<f64>,
        trainable: Vec<bool>,
        plan: FoldPlan,
        lambda_grid: Vec<f64>,
    ) -> Result<Self> {
        let n = x.nrows();
        if trainable.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} trainable flags for {n} rows",
                trainable.len()
            )));
        }
        if lambda_grid.is_empty() || lambda_grid.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::InvalidInput(
                "lambda grid must be non-empty and non-negative".into(),
            ));
        }
        let mut covered = vec![0u32; n];
        for fold in &plan.folds {
            for &i in fold.test.iter().chain(&fold.train) {
                if i >= n {
                    return Err(Error::DimensionMismatch(format!(
                        "fold {} references row {i} of {n}",
                        fold.year
                    )));
                }
            }
            fold.test.iter().for_each(|&i| covered[i] += 1);
        }
        if covered.iter().any(|&c| c != 1) {
            return Err(Error::InvalidInput(
                "fold test sets must cover every row exactly once".into(),
            ));
        }
        let feature_names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        Ok(Self {
            x,
            trainable,
            plan,
            lambda_grid,
            feature_names,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} features",
                names.len(),
                self.x.ncols()
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn plan(&self) -> &FoldPlan {
        &self.plan
    }

    pub fn lambda_grid(&self) -> &[f64] {
        &self.lambda_grid
    }

    pub fn trainable(&self) -> &[bool] {
        &self.trainable
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    /// Fits one regressor on every trainable row, choosing lambda by
    /// leave-one-out over the grid.
    pub fn fit_all(&self, y: &DMatrix<f64>) -> Result<RidgeRegressor> {
        if y.nrows() != self.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} target rows for {} protocol rows",
                y.nrows(),
                self.n_rows()
            )));
        }
        let rows: Vec<usize> = (0..self.n_rows()).filter(|&i| self.trainable[i]).collect();
        if rows.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "only {} usable training rows",
                rows.len()
            )));
        }
        let x = self.x.select_rows(&rows);
        let y = y.select_rows(&rows);
        let lambda = loocv_select_lambda(&x, &y, &self.lambda_grid)?;
        ridge_fit(&x, &y, lambda)?.with_feature_names(self.feature_names.clone())
    }

    /// For each fold: picks lambda by leave-one-out on the fold's trainable
    /// rows, fits, and predicts the held-out year.
    pub fn run(&self, targets: &dyn FoldTargets) -> Result<ProtocolOutput> {
        let n = self.n_rows();
        let mut predictions: Option<DMatrix<f64>> = None;
        let mut raw_out: Option<DMatrix<f64>> = None;
        let mut folds = Vec::with_capacity(self.plan.len());
        for fold in &self.plan.folds {
            let train: Vec<usize> = fold
                .train
                .iter()
                .copied()
                .filter(|&i| self.trainable[i])
                .collect();
            if train.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "fold {} has only {} usable training rows",
                    fold.year,
                    train.len()
                )));
            }
            let prepared = targets.prepare(&train)?;
            let x_train = self.x.select_rows(&train);
            let lambda = loocv_select_lambda(&x_train, &prepared.targets, &self.lambda_grid)?;
            let reg = ridge_fit(&x_train, &prepared.targets, lambda)?
                .with_feature_names(self.feature_names.clone())?;
            for &i in &fold.test {
                let xi: Vec<f64> = self.x.row(i).iter().copied().collect();
                let raw = reg.predict(&xi)?;
                let decoded = (prepared.decode)(&raw)?;
                let p = predictions.get_or_insert_with(|| DMatrix::zeros(n, decoded.len()));
                let r = raw_out.get_or_insert_with(|| DMatrix::zeros(n, raw.len()));
                if decoded.len() != p.ncols() || raw.len() != r.ncols() {
                    return Err(Error::DimensionMismatch(
                        "pipeline output width changed between folds".into(),
                    ));
                }
                p.row_mut(i)
                    .iter_mut()
                    .zip(&decoded)
                    .for_each(|(d, s)| *d = *s);
                r.row_mut(i).iter_mut().zip(&raw).for_each(|(d, s)| *d = *s);
            }
            log::debug!(
                "fold {}: lambda {lambda}, {} training rows",
                fold.year,
                train.len()
            );
            folds.push(FoldOutcome {
                year: fold.year,
                lambda,
                n_train: train.len(),
                regressor: reg,
            });
        }
        match (predictions, raw_out) {
            (Some(predictions), Some(target_predictions)) => Ok(ProtocolOutput {
                predictions,
                target_predictions,
                folds,
            }),
            _ => Err(Error::InvalidInput("fold plan has no test rows".into())),
        }
    }
}

/// Fixed targets with a simplex projection, optionally followed by mixing
/// through `phi`.
struct FixedTargets<'a> {
    y: &'a DMatrix<f64>,
    phi: Option<&'a DMatrix<f64>>,
}

impl FoldTargets for FixedTargets<'_> {
    fn prepare(&self, train_rows: &[usize]) -> Result<PreparedFold<'_>> {
        let phi = self.phi;
        Ok(PreparedFold {
            targets: self.y.select_rows(train_rows),
            decode: Box::new(move |raw| {
                let p = project_to_simplex(raw);
                match phi {
                    Some(phi) => mix_communities(&p, phi),
                    None => Ok(p),
                }
            }),
        })
    }
}

/// Community pipeline: regress the learned day mixtures, project onto the
/// simplex, and mix through `phi`.
pub fn run_fold_protocol(
    protocol: &Protocol,
    theta: &DMatrix<f64>,
    phi: &DMatrix<f64>,
) -> Result<ProtocolOutput> {
    if theta.nrows() != protocol.n_rows() || theta.ncols() != phi.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "theta is {}x{}, protocol has {} rows and phi {} communities",
            theta.nrows(),
            theta.ncols(),
            protocol.n_rows(),
            phi.nrows()
        )));
    }
    protocol.run(&FixedTargets {
        y: theta,
        phi: Some(phi),
    })
}

/// Direct pipeline: regress the observed taxon distributions themselves.
pub(crate) fn run_direct(protocol: &Protocol, y: &DMatrix<f64>) -> Result<ProtocolOutput> {
    if y.nrows() != protocol.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} target rows for {} protocol rows",
            y.nrows(),
            protocol.n_rows()
        )));
    }
    protocol.run(&FixedTargets { y, phi: None })
}

/// Count corpus and environment table restricted to their common days.
#[derive(Debug, Clone)]
pub struct AlignedData {
    pub alignment: Alignment,
    /// `N × V` observed taxon distributions of the aligned days.
    pub observed: DMatrix<f64>,
    pub protocol: Protocol,
}

impl AlignedData {
    pub fn new(
        corpus: &ObservationCorpus,
        env: &EnvironmentTable,
        lambda_grid: Vec<f64>,
    ) -> Result<Self> {
        let alignment = align(corpus.dates(), env.dates())?;
        let observed = corpus.distributions().select_rows(&alignment.left);
        let x = env.select_rows(&alignment.right);
        let all_trainable = env.trainable_rows();
        let trainable = alignment.right.iter().map(|&r| all_trainable[r]).collect();
        let plan = year_folds(&alignment.dates)?;
        let protocol = Protocol::new(x, trainable, plan, lambda_grid)?
            .with_feature_names(env.feature_names())?;
        Ok(Self {
            alignment,
            observed,
            protocol,
        })
    }

    /// Model day mixtures for the aligned days. The model must have been
    /// trained on the same corpus.
    pub fn theta_rows(&self, model: &CommunityModel) -> Result<DMatrix<f64>> {
        if model.dates().len() <= self.alignment.left.iter().copied().max().unwrap_or(0)
            || self
                .alignment
                .left
                .iter()
                .zip(&self.alignment.dates)
                .any(|(&i, d)| model.dates()[i] != *d)
        {
            return Err(Error::DimensionMismatch(
                "model dates do not match the aligned corpus".into(),
            ));
        }
        Ok(model.theta().select_rows(&self.alignment.left))
    }
}
