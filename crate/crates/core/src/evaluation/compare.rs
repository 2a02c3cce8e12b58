use serde::Serialize;

use super::report::{score_predictions, EvaluationReport};
use crate::baselines::{direct_regression_pipeline, pca_regression_pipeline};
use crate::corpus::ObservationCorpus;
use crate::error::Result;
use crate::io;
use crate::model::{CommunityModel, ACTIVE_THRESHOLD};
use crate::preprocessing::EnvironmentTable;
use crate::regression::{run_fold_protocol, AlignedData, ProtocolOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Community,
    Direct,
    Pca,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Community, Method::Direct, Method::Pca];

    pub fn name(self) -> &'static str {
        match self {
            Method::Community => "community",
            Method::Direct => "direct",
            Method::Pca => "pca",
        }
    }
}

/// Held-out predictions and scores of all three pipelines on the same days,
/// features, folds and lambda grid.
pub struct MethodComparison {
    pub data: AlignedData,
    pub pca_components: usize,
    pub outputs: [ProtocolOutput; 3],
    pub reports: [EvaluationReport; 3],
}

/// Number of principal components matched to a community model.
pub fn pca_components_for(model: &CommunityModel) -> usize {
    model
        .active_communities(ACTIVE_THRESHOLD)
        .clamp(1, model.taxon_names().len())
}

/// Community pipeline on aligned data.
pub fn community_pipeline(data: &AlignedData, model: &CommunityModel) -> Result<ProtocolOutput> {
    run_fold_protocol(&data.protocol, &data.theta_rows(model)?, model.phi())
}

pub fn compare_methods(
    corpus: &ObservationCorpus,
    env: &EnvironmentTable,
    model: &CommunityModel,
    lambda_grid: Vec<f64>,
) -> Result<MethodComparison> {
    let data = AlignedData::new(corpus, env, lambda_grid)?;
    let pca_components = pca_components_for(model);
    let community = community_pipeline(&data, model)?;
    let direct = direct_regression_pipeline(&data.protocol, &data.observed)?;
    let pca = pca_regression_pipeline(&data.protocol, &data.observed, pca_components)?;
    let score = |o: &ProtocolOutput| {
        score_predictions(&data.alignment.dates, &o.predictions, &data.observed)
    };
    let reports = [score(&community)?, score(&direct)?, score(&pca)?];
    Ok(MethodComparison {
        data,
        pca_components,
        outputs: [community, direct, pca],
        reports,
    })
}

impl MethodComparison {
    pub fn report(&self, method: Method) -> &EvaluationReport {
        &self.reports[method as usize]
    }

    pub fn output(&self, method: Method) -> &ProtocolOutput {
        &self.outputs[method as usize]
    }

    /// `date,community,direct,pca`
    pub fn per_day_csv(&self) -> Result<Vec<u8>> {
        let header = ["date", "community", "direct", "pca"];
        let rows = (0..self.data.alignment.len()).map(|t| {
            let mut r = vec![self.data.alignment.dates[t].to_string()];
            r.extend(
                self.reports
                    .iter()
                    .map(|rep| io::fmt_f64(rep.per_day[t].kl)),
            );
            r
        });
        io::csv_bytes(header, rows)
    }

    /// One box-plot row per method and year.
    pub fn per_year_csv(&self) -> Result<Vec<u8>> {
        let header = [
            "method",
            "year",
            "median",
            "q1",
            "q3",
            "whisker_lo",
            "whisker_hi",
            "n_days",
        ];
        let mut rows = Vec::new();
        for m in Method::ALL {
            for (year, b) in &self.report(m).per_year {
                rows.push(vec![
                    m.name().to_string(),
                    year.to_string(),
                    io::fmt_f64(b.median),
                    io::fmt_f64(b.q1),
                    io::fmt_f64(b.q3),
                    io::fmt_f64(b.whisker_lo),
                    io::fmt_f64(b.whisker_hi),
                    b.n_days.to_string(),
                ]);
            }
        }
        io::csv_bytes(header, rows)
    }

    /// `method → overall mean KL`, as JSON.
    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            method: Method,
            overall_mean: f64,
            median: f64,
            per_year: &'a std::collections::BTreeMap<i32, super::report::BoxStats>,
        }
        let s: Vec<Summary> = Method::ALL
            .iter()
            .map(|&m| Summary {
                method: m,
                overall_mean: self.report(m).overall_mean,
                median: self.report(m).median(),
                per_year: &self.report(m).per_year,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&s)?)
    }
}
