use std::collections::BTreeMap;

use anyhow::{bail, ensure, Context, Result};
use chrono::Datelike;
use ecotopics_core::evaluation::{
    compare_methods, hyperparameter_sweep, leaderboard_csv, Method, SweepConfig,
};
use ecotopics_core::io::{self, fmt_f64};
use ecotopics_core::model::{train_with_trace, TrainingTrace};
use ecotopics_core::preprocessing::write_counts_csv;
use ecotopics_core::regression::{predict_communities, predict_taxa, AlignedData};
use ecotopics_core::{CommunityModel, Hyperparameters, ObservationCorpus, RidgeRegressor};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::inputs::{json_arg, lambda_grid, OutDir};
use crate::{EvaluateArgs, ExportArgs, HyperArgs, IngestArgs, PredictArgs, SweepArgs, TrainArgs};

impl HyperArgs {
    fn to_hyper(&self) -> Result<Hyperparameters> {
        let h = Hyperparameters {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            g_radius: self.g_radius,
            max_communities: self.max_communities,
            n_sweeps: self.sweeps,
            seed: self.seed,
        };
        h.validate()?;
        Ok(h)
    }
}

fn ensure_same_corpus(model: &CommunityModel, corpus: &ObservationCorpus) -> Result<()> {
    ensure!(
        model.dates() == corpus.dates() && model.taxon_names() == corpus.taxon_names(),
        "model was trained on different days or taxa than --counts"
    );
    Ok(())
}

fn community_header(k: usize) -> impl Iterator<Item = String> {
    (0..k).map(|j| format!("community_{j}"))
}

fn dated_rows_csv(dates: &[chrono::NaiveDate], m: &DMatrix<f64>) -> Result<Vec<u8>> {
    let header = std::iter::once("date".to_string()).chain(community_header(m.ncols()));
    let rows = dates.iter().enumerate().map(|(t, d)| {
        std::iter::once(d.to_string())
            .chain(m.row(t).iter().map(|&x| fmt_f64(x)))
            .collect::<Vec<_>>()
    });
    Ok(io::csv_bytes(header, rows)?)
}

fn diagnostics_csv(trace: &TrainingTrace) -> Result<Vec<u8>> {
    let rows = trace
        .log_likelihood
        .iter()
        .zip(&trace.k_active)
        .enumerate()
        .map(|(i, (ll, k))| vec![(i + 1).to_string(), fmt_f64(*ll), k.to_string()]);
    Ok(io::csv_bytes(
        ["sweep", "log_likelihood", "k_active"],
        rows,
    )?)
}

pub fn ingest(args: IngestArgs) -> Result<()> {
    let data = args.data.load()?;
    let out = OutDir::create(&args.out)?;
    let path = args.out.join("counts.csv");
    write_counts_csv(&data.corpus, &path).context("writing counts.csv")?;
    println!(
        "{} days, {} taxa, {} observations",
        data.corpus.n_days(),
        data.corpus.n_taxa(),
        data.corpus.total_observations()
    );
    if let Some(env) = &data.env {
        env.write_csv(&args.out.join("features.csv"))
            .context("writing features.csv")?;
        out.write(
            "feature_encoder.json",
            serde_json::to_string_pretty(env.encoder())?.as_bytes(),
        )?;
        println!(
            "{} feature rows, {} features",
            env.n_rows(),
            env.n_features()
        );
        if !env.dropped_features().is_empty() {
            println!("dropped: {}", env.dropped_features().join(", "));
        }
    }
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<()> {
    let hyper = args.hyper.to_hyper()?;
    let grid = lambda_grid(args.lambda_grid.as_deref())?;
    let data = args.data.load()?;

    let (model, trace) = train_with_trace(&data.corpus, &hyper)?;
    let regressor = match &data.env {
        Some(env) => {
            let aligned = AlignedData::new(&data.corpus, env, grid)?;
            let reg = aligned
                .protocol
                .fit_all(&aligned.theta_rows(&model)?)?
                .with_encoder(env.encoder().clone())?;
            Some(reg)
        }
        None => None,
    };

    let out = OutDir::create(&args.out)?;
    out.write("model.json", model.to_json()?.as_bytes())?;
    out.write("training_diagnostics.csv", &diagnostics_csv(&trace)?)?;
    if let Some(reg) = &regressor {
        out.write("regressor.json", reg.to_json()?.as_bytes())?;
    }
    println!(
        "{} communities ({} above 1% of observations)",
        model.n_communities(),
        model.active_communities(ecotopics_core::model::ACTIVE_THRESHOLD)
    );
    Ok(())
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let mut config: SweepConfig = json_arg(&args.grid, "sweep grid")?;
    if let Some(n) = args.sweeps {
        config.n_sweeps = n;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if args.lambda_grid.is_some() {
        config.lambda_grid = lambda_grid(args.lambda_grid.as_deref())?;
    }
    config.validate()?;
    let (corpus, env) = args.data.load_with_env()?;

    let result = hyperparameter_sweep(&corpus, &env, &config)?;

    let out = OutDir::create(&args.out)?;
    out.write("leaderboard.csv", &leaderboard_csv(&result.leaderboard)?)?;
    out.write(
        "leaderboard.json",
        serde_json::to_string_pretty(&result.leaderboard)?.as_bytes(),
    )?;
    out.write("best_model.json", result.best.to_json()?.as_bytes())?;
    for fold in result.best_folds {
        let reg = fold.regressor.with_encoder(env.encoder().clone())?;
        out.write(
            &format!("regressors/fold_{}.json", fold.year),
            reg.to_json()?.as_bytes(),
        )?;
    }
    let best = &result.leaderboard[0];
    println!(
        "best of {}: alpha {} beta {} gamma {} g {} -> mean KL {}",
        result.leaderboard.len(),
        best.hyper.alpha,
        best.hyper.beta,
        best.hyper.gamma,
        best.hyper.g_radius,
        best.mean_kl.map_or("n/a".into(), fmt_f64)
    );
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let grid = lambda_grid(args.lambda_grid.as_deref())?;
    let model = CommunityModel::load(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let (corpus, env) = args.data.load_with_env()?;
    ensure_same_corpus(&model, &corpus)?;

    let cmp = compare_methods(&corpus, &env, &model, grid)?;
    let dates = &cmp.data.alignment.dates;

    // Observed and predicted series per taxon, long form.
    let taxa = corpus.taxon_names();
    let mut series = Vec::new();
    for (t, d) in dates.iter().enumerate() {
        for (v, name) in taxa.iter().enumerate() {
            let mut row = vec![
                d.to_string(),
                name.clone(),
                fmt_f64(cmp.data.observed[(t, v)]),
            ];
            row.extend(
                Method::ALL
                    .iter()
                    .map(|&m| fmt_f64(cmp.output(m).predictions[(t, v)])),
            );
            series.push(row);
        }
    }
    let series_csv = io::csv_bytes(
        ["date", "taxon", "observed", "community", "direct", "pca"],
        series,
    )?;

    // Learned and predicted community mixtures, long form.
    let theta = cmp.data.theta_rows(&model)?;
    let k = theta.ncols();
    let mut mixtures = Vec::new();
    for (t, d) in dates.iter().enumerate() {
        let predicted: Vec<f64> = ecotopics_core::regression::project_to_simplex(
            &cmp.output(Method::Community)
                .target_predictions
                .row(t)
                .iter()
                .copied()
                .collect::<Vec<_>>(),
        );
        for (source, values) in [
            ("model", theta.row(t).iter().copied().collect::<Vec<_>>()),
            ("predicted", predicted),
        ] {
            let mut row = vec![d.to_string(), source.to_string()];
            row.extend(values.iter().map(|&x| fmt_f64(x)));
            mixtures.push(row);
        }
    }
    let header = ["date".to_string(), "source".to_string()]
        .into_iter()
        .chain(community_header(k));
    let mixtures_csv = io::csv_bytes(header, mixtures)?;

    let out = OutDir::create(&args.out)?;
    out.write("kl_per_day.csv", &cmp.per_day_csv()?)?;
    out.write("kl_per_year.csv", &cmp.per_year_csv()?)?;
    out.write("evaluation_summary.json", cmp.summary_json()?.as_bytes())?;
    out.write("taxa_timeseries.csv", &series_csv)?;
    out.write("community_timeseries.csv", &mixtures_csv)?;
    for m in Method::ALL {
        println!("{:<10} mean KL {:.6}", m.name(), cmp.report(m).overall_mean);
    }
    Ok(())
}

#[derive(Serialize)]
struct Prediction<'a> {
    date: chrono::NaiveDate,
    communities: Vec<f64>,
    taxa: &'a [String],
    taxon_distribution: Vec<f64>,
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let model = CommunityModel::load(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let reg = RidgeRegressor::load(&args.regressor)
        .with_context(|| format!("loading regressor {}", args.regressor.display()))?;
    let readings: BTreeMap<String, f64> = json_arg(&args.readings, "readings")?;
    let Some(encoder) = reg.encoder() else {
        bail!("regressor has no feature encoder; train it with --env");
    };
    let x = encoder.encode(args.date, &readings)?;
    let prediction = Prediction {
        date: args.date,
        communities: predict_communities(&reg, &x)?,
        taxa: model.taxon_names(),
        taxon_distribution: predict_taxa(&reg, &model, &x)?,
    };
    let json = serde_json::to_string_pretty(&prediction)?;
    if let Some(dir) = &args.out {
        OutDir::create(dir)?.write("prediction.json", json.as_bytes())?;
    }
    println!("{json}");
    Ok(())
}

/// Mean community mixture for each day of the year.
fn seasonal_profile(model: &CommunityModel) -> Result<Vec<u8>> {
    let k = model.n_communities();
    let mut sums: BTreeMap<u32, (usize, Vec<f64>)> = BTreeMap::new();
    for (t, d) in model.dates().iter().enumerate() {
        let e = sums.entry(d.ordinal()).or_insert_with(|| (0, vec![0.0; k]));
        e.0 += 1;
        e.1.iter_mut()
            .zip(model.theta().row(t).iter())
            .for_each(|(a, b)| *a += b);
    }
    let header = ["day_of_year".to_string(), "n_days".to_string()]
        .into_iter()
        .chain(community_header(k));
    let rows = sums.into_iter().map(|(doy, (n, s))| {
        [doy.to_string(), n.to_string()]
            .into_iter()
            .chain(s.into_iter().map(|x| fmt_f64(x / n as f64)))
            .collect::<Vec<_>>()
    });
    Ok(io::csv_bytes(header, rows)?)
}

pub fn export(args: ExportArgs) -> Result<()> {
    let model = CommunityModel::load(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let reg = match &args.regressor {
        Some(p) => Some(
            RidgeRegressor::load(p)
                .with_context(|| format!("loading regressor {}", p.display()))?,
        ),
        None => None,
    };

    let phi_header =
        std::iter::once("community".to_string()).chain(model.taxon_names().iter().cloned());
    let phi_rows = (0..model.n_communities()).map(|k| {
        std::iter::once(format!("community_{k}"))
            .chain(model.phi().row(k).iter().map(|&x| fmt_f64(x)))
            .collect::<Vec<_>>()
    });

    let out = OutDir::create(&args.out)?;
    out.write("theta.csv", &dated_rows_csv(model.dates(), model.theta())?)?;
    out.write("phi.csv", &io::csv_bytes(phi_header, phi_rows)?)?;
    out.write("seasonal_theta.csv", &seasonal_profile(&model)?)?;
    if let Some(reg) = &reg {
        out.write("regression_weights.csv", &reg.weights_csv("community_")?)?;
    }
    Ok(())
}
