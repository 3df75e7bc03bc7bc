//! The `run` subcommand: load, preprocess, train, diagnose, benchmark.

use std::time::Instant;

use latreg::benchmarks::{
    benchmarks_csv, pca_baseline, plain_ae_baseline, proposed_result, stepwise, BenchmarkResult,
    StepwiseConfig,
};
use latreg::dataio::{generate_synthetic, load_csv, preprocess, Dataset, RawTable};
use latreg::diagnostics::{
    assignments_csv, deviation_plot_csv, deviations, deviations_csv, fit_global, form_subgroups,
    interaction_check, latent_names_csv, name_latent_dims, project_test, rank_stability_for_study,
    rmse_contrast, zscore_profile, DeviationRecord, DimAlignment, GlobalLatentModel,
    LatentDimensionName, SubgroupReport, TestProjection,
};
use latreg::numstat::{hierarchical_cluster, ClusterAssignment};
use latreg::training::{seed_study, SeedStudy, TrainedModel};
use ndarray::{concatenate, Array2, Axis};
use serde::Serialize;

use crate::config::{DataSource, RunConfig};
use crate::manifest::{
    OutputDir, Representative, RunManifest, RunStatus, StageFailure, StageTiming,
};
use crate::CliError;

type StageResult<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

struct Runner<'a> {
    cfg: &'a RunConfig,
    out: OutputDir,
    timings: Vec<StageTiming>,
    representative: Option<Representative>,
}

impl Runner<'_> {
    fn stage<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&RunConfig, &mut OutputDir) -> StageResult<T>,
    ) -> Result<T, CliError> {
        let start = Instant::now();
        let result = f(self.cfg, &mut self.out);
        self.timings.push(StageTiming {
            stage: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        result.map_err(|e| {
            let err = CliError::runtime(name, &e);
            let failure = StageFailure {
                stage: name.to_string(),
                message: e.to_string(),
            };
            if let Err(io) = self.out.write_manifest(&self.manifest(RunStatus::Failed, Some(failure))) {
                eprintln!("could not write partial manifest: {io}");
            }
            err
        })
    }

    fn manifest(&self, status: RunStatus, failure: Option<StageFailure>) -> RunManifest {
        RunManifest {
            software: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            status,
            failure,
            config: self.cfg.clone(),
            representative: self.representative.clone(),
            timings: self.timings.clone(),
            files: self.out.entries(),
        }
    }
}

/// Runs the full pipeline into `cfg.output_dir` and returns the manifest
/// that was written there.
pub fn cmd_run(cfg: &RunConfig, overwrite: bool) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    let out = OutputDir::create(&cfg.output_dir, overwrite)?;
    let mut r = Runner {
        cfg,
        out,
        timings: Vec::new(),
        representative: None,
    };
    let (table, labels) = r.stage("load", load)?;
    let (train, test) = r.stage("preprocess", |c, o| run_preprocess(c, o, &table, labels.as_deref()))?;
    let test = (test.n() > 0).then_some(test);
    let study = r.stage("train", |c, o| run_training(c, o, &train, test.as_ref()))?;
    let rep = study.representative.expect("checked in training stage");
    r.representative = Some(Representative {
        run_index: rep,
        seed: study.runs[rep].seed,
    });
    let model = study.representative_model().expect("representative run succeeded");
    r.stage("diagnostics", |c, o| run_diagnostics(c, o, model, &train, test.as_ref()))?;
    r.stage("stability", |c, o| run_stability(c, o, &study, &train))?;
    if cfg.benchmarks.enabled {
        r.stage("benchmarks", |c, o| run_benchmarks(c, o, &study, &train, test.as_ref()))?;
    }
    let manifest = r.manifest(RunStatus::Complete, None);
    r.out
        .write_manifest(&manifest)
        .map_err(|e| CliError::runtime("manifest", e))?;
    Ok(manifest)
}

fn load(cfg: &RunConfig, out: &mut OutputDir) -> StageResult<(RawTable, Option<Vec<usize>>)> {
    match &cfg.data {
        DataSource::Csv { path, outcome } => Ok((load_csv(path, outcome)?, None)),
        DataSource::Synthetic(s) => {
            let cohort = generate_synthetic(s)?;
            std::fs::create_dir_all(out.root().join("data"))?;
            cohort.table.write_csv(out.root().join("data/cohort.csv"))?;
            out.register("data/cohort.csv")?;
            out.write_json("data/cohort.truth.json", &cohort.manifest(s))?;
            Ok((cohort.table, Some(cohort.truth_labels)))
        }
    }
}

fn run_preprocess(
    cfg: &RunConfig,
    out: &mut OutputDir,
    table: &RawTable,
    labels: Option<&[usize]>,
) -> StageResult<(Dataset, Dataset)> {
    let (train, test, report) = preprocess(table, &cfg.preprocess, labels)?;
    out.write_json("preprocess_report.json", &report)?;
    let mut split = String::from("row_id,set,truth_label\n");
    for (set, ds) in [("train", &train), ("test", &test)] {
        for (i, row) in ds.row_ids.iter().enumerate() {
            let label = ds.truth_labels.as_ref().map(|l| l[i].to_string()).unwrap_or_default();
            split.push_str(&format!("{row},{set},{label}\n"));
        }
    }
    out.write("split.csv", split)?;
    Ok((train, test))
}

fn run_training(
    cfg: &RunConfig,
    out: &mut OutputDir,
    train: &Dataset,
    test: Option<&Dataset>,
) -> StageResult<SeedStudy> {
    let study = seed_study(train, test, &cfg.train, &cfg.seeds, cfg.parallelism)?;
    for (i, run) in study.runs.iter().enumerate() {
        if let Some(m) = study.model(i) {
            out.write(&format!("models/seed_{}.json", run.seed), m.to_json()? + "\n")?;
            out.write(&format!("models/seed_{}_loss.csv", run.seed), m.loss_history_csv())?;
        }
    }
    out.write("seed_metrics.csv", study.metrics_csv())?;
    if study.representative.is_none() {
        return Err("every training run failed; see seed_metrics.csv".into());
    }
    Ok(study)
}

/// One subgroup as written to `subgroups.json`.
#[derive(Debug, Serialize)]
struct SubgroupOutput<'a> {
    id: usize,
    size: usize,
    dim_label: String,
    #[serde(flatten)]
    report: &'a SubgroupReport,
    member_row_ids: Vec<usize>,
    test_member_row_ids: Vec<usize>,
    interaction_tests_combined: Vec<latreg::diagnostics::InteractionTest>,
    notes: Vec<String>,
}

fn latent_csv(ds: &Dataset, z: &Array2<f64>, tags: &[String]) -> String {
    let d = z.ncols();
    let mut out = String::from("patient,row_id,outcome");
    for k in 1..=d {
        out.push_str(&format!(",latent_{k}"));
    }
    out.push_str(",truth_label,subgroups\n");
    for i in 0..ds.n() {
        out.push_str(&format!("{i},{},{}", ds.row_ids[i], ds.y[i]));
        for k in 0..d {
            out.push_str(&format!(",{}", z[[i, k]]));
        }
        let label = ds.truth_labels.as_ref().map(|l| l[i].to_string()).unwrap_or_default();
        out.push_str(&format!(",{label},{}\n", tags[i]));
    }
    out
}

fn local_fits_csv(model: &TrainedModel, train: &Dataset) -> String {
    let b = &model.final_bundle;
    let d = b.d();
    let mut out = String::from("patient,row_id,intercept");
    for k in 1..=d {
        out.push_str(&format!(",slope_{k}"));
    }
    out.push_str(",bandwidth,degenerate,weight_sum,rss_full,rss_null,llr\n");
    for i in 0..b.n() {
        out.push_str(&format!("{i},{}", train.row_ids[i]));
        for c in b.coefficients.row(i) {
            out.push_str(&format!(",{c}"));
        }
        out.push_str(&format!(
            ",{},{},{},{},{},{}\n",
            b.bandwidths.values[i],
            b.bandwidths.degenerate.contains(&i),
            b.weight_sums[i],
            b.rss_full[i],
            b.rss_null[i],
            b.llr[i]
        ));
    }
    out
}

fn clusters_csv(names: &[String], clusters: &ClusterAssignment) -> String {
    let mut out = String::from("variable,cluster\n");
    for (name, c) in names.iter().zip(&clusters.labels) {
        out.push_str(&format!("{name},{c}\n"));
    }
    out
}

fn profiles_csv(subgroups: &[SubgroupReport], names: &[String]) -> String {
    let mut out = String::from("subgroup,dim,direction,level,name,mean_z\n");
    for (g, sg) in subgroups.iter().enumerate() {
        let Some(p) = &sg.zscore_profile else { continue };
        let dir = sg.direction.symbol();
        for (j, v) in p.per_predictor.iter().enumerate() {
            out.push_str(&format!("{g},{},{dir},predictor,{},{v}\n", sg.dim, names[j]));
        }
        for (c, v) in p.per_cluster.iter().enumerate() {
            out.push_str(&format!("{g},{},{dir},cluster,{c},{v}\n", sg.dim));
        }
    }
    out
}

fn membership_tags(n: usize, groups: impl Iterator<Item = (usize, Vec<usize>)>) -> Vec<String> {
    let mut tags: Vec<Vec<String>> = vec![Vec::new(); n];
    for (g, members) in groups {
        for m in members {
            tags[m].push(g.to_string());
        }
    }
    tags.into_iter().map(|t| t.join(";")).collect()
}

/// Interaction tests one predictor at a time so a singular design only
/// costs that predictor.
fn interactions(
    x: &Array2<f64>,
    y: &ndarray::Array1<f64>,
    names: &[String],
    members: &[usize],
    predictors: &[usize],
    label: &str,
    notes: &mut Vec<String>,
) -> Vec<latreg::diagnostics::InteractionTest> {
    let mut tests = Vec::new();
    for &j in predictors {
        match interaction_check(x.view(), y.view(), names, members, &[j]) {
            Ok(mut t) => tests.append(&mut t),
            Err(e) => notes.push(format!("{label} interaction for {}: {e}", names[j])),
        }
    }
    tests
}

fn run_diagnostics(
    cfg: &RunConfig,
    out: &mut OutputDir,
    model: &TrainedModel,
    train: &Dataset,
    test: Option<&Dataset>,
) -> StageResult<()> {
    let dg = &cfg.diagnostics;
    let bundle = &model.final_bundle;
    let z = &bundle.z;
    let global: GlobalLatentModel = fit_global(z.view(), train.y.view(), dg.ci_level)?;
    let records: Vec<DeviationRecord> = deviations(bundle, &global)?;
    let mut subgroups = form_subgroups(&records, dg.min_size);
    let clusters = hierarchical_cluster(train.x.view(), dg.n_clusters.min(train.p()))?;
    let latent_names: Vec<LatentDimensionName> =
        name_latent_dims(z.view(), train.x.view(), &train.names, dg.top_k)?;

    let projection: Option<TestProjection> = match test {
        Some(t) => Some(project_test(model, train, t, &global, &subgroups, cfg.parallelism)?),
        None => None,
    };
    let combined = test.map(|t| {
        (
            concatenate(Axis(0), &[train.x.view(), t.x.view()]).expect("same predictors"),
            concatenate(Axis(0), &[train.y.view(), t.y.view()]).expect("1-d"),
        )
    });

    let mut extra = Vec::with_capacity(subgroups.len());
    for (g, sg) in subgroups.iter_mut().enumerate() {
        let mut notes = Vec::new();
        sg.zscore_profile = Some(zscore_profile(train.x.view(), &sg.members, &clusters)?);
        match rmse_contrast(z.view(), train.y.view(), bundle.coefficients.view(), &global, &sg.members) {
            Ok(c) => sg.rmse = Some(c),
            Err(e) => notes.push(format!("rmse contrast: {e}")),
        }
        let predictors: Vec<usize> = latent_names[sg.dim]
            .top
            .iter()
            .take(dg.interaction_predictors)
            .filter_map(|v| train.names.iter().position(|n| *n == v.variable))
            .collect();
        sg.interaction_tests = interactions(&train.x, &train.y, &train.names, &sg.members, &predictors, "train", &mut notes);
        let test_members: Vec<usize> = projection
            .as_ref()
            .map(|p| (0..p.assignments.len()).filter(|&t| p.assignments[t].contains(&g)).collect())
            .unwrap_or_default();
        let combined_tests = match (&combined, test) {
            (Some((x, y)), Some(_)) => {
                let mut members = sg.members.clone();
                members.extend(test_members.iter().map(|t| train.n() + t));
                interactions(x, y, &train.names, &members, &predictors, "train+test", &mut notes)
            }
            _ => Vec::new(),
        };
        let test_row_ids = test
            .map(|t| test_members.iter().map(|&i| t.row_ids[i]).collect())
            .unwrap_or_default();
        extra.push((test_row_ids, combined_tests, notes));
    }

    let outputs: Vec<SubgroupOutput> = subgroups
        .iter()
        .zip(extra)
        .enumerate()
        .map(|(g, (sg, (test_member_row_ids, interaction_tests_combined, notes)))| SubgroupOutput {
            id: g,
            size: sg.size(),
            dim_label: global.latent_names[sg.dim].clone(),
            report: sg,
            member_row_ids: sg.members.iter().map(|&i| train.row_ids[i]).collect(),
            test_member_row_ids,
            interaction_tests_combined,
            notes,
        })
        .collect();

    out.write("global_model.csv", global.table_csv())?;
    out.write("deviations.csv", deviations_csv(&records))?;
    out.write("deviation_plot.csv", deviation_plot_csv(z.view(), train.y.view(), &records))?;
    out.write("local_fits.csv", local_fits_csv(model, train))?;
    let tags = membership_tags(train.n(), subgroups.iter().enumerate().map(|(g, s)| (g, s.members.clone())));
    out.write("latent_train.csv", latent_csv(train, z, &tags))?;
    out.write("latent_names.csv", latent_names_csv(&latent_names))?;
    out.write("predictor_clusters.csv", clusters_csv(&train.names, &clusters))?;
    out.write("subgroup_profiles.csv", profiles_csv(&subgroups, &train.names))?;
    out.write_json("subgroups.json", &outputs)?;
    if let (Some(p), Some(t)) = (&projection, test) {
        let tags: Vec<String> = p
            .assignments
            .iter()
            .map(|a| a.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(";"))
            .collect();
        out.write("test_latent.csv", latent_csv(t, &p.z, &tags))?;
        out.write("test_deviations.csv", deviations_csv(&p.records))?;
        out.write("test_assignments.csv", assignments_csv(&p.assignments, &t.row_ids))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct AlignmentOutput<'a> {
    seed: u64,
    #[serde(flatten)]
    alignment: &'a DimAlignment,
}

#[derive(Debug, Serialize)]
struct StabilitySummary<'a> {
    reference_seed: u64,
    runs: usize,
    mean_rank_sd: &'a [f64],
    unstable_dims: &'a [usize],
    alignments: Vec<AlignmentOutput<'a>>,
}

fn run_stability(cfg: &RunConfig, out: &mut OutputDir, study: &SeedStudy, train: &Dataset) -> StageResult<()> {
    let ok_seeds: Vec<u64> = (0..study.runs.len())
        .filter(|&i| study.model(i).is_some())
        .map(|i| study.runs[i].seed)
        .collect();
    if ok_seeds.len() < 2 {
        return Ok(());
    }
    let table = rank_stability_for_study(study, train.y.view(), cfg.diagnostics.ci_level, None)?;
    let summary = StabilitySummary {
        reference_seed: ok_seeds[table.reference],
        runs: ok_seeds.len(),
        mean_rank_sd: &table.mean_rank_sd,
        unstable_dims: &table.unstable_dims,
        alignments: ok_seeds
            .iter()
            .zip(&table.alignments)
            .map(|(&seed, alignment)| AlignmentOutput { seed, alignment })
            .collect(),
    };
    out.write("stability.csv", table.to_csv())?;
    out.write_json("stability_summary.json", &summary)?;
    Ok(())
}

fn run_benchmarks(
    cfg: &RunConfig,
    out: &mut OutputDir,
    study: &SeedStudy,
    train: &Dataset,
    test: Option<&Dataset>,
) -> StageResult<()> {
    let b = &cfg.benchmarks;
    let model = study.representative_model().expect("representative run");
    let mut results: Vec<BenchmarkResult> = vec![proposed_result(model, train, test)?];
    if b.plain_ae {
        results.push(plain_ae_baseline(train, test, &model.config, cfg.parallelism)?.0);
    }
    let pca = if b.pca {
        let r = pca_baseline(train, cfg.train.d)?;
        results.push(r.clone());
        Some(r)
    } else {
        None
    };
    out.write("benchmarks.csv", benchmarks_csv(&results))?;

    if b.plain_ae && b.plain_ae_all_seeds {
        let ok: Vec<usize> = (0..study.runs.len()).filter(|&i| study.model(i).is_some()).collect();
        let rows = cfg.parallelism.map_slice(&ok, |&i| -> latreg::Result<String> {
            let m = study.model(i).expect("filtered");
            let proposed = proposed_result(m, train, test)?.r_squared;
            let plain = plain_ae_baseline(train, test, &m.config, cfg.parallelism)?.0.r_squared;
            let pca_r2 = pca.as_ref().map(|p| p.r_squared.to_string()).unwrap_or_default();
            Ok(format!("{},{proposed},{plain},{pca_r2}\n", study.runs[i].seed))
        });
        let mut csv = String::from("seed,proposed,plain_ae,pca\n");
        for row in rows {
            csv.push_str(&row?);
        }
        out.write("benchmarks_by_seed.csv", csv)?;
    }

    if b.stepwise {
        for &p in &b.screening_sweep {
            let sc = StepwiseConfig {
                screening_p: p,
                backward_threshold: b.backward_threshold,
                forward_threshold: b.forward_threshold,
            };
            let m = stepwise(train.x.view(), train.y.view(), &train.names, &sc)?;
            out.write(&format!("stepwise/screen_{p}.csv"), m.to_csv())?;
            out.write(&format!("stepwise/screen_{p}_trace.csv"), m.trace_csv())?;
        }
    }
    Ok(())
}
