use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use radar_ego::eval::{self, MetricReport};
use radar_ego::ingest::{self, AdapterConfig, Dataset, LoadOptions};
use radar_ego::odometry::{
    run_pipeline, write_estimates_jsonl, IcpVariant, PipelineConfig, Preprocessor, Trajectory,
};
use radar_ego::preprocess::CfarParams;
use radar_ego::sim::{self, fixtures, SimConfig};

use crate::output::{self, Staging};
use crate::{AdapterArg, DatasetArgs, EvalArgs, IcpArg, PipelineArgs, PreprocessorArg, RunArgs, SimArgs, SweepArgs};

pub const TRAJECTORY_FILE: &str = "trajectory.txt";
pub const ESTIMATES_FILE: &str = "estimates.jsonl";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.jsonl";
pub const FRAMES_FILE: &str = "frames.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const CUM_YAW_FILE: &str = "cum_sq_yaw_err.csv";
pub const RPE_FILE: &str = "rpe.csv";
pub const ALIGNED_FILE: &str = "aligned.txt";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SCENE_FILE: &str = "scene.toml";

fn load_dataset(args: &DatasetArgs) -> Result<Dataset> {
    let opts = LoadOptions::default();
    let ds = match args.adapter {
        None => ingest::load_dataset(&args.dataset, &opts),
        Some(AdapterArg::Coloradar) => {
            let path = args.adapter_config.as_ref().expect("clap enforces --adapter-config");
            let cfg = AdapterConfig::from_toml_file(path)?;
            ingest::load_coloradar_adapter(&args.dataset, &cfg, &opts)
        }
    };
    ds.with_context(|| format!("loading dataset {}", args.dataset.display()))
}

fn load_config(path: Option<&PathBuf>) -> Result<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn apply_k(cfg: &mut PipelineConfig, k: Option<usize>) -> Result<()> {
    match (k, &mut cfg.preprocessor) {
        (None, _) => Ok(()),
        (Some(k), Preprocessor::TopK { k: slot }) => {
            *slot = k;
            Ok(())
        }
        (Some(_), p) => bail!("--k only applies to the topk preprocessor, got {}", p.name()),
    }
}

fn pipeline_config(args: &PipelineArgs) -> Result<PipelineConfig> {
    let mut cfg = load_config(args.config.as_ref())?;
    if let Some(p) = args.preprocessor {
        let keep_k = match cfg.preprocessor {
            Preprocessor::TopK { k } => k,
            _ => Preprocessor::DEFAULT_K,
        };
        let keep_cfar = match cfg.preprocessor {
            Preprocessor::Cfar(c) => c,
            _ => CfarParams::default(),
        };
        cfg.preprocessor = match p {
            PreprocessorArg::Cfar => Preprocessor::Cfar(keep_cfar),
            PreprocessorArg::Topk => Preprocessor::TopK { k: keep_k },
            PreprocessorArg::Raymax => Preprocessor::RayMax,
        };
    }
    apply_k(&mut cfg, args.k)?;
    if let Some(icp) = args.icp {
        cfg.icp_variant = match icp {
            IcpArg::Plain => IcpVariant::Plain,
            IcpArg::OneWay => IcpVariant::OneWay,
            IcpArg::TwoWay => IcpVariant::TwoWay,
        };
    }
    if let Some(seed) = args.seed {
        cfg.ransac.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn inputs(paths: &[Option<&PathBuf>]) -> Vec<PathBuf> {
    paths.iter().flatten().map(|p| p.to_path_buf()).collect()
}

/// `run` and, with `diagnose`, the traced variant.
pub fn run(args: &RunArgs, diagnose: bool) -> Result<()> {
    let started = Instant::now();
    let mut cfg = pipeline_config(&args.pipeline)?;
    cfg.icp.record_trace = diagnose;
    let ds = load_dataset(&args.dataset)?;
    let out = run_pipeline(&ds, &cfg).context("running pipeline")?;

    let staging = Staging::new(&args.out)?;
    staging.write(TRAJECTORY_FILE, out.trajectory.to_text())?;
    let mut jsonl = Vec::new();
    write_estimates_jsonl(&out.estimates, &mut jsonl)?;
    if diagnose {
        staging.write(DIAGNOSTICS_FILE, jsonl)?;
        let mut csv = String::from(
            "t,dyaw_deg,vx,vy,iterations,final_matches,velocity_fallback,icp_degraded,icp_failed\n",
        );
        for e in &out.estimates {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                e.t,
                e.dyaw.to_degrees(),
                e.v.x,
                e.v.y,
                e.icp_iterations,
                e.icp_trace.last().map_or(0, |t| t.n_match),
                e.flags.velocity_fallback,
                e.flags.icp_degraded,
                e.flags.icp_failed
            ));
        }
        staging.write(FRAMES_FILE, csv)?;
    } else {
        staging.write(ESTIMATES_FILE, jsonl)?;
    }
    let m = output::manifest(
        if diagnose { "diagnose" } else { "run" },
        Some(&args.dataset.dataset),
        inputs(&[args.pipeline.config.as_ref(), args.dataset.adapter_config.as_ref()]),
        serde_json::to_value(&cfg)?,
    );
    staging.commit(m, started)?;
    Ok(())
}

fn load_reference(path: &Path) -> Result<Trajectory> {
    if path.is_dir() {
        let ds = ingest::load_dataset(path, &LoadOptions::default())
            .with_context(|| format!("loading dataset {}", path.display()))?;
        let Some(gt) = ds.ground_truth else {
            bail!("dataset {} has no ground truth", path.display());
        };
        return Ok(Trajectory::new(gt));
    }
    Ok(Trajectory::load(path)?)
}

#[derive(Serialize)]
struct MetricsJson<'a> {
    yaw_rmse_deg: f64,
    final_cum_sq_yaw_err: f64,
    rpe_mean_m: f64,
    rpe_rmse_m: f64,
    rpe_sum_m: f64,
    n_pairs: usize,
    n_unmatched: usize,
    tolerance_s: f64,
    alignment: &'a eval::Alignment,
}

pub fn evaluate(est: &Trajectory, reference: &Trajectory, tol: Option<f64>) -> Result<(MetricReport, f64)> {
    let tol = tol.unwrap_or_else(|| eval::default_tolerance(reference));
    Ok((eval::evaluate(est, reference, tol)?, tol))
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let started = Instant::now();
    let est = Trajectory::load(&args.est).with_context(|| format!("loading {}", args.est.display()))?;
    let reference = load_reference(&args.reference)?;
    let (report, tol) = evaluate(&est, &reference, args.tol)?;
    let (alignment, aligned) = eval::umeyama_align_se2(&est, &reference, tol, false)?;

    let staging = Staging::new(&args.out)?;
    let metrics = MetricsJson {
        yaw_rmse_deg: report.yaw_rmse_deg,
        final_cum_sq_yaw_err: report.cum_sq_yaw_err.last().map_or(0.0, |c| c.1),
        rpe_mean_m: report.rpe_mean_m,
        rpe_rmse_m: report.rpe_rmse_m,
        rpe_sum_m: report.rpe_sum_m,
        n_pairs: report.n_pairs,
        n_unmatched: report.n_unmatched,
        tolerance_s: tol,
        alignment: &alignment,
    };
    staging.write(METRICS_FILE, serde_json::to_string_pretty(&metrics)? + "\n")?;
    staging.write(CUM_YAW_FILE, eval::series_csv(&report.cum_sq_yaw_err))?;
    staging.write(RPE_FILE, eval::series_csv(&report.rpe_series))?;
    staging.write(ALIGNED_FILE, aligned.to_text())?;
    let m = output::manifest(
        "eval",
        None,
        vec![args.est.clone(), args.reference.clone()],
        serde_json::json!({ "tolerance_s": tol }),
    );
    staging.commit(m, started)?;
    Ok(())
}

pub fn sim(args: &SimArgs) -> Result<()> {
    let started = Instant::now();
    if args.list {
        let mut stdout = std::io::stdout().lock();
        for name in fixtures::NAMES {
            if writeln!(stdout, "{name}").is_err() {
                break;
            }
        }
        return Ok(());
    }
    let mut cfg = match (&args.scene, &args.fixture) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            SimConfig::from_toml(&text)?
        }
        (None, Some(name)) => fixtures::by_name(name, 0).with_context(|| {
            format!("unknown fixture `{name}`, expected one of {}", fixtures::NAMES.join(", "))
        })?,
        (None, None) => bail!("need --scene or --fixture"),
    };
    if let Some(seed) = args.seed {
        cfg.scene.seed = seed;
    }
    let out = sim::simulate(&cfg)?;
    let out_dir = args.out.as_ref().expect("clap enforces --out");

    let staging = Staging::new(out_dir)?;
    sim::write_dataset(&out.dataset, staging.dir())?;
    staging.write(SCENE_FILE, cfg.to_toml()?)?;
    let m = output::manifest(
        "sim",
        None,
        inputs(&[args.scene.as_ref()]),
        serde_json::to_value(&cfg)?,
    );
    staging.commit(m, started)?;
    Ok(())
}

/// Preprocessors in sweep order.
fn sweep_preprocessors(base: &PipelineConfig, k: usize) -> [Preprocessor; 3] {
    let cfar = match base.preprocessor {
        Preprocessor::Cfar(c) => c,
        _ => CfarParams::default(),
    };
    [Preprocessor::Cfar(cfar), Preprocessor::TopK { k }, Preprocessor::RayMax]
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let started = Instant::now();
    let mut base = load_config(args.config.as_ref())?;
    if let Some(seed) = args.seed {
        base.ransac.seed = seed;
    }
    let k = match (args.k, base.preprocessor) {
        (Some(k), _) | (None, Preprocessor::TopK { k }) => k,
        _ => Preprocessor::DEFAULT_K,
    };
    let ds = load_dataset(&args.dataset)?;
    let Some(gt) = ds.ground_truth.clone() else {
        bail!("dataset {} has no ground truth to score against", args.dataset.dataset.display());
    };
    let reference = Trajectory::new(gt);

    let mut header = String::from("preprocessor");
    for v in IcpVariant::ALL {
        header.push_str(&format!(",{0}_yaw_rmse_deg,{0}_rpe_mean_m", v.name()));
    }
    let mut csv = header + "\n";
    let mut configs = Vec::new();
    for pre in sweep_preprocessors(&base, k) {
        csv.push_str(pre.name());
        for variant in IcpVariant::ALL {
            let cfg = PipelineConfig {
                preprocessor: pre,
                icp_variant: variant,
                ..base.clone()
            };
            cfg.validate()?;
            let out = run_pipeline(&ds, &cfg)
                .with_context(|| format!("{} + {}", pre.name(), variant.name()))?;
            let (rep, _) = evaluate(&out.trajectory, &reference, None)?;
            csv.push_str(&format!(",{},{}", rep.yaw_rmse_deg, rep.rpe_mean_m));
            configs.push(cfg);
        }
        csv.push('\n');
    }

    let staging = Staging::new(&args.out)?;
    staging.write(SWEEP_FILE, csv)?;
    let m = output::manifest(
        "sweep",
        Some(&args.dataset.dataset),
        inputs(&[args.config.as_ref(), args.dataset.adapter_config.as_ref()]),
        serde_json::to_value(&configs)?,
    );
    staging.commit(m, started)?;
    Ok(())
}
