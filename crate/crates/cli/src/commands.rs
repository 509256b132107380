use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};

use rallykit_core::dataset::{
    build_samples, load_dataset, max_stride_fitting, write_cutlist, write_dataset, BuildManifest,
    BuildOptions, KeypointSet, PromptSample, PromptVariant, VariantKind, DEFAULT_COUNT_QUERY_PROMPT,
    DEFAULT_TOKEN_FACTOR,
};
use rallykit_core::event::{
    build_vocabulary, load_annotations, validate_rally, RallyAnnotation,
};
use rallykit_core::fusion::{assemble_track, load_detections, DetectionTrack, FusionConfig};
use rallykit_core::metrics::corpus_stats;
use rallykit_core::parse::{load_predictions, parse_count_answer, AnswerParser};
use rallykit_core::runner::{
    evaluate_run, evaluate_single_events, run_batch, write_manifest, Endpoint, InferenceParams,
    RetryPolicy, RunSample, RunnerError,
};

use crate::config::{resolve, resolve_opt, FileConfig};
use crate::{Cli, Command};

/// Input problems exit 2, runtime/endpoint failures exit 3.
pub enum CliError {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

fn input<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Input(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Runtime(e.into())
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(input)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Stats { annotations } => cmd_stats(&cfg, annotations),
        Command::Validate { annotations } => cmd_validate(&cfg, annotations),
        Command::Build {
            annotations,
            detections,
            variant,
            stride,
            keypoints,
            include_audio,
            token_budget,
            out,
        } => cmd_build(
            &cfg,
            annotations,
            detections,
            variant,
            stride,
            keypoints,
            include_audio,
            token_budget,
            out,
        ),
        Command::Fuse {
            annotations,
            detections,
            out,
        } => cmd_fuse(&cfg, annotations, detections, out),
        Command::Run {
            dataset,
            endpoint,
            num_frames,
            include_audio,
            parallelism,
            retry_limit,
            timeout_ms,
            backoff_ms,
            out,
        } => cmd_run(
            &cfg,
            dataset,
            endpoint,
            num_frames,
            include_audio,
            parallelism,
            retry_limit,
            timeout_ms,
            backoff_ms,
            out,
        ),
        Command::Eval {
            predictions,
            annotations,
            task,
            out,
        } => cmd_eval(&cfg, predictions, annotations, task, out),
        Command::CountEval {
            predictions,
            annotations,
            out,
        } => cmd_count_eval(&cfg, predictions, annotations, out),
    }
}

fn required_path(
    flag: Option<PathBuf>,
    cfg: &FileConfig,
    key: &str,
) -> Result<PathBuf, CliError> {
    resolve_opt(flag, Ok(cfg.get(key).map(PathBuf::from)))
        .map_err(input)?
        .ok_or_else(|| input(anyhow!("missing --{} (or config key {key})", key.replace('_', "-"))))
}

fn load_rallies(path: &Path) -> Result<Vec<RallyAnnotation>, CliError> {
    let rallies = load_annotations(path)
        .with_context(|| format!("loading annotations {}", path.display()))
        .map_err(input)?;
    Ok(rallies)
}

fn parser_from_config(cfg: &FileConfig) -> Result<AnswerParser, CliError> {
    let aliases = cfg.aliases().map_err(input)?;
    if aliases.is_empty() {
        Ok(AnswerParser::new())
    } else {
        AnswerParser::with_aliases(aliases).map_err(input)
    }
}

fn cmd_stats(cfg: &FileConfig, annotations: Option<PathBuf>) -> Result<(), CliError> {
    let path = required_path(annotations, cfg, "annotations")?;
    let rallies = load_rallies(&path)?;
    let counts: Vec<u64> = rallies.iter().map(|r| r.event_count() as u64).collect();
    let stats = corpus_stats(&counts).map_err(input)?;
    let vocabulary = build_vocabulary(&rallies);

    println!("Rallies                  : {}", rallies.len());
    println!("Mean number of events    : {:.2}", stats.mean);
    println!("Lower quartile           : {}", stats.lower_quartile);
    println!("Median number of events  : {}", stats.median);
    println!("Upper quartile           : {}", stats.upper_quartile);
    println!("Maximum number of events : {}", stats.max);
    println!("Distinct event types     : {}", vocabulary.len());
    Ok(())
}

fn cmd_validate(cfg: &FileConfig, annotations: Option<PathBuf>) -> Result<(), CliError> {
    let path = required_path(annotations, cfg, "annotations")?;
    let rallies = load_rallies(&path)?;
    let mut total = 0usize;
    let mut affected = 0usize;
    for rally in &rallies {
        let violations = validate_rally(&rally.event_list());
        if !violations.is_empty() {
            affected += 1;
        }
        for v in &violations {
            println!("{}: {}", rally.rally_id(), v);
        }
        total += violations.len();
    }
    println!(
        "{} violations across {} rallies ({} affected)",
        total,
        rallies.len(),
        affected
    );
    Ok(())
}

/// Looks for a fused track first, then falls back to fusing raw detector
/// lines on the fly.
fn load_track_for(
    dir: &Path,
    rally: &RallyAnnotation,
    fusion: &FusionConfig,
) -> Result<DetectionTrack> {
    let track_path = dir.join(format!("{}.track.json", rally.rally_id()));
    if track_path.is_file() {
        return DetectionTrack::load(&track_path)
            .with_context(|| format!("loading track {}", track_path.display()));
    }
    let raw_path = dir.join(format!("{}.jsonl", rally.rally_id()));
    if raw_path.is_file() {
        let detections = load_detections(&raw_path)
            .with_context(|| format!("loading detections {}", raw_path.display()))?;
        return assemble_track(
            (rally.start_frame(), rally.end_frame()),
            &detections,
            fusion,
        )
        .with_context(|| format!("fusing detections {}", raw_path.display()));
    }
    bail!(
        "no detections for rally {}: expected {} or {}",
        rally.rally_id(),
        track_path.display(),
        raw_path.display()
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_build(
    cfg: &FileConfig,
    annotations: Option<PathBuf>,
    detections: Option<PathBuf>,
    variant: Option<String>,
    stride: Option<u32>,
    keypoints: Option<String>,
    include_audio: bool,
    token_budget: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let annotations_path = required_path(annotations, cfg, "annotations")?;
    let out_dir = required_path(out, cfg, "out")?;
    let rallies = load_rallies(&annotations_path)?;

    let kind: VariantKind = resolve(
        variant,
        Ok(cfg.get("variant").map(str::to_owned)),
        "default_sequence".to_owned(),
    )
    .map_err(input)?
    .parse()
    .map_err(input)?;
    let keypoint_set = resolve_opt(keypoints, Ok(cfg.get("keypoints").map(str::to_owned)))
        .map_err(input)?
        .map(|s| s.parse::<KeypointSet>())
        .transpose()
        .map_err(input)?;
    let stride = resolve_opt(stride, cfg.get_parsed("stride")).map_err(input)?;
    let mut variant = match stride {
        Some(s) => PromptVariant::new(kind, s, keypoint_set).map_err(input)?,
        None => PromptVariant::with_default_stride(kind, keypoint_set).map_err(input)?,
    };
    let include_audio = include_audio
        || cfg
            .get_parsed::<bool>("include_audio")
            .map_err(input)?
            .unwrap_or(false);
    let opts = BuildOptions {
        count_query_prompt: cfg
            .get("count_prompt")
            .unwrap_or(DEFAULT_COUNT_QUERY_PROMPT)
            .to_owned(),
        include_audio,
    };
    let token_budget = resolve_opt(token_budget, cfg.get_parsed("token_budget")).map_err(input)?;
    let token_factor = cfg
        .get_parsed::<f64>("token_factor")
        .map_err(input)?
        .unwrap_or(DEFAULT_TOKEN_FACTOR);

    let detections_dir =
        resolve_opt(detections, Ok(cfg.get("detections").map(PathBuf::from))).map_err(input)?;
    let fusion = fusion_config(cfg)?;

    let mut tracks: BTreeMap<String, DetectionTrack> = BTreeMap::new();
    if variant.kind.requires_track() {
        let dir = detections_dir.ok_or_else(|| {
            input(anyhow!(
                "variant {} requires a detection track: pass --detections",
                variant.kind
            ))
        })?;
        for rally in &rallies {
            let track = load_track_for(&dir, rally, &fusion).map_err(input)?;
            tracks.insert(rally.rally_id().to_owned(), track);
        }

        // With a token budget and no explicit stride, widen the stride until
        // every rally's prompt fits.
        if let (Some(budget), None) = (token_budget, stride) {
            let mut widest = 1;
            for rally in &rallies {
                let track = &tracks[rally.rally_id()];
                let windowed = track.restrict(rally.start_frame(), rally.end_frame());
                let fit = max_stride_fitting(budget, &windowed, &variant, &opts, token_factor)
                    .map_err(input)?;
                widest = widest.max(fit);
            }
            variant = PromptVariant::new(kind, widest, keypoint_set).map_err(input)?;
        }
    }

    let mut samples: Vec<PromptSample> = Vec::new();
    let mut sorted: Vec<&RallyAnnotation> = rallies.iter().collect();
    sorted.sort_by(|a, b| a.rally_id().cmp(b.rally_id()));
    for rally in sorted {
        let track = tracks.get(rally.rally_id());
        samples.extend(build_samples(rally, &variant, track, &opts).map_err(input)?);
    }

    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(input)?;
    write_dataset(&out_dir.join("dataset.json"), &samples).map_err(input)?;
    write_cutlist(&out_dir.join("cutlist.csv"), &samples).map_err(input)?;
    let manifest = BuildManifest::new(&variant, &opts, rallies.len(), samples.len());
    fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(input)?;

    println!(
        "built {} samples from {} rallies ({}, stride {}) into {}",
        samples.len(),
        rallies.len(),
        variant.kind,
        variant.stride,
        out_dir.display()
    );
    Ok(())
}

fn fusion_config(cfg: &FileConfig) -> Result<FusionConfig, CliError> {
    let mut fusion = FusionConfig::default();
    if let Some(factor) = cfg
        .get_parsed::<f64>("player_distance_factor")
        .map_err(input)?
    {
        fusion.distance_factor = factor;
    }
    Ok(fusion)
}

fn cmd_fuse(
    cfg: &FileConfig,
    annotations: Option<PathBuf>,
    detections: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let annotations_path = required_path(annotations, cfg, "annotations")?;
    let detections_dir = required_path(detections, cfg, "detections")?;
    let out_dir = required_path(out, cfg, "out")?;
    let rallies = load_rallies(&annotations_path)?;
    let fusion = fusion_config(cfg)?;

    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(input)?;
    for rally in &rallies {
        let raw_path = detections_dir.join(format!("{}.jsonl", rally.rally_id()));
        let detections = load_detections(&raw_path)
            .with_context(|| format!("loading detections {}", raw_path.display()))
            .map_err(input)?;
        let track = assemble_track(
            (rally.start_frame(), rally.end_frame()),
            &detections,
            &fusion,
        )
        .map_err(input)?;
        let out_path = out_dir.join(format!("{}.track.json", rally.rally_id()));
        track.save(&out_path).map_err(input)?;
    }
    println!("fused {} rallies into {}", rallies.len(), out_dir.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    cfg: &FileConfig,
    dataset: Option<PathBuf>,
    endpoint: Option<String>,
    num_frames: Option<u32>,
    include_audio: bool,
    parallelism: Option<usize>,
    retry_limit: Option<u32>,
    timeout_ms: Option<u64>,
    backoff_ms: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let dataset_path = required_path(dataset, cfg, "dataset")?;
    let out_dir = required_path(out, cfg, "out")?;
    let endpoint_desc = resolve_opt(endpoint, Ok(cfg.get("endpoint").map(str::to_owned)))
        .map_err(input)?
        .ok_or_else(|| input(anyhow!("missing --endpoint (or config key endpoint)")))?;
    let endpoint = Endpoint::parse(&endpoint_desc).map_err(input)?;

    let records = load_dataset(&dataset_path)
        .with_context(|| format!("loading dataset {}", dataset_path.display()))
        .map_err(input)?;
    let samples: Vec<RunSample> = records.iter().map(RunSample::from).collect();

    let num_frames = resolve(num_frames, cfg.get_parsed("num_frames"), 8).map_err(input)?;
    if num_frames == 0 {
        return Err(input(anyhow!("--num-frames must be at least 1")));
    }
    let include_audio = include_audio
        || cfg
            .get_parsed::<bool>("include_audio")
            .map_err(input)?
            .unwrap_or(false);
    let extra = match cfg.get("gen_params") {
        None => None,
        Some(raw) => Some(
            serde_json::from_str(raw)
                .map_err(|e| input(anyhow!("config key gen_params is not a JSON object: {e}")))?,
        ),
    };
    let params = InferenceParams {
        num_frames,
        include_audio,
        extra,
    };
    let parallelism = resolve(parallelism, cfg.get_parsed("parallelism"), 4).map_err(input)?;
    let retry = RetryPolicy {
        max_retries: resolve(retry_limit, cfg.get_parsed("retry_limit"), 2).map_err(input)?,
        base_backoff: Duration::from_millis(
            resolve(backoff_ms, cfg.get_parsed("backoff_ms"), 250).map_err(input)?,
        ),
    };
    let timeout = Duration::from_millis(
        resolve(timeout_ms, cfg.get_parsed("timeout_ms"), 30_000).map_err(input)?,
    );

    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(input)?;
    match run_batch(&samples, &endpoint, &params, parallelism, &retry, timeout) {
        Ok((predictions, manifest)) => {
            rallykit_core::parse::write_predictions(&out_dir.join("predictions.jsonl"), &predictions)
                .map_err(input)?;
            write_manifest(&out_dir.join("manifest.json"), &manifest).map_err(input)?;
            println!(
                "ran {} samples against {} (ok {}, empty {}, timeout {}, transport_error {})",
                manifest.samples.len(),
                endpoint_desc,
                manifest.totals.ok,
                manifest.totals.empty,
                manifest.totals.timeout,
                manifest.totals.transport_error
            );
            Ok(())
        }
        Err(RunnerError::RunFailed { manifest }) => {
            write_manifest(&out_dir.join("manifest.json"), &manifest).map_err(input)?;
            Err(runtime(anyhow!(
                "endpoint unreachable: every sample failed (partial manifest written to {})",
                out_dir.join("manifest.json").display()
            )))
        }
        Err(other) => Err(input(other)),
    }
}

fn cmd_eval(
    cfg: &FileConfig,
    predictions: Option<PathBuf>,
    annotations: Option<PathBuf>,
    task: Option<String>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let predictions_path = required_path(predictions, cfg, "predictions")?;
    let annotations_path = required_path(annotations, cfg, "annotations")?;
    let rallies = load_rallies(&annotations_path)?;
    let records = load_predictions(&predictions_path)
        .with_context(|| format!("loading predictions {}", predictions_path.display()))
        .map_err(input)?;
    let parser = parser_from_config(cfg)?;

    let task = resolve(
        task,
        Ok(cfg.get("task").map(str::to_owned)),
        "sequence".to_owned(),
    )
    .map_err(input)?;
    let report = match task.as_str() {
        "sequence" => evaluate_run(&records, &rallies, &parser).map_err(input)?,
        "single" => evaluate_single_events(&records, &rallies, &parser).map_err(input)?,
        other => return Err(input(anyhow!("unknown task {other:?} (sequence or single)"))),
    };

    print!("{}", report.render_tables());
    if let Some(out_dir) = out.or_else(|| cfg.get("out").map(PathBuf::from)) {
        fs::create_dir_all(&out_dir)
            .with_context(|| format!("creating {}", out_dir.display()))
            .map_err(input)?;
        let path = out_dir.join("report.json");
        fs::write(
            &path,
            serde_json::to_string_pretty(&report).expect("report serializes"),
        )
        .map_err(input)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn cmd_count_eval(
    cfg: &FileConfig,
    predictions: Option<PathBuf>,
    annotations: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let predictions_path = required_path(predictions, cfg, "predictions")?;
    let annotations_path = required_path(annotations, cfg, "annotations")?;
    let rallies = load_rallies(&annotations_path)?;
    let records = load_predictions(&predictions_path)
        .with_context(|| format!("loading predictions {}", predictions_path.display()))
        .map_err(input)?;

    let by_id: BTreeMap<&str, &RallyAnnotation> =
        rallies.iter().map(|r| (r.rally_id(), r)).collect();
    let mut pred_counts = Vec::with_capacity(records.len());
    let mut true_counts = Vec::with_capacity(records.len());
    for record in &records {
        let rally = by_id
            .get(record.rally_id.as_str())
            .ok_or_else(|| input(anyhow!("unknown rally id {:?} in predictions", record.rally_id)))?;
        pred_counts.push(parse_count_answer(&record.text));
        true_counts.push(rally.event_count() as u64);
    }
    let stats = rallykit_core::metrics::count_metrics(&pred_counts, &true_counts).map_err(input)?;

    println!("Event counting");
    println!("  Samples                  : {}", records.len());
    println!("  Exact-match accuracy     : {:.4}", stats.exact_match_accuracy);
    println!("  Mean absolute difference : {:.4}", stats.mean_abs_diff);
    println!("  Mean true count          : {:.4}", stats.mean_true_count);
    println!("  SD of true count         : {:.4}", stats.sd_true_count);

    if let Some(out_dir) = out.or_else(|| cfg.get("out").map(PathBuf::from)) {
        fs::create_dir_all(&out_dir)
            .with_context(|| format!("creating {}", out_dir.display()))
            .map_err(input)?;
        let path = out_dir.join("count_report.json");
        fs::write(
            &path,
            serde_json::to_string_pretty(&stats).expect("stats serialize"),
        )
        .map_err(input)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}
