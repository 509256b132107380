//! Batch prediction against an external inference endpoint (or a file-backed
//! replay mock) and scoring of the collected predictions.
//!
//! The endpoint is treated as a black box behind [`Transport`]; the runner
//! owns retries, bounded parallelism and deterministic output ordering.
//! Failed samples are recorded as empty predictions rather than dropped, so
//! transport problems can only lower scores, never inflate them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{DatasetRecord, PromptSample};
use crate::event::RallyAnnotation;
use crate::metrics::{
    count_metrics, edit_score, levenshtein, slots_from_events, AccuracyTally, EvalReport,
};
use crate::parse::{AnswerParser, PredictionRecord};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("endpoint unreachable: every sample failed")]
    RunFailed { manifest: Box<RunManifest> },
    #[error("unknown rally id {0:?} in predictions")]
    UnknownRally(String),
    #[error("duplicate prediction for {0:?}")]
    DuplicatePrediction(String),
    #[error("sample id {0:?} does not name an event (expected rally#eNN)")]
    BadSampleId(String),
    #[error("unsupported endpoint descriptor {0:?} (expected mock:<path> or http(s)://...)")]
    BadEndpoint(String),
    #[error("reading mock transport file: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    PredictionIo(#[from] crate::parse::PredictionIoError),
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("transport failure: {0}")]
    Failed(String),
}

/// Generation knobs forwarded to the endpoint. `extra` passes through
/// whatever endpoint-specific parameters the caller configured.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferenceParams {
    pub num_frames: u32,
    pub include_audio: bool,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Map<String, serde_json::Value>>,
}

impl Default for InferenceParams {
    fn default() -> InferenceParams {
        InferenceParams {
            num_frames: 8,
            include_audio: false,
            extra: None,
        }
    }
}

/// One request to the inference endpoint.
#[derive(Debug, Clone, Serialize)]
pub struct InferenceRequest {
    pub request_id: String,
    pub prompt: String,
    pub clip_ref: String,
    pub params: InferenceParams,
}

/// How a sample ended up after retries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Ok,
    Timeout,
    TransportError,
    Empty,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub id: String,
    pub status: SampleStatus,
    /// Retries performed after the first attempt.
    pub retries: u32,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusTotals {
    pub ok: usize,
    pub timeout: usize,
    pub transport_error: usize,
    pub empty: usize,
}

/// Record of one batch run: per-sample status and timings. The run id is a
/// digest of the inputs, so reruns over identical inputs share it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub variant: String,
    pub endpoint: String,
    pub totals: StatusTotals,
    pub samples: Vec<SampleOutcome>,
}

/// Where predictions come from: a live HTTP endpoint or a JSON-lines replay
/// file mapping sample ids to answer text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Mock(PathBuf),
    Http(String),
}

impl Endpoint {
    pub fn parse(descriptor: &str) -> Result<Endpoint, RunnerError> {
        if let Some(path) = descriptor.strip_prefix("mock:") {
            return Ok(Endpoint::Mock(PathBuf::from(path)));
        }
        if descriptor.starts_with("http://") || descriptor.starts_with("https://") {
            return Ok(Endpoint::Http(descriptor.trim_end_matches('/').to_owned()));
        }
        Err(RunnerError::BadEndpoint(descriptor.to_owned()))
    }

    pub fn transport(&self, timeout: Duration) -> Result<Box<dyn Transport>, RunnerError> {
        match self {
            Endpoint::Mock(path) => Ok(Box::new(MockFileTransport::load(path)?)),
            Endpoint::Http(base) => Ok(Box::new(HttpTransport::new(base.clone(), timeout))),
        }
    }
}

/// A synchronous text-generation backend. Implementations must be usable
/// from multiple worker threads at once.
pub trait Transport: Sync {
    fn generate(&self, request: &InferenceRequest) -> Result<String, TransportError>;
}

/// Replays answers from a JSON-lines file of `{rally_id, text}` records.
/// Ids without an entry yield empty text.
pub struct MockFileTransport {
    answers: BTreeMap<String, String>,
}

impl MockFileTransport {
    pub fn load(path: &Path) -> Result<MockFileTransport, RunnerError> {
        let records = crate::parse::load_predictions(path)?;
        Ok(MockFileTransport {
            answers: records
                .into_iter()
                .map(|r| (r.rally_id, r.text))
                .collect(),
        })
    }
}

impl Transport for MockFileTransport {
    fn generate(&self, request: &InferenceRequest) -> Result<String, TransportError> {
        Ok(self
            .answers
            .get(&request.request_id)
            .cloned()
            .unwrap_or_default())
    }
}

#[derive(Serialize)]
struct GenerateBody<'a> {
    id: &'a str,
    prompt: &'a str,
    video: &'a str,
    params: &'a InferenceParams,
}

#[derive(Deserialize)]
struct GenerateResponse {
    id: String,
    text: String,
}

/// POSTs `{id, prompt, video, params}` to `<base>/generate` and expects
/// `{id, text}` back.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    base: String,
}

impl HttpTransport {
    pub fn new(base: String, timeout: Duration) -> HttpTransport {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("http client builds");
        HttpTransport { client, base }
    }
}

impl Transport for HttpTransport {
    fn generate(&self, request: &InferenceRequest) -> Result<String, TransportError> {
        let body = GenerateBody {
            id: &request.request_id,
            prompt: &request.prompt,
            video: &request.clip_ref,
            params: &request.params,
        };
        let url = format!("{}/generate", self.base);
        let response = self.client.post(&url).json(&body).send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Failed(e.to_string())
            }
        })?;
        if !response.status().is_success() {
            return Err(TransportError::Failed(format!(
                "endpoint returned {}",
                response.status()
            )));
        }
        let parsed: GenerateResponse = response
            .json()
            .map_err(|e| TransportError::Failed(format!("bad response body: {e}")))?;
        if parsed.id != request.request_id {
            return Err(TransportError::Failed(format!(
                "response id {:?} does not match request id {:?}",
                parsed.id, request.request_id
            )));
        }
        Ok(parsed.text)
    }
}

/// Retry budget and deterministic exponential backoff (no jitter: runs must
/// be reproducible).
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> RetryPolicy {
        RetryPolicy {
            max_retries: 2,
            base_backoff: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    fn backoff(&self, attempt: u32) -> Duration {
        self.base_backoff.saturating_mul(1u32 << attempt.min(16))
    }
}

/// Labels recorded into the manifest.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub variant: String,
    pub endpoint: String,
}

/// The unit of work a run iterates over.
#[derive(Debug, Clone)]
pub struct RunSample {
    pub id: String,
    pub prompt: String,
    pub clip_ref: String,
}

impl From<&PromptSample> for RunSample {
    fn from(s: &PromptSample) -> RunSample {
        RunSample {
            id: s.rally_id.clone(),
            prompt: s.prompt.clone(),
            clip_ref: s.clip_ref.clone(),
        }
    }
}

impl From<&DatasetRecord> for RunSample {
    fn from(r: &DatasetRecord) -> RunSample {
        RunSample {
            id: r.id.clone(),
            prompt: r
                .conversations
                .iter()
                .find(|t| t.from == "human")
                .map(|t| t.value.clone())
                .unwrap_or_default(),
            clip_ref: r.video.clone(),
        }
    }
}

fn run_id(samples: &[RunSample], ctx: &RunContext, params: &InferenceParams) -> String {
    let mut hasher = Sha256::new();
    hasher.update(ctx.endpoint.as_bytes());
    hasher.update([0]);
    hasher.update(ctx.variant.as_bytes());
    hasher.update([0]);
    hasher.update(serde_json::to_vec(params).expect("params serialize"));
    for s in samples {
        hasher.update([0]);
        hasher.update(s.id.as_bytes());
    }
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs every sample against the endpoint with bounded parallelism.
///
/// Each sample is retried on transport errors up to the retry budget, scoring
/// an empty prediction on final failure. Output is ordered by sample id
/// regardless of completion order, so parallelism never changes the bytes
/// written. Errors with `RunFailed` only when no sample got through at all.
pub fn run_batch(
    samples: &[RunSample],
    endpoint: &Endpoint,
    params: &InferenceParams,
    parallelism: usize,
    retry: &RetryPolicy,
    timeout: Duration,
) -> Result<(Vec<PredictionRecord>, RunManifest), RunnerError> {
    let transport = endpoint.transport(timeout)?;
    let ctx = RunContext {
        variant: String::new(),
        endpoint: match endpoint {
            Endpoint::Mock(p) => format!("mock:{}", p.display()),
            Endpoint::Http(b) => b.clone(),
        },
    };
    run_batch_with(transport.as_ref(), samples, params, parallelism, retry, &ctx)
}

pub fn run_batch_with(
    transport: &dyn Transport,
    samples: &[RunSample],
    params: &InferenceParams,
    parallelism: usize,
    retry: &RetryPolicy,
    ctx: &RunContext,
) -> Result<(Vec<PredictionRecord>, RunManifest), RunnerError> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<(PredictionRecord, SampleOutcome)>>> =
        Mutex::new(vec![None; samples.len()]);

    thread::scope(|scope| {
        for _ in 0..parallelism.max(1) {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                let Some(sample) = samples.get(index) else {
                    break;
                };
                let outcome = run_sample(transport, sample, params, retry);
                results.lock().expect("no poisoned worker")[index] = Some(outcome);
            });
        }
    });

    let collected = results.into_inner().expect("workers finished");
    let mut pairs: Vec<(PredictionRecord, SampleOutcome)> = collected
        .into_iter()
        .map(|slot| slot.expect("every sample processed"))
        .collect();
    pairs.sort_by(|a, b| a.0.rally_id.cmp(&b.0.rally_id));

    let mut totals = StatusTotals::default();
    for (_, outcome) in &pairs {
        match outcome.status {
            SampleStatus::Ok => totals.ok += 1,
            SampleStatus::Timeout => totals.timeout += 1,
            SampleStatus::TransportError => totals.transport_error += 1,
            SampleStatus::Empty => totals.empty += 1,
        }
    }

    let (predictions, outcomes): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let manifest = RunManifest {
        run_id: run_id(samples, ctx, params),
        variant: ctx.variant.clone(),
        endpoint: ctx.endpoint.clone(),
        totals,
        samples: outcomes,
    };

    let all_failed = !samples.is_empty() && totals.ok + totals.empty == 0;
    if all_failed {
        return Err(RunnerError::RunFailed {
            manifest: Box::new(manifest),
        });
    }
    Ok((predictions, manifest))
}

fn run_sample(
    transport: &dyn Transport,
    sample: &RunSample,
    params: &InferenceParams,
    retry: &RetryPolicy,
) -> (PredictionRecord, SampleOutcome) {
    let request = InferenceRequest {
        request_id: sample.id.clone(),
        prompt: sample.prompt.clone(),
        clip_ref: sample.clip_ref.clone(),
        params: params.clone(),
    };
    let started = Instant::now();
    let mut retries = 0;
    let (text, status) = loop {
        match transport.generate(&request) {
            Ok(text) if text.is_empty() => break (text, SampleStatus::Empty),
            Ok(text) => break (text, SampleStatus::Ok),
            Err(err) => {
                if retries < retry.max_retries {
                    thread::sleep(retry.backoff(retries));
                    retries += 1;
                    continue;
                }
                let status = match err {
                    TransportError::Timeout => SampleStatus::Timeout,
                    TransportError::Failed(_) => SampleStatus::TransportError,
                };
                break (String::new(), status);
            }
        }
    };
    (
        PredictionRecord {
            rally_id: sample.id.clone(),
            text,
        },
        SampleOutcome {
            id: sample.id.clone(),
            status,
            retries,
            duration_ms: started.elapsed().as_millis() as u64,
        },
    )
}

/// Scores sequence predictions against their rallies.
///
/// Each prediction is parsed sentence-wise into event slots and compared to
/// the rally's annotated sequence; sub-class accuracies pair the i-th
/// sentence with the i-th truth event, and counting statistics use the
/// number of sentences as the predicted count.
pub fn evaluate_run(
    predictions: &[PredictionRecord],
    annotations: &[RallyAnnotation],
    parser: &AnswerParser,
) -> Result<EvalReport, RunnerError> {
    let by_id: BTreeMap<&str, &RallyAnnotation> = annotations
        .iter()
        .map(|r| (r.rally_id(), r))
        .collect();

    let mut per_rally_edit = BTreeMap::new();
    let mut tally = AccuracyTally::new();
    let mut pred_counts = Vec::new();
    let mut true_counts = Vec::new();
    let mut total_edits = 0usize;
    let mut total_longer = 0usize;

    for prediction in predictions {
        let rally = by_id
            .get(prediction.rally_id.as_str())
            .ok_or_else(|| RunnerError::UnknownRally(prediction.rally_id.clone()))?;
        let parsed = parser.parse_prediction(&prediction.text);
        let truth_events = rally.event_list();
        let truth_slots = slots_from_events(&truth_events);

        let score = edit_score(parsed.slots(), &truth_slots);
        if per_rally_edit
            .insert(prediction.rally_id.clone(), score)
            .is_some()
        {
            return Err(RunnerError::DuplicatePrediction(prediction.rally_id.clone()));
        }
        total_edits += levenshtein(parsed.slots(), &truth_slots);
        total_longer += parsed.slots().len().max(truth_slots.len());

        for (i, truth) in truth_events.iter().enumerate() {
            tally.add_sample(parsed.sentences.get(i), truth);
        }
        pred_counts.push(Some(parsed.sentences.len() as u64));
        true_counts.push(truth_events.len() as u64);
    }

    finish_report(per_rally_edit, tally, &pred_counts, &true_counts, total_edits, total_longer)
}

/// Scores per-event predictions produced from a `single_event` dataset.
/// Sample ids take the form `{rally_id}#e{NN}` and resolve to one annotated
/// event each; every sample is scored as a one-event sequence.
pub fn evaluate_single_events(
    predictions: &[PredictionRecord],
    annotations: &[RallyAnnotation],
    parser: &AnswerParser,
) -> Result<EvalReport, RunnerError> {
    let by_id: BTreeMap<&str, &RallyAnnotation> = annotations
        .iter()
        .map(|r| (r.rally_id(), r))
        .collect();

    let mut per_rally_edit = BTreeMap::new();
    let mut tally = AccuracyTally::new();
    let mut pred_counts = Vec::new();
    let mut true_counts = Vec::new();
    let mut total_edits = 0usize;
    let mut total_longer = 0usize;

    for prediction in predictions {
        let (rally_id, index) = split_sample_id(&prediction.rally_id)
            .ok_or_else(|| RunnerError::BadSampleId(prediction.rally_id.clone()))?;
        let rally = by_id
            .get(rally_id)
            .ok_or_else(|| RunnerError::UnknownRally(prediction.rally_id.clone()))?;
        let truth = rally
            .events()
            .get(index)
            .ok_or_else(|| RunnerError::BadSampleId(prediction.rally_id.clone()))?
            .event;

        let parsed = parser.parse_prediction(&prediction.text);
        let truth_slots = slots_from_events(&[truth]);
        let score = edit_score(parsed.slots(), &truth_slots);
        if per_rally_edit
            .insert(prediction.rally_id.clone(), score)
            .is_some()
        {
            return Err(RunnerError::DuplicatePrediction(prediction.rally_id.clone()));
        }
        total_edits += levenshtein(parsed.slots(), &truth_slots);
        total_longer += parsed.slots().len().max(1);

        let sentence = match parsed.sentences.as_slice() {
            [only] => Some(only),
            _ => None,
        };
        tally.add_sample(sentence, &truth);
        pred_counts.push(Some(parsed.sentences.len() as u64));
        true_counts.push(1);
    }

    finish_report(per_rally_edit, tally, &pred_counts, &true_counts, total_edits, total_longer)
}

fn split_sample_id(id: &str) -> Option<(&str, usize)> {
    let (rally, suffix) = id.rsplit_once("#e")?;
    let index: usize = suffix.parse().ok()?;
    Some((rally, index))
}

fn finish_report(
    per_rally_edit: BTreeMap<String, f64>,
    tally: AccuracyTally,
    pred_counts: &[Option<u64>],
    true_counts: &[u64],
    total_edits: usize,
    total_longer: usize,
) -> Result<EvalReport, RunnerError> {
    let mean_edit_score = if per_rally_edit.is_empty() {
        0.0
    } else {
        per_rally_edit.values().sum::<f64>() / per_rally_edit.len() as f64
    };
    let pooled_edit_score = if total_longer == 0 {
        0.0
    } else {
        (1.0 - total_edits as f64 / total_longer as f64) * 100.0
    };
    let (subclass_accuracy, overall_accuracy) = tally.finish();
    let count_stats = count_metrics(pred_counts, true_counts).unwrap_or(
        crate::metrics::CountStats {
            exact_match_accuracy: 0.0,
            mean_abs_diff: 0.0,
            mean_true_count: 0.0,
            sd_true_count: 0.0,
        },
    );
    Ok(EvalReport {
        per_rally_edit,
        mean_edit_score,
        pooled_edit_score,
        subclass_accuracy,
        overall_accuracy,
        count_stats,
    })
}

/// Writes the manifest as pretty JSON.
pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), RunnerError> {
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(path, json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_samples, BuildOptions, PromptVariant, VariantKind};
    use crate::fixtures;
    use std::sync::atomic::AtomicU32;

    fn ctx() -> RunContext {
        RunContext {
            variant: "default_sequence".into(),
            endpoint: "test".into(),
        }
    }

    fn fast_retry() -> RetryPolicy {
        RetryPolicy {
            max_retries: 2,
            base_backoff: Duration::from_millis(1),
        }
    }

    struct EchoTransport {
        answers: BTreeMap<String, String>,
    }

    impl Transport for EchoTransport {
        fn generate(&self, request: &InferenceRequest) -> Result<String, TransportError> {
            Ok(self.answers.get(&request.request_id).cloned().unwrap_or_default())
        }
    }

    struct FailingTransport;

    impl Transport for FailingTransport {
        fn generate(&self, _request: &InferenceRequest) -> Result<String, TransportError> {
            Err(TransportError::Failed("boom".into()))
        }
    }

    struct FlakyTransport {
        calls: AtomicU32,
    }

    impl Transport for FlakyTransport {
        fn generate(&self, request: &InferenceRequest) -> Result<String, TransportError> {
            if self.calls.fetch_add(1, Ordering::SeqCst) == 0 {
                Err(TransportError::Failed("transient".into()))
            } else {
                Ok(format!("answer for {}", request.request_id))
            }
        }
    }

    fn corpus_samples(n: usize) -> (Vec<RallyAnnotation>, Vec<RunSample>, Vec<PromptSample>) {
        let annotations = fixtures::synthetic_corpus(n);
        let variant = PromptVariant::new(VariantKind::DefaultSequence, 1, None).unwrap();
        let opts = BuildOptions::default();
        let mut prompt_samples = Vec::new();
        for r in &annotations {
            prompt_samples.extend(build_samples(r, &variant, None, &opts).unwrap());
        }
        let run_samples = prompt_samples.iter().map(RunSample::from).collect();
        (annotations, run_samples, prompt_samples)
    }

    #[test]
    fn echo_mock_scores_perfect() {
        let (annotations, run_samples, prompt_samples) = corpus_samples(5);
        let echo = EchoTransport {
            answers: prompt_samples
                .iter()
                .map(|s| (s.rally_id.clone(), s.answer.clone()))
                .collect(),
        };
        let (predictions, manifest) =
            run_batch_with(&echo, &run_samples, &InferenceParams::default(), 2, &fast_retry(), &ctx())
                .unwrap();
        assert_eq!(predictions.len(), run_samples.len());
        assert_eq!(manifest.totals.ok, run_samples.len());

        let report = evaluate_run(&predictions, &annotations, &AnswerParser::new()).unwrap();
        assert_eq!(report.mean_edit_score, 100.0);
        assert_eq!(report.overall_accuracy, 1.0);
        assert_eq!(report.count_stats.exact_match_accuracy, 1.0);
    }

    #[test]
    fn empty_mock_scores_zero() {
        let (annotations, run_samples, _) = corpus_samples(4);
        let empty = EchoTransport {
            answers: BTreeMap::new(),
        };
        let (predictions, manifest) =
            run_batch_with(&empty, &run_samples, &InferenceParams::default(), 1, &fast_retry(), &ctx())
                .unwrap();
        assert_eq!(manifest.totals.empty, run_samples.len());
        let report = evaluate_run(&predictions, &annotations, &AnswerParser::new()).unwrap();
        assert_eq!(report.mean_edit_score, 0.0);
    }

    #[test]
    fn retry_then_success_is_recorded() {
        let (_, run_samples, _) = corpus_samples(1);
        let flaky = FlakyTransport {
            calls: AtomicU32::new(0),
        };
        let (_, manifest) =
            run_batch_with(&flaky, &run_samples, &InferenceParams::default(), 1, &fast_retry(), &ctx())
                .unwrap();
        assert_eq!(manifest.samples[0].status, SampleStatus::Ok);
        assert_eq!(manifest.samples[0].retries, 1);
    }

    #[test]
    fn all_failures_is_run_failed() {
        let (_, run_samples, _) = corpus_samples(3);
        let err = run_batch_with(
            &FailingTransport,
            &run_samples,
            &InferenceParams::default(),
            2,
            &RetryPolicy {
                max_retries: 0,
                base_backoff: Duration::from_millis(1),
            },
            &ctx(),
        )
        .unwrap_err();
        match err {
            RunnerError::RunFailed { manifest } => {
                assert_eq!(manifest.totals.transport_error, run_samples.len());
                assert_eq!(manifest.samples.len(), run_samples.len());
            }
            other => panic!("expected RunFailed, got {other:?}"),
        }
    }

    #[test]
    fn parallelism_does_not_change_output() {
        let (_, run_samples, prompt_samples) = corpus_samples(8);
        let echo = EchoTransport {
            answers: prompt_samples
                .iter()
                .map(|s| (s.rally_id.clone(), s.answer.clone()))
                .collect(),
        };
        let (p1, m1) =
            run_batch_with(&echo, &run_samples, &InferenceParams::default(), 1, &fast_retry(), &ctx())
                .unwrap();
        let (p8, m8) =
            run_batch_with(&echo, &run_samples, &InferenceParams::default(), 8, &fast_retry(), &ctx())
                .unwrap();
        assert_eq!(p1, p8);
        assert_eq!(m1.run_id, m8.run_id);
        // completeness: one prediction per sample
        assert_eq!(p1.len(), run_samples.len());
    }

    #[test]
    fn unknown_rally_is_rejected() {
        let (annotations, _, _) = corpus_samples(1);
        let predictions = vec![PredictionRecord {
            rally_id: "nope".into(),
            text: "".into(),
        }];
        let err = evaluate_run(&predictions, &annotations, &AnswerParser::new()).unwrap_err();
        assert!(matches!(err, RunnerError::UnknownRally(_)));
    }

    #[test]
    fn missing_final_event_scores_by_formula() {
        let annotations = fixtures::synthetic_corpus(6);
        let parser = AnswerParser::new();
        let mut predictions = Vec::new();
        for r in &annotations {
            let mut events = r.event_list();
            events.pop();
            let text = if events.is_empty() {
                String::new()
            } else {
                crate::event::render_sequence_answer(&events).unwrap()
            };
            predictions.push(PredictionRecord {
                rally_id: r.rally_id().to_owned(),
                text,
            });
        }
        let report = evaluate_run(&predictions, &annotations, &parser).unwrap();
        for r in &annotations {
            let n = r.event_count() as f64;
            let expected = (1.0 - 1.0 / n) * 100.0;
            let got = report.per_rally_edit[r.rally_id()];
            assert!((got - expected).abs() < 1e-9, "rally {}: {got} vs {expected}", r.rally_id());
        }
    }

    #[test]
    fn single_event_eval_resolves_sample_ids() {
        let annotations = fixtures::synthetic_corpus(3);
        let parser = AnswerParser::new();
        let variant = PromptVariant::new(VariantKind::SingleEvent, 1, None).unwrap();
        let opts = BuildOptions::default();
        let mut predictions = Vec::new();
        for r in &annotations {
            for s in build_samples(r, &variant, None, &opts).unwrap() {
                predictions.push(PredictionRecord {
                    rally_id: s.rally_id.clone(),
                    text: s.answer.clone(),
                });
            }
        }
        let report = evaluate_single_events(&predictions, &annotations, &parser).unwrap();
        assert_eq!(report.mean_edit_score, 100.0);
        assert_eq!(report.overall_accuracy, 1.0);

        let err = evaluate_single_events(
            &[PredictionRecord {
                rally_id: "r0000#e99".into(),
                text: String::new(),
            }],
            &annotations,
            &parser,
        )
        .unwrap_err();
        assert!(matches!(err, RunnerError::BadSampleId(_)));
    }

    #[test]
    fn endpoint_descriptor_parsing() {
        assert_eq!(
            Endpoint::parse("mock:answers.jsonl").unwrap(),
            Endpoint::Mock(PathBuf::from("answers.jsonl"))
        );
        assert_eq!(
            Endpoint::parse("http://localhost:9000/").unwrap(),
            Endpoint::Http("http://localhost:9000".into())
        );
        assert!(matches!(
            Endpoint::parse("ftp://nope"),
            Err(RunnerError::BadEndpoint(_))
        ));
    }
}
