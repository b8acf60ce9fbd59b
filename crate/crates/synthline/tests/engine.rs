mod common;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use common::{four_atomics, single_atomic, with_subset_size};
use synthline::engine::{
    run_generation, Backoff, CompletionBackend, FaultMode, Generation, GenerationParams, MockBackend, RunOptions,
    RunStatus,
};
use synthline::store::{self, CsvSink, Format, VecSink};
use synthline_core::resources::{defect_labels, synthline_model, reference_configuration};
use synthline_core::{allocate_samples, expand_atomic_configurations, render_prompt, Configuration, LabelSpec};

fn label() -> LabelSpec {
    defect_labels().into_iter().next().unwrap()
}

fn fast() -> RunOptions {
    RunOptions {
        seed: Some(1),
        backoff: Backoff { base: Duration::from_millis(1), ..Backoff::default() },
        template: None,
    }
}

fn params(retry_limit: u32) -> GenerationParams {
    GenerationParams { retry_limit, ..GenerationParams::default() }
}

async fn run(config: &Configuration, p: GenerationParams, backend: Arc<dyn CompletionBackend>) -> (synthline::engine::GenerationRun, VecSink) {
    let mut sink = VecSink::default();
    let run = run_generation(&synthline_model(), config, &label(), p, backend, &mut sink, fast())
        .await
        .unwrap();
    (run, sink)
}

#[tokio::test]
async fn four_atomics_eight_samples() {
    let config = four_atomics(8);
    let (run, sink) = run(&config, params(0), Arc::new(MockBackend::new())).await;
    assert_eq!(run.status, RunStatus::Completed);
    assert_eq!(run.produced, 8);
    assert_eq!(sink.0.len(), 8);

    // Oracle: expand, allocate, and list the rows each atomic should yield.
    let model = synthline_model();
    let atomics = expand_atomic_configurations(&model, &config).unwrap();
    let counts = allocate_samples(atomics.len(), 8).unwrap();
    assert_eq!(counts, vec![2; 4]);
    let mut expected = Vec::new();
    for (a, n) in atomics.iter().zip(&counts) {
        let prompt = render_prompt(a, &label()).unwrap().text;
        for _ in 0..*n {
            expected.push((
                MockBackend::respond(&prompt, &run.params),
                a.get("RequirementType").unwrap().to_string(),
                a.get("Domain").unwrap().to_string(),
            ));
        }
    }
    let got: Vec<_> = sink
        .0
        .iter()
        .map(|s| (s.text.clone(), s.requirement_type.clone(), s.domain.clone()))
        .collect();
    assert_eq!(got, expected);
    for s in &sink.0 {
        assert_eq!(s.run_id, run.id);
        assert_eq!(s.label, "Ambiguous");
        assert_eq!(s.llm, "GPT-4o");
        assert_eq!(s.temperature, Some(1.0));
        assert_eq!(s.specification_format, "Constrained NL");
        assert_eq!(s.specification_level, "Detailed Specification");
        assert_eq!(s.requirement_source, "End Users");
        assert_eq!(s.language, "English");
    }
}

#[tokio::test]
async fn always_failing_backend_exhausts_retries() {
    let config = four_atomics(4);
    let (run, sink) = run(&config, params(2), Arc::new(MockBackend::new().with_fault(FaultMode::AlwaysFail))).await;
    assert_eq!(run.status, RunStatus::Failed);
    assert_eq!(run.produced, 0);
    assert!(sink.0.is_empty());
    let mut per_atomic: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    for f in &run.failures {
        per_atomic.entry(f.atomic_index).or_default().push(f.attempt);
    }
    assert_eq!(per_atomic.len(), 4);
    assert!(per_atomic.values().all(|a| a == &vec![1, 2, 3]));
}

#[tokio::test]
async fn singleton_run_carries_the_atomic_metadata() {
    let (run, sink) = run(&single_atomic(1), params(0), Arc::new(MockBackend::new())).await;
    assert_eq!((run.status, run.produced), (RunStatus::Completed, 1));
    let s = &sink.0[0];
    assert_eq!(s.requirement_type, "Functions");
    assert_eq!(s.domain, "Healthcare");
    assert!(s.text.ends_with(" Healthcare"));
}

#[tokio::test]
async fn fail_first_recovers_on_retry() {
    let backend = Arc::new(MockBackend::new().with_fault(FaultMode::FailFirst(1)));
    let (run, sink) = run(&single_atomic(1), params(1), backend.clone()).await;
    assert_eq!(run.status, RunStatus::Completed);
    assert_eq!(sink.0.len(), 1);
    assert_eq!(backend.calls(), 2);
    assert_eq!(run.failures.len(), 1);
}

#[tokio::test]
async fn permanent_failure_aborts() {
    let backend = Arc::new(MockBackend::new().with_fault(FaultMode::Permanent));
    let (run, _) = run(&four_atomics(40), params(3), backend.clone()).await;
    assert_eq!(run.status, RunStatus::Failed);
    assert!(run.error.as_deref().unwrap().contains("permanent"));
    assert!(backend.calls() < 40, "kept calling after a permanent error");
    assert!(run.failures.iter().all(|f| f.attempt == 1));
}

#[tokio::test]
async fn concurrency_bound_is_respected() {
    for limit in [1, 3, 8] {
        let backend = Arc::new(MockBackend::new().with_latency(Duration::from_millis(5)));
        let p = GenerationParams { max_concurrency: limit, ..params(0) };
        let (run, _) = run(&four_atomics(40), p, backend.clone()).await;
        assert_eq!(run.produced, 40);
        assert!(backend.peak_in_flight() <= limit, "peak {} > {limit}", backend.peak_in_flight());
        assert_eq!(backend.peak_in_flight(), limit, "the pool should fill up");
    }
}

#[tokio::test]
async fn cancellation_keeps_partial_output() {
    let model = synthline_model();
    let backend = Arc::new(MockBackend::new().with_latency(Duration::from_millis(10)));
    let p = GenerationParams { max_concurrency: 2, ..params(0) };
    let g = Generation::prepare(&model, &four_atomics(200), &label(), p, fast()).unwrap();
    let handle = g.handle();
    assert_eq!(handle.snapshot().status, RunStatus::Pending);
    let task = tokio::spawn(async move {
        let mut sink = VecSink::default();
        let run = g.execute(backend, &mut sink).await;
        (run, sink)
    });
    tokio::time::sleep(Duration::from_millis(60)).await;
    assert_eq!(handle.snapshot().status, RunStatus::Running);
    handle.cancel();
    let (run, sink) = task.await.unwrap();
    assert_eq!(run.status, RunStatus::Cancelled);
    assert!(run.produced > 0 && run.produced < 200, "{}", run.produced);
    assert_eq!(sink.0.len(), run.produced);
}

#[tokio::test]
async fn same_seed_same_bytes() {
    let model = synthline_model();
    let config = with_subset_size(reference_configuration(), 30);
    let mut outs = Vec::new();
    for seed in [5, 5, 6] {
        let mut sink = CsvSink::new(Vec::new()).unwrap();
        let opts = RunOptions { seed: Some(seed), ..fast() };
        run_generation(&model, &config, &label(), params(0), Arc::new(MockBackend::new()), &mut sink, opts)
            .await
            .unwrap();
        outs.push(sink.into_inner().unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    assert_ne!(outs[0], outs[2]);
    let d = store::read_from(&outs[0][..], Format::Csv).unwrap();
    assert_eq!(d.len(), 30);
    assert_eq!(d.source(), synthline_core::DataSource::Synthetic);
}

#[tokio::test]
async fn per_atomic_counts_never_exceed_allocation() {
    let config = with_subset_size(reference_configuration(), 250);
    let (run, sink) = run(&config, params(0), Arc::new(MockBackend::new())).await;
    let atomics = expand_atomic_configurations(&synthline_model(), &config).unwrap();
    let mut seen: BTreeMap<(String, String, String, String), usize> = BTreeMap::new();
    for s in &sink.0 {
        *seen
            .entry((s.requirement_type.clone(), s.specification_level.clone(), s.requirement_source.clone(), s.domain.clone()))
            .or_default() += 1;
    }
    for (a, entry) in atomics.iter().zip(&run.allocation) {
        let key = (
            a.get("RequirementType").unwrap().to_string(),
            a.get("SpecificationLevel").unwrap().to_string(),
            a.get("RequirementSource").unwrap().to_string(),
            a.get("Domain").unwrap().to_string(),
        );
        assert_eq!(seen.get(&key).copied().unwrap_or(0), entry.count);
    }
    assert_eq!(run.requested(), 250);
}

#[tokio::test]
async fn invalid_inputs_are_rejected_before_running() {
    let model = synthline_model();
    let bad = four_atomics(4).select(&["JSON"]);
    assert!(Generation::prepare(&model, &bad, &label(), params(0), fast()).is_err());
    let no_size = four_atomics(4).deselect("SubsetSize");
    assert!(Generation::prepare(&model, &no_size, &label(), params(0), fast()).is_err());
    let p = GenerationParams { top_p: 1.5, ..params(0) };
    assert!(Generation::prepare(&model, &four_atomics(4), &label(), p, fast()).is_err());
}
