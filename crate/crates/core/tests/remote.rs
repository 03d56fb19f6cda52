mod common;

use coq_core::backend::{StubReply, StubServer};
use coq_core::evaluation::evaluate;
use coq_core::{
    run, BackendError, DecodingConfig, EvalConfig, FewShotSet, PipelineConfig, PipelineError, RemoteBackend,
    RemoteConfig, Task,
};

fn backend(server: &StubServer) -> RemoteBackend {
    RemoteBackend::new(RemoteConfig {
        initial_backoff_ms: 5,
        ..RemoteConfig::new(server.url())
    })
    .unwrap()
}

#[test]
fn stub_questions_reach_the_trace_verbatim() {
    let scripted = "Sure.\n1. What do I see?\n2)   Who is talking?  \nthanks";
    let server = StubServer::scripted(scripted);
    let record = common::record("avsd:3");
    let trace = run(&record, &backend(&server), &common::registry(), &PipelineConfig::default()).unwrap();

    assert_eq!(trace.raw_generation, scripted);
    let tasks: Vec<_> = trace.parsed.iter().map(|p| p.matched_task).collect();
    assert_eq!(tasks, [Some(Task::ObjectDetection), Some(Task::SpeakerId)]);
    assert_eq!(trace.answer, scripted);

    let prompts = server.prompts();
    assert_eq!(prompts.len(), 2);
    assert_eq!(prompts[0], FewShotSet::default().build_prompt(&record.prompt));
    assert!(prompts[1].starts_with(&format!("Prompt: {}\nObservations:\n", record.prompt)));
}

#[test]
fn seeded_sampling_is_reproducible() {
    let server = StubServer::seeded();
    let config = PipelineConfig {
        decoding: DecodingConfig::sampling(0.8, 64).with_seed(Some(1234)),
        ..PipelineConfig::default()
    };
    let records = common::benchmark();
    let first: Vec<_> = records
        .iter()
        .map(|r| run(r, &backend(&server), &common::registry(), &config).unwrap().raw_generation)
        .collect();
    let second: Vec<_> = records
        .iter()
        .map(|r| run(r, &backend(&server), &common::registry(), &config).unwrap().raw_generation)
        .collect();
    assert_eq!(first, second);
    assert!(server.requests().iter().all(|b| b["seed"] == 1234 && b["temperature"] == 0.8));
}

#[test]
fn retries_then_surfaces_transport_error() {
    let server = StubServer::start(|_| StubReply::Status(503));
    let record = common::record("webgpt:2");
    let err = run(&record, &backend(&server), &common::registry(), &PipelineConfig::default()).unwrap_err();
    match err {
        PipelineError::Backend(BackendError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("expected transport error, got {other:?}"),
    }
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn malformed_reply_is_not_retried() {
    let server = StubServer::start(|_| StubReply::Raw("{\"completion\": \"What do I see?\"}".into()));
    let record = common::record("webgpt:2");
    let err = run(&record, &backend(&server), &common::registry(), &PipelineConfig::default()).unwrap_err();
    assert!(matches!(err, PipelineError::Backend(BackendError::MalformedResponse(_))));
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn failed_records_count_as_mismatched_and_not_asked() {
    let server = StubServer::start(|body| {
        let prompt = body["prompt"].as_str().unwrap_or_default();
        if prompt.contains("Prompt: Why do onions") {
            StubReply::Status(500)
        } else {
            StubReply::Text("NO_QUESTION".into())
        }
    });
    let records = common::benchmark();
    let run = evaluate(
        &records,
        &backend(&server),
        &common::registry(),
        &EvalConfig {
            workers: 4,
            ..EvalConfig::default()
        },
    )
    .unwrap();
    assert_eq!(run.report.failed_count, 1);
    assert_eq!(run.report.total(), 40);
    assert_eq!(run.report.match_count, 9);
    assert_eq!(run.report.asked_count, 0);
    assert!(run.outcomes.iter().find(|o| o.failed).unwrap().record_id == "webgpt:1");
}

#[test]
fn in_flight_requests_stay_bounded() {
    let server = StubServer::start(|_| {
        std::thread::sleep(std::time::Duration::from_millis(20));
        StubReply::Text("What do I see?".into())
    });
    let backend = RemoteBackend::new(RemoteConfig {
        max_in_flight: 2,
        ..RemoteConfig::new(server.url())
    })
    .unwrap();
    let records = common::benchmark();
    evaluate(
        &records[..12],
        &backend,
        &common::registry(),
        &EvalConfig {
            workers: 8,
            ..EvalConfig::default()
        },
    )
    .unwrap();
    assert!(server.max_in_flight() <= 2, "{}", server.max_in_flight());
}
