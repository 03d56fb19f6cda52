mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use coq_core::backend::EchoScript;
use coq_core::pipeline::run_input;
use coq_core::pipeline::RunInput;
use coq_core::{
    run, AttachmentSet, CanonicalQuestion, Modality, ModalitySet, ObservationStatus, PipelineConfig,
    ScriptedBackend, Sensor, Task,
};

#[test]
fn fixed_object_detection_on_image_record() {
    let record = common::record("scienceqa_image:1");
    let trace = run(
        &record,
        &ScriptedBackend::FixedTask(Task::ObjectDetection),
        &common::registry(),
        &PipelineConfig::default(),
    )
    .unwrap();

    assert_eq!(trace.raw_generation, "What do I see?");
    assert_eq!(trace.parsed.len(), 1);
    assert_eq!(trace.observations.len(), 1);
    let obs = &trace.observations[0];
    assert_eq!(obs.sensor, Sensor::Camera);
    assert_eq!(obs.status, ObservationStatus::Ok);
    assert!(!obs.payload.is_empty());
    assert_eq!(trace.activated_modalities, ModalitySet::from([Modality::Vision]));
}

#[test]
fn gold_following_on_scan_record() {
    let record = common::record("scanqa:1");
    let trace = run(&record, &ScriptedBackend::GoldFollowing, &common::registry(), &PipelineConfig::default())
        .unwrap();

    assert_eq!(trace.raw_generation, "What is the spatial location?");
    assert_eq!(trace.observations.len(), 1);
    assert_eq!(trace.observations[0].sensor, Sensor::Lidar);
    assert_eq!(trace.observations[0].status, ObservationStatus::Ok);
    assert_eq!(trace.activated_modalities, ModalitySet::from([Modality::Spatial]));
}

#[test]
fn gold_following_on_video_record_uses_both_sensors() {
    let record = common::record("avsd:1");
    let trace = run(&record, &ScriptedBackend::GoldFollowing, &common::registry(), &PipelineConfig::default())
        .unwrap();

    let sensors: Vec<_> = trace.observations.iter().map(|o| o.sensor).collect();
    assert_eq!(sensors, [Sensor::Camera, Sensor::Microphone]);
    assert_eq!(trace.observations[0].payload, "person, sofa, table (clip 1)");
    assert_eq!(
        trace.activated_modalities,
        ModalitySet::from([Modality::Audio, Modality::Vision])
    );
}

#[test]
fn missing_attachment_is_no_data_but_still_activates() {
    let record = common::record("webgpt:1");
    let trace = run(
        &record,
        &ScriptedBackend::FixedTask(Task::SoundEventDetection),
        &common::registry(),
        &PipelineConfig::default(),
    )
    .unwrap();
    assert_eq!(trace.observations[0].status, ObservationStatus::NoData);
    assert_eq!(trace.activated_modalities, ModalitySet::from([Modality::Audio]));
}

#[test]
fn parallel_sensors_match_sequential() {
    let record = common::record("avsd:4");
    let script = EchoScript::new(BTreeMap::from([(
        record.id.clone(),
        CanonicalQuestion::QUESTIONS
            .iter()
            .map(|q| q.surface())
            .collect::<Vec<_>>()
            .join("\n"),
    )]));
    let backend = ScriptedBackend::Echo(script);
    let registry = common::registry();
    let sequential = run(&record, &backend, &registry, &PipelineConfig::default()).unwrap();
    let parallel = run(
        &record,
        &backend,
        &registry,
        &PipelineConfig {
            parallel_sensors: true,
            question_cap: 16,
            ..PipelineConfig::default()
        },
    )
    .unwrap();
    assert_eq!(sequential.questions_dropped, 2);
    assert_eq!(parallel.questions_dropped, 0);
    assert_eq!(
        sequential.observations[..],
        parallel.observations[..sequential.observations.len()]
    );
}

fn generation_line() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => (0..10usize).prop_map(|i| CanonicalQuestion::QUESTIONS[i].surface().to_string()),
        2 => prop::sample::select(vec![
            "Could you tell me what they are saying?",
            "Where is the lamp located?",
            "What is the mood here?",
            "How does this make you feel?",
            "Is anything happening?",
            "Bananas are yellow?",
            "Which language is that?",
        ])
        .prop_map(String::from),
        1 => Just("NO_QUESTION".to_string()),
        1 => "[a-z ]{0,20}",
        1 => (0..10usize).prop_map(|i| format!("- {}", CanonicalQuestion::QUESTIONS[i].surface())),
    ]
}

fn attachments() -> impl Strategy<Value = AttachmentSet> {
    (any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(v, a, s)| {
        let mut set = AttachmentSet::new();
        if v {
            set = set.with(Modality::Vision, "scenes/avsd_2.json");
        }
        if a {
            set = set.with(Modality::Audio, "scenes/avsd_2.json");
        }
        if s {
            set = set.with(Modality::Spatial, "scenes/scanqa_2.json");
        }
        set
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn conservation_laws_hold_for_random_scripts(
        lines in prop::collection::vec(generation_line(), 0..12),
        attachments in attachments(),
        cap in 1..10usize,
    ) {
        let generation = lines.join("\n");
        let backend = ScriptedBackend::Echo(EchoScript::new(BTreeMap::from([("r".to_string(), generation.clone())])));
        let config = PipelineConfig { question_cap: cap, ..PipelineConfig::default() };
        let gold = ModalitySet::new();
        let trace = run_input(
            RunInput { record_id: "r", prompt: "p", gold: &gold, attachments: &attachments },
            &backend,
            &common::registry(),
            &config,
        ).unwrap();

        prop_assert_eq!(&trace.raw_generation, &generation);
        prop_assert!(trace.parsed.len() <= cap);

        let matched: Vec<_> = trace.parsed.iter().filter(|p| p.matched_task.is_some()).collect();
        prop_assert_eq!(trace.observations.len(), matched.len());
        for (obs, p) in trace.observations.iter().zip(&matched) {
            prop_assert_eq!(obs.question_index, p.question_index);
            prop_assert_eq!(Some(obs.task), p.matched_task);
        }

        if trace.parsed.is_empty() {
            prop_assert!(trace.activated_modalities.is_empty());
            prop_assert!(trace.observations.is_empty());
        }
        if !matched.is_empty() && matched.iter().all(|p| p.matched_task == Some(Task::SentimentAnalysis)) {
            prop_assert!(trace.activated_modalities.is_empty());
        }
        prop_assert!(!trace.activated_modalities.contains(&Modality::Text));
    }

    #[test]
    fn runs_are_reproducible(lines in prop::collection::vec(generation_line(), 0..6)) {
        let record = common::record("avsd:2");
        let backend = ScriptedBackend::Echo(EchoScript::new(BTreeMap::from([(record.id.clone(), lines.join("\n"))])));
        let registry = common::registry();
        let a = run(&record, &backend, &registry, &PipelineConfig::default()).unwrap();
        let b = run(&record, &backend, &registry, &PipelineConfig::default()).unwrap();
        prop_assert_eq!(
            serde_json::to_string(&a.without_timings()).unwrap(),
            serde_json::to_string(&b.without_timings()).unwrap()
        );
    }
}
