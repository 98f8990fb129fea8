use capgen_client::{Client, ClientError};
use capgen_core::api::{
    CaptionRequest, ErrorKind, EvaluateRequest, GenerateRequest, ParamsRequest, PrepRequest, TrainRequest,
};
use capgen_core::captioner::Architecture;
use capgen_core::data::Split;
use capgen_core::nn::Precision;
use capgen_core::training::TrainOptions;

async fn start() -> Client {
    let (addr, _handle) = capgen_server::spawn("127.0.0.1:0".parse().unwrap()).await.unwrap();
    Client::new(format!("http://{addr}/"))
}

#[tokio::test]
async fn health_and_params() {
    let client = start().await;
    assert_eq!(client.health().await.unwrap().status, "ok");
    let params = client
        .params(&ParamsRequest {
            layer_size: 512,
            vocab_size: 2539,
            image_size: 4096,
        })
        .await
        .unwrap();
    assert!((params.ratio - 8_099_307.0 / 7_847_915.0).abs() < 1e-12);
}

#[tokio::test]
async fn api_errors_carry_kind_and_status() {
    let client = start().await;
    let err = client
        .params(&ParamsRequest {
            layer_size: 0,
            vocab_size: 10,
            image_size: 4,
        })
        .await
        .unwrap_err();
    match err {
        ClientError::Api { status, error } => {
            assert!(status.is_client_error());
            assert_ne!(error.kind, ErrorKind::Internal);
        }
        other => panic!("unexpected {other}"),
    }
}

#[tokio::test]
async fn unreachable_server_is_http_error() {
    let client = Client::new("http://127.0.0.1:9");
    assert!(matches!(client.health().await, Err(ClientError::Http { .. })));
}

#[tokio::test]
async fn full_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let client = start().await;
    let data = dir.path().join("data");
    client
        .prep(&PrepRequest {
            dataset: "synth:16:3".into(),
            out: data.clone(),
            thresholds: vec![1, 2],
        })
        .await
        .unwrap();
    let dataset = data.to_str().unwrap().to_string();
    let job = client
        .train(&TrainRequest {
            dataset: dataset.clone(),
            out: dir.path().join("run"),
            architecture: Architecture::Inject,
            layer_size: 8,
            min_freq: 1,
            precision: Precision::F32,
            seeds: vec![7],
            options: TrainOptions {
                max_epochs: 2,
                ..TrainOptions::default()
            },
        })
        .await
        .unwrap();
    let mut epochs = Vec::new();
    let trained = client.wait_job(job, |p| epochs.push(p.record.epoch)).await.unwrap();
    assert_eq!(trained.runs.len(), 1);
    assert!(!epochs.is_empty());

    let checkpoint = dir.path().join("run").join(&trained.runs[0].checkpoint);
    let generated = client
        .generate(&GenerateRequest {
            checkpoint: checkpoint.clone(),
            dataset: dataset.clone(),
            split: Split::Val,
            beam: 2,
            max_len: 10,
            out: None,
        })
        .await
        .unwrap();
    assert!(generated.count > 0);
    let evaluated = client
        .evaluate(&EvaluateRequest {
            hypotheses: generated.hypotheses,
            dataset,
            min_freq: None,
            out: None,
        })
        .await
        .unwrap();
    assert!(evaluated.path.exists());

    let caption = client
        .caption(&CaptionRequest {
            checkpoint,
            feature: vec![0.5; 32],
            beam: 3,
            max_len: 10,
        })
        .await
        .unwrap();
    assert!(caption.log_prob <= 0.0);
}
