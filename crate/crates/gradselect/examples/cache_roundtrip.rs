//! The binary container: projected-batch caching, optimizer checkpoints,
//! and corpus export, all in one `GSEL` format.
//!
//! Run: `cargo run --release --example cache_roundtrip`

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gradselect::gradcore::container::{dump_projected_batch_file, load_projected_batch_file};
use gradselect::gradcore::{FactorPair, ProjectedSample};
use gradselect::linalg::Mat;
use gradselect::optstate::{AdamState, OptimizerCheckpoint, ProjectedMoment};
use gradselect::simkit::io::{export_corpus_file, import_corpus_file};
use gradselect::simkit::{gen_corpus, CorpusSpec};

fn main() {
    let dir = std::env::temp_dir().join("gradselect_cache_roundtrip");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    // 1. Projected-sample batch, the harness's per-step cache.
    let batch: Vec<ProjectedSample> = (0..5)
        .map(|id| ProjectedSample {
            sample_id: id,
            layers: vec![FactorPair::new(
                0,
                Mat::from_fn(6, 3, |_, _| rng.random::<f64>() - 0.5),
                Mat::from_fn(4, 3, |_, _| rng.random::<f64>() - 0.5),
            )
            .unwrap()],
        })
        .collect();
    let batch_path = dir.join("batch.gsel");
    dump_projected_batch_file(&batch_path, &batch).expect("dump");
    let loaded = load_projected_batch_file(&batch_path).expect("load");
    assert_eq!(batch, loaded);
    let bytes = std::fs::metadata(&batch_path).unwrap().len();
    println!(
        "projected batch: {} samples round-tripped through {bytes} bytes",
        batch.len()
    );

    // 2. Optimizer checkpoint.
    let mut adam = AdamState::new(12, 0.9, 0.999, 1e-8).unwrap();
    adam.t = 40;
    adam.m
        .iter_mut()
        .enumerate()
        .for_each(|(i, m)| *m = i as f64 * 0.01);
    adam.v
        .iter_mut()
        .enumerate()
        .for_each(|(i, v)| *v = i as f64 * 0.001);
    let mut pm = ProjectedMoment::new(&[(6, 4)], 0.999, 1e-8).unwrap();
    pm.t = 40;
    let ckpt_path = dir.join("optimizer.gsel");
    let ckpt = OptimizerCheckpoint {
        adam,
        projected: pm,
    };
    ckpt.save(&ckpt_path).expect("save");
    assert_eq!(OptimizerCheckpoint::load(&ckpt_path).expect("load"), ckpt);
    println!("optimizer checkpoint: t = {} restored exactly", ckpt.adam.t);

    // 3. Corpus export/import.
    let corpus = gen_corpus(
        5,
        &CorpusSpec {
            n: 40,
            target_size: 12,
            ..CorpusSpec::default()
        },
    )
    .unwrap();
    let corpus_path = dir.join("corpus.gsel");
    export_corpus_file(&corpus_path, &corpus.train, &corpus.target_set).expect("export");
    let (train, target) = import_corpus_file(&corpus_path).expect("import");
    assert_eq!(train, corpus.train);
    assert_eq!(target, corpus.target_set);
    println!(
        "corpus: {} train + {} target samples round-tripped",
        train.len(),
        target.len()
    );
    println!("\nall records share the GSEL magic, format version, and record kind.");
}
