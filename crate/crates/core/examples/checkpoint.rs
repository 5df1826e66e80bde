//! Trains a GCN, saves a checkpoint and reloads it into fresh parameters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use structlearn::data::{split_labels, synthetic};
use structlearn::graph::normalize_adjacency;
use structlearn::nnet::{
    gcn_forward, load_checkpoint, save_checkpoint, train_gcn, GcnParams, TrainConfig,
};

fn main() -> structlearn::Result<()> {
    let ds = synthetic::planted_partition(&Default::default(), 1)?;
    let split = split_labels(&ds.labels, ds.n_classes(), 20, 100, 0)?;
    let a = normalize_adjacency(&ds.graph);
    let x = ds.dense_features::<f64>();
    let model = train_gcn(
        &a,
        x.view(),
        &ds.labels,
        &split.train,
        &split.val,
        16,
        ds.n_classes(),
        &TrainConfig::gcn(),
    )?;
    println!("trained for {} epochs", model.epochs_run);

    let dir = std::env::temp_dir().join("structlearn-checkpoint");
    std::fs::create_dir_all(&dir).map_err(|e| structlearn::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let path = dir.join("gcn.bin");
    let manifest = save_checkpoint(&model.params, &path)?;
    println!("{}", serde_json::to_string(&manifest)?);

    let mut fresh = GcnParams::<f64>::glorot(
        ds.n_features(),
        16,
        ds.n_classes(),
        &mut ChaCha8Rng::seed_from_u64(99),
    );
    load_checkpoint(&mut fresh, &path)?;
    let before = gcn_forward(&model.params, &a, x.view(), None)?;
    let after = gcn_forward(&fresh, &a, x.view(), None)?;
    let drift = (&before - &after)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    println!("max probability drift after f32 round trip: {drift:.2e}");
    Ok(())
}
