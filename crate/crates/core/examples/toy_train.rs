//! Trains the toy detector on 200 synthetic faces (100 real, 100
//! self-blended) and reports held-out AUC and heatmap response per epoch.
//!
//! ```text
//! cargo run --release --example toy_train -- [epochs] [seed]
//! ```

use std::time::Instant;

use blendscope::model::{prepare_samples, train_toy, Hyper};
use blendscope::rng::mix;
use blendscope::synth::{synthetic_face, FaceStore, Recipe, SampleRecord, SynthConfig};

fn records(store: &mut FaceStore, faces: std::ops::Range<u64>, master: u64) -> Vec<SampleRecord> {
    faces
        .map(|k| {
            let (img, lm) = synthetic_face(64, k);
            let name = format!("face_{k:04}");
            store.insert(name.clone(), img, lm);
            let recipe = if k % 2 == 0 { Recipe::Real } else { Recipe::Sbi };
            SampleRecord {
                image_path: name.clone(),
                landmark_path: name,
                recipe,
                partner_path: None,
                seed: mix(master, k),
                label: recipe.label(),
            }
        })
        .collect()
}

fn main() -> blendscope::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut hyper = Hyper::default();
    if let Some(e) = args.next() {
        hyper.epochs = e.parse().expect("epochs must be an integer");
    }
    if let Some(s) = args.next() {
        hyper.seed = s.parse().expect("seed must be an integer");
    }

    let start = Instant::now();
    let mut store = FaceStore::new();
    let train_records = records(&mut store, 0..200, 1);
    let val_records = records(&mut store, 1000..1100, 2);
    let synth = SynthConfig {
        size: 64,
        ..SynthConfig::default()
    };
    let train = prepare_samples(&train_records, &store, &synth, hyper.hflip)?;
    let val = prepare_samples(&val_records, &store, &synth, false)?;

    let outcome = train_toy(&train, &val, &hyper)?;
    println!("epoch      lr      loss  val_auc  val_heat");
    for e in &outcome.log {
        println!(
            "{:>5} {:>7.4} {:>9.3} {:>8.4} {:>9.4}",
            e.epoch,
            e.lr,
            e.loss,
            e.val_auc.unwrap_or(f64::NAN),
            e.val_heat_at_points.unwrap_or(f64::NAN)
        );
    }
    println!("finished in {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
