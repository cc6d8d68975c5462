//! Deterministic pseudo-fake synthesis and dataset assembly.

mod augment;
mod bundle_io;
pub mod faces;
mod manifest;
mod sample;

pub use augment::{augment, jpeg_round_trip, AugmentConfig};
pub use bundle_io::{read_bundle, write_bundle, BundleMeta, StoredBundle, BUNDLE_FILES};
pub use faces::{synthetic_face, write_face_corpus};
pub use manifest::{
    build_manifest, read_manifest, write_manifest, Excluded, Face, FaceStore, ManifestReport, RecipeMix,
};
pub use sample::{
    make_bi_sample, make_real_sample, make_sbi_sample, materialize, GroundTruthBundle, Recipe, SampleRecord,
    SynthConfig, ViewJitter,
};
