//! Regenerates the shipped fixtures from the deterministic generator:
//! `fixtures/synthetic-120.json` and `fixtures/synonyms.json`.
//!
//! Run from anywhere: `cargo run -p eqalign --example regen_fixtures`.

use std::fs;
use std::path::Path;

use eqalign::synthpop::{fixture_json, synonyms_json, FIXTURE_SEED};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    fs::create_dir_all(&dir).expect("create fixtures dir");

    let dataset_path = dir.join("synthetic-120.json");
    fs::write(&dataset_path, fixture_json()).expect("write dataset fixture");
    println!("wrote {} (seed {FIXTURE_SEED})", dataset_path.display());

    let dict_path = dir.join("synonyms.json");
    fs::write(&dict_path, synonyms_json()).expect("write synonym dictionary");
    println!("wrote {}", dict_path.display());
}
