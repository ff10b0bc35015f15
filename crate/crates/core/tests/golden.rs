use std::path::PathBuf;

use regmdp::io::{mdp_from_str, mdp_to_string};
use regmdp::random_mdp;

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/random_mdp_s3_a2_seed7.json")
}

/// Set `REGMDP_BLESS=1` to regenerate the reference file.
#[test]
fn seeded_instance_matches_golden_file() {
    let m = random_mdp(3, 2, 0.9, 7).unwrap();
    let text = mdp_to_string(&m).unwrap();
    let path = golden_path();
    if std::env::var_os("REGMDP_BLESS").is_some() {
        std::fs::write(&path, &text).unwrap();
    }
    let stored = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, stored);
    assert_eq!(mdp_from_str(&stored).unwrap(), m);
}

#[test]
fn thousand_seeds_are_valid() {
    for seed in 0..1000u64 {
        let ns = 1 + (seed % 7) as usize;
        let na = 1 + (seed % 4) as usize;
        let m = random_mdp(ns, na, 0.95, seed).unwrap();
        assert!(m.validate().is_ok(), "seed {seed}");
    }
}
