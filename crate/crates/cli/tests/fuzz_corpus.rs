//! Replays the checked-in fuzz corpus through the parsers on stable.

use std::fs;
use std::path::PathBuf;

use optpred::lattice::{parse_profile_csv, write_profile_csv};
use optpred::mcmc::dump::{decode_samples, encode_samples};

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus for {target}");
    files
}

#[test]
fn config_corpus() {
    let mut accepted = 0;
    for (name, bytes) in corpus("config_json") {
        let text = std::str::from_utf8(&bytes).unwrap();
        if let Ok(config) = optpred_cli::parse_config(text) {
            accepted += 1;
            let valid = config.validate().is_ok();
            assert_eq!(valid, name != "invalid.json", "{name}");
        }
    }
    assert!(accepted >= 3);
}

#[test]
fn profile_corpus() {
    for (name, bytes) in corpus("profile_csv") {
        match parse_profile_csv(bytes.as_slice()) {
            Ok(p) => {
                let mut out = Vec::new();
                write_profile_csv(&p, &mut out).unwrap();
                let again = parse_profile_csv(out.as_slice()).unwrap();
                assert_eq!(p.c, again.c, "{name}");
                assert_eq!(p.stderr, again.stderr, "{name}");
            }
            Err(_) => assert!(name == "bad_header.csv" || name == "too_short.csv", "{name}"),
        }
    }
}

#[test]
fn sample_dump_corpus() {
    for (name, bytes) in corpus("sample_dump") {
        match decode_samples(&bytes) {
            Ok(s) => assert_eq!(encode_samples(&s), bytes, "{name}"),
            Err(_) => assert_eq!(name, "truncated.bin"),
        }
    }
}
