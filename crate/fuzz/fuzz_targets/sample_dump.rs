#![no_main]

use libfuzzer_sys::fuzz_target;
use optpred::mcmc::dump::{decode_samples, encode_samples};

fuzz_target!(|data: &[u8]| {
    if let Ok(samples) = decode_samples(data) {
        assert_eq!(encode_samples(&samples), data);
    }
});
