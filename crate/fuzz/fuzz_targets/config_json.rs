#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = optpred_cli::parse_config(text) {
        // Accepted configurations must validate without panicking.
        let _ = config.validate();
    }
});
