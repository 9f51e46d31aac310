#![no_main]

use libfuzzer_sys::fuzz_target;
use optpred::lattice::{parse_profile_csv, write_profile_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(profile) = parse_profile_csv(data) {
        // Whatever parses must survive a write/read round trip.
        let mut out = Vec::new();
        write_profile_csv(&profile, &mut out).unwrap();
        let again = parse_profile_csv(out.as_slice()).unwrap();
        assert_eq!(profile.c, again.c);
        assert_eq!(profile.stderr, again.stderr);
    }
});
