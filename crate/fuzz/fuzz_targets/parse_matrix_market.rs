#![no_main]

use hs_spectral::io::{matrix_to_matrix_market, parse_matrix_market};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(t) = parse_matrix_market(text) {
        assert_eq!(
            parse_matrix_market(&matrix_to_matrix_market(&t)).unwrap(),
            t
        );
    }
});
