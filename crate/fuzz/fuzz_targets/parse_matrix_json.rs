#![no_main]

use hs_spectral::io::{matrix_to_json, parse_matrix, parse_matrix_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_matrix(text);
    if let Ok(t) = parse_matrix_json(text) {
        assert_eq!(parse_matrix_json(&matrix_to_json(&t)).unwrap(), t);
    }
});
