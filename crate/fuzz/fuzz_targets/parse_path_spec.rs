#![no_main]

use hs_spectral::io::{parse_path_spec, PathSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = parse_path_spec(text) {
        let again: PathSpec = p.to_string().parse().expect("canonical form parses");
        assert_eq!(again, p);
    }
});
