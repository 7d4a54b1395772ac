#![no_main]

use hs_spectral::io::parse_grid_spec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(g) = parse_grid_spec(text) {
        assert!(g.re_min < g.re_max && g.im_min < g.im_max && g.h > 0.0);
    }
});
