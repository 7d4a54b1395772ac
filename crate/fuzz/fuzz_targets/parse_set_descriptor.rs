#![no_main]

use hs_spectral::subspace::SetDescriptor;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(set) = text.parse::<SetDescriptor>() {
        // Display is a canonical form: it parses back to itself.
        let shown = set.to_string();
        let again: SetDescriptor = shown.parse().expect("canonical form parses");
        assert_eq!(again.to_string(), shown);
    }
});
