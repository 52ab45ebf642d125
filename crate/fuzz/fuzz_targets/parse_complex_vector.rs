#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = hullscope::scenario_file::parse_complex_vector(text);
        let _ = hullscope::scenario_file::parse_complex_scalar(text);
    }
});
