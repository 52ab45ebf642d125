#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(f) = hullscope::hardy::analytic_map_from_json(text) {
            let _ = hullscope::hardy::evaluate(&f, hullscope::C64::new(0.3, -0.2));
        }
    }
});
