#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok((file, scenario)) = hullscope::scenario_file::parse_scenario(text) {
            assert_eq!(file.n, scenario.n());
        }
    }
});
