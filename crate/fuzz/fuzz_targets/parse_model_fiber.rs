#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(fiber) = hullscope::scenario_file::parse_model_fiber(text) {
            let _ = fiber.defining_value(fiber.center());
        }
    }
});
