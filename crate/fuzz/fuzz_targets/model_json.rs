#![no_main]

use libfuzzer_sys::fuzz_target;
use rsgame::model::parse_model;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = parse_model(text) {
        // structurally valid documents must report violations, never panic
        let _ = model.violations();
        let _ = model.check();
    }
});
