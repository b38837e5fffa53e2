#![no_main]

use libfuzzer_sys::fuzz_target;
use rsgame::model::{load_model, save_model};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(model) = load_model(text) else {
        return;
    };
    let saved = save_model(&model);
    let reloaded = load_model(&saved).expect("canonical output loads");
    assert_eq!(reloaded, model);
    assert_eq!(save_model(&reloaded), saved);
});
