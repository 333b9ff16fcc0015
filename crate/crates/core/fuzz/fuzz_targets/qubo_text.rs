#![no_main]

use libfuzzer_sys::fuzz_target;
use portopt::qubo::{parse_qubo_text, to_qubo_text};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(model) = parse_qubo_text(text) else {
        return;
    };
    let again = parse_qubo_text(&to_qubo_text(&model)).expect("re-reading written model");
    assert_eq!(model, again);
});
