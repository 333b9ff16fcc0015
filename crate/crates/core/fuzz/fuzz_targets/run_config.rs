#![no_main]

use libfuzzer_sys::fuzz_target;
use portopt::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = RunConfig::from_json(text) else {
        return;
    };
    if config.validate_values().is_ok() {
        let _ = config.objective_specs();
        let _ = config.backtest_config(config.seed).validate();
    }
});
