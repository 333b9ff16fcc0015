#![no_main]

use libfuzzer_sys::fuzz_target;
use portopt::market_data::{parse_price_csv, prices_from_bytes, simple_returns, write_price_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(file) = parse_price_csv(data) else {
        return;
    };
    let tickers = file.tickers().to_vec();
    let Ok(table) = prices_from_bytes(data, &tickers) else {
        return;
    };
    // aligned tables survive a write/parse cycle unchanged
    let text = write_price_csv(&table);
    let again = prices_from_bytes(text.as_bytes(), &tickers).expect("re-reading written prices");
    assert_eq!(table, again);
    let _ = simple_returns(&table);
});
