#![no_main]

use aqec::config::parse_grid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = parse_grid(text) {
        assert!(!g.is_empty() && g.len() <= 1_000_000);
        assert!(g.iter().all(|v| v.is_finite()));
    }
});
