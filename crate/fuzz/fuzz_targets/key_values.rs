#![no_main]

use aqec::config::{parse_key_values, search_config_from_text, search_config_to_text};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_key_values(text);
    if let Ok(c) = search_config_from_text(text) {
        let again = search_config_from_text(&search_config_to_text(&c)).expect("rendered config must parse");
        assert_eq!(again, c);
    }
});
