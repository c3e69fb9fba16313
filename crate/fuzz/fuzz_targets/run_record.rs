#![no_main]

use aqec::record::RunRecord;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = RunRecord::from_json(text) {
        let back = RunRecord::from_json(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back.command, r.command);
    }
});
