#![no_main]

use aqec::record::CodeRecord;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = CodeRecord::from_json(text) {
        if r.cutoff <= 8 {
            let _ = r.basis();
            let _ = r.pair();
        }
        let back = CodeRecord::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back.cutoff, r.cutoff);
    }
});
