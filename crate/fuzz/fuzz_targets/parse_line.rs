#![no_main]

use libfuzzer_sys::fuzz_target;
use switchlens_core::log::{parse_line, to_line};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(record) = parse_line(text) {
        // A parsed record re-serializes to a line that parses to the same record.
        let line = to_line(&record);
        assert_eq!(parse_line(&line).as_ref(), Ok(&record));
    }
});
