#![no_main]

use libfuzzer_sys::fuzz_target;
use switchlens_core::log::parse_line;
use switchlens_service::routes::body_lines;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(lines) = body_lines(text) {
        for (n, line) in lines {
            assert!(n >= 1);
            assert!(!line.contains('\n'));
            let _ = parse_line(&line);
        }
    }
});
