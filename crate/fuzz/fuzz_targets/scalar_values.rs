#![no_main]

use libfuzzer_sys::fuzz_target;
use switchlens_core::cues::CueType;
use switchlens_core::ratio::parse_exact;
use switchlens_core::{Discretization, Threshold, Timestamp};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(t) = s.parse::<Timestamp>() {
        assert_eq!(t.to_string().parse::<Timestamp>().unwrap(), t);
    }
    if let Ok(t) = s.parse::<Threshold>() {
        assert_eq!(t.to_string().parse::<Threshold>().unwrap(), t);
    }
    if let Ok(d) = s.parse::<Discretization>() {
        let _ = d.to_string().parse::<Discretization>();
    }
    let _ = parse_exact(s);
    let _ = s.parse::<CueType>();
});
