#![no_main]

use libfuzzer_sys::fuzz_target;
use switchlens_core::Store;

fuzz_target!(|data: &[u8]| {
    let mut store = Store::in_memory();
    let Ok(report) = store.ingest(data) else { return };
    assert_eq!(report.accepted as u64, store.watermark());
    assert_eq!(report.rejected, report.rejections.len());

    // Exported lines replay into an identical store.
    let mut out = Vec::new();
    store.export(&mut out).unwrap();
    let mut again = Store::in_memory();
    let r = again.ingest(out.as_slice()).unwrap();
    assert_eq!(r.rejected, 0);
    assert_eq!(again.lines(), store.lines());
    let _ = store.raw_records();
    let _ = store.sessions();
});
