#![no_main]

use libfuzzer_sys::fuzz_target;
use rise::io::{ingest_bytes, write_dataset, IngestSpec};
use rise::Design;

fuzz_target!(|data: &[u8]| {
    if data.len() > 64 * 1024 {
        return;
    }
    // First byte picks the design; the rest is the file.
    let Some((&flag, body)) = data.split_first() else {
        return;
    };
    let design = if flag & 1 == 0 {
        Design::Unpaired
    } else {
        Design::Paired
    };
    let mut spec = IngestSpec::new("input.csv", design);
    spec.columns.response = Some("response".into());
    let Ok(parsed) = ingest_bytes(&spec, body, None) else {
        return;
    };

    // Anything accepted must survive a write and re-read unchanged.
    let mut out = Vec::new();
    if write_dataset(&parsed, &mut out, b',').is_ok() {
        let again = ingest_bytes(&spec, &out, None).expect("re-reading written output");
        assert_eq!(parsed, again);
    }
});
