#![no_main]

use libfuzzer_sys::fuzz_target;
use rise::io::{ingest_bytes, IngestSpec};
use rise::Design;

fuzz_target!(|data: &[u8]| {
    if data.len() > 64 * 1024 {
        return;
    }
    // A NUL byte separates the response file from the candidate file.
    let cut = data.iter().position(|&b| b == 0).unwrap_or(data.len());
    let (response, rest) = data.split_at(cut);
    let candidates = rest.get(1..).unwrap_or(&[]);

    for design in [Design::Paired, Design::Unpaired] {
        let mut spec = IngestSpec::new("response.csv", design);
        spec.candidates_path = Some("candidates.tsv".into());
        if let Ok(d) = ingest_bytes(&spec, response, Some(candidates)) {
            assert_eq!(d.response().shape(), d.candidates()[0].values.shape());
        }
    }
});
