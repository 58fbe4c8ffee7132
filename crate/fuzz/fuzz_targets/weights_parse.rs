#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use rise::io::parse_weights;

fuzz_target!(|data: &[u8]| {
    if data.len() > 64 * 1024 {
        return;
    }
    if let Ok((names, weights)) = parse_weights(data, Path::new("weights.csv")) {
        assert_eq!(names.len(), weights.len());
        assert!(weights.iter().all(|w| w.is_finite() && *w > 0.0));
    }
});
