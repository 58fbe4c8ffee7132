#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use rise::io::ConfigFile;

fuzz_target!(|data: &str| {
    if data.len() > 16 * 1024 {
        return;
    }
    if let Ok(cfg) = ConfigFile::parse(data, Path::new("fuzz.conf")) {
        for key in cfg.keys() {
            assert!(cfg.raw(key).is_some());
            let _ = cfg.get::<f64>(key);
        }
    }
});
