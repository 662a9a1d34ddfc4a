#![no_main]

use libfuzzer_sys::fuzz_target;
use soba_core::dataset::{compute_stats, validate_dataset, Dataset};

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = Dataset::from_slice(data) {
        let _ = validate_dataset(&ds);
        let _ = compute_stats(&ds);
        assert_eq!(Dataset::from_slice(&ds.to_json()).expect("own output parses"), ds);
    }
});
