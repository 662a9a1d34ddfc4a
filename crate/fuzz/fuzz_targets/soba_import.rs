#![no_main]

use libfuzzer_sys::fuzz_target;
use soba_core::dataset::{import_soba, validate_dataset, ImportOptions};

// Input: instance file, a NUL byte, then an optional association file.
fuzz_target!(|data: &[u8]| {
    let (inst, assoc) = match data.iter().position(|&b| b == 0) {
        Some(i) => (&data[..i], Some(&data[i + 1..])),
        None => (data, None),
    };
    for derive_objects in [false, true] {
        if let Ok(ds) = import_soba(inst, assoc, &ImportOptions { derive_objects }) {
            let _ = validate_dataset(&ds);
        }
    }
});
