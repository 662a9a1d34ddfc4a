#![no_main]

use libfuzzer_sys::fuzz_target;
use soba_core::eval::PredictionBundle;

fuzz_target!(|data: &[u8]| {
    if let Ok(bundle) = PredictionBundle::from_slice(data) {
        let _ = bundle.derived_instances();
        PredictionBundle::from_slice(&bundle.to_json()).expect("own output parses");
    }
});
