#![no_main]

use libfuzzer_sys::fuzz_target;
use soba_core::association::{pair_bundle, DetectionBundle, PairConfig, PairStrategy};

fuzz_target!(|data: &[u8]| {
    if let Ok(bundle) = DetectionBundle::from_slice(data) {
        for strategy in [
            PairStrategy::AssociatedMask,
            PairStrategy::OffsetPairing,
            PairStrategy::MainPlusAssociated,
        ] {
            let cfg = PairConfig {
                strategy,
                ..PairConfig::default()
            };
            let _ = pair_bundle(&bundle, &cfg);
        }
    }
});
