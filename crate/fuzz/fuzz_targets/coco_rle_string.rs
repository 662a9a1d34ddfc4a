#![no_main]

use libfuzzer_sys::fuzz_target;
use soba_core::mask::{decode_coco_counts, RleMask};

fuzz_target!(|data: &[u8]| {
    let _ = decode_coco_counts(data);
    if data.len() < 2 {
        return;
    }
    let (w, h) = (data[0] as u32 + 1, data[1] as u32 + 1);
    let Ok(s) = std::str::from_utf8(&data[2..]) else { return };
    if let Ok(rle) = RleMask::from_coco_string(w, h, s) {
        let again = RleMask::from_coco_string(w, h, &rle.to_coco_string()).expect("own output parses");
        assert_eq!(again, rle);
    }
});
