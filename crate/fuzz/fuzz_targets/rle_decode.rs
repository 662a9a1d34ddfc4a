#![no_main]

use libfuzzer_sys::fuzz_target;
use soba_core::mask::RleMask;

// First four bytes pick the size, the rest are little-endian u16 runs.
fuzz_target!(|data: &[u8]| {
    if data.len() < 4 {
        return;
    }
    let w = u16::from_le_bytes([data[0], data[1]]) as u32 % 256;
    let h = u16::from_le_bytes([data[2], data[3]]) as u32 % 256;
    let counts: Vec<u32> = data[4..]
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]) as u32)
        .collect();
    for rle in [RleMask::new(w, h, counts.clone()), RleMask::normalized(w, h, &counts)] {
        if let Ok(rle) = rle {
            let mask = rle.decode().expect("validated RLE decodes");
            assert_eq!(mask.area(), rle.area());
            assert_eq!(RleMask::encode(&mask), rle);
        }
    }
});
