#![no_main]

use libfuzzer_sys::fuzz_target;
use mbinception::data::{parse_idx_images, parse_idx_labels, write_idx_images, write_idx_labels};

fuzz_target!(|data: &[u8]| {
    if let Ok(images) = parse_idx_images(data) {
        // Accepted input must re-encode to the same bytes.
        let bytes = write_idx_images(images.count, images.rows, images.cols, &images.pixels);
        assert_eq!(bytes, data);
    }
    if let Ok(labels) = parse_idx_labels(data) {
        assert_eq!(write_idx_labels(&labels), data);
    }
});
