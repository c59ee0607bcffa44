#![no_main]

use libfuzzer_sys::fuzz_target;
use mbinception::data::{parse_cifar, CifarVariant};

fuzz_target!(|data: &[u8]| {
    for variant in [CifarVariant::Cifar10, CifarVariant::Cifar100] {
        if let Ok(records) = parse_cifar(data, variant) {
            assert_eq!(records.pixels.len(), records.labels.len() * 3072);
            let classes = variant.class_count();
            assert!(records.labels.iter().all(|&l| l < classes));
        }
    }
});
