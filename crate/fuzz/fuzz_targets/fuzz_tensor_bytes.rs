#![no_main]

use libfuzzer_sys::fuzz_target;
use mbinception::tensor::Tensor;

fuzz_target!(|data: &[u8]| {
    if let Ok(tensor) = Tensor::from_bytes(data) {
        // Canonical re-encoding of an accepted tensor is the identity.
        assert_eq!(tensor.to_bytes(), data);
        assert!(tensor.data().iter().all(|v| v.is_finite()));
    }
});
