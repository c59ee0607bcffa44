#![no_main]

use libfuzzer_sys::fuzz_target;
use mbinception::graph::{load_checkpoint, save_checkpoint};

fuzz_target!(|data: &[u8]| {
    if let Ok(ckpt) = load_checkpoint(data) {
        // Accepted checkpoints survive a save/load cycle.
        let bytes = save_checkpoint(&ckpt);
        let again = load_checkpoint(&bytes).expect("saved checkpoint must load");
        assert_eq!(again.params, ckpt.params);
        assert_eq!(again.graph, ckpt.graph);
    }
});
