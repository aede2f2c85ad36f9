#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = serde_json::from_slice::<quantum_intervention::lindblad::LindbladGenerator>(data);
});
