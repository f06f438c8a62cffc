#![no_main]

use libfuzzer_sys::fuzz_target;
use rdim::io::IdxTensor;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = IdxTensor::from_bytes(data) {
        assert_eq!(t.to_bytes(), data);
        let _ = t.to_columns(true);
        let _ = t.labels();
    }
});
