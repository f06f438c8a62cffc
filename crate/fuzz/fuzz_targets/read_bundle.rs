#![no_main]

use libfuzzer_sys::fuzz_target;
use rdim::io::MatrixBundle;

fuzz_target!(|data: &[u8]| {
    if let Ok(bundle) = MatrixBundle::from_bytes(data) {
        // Anything accepted must survive a round trip unchanged.
        let again = MatrixBundle::from_bytes(&bundle.to_bytes()).expect("re-encoded bundle parses");
        assert_eq!(again.to_bytes(), bundle.to_bytes());
        let _ = bundle.to_model();
    }
});
