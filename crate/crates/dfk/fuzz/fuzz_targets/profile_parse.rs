#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(profile) = dfk::params::Profile::parse(text) {
            // Anything that parses must validate deterministically and
            // round-trip through render.
            let _ = profile.validate();
            let rendered = profile.render();
            let again = dfk::params::Profile::parse(&rendered).unwrap();
            assert_eq!(again, profile);
        }
    }
});
