#![no_main]

use libfuzzer_sys::fuzz_target;

// The DFK1 parsing surface must never panic or over-allocate on arbitrary
// bytes; every reader either produces a value or a structured error.
fuzz_target!(|data: &[u8]| {
    let _ = dfk::container::open(data);
    let _ = dfk::container::read_profile(data);
    let _ = dfk::container::read_public_key(data);
    if let Ok(profile) =
        dfk::params::Profile::parse(include_str!("../../profiles/toy.profile"))
    {
        let _ = dfk::container::read_ciphertexts(data, &profile);
    }
});
