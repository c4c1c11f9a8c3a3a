#![no_main]
use ensy::data::BoundPolicy;
use ensy::gmm::GaussianMixture;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(m) = GaussianMixture::from_json(s) else {
        return;
    };
    for x in [-1e6, -1.0, 0.0, 0.5, 1e6] {
        assert!(m.pdf(x) >= 0.0);
    }
    let _ = m.sample(16, None, BoundPolicy::None, 0);
    let again = GaussianMixture::from_json(&m.to_json()).expect("emitted mixture reparses");
    assert_eq!(again.components(), m.components());
});
