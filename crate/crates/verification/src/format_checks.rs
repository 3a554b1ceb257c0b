//! Text formats survive a write/read cycle unchanged.

use proptest::prelude::*;

use sparse_precoder::io::{
    read_channel, read_constraint_system, read_signatures, write_channel, write_constraint_system,
    write_signatures,
};
use sparse_precoder::signature::generate_regular_signatures;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constraint_systems_roundtrip(seed in any::<u64>()) {
        let inst = crate::random_instance(seed);
        let mut buf = Vec::new();
        write_constraint_system(&inst.system, &mut buf).unwrap();
        prop_assert_eq!(read_constraint_system(&buf[..]).unwrap(), inst.system);
    }

    #[test]
    fn signatures_and_channels_roundtrip(seed in any::<u64>(), k in 1usize..12, l in 1usize..6) {
        let n = 12;
        if let Ok(sig) = generate_regular_signatures(k, n, l, seed) {
            let mut buf = Vec::new();
            write_signatures(&sig, &mut buf).unwrap();
            prop_assert_eq!(read_signatures(&buf[..]).unwrap(), sig.clone());

            let taps = sparse_precoder::channel::TapProfile::new(4, 0.3).unwrap();
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            let ch = sparse_precoder::channel::generate_channel(k, n, &taps, &mut rng);
            let h = sparse_precoder::channel::effective_channel(&sig, &ch).unwrap();
            let mut buf = Vec::new();
            write_channel(&h, &mut buf).unwrap();
            prop_assert_eq!(read_channel(&buf[..]).unwrap(), h);
        }
    }
}
