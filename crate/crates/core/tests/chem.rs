use lacuna_core::chem::{parse_smiles, strip_stereo, tokenize, write_smiles};
use lacuna_core::fixture::square_library;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn random_bytes_never_panic() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10_000 {
        let len = rng.random_range(0..40);
        let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let text = String::from_utf8_lossy(&bytes);
        let _ = tokenize(&text);
        if let Ok(m) = parse_smiles(&text) {
            let _ = write_smiles(&m);
        }
        let _ = strip_stereo(&text);
    }
}

const ALPHABET: &[&str] = &[
    "C", "c", "N", "n", "O", "S", "F", "Cl", "Br", "I", "(", ")", "=", "#", "1", "2", "%10", "[S+]", "[nH]", "[I+]",
    "[N+]", "/", "\\", "@", ".", "*", "[", "]", "+", "-",
];

#[test]
fn random_token_soup_never_panics() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut parsed = 0;
    for _ in 0..10_000 {
        let len = rng.random_range(1..25);
        let text: String = (0..len)
            .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())])
            .collect();
        if let Ok(m) = parse_smiles(&text) {
            parsed += 1;
            let again = parse_smiles(&write_smiles(&m)).expect("written SMILES parses");
            assert!(m.is_isomorphic_to(&again), "{text}");
        }
    }
    assert!(parsed > 0);
}

#[test]
fn fixture_library_round_trips() {
    for s in square_library() {
        let m = parse_smiles(&s).unwrap();
        assert_eq!(m.total_charge(), 1);
        assert!(m.is_isomorphic_to(&parse_smiles(&write_smiles(&m)).unwrap()));
    }
}

fn chain() -> impl Strategy<Value = String> {
    let atom = prop::sample::select(vec!["C", "N", "O", "S", "F", "Cl", "c1ccccc1", "C1CC1", "[S+](C)C"]);
    let bond = prop::sample::select(vec!["", "", "="]);
    prop::collection::vec((atom, bond, any::<bool>()), 1..8).prop_map(|parts| {
        let mut out = String::from("C");
        for (a, b, branch) in parts {
            let bond = if matches!(a, "F" | "Cl") || a.starts_with('c') || a.starts_with('[') {
                ""
            } else {
                b
            };
            if branch {
                out.push_str(&format!("({bond}{a})"));
            } else {
                out.push_str(bond);
                out.push_str(a);
            }
        }
        out
    })
}

proptest! {
    #[test]
    fn written_form_is_a_fixed_point(s in chain()) {
        if let Ok(m) = parse_smiles(&s) {
            let w = write_smiles(&m);
            let again = parse_smiles(&w).unwrap();
            prop_assert!(m.is_isomorphic_to(&again));
            prop_assert_eq!(write_smiles(&again), w);
        }
    }
}
