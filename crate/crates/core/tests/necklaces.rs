use necklace_normal::necklace::{
    add_periodic, is_nested_perfect, is_nested_semi_perfect, search_class, NecklaceClass, Word,
};

#[test]
fn periodic_offsets_preserve_nested_perfection() {
    let class = NecklaceClass { k: 2, l: 2, base: 2, nested: true, semi: false };
    let found = search_class(class, 1 << 8).unwrap();
    assert!(found.iter().any(|w| w.body_text() == "00111001"));
    for w in &found {
        for z in ["00", "01", "10", "11"] {
            let z = Word::from_digit_str(2, z).unwrap();
            let shifted = add_periodic(w, &z).unwrap();
            assert!(is_nested_perfect(&shifted, 2, 2).unwrap());
            let back = add_periodic(&shifted, &z).unwrap();
            assert_eq!(&back, w);
        }
    }
    // and every non-member stays outside
    let all = search_class(NecklaceClass { k: 2, l: 2, base: 2, nested: false, semi: true }, 1 << 8).unwrap();
    for w in all.iter().filter(|w| !found.contains(w)) {
        let z = Word::from_digit_str(2, "01").unwrap();
        assert!(!is_nested_perfect(&add_periodic(w, &z).unwrap(), 2, 2).unwrap());
    }
}

#[test]
fn nested_semi_perfect_needs_half_length() {
    for (b, k, l) in [(2u16, 3usize, 1usize), (2, 4, 1), (3, 3, 1)] {
        let class = NecklaceClass { k, l, base: b, nested: true, semi: true };
        match search_class(class, 1 << 16) {
            Ok(found) => assert!(found.is_empty(), "b={b} k={k} l={l}"),
            Err(_) => assert!((b as u64).pow((l * (b as usize).pow(k as u32)) as u32) > 1 << 16),
        }
    }
}

#[test]
fn small_perfect_necklaces() {
    let one = search_class(NecklaceClass { k: 1, l: 1, base: 2, nested: false, semi: false }, 16).unwrap();
    let texts: Vec<String> = one.iter().map(Word::body_text).collect();
    assert_eq!(texts, ["01", "10"]);
    let two = search_class(NecklaceClass { k: 2, l: 1, base: 2, nested: false, semi: false }, 16).unwrap();
    assert!(two.iter().any(|w| w.body_text() == "0110"));
    // exactly the rotations of the binary de Bruijn word of order 2
    let db = Word::from_digit_str(2, "0011").unwrap();
    let mut rotations: Vec<Word> = (0..4).map(|s| db.rotated(s)).collect();
    rotations.sort_by_key(Word::body_text);
    assert_eq!(two, rotations);
    let nested: Vec<String> = two.iter().filter(|w| is_nested_semi_perfect(w, 2, 1).unwrap()).map(Word::body_text).collect();
    assert_eq!(nested, ["0110", "1001"]);
}
