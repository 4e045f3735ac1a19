use casefactor::mrf::{self, uai, Mrf};
use casefactor::oracle::cky::all_parses;
use casefactor::oracle::random::{random_grammar, random_mrf};
use casefactor::oracle::verify::{verify_mrf, verify_pcfg};
use casefactor::oracle::{self, check_structural_facts, Limits};
use casefactor::pcfg::{self, CompileOptions};
use casefactor::{inference, sexpr, CfdStore};

fn sentences(n: usize) -> Vec<Vec<&'static str>> {
    (0..1usize << n).map(|bits| (0..n).map(|i| if bits >> i & 1 == 1 { "b" } else { "a" }).collect()).collect()
}

#[test]
fn pcfg_matches_chart_parsing() {
    for seed in 0..10 {
        let g = random_grammar(seed, 5, 8, &["a", "b"]);
        for n in 1..=5 {
            for words in sentences(n) {
                let bad = verify_pcfg(&mut CfdStore::new(), &g, &words, true).unwrap();
                assert!(bad.is_empty(), "seed {seed} {words:?}: {bad:?}");
            }
        }
    }
}

#[test]
fn pruning_keeps_the_feasible_set() {
    for seed in 0..20 {
        let g = random_grammar(seed, 5, 8, &["a", "b"]);
        for words in sentences(4) {
            let mut s = CfdStore::new();
            let pruned = pcfg::compile(&mut s, &g, &words).unwrap();
            let full = pcfg::compile_with(&mut s, &g, &words, CompileOptions { prune: false }).unwrap();
            assert!(s.size(pruned.root) <= s.size(full.root));
            let lim = Limits::assignments_only(1 << 16);
            assert_eq!(
                oracle::enumerate_with(&s, pruned.root, lim).unwrap(),
                oracle::enumerate_with(&s, full.root, lim).unwrap()
            );
        }
    }
}

#[test]
fn parse_trees_roundtrip_through_assignments() {
    let mut checked = 0;
    for seed in 0..100 {
        let g = random_grammar(seed, 5, 8, &["a", "b"]);
        let n = 1 + (seed as usize % 8);
        let words: Vec<&str> = (0..n).map(|i| if (seed >> i) & 1 == 1 { "b" } else { "a" }).collect();
        let mut s = CfdStore::new();
        let c = pcfg::compile(&mut s, &g, &words).unwrap();
        let Ok(trees) = all_parses(&g, &words, 500) else { continue };
        for t in trees.iter().take(20) {
            let rho = pcfg::encode_parse(&c.scheme, t).unwrap();
            assert!(s.contains(c.root, &rho));
            assert_eq!(&pcfg::decode_parse(&c.scheme, &rho).unwrap(), t);
            checked += 1;
        }
    }
    assert!(checked > 50);
}

#[test]
fn compiled_forests_are_valid_and_reparse() {
    let g = pcfg::catalan();
    let mut s = CfdStore::new();
    let c = pcfg::compile(&mut s, &g, &["a"; 8]).unwrap();
    assert!(s.validate(c.root).is_empty());
    let mut fresh = CfdStore::new();
    let back = sexpr::parse(&mut fresh, &sexpr::print(&s, c.root)).unwrap();
    assert!(sexpr::same_structure(&s, c.root, &fresh, back));
}

#[test]
fn mrf_matches_enumeration() {
    for seed in 0..30 {
        let m = random_mrf(seed, 8, 3, 8);
        let bad = verify_mrf(&mut CfdStore::new(), &m).unwrap();
        assert!(bad.is_empty(), "seed {seed}: {bad:?}");
    }
}

#[test]
fn normalization_is_idempotent() {
    for seed in 0..1000 {
        let m = random_mrf(seed, 8, 3, 8);
        let once = m.normalize().unwrap();
        let twice = once.to_mrf().normalize().unwrap();
        assert_eq!(twice.terms, once.terms, "seed {seed}");
        assert!((twice.offset - once.offset).abs() <= 1e-12 * once.offset.abs().max(1.0));
    }
}

#[test]
fn uai_files_roundtrip() {
    for seed in 0..100 {
        let m = random_mrf(seed, 8, 3, 8);
        assert_eq!(uai::parse(&uai::write(&m)).unwrap(), m);
    }
}

#[test]
fn chains_have_width_two() {
    for n in 3..=10 {
        let mut m = Mrf::with_domain_sizes(&vec![2; n]);
        for i in 0..n - 1 {
            m.add_term(vec![i, i + 1], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        }
        let c = mrf::compile_mrf(&mut CfdStore::new(), &m).unwrap();
        assert_eq!(mrf::tree_width(&c.mrf), 2);
    }
}

#[test]
fn structural_facts_hold_on_compiled_instances() {
    let lim = Limits::assignments_only(1 << 16);
    for seed in 0..10 {
        let g = random_grammar(seed, 4, 7, &["a", "b"]);
        let mut s = CfdStore::new();
        let c = pcfg::compile(&mut s, &g, &["a", "b", "a", "a"]).unwrap();
        let r = oracle::structure::check_structural_facts_with(&s, c.root, Some(&c.energy), lim).unwrap();
        assert!(r.is_clean(), "seed {seed}: {:?}", r.counterexamples);

        let m = random_mrf(seed, 4, 3, 4);
        let c = mrf::compile_mrf(&mut s, &m).unwrap();
        let r = oracle::structure::check_structural_facts_with(&s, c.root, Some(&c.encoding.energy), lim).unwrap();
        assert!(r.is_clean(), "seed {seed}: {:?}", r.counterexamples);
    }
    let mut s = CfdStore::new();
    let c = pcfg::compile(&mut s, &pcfg::catalan(), &["a", "a"]).unwrap();
    assert!(check_structural_facts(&s, c.root, None).unwrap().is_clean());
    assert!((inference::z(&s, c.root, &c.energy)).abs() < 1e-12);
}
