mod support;

use lexnorm_core::augment::{
    corrupt_corpus, corrupt_sentence, corrupt_word, Channel, NoiseSpec, NoiseStream,
};
use proptest::prelude::*;
use rand::Rng;
use support::{random_string, rng};

const ALPHA: &[char] = &['a', 'e', 's', 'k', 'L', 'O', 'æ', 'ж', '1'];

fn all_channels(rate: f64, seed: u64) -> NoiseSpec {
    NoiseSpec::new(Channel::ALL.iter().map(|&c| (c, rate)).collect(), seed).unwrap()
}

fn sentences(seed: u64, n: usize) -> Vec<(String, String)> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let k = r.random_range(1..=8);
            let words: Vec<String> = (0..k).map(|_| random_string(&mut r, ALPHA, 1, 7)).collect();
            ("xx".to_string(), words.join(" "))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn deterministic_and_word_count_preserving(seed in any::<u64>(), rate in 0.0f64..=1.0) {
        let clean = sentences(seed, 8);
        let spec = all_channels(rate, seed);
        let a = corrupt_corpus(&clean, &spec);
        prop_assert_eq!(&a, &corrupt_corpus(&clean, &spec));
        for (p, (_, s)) in a.iter().zip(&clean) {
            prop_assert_eq!(p.src.split(' ').count(), s.split(' ').count());
            prop_assert_eq!(&p.tgt, s);
        }
    }

    #[test]
    fn word_length_bounds(w in "[aeskLOæж1]{1,8}", seed in any::<u64>(), rate in 0.0f64..=1.0) {
        // Channels firing individually, so k can be counted.
        let mut stream = NoiseStream::substream(seed, 0);
        let mut cur = w.clone();
        let mut fired = 0usize;
        for c in Channel::ALL {
            let one = NoiseSpec::new(vec![(c, rate)], seed).unwrap();
            let next = corrupt_word(&cur, &one, &mut stream);
            fired += usize::from(next != cur);
            cur = next;
        }
        let (n, len) = (w.chars().count(), cur.chars().count());
        prop_assert!(len >= n.saturating_sub(fired).max(1));
        prop_assert!(len <= n + 5 * fired);
    }

    #[test]
    fn zero_rate_is_identity(seed in any::<u64>()) {
        let clean = sentences(seed, 5);
        for p in corrupt_corpus(&clean, &all_channels(0.0, seed)) {
            prop_assert_eq!(p.src, p.tgt);
        }
    }

    #[test]
    fn sentence_order_does_not_matter(seed in any::<u64>()) {
        let clean = sentences(seed, 6);
        let spec = all_channels(0.4, seed);
        let forward = corrupt_corpus(&clean, &spec);
        for i in (0..clean.len()).rev() {
            prop_assert_eq!(&corrupt_sentence(i, &clean[i].0, &clean[i].1, &spec), &forward[i]);
        }
    }
}

#[test]
fn changed_fraction_band() {
    let clean = sentences(7, 1000);
    let words: Vec<(String, String)> = clean;
    let spec = all_channels(0.3, 42);
    let pairs = corrupt_corpus(&words, &spec);
    let (mut changed, mut total) = (0usize, 0usize);
    for p in &pairs {
        for (a, b) in p.src.split(' ').zip(p.tgt.split(' ')) {
            total += 1;
            changed += usize::from(a != b);
        }
    }
    let frac = changed as f64 / total as f64;
    assert!((0.2..=0.9).contains(&frac), "changed fraction {frac}");
}

#[test]
fn case_flip_and_keyboard_skip_uncased_non_latin() {
    let spec = NoiseSpec::new(
        vec![(Channel::KeyboardSub, 1.0), (Channel::CaseFlip, 1.0)],
        1,
    )
    .unwrap();
    let mut stream = NoiseStream::substream(1, 0);
    assert_eq!(corrupt_word("日本", &spec, &mut stream), "日本");
}
