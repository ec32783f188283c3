//! A small, fully synthetic bilingual normalization task.
//!
//! Sentences are random word sequences over a closed vocabulary per language.
//! Some words are swapped for a slang spelling, then every raw token passes
//! through the spelling-noise channels. Gold annotations are exact by
//! construction, so the whole pipeline (train, decode, align, score) can be
//! measured end to end in a few minutes on a single core.

use std::collections::BTreeMap;

use lexnorm_core::augment::{corrupt_sentence, Channel, NoiseSpec};
use lexnorm_core::backend::{
    check_language, BackendError, Capability, LangSupport, MfrNormalizer, Normalizer, ToyNormalizer,
};
use lexnorm_core::baselines::LexiconBuilder;
use lexnorm_core::pipeline::{evaluate_with, PipelineError};
use lexnorm_core::seq2seq::{train, EpochStats, Seq2SeqError, ToyModel, TrainConfig};
use lexnorm_core::{to_sentence_pairs, AlignConfig, AnnotatedToken, Corpus, EvalReport, Sentence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::formats::report_value;

/// Clean form and slang form. A clean form with a space is a 1-to-N case.
const EN_SLANG: [(&str, &str); 50] = [
    ("you", "u"),
    ("are", "r"),
    ("great", "gr8"),
    ("see", "c"),
    ("why", "y"),
    ("be", "b"),
    ("for", "4"),
    ("before", "b4"),
    ("later", "l8r"),
    ("tonight", "2nite"),
    ("tomorrow", "tmrw"),
    ("please", "pls"),
    ("thanks", "thx"),
    ("people", "ppl"),
    ("because", "cuz"),
    ("really", "rly"),
    ("love", "luv"),
    ("what", "wat"),
    ("your", "ur"),
    ("with", "w"),
    ("okay", "ok"),
    ("know", "kno"),
    ("just", "jus"),
    ("going", "goin"),
    ("something", "smth"),
    ("nothing", "nuthin"),
    ("about", "abt"),
    ("probably", "prob"),
    ("message", "msg"),
    ("good", "gud"),
    ("the", "da"),
    ("that", "dat"),
    ("this", "dis"),
    ("they", "dey"),
    ("them", "dem"),
    ("there", "dere"),
    ("night", "nite"),
    ("right", "rite"),
    ("little", "lil"),
    ("boy", "boi"),
    ("girl", "gurl"),
    ("someone", "sum1"),
    ("everyone", "every1"),
    ("seriously", "srsly"),
    ("whatever", "wateva"),
    ("i am", "im"),
    ("do not", "dont"),
    ("can not", "cant"),
    ("want to", "wanna"),
    ("got to", "gotta"),
];

const EN_PLAIN: [&str; 40] = [
    "i", "we", "he", "she", "it", "is", "was", "have", "had", "go", "come", "home", "time", "day",
    "work", "school", "friend", "happy", "sad", "now", "here", "not", "so", "very", "all", "can",
    "will", "get", "make", "like", "think", "back", "out", "new", "old", "big", "fun", "game",
    "food", "music",
];

const DA_SLANG: [(&str, &str); 50] = [
    ("også", "osse"),
    ("noget", "noe"),
    ("ikke", "ik"),
    ("hvad", "hva"),
    ("jeg", "jg"),
    ("det", "d"),
    ("er", "e"),
    ("med", "m"),
    ("og", "o"),
    ("hvordan", "hvordn"),
    ("hvorfor", "hvrfor"),
    ("sådan", "sån"),
    ("selvfølgelig", "selvf"),
    ("måske", "mske"),
    ("weekend", "wknd"),
    ("venner", "vennr"),
    ("lige", "li"),
    ("nogen", "nogn"),
    ("godt", "gdt"),
    ("rigtig", "rigti"),
    ("skal", "ska"),
    ("vil", "vl"),
    ("kan", "ka"),
    ("har", "ha"),
    ("hjem", "hjm"),
    ("morgen", "mrgn"),
    ("aften", "aftn"),
    ("kærlighed", "kærlighd"),
    ("sjovt", "sjov"),
    ("snakke", "snakk"),
    ("tilbage", "tilbag"),
    ("mange", "mang"),
    ("kommer", "kommr"),
    ("ved", "ve"),
    ("okay", "ok"),
    ("hyggeligt", "hyggelit"),
    ("dejlig", "dejli"),
    ("fedt", "fet"),
    ("nu", "nuu"),
    ("bare", "bar"),
    ("meget", "mega"),
    ("tak", "tk"),
    ("hej", "hejj"),
    ("mig", "mei"),
    ("dig", "dei"),
    ("i dag", "idag"),
    ("i morgen", "imorgen"),
    ("i aften", "iaften"),
    ("har du", "harru"),
    ("er du", "erru"),
];

const DA_PLAIN: [&str; 40] = [
    "hun", "han", "vi", "de", "en", "et", "at", "på", "til", "fra", "dag", "tid", "hus", "skole",
    "arbejde", "mad", "musik", "film", "spil", "by", "bil", "stor", "lille", "ny", "gammel",
    "glad", "se", "gå", "komme", "lave", "spise", "drikke", "sove", "læse", "ven", "hund", "kat",
    "vand", "kaffe", "sommer",
];

pub const LANGS: [&str; 2] = ["da", "en"];

#[derive(Clone, Debug)]
pub struct DeskConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    /// Probability that a word with a slang form is written in slang.
    pub slang_rate: f64,
    pub noise: Vec<(Channel, f64)>,
    pub min_words: usize,
    pub max_words: usize,
    pub train: TrainConfig,
}

impl Default for DeskConfig {
    fn default() -> Self {
        DeskConfig::with_seed(42)
    }
}

impl DeskConfig {
    /// The standard experiment; `seed` drives data generation, noise,
    /// initialization and shuffling.
    pub fn with_seed(seed: u64) -> Self {
        DeskConfig {
            seed,
            n_train: 2000,
            n_dev: 200,
            n_test: 200,
            slang_rate: 0.5,
            noise: vec![
                (Channel::CharSwap, 0.2),
                (Channel::VowelDrop, 0.2),
                (Channel::Elongate, 0.2),
            ],
            min_words: 3,
            max_words: 6,
            train: TrainConfig {
                seed,
                learning_rate: 0.003,
                dropout: 0.2,
                patience: 30,
                max_epochs: 143,
                ..TrainConfig::default()
            },
        }
    }
}

/// One corpus per language for each split, languages in [`LANGS`] order.
#[derive(Clone, Debug)]
pub struct DeskData {
    pub train: Vec<Corpus>,
    pub dev: Vec<Corpus>,
    pub test: Vec<Corpus>,
}

fn lexicon_for(
    lang: &str,
) -> (
    &'static [(&'static str, &'static str)],
    &'static [&'static str],
) {
    match lang {
        "en" => (&EN_SLANG, &EN_PLAIN),
        _ => (&DA_SLANG, &DA_PLAIN),
    }
}

fn sentence(
    rng: &mut ChaCha8Rng,
    cfg: &DeskConfig,
    spec: &NoiseSpec,
    lang: &str,
    id: usize,
) -> Sentence {
    let (slang, plain) = lexicon_for(lang);
    let n = rng.random_range(cfg.min_words..=cfg.max_words);
    let mut raw = Vec::with_capacity(n);
    let mut norm = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.random_range(0..slang.len() + plain.len());
        if k < slang.len() {
            let (clean, informal) = slang[k];
            let use_slang = rng.random_bool(cfg.slang_rate) || clean.contains(' ');
            raw.push(if use_slang { informal } else { clean });
            norm.push(clean);
        } else {
            raw.push(plain[k - slang.len()]);
            norm.push(plain[k - slang.len()]);
        }
    }
    let noisy = corrupt_sentence(id, lang, &raw.join(" "), spec).src;
    let tokens = noisy
        .split(' ')
        .zip(&norm)
        .map(|(r, n)| AnnotatedToken::new(r, *n).expect("generated tokens are well formed"))
        .collect();
    Sentence::new(tokens, lang, id).expect("generated sentences are non-empty")
}

/// Generates the three splits; sentence `i` of the whole run is written in
/// `LANGS[i % 2]`.
pub fn build_data(cfg: &DeskConfig) -> DeskData {
    let spec = NoiseSpec::new(cfg.noise.clone(), cfg.seed).expect("noise rates are in range");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    let mut id = 0usize;
    let mut split = |n: usize| {
        let mut per_lang: Vec<Vec<Sentence>> = vec![Vec::new(); LANGS.len()];
        for _ in 0..n {
            let l = id % LANGS.len();
            per_lang[l].push(sentence(&mut rng, cfg, &spec, LANGS[l], id));
            id += 1;
        }
        LANGS
            .iter()
            .zip(per_lang)
            .map(|(lang, s)| Corpus::new(*lang, s))
            .collect::<Vec<_>>()
    };
    let train = split(cfg.n_train);
    let dev = split(cfg.n_dev);
    let test = split(cfg.n_test);
    DeskData { train, dev, test }
}

#[derive(Debug)]
pub enum DeskError {
    Train(Seq2SeqError),
    Pipeline(PipelineError),
}

impl std::fmt::Display for DeskError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DeskError::Train(e) => write!(f, "training failed: {e}"),
            DeskError::Pipeline(e) => write!(f, "evaluation failed: {e}"),
        }
    }
}

impl std::error::Error for DeskError {}

#[derive(Debug)]
pub struct DeskOutcome {
    pub lai: EvalReport,
    pub mfr: EvalReport,
    pub toy: EvalReport,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub model: ToyModel,
}

/// One MFR lexicon per language, each trained on that language only.
struct PerLanguage(BTreeMap<String, MfrNormalizer>);

impl Normalizer for PerLanguage {
    fn capability(&self) -> Capability {
        Capability {
            name: "mfr".into(),
            langs: LangSupport::Only(self.0.keys().cloned().collect()),
        }
    }

    fn normalize_batch(
        &self,
        lang: &str,
        sentences: &[String],
    ) -> Result<Vec<String>, BackendError> {
        check_language(self, lang)?;
        self.0[lang].normalize_batch(lang, sentences)
    }
}

/// Token accuracy pooled over every language.
pub fn pooled_accuracy(report: &EvalReport) -> f64 {
    report.pooled().accuracy().unwrap_or(0.0)
}

/// ERR of the pooled counts.
pub fn pooled_err(report: &EvalReport) -> Option<f64> {
    report.pooled().err()
}

/// Builds the data, trains on train/dev, and scores LAI, MFR and the trained
/// model on test through the same decode, align and score path.
pub fn run(cfg: &DeskConfig) -> Result<DeskOutcome, DeskError> {
    let data = build_data(cfg);
    let pairs = |cs: &[Corpus]| cs.iter().flat_map(to_sentence_pairs).collect::<Vec<_>>();
    let trained =
        train(&pairs(&data.train), &pairs(&data.dev), &cfg.train).map_err(DeskError::Train)?;

    let mfr = PerLanguage(
        data.train
            .iter()
            .map(|c| {
                let mut lex = LexiconBuilder::new(true);
                lex.add_corpus(c);
                (c.lang().to_string(), MfrNormalizer::new(lex.build()))
            })
            .collect(),
    );
    let toy = ToyNormalizer::new(trained.model.clone());
    let align = AlignConfig::default();
    let score = |n: &dyn Normalizer| {
        evaluate_with(n, &data.test, &align, true).map_err(DeskError::Pipeline)
    };
    Ok(DeskOutcome {
        lai: score(&lexnorm_core::backend::LaiNormalizer)?,
        mfr: score(&mfr)?,
        toy: score(&toy)?,
        history: trained.history,
        best_epoch: trained.best_epoch,
        model: trained.model,
    })
}

/// Reports of all three systems plus the training history, as pretty JSON.
pub fn report_json(o: &DeskOutcome) -> String {
    let history: Vec<serde_json::Value> = o
        .history
        .iter()
        .map(|h| {
            serde_json::json!({
                "epoch": h.epoch,
                "train_loss": h.train_loss,
                "dev_accuracy": h.dev_accuracy,
                "dev_char_accuracy": h.dev_char_accuracy,
            })
        })
        .collect();
    let doc = serde_json::json!({
        "lai": report_value(&o.lai, "lai", true),
        "mfr": report_value(&o.mfr, "mfr", true),
        "toy": report_value(&o.toy, "toy", true),
        "best_epoch": o.best_epoch,
        "history": history,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("reports always serialize");
    s.push('\n');
    s
}
