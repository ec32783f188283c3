//! Backend selectors: `lai`, `mfr:<lexicon>`, `toy:<checkpoint>`,
//! `remote:<url>`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use lexnorm_core::backend::{LaiNormalizer, MfrNormalizer, Normalizer, ToyNormalizer};

use crate::formats::{read_checkpoint, read_lexicon, FormatError};
use crate::remote::{RemoteClient, RemoteConfig, RemoteError};

pub const REMOTE_URL_ENV: &str = "LEXNORM_REMOTE_URL";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Selector {
    Lai,
    Mfr(PathBuf),
    Toy(PathBuf),
    /// `None` defers to `LEXNORM_REMOTE_URL`.
    Remote(Option<String>),
}

#[derive(Debug, PartialEq, Eq)]
pub struct SelectorParseError(pub String);

impl fmt::Display for SelectorParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "invalid backend {:?}: expected lai, mfr:PATH, toy:PATH or remote[:URL]",
            self.0
        )
    }
}

impl std::error::Error for SelectorParseError {}

impl FromStr for Selector {
    type Err = SelectorParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SelectorParseError(s.into());
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind, arg) {
            ("lai", None) => Ok(Selector::Lai),
            ("mfr", Some(p)) if !p.is_empty() => Ok(Selector::Mfr(p.into())),
            ("toy", Some(p)) if !p.is_empty() => Ok(Selector::Toy(p.into())),
            ("remote", None) => Ok(Selector::Remote(None)),
            ("remote", Some(u)) if !u.is_empty() => Ok(Selector::Remote(Some(u.into()))),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Lai => f.write_str("lai"),
            Selector::Mfr(p) => write!(f, "mfr:{}", p.display()),
            Selector::Toy(p) => write!(f, "toy:{}", p.display()),
            Selector::Remote(Some(u)) => write!(f, "remote:{u}"),
            Selector::Remote(None) => f.write_str("remote"),
        }
    }
}

impl Selector {
    /// The selector used when none is given: remote if `env_url` is set,
    /// otherwise LAI.
    pub fn default_from(env_url: Option<String>) -> Selector {
        match env_url {
            Some(u) if !u.is_empty() => Selector::Remote(Some(u)),
            _ => Selector::Lai,
        }
    }
}

#[derive(Debug)]
pub enum BuildError {
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Format {
        path: PathBuf,
        source: FormatError,
    },
    MissingRemoteUrl,
    Remote(RemoteError),
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            BuildError::Format { path, source } => write!(f, "{}: {source}", path.display()),
            BuildError::MissingRemoteUrl => {
                write!(
                    f,
                    "remote backend needs a URL (remote:URL or {REMOTE_URL_ENV})"
                )
            }
            BuildError::Remote(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for BuildError {}

/// Options that only matter to some backends.
#[derive(Clone, Debug)]
pub struct BuildOptions {
    pub fold_case: bool,
    pub env_url: Option<String>,
    pub remote: RemoteConfig,
}

pub fn build(sel: &Selector, opts: &BuildOptions) -> Result<Box<dyn Normalizer>, BuildError> {
    let read = |path: &PathBuf| {
        std::fs::read_to_string(path).map_err(|source| BuildError::Io {
            path: path.clone(),
            source,
        })
    };
    Ok(match sel {
        Selector::Lai => Box::new(LaiNormalizer),
        Selector::Mfr(path) => {
            let lex = read_lexicon(&read(path)?, opts.fold_case).map_err(|source| {
                BuildError::Format {
                    path: path.clone(),
                    source,
                }
            })?;
            Box::new(MfrNormalizer::new(lex))
        }
        Selector::Toy(path) => {
            let model = read_checkpoint(&read(path)?).map_err(|source| BuildError::Format {
                path: path.clone(),
                source,
            })?;
            Box::new(ToyNormalizer::new(model))
        }
        Selector::Remote(url) => {
            let url = url
                .clone()
                .or_else(|| opts.env_url.clone().filter(|u| !u.is_empty()))
                .ok_or(BuildError::MissingRemoteUrl)?;
            let cfg = RemoteConfig {
                base_url: url,
                ..opts.remote.clone()
            };
            Box::new(RemoteClient::new(cfg).map_err(BuildError::Remote)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        for s in [
            "lai",
            "mfr:lex.tsv",
            "toy:/tmp/m.json",
            "remote:http://h:1",
            "remote",
        ] {
            let sel: Selector = s.parse().unwrap();
            assert_eq!(sel.to_string(), s);
        }
        assert_eq!(
            "remote:http://h:1/x".parse::<Selector>().unwrap(),
            Selector::Remote(Some("http://h:1/x".into()))
        );
        for bad in ["", "mfr", "mfr:", "lai:x", "beam:3"] {
            assert!(bad.parse::<Selector>().is_err(), "{bad}");
        }
    }

    #[test]
    fn env_default() {
        assert_eq!(Selector::default_from(None), Selector::Lai);
        assert_eq!(Selector::default_from(Some(String::new())), Selector::Lai);
        assert_eq!(
            Selector::default_from(Some("http://h:2".into())),
            Selector::Remote(Some("http://h:2".into()))
        );
    }

    #[test]
    fn remote_without_url_is_an_error() {
        let opts = BuildOptions {
            fold_case: true,
            env_url: None,
            remote: RemoteConfig::new("http://unused"),
        };
        assert!(matches!(
            build(&Selector::Remote(None), &opts),
            Err(BuildError::MissingRemoteUrl)
        ));
    }
}
