//! Line-oriented experiment configuration.
//!
//! Grammar:
//!
//! ```text
//! file    := line*
//! line    := ws* (entry)? ws* ('#' any*)?
//! entry   := key ws* '=' ws* value
//! key     := ident ('.' ident)*
//! value   := item (',' item)*
//! ```
//!
//! Values are scalars or comma lists. Unknown and repeated keys are errors.
//! An integer list may contain one ellipsis (`…` or `...`) preceded by at
//! least three terms and followed by the last term: `8,16,32,…,256`
//! expands geometrically and `10,20,30,...,100` arithmetically.
//!
//! | key | value | default |
//! |-----|-------|---------|
//! | `net.file` | network file | |
//! | `net.widths` | `k0,k1,…,n` | |
//! | `net.init` | `gaussian` or `lowpass` | `gaussian` |
//! | `net.lowpass_rows` | DFT rows of the lowpass prior | `8` |
//! | `net.seed` | integer | `0` |
//! | `transform` | `identity`, `dft1d`, `dft2d:HxW`, `hadamard`, `dense:FILE` | `dft1d` |
//! | `schemes` | list of `uniform`, `adapted`, `custom:FILE` | `uniform,adapted` |
//! | `m` | ascending list | powers of two from 8 to `n` |
//! | `trials` | integer | `64` |
//! | `noise` | noise level per measurement | `0` |
//! | `signal.in_range` | `true` or `false` | `true` |
//! | `signal.file` | vector file for out-of-range signals | |
//! | `seed` | integer | `0` |
//! | `output.dir` | directory | `results` |
//! | `coherence.method` | `exact` or `heuristic` | `heuristic` |
//! | `coherence.batch` | heuristic batch size | `1000` |
//! | `sampling.blocks` | per-block sampling (outside the theory) | `1` |
//! | `recovery.restarts` | integer | `4` |
//! | `recovery.iterations` | integer | `20000` |
//! | `recovery.lr` | float | `0.003` |
//! | `recovery.beta1` / `recovery.beta2` | float | `0.9` / `0.999` |
//! | `recovery.weight_decay` | float | `0` |
//! | `recovery.preconditioned` | bool | `true` |
//! | `recovery.early_stop` | objective threshold or `none` | `none` |
//!
//! Exactly one of `net.file` and `net.widths` is required. Relative paths
//! are resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::recovery::RecoveryConfig;
use crate::transform::TransformSpec;

#[derive(Clone, Debug, PartialEq)]
pub enum NetSource {
    File(PathBuf),
    Gaussian {
        widths: Vec<usize>,
        seed: u64,
    },
    Lowpass {
        widths: Vec<usize>,
        rows: usize,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Scheme {
    Uniform,
    Adapted,
    /// Probabilities read from a CSV file.
    Custom(PathBuf),
}

impl Scheme {
    pub fn label(&self) -> String {
        match self {
            Scheme::Uniform => "uniform".into(),
            Scheme::Adapted => "adapted".into(),
            Scheme::Custom(p) => format!(
                "custom:{}",
                p.file_stem()
                    .map(|s| s.to_string_lossy())
                    .unwrap_or_default()
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoherenceChoice {
    Exact,
    Heuristic { batch: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub net: NetSource,
    pub transform: TransformSpec,
    pub schemes: Vec<Scheme>,
    /// Empty means the default grid for the network's `n`.
    pub m_grid: Vec<usize>,
    pub trials: usize,
    pub noise: f64,
    pub in_range: bool,
    pub signal_file: Option<PathBuf>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub coherence: CoherenceChoice,
    pub blocks: usize,
    pub recovery: RecoveryConfig<f64>,
}

impl ExperimentConfig {
    /// Config with every default and the given network.
    pub fn with_net(net: NetSource) -> Self {
        Self {
            net,
            transform: TransformSpec::Dft1d,
            schemes: vec![Scheme::Uniform, Scheme::Adapted],
            m_grid: Vec::new(),
            trials: 64,
            noise: 0.0,
            in_range: true,
            signal_file: None,
            seed: 0,
            output_dir: PathBuf::from("results"),
            coherence: CoherenceChoice::Heuristic { batch: 1000 },
            blocks: 1,
            recovery: RecoveryConfig::default(),
        }
    }

    /// The m grid, with the default (powers of two from 8 up to `n`)
    /// substituted when none was given.
    pub fn m_grid_for(&self, n: usize) -> Vec<usize> {
        if !self.m_grid.is_empty() {
            return self.m_grid.clone();
        }
        let mut grid = Vec::new();
        let mut m = 8;
        while m <= n {
            grid.push(m);
            m *= 2;
        }
        if grid.is_empty() {
            grid.push(n);
        }
        grid
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("at least one scheme is required".into()));
        }
        if self.m_grid.contains(&0) {
            return Err(Error::Config("m = 0 is not allowed".into()));
        }
        if self.m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("m grid must be strictly ascending".into()));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(Error::Config(format!(
                "noise must be nonnegative, got {}",
                self.noise
            )));
        }
        if !self.in_range && self.signal_file.is_none() {
            return Err(Error::Config(
                "out-of-range experiments need signal.file".into(),
            ));
        }
        if self.blocks == 0 {
            return Err(Error::Config("sampling.blocks must be at least 1".into()));
        }
        if let Some(&m) = self.m_grid.iter().find(|&&m| m % self.blocks != 0) {
            return Err(Error::Config(format!(
                "m = {m} is not a multiple of sampling.blocks = {}",
                self.blocks
            )));
        }
        if let CoherenceChoice::Heuristic { batch } = self.coherence {
            if batch < 2 {
                return Err(Error::Config("coherence.batch must be at least 2".into()));
            }
        }
        self.recovery.validate()
    }
}

const KEYS: &[&str] = &[
    "net.file",
    "net.widths",
    "net.init",
    "net.lowpass_rows",
    "net.seed",
    "transform",
    "schemes",
    "m",
    "trials",
    "noise",
    "signal.in_range",
    "signal.file",
    "seed",
    "output.dir",
    "coherence.method",
    "coherence.batch",
    "sampling.blocks",
    "recovery.restarts",
    "recovery.iterations",
    "recovery.lr",
    "recovery.beta1",
    "recovery.beta2",
    "recovery.weight_decay",
    "recovery.preconditioned",
    "recovery.early_stop",
];

fn syntax(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn valid_key(key: &str) -> bool {
    key.split('.').all(|part| {
        !part.is_empty()
            && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            && !part.starts_with(|c: char| c.is_ascii_digit())
    })
}

/// Reads `path`; relative paths inside are resolved against its directory.
pub fn parse_config_file(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_config(&text, base)
}

/// Parses config text; relative paths are resolved against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<ExperimentConfig> {
    let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| syntax(line_no, "expected 'key = value'"))?;
        let (key, value) = (key.trim(), value.trim());
        if !valid_key(key) {
            return Err(syntax(line_no, format!("invalid key '{key}'")));
        }
        if !KEYS.contains(&key) {
            return Err(syntax(line_no, format!("unknown key '{key}'")));
        }
        if value.is_empty() {
            return Err(syntax(line_no, format!("missing value for '{key}'")));
        }
        if let Some((first, _)) = entries.insert(key, (line_no, value)) {
            return Err(syntax(
                line_no,
                format!("duplicate key '{key}' (first set on line {first})"),
            ));
        }
    }
    let get = |k: &str| entries.get(k).copied();
    let path = |v: &str| base.join(v);

    let seed_of = |k: &str| -> Result<u64> { get(k).map_or(Ok(0), |(l, v)| scalar(l, k, v)) };
    let net = match (get("net.file"), get("net.widths")) {
        (Some(_), Some((l, _))) => {
            return Err(syntax(l, "net.file and net.widths are mutually exclusive"))
        }
        (None, None) => {
            return Err(Error::Config(
                "one of net.file or net.widths is required".into(),
            ))
        }
        (Some((l, v)), None) => {
            for k in ["net.init", "net.lowpass_rows", "net.seed"] {
                if let Some((l2, _)) = get(k) {
                    return Err(syntax(
                        l2,
                        format!("'{k}' needs net.widths, not net.file (line {l})"),
                    ));
                }
            }
            NetSource::File(path(v))
        }
        (None, Some((l, v))) => {
            let widths = int_list(l, v)?;
            let seed = seed_of("net.seed")?;
            match get("net.init") {
                None | Some((_, "gaussian")) => {
                    if let Some((l2, _)) = get("net.lowpass_rows") {
                        return Err(syntax(l2, "net.lowpass_rows needs net.init = lowpass"));
                    }
                    NetSource::Gaussian { widths, seed }
                }
                Some((_, "lowpass")) => NetSource::Lowpass {
                    widths,
                    rows: get("net.lowpass_rows")
                        .map_or(Ok(8), |(l, v)| scalar(l, "net.lowpass_rows", v))?,
                    seed,
                },
                Some((l, other)) => {
                    return Err(syntax(
                        l,
                        format!("net.init must be gaussian or lowpass, got '{other}'"),
                    ))
                }
            }
        }
    };
    let mut cfg = ExperimentConfig::with_net(net);

    if let Some((l, v)) = get("transform") {
        cfg.transform = match v.strip_prefix("dense:") {
            Some(p) if !p.is_empty() => TransformSpec::Dense(path(p)),
            _ => v.parse().map_err(|e: Error| syntax(l, e.to_string()))?,
        };
    }
    if let Some((l, v)) = get("schemes") {
        cfg.schemes = v
            .split(',')
            .map(|s| match s.trim() {
                "uniform" => Ok(Scheme::Uniform),
                "adapted" => Ok(Scheme::Adapted),
                s => match s.strip_prefix("custom:") {
                    Some(p) if !p.is_empty() => Ok(Scheme::Custom(path(p))),
                    _ => Err(syntax(l, format!("unknown scheme '{s}'"))),
                },
            })
            .collect::<Result<_>>()?;
        let mut labels: Vec<String> = cfg.schemes.iter().map(Scheme::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(syntax(l, "schemes must be distinct"));
        }
    }
    if let Some((l, v)) = get("m") {
        cfg.m_grid = expand_grid(v).map_err(|msg| syntax(l, msg))?;
        if cfg.m_grid.contains(&0) {
            return Err(syntax(l, "m = 0 is not allowed"));
        }
        if cfg.m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(syntax(l, "m grid must be strictly ascending"));
        }
    }
    if let Some((l, v)) = get("trials") {
        cfg.trials = scalar(l, "trials", v)?;
    }
    if let Some((l, v)) = get("noise") {
        cfg.noise = scalar(l, "noise", v)?;
    }
    if let Some((l, v)) = get("signal.in_range") {
        cfg.in_range = boolean(l, v)?;
    }
    if let Some((_, v)) = get("signal.file") {
        cfg.signal_file = Some(path(v));
    }
    if let Some((l, v)) = get("seed") {
        cfg.seed = scalar(l, "seed", v)?;
    }
    if let Some((_, v)) = get("output.dir") {
        cfg.output_dir = path(v);
    }
    match get("coherence.method") {
        None | Some((_, "heuristic")) => {
            let batch = get("coherence.batch")
                .map_or(Ok(1000), |(l, v)| scalar(l, "coherence.batch", v))?;
            cfg.coherence = CoherenceChoice::Heuristic { batch };
        }
        Some((l, "exact")) => {
            if let Some((l2, _)) = get("coherence.batch") {
                return Err(syntax(
                    l2,
                    format!("coherence.batch needs coherence.method = heuristic (line {l})"),
                ));
            }
            cfg.coherence = CoherenceChoice::Exact;
        }
        Some((l, other)) => {
            return Err(syntax(
                l,
                format!("coherence.method must be exact or heuristic, got '{other}'"),
            ))
        }
    }
    if let Some((l, v)) = get("sampling.blocks") {
        cfg.blocks = scalar(l, "sampling.blocks", v)?;
    }
    let rc = &mut cfg.recovery;
    if let Some((l, v)) = get("recovery.restarts") {
        rc.restarts = scalar(l, "recovery.restarts", v)?;
    }
    if let Some((l, v)) = get("recovery.iterations") {
        rc.iterations = scalar(l, "recovery.iterations", v)?;
    }
    if let Some((l, v)) = get("recovery.lr") {
        rc.lr = scalar(l, "recovery.lr", v)?;
    }
    if let Some((l, v)) = get("recovery.beta1") {
        rc.beta1 = scalar(l, "recovery.beta1", v)?;
    }
    if let Some((l, v)) = get("recovery.beta2") {
        rc.beta2 = scalar(l, "recovery.beta2", v)?;
    }
    if let Some((l, v)) = get("recovery.weight_decay") {
        rc.weight_decay = scalar(l, "recovery.weight_decay", v)?;
    }
    if let Some((l, v)) = get("recovery.preconditioned") {
        rc.preconditioned = boolean(l, v)?;
    }
    if let Some((l, v)) = get("recovery.early_stop") {
        rc.early_stop = if v == "none" {
            None
        } else {
            Some(scalar(l, "recovery.early_stop", v)?)
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn scalar<V: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<V> {
    v.parse()
        .map_err(|_| syntax(line, format!("invalid value '{v}' for '{key}'")))
}

fn boolean(line: usize, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(syntax(line, format!("expected true or false, got '{v}'"))),
    }
}

fn int_list(line: usize, v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| syntax(line, format!("invalid integer '{}'", t.trim())))
        })
        .collect()
}

/// Expands an integer list with an optional ellipsis.
pub fn expand_grid(v: &str) -> std::result::Result<Vec<usize>, String> {
    let items: Vec<&str> = v.split(',').map(str::trim).collect();
    let is_ellipsis = |s: &&str| *s == "…" || *s == "...";
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| format!("invalid integer '{s}'"))
    };
    let Some(pos) = items.iter().position(is_ellipsis) else {
        return items.iter().map(|s| parse(s)).collect();
    };
    if items.iter().filter(|s| is_ellipsis(s)).count() > 1 {
        return Err("only one ellipsis is allowed".into());
    }
    if pos < 3 || pos + 2 != items.len() {
        return Err(
            "an ellipsis needs at least three leading terms and exactly one final term".into(),
        );
    }
    let head: Vec<usize> = items[..pos]
        .iter()
        .map(|s| parse(s))
        .collect::<std::result::Result<_, _>>()?;
    let last = parse(items[pos + 1])?;
    let diffs: Vec<i128> = head
        .windows(2)
        .map(|w| w[1] as i128 - w[0] as i128)
        .collect();
    let geometric = head[0] > 0
        && head
            .windows(2)
            .all(|w| w[1] % w[0] == 0 && w[1] / w[0] == head[1] / head[0])
        && head[1] / head[0] >= 2;
    let mut out = head.clone();
    let mut cur = *head.last().unwrap();
    if geometric {
        let ratio = head[1] / head[0];
        while cur < last {
            cur = cur.checked_mul(ratio).ok_or("grid overflows")?;
            out.push(cur);
        }
    } else if diffs.iter().all(|&d| d == diffs[0] && d > 0) {
        let step = diffs[0] as usize;
        while cur < last {
            cur += step;
            out.push(cur);
        }
    } else {
        return Err("leading terms are neither geometric nor arithmetic".into());
    }
    if cur != last {
        return Err(format!(
            "final term {last} is not reached by the progression"
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_config(text, Path::new(""))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse("net.widths = 4, 16, 64\n").unwrap();
        assert_eq!(cfg.trials, 64);
        assert_eq!(cfg.schemes, vec![Scheme::Uniform, Scheme::Adapted]);
        assert_eq!(cfg.m_grid_for(64), vec![8, 16, 32, 64]);
        assert_eq!(cfg.recovery, RecoveryConfig::default());
        assert_eq!(cfg.transform, TransformSpec::Dft1d);
        assert!(cfg.in_range);
    }

    #[test]
    fn full_config_round_trip() {
        let text = "\
# sweep
net.widths = 4, 32, 256   # lowpass prior
net.init = lowpass
net.lowpass_rows = 8
net.seed = 3
transform = dft1d
schemes = adapted, uniform
m = 8,16,32,…,128
trials = 10
noise = 0.01
seed = 42
output.dir = out
coherence.method = exact
recovery.iterations = 500
recovery.early_stop = 1e-9
recovery.preconditioned = false
";
        let cfg = parse(text).unwrap();
        assert_eq!(
            cfg.net,
            NetSource::Lowpass {
                widths: vec![4, 32, 256],
                rows: 8,
                seed: 3
            }
        );
        assert_eq!(cfg.schemes, vec![Scheme::Adapted, Scheme::Uniform]);
        assert_eq!(cfg.m_grid, vec![8, 16, 32, 64, 128]);
        assert_eq!(cfg.trials, 10);
        assert_eq!(cfg.coherence, CoherenceChoice::Exact);
        assert_eq!(cfg.recovery.iterations, 500);
        assert_eq!(cfg.recovery.early_stop, Some(1e-9));
        assert!(!cfg.recovery.preconditioned);
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn duplicate_key_names_key_and_line() {
        let err = parse("net.widths = 2,3,4\ntrials = 3\ntrials = 4\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("trials") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn unknown_key_and_syntax_errors() {
        let msg = parse("net.widths = 2,3,4\nfoo.bar = 1\n")
            .unwrap_err()
            .to_string();
        assert!(
            msg.contains("unknown key 'foo.bar'") && msg.contains("line 2"),
            "{msg}"
        );
        let msg = parse("net.widths = 2,3,4\njust words\n")
            .unwrap_err()
            .to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(parse("net.widths = 2,3,4\ntrials = many\n").is_err());
        assert!(parse("net.widths = 2,3,4\ntrials = \n").is_err());
        assert!(parse("trials = 3\n").is_err());
    }

    #[test]
    fn invariant_violations() {
        assert!(parse("net.widths = 2,3,4\nm = 0, 8\n").is_err());
        assert!(parse("net.widths = 2,3,4\nm = 16, 8\n").is_err());
        assert!(parse("net.widths = 2,3,4\ntrials = 0\n").is_err());
        assert!(parse("net.widths = 2,3,4\nsignal.in_range = false\n").is_err());
        assert!(parse("net.widths = 2,3,4\nsignal.in_range = maybe\n").is_err());
        assert!(parse("net.widths = 2,3,4\nrecovery.lr = -1\n").is_err());
        assert!(parse("net.widths = 2,3,4\nschemes = uniform, uniform\n").is_err());
        assert!(parse("net.widths = 2,3,4\nm = 6\nsampling.blocks = 4\n").is_err());
    }

    #[test]
    fn grid_expansion() {
        let g = expand_grid("8,16,32,…,4096").unwrap();
        assert_eq!(g, (3..=12).map(|e| 1usize << e).collect::<Vec<_>>());
        assert_eq!(expand_grid("8,16,32,...,32").unwrap(), vec![8, 16, 32]);
        assert_eq!(
            expand_grid("10,20,30,...,60").unwrap(),
            vec![10, 20, 30, 40, 50, 60]
        );
        assert_eq!(expand_grid("3, 5, 9").unwrap(), vec![3, 5, 9]);
        assert!(expand_grid("8,16,…,64").is_err());
        assert!(expand_grid("8,16,32,…,100").is_err());
        assert!(expand_grid("8,16,32,…").is_err());
        assert!(expand_grid("1,2,4,…,16,…,64").is_err());
        assert!(expand_grid("1,5,6,…,20").is_err());
    }

    #[test]
    fn relative_paths_use_base() {
        let cfg = parse_config(
            "net.file = net.txt\nschemes = custom:p.csv\n",
            Path::new("/data"),
        )
        .unwrap();
        assert_eq!(cfg.net, NetSource::File(PathBuf::from("/data/net.txt")));
        assert_eq!(
            cfg.schemes,
            vec![Scheme::Custom(PathBuf::from("/data/p.csv"))]
        );
        assert_eq!(cfg.schemes[0].label(), "custom:p");
    }
}
