//! Campaign configuration: a small line-based format with `[section]`
//! headers and `key = value` pairs. Unknown keys are rejected with their
//! full path so typos never silently fall back to defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use actgen_core::cpe::CpeArch;
use actgen_core::genmodel::Family;
use actgen_core::seq::Vocabulary;
use actgen_core::strategies::{BackendKind, Method, PriorSpec, ThresholdSchedule};

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Parse { line: usize, message: String },
    MissingKey(String),
    BadValue { key: String, message: String },
    UnknownKey(String),
    UnknownMethod(String),
    DuplicateSeeds,
    MissingFile(PathBuf),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(path, e) => write!(f, "{}: {e}", path.display()),
            ConfigError::Parse { line, message } => write!(f, "line {line}: {message}"),
            ConfigError::MissingKey(key) => write!(f, "missing required key '{key}'"),
            ConfigError::BadValue { key, message } => write!(f, "key '{key}': {message}"),
            ConfigError::UnknownKey(key) => write!(f, "unknown key '{key}'"),
            ConfigError::UnknownMethod(name) => write!(
                f,
                "unknown method '{name}' (supported: vsd, dbas, cbas, bore, random)"
            ),
            ConfigError::DuplicateSeeds => write!(f, "duplicate seeds"),
            ConfigError::MissingFile(path) => {
                write!(f, "referenced file does not exist: {}", path.display())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// Where the fitness values come from.
#[derive(Clone, Debug, PartialEq)]
pub enum LandscapeSpec {
    Csv { path: PathBuf, vocab: Vocabulary, fill: f64 },
    Synthetic { vocab_size: usize, seq_len: usize, seed: u64, epistatic_pairs: usize },
    Ehrlich {
        vocab: Vocabulary,
        seq_len: usize,
        motifs: Vec<(String, Vec<usize>)>,
        quantization: u32,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CpeConfig {
    pub arch: CpeArch,
    pub iterations: usize,
    pub learning_rate: f64,
    pub clamp: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GpConfig {
    pub scale: f64,
    pub lengthscale: f64,
    pub noise_var: f64,
    pub noisy_pi: bool,
    pub grid_search: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViSection {
    pub samples: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub baseline_decay: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub landscape: LandscapeSpec,
    pub methods: Vec<Method>,
    pub batch_size: usize,
    pub rounds: usize,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub backend: BackendKind,
    pub family: Family,
    pub schedule: Option<ThresholdSchedule>,
    pub hit_threshold: Option<f64>,
    pub noise_std: f64,
    pub out_dir: PathBuf,
    pub init_size: usize,
    pub prior: PriorSpec,
    pub weighted_steps: usize,
    pub charts: bool,
    pub kl_oracle: bool,
    pub trace: bool,
    /// Write the final search-distribution snapshot per cell.
    pub snapshots: bool,
    pub cpe: CpeConfig,
    pub gp: GpConfig,
    pub vi: ViSection,
}

/// Raw parsed key/value store with consumption tracking.
struct Raw {
    values: BTreeMap<String, (String, usize)>,
    consumed: BTreeMap<String, bool>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or(ConfigError::Parse {
                    line: line_no,
                    message: format!("malformed section header {line:?}"),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Parse {
                line: line_no,
                message: format!("expected 'key = value', got {line:?}"),
            })?;
            let full = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            if values.contains_key(&full) {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: format!("duplicate key '{full}'"),
                });
            }
            values.insert(full, (value.trim().to_string(), line_no));
        }
        let consumed = values.keys().map(|k| (k.clone(), false)).collect();
        Ok(Raw { values, consumed })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        if let Some((v, _)) = self.values.get(key) {
            self.consumed.insert(key.to_string(), true);
            Some(v.clone())
        } else {
            None
        }
    }

    fn require(&mut self, key: &str) -> Result<String, ConfigError> {
        self.take(key).ok_or_else(|| ConfigError::MissingKey(key.to_string()))
    }

    fn finish(&self) -> Result<(), ConfigError> {
        for (key, used) in &self.consumed {
            if !used {
                return Err(ConfigError::UnknownKey(key.clone()));
            }
        }
        Ok(())
    }
}

fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::BadValue { key: key.to_string(), message: message.into() }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>().map_err(|_| bad(key, format!("expected a number, got {v:?}")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse::<usize>().map_err(|_| bad(key, format!("expected an integer, got {v:?}")))
}

fn parse_u64(key: &str, v: &str) -> Result<u64, ConfigError> {
    v.parse::<u64>().map_err(|_| bad(key, format!("expected an integer, got {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(bad(key, format!("expected true/false, got {v:?}"))),
    }
}

fn parse_list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn parse_schedule(key: &str, v: &str) -> Result<ThresholdSchedule, ConfigError> {
    let (kind, rest) = v.split_once(':').unwrap_or((v, ""));
    match kind.trim() {
        "fixed" => Ok(ThresholdSchedule::Fixed(parse_f64(key, rest.trim())?)),
        "quantile" => {
            let gamma = parse_f64(key, rest.trim())?;
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(bad(key, "quantile level must lie in (0, 1)"));
            }
            Ok(ThresholdSchedule::Quantile { gamma })
        }
        "annealed" => {
            let parts = parse_list(rest);
            if parts.len() != 2 {
                return Err(bad(key, "annealed schedule needs 'annealed:P0,ETA'"));
            }
            let p0 = parse_f64(key, &parts[0])?;
            let eta = parse_f64(key, &parts[1])?;
            ThresholdSchedule::annealed(p0, eta).map_err(|e| bad(key, e.to_string()))
        }
        other => Err(bad(key, format!("unknown schedule kind {other:?}"))),
    }
}

fn parse_arch(key: &str, v: &str) -> Result<CpeArch, ConfigError> {
    match v.split_once(':') {
        None => match v {
            "linear" => Ok(CpeArch::Linear),
            "additive" => Ok(CpeArch::Additive),
            "hidden" => Ok(CpeArch::Hidden { width: 32 }),
            other => Err(bad(key, format!("unknown architecture {other:?}"))),
        },
        Some(("hidden", w)) => Ok(CpeArch::Hidden { width: parse_usize(key, w.trim())? }),
        Some((other, _)) => Err(bad(key, format!("unknown architecture {other:?}"))),
    }
}

fn parse_vocab(key: &str, v: &str) -> Result<Vocabulary, ConfigError> {
    Vocabulary::from_str(v).map_err(|e| bad(key, e.to_string()))
}

/// Parse and fully validate a config file. Defaults: B=128, T=10, five
/// seeds, CPE backend, mean-field family, uniform prior.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
    let config = parse_config_str(&text)?;
    // File references are resolved relative to the config file itself.
    if let LandscapeSpec::Csv { path: csv, .. } = &config.landscape {
        let resolved = if csv.is_relative() {
            path.parent().unwrap_or(Path::new(".")).join(csv)
        } else {
            csv.clone()
        };
        if !resolved.exists() {
            return Err(ConfigError::MissingFile(resolved));
        }
        let mut config = config;
        if let LandscapeSpec::Csv { path: p, .. } = &mut config.landscape {
            *p = resolved;
        }
        return Ok(config);
    }
    Ok(config)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut raw = Raw::parse(text)?;

    let methods_raw = raw.require("methods")?;
    let mut methods = Vec::new();
    for name in parse_list(&methods_raw) {
        let m = Method::parse(&name).ok_or(ConfigError::UnknownMethod(name))?;
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    if methods.is_empty() {
        return Err(bad("methods", "at least one method required"));
    }

    let landscape_kind = raw.require("landscape")?;
    let landscape = match landscape_kind.as_str() {
        "csv" => {
            let path = PathBuf::from(raw.require("csv.path")?);
            let vocab = parse_vocab("csv.vocab", &raw.require("csv.vocab")?)?;
            let fill = match raw.take("csv.fill") {
                Some(v) => parse_f64("csv.fill", &v)?,
                None => -1.0,
            };
            LandscapeSpec::Csv { path, vocab, fill }
        }
        "synthetic" => {
            let vocab_size = match raw.take("synthetic.vocab") {
                Some(v) => parse_usize("synthetic.vocab", &v)?,
                None => 4,
            };
            let seq_len = match raw.take("synthetic.length") {
                Some(v) => parse_usize("synthetic.length", &v)?,
                None => 8,
            };
            let seed = match raw.take("synthetic.seed") {
                Some(v) => parse_u64("synthetic.seed", &v)?,
                None => 0,
            };
            let epistatic_pairs = match raw.take("synthetic.epistasis") {
                Some(v) => parse_usize("synthetic.epistasis", &v)?,
                None => 0,
            };
            LandscapeSpec::Synthetic { vocab_size, seq_len, seed, epistatic_pairs }
        }
        "ehrlich" => {
            let vocab = parse_vocab("ehrlich.vocab", &raw.require("ehrlich.vocab")?)?;
            let seq_len = parse_usize("ehrlich.length", &raw.require("ehrlich.length")?)?;
            let quantization = match raw.take("ehrlich.quantization") {
                Some(v) => {
                    parse_usize("ehrlich.quantization", &v)? as u32
                }
                None => 4,
            };
            let motifs_raw = raw.require("ehrlich.motifs")?;
            let mut motifs = Vec::new();
            for part in motifs_raw.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                let (pattern, offsets) = match part.split_once('@') {
                    None => (part.to_string(), Vec::new()),
                    Some((p, offs)) => {
                        let mut parsed = Vec::new();
                        for o in parse_list(offs) {
                            parsed.push(parse_usize("ehrlich.motifs", &o)?);
                        }
                        (p.to_string(), parsed)
                    }
                };
                motifs.push((pattern, offsets));
            }
            if motifs.is_empty() {
                return Err(bad("ehrlich.motifs", "at least one motif required"));
            }
            LandscapeSpec::Ehrlich { vocab, seq_len, motifs, quantization }
        }
        other => {
            return Err(bad(
                "landscape",
                format!("unknown landscape kind {other:?} (csv | synthetic | ehrlich)"),
            ))
        }
    };

    let batch_size = match raw.take("batch_size") {
        Some(v) => parse_usize("batch_size", &v)?,
        None => 128,
    };
    if batch_size == 0 {
        return Err(bad("batch_size", "must be at least 1"));
    }
    let rounds = match raw.take("rounds") {
        Some(v) => parse_usize("rounds", &v)?,
        None => 10,
    };
    let seeds: Vec<u64> = match raw.take("seeds") {
        Some(v) => {
            let mut out = Vec::new();
            for s in parse_list(&v) {
                out.push(parse_u64("seeds", &s)?);
            }
            out
        }
        None => vec![1, 2, 3, 4, 5],
    };
    if seeds.is_empty() {
        return Err(bad("seeds", "at least one seed required"));
    }
    {
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(ConfigError::DuplicateSeeds);
        }
    }
    let master_seed = match raw.take("master_seed") {
        Some(v) => parse_u64("master_seed", &v)?,
        None => 0,
    };
    let backend = match raw.take("backend").as_deref() {
        None | Some("cpe") => BackendKind::Cpe,
        Some("gp-pi") => BackendKind::GpPi,
        Some(other) => return Err(bad("backend", format!("unknown backend {other:?}"))),
    };
    let family = match raw.take("family").as_deref() {
        None | Some("mean-field") => Family::MeanField,
        Some("autoregressive") => Family::FirstOrderAr,
        Some(other) => return Err(bad("family", format!("unknown family {other:?}"))),
    };
    let schedule = match raw.take("threshold") {
        Some(v) => Some(parse_schedule("threshold", &v)?),
        None => None,
    };
    let hit_threshold = match raw.take("hit_threshold") {
        Some(v) => Some(parse_f64("hit_threshold", &v)?),
        None => None,
    };
    let noise_std = match raw.take("noise_std") {
        Some(v) => parse_f64("noise_std", &v)?,
        None => 0.0,
    };
    if noise_std < 0.0 {
        return Err(bad("noise_std", "must be nonnegative"));
    }
    let out_dir = match raw.take("out_dir") {
        Some(v) => PathBuf::from(v),
        None => default_out_dir(),
    };
    let init_size = match raw.take("init_size") {
        Some(v) => parse_usize("init_size", &v)?,
        None => 128,
    };
    if init_size == 0 {
        return Err(bad("init_size", "must be at least 1"));
    }
    let prior = match raw.take("prior").as_deref() {
        None | Some("uniform") => PriorSpec::Uniform,
        Some("fitted") => PriorSpec::FitToInitial,
        Some(other) => return Err(bad("prior", format!("unknown prior {other:?}"))),
    };
    let weighted_steps = match raw.take("weighted_steps") {
        Some(v) => parse_usize("weighted_steps", &v)?,
        None => 500,
    };
    let charts = match raw.take("charts") {
        Some(v) => parse_bool("charts", &v)?,
        None => false,
    };
    let kl_oracle = match raw.take("kl_oracle") {
        Some(v) => parse_bool("kl_oracle", &v)?,
        None => false,
    };
    let trace = match raw.take("trace") {
        Some(v) => parse_bool("trace", &v)?,
        None => false,
    };
    let snapshots = match raw.take("snapshots") {
        Some(v) => parse_bool("snapshots", &v)?,
        None => false,
    };

    let cpe = CpeConfig {
        arch: match raw.take("cpe.arch") {
            Some(v) => parse_arch("cpe.arch", &v)?,
            None => CpeArch::Hidden { width: 32 },
        },
        iterations: match raw.take("cpe.iterations") {
            Some(v) => parse_usize("cpe.iterations", &v)?,
            None => 500,
        },
        learning_rate: match raw.take("cpe.learning_rate") {
            Some(v) => parse_f64("cpe.learning_rate", &v)?,
            None => 0.01,
        },
        clamp: match raw.take("cpe.clamp") {
            Some(v) => parse_f64("cpe.clamp", &v)?,
            None => 1e-6,
        },
    };
    let gp = GpConfig {
        scale: match raw.take("gp.scale") {
            Some(v) => parse_f64("gp.scale", &v)?,
            None => 1.0,
        },
        lengthscale: match raw.take("gp.lengthscale") {
            Some(v) => parse_f64("gp.lengthscale", &v)?,
            None => 1.0,
        },
        noise_var: match raw.take("gp.noise_var") {
            Some(v) => parse_f64("gp.noise_var", &v)?,
            None => 0.1,
        },
        noisy_pi: match raw.take("gp.noisy_pi") {
            Some(v) => parse_bool("gp.noisy_pi", &v)?,
            None => true,
        },
        grid_search: match raw.take("gp.grid_search") {
            Some(v) => parse_bool("gp.grid_search", &v)?,
            None => false,
        },
    };
    let vi = ViSection {
        samples: match raw.take("vi.samples") {
            Some(v) => parse_usize("vi.samples", &v)?,
            None => 1024,
        },
        iterations: match raw.take("vi.iterations") {
            Some(v) => parse_usize("vi.iterations", &v)?,
            None => 3000,
        },
        learning_rate: match raw.take("vi.learning_rate") {
            Some(v) => parse_f64("vi.learning_rate", &v)?,
            None => 0.01,
        },
        baseline_decay: match raw.take("vi.baseline_decay") {
            Some(v) => parse_f64("vi.baseline_decay", &v)?,
            None => 0.7,
        },
    };

    raw.finish()?;
    Ok(RunConfig {
        landscape,
        methods,
        batch_size,
        rounds,
        seeds,
        master_seed,
        backend,
        family,
        schedule,
        hit_threshold,
        noise_std,
        out_dir,
        init_size,
        prior,
        weighted_steps,
        charts,
        kl_oracle,
        trace,
        snapshots,
        cpe,
        gp,
        vi,
    })
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os("ACTGEN_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("results"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config_str("landscape = synthetic\nmethods = vsd\n").unwrap();
        assert_eq!(cfg.batch_size, 128);
        assert_eq!(cfg.rounds, 10);
        assert_eq!(cfg.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(cfg.backend, BackendKind::Cpe);
        assert_eq!(cfg.vi.samples, 1024);
        assert_eq!(cfg.vi.iterations, 3000);
    }

    #[test]
    fn unknown_method_lists_supported() {
        let err =
            parse_config_str("landscape = synthetic\nmethods = adalead\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("adalead") && msg.contains("vsd"), "{msg}");
    }

    #[test]
    fn duplicate_seeds_rejected() {
        let err = parse_config_str(
            "landscape = synthetic\nmethods = vsd\nseeds = 1, 1\n",
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateSeeds));
    }

    #[test]
    fn unknown_key_includes_path() {
        let err = parse_config_str(
            "landscape = synthetic\nmethods = vsd\n[cpe]\nwidth = 3\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("cpe.width"), "{err}");
    }

    #[test]
    fn schedule_forms_parse() {
        let cfg = parse_config_str(
            "landscape = synthetic\nmethods = vsd\nthreshold = annealed:0.5,0.87\n",
        )
        .unwrap();
        assert_eq!(cfg.schedule, Some(ThresholdSchedule::Annealed { p: 0.5, eta: 0.87 }));
        let cfg = parse_config_str(
            "landscape = synthetic\nmethods = vsd\nthreshold = fixed:0.75\n",
        )
        .unwrap();
        assert_eq!(cfg.schedule, Some(ThresholdSchedule::Fixed(0.75)));
    }

    #[test]
    fn type_errors_name_the_key() {
        let err = parse_config_str(
            "landscape = synthetic\nmethods = vsd\nbatch_size = many\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("batch_size"), "{err}");
    }

    #[test]
    fn ehrlich_block_parses() {
        let cfg = parse_config_str(
            "landscape = ehrlich\nmethods = vsd\n[ehrlich]\nvocab = ACGT\nlength = 15\nmotifs = ACGT; TTAA@0,3\n",
        )
        .unwrap();
        match cfg.landscape {
            LandscapeSpec::Ehrlich { motifs, quantization, .. } => {
                assert_eq!(quantization, 4);
                assert_eq!(motifs.len(), 2);
                assert_eq!(motifs[1].1, vec![0, 3]);
            }
            other => panic!("wrong landscape: {other:?}"),
        }
    }

    #[test]
    fn missing_csv_file_detected() {
        let dir = std::env::temp_dir().join("actgen-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("missing.conf");
        std::fs::write(
            &path,
            "landscape = csv\nmethods = vsd\n[csv]\npath = nope.csv\nvocab = ACGT\n",
        )
        .unwrap();
        let err = parse_config(&path).unwrap_err();
        assert!(matches!(err, ConfigError::MissingFile(_)), "{err}");
    }
}
