//! Line-oriented experiment configuration.
//!
//! One `key=value` per line, dotted keys, `#` starts a comment. Learning
//! rates are integer powers of two (`optimizer.learning_rate=-8` is 2^-8).
//! Every key with its default is listed by [`KEYS`]; `rbd validate` echoes
//! the fully resolved configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::distrib::{Batching, ParallelMode};
use crate::error::{Error, Result};
use crate::nn::NetworkSpec;
use crate::optim::{LearningRate, OptimizerConfig, Rule};
use crate::prng::Distribution;
use crate::subspace::SchemeKind;

/// Known keys and their defaults. An empty default means "unset".
pub const KEYS: &[(&str, &str)] = &[
    ("data.source", "mnist"),
    ("data.dir", ""),
    ("data.train_limit", ""),
    ("data.val_limit", ""),
    ("data.synthetic.classes", "10"),
    ("data.synthetic.dim", "784"),
    ("data.synthetic.train", "2000"),
    ("data.synthetic.val", "500"),
    ("data.synthetic.separation", "4"),
    ("network.widths", "784,128,10"),
    ("optimizer.rule", "rbd"),
    ("optimizer.learning_rate", ""),
    ("optimizer.d", "250"),
    ("optimizer.scheme", "single"),
    ("optimizer.distribution", "gaussian"),
    ("optimizer.normalize", "true"),
    ("optimizer.sigma", "0.01"),
    ("optimizer.antithetic", "false"),
    ("optimizer.batch_size", "32"),
    ("train.epochs", "100"),
    ("train.max_steps_per_epoch", ""),
    ("seed.data", "0"),
    ("seed.init", "1"),
    ("seed.basis", "2"),
    ("seed.shuffle", "3"),
    ("seed.split", "4"),
    ("output.dir", ""),
    ("lr.sgd", "-8"),
    ("lr.rbd", "1"),
    ("lr.fpd", "-1"),
    ("lr.nes", "-14"),
    ("distributed.workers", "1,4"),
    ("distributed.mode", "basis_parallel"),
    ("distributed.batching", "shared"),
    ("distributed.verify_replicas", "true"),
    ("distributed.check_steps", "5"),
    ("distributed.per_worker_d", ""),
    ("suite.seeds", "3"),
    ("suite.dims", "100,1000,10000,100000"),
    ("suite.pairs", "100"),
    ("suite.d_values", "2,25,250"),
    ("suite.compartments", "1,2,4,8,16"),
    ("suite.switch_epochs", "1,2,5,10,25,50,75"),
    ("suite.slice_directions", "25"),
    ("suite.correlation_every", "50"),
    ("sweep.max_exponent", "7"),
    ("sweep.min_exponent", "-19"),
    ("sweep.epochs", "1"),
];

/// Names people reach for that no rule supports.
const UNSUPPORTED: &[(&str, &str)] = &[
    ("momentum", "no rule uses momentum"),
    ("schedule", "learning rates are constant"),
    ("weight_decay", "no regularization is applied"),
    ("augmentation", "data augmentation is not implemented"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// 1-based line in the config file; `None` for command-line overrides
    /// and missing keys.
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

fn issues_to_error(issues: Vec<ConfigIssue>) -> Error {
    Error::InvalidConfig(issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))
}

/// One assignment with its origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: Option<usize>,
}

fn suggestion(key: &str) -> Option<String> {
    let last = key.rsplit('.').next().unwrap_or(key);
    for (name, why) in UNSUPPORTED {
        if strsim::normalized_damerau_levenshtein(last, name) >= 0.7 {
            return Some(format!("did you mean `{name}`? {why}"));
        }
    }
    KEYS.iter()
        .map(|(k, _)| (strsim::normalized_damerau_levenshtein(key, k), *k))
        .filter(|(s, _)| *s >= 0.6)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, k)| format!("did you mean `{k}`?"))
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

/// Splits config text into entries, rejecting malformed lines and unknown
/// keys. Later assignments of the same key win.
pub fn parse_entries(text: &str) -> std::result::Result<Vec<Entry>, Vec<ConfigIssue>> {
    let mut entries = Vec::new();
    let mut issues = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match parse_assignment(line, Some(i + 1)) {
            Ok(e) => entries.push(e),
            Err(e) => issues.push(e),
        }
    }
    if issues.is_empty() {
        Ok(entries)
    } else {
        Err(issues)
    }
}

fn parse_assignment(text: &str, line: Option<usize>) -> std::result::Result<Entry, ConfigIssue> {
    let Some((k, v)) = text.split_once('=') else {
        return Err(ConfigIssue {
            line,
            key: text.to_string(),
            message: "expected key=value".into(),
        });
    };
    let key = k.trim().to_string();
    if !known(&key) {
        let hint = suggestion(&key).map(|s| format!(" ({s})")).unwrap_or_default();
        return Err(ConfigIssue {
            line,
            key,
            message: format!("unknown key{hint}"),
        });
    }
    Ok(Entry {
        key,
        value: v.trim().to_string(),
        line,
    })
}

/// Parses a command-line `key=value` override.
pub fn parse_override(text: &str) -> Result<Entry> {
    parse_assignment(text.trim(), None).map_err(|e| issues_to_error(vec![e]))
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Mnist {
        dir: Option<PathBuf>,
    },
    Synthetic {
        classes: usize,
        dim: usize,
        train: usize,
        val: usize,
        separation: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub data: u64,
    pub init: u64,
    pub basis: u64,
    pub shuffle: u64,
    pub split: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributedSection {
    pub workers: Vec<usize>,
    pub mode: ParallelMode,
    pub batching: Batching,
    pub verify_replicas: bool,
    pub check_steps: u64,
    /// Directions per worker; unset means `optimizer.d / K` in
    /// basis-parallel mode and `optimizer.d` in data-parallel mode.
    pub per_worker_d: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSection {
    pub seeds: usize,
    pub dims: Vec<usize>,
    pub pairs: usize,
    pub d_values: Vec<usize>,
    pub compartments: Vec<usize>,
    pub switch_epochs: Vec<u64>,
    pub slice_directions: usize,
    pub correlation_every: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub train_limit: Option<usize>,
    pub val_limit: Option<usize>,
    pub network: NetworkSpec,
    /// The configured rule. Its learning rate is `optimizer.learning_rate`
    /// when given, otherwise the rule's `lr.*` default.
    pub optimizer: OptimizerConfig,
    /// Whether `optimizer.learning_rate` was set explicitly.
    pub explicit_learning_rate: bool,
    pub epochs: u64,
    pub max_steps_per_epoch: Option<usize>,
    pub seeds: Seeds,
    pub output_dir: Option<PathBuf>,
    /// Per-rule exponents used by suites: sgd, rbd, fpd, nes.
    pub rule_exponents: [i32; 4],
    pub distributed: DistributedSection,
    pub suite: SuiteSection,
    pub sweep_range: (i32, i32),
    pub sweep_epochs: u64,
}

struct Reader<'a> {
    entries: &'a [Entry],
    issues: Vec<ConfigIssue>,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> (String, Option<usize>) {
        debug_assert!(known(key), "{key}");
        match self.entries.iter().rev().find(|e| e.key == key) {
            Some(e) => (e.value.clone(), e.line),
            None => (KEYS.iter().find(|(k, _)| *k == key).unwrap().1.to_string(), None),
        }
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        let (v, line) = self.raw(key);
        if v.is_empty() {
            return None;
        }
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(e) => {
                self.issues.push(ConfigIssue {
                    line,
                    key: key.to_string(),
                    message: format!("invalid value `{v}`: {e}"),
                });
                None
            }
        }
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Vec<T>
    where
        T::Err: fmt::Display,
    {
        let (v, line) = self.raw(key);
        let mut out = Vec::new();
        for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.parse::<T>() {
                Ok(x) => out.push(x),
                Err(e) => self.issues.push(ConfigIssue {
                    line,
                    key: key.to_string(),
                    message: format!("invalid list item `{part}`: {e}"),
                }),
            }
        }
        out
    }

    fn fail(&mut self, key: &str, message: impl Into<String>) {
        let (_, line) = self.raw(key);
        self.issues.push(ConfigIssue {
            line,
            key: key.to_string(),
            message: message.into(),
        });
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

/// Parses `single`, `even:K`, `layerwise` or `layerwise_proportional`.
pub fn parse_scheme(s: &str) -> std::result::Result<SchemeKind, String> {
    match s {
        "single" | "none" => Ok(SchemeKind::Single),
        "layerwise" => Ok(SchemeKind::Layerwise),
        "layerwise_proportional" => Ok(SchemeKind::LayerwiseProportional),
        other => match other.strip_prefix("even:").map(str::parse::<usize>) {
            Some(Ok(k)) if k >= 1 => Ok(SchemeKind::Even(k)),
            _ => Err(format!(
                "unknown scheme `{other}` (expected single, even:K, layerwise or layerwise_proportional)"
            )),
        },
    }
}

/// Inverse of [`parse_scheme`].
pub fn scheme_string(kind: SchemeKind) -> String {
    match kind {
        SchemeKind::Single => "single".into(),
        SchemeKind::Even(k) => format!("even:{k}"),
        SchemeKind::Layerwise => "layerwise".into(),
        SchemeKind::LayerwiseProportional => "layerwise_proportional".into(),
    }
}

fn rule_index(rule: Rule) -> usize {
    match rule {
        Rule::Sgd => 0,
        Rule::Rbd => 1,
        Rule::Fpd => 2,
        Rule::Nes => 3,
    }
}

impl ExperimentConfig {
    /// Resolves entries against the defaults. With `require_learning_rate`
    /// a missing `optimizer.learning_rate` is an error.
    pub fn from_entries(entries: &[Entry], require_learning_rate: bool) -> std::result::Result<Self, Vec<ConfigIssue>> {
        let mut r = Reader {
            entries,
            issues: Vec::new(),
        };
        let source = match r.raw("data.source").0.as_str() {
            "mnist" => DataSource::Mnist {
                dir: r.get::<PathBuf>("data.dir"),
            },
            "synthetic" => DataSource::Synthetic {
                classes: r.get("data.synthetic.classes").unwrap_or(10),
                dim: r.get("data.synthetic.dim").unwrap_or(784),
                train: r.get("data.synthetic.train").unwrap_or(1),
                val: r.get("data.synthetic.val").unwrap_or(1),
                separation: r.get("data.synthetic.separation").unwrap_or(4.0),
            },
            other => {
                r.fail("data.source", format!("unknown source `{other}` (expected mnist or synthetic)"));
                DataSource::Mnist { dir: None }
            }
        };
        let widths: Vec<usize> = r.list("network.widths");
        let network = match NetworkSpec::new(widths) {
            Ok(n) => n,
            Err(e) => {
                r.fail("network.widths", e.to_string());
                NetworkSpec::fc_mnist()
            }
        };
        let rule: Rule = r.get("optimizer.rule").unwrap_or(Rule::Rbd);
        let rule_exponents = [
            r.get("lr.sgd").unwrap_or(-8),
            r.get("lr.rbd").unwrap_or(1),
            r.get("lr.fpd").unwrap_or(-1),
            r.get("lr.nes").unwrap_or(-14),
        ];
        let explicit: Option<i32> = r.get("optimizer.learning_rate");
        if explicit.is_none() && require_learning_rate && r.raw("optimizer.learning_rate").0.is_empty() {
            r.fail(
                "optimizer.learning_rate",
                "required: integer exponent e for a rate of 2^e (e.g. optimizer.learning_rate=1)",
            );
        }
        let exponent = explicit.unwrap_or(rule_exponents[rule_index(rule)]);
        let d: usize = r.get("optimizer.d").unwrap_or(250);
        let scheme = match parse_scheme(&r.raw("optimizer.scheme").0) {
            Ok(s) => s,
            Err(e) => {
                r.fail("optimizer.scheme", e);
                SchemeKind::Single
            }
        };
        let distribution: Distribution = r.get("optimizer.distribution").unwrap_or(Distribution::Gaussian);
        let normalize = match parse_bool(&r.raw("optimizer.normalize").0) {
            Ok(b) => b,
            Err(e) => {
                r.fail("optimizer.normalize", e);
                true
            }
        };
        let antithetic = match parse_bool(&r.raw("optimizer.antithetic").0) {
            Ok(b) => b,
            Err(e) => {
                r.fail("optimizer.antithetic", e);
                false
            }
        };
        let sigma: f64 = r.get("optimizer.sigma").unwrap_or(1e-2);
        if !(sigma > 0.0 && sigma.is_finite()) {
            r.fail("optimizer.sigma", "must be positive");
        }
        let batch_size: usize = r.get("optimizer.batch_size").unwrap_or(32);
        if batch_size == 0 {
            r.fail("optimizer.batch_size", "must be at least 1");
        }
        if d == 0 {
            r.fail("optimizer.d", "must be at least 1");
        }
        let seeds = Seeds {
            data: r.get("seed.data").unwrap_or(0),
            init: r.get("seed.init").unwrap_or(1),
            basis: r.get("seed.basis").unwrap_or(2),
            shuffle: r.get("seed.shuffle").unwrap_or(3),
            split: r.get("seed.split").unwrap_or(4),
        };
        let optimizer = OptimizerConfig {
            rule,
            learning_rate: LearningRate::pow2(exponent),
            d_total: d,
            scheme,
            distribution,
            normalize,
            sigma,
            antithetic,
            batch_size,
            basis_seed: seeds.basis,
        };
        let workers: Vec<usize> = r.list("distributed.workers");
        if workers.is_empty() || workers.contains(&0) {
            r.fail("distributed.workers", "need a list of worker counts, each at least 1");
        }
        let distributed = DistributedSection {
            workers,
            mode: r.get("distributed.mode").unwrap_or(ParallelMode::BasisParallel),
            batching: r.get("distributed.batching").unwrap_or(Batching::Shared),
            verify_replicas: parse_bool(&r.raw("distributed.verify_replicas").0).unwrap_or(true),
            check_steps: r.get("distributed.check_steps").unwrap_or(5),
            per_worker_d: r.get("distributed.per_worker_d"),
        };
        let suite = SuiteSection {
            seeds: r.get("suite.seeds").unwrap_or(3),
            dims: r.list("suite.dims"),
            pairs: r.get("suite.pairs").unwrap_or(100),
            d_values: r.list("suite.d_values"),
            compartments: r.list("suite.compartments"),
            switch_epochs: r.list("suite.switch_epochs"),
            slice_directions: r.get("suite.slice_directions").unwrap_or(25),
            correlation_every: r.get("suite.correlation_every").unwrap_or(50),
        };
        if suite.seeds == 0 {
            r.fail("suite.seeds", "must be at least 1");
        }
        let sweep_range = (
            r.get("sweep.max_exponent").unwrap_or(7),
            r.get("sweep.min_exponent").unwrap_or(-19),
        );
        if sweep_range.0 < sweep_range.1 {
            r.fail("sweep.min_exponent", "exponent range is empty");
        }
        let cfg = ExperimentConfig {
            source,
            train_limit: r.get("data.train_limit"),
            val_limit: r.get("data.val_limit"),
            network,
            optimizer,
            explicit_learning_rate: explicit.is_some(),
            epochs: r.get("train.epochs").unwrap_or(100),
            max_steps_per_epoch: r.get("train.max_steps_per_epoch"),
            seeds,
            output_dir: r.get::<PathBuf>("output.dir"),
            rule_exponents,
            distributed,
            suite,
            sweep_range,
            sweep_epochs: r.get("sweep.epochs").unwrap_or(1),
        };
        if r.issues.is_empty() {
            Ok(cfg)
        } else {
            Err(r.issues)
        }
    }

    pub fn parse(text: &str, overrides: &[Entry], require_learning_rate: bool) -> Result<Self> {
        let mut entries = parse_entries(text).map_err(issues_to_error)?;
        entries.extend_from_slice(overrides);
        Self::from_entries(&entries, require_learning_rate).map_err(issues_to_error)
    }

    pub fn load(path: &Path, overrides: &[Entry], require_learning_rate: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides, require_learning_rate)
    }

    /// Checks that referenced files exist.
    pub fn check_files(&self) -> Result<()> {
        if let DataSource::Mnist { dir: Some(dir) } = &self.source {
            if !dir.is_dir() {
                return Err(Error::InvalidConfig(format!("`data.dir`: {} is not a directory", dir.display())));
            }
        }
        Ok(())
    }

    /// Exponent for `rule`: the explicit learning rate for the configured
    /// rule, otherwise the `lr.*` default.
    pub fn exponent_for(&self, rule: Rule) -> i32 {
        if rule == self.optimizer.rule && self.explicit_learning_rate {
            self.optimizer.learning_rate.exponent.unwrap_or(0)
        } else {
            self.rule_exponents[rule_index(rule)]
        }
    }

    /// Optimizer settings for `rule`, sharing everything else with the
    /// configured optimizer.
    pub fn optimizer_for(&self, rule: Rule) -> OptimizerConfig {
        let mut c = self.optimizer.clone();
        c.rule = rule;
        c.learning_rate = LearningRate::pow2(self.exponent_for(rule));
        c
    }

    /// Every key with its resolved value, in [`KEYS`] order.
    pub fn resolved(&self) -> Vec<(String, String)> {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let (source, dir, syn) = match &self.source {
            DataSource::Mnist { dir } => (
                "mnist",
                dir.as_ref().map(|d| d.display().to_string()).unwrap_or_default(),
                (10, 784, 2000, 500, 4.0),
            ),
            DataSource::Synthetic {
                classes,
                dim,
                train,
                val,
                separation,
            } => ("synthetic", String::new(), (*classes, *dim, *train, *val, *separation)),
        };
        let o = &self.optimizer;
        let pairs: Vec<(&str, String)> = vec![
            ("data.source", source.into()),
            ("data.dir", dir),
            ("data.train_limit", opt(self.train_limit)),
            ("data.val_limit", opt(self.val_limit)),
            ("data.synthetic.classes", syn.0.to_string()),
            ("data.synthetic.dim", syn.1.to_string()),
            ("data.synthetic.train", syn.2.to_string()),
            ("data.synthetic.val", syn.3.to_string()),
            ("data.synthetic.separation", syn.4.to_string()),
            ("network.widths", join(self.network.widths())),
            ("optimizer.rule", o.rule.to_string()),
            ("optimizer.learning_rate", o.learning_rate.exponent.unwrap_or(0).to_string()),
            ("optimizer.d", o.d_total.to_string()),
            ("optimizer.scheme", scheme_string(o.scheme)),
            ("optimizer.distribution", o.distribution.to_string()),
            ("optimizer.normalize", o.normalize.to_string()),
            ("optimizer.sigma", o.sigma.to_string()),
            ("optimizer.antithetic", o.antithetic.to_string()),
            ("optimizer.batch_size", o.batch_size.to_string()),
            ("train.epochs", self.epochs.to_string()),
            ("train.max_steps_per_epoch", opt(self.max_steps_per_epoch)),
            ("seed.data", self.seeds.data.to_string()),
            ("seed.init", self.seeds.init.to_string()),
            ("seed.basis", self.seeds.basis.to_string()),
            ("seed.shuffle", self.seeds.shuffle.to_string()),
            ("seed.split", self.seeds.split.to_string()),
            (
                "output.dir",
                self.output_dir.as_ref().map(|d| d.display().to_string()).unwrap_or_default(),
            ),
            ("lr.sgd", self.rule_exponents[0].to_string()),
            ("lr.rbd", self.rule_exponents[1].to_string()),
            ("lr.fpd", self.rule_exponents[2].to_string()),
            ("lr.nes", self.rule_exponents[3].to_string()),
            ("distributed.workers", join(&self.distributed.workers)),
            ("distributed.mode", self.distributed.mode.to_string()),
            ("distributed.batching", self.distributed.batching.to_string()),
            ("distributed.verify_replicas", self.distributed.verify_replicas.to_string()),
            ("distributed.check_steps", self.distributed.check_steps.to_string()),
            ("distributed.per_worker_d", opt(self.distributed.per_worker_d)),
            ("suite.seeds", self.suite.seeds.to_string()),
            ("suite.dims", join(&self.suite.dims)),
            ("suite.pairs", self.suite.pairs.to_string()),
            ("suite.d_values", join(&self.suite.d_values)),
            ("suite.compartments", join(&self.suite.compartments)),
            (
                "suite.switch_epochs",
                self.suite.switch_epochs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
            ),
            ("suite.slice_directions", self.suite.slice_directions.to_string()),
            ("suite.correlation_every", self.suite.correlation_every.to_string()),
            ("sweep.max_exponent", self.sweep_range.0.to_string()),
            ("sweep.min_exponent", self.sweep_range.1.to_string()),
            ("sweep.epochs", self.sweep_epochs.to_string()),
        ];
        debug_assert_eq!(pairs.len(), KEYS.len());
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// The resolved configuration as config-file text.
    pub fn to_text(&self) -> String {
        self.resolved().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_learning_rate_is_named() {
        let err = ExperimentConfig::parse("optimizer.rule=sgd\n", &[], true).unwrap_err();
        assert!(err.to_string().contains("learning_rate"), "{err}");
    }

    #[test]
    fn defaults_resolve() {
        let c = ExperimentConfig::parse("optimizer.learning_rate=1\n", &[], true).unwrap();
        assert_eq!(c.optimizer.batch_size, 32);
        assert_eq!(c.optimizer.learning_rate.value, 2.0);
        assert_eq!(c.network.num_params(), 101_770);
    }

    #[test]
    fn unknown_key_gets_suggestion() {
        let err = ExperimentConfig::parse("optimizer.learning_rate=1\nmomntum=0.9\n", &[], true).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("momntum") && msg.contains("did you mean"), "{msg}");
        let err = ExperimentConfig::parse("optimizer.distributon=uniform\n", &[], false).unwrap_err();
        assert!(err.to_string().contains("optimizer.distribution"), "{err}");
    }

    #[test]
    fn resolved_text_round_trips() {
        let c = ExperimentConfig::parse(
            "optimizer.learning_rate=-3\noptimizer.scheme=even:4\ndata.source=synthetic\n",
            &[],
            true,
        )
        .unwrap();
        let again = ExperimentConfig::parse(&c.to_text(), &[], true).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn overrides_win() {
        let o = parse_override("optimizer.d=16").unwrap();
        let c = ExperimentConfig::parse("optimizer.learning_rate=0\noptimizer.d=8\n", &[o], true).unwrap();
        assert_eq!(c.optimizer.d_total, 16);
        assert!(parse_override("nope=1").is_err());
    }
}
