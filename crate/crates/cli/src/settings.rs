//! Run settings. Every value comes from the first layer that sets it:
//! command-line flags, the `--config` TOML file, the metadata of an input
//! model file (`kea --model`), then built-in defaults.

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kea_core::bench::{Sampler, TestFunction};
use kea_core::greedy::{AddCriterion, RemoveCriterion};
use kea_core::kea::{ExchangeConfig, ReturnMode};
use kea_core::{io, Dataset, KernelDescriptor, KernelFamily};
use serde::{Deserialize, Deserializer};

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(Option::<OneOrMany<T>>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    }))
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default, deserialize_with = "one_or_many")]
    pub function: Option<Vec<String>>,
    pub data: Option<PathBuf>,
    pub kernel: Option<String>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub p: Option<Vec<u8>>,
    pub length_scale: Option<f64>,
    pub transform: Option<PathBuf>,
    pub seed: Option<u64>,
    pub sampler: Option<String>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub sizes: Option<Vec<usize>>,
    pub size_count: Option<usize>,
    pub size_min: Option<usize>,
    pub size_max: Option<usize>,
    pub criterion: Option<String>,
    pub n_max: Option<usize>,
    pub n_min: Option<usize>,
    pub tol_f: Option<f64>,
    pub centers: Option<Vec<usize>>,
    pub model: Option<PathBuf>,
    pub exchanges: Option<usize>,
    pub add: Option<String>,
    pub remove: Option<String>,
    #[serde(rename = "return")]
    pub return_mode: Option<String>,
    pub stagnation_window: Option<usize>,
    pub stop_on_revisit: Option<bool>,
    pub out: Option<PathBuf>,
}

macro_rules! layer {
    ($hi:ident, $lo:ident; $($f:ident),* $(,)?) => {
        Settings { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl Settings {
    /// Fills every unset field from `lower`.
    pub fn or(self, lower: Settings) -> Settings {
        let (hi, lo) = (self, lower);
        layer!(hi, lo; function, data, kernel, p, length_scale, transform, seed, sampler,
            n_train, n_test, sizes, size_count, size_min, size_max, criterion, n_max, n_min,
            tol_f, centers, model, exchanges, add, remove, return_mode, stagnation_window,
            stop_on_revisit, out)
    }

    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
    }

    /// Data-source settings recorded in the metadata of an output file.
    pub fn from_metadata(meta: &[(String, String)]) -> Result<Settings> {
        let mut s = Settings::default();
        for (k, v) in meta {
            match k.as_str() {
                "function" => s.function = Some(vec![v.clone()]),
                "data" => s.data = Some(PathBuf::from(v)),
                "sampler" => s.sampler = Some(v.clone()),
                "seed" => s.seed = Some(v.parse().with_context(|| format!("model metadata seed `{v}`"))?),
                "n_train" => {
                    s.n_train = Some(v.parse().with_context(|| format!("model metadata n_train `{v}`"))?)
                }
                _ => {}
            }
        }
        Ok(s)
    }

    pub fn single_function(&self) -> Result<Option<TestFunction>> {
        match self.function.as_deref() {
            None => Ok(None),
            Some([f]) => Ok(Some(f.parse()?)),
            Some(_) => bail!("this command takes a single --function"),
        }
    }

    pub fn functions(&self) -> Result<Vec<TestFunction>> {
        match &self.function {
            Some(v) if !v.is_empty() => Ok(v.iter().map(|f| f.parse()).collect::<kea_core::Result<_>>()?),
            _ => bail!("--function is required"),
        }
    }

    pub fn sampler(&self, default: &str) -> Result<Sampler> {
        match self.sampler.as_deref().unwrap_or(default) {
            "uniform" => Ok(Sampler::Uniform { seed: self.seed.unwrap_or(0) }),
            "halton" => Ok(Sampler::Halton),
            other => bail!("unknown sampler `{other}` (expected uniform or halton)"),
        }
    }

    pub fn single_p(&self, default: u8) -> Result<u8> {
        match self.p.as_deref() {
            None => Ok(default),
            Some([p]) => Ok(*p),
            Some(_) => bail!("this command takes a single --p"),
        }
    }

    /// Kernel for smoothness `p`, with the shared family, length scale and
    /// transform settings.
    pub fn kernel(&self, p: u8, echo: &mut Echo) -> Result<KernelDescriptor> {
        let family: KernelFamily = self.kernel.as_deref().unwrap_or("matern").parse()?;
        let KernelFamily::Matern = family;
        let ls = self.length_scale.unwrap_or(1.0);
        let mut k = KernelDescriptor::matern(p)?.with_length_scale(ls)?;
        echo.push("kernel", family);
        echo.push("p", p);
        echo.push("length_scale", ls);
        if let Some(path) = &self.transform {
            k = k.with_transform(read_transform(path)?);
            echo.push("transform", path.display());
        }
        Ok(k)
    }

    pub fn add_criterion(&self, value: Option<&str>) -> Result<AddCriterion> {
        Ok(value.map(str::parse).transpose()?.unwrap_or_default())
    }

    pub fn remove_criterion(&self, value: Option<&str>) -> Result<RemoveCriterion> {
        Ok(value.map(str::parse).transpose()?.unwrap_or_default())
    }

    pub fn exchange(&self, echo: &mut Echo) -> Result<ExchangeConfig> {
        let mut cfg = ExchangeConfig::new(self.exchanges.unwrap_or(100))?;
        cfg.add_criterion = self.add_criterion(self.add.as_deref())?;
        cfg.remove_criterion = self.remove_criterion(self.remove.as_deref())?;
        cfg.return_mode = self
            .return_mode
            .as_deref()
            .map(str::parse::<ReturnMode>)
            .transpose()?
            .unwrap_or_default();
        if let Some(w) = self.stagnation_window {
            // 0 switches the stagnation stop off
            cfg.stagnation_window = (w > 0).then_some(w);
        }
        if let Some(r) = self.stop_on_revisit {
            cfg.stop_on_revisit = r;
        }
        cfg.validate()?;
        echo.push("exchanges", cfg.max_steps);
        echo.push("add", cfg.add_criterion);
        echo.push("remove", cfg.remove_criterion);
        echo.push("return", cfg.return_mode);
        echo.push(
            "stagnation_window",
            cfg.stagnation_window.map_or("none".to_string(), |w| w.to_string()),
        );
        echo.push("stop_on_revisit", cfg.stop_on_revisit);
        Ok(cfg)
    }

    /// Training data from `--data` or from a sampled test function.
    pub fn dataset(&self, echo: &mut Echo) -> Result<Dataset> {
        match (&self.data, self.single_function()?) {
            (Some(_), Some(_)) => bail!("--data and --function are mutually exclusive"),
            (None, None) => bail!("either --data or --function is required"),
            (Some(path), None) => {
                let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                let data = io::read_dataset(file).with_context(|| format!("reading {}", path.display()))?;
                echo.push("data", path.display());
                echo.push("n_train", data.len());
                Ok(data)
            }
            (None, Some(f)) => {
                let sampler = self.sampler("uniform")?;
                let n_train = self.n_train.unwrap_or(match f {
                    TestFunction::Highdim5 | TestFunction::Highdim6 => 10_000,
                    _ => 1000,
                });
                let (points, _) = sampler.train_test(f.dim(), n_train, 0)?;
                echo.push("function", f);
                match sampler {
                    Sampler::Uniform { seed } => {
                        echo.push("sampler", "uniform");
                        echo.push("seed", seed);
                    }
                    Sampler::Halton => echo.push("sampler", "halton"),
                }
                echo.push("n_train", n_train);
                let values = f.eval_all(&points)?;
                Ok(Dataset::new(points, values)?)
            }
        }
    }
}

pub fn read_transform(path: &Path) -> Result<kea_core::LinearTransform> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    io::read_transform(file).with_context(|| format!("reading transform {}", path.display()))
}

/// Resolved configuration, echoed as `# key=value` lines into every output.
#[derive(Debug, Default)]
pub struct Echo(pub Vec<(String, String)>);

impl Echo {
    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.0.push((key.to_string(), value.to_string()));
    }
}
