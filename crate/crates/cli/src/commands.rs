use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use kea_core::bench::{run_comparison, run_kea_experiment, ExpansionSizes, ExperimentConfig};
use kea_core::greedy::{greedy_insert, greedy_remove, InsertOptions};
use kea_core::kea::kea_run;
use kea_core::{io, KernelModel};

use crate::settings::{read_transform, Echo, Settings};

fn header(command: &str, stamp: bool) -> Echo {
    let mut echo = Echo::default();
    echo.push("command", command);
    echo.push("version", env!("CARGO_PKG_VERSION"));
    if stamp {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        echo.push("timestamp", secs);
    }
    echo
}

/// `m.csv` -> `m.<tag>.csv`.
fn sibling(out: &Path, tag: &str) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    let ext = out.extension().map_or("csv".into(), |e| e.to_string_lossy());
    out.with_file_name(format!("{stem}.{tag}.{ext}"))
}

fn write_output(
    path: Option<&Path>,
    f: impl FnOnce(&mut Box<dyn Write>) -> kea_core::Result<()>,
) -> Result<()> {
    let mut w: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn required_out(s: &Settings) -> Result<&Path> {
    s.out.as_deref().context("--out is required")
}

pub fn fit(s: &Settings, stamp: bool) -> Result<()> {
    let out = required_out(s)?;
    let mut echo = header("fit", stamp);
    let data = s.dataset(&mut echo)?;
    let kernel = s.kernel(s.single_p(2)?, &mut echo)?;
    let centers = s.centers.clone().unwrap_or_else(|| (0..data.len()).collect());
    echo.push("centers", centers.len());
    let model = KernelModel::fit_direct(&kernel, &data, &centers)?;
    echo.push("max_residual", model.max_residual());
    write_output(Some(out), |w| io::write_model(w, &model, &echo.0))
}

pub fn greedy(s: &Settings, stamp: bool) -> Result<()> {
    let out = required_out(s)?;
    let mut echo = header("greedy", stamp);
    let data = s.dataset(&mut echo)?;
    let kernel = s.kernel(s.single_p(2)?, &mut echo)?;
    let crit = s.add_criterion(s.criterion.as_deref())?;
    let mut opts = InsertOptions::new(s.n_max.context("--n-max is required")?);
    if let Some(t) = s.tol_f {
        opts.tol_f = t;
    }
    echo.push("criterion", crit);
    echo.push("n_max", opts.n_max);
    echo.push("tol_f", opts.tol_f);
    let (model, history) = greedy_insert(&kernel, &data, crit, opts)?;
    echo.push("size", model.size());
    echo.push("max_residual", model.max_residual());
    write_output(Some(out), |w| io::write_model(w, &model, &echo.0))?;
    write_output(Some(&sibling(out, "history")), |w| io::write_history(w, &history, &echo.0))
}

pub fn remove(s: &Settings, stamp: bool) -> Result<()> {
    let out = required_out(s)?;
    let mut echo = header("remove", stamp);
    let data = s.dataset(&mut echo)?;
    let kernel = s.kernel(s.single_p(2)?, &mut echo)?;
    let crit = s.remove_criterion(s.criterion.as_deref())?;
    let n_min = s.n_min.context("--n-min is required")?;
    echo.push("criterion", crit);
    echo.push("n_min", n_min);
    let (model, history) = greedy_remove(&kernel, &data, crit, n_min, None)?;
    echo.push("size", model.size());
    echo.push("max_residual", model.max_residual());
    write_output(Some(out), |w| io::write_model(w, &model, &echo.0))?;
    write_output(Some(&sibling(out, "history")), |w| io::write_history(w, &history, &echo.0))
}

pub fn kea(s: Settings, stamp: bool) -> Result<()> {
    let mut exchange_echo = Echo::default();
    let cfg = s.exchange(&mut exchange_echo)?;
    let out = required_out(&s)?.to_path_buf();
    let mut echo = header("kea", stamp);

    let model_file = match &s.model {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Some(io::read_model(file).with_context(|| format!("reading model {}", path.display()))?)
        }
        None => None,
    };
    // Without an explicit data source, reuse the one recorded in the model.
    let s = match &model_file {
        Some(f) if s.data.is_none() && s.function.is_none() => s.or(Settings::from_metadata(&f.metadata)?),
        _ => s,
    };
    let data = s.dataset(&mut echo)?;

    let initial = match model_file {
        Some(file) => {
            if s.kernel.is_some() || s.p.is_some() || s.length_scale.is_some() || s.transform.is_some() {
                bail!("the kernel is fixed by the model file; drop --kernel, --p, --length-scale and --transform");
            }
            echo.push("model", s.model.as_deref().unwrap_or(Path::new("")).display());
            echo.push("kernel", file.kernel.family());
            echo.push("p", file.kernel.smoothness());
            echo.push("length_scale", file.kernel.length_scale());
            file.into_model(&data)
                .context("the model file does not match the dataset")?
        }
        None => {
            let kernel = s.kernel(s.single_p(2)?, &mut echo)?;
            let crit = s.add_criterion(s.criterion.as_deref())?;
            let n = s.n_max.context("either --model or --n-max is required")?;
            echo.push("criterion", crit);
            echo.push("n_max", n);
            greedy_insert(&kernel, &data, crit, InsertOptions::new(n))?.0
        }
    };
    echo.0.extend(exchange_echo.0);
    echo.push("size", initial.size());
    echo.push("initial_max_residual", initial.max_residual());

    let (model, trace) = kea_run(&initial, &data, &cfg)?;
    echo.push("final_max_residual", model.max_residual());
    echo.push("stop_reason", trace.stop_reason);
    echo.push("steps_used", trace.steps_used());
    write_output(Some(&out), |w| io::write_model(w, &model, &echo.0))?;
    write_output(Some(&sibling(&out, "trace")), |w| io::write_trace(w, &trace, &echo.0))
}

/// Shared overrides of the benchmark configuration.
fn apply_common(cfg: &mut ExperimentConfig, s: &Settings) -> Result<()> {
    if s.data.is_some() {
        bail!("benchmark runs use built-in test functions; --data is not accepted");
    }
    if let Some(k) = &s.kernel {
        let _: kea_core::KernelFamily = k.parse()?;
    }
    if let Some(l) = s.length_scale {
        cfg.length_scale = l;
    }
    if let Some(t) = &s.transform {
        cfg.transform = Some(read_transform(t)?);
    }
    if let Some(n) = s.n_train {
        cfg.n_train = n;
    }
    Ok(())
}

pub fn compare(s: &Settings, stamp: bool) -> Result<()> {
    let f = s.single_function()?.context("--function is required")?;
    let mut cfg = ExperimentConfig::comparison_defaults(f);
    apply_common(&mut cfg, s)?;
    cfg.smoothness = vec![s.single_p(2)?];
    cfg.sampler = s.sampler("halton")?;
    cfg.add_criterion = s.add_criterion(s.add.as_deref())?;
    cfg.remove_criterion = s.remove_criterion(s.remove.as_deref())?;

    let mut echo = header("compare", stamp);
    const KEYS: [&str; 9] =
        ["function", "kernel", "p", "length_scale", "transform", "sampler", "n_train", "add", "remove"];
    echo.0.extend(cfg.metadata().into_iter().filter(|(k, _)| KEYS.contains(&k.as_str()) || k == "transform_rows"));
    let rows = run_comparison(&cfg)?;
    write_output(s.out.as_deref(), |w| io::write_comparison(w, &rows, &echo.0))
}

pub fn experiment(s: &Settings, stamp: bool) -> Result<()> {
    let functions = s.functions()?;
    let mut echo = header("experiment", stamp);
    let mut rows = Vec::new();
    for (i, &f) in functions.iter().enumerate() {
        let mut cfg = ExperimentConfig::kea_defaults(f, s.seed.unwrap_or(0));
        apply_common(&mut cfg, s)?;
        if let Some(p) = &s.p {
            cfg.smoothness = p.clone();
        }
        cfg.sampler = s.sampler("uniform")?;
        if let Some(n) = s.n_test {
            cfg.n_test = n;
        }
        cfg.sizes = match &s.sizes {
            Some(v) => ExpansionSizes::Explicit(v.clone()),
            None => ExpansionSizes::LogSpaced {
                count: s.size_count.unwrap_or(10),
                min: s.size_min.unwrap_or(5),
                max: s.size_max.unwrap_or(f.default_max_size()),
            },
        };
        // the insertion rule of the greedy start is also KEA's insertion rule
        cfg.exchange = s.exchange(&mut Echo::default())?;
        cfg.add_criterion = cfg.exchange.add_criterion;
        cfg.remove_criterion = cfg.exchange.remove_criterion;
        cfg.validate().with_context(|| format!("configuration for {f}"))?;

        if i == 0 {
            let names: Vec<&str> = functions.iter().map(|f| f.name()).collect();
            echo.push("function", names.join(";"));
            echo.0.extend(cfg.metadata().into_iter().filter(|(k, _)| k != "function" && k != "sizes"));
        }
        echo.push(&format!("sizes.{f}"), cfg.sizes.resolve()?.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";"));
        rows.extend(run_kea_experiment(&cfg)?);
    }
    write_output(s.out.as_deref(), |w| io::write_kea_rows(w, &rows, &echo.0))
}
