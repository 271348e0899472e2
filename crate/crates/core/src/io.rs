//! CSV formats: datasets, transforms, models, greedy histories, exchange
//! traces and experiment tables.
//!
//! Every writer emits optional `# key=value` metadata lines before the
//! header. Floats are written with Rust's shortest round-trip formatting, so
//! reading a file back reproduces the exact values.

use std::io::{BufRead, Read, Write};

use crate::bench::{Cell, ComparisonRow, KeaRow};
use crate::error::{KeaError, Result};
use crate::greedy::GreedyHistory;
use crate::kea::{ExchangeRecord, ExchangeTrace, StopReason};
use crate::kernel::{KernelDescriptor, KernelFamily, LinearTransform};
use crate::model::{Dataset, KernelModel};
use crate::points::Points;

pub type Metadata = [(String, String)];

fn write_metadata<W: Write>(w: &mut W, meta: &Metadata) -> Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

/// Splits `# key=value` lines from the CSV body.
fn split_metadata(text: &str) -> (Vec<(String, String)>, String) {
    let mut meta = Vec::new();
    let mut body = String::with_capacity(text.len());
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
        } else if !line.trim().is_empty() {
            body.push_str(line);
            body.push('\n');
        }
    }
    (meta, body)
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| KeaError::Parse(format!("{what}: `{field}` is not a number")))
}

fn parse_usize(field: &str, what: &str) -> Result<usize> {
    field
        .trim()
        .parse::<usize>()
        .map_err(|_| KeaError::Parse(format!("{what}: `{field}` is not an index")))
}

fn csv_reader(body: &str, headers: bool) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(headers)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes())
}

/// Reads `x1,...,xd,y` with a header line.
pub fn read_dataset<R: Read>(mut r: R) -> Result<Dataset> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let (_, body) = split_metadata(&text);
    let mut rdr = csv_reader(&body, true);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || header.get(header.len() - 1) != Some("y") {
        return Err(KeaError::Parse("dataset header must be x1,...,xd,y".into()));
    }
    let d = header.len() - 1;
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != d + 1 {
            return Err(KeaError::Parse(format!("dataset row {i} has {} fields", rec.len())));
        }
        for j in 0..d {
            coords.push(parse_f64(&rec[j], "dataset coordinate")?);
        }
        values.push(parse_f64(&rec[d], "dataset value")?);
    }
    Dataset::new(Points::new(d, coords)?, values)
}

pub fn write_dataset<W: Write>(w: &mut W, data: &Dataset, meta: &Metadata) -> Result<()> {
    write_metadata(w, meta)?;
    let header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    writeln!(w, "{},y", header.join(","))?;
    for (x, y) in data.points().iter().zip(data.values()) {
        let row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{},{y}", row.join(","))?;
    }
    Ok(())
}

/// Reads a headerless `d` x `d` matrix.
pub fn read_transform<R: Read>(mut r: R) -> Result<LinearTransform> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let (_, body) = split_metadata(&text);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in csv_reader(&body, false).records() {
        let rec = rec?;
        rows.push(rec.iter().map(|f| parse_f64(f, "transform entry")).collect::<Result<_>>()?);
    }
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(KeaError::Parse("transform must be a square d x d matrix".into()));
    }
    LinearTransform::new(d, rows.concat())
}

fn kernel_metadata(kernel: &KernelDescriptor) -> Vec<(String, String)> {
    let mut v = format!(
        "family={} p={} length_scale={}",
        kernel.family(),
        kernel.smoothness(),
        kernel.length_scale()
    );
    if let Some(t) = kernel.transform() {
        let rows: Vec<String> = (0..t.dim())
            .map(|i| t.row(i).iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
            .collect();
        v.push_str(&format!(" transform={}", rows.join(";")));
    }
    vec![("descriptor".to_string(), v)]
}

fn parse_kernel(spec: &str) -> Result<KernelDescriptor> {
    let mut family = None;
    let mut p = None;
    let mut length_scale = 1.0;
    let mut transform = None;
    for tok in spec.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| KeaError::Parse(format!("bad kernel field `{tok}`")))?;
        match k {
            "family" => family = Some(v.parse::<KernelFamily>()?),
            "p" => p = Some(v.parse::<u8>().map_err(|_| KeaError::Parse(format!("bad p `{v}`")))?),
            "length_scale" => length_scale = parse_f64(v, "length scale")?,
            "transform" => {
                let rows: Vec<Vec<f64>> = v
                    .split(';')
                    .map(|r| r.split(',').map(|x| parse_f64(x, "transform")).collect())
                    .collect::<Result<_>>()?;
                transform = Some(LinearTransform::new(rows.len(), rows.concat())?);
            }
            other => return Err(KeaError::Parse(format!("unknown kernel field `{other}`"))),
        }
    }
    let KernelFamily::Matern = family.ok_or_else(|| KeaError::Parse("kernel family missing".into()))?;
    let p = p.ok_or_else(|| KeaError::Parse("kernel smoothness missing".into()))?;
    let k = KernelDescriptor::matern(p)?.with_length_scale(length_scale)?;
    Ok(match transform {
        Some(t) => k.with_transform(t),
        None => k,
    })
}

/// Largest deviation, relative to `max |y|`, between the function described
/// by stored coefficients and the refit on import.
pub const IMPORT_TOL: f64 = 1e-6;

/// Centers and coefficients of a model as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub kernel: KernelDescriptor,
    pub centers: Vec<usize>,
    pub center_points: Points,
    pub alpha: Vec<f64>,
    pub metadata: Vec<(String, String)>,
}

impl ModelFile {
    pub fn from_model(model: &KernelModel) -> Self {
        Self {
            kernel: model.kernel().clone(),
            centers: model.centers().to_vec(),
            center_points: model.center_points().clone(),
            alpha: model.alpha().to_vec(),
            metadata: Vec::new(),
        }
    }

    /// Refits on `data` and checks that the stored centers and
    /// coefficients describe the same interpolant. Evaluations of the
    /// returned model use the stored coefficients unchanged.
    pub fn into_model(self, data: &Dataset) -> Result<KernelModel> {
        if self.center_points.dim() != data.dim() {
            return Err(KeaError::InvalidArgument(format!(
                "model has dimension {}, dataset {}",
                self.center_points.dim(),
                data.dim()
            )));
        }
        for (pos, &c) in self.centers.iter().enumerate() {
            if c >= data.len() || data.points().row(c) != self.center_points.row(pos) {
                return Err(KeaError::InvalidState(format!(
                    "center {c} does not match the dataset"
                )));
            }
        }
        let model = KernelModel::fit_direct(&self.kernel, data, &self.centers)?;
        // The stored coefficients define the interpolant; the refit supplies
        // the Newton state. Both must agree as functions on the base set.
        let tol = IMPORT_TOL * data.max_abs_value().max(f64::MIN_POSITIVE);
        let stored = model.with_alpha(self.alpha);
        let values = stored.evaluate(data.points())?;
        for (i, v) in values.iter().enumerate() {
            let refit = data.values()[i] - stored.residual()[i];
            if (v - refit).abs() > tol {
                return Err(KeaError::InvalidState(format!(
                    "stored coefficients disagree with the refit at base point {i}"
                )));
            }
        }
        Ok(stored)
    }
}

pub fn write_model<W: Write>(w: &mut W, model: &KernelModel, meta: &Metadata) -> Result<()> {
    write_metadata(w, meta)?;
    write_metadata(w, &kernel_metadata(model.kernel()))?;
    let d = model.center_points().dim();
    let xs: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    writeln!(w, "center_index,{},alpha", xs.join(","))?;
    for ((c, x), a) in model.centers().iter().zip(model.center_points().iter()).zip(model.alpha()) {
        let row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{c},{},{a}", row.join(","))?;
    }
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<ModelFile> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let (metadata, body) = split_metadata(&text);
    let kernel_spec = metadata
        .iter()
        .rev()
        .find(|(k, _)| k == "descriptor")
        .map(|(_, v)| v.clone())
        .ok_or_else(|| KeaError::Parse("model file lacks a `# descriptor=` line".into()))?;
    let kernel = parse_kernel(&kernel_spec)?;
    let mut rdr = csv_reader(&body, true);
    let header = rdr.headers()?.clone();
    if header.len() < 3 || &header[0] != "center_index" || &header[header.len() - 1] != "alpha" {
        return Err(KeaError::Parse("model header must be center_index,x1..xd,alpha".into()));
    }
    let d = header.len() - 2;
    let mut centers = Vec::new();
    let mut coords = Vec::new();
    let mut alpha = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        centers.push(parse_usize(&rec[0], "center index")?);
        for j in 0..d {
            coords.push(parse_f64(&rec[1 + j], "center coordinate")?);
        }
        alpha.push(parse_f64(&rec[d + 1], "alpha")?);
    }
    kernel.check_dim(d)?;
    Ok(ModelFile {
        kernel,
        centers,
        center_points: Points::new(d, coords)?,
        alpha,
        metadata,
    })
}

pub fn write_history<W: Write>(w: &mut W, history: &GreedyHistory, meta: &Metadata) -> Result<()> {
    write_metadata(w, meta)?;
    writeln!(w, "# stop={}", history.stop)?;
    writeln!(w, "step,action,index,criterion_value,max_residual,max_power")?;
    for r in &history.records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.step, history.action, r.index, r.criterion_value, r.max_residual, r.max_power
        )?;
    }
    Ok(())
}

pub fn write_trace<W: Write>(w: &mut W, trace: &ExchangeTrace, meta: &Metadata) -> Result<()> {
    write_metadata(w, meta)?;
    writeln!(w, "# initial_max_train_residual={}", trace.initial_residual)?;
    writeln!(w, "# return={} returned_iter={}", trace.return_mode, trace.returned_iter())?;
    writeln!(w, "iter,added,removed,max_train_residual,is_best")?;
    for r in &trace.records {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.iter,
            r.added,
            r.removed,
            r.max_train_residual,
            r.iter == trace.best_iter
        )?;
    }
    writeln!(w, "stop_reason,{}", trace.stop_reason)?;
    Ok(())
}

/// Parsed trace file: records, the `is_best` flags and the stop reason.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub records: Vec<ExchangeRecord>,
    pub is_best: Vec<bool>,
    pub stop_reason: StopReason,
}

pub fn read_trace<R: BufRead>(r: R) -> Result<TraceFile> {
    let mut records = Vec::new();
    let mut is_best = Vec::new();
    let mut stop_reason = None;
    let mut saw_header = false;
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "iter,added,removed,max_train_residual,is_best" {
                return Err(KeaError::Parse(format!("unexpected trace header `{line}`")));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields[0] == "stop_reason" && fields.len() == 2 {
            stop_reason = Some(fields[1].parse::<StopReason>()?);
            continue;
        }
        if fields.len() != 5 || stop_reason.is_some() {
            return Err(KeaError::Parse(format!("bad trace line `{line}`")));
        }
        records.push(ExchangeRecord {
            iter: parse_usize(fields[0], "iter")?,
            added: parse_usize(fields[1], "added")?,
            removed: parse_usize(fields[2], "removed")?,
            max_train_residual: parse_f64(fields[3], "max_train_residual")?,
        });
        is_best.push(
            fields[4]
                .parse::<bool>()
                .map_err(|_| KeaError::Parse(format!("bad is_best `{}`", fields[4])))?,
        );
    }
    Ok(TraceFile {
        records,
        is_best,
        stop_reason: stop_reason.ok_or_else(|| KeaError::Parse("trace lacks a stop_reason line".into()))?,
    })
}

fn cell_text(c: &Cell<f64>) -> String {
    match c {
        Cell::Value(v) => v.to_string(),
        Cell::Failed(reason) => format!("fail:{}", reason.replace(',', ";")),
    }
}

pub fn write_comparison<W: Write>(w: &mut W, rows: &[ComparisonRow], meta: &Metadata) -> Result<()> {
    write_metadata(w, meta)?;
    writeln!(w, "function,method,n,max_train_error")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.function, r.method, r.n, cell_text(&r.max_train_error))?;
    }
    Ok(())
}

pub fn write_kea_rows<W: Write>(w: &mut W, rows: &[KeaRow], meta: &Metadata) -> Result<()> {
    write_metadata(w, meta)?;
    writeln!(w, "function,p,n,test_err_before,test_err_after,ratio,stop_reason,steps_used")?;
    for r in rows {
        match &r.outcome {
            Cell::Value(o) => writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.function, r.p, r.n, o.test_err_before, o.test_err_after, o.ratio, o.stop_reason, o.steps_used
            )?,
            Cell::Failed(reason) => {
                let f = cell_text(&Cell::Failed(reason.clone()));
                writeln!(w, "{},{},{},{f},{f},{f},{f},0", r.function, r.p, r.n)?
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::{greedy_insert, AddCriterion, InsertOptions};
    use crate::kea::{kea_run, ExchangeConfig};
    use crate::testutil::separated_data;
    use proptest::prelude::*;

    #[test]
    fn model_round_trip_reproduces_evaluations() {
        let data = separated_data(9, 60, 2, 0.25);
        let k = KernelDescriptor::matern(3)
            .unwrap()
            .with_length_scale(1.7)
            .unwrap()
            .with_transform(LinearTransform::new(2, vec![1.0, 0.3, -0.2, 0.8]).unwrap());
        let (m, _) = greedy_insert(&k, &data, AddCriterion::FGreedy, InsertOptions::new(15)).unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &m, &[("seed".into(), "9".into())]).unwrap();
        let file = read_model(buf.as_slice()).unwrap();
        assert_eq!(file.kernel, k);
        assert_eq!(file.alpha, m.alpha());
        assert!(file.metadata.iter().any(|(k, v)| k == "seed" && v == "9"));
        let back = file.into_model(&data).unwrap();
        let a = m.evaluate(data.points()).unwrap();
        let b = back.evaluate(data.points()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn tampered_model_is_rejected() {
        let data = separated_data(4, 30, 1, 0.25);
        let k = KernelDescriptor::matern(1).unwrap();
        let m = KernelModel::fit_direct(&k, &data, &[0, 5, 9]).unwrap();
        let mut file = ModelFile::from_model(&m);
        file.alpha[1] += 0.5;
        assert!(matches!(file.into_model(&data), Err(KeaError::InvalidState(_))));
        let mut file = ModelFile::from_model(&m);
        file.centers[0] = 1;
        assert!(file.into_model(&data).is_err());
        assert!(read_model("center_index,x1,alpha\n0,0.5,1\n".as_bytes()).is_err());
    }

    #[test]
    fn trace_format() {
        let data = separated_data(5, 40, 2, 0.25);
        let k = KernelDescriptor::matern(2).unwrap();
        let (m, _) = greedy_insert(&k, &data, AddCriterion::FGreedy, InsertOptions::new(6)).unwrap();
        let (_, trace) = kea_run(&m, &data, &ExchangeConfig::new(25).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace, &[]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text.lines().last().unwrap(),
            format!("stop_reason,{}", trace.stop_reason)
        );
        let parsed = read_trace(buf.as_slice()).unwrap();
        assert_eq!(parsed.records, trace.records);
        assert_eq!(parsed.stop_reason, trace.stop_reason);
        assert!(parsed.is_best.iter().filter(|b| **b).count() <= 1);
    }

    #[test]
    fn dataset_and_transform_files() {
        let text = "# source=test\nx1,x2,y\n0,0,1\n0.5,0.25,2\n";
        let data = read_dataset(text.as_bytes()).unwrap();
        assert_eq!(data.dim(), 2);
        assert_eq!(data.values(), &[1.0, 2.0]);
        assert!(read_dataset("x1,x2,z\n0,0,1\n".as_bytes()).is_err());
        assert!(matches!(
            read_dataset("x1,y\n0,1\n0,2\n".as_bytes()),
            Err(KeaError::DuplicatePoints { .. })
        ));

        let t = read_transform("2,0\n0,2\n".as_bytes()).unwrap();
        assert_eq!(t, LinearTransform::scaled_identity(2, 2.0));
        assert!(read_transform("1,0\n0\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn dataset_file_round_trip(seed in any::<u64>(), d in 1usize..=4, n in 1usize..30) {
            let pts = crate::bench::sample_uniform(d, n, seed);
            let data = Dataset::from_fn(pts, |x| x.iter().map(|v| v.exp()).sum()).unwrap();
            let mut buf = Vec::new();
            write_dataset(&mut buf, &data, &[]).unwrap();
            prop_assert_eq!(read_dataset(buf.as_slice()).unwrap(), data);
        }
    }
}
