//! File formats.
//!
//! * `network.csv`: header `i,j,weight`, one row per unordered pair with
//!   1-based `i < j`, zero weights included.
//! * `interp.csv`: p rows × n columns of decimals, no header.
//! * `chain.csv`: one row per retained draw under a header naming every
//!   column; the column order is fixed for a given [`CHAIN_FORMAT_VERSION`].
//! * JSON for metadata, truth and summaries.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write followed by a read reproduces the values exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::InterpData;
use crate::matrix::Matrix;
use crate::model::{Hyperparams, RestrictionKind, WeightedNetwork};
use crate::sampler::{AcceptanceSummary, ChainRecord, SamplerConfig};

pub const CHAIN_FORMAT_VERSION: u32 = 1;
pub const META_FORMAT_VERSION: u32 = 1;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn csv_reader(path: &Path, headers: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(headers)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

fn parse_f64(path: &Path, field: &str, line: u64) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::parse(path, format!("line {line}: '{field}' is not a number")))
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::parse(path, e.to_string()))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn write_network(path: impl AsRef<Path>, net: &WeightedNetwork) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut out = String::from("i,j,weight\n");
    for (i, j, wt) in net.pairs() {
        out.push_str(&format!("{},{},{}\n", i + 1, j + 1, wt));
    }
    w.write_all(out.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads an edge list. Node count is `n` when given, else the largest
/// index seen. Pairs may appear in either orientation but only once.
pub fn read_network(path: impl AsRef<Path>, n: Option<usize>) -> Result<WeightedNetwork> {
    let path = path.as_ref();
    let mut rdr = csv_reader(path, true)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["i", "j", "weight"] {
        return Err(Error::parse(
            path,
            format!(
                "expected header i,j,weight, found {}",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut edges = Vec::new();
    let mut max_node = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(Error::parse(
                path,
                format!("line {line}: expected 3 fields, found {}", rec.len()),
            ));
        }
        let index = |s: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(Error::parse(
                    path,
                    format!("line {line}: '{s}' is not a 1-based node index"),
                )),
            }
        };
        let (i, j) = (index(&rec[0])?, index(&rec[1])?);
        let w = parse_f64(path, &rec[2], line)?;
        max_node = max_node.max(i).max(j);
        edges.push((i - 1, j - 1, w));
    }
    let n = n.unwrap_or(max_node);
    if max_node > n {
        return Err(Error::Data(format!(
            "{} names node {max_node} but the network has {n} nodes",
            path.display()
        )));
    }
    WeightedNetwork::from_real_edges(n, edges)
}

pub fn write_interp(path: impl AsRef<Path>, y: &InterpData<f64>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut out = String::new();
    for l in 0..y.y.rows() {
        let row: Vec<String> = y.y.row(l).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    w.write_all(out.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_interp(path: impl AsRef<Path>) -> Result<InterpData<f64>> {
    let path = path.as_ref();
    let mut rdr = csv_reader(path, false)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .map(|f| parse_f64(path, f, line))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{} holds no rows", path.display())));
    }
    let y = Matrix::from_rows(&rows).ok_or_else(|| Error::parse(path, "rows have different lengths"))?;
    if !y.all_finite() {
        return Err(Error::Data(format!("{} holds non-finite values", path.display())));
    }
    Ok(InterpData { y })
}

/// Column names of `chain.csv` for the given sizes, in file order.
pub fn chain_header(n: usize, p: usize, d: usize) -> Vec<String> {
    let mut h = vec!["draw".to_string(), "alpha".to_string()];
    for k in 1..=d {
        h.extend((1..=n).map(|i| format!("f[{k},{i}]")));
    }
    for l in 1..=p {
        h.extend((1..=d).map(|k| format!("lambda[{l},{k}]")));
    }
    for l in 1..=p {
        h.extend((1..=d).map(|k| format!("delta[{l},{k}]")));
    }
    h.extend((1..=p).map(|l| format!("tau[{l}]")));
    h.extend((1..=d).map(|k| format!("col_scale[{k}]")));
    h.push("kappa".into());
    h.extend((1..=p).map(|l| format!("idio_var[{l}]")));
    h.push("log_post".into());
    h
}

fn chain_row(rec: &ChainRecord<f64>) -> String {
    let mut f: Vec<String> = vec![rec.draw.to_string(), rec.alpha.to_string()];
    f.extend(rec.positions.iter().map(|v| v.to_string()));
    f.extend(rec.lambda.iter().map(|v| v.to_string()));
    f.extend(rec.indicators.iter().map(|&b| u8::from(b).to_string()));
    f.extend(rec.tau.iter().map(|v| v.to_string()));
    f.extend(rec.col_scale.iter().map(|v| v.to_string()));
    f.push(rec.kappa.to_string());
    f.extend(rec.idio_var.iter().map(|v| v.to_string()));
    f.push(rec.log_posterior.to_string());
    f.join(",")
}

/// Streams records to `chain.csv` as they are produced.
pub struct ChainWriter {
    out: BufWriter<File>,
    path: std::path::PathBuf,
    width: usize,
}

impl ChainWriter {
    pub fn create(path: impl AsRef<Path>, n: usize, p: usize, d: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut out = create(&path)?;
        let header = chain_header(n, p, d);
        // names like f[1,2] hold commas, so they are quoted
        let line: Vec<String> = header
            .iter()
            .map(|h| if h.contains(',') { format!("\"{h}\"") } else { h.clone() })
            .collect();
        writeln!(out, "{}", line.join(",")).map_err(|e| Error::io(&path, e))?;
        Ok(ChainWriter {
            out,
            path,
            width: header.len(),
        })
    }

    pub fn write(&mut self, rec: &ChainRecord<f64>) -> Result<()> {
        let row = chain_row(rec);
        debug_assert_eq!(row.split(',').count(), self.width);
        writeln!(self.out, "{row}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_chain(path: impl AsRef<Path>, records: &[ChainRecord<f64>], n: usize, p: usize, d: usize) -> Result<()> {
    let mut w = ChainWriter::create(path, n, p, d)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}

/// Recovers (n, p, d) from a chain header and checks it is exactly the
/// header those sizes produce.
fn chain_dims(path: &Path, header: &[String]) -> Result<(usize, usize, usize)> {
    let count = |prefix: &str| header.iter().filter(|h| h.starts_with(prefix)).count();
    let (d, p) = (count("col_scale["), count("tau["));
    let n = count("f[").checked_div(d).unwrap_or(0);
    if n == 0 || p == 0 || d == 0 || chain_header(n, p, d) != header {
        return Err(Error::parse(
            path,
            "header is not a chain header of this format version",
        ));
    }
    Ok((n, p, d))
}

pub fn read_chain(path: impl AsRef<Path>) -> Result<Vec<ChainRecord<f64>>> {
    let path = path.as_ref();
    let mut rdr = csv_reader(path, true)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let (n, p, d) = chain_dims(path, &header)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut fields = rec.iter();
        let mut next = || -> Result<f64> {
            let f = fields
                .next()
                .ok_or_else(|| Error::parse(path, format!("line {line}: too few fields")))?;
            parse_f64(path, f, line)
        };
        let draw = next()? as usize;
        let alpha = next()?;
        let positions = Matrix::from_fn(d, n, |_, _| 0.0);
        let mut positions = positions;
        for v in positions.iter_mut() {
            *v = next()?;
        }
        let mut lambda = Matrix::zeros(p, d);
        for v in lambda.iter_mut() {
            *v = next()?;
        }
        let mut indicators = Matrix::filled(p, d, false);
        for v in indicators.iter_mut() {
            *v = match next()? {
                0.0 => false,
                1.0 => true,
                x => return Err(Error::parse(path, format!("line {line}: indicator {x} is not 0 or 1"))),
            };
        }
        let tau = (0..p).map(|_| next()).collect::<Result<Vec<_>>>()?;
        let col_scale = (0..d).map(|_| next()).collect::<Result<Vec<_>>>()?;
        let kappa = next()?;
        let idio_var = (0..p).map(|_| next()).collect::<Result<Vec<_>>>()?;
        let log_posterior = next()?;
        out.push(ChainRecord {
            draw,
            alpha,
            positions,
            lambda,
            indicators,
            tau,
            col_scale,
            kappa,
            idio_var,
            log_posterior,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub p: usize,
    pub d: usize,
}

/// Input files of a fit, as given on the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInputs {
    pub network: String,
    pub interp: String,
}

/// Contents of `meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub format_version: u32,
    pub chain_format_version: u32,
    pub seed: u64,
    pub dims: Dims,
    pub restriction: RestrictionKind,
    pub config: SamplerConfig,
    pub hyperparameters: Hyperparams<f64>,
    pub acceptance: AcceptanceSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<RunInputs>,
}

/// Posterior mean Λ as a table: `l,lambda_1,…,lambda_d`.
pub fn write_loadings(path: impl AsRef<Path>, lambda: &Matrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut out = String::from("l");
    for k in 1..=lambda.cols() {
        out.push_str(&format!(",lambda_{k}"));
    }
    out.push('\n');
    for l in 0..lambda.rows() {
        out.push_str(&(l + 1).to_string());
        for v in lambda.row(l) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    w.write_all(out.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Writes `i,j,observed,fitted,abs_diff` rows, 1-based.
pub fn write_edge_fit(path: impl AsRef<Path>, rows: &[crate::diagnostics::EdgeFit]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut out = String::from("i,j,observed,fitted,abs_diff\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.i + 1,
            r.j + 1,
            r.observed,
            r.fitted,
            r.abs_diff
        ));
    }
    w.write_all(out.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

const SVG_SIZE: f64 = 480.0;
const SVG_MARGIN: f64 = 24.0;
/// Draws beyond this many are thinned evenly before plotting.
pub const SVG_MAX_DRAWS: usize = 200;

/// Scatter of the first two latent coordinates: posterior draws as small
/// points, truth (when given) as triangles.
pub fn write_positions_svg(path: impl AsRef<Path>, draws: &[Matrix<f64>], truth: Option<&Matrix<f64>>) -> Result<()> {
    let path = path.as_ref();
    let stride = draws.len().div_ceil(SVG_MAX_DRAWS).max(1);
    let shown: Vec<&Matrix<f64>> = draws.iter().step_by(stride).collect();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for m in shown.iter().copied().chain(truth) {
        if m.rows() < 2 {
            return Err(Error::Dimension(
                "positions need at least two coordinates to plot".into(),
            ));
        }
        pts.extend((0..m.cols()).map(|i| (m[(0, i)], m[(1, i)])));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        lo = lo.min(x).min(y);
        hi = hi.max(x).max(y);
    }
    if !(lo.is_finite() && hi.is_finite()) {
        lo = -1.0;
        hi = 1.0;
    }
    let span = (hi - lo).max(1e-9);
    let scale = (SVG_SIZE - 2.0 * SVG_MARGIN) / span;
    let sx = |x: f64| SVG_MARGIN + (x - lo) * scale;
    let sy = |y: f64| SVG_SIZE - SVG_MARGIN - (y - lo) * scale;

    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_SIZE}\" height=\"{SVG_SIZE}\" viewBox=\"0 0 {SVG_SIZE} {SVG_SIZE}\">\n"
    );
    out.push_str(&format!(
        "<rect width=\"{SVG_SIZE}\" height=\"{SVG_SIZE}\" fill=\"white\"/>\n"
    ));
    if lo < 0.0 && hi > 0.0 {
        out.push_str(&format!(
            "<g stroke=\"#bbb\" stroke-width=\"0.5\"><line x1=\"{:.2}\" y1=\"0\" x2=\"{:.2}\" y2=\"{SVG_SIZE}\"/><line x1=\"0\" y1=\"{:.2}\" x2=\"{SVG_SIZE}\" y2=\"{:.2}\"/></g>\n",
            sx(0.0),
            sx(0.0),
            sy(0.0),
            sy(0.0)
        ));
    }
    out.push_str("<g id=\"draws\" fill=\"steelblue\" fill-opacity=\"0.25\">\n");
    for m in &shown {
        for i in 0..m.cols() {
            out.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.5\"/>\n",
                sx(m[(0, i)]),
                sy(m[(1, i)])
            ));
        }
    }
    out.push_str("</g>\n");
    if let Some(t) = truth {
        out.push_str("<g id=\"truth\" fill=\"crimson\" stroke=\"black\" stroke-width=\"0.5\">\n");
        for i in 0..t.cols() {
            let (x, y) = (sx(t[(0, i)]), sy(t[(1, i)]));
            out.push_str(&format!(
                "<polygon points=\"{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\"/>\n",
                x,
                y - 5.0,
                x - 4.5,
                y + 3.5,
                x + 4.5,
                y + 3.5
            ));
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    let mut w = create(path)?;
    w.write_all(out.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
