//! Text formats: network weights (`GCSNET 1`), dense matrices
//! (`GCSMAT 1 rows cols`), plain vectors and the CSV tables exchanged by
//! the command line tool. Floats are written with 17 significant digits;
//! row indices in CSV files are 1-based.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;

use crate::coherence::{CoherenceMethod, CoherenceVector};
use crate::error::{Error, Result};
use crate::generative_model::GenerativeNetwork;
use crate::linalg::Matrix;
use crate::recovery::MeasurementSet;
use crate::sampling::{ProbabilityVector, SamplingPlan};
use crate::Real;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Non-empty lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_floats<T: Real>(line_no: usize, line: &str, expected: usize) -> Result<Vec<T>> {
    let vals: Vec<T> = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map(T::c)
                .map_err(|_| parse_err(line_no, format!("invalid number '{tok}'")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != expected {
        return Err(parse_err(
            line_no,
            format!("expected {expected} values, found {}", vals.len()),
        ));
    }
    Ok(vals)
}

fn parse_usizes(line_no: usize, tokens: &[&str]) -> Result<Vec<usize>> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| parse_err(line_no, format!("invalid integer '{t}'")))
        })
        .collect()
}

fn write_row<T: Real, W: Write>(w: &mut W, row: &[T]) -> std::io::Result<()> {
    let mut first = true;
    for v in row {
        if !first {
            w.write_all(b" ")?;
        }
        first = false;
        w.write_all(v.to_text().as_bytes())?;
    }
    w.write_all(b"\n")
}

pub fn write_network<T: Real, W: Write>(net: &GenerativeNetwork<T>, mut w: W) -> Result<()> {
    writeln!(w, "GCSNET 1")?;
    let widths: Vec<String> = net.widths().iter().map(|k| k.to_string()).collect();
    writeln!(w, "{} {}", net.depth(), widths.join(" "))?;
    for m in net.weights() {
        for i in 0..m.rows() {
            write_row(&mut w, m.row(i))?;
        }
    }
    Ok(())
}

pub fn parse_network<T: Real>(text: &str) -> Result<GenerativeNetwork<T>> {
    let mut lines = content_lines(text);
    let (l1, magic) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty network file"))?;
    if magic.split_whitespace().collect::<Vec<_>>() != ["GCSNET", "1"] {
        return Err(parse_err(
            l1,
            format!("expected 'GCSNET 1', found '{magic}'"),
        ));
    }
    let (l2, header) = lines
        .next()
        .ok_or_else(|| parse_err(l1 + 1, "missing dimension header"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let nums = parse_usizes(l2, &tokens)?;
    let (&d, widths) = nums
        .split_first()
        .ok_or_else(|| parse_err(l2, "empty dimension header"))?;
    if d == 0 || widths.len() != d + 1 {
        return Err(parse_err(
            l2,
            format!("depth {d} needs {} widths, found {}", d + 1, widths.len()),
        ));
    }
    crate::generative_model::validate_widths(widths).map_err(|e| parse_err(l2, e.to_string()))?;
    let mut weights = Vec::with_capacity(d);
    for layer in 0..d {
        let (rows, cols) = (widths[layer + 1], widths[layer]);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, line) = lines.next().ok_or_else(|| {
                parse_err(0, format!("unexpected end of file in layer {}", layer + 1))
            })?;
            data.extend(parse_floats::<T>(ln, line, cols)?);
        }
        weights.push(Matrix::from_row_major(rows, cols, data)?);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing data after last layer"));
    }
    GenerativeNetwork::new(widths.to_vec(), weights)
}

pub fn read_network<T: Real>(path: &Path) -> Result<GenerativeNetwork<T>> {
    parse_network(&read_to_string(path)?)
}

pub fn save_network<T: Real>(net: &GenerativeNetwork<T>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_network(net, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Matrix file: `MAGIC 1 rows cols`, then `rows` lines of `cols` floats.
pub fn write_matrix<T: Real, W: Write>(m: &Matrix<T>, magic: &str, mut w: W) -> Result<()> {
    writeln!(w, "{magic} 1 {} {}", m.rows(), m.cols())?;
    for i in 0..m.rows() {
        write_row(&mut w, m.row(i))?;
    }
    Ok(())
}

pub fn parse_matrix<T: Real>(text: &str, magic: &str) -> Result<Matrix<T>> {
    let mut lines = content_lines(text);
    let (l1, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty matrix file"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 4 || tokens[0] != magic || tokens[1] != "1" {
        return Err(parse_err(
            l1,
            format!("expected '{magic} 1 rows cols', found '{header}'"),
        ));
    }
    let dims = parse_usizes(l1, &tokens[2..])?;
    let (rows, cols) = (dims[0], dims[1]);
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("missing matrix row {}", r + 1)))?;
        data.extend(parse_floats::<T>(ln, line, cols)?);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing data after last row"));
    }
    Matrix::from_row_major(rows, cols, data)
}

pub fn read_matrix<T: Real>(path: &Path, magic: &str) -> Result<Matrix<T>> {
    parse_matrix(&read_to_string(path)?, magic)
}

pub fn save_matrix<T: Real>(m: &Matrix<T>, magic: &str, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix(m, magic, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Whitespace separated floats; `#` starts a comment.
pub fn parse_vector<T: Real>(text: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (ln, line) in content_lines(text) {
        let body = line.split('#').next().unwrap_or("");
        for tok in body.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(ln, format!("invalid number '{tok}'")))?;
            out.push(T::c(v));
        }
    }
    Ok(out)
}

pub fn read_vector<T: Real>(path: &Path) -> Result<Vec<T>> {
    parse_vector(&read_to_string(path)?)
}

pub fn save_vector<T: Real>(v: &[T], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for x in v {
        writeln!(w, "{}", x.to_text())?;
    }
    w.flush()?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    BufReader::new(File::open(path)?).read_to_string(&mut s)?;
    Ok(s)
}

fn csv_records<R: Read>(r: R, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(parse_err(
            1,
            format!(
                "expected header '{}', found '{}'",
                header.join(","),
                found.join(",")
            ),
        ));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(parse_err(i + 2, "wrong number of fields"));
        }
        out.push((i + 2, rec));
    }
    Ok(out)
}

fn field<V: std::str::FromStr>(line: usize, rec: &csv::StringRecord, i: usize) -> Result<V> {
    rec[i]
        .parse()
        .map_err(|_| parse_err(line, format!("invalid value '{}'", &rec[i])))
}

/// `index,value` table with 1-based consecutive indices.
fn read_indexed<T: Real, R: Read>(r: R, value: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (line, rec) in csv_records(r, &["index", value])? {
        let idx: usize = field(line, &rec, 0)?;
        if idx != out.len() + 1 {
            return Err(parse_err(
                line,
                format!("expected index {}, found {idx}", out.len() + 1),
            ));
        }
        let v: f64 = field(line, &rec, 1)?;
        out.push(T::c(v));
    }
    Ok(out)
}

fn write_indexed<T: Real, W: Write>(w: W, value: &str, vals: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["index", value])?;
    for (i, v) in vals.iter().enumerate() {
        wtr.write_record([(i + 1).to_string(), v.to_text()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_coherence<T: Real, W: Write>(c: &CoherenceVector<T>, w: W) -> Result<()> {
    write_indexed(w, "alpha", &c.alpha)
}

pub fn read_coherence<T: Real, R: Read>(r: R) -> Result<CoherenceVector<T>> {
    let alpha = read_indexed(r, "alpha")?;
    CoherenceVector::new(alpha, CoherenceMethod::Loaded)
}

pub fn write_probabilities<T: Real, W: Write>(p: &ProbabilityVector<T>, w: W) -> Result<()> {
    write_indexed(w, "p", p.as_slice())
}

pub fn read_probabilities<T: Real, R: Read>(r: R) -> Result<ProbabilityVector<T>> {
    ProbabilityVector::new(read_indexed(r, "p")?)
}

pub fn write_plan<T: Real, W: Write>(plan: &SamplingPlan<T>, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["i", "index"])?;
    for (i, idx) in plan.indices().iter().enumerate() {
        wtr.write_record([(i + 1).to_string(), (idx + 1).to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads the 0-based row indices of a plan file.
pub fn read_plan_indices<R: Read>(r: R) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (line, rec) in csv_records(r, &["i", "index"])? {
        let i: usize = field(line, &rec, 0)?;
        if i != out.len() + 1 {
            return Err(parse_err(
                line,
                format!("expected i = {}, found {i}", out.len() + 1),
            ));
        }
        let idx: usize = field(line, &rec, 1)?;
        if idx == 0 {
            return Err(parse_err(line, "row indices are 1-based"));
        }
        out.push(idx - 1);
    }
    Ok(out)
}

pub fn write_measurements<T: Real, W: Write>(meas: &MeasurementSet<T>, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["i", "index", "re", "im"])?;
    for (i, (idx, b)) in meas.plan.indices().iter().zip(&meas.b).enumerate() {
        wtr.write_record([
            (i + 1).to_string(),
            (idx + 1).to_string(),
            b.re.to_text(),
            b.im.to_text(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `(0-based indices, measurements)` from a measurement file.
pub fn read_measurements<T: Real, R: Read>(r: R) -> Result<(Vec<usize>, Vec<Complex<T>>)> {
    let mut idx = Vec::new();
    let mut b = Vec::new();
    for (line, rec) in csv_records(r, &["i", "index", "re", "im"])? {
        let i: usize = field(line, &rec, 0)?;
        if i != idx.len() + 1 {
            return Err(parse_err(
                line,
                format!("expected i = {}, found {i}", idx.len() + 1),
            ));
        }
        let j: usize = field(line, &rec, 1)?;
        if j == 0 {
            return Err(parse_err(line, "row indices are 1-based"));
        }
        let re: f64 = field(line, &rec, 2)?;
        let im: f64 = field(line, &rec, 3)?;
        idx.push(j - 1);
        b.push(Complex::new(T::c(re), T::c(im)));
    }
    Ok((idx, b))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}
