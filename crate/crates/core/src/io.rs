//! Text and binary exchange formats.
//!
//! * Symmetric sparse matrices: header `p nnz`, then `i j value` lines for
//!   the lower triangle, 0-based.
//! * Observation matrices: header `m p nnz`, then `i j value`.
//! * Graphs: header `p`, then `i j` edge lines.
//! * Ensembles: headerless CSV (one member per row), or binary: the magic
//!   `ENIFENS1`, `n` and `p` as little-endian `u64`, then `n * p`
//!   little-endian `f64` in row-major order.
//!
//! Blank lines and lines starting with `#` are ignored by the text readers.

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::graph::CIGraph;
use crate::sparse::{Permutation, PermutationKind, SparseMatrix, SparseSpd};
use crate::transport::KrMap;
use nalgebra::{DMatrix, DVector};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

pub const ENSEMBLE_MAGIC: &[u8; 8] = b"ENIFENS1";

struct Tokens<R: BufRead> {
    lines: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Tokens<R> {
    fn new(r: R) -> Self {
        Self {
            lines: r.lines(),
            line: 0,
        }
    }

    fn next_line(&mut self) -> Result<Option<Vec<String>>> {
        for l in self.lines.by_ref() {
            self.line += 1;
            let l = l?;
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok(Some(t.split_whitespace().map(str::to_owned).collect()));
        }
        Ok(None)
    }

    fn expect_line(&mut self, what: &str) -> Result<Vec<String>> {
        self.next_line()?.ok_or_else(|| Error::Parse {
            line: self.line + 1,
            message: format!("unexpected end of input, expected {what}"),
        })
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn fields<T: FromStr>(&mut self, what: &str, count: usize) -> Result<Vec<T>> {
        let toks = self.expect_line(what)?;
        if toks.len() != count {
            return Err(self.err(format!(
                "expected {count} fields for {what}, got {}",
                toks.len()
            )));
        }
        self.parse_all(&toks, what)
    }

    fn parse_all<T: FromStr>(&self, toks: &[String], what: &str) -> Result<Vec<T>> {
        toks.iter()
            .map(|t| {
                t.parse()
                    .map_err(|_| self.err(format!("bad {what} field '{t}'")))
            })
            .collect()
    }

    fn keyword<T: FromStr>(&mut self, key: &str, count: usize) -> Result<Vec<T>> {
        let toks = self.expect_line(key)?;
        if toks.first().map(String::as_str) != Some(key) || toks.len() != count + 1 {
            return Err(self.err(format!("expected '{key}' followed by {count} value(s)")));
        }
        self.parse_all(&toks[1..], key)
    }

    fn finish(&mut self) -> Result<()> {
        match self.next_line()? {
            None => Ok(()),
            Some(_) => Err(self.err("trailing content")),
        }
    }
}

fn triplet_line<R: BufRead>(t: &mut Tokens<R>) -> Result<(usize, usize, f64)> {
    let toks = t.expect_line("triplet")?;
    if toks.len() != 3 {
        return Err(t.err("expected 'i j value'"));
    }
    let idx: Vec<usize> = t.parse_all(&toks[..2], "index")?;
    let v: Vec<f64> = t.parse_all(&toks[2..], "value")?;
    Ok((idx[0], idx[1], v[0]))
}

pub fn write_spd<W: Write>(m: &SparseSpd, mut w: W) -> Result<()> {
    writeln!(w, "{} {}", m.dim(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(w, "{i} {j} {v}")?;
    }
    Ok(())
}

pub fn read_spd<R: BufRead>(r: R) -> Result<SparseSpd> {
    let mut t = Tokens::new(r);
    let m = read_spd_body(&mut t)?;
    t.finish()?;
    Ok(m)
}

fn read_spd_body<R: BufRead>(t: &mut Tokens<R>) -> Result<SparseSpd> {
    let h: Vec<usize> = t.fields("header 'p nnz'", 2)?;
    let trips = (0..h[1])
        .map(|_| triplet_line(t))
        .collect::<Result<Vec<_>>>()?;
    if let Some(&(i, j, _)) = trips.iter().find(|&&(i, j, _)| j > i) {
        return Err(t.err(format!("entry ({i}, {j}) is above the diagonal")));
    }
    SparseSpd::from_triplets(h[0], trips)
}

pub fn write_h<W: Write>(h: &SparseMatrix, mut w: W) -> Result<()> {
    writeln!(w, "{} {} {}", h.nrows(), h.ncols(), h.nnz())?;
    for (i, j, v) in h.triplets() {
        writeln!(w, "{i} {j} {v}")?;
    }
    Ok(())
}

pub fn read_h<R: BufRead>(r: R) -> Result<SparseMatrix> {
    let mut t = Tokens::new(r);
    let m = read_h_body(&mut t)?;
    t.finish()?;
    Ok(m)
}

fn read_h_body<R: BufRead>(t: &mut Tokens<R>) -> Result<SparseMatrix> {
    let h: Vec<usize> = t.fields("header 'm p nnz'", 3)?;
    let trips = (0..h[2])
        .map(|_| triplet_line(t))
        .collect::<Result<Vec<_>>>()?;
    SparseMatrix::from_triplets(h[0], h[1], trips)
}

pub fn write_graph<W: Write>(g: &CIGraph, mut w: W) -> Result<()> {
    writeln!(w, "{}", g.p())?;
    for (i, j) in g.edges() {
        writeln!(w, "{i} {j}")?;
    }
    Ok(())
}

/// Reads an edge list; the edge count is implied by the number of lines.
pub fn read_graph<R: BufRead>(r: R) -> Result<CIGraph> {
    let mut t = Tokens::new(r);
    let p: Vec<usize> = t.fields("header 'p'", 1)?;
    let mut edges = Vec::new();
    while let Some(toks) = t.next_line()? {
        if toks.len() != 2 {
            return Err(t.err("expected 'i j'"));
        }
        let e: Vec<usize> = t.parse_all(&toks, "vertex")?;
        edges.push((e[0], e[1]));
    }
    CIGraph::from_edges(p[0], edges)
}

pub fn write_ensemble_csv<W: Write>(e: &Ensemble, w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for i in 0..e.n() {
        wr.write_record(e.member(i).iter().map(|v| v.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_ensemble_csv<R: Read>(r: R) -> Result<Ensemble> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut rows = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: k + 1,
                    message: format!("bad number '{f}'"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ensemble::from_rows(&rows)
}

pub fn write_ensemble_bin<W: Write>(e: &Ensemble, mut w: W) -> Result<()> {
    w.write_all(ENSEMBLE_MAGIC)?;
    w.write_all(&(e.n() as u64).to_le_bytes())?;
    w.write_all(&(e.p() as u64).to_le_bytes())?;
    for i in 0..e.n() {
        for j in 0..e.p() {
            w.write_all(&e.data()[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_ensemble_bin<R: Read>(mut r: R) -> Result<Ensemble> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != ENSEMBLE_MAGIC {
        return Err(Error::InvalidInput("not a binary ensemble file".into()));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let p = u64::from_le_bytes(word) as usize;
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() != n * p * 8 {
        return Err(Error::InvalidInput(format!(
            "binary ensemble declares {n}x{p} but holds {} bytes of data",
            buf.len()
        )));
    }
    let vals: Vec<f64> = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ensemble::new(DMatrix::from_row_slice(n, p, &vals))
}

/// Reads an ensemble file, choosing the format from its leading bytes.
pub fn read_ensemble_file(path: &Path) -> Result<Ensemble> {
    let mut f = BufReader::new(File::open(path)?);
    let head = f.fill_buf()?;
    if head.starts_with(ENSEMBLE_MAGIC) {
        read_ensemble_bin(f)
    } else {
        read_ensemble_csv(f)
    }
}

/// Writes binary when the extension is `bin`, CSV otherwise.
pub fn write_ensemble_file(e: &Ensemble, path: &Path) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|x| x == "bin") {
        write_ensemble_bin(e, w)
    } else {
        write_ensemble_csv(e, w)
    }
}

fn join<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Serialises a fitted map as `kr-map p`, `perm …`, `star …`, an `H`-style
/// block for `C`, `mean …` and a graph block.
pub fn write_kr_map<W: Write>(map: &KrMap, mut w: W) -> Result<()> {
    writeln!(w, "kr-map {}", map.p())?;
    writeln!(w, "perm {}", join(map.perm.order()))?;
    writeln!(w, "star {}", join(map.star.order()))?;
    write_h(&map.c, &mut w)?;
    writeln!(w, "mean {}", join(map.mean.iter()))?;
    writeln!(w, "edges {}", map.source_graph.n_edges())?;
    for (i, j) in map.source_graph.edges() {
        writeln!(w, "{i} {j}")?;
    }
    Ok(())
}

pub fn read_kr_map<R: BufRead>(r: R) -> Result<KrMap> {
    let mut t = Tokens::new(r);
    let p = t.keyword::<usize>("kr-map", 1)?[0];
    let perm = Permutation::new(t.keyword("perm", p)?, PermutationKind::Composite)?;
    let star = Permutation::new(t.keyword("star", p)?, PermutationKind::FillReducing)?;
    let c = read_h_body(&mut t)?;
    let mean: Vec<f64> = t.keyword("mean", p)?;
    let ne = t.keyword::<usize>("edges", 1)?[0];
    let edges = (0..ne)
        .map(|_| {
            let e: Vec<usize> = t.fields("edge", 2)?;
            Ok((e[0], e[1]))
        })
        .collect::<Result<Vec<_>>>()?;
    t.finish()?;
    if c.nrows() != p || c.ncols() != p {
        return Err(Error::DimensionMismatch {
            context: "map factor shape",
            expected: p,
            found: c.nrows(),
        });
    }
    Ok(KrMap {
        perm,
        star,
        c,
        mean: DVector::from_vec(mean),
        source_graph: CIGraph::from_edges(p, edges)?,
    })
}
