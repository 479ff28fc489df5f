//! Semicolon-separated catalog and trace files.
//!
//! ```text
//! id;t_gen;size;price;fee_ceiling      id;slot;count
//! 7;0;3;12.5;100                       7;4;2
//! ```
//!
//! A header line is required. Paths ending in `.gz` are read and written
//! gzip-compressed. Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::{RequestTrace, TraceRow, Workload, WorkloadError};
use crate::model::{Catalog, ContentCatalogEntry, ContentId, ContentIdx};
use crate::money::Money;

const CATALOG_HEADER: [&str; 5] = ["id", "t_gen", "size", "price", "fee_ceiling"];
const TRACE_HEADER: [&str; 3] = ["id", "slot", "count"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IngestOptions {
    /// Contents with fewer total requests are dropped from catalog and trace.
    pub min_total_requests: u64,
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> WorkloadError + '_ {
    move |source| WorkloadError::Io { path: display(path), source }
}

pub(crate) fn open_reader(path: &Path) -> Result<Box<dyn Read>, WorkloadError> {
    let f = File::open(path).map_err(io_err(path))?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzDecoder::new(BufReader::new(f))))
    } else {
        Ok(Box::new(BufReader::new(f)))
    }
}

pub(crate) fn open_writer(path: &Path) -> Result<Box<dyn Write>, WorkloadError> {
    let f = File::create(path).map_err(io_err(path))?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzEncoder::new(BufWriter::new(f), Compression::default())))
    } else {
        Ok(Box::new(BufWriter::new(f)))
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<Box<dyn Read>>, WorkloadError> {
    Ok(csv::ReaderBuilder::new()
        .delimiter(b';')
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(open_reader(path)?))
}

fn check_header<R: Read>(
    rdr: &mut csv::Reader<R>,
    path: &Path,
    expected: &[&str],
) -> Result<(), WorkloadError> {
    let header = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(parse_err(
            path,
            1,
            format!("expected header `{}`, found `{}`", expected.join(";"), header.iter().collect::<Vec<_>>().join(";")),
        ));
    }
    Ok(())
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> WorkloadError {
    WorkloadError::Parse { path: display(path), line, msg: msg.into() }
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    i: usize,
    name: &str,
    path: &Path,
    line: u64,
) -> Result<T, WorkloadError> {
    let raw = rec.get(i).ok_or_else(|| parse_err(path, line, format!("missing column `{name}`")))?;
    raw.parse()
        .map_err(|_| parse_err(path, line, format!("bad `{name}` value `{raw}`")))
}

fn records(
    rdr: &mut csv::Reader<Box<dyn Read>>,
    path: &Path,
    width: usize,
) -> Result<Vec<(u64, csv::StringRecord)>, WorkloadError> {
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(parse_err(path, line, format!("expected {width} columns, found {}", rec.len())));
        }
        out.push((line, rec));
    }
    Ok(out)
}

pub fn read_catalog(path: &Path) -> Result<Catalog, WorkloadError> {
    let mut rdr = csv_reader(path)?;
    check_header(&mut rdr, path, &CATALOG_HEADER)?;
    let mut entries = Vec::new();
    for (line, rec) in records(&mut rdr, path, CATALOG_HEADER.len())? {
        entries.push(ContentCatalogEntry {
            id: ContentId(field(&rec, 0, "id", path, line)?),
            t_gen: field(&rec, 1, "t_gen", path, line)?,
            size: field(&rec, 2, "size", path, line)?,
            price: field::<Money>(&rec, 3, "price", path, line)?,
            fee_ceiling: field::<Money>(&rec, 4, "fee_ceiling", path, line)?,
        });
    }
    Ok(Catalog::new(entries)?)
}

/// Reads a trace aligned to `catalog`. Rows at or before the content's
/// generation slot, duplicate cells and unknown ids are errors.
pub fn read_trace(path: &Path, catalog: &Catalog) -> Result<RequestTrace, WorkloadError> {
    let mut rdr = csv_reader(path)?;
    check_header(&mut rdr, path, &TRACE_HEADER)?;
    let mut cells: Vec<BTreeMap<u64, u32>> = vec![BTreeMap::new(); catalog.len()];
    for (line, rec) in records(&mut rdr, path, TRACE_HEADER.len())? {
        let id = ContentId(field(&rec, 0, "id", path, line)?);
        let slot: u64 = field(&rec, 1, "slot", path, line)?;
        let count: u32 = field(&rec, 2, "count", path, line)?;
        let idx = catalog
            .index_of(id)
            .ok_or(WorkloadError::UnknownContent { path: display(path), line, id })?;
        let t_gen = catalog.get(idx).t_gen;
        if slot <= t_gen {
            return Err(parse_err(
                path,
                line,
                format!("content {id}: request at slot {slot} is not after its generation slot {t_gen}"),
            ));
        }
        if cells[idx.get()].insert(slot, count).is_some() {
            return Err(parse_err(path, line, format!("duplicate cell for content {id} at slot {slot}")));
        }
    }
    let rows = catalog
        .entries()
        .iter()
        .zip(cells)
        .map(|(e, cells)| {
            let start = e.t_gen + 1;
            let mut counts = Vec::new();
            if let Some((&last, _)) = cells.iter().rev().find(|(_, &c)| c > 0) {
                counts = vec![0; (last - start + 1) as usize];
                for (slot, c) in cells.range(..=last) {
                    counts[(slot - start) as usize] = *c;
                }
            }
            TraceRow { start, counts }
        })
        .collect();
    Ok(RequestTrace::from_rows(rows))
}

/// Reads a catalog and its trace, then drops contents below
/// `min_total_requests`.
pub fn ingest_trace(
    catalog_path: &Path,
    trace_path: &Path,
    opts: IngestOptions,
) -> Result<Workload, WorkloadError> {
    let catalog = read_catalog(catalog_path)?;
    let trace = read_trace(trace_path, &catalog)?;
    if opts.min_total_requests == 0 {
        return Ok(Workload::new(catalog, trace));
    }
    let keep: Vec<ContentIdx> = catalog
        .indices()
        .filter(|&i| trace.total(i) >= opts.min_total_requests)
        .collect();
    let dropped = catalog.len() - keep.len();
    if dropped > 0 {
        log::info!("dropped {dropped} contents with fewer than {} requests", opts.min_total_requests);
    }
    let entries = keep.iter().map(|&i| catalog.get(i).clone()).collect();
    let rows = keep.iter().map(|&i| trace.rows()[i.get()].clone()).collect();
    // Filtering preserves the (t_gen, id) order, so rows stay aligned.
    Ok(Workload::new(Catalog::new(entries)?, RequestTrace::from_rows(rows)))
}

fn csv_io(path: &Path) -> impl Fn(csv::Error) -> WorkloadError + '_ {
    move |e| WorkloadError::Io { path: display(path), source: std::io::Error::other(e.to_string()) }
}

pub fn write_catalog(path: &Path, catalog: &Catalog) -> Result<(), WorkloadError> {
    write_catalog_rows(path, catalog.entries(), &[])
}

pub(crate) fn write_catalog_rows(
    path: &Path,
    entries: &[ContentCatalogEntry],
    comments: &[String],
) -> Result<(), WorkloadError> {
    let mut out = open_writer(path)?;
    for c in comments {
        writeln!(out, "# {c}").map_err(io_err(path))?;
    }
    let mut w = csv::WriterBuilder::new().delimiter(b';').from_writer(out);
    w.write_record(CATALOG_HEADER).map_err(csv_io(path))?;
    for e in entries {
        w.write_record([
            e.id.to_string(),
            e.t_gen.to_string(),
            e.size.to_string(),
            e.price.to_string(),
            e.fee_ceiling.to_string(),
        ])
        .map_err(csv_io(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes the non-zero cells, in catalog order then slot order.
pub fn write_trace(path: &Path, workload: &Workload) -> Result<(), WorkloadError> {
    write_trace_until(path, workload, u64::MAX, &[])
}

pub(crate) fn write_trace_until(
    path: &Path,
    workload: &Workload,
    before: u64,
    comments: &[String],
) -> Result<(), WorkloadError> {
    let mut out = open_writer(path)?;
    for c in comments {
        writeln!(out, "# {c}").map_err(io_err(path))?;
    }
    let mut w = csv::WriterBuilder::new().delimiter(b';').from_writer(out);
    w.write_record(TRACE_HEADER).map_err(csv_io(path))?;
    for (e, row) in workload.catalog.entries().iter().zip(workload.trace.rows()) {
        for (j, &c) in row.counts.iter().enumerate() {
            let slot = row.start + j as u64;
            if c > 0 && slot < before {
                w.write_record([e.id.to_string(), slot.to_string(), c.to_string()])
                    .map_err(csv_io(path))?;
            }
        }
    }
    w.flush().map_err(io_err(path))
}
