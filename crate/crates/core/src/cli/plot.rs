//! Turns experiment CSVs into whitespace-separated `.dat` files for
//! gnuplot and friends.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;

use super::fit::loglog_fit;
use super::runner::write_atomic;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PlotRequest {
    pub input: PathBuf,
    pub x: String,
    pub y: Vec<String>,
    /// Split rows into blocks (blank-line separated) by this column.
    pub group: Option<String>,
    /// Also write `log x, log y` and fit a slope per block and column.
    pub loglog: bool,
    /// Also write `x, log y`, for decay curves.
    pub logy: bool,
    /// Defaults to the input path with the `.dat` extension.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOutput {
    pub files: Vec<PathBuf>,
    /// `(group, column, slope, r2)` when `loglog` was requested.
    pub slopes: Vec<(String, String, f64, f64)>,
}

struct Block {
    x: Vec<f64>,
    y: Vec<Vec<f64>>,
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse(field: &str, name: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("column `{name}`: `{field}` is not a number")))
}

fn read_blocks(req: &PlotRequest) -> Result<Option<BTreeMap<String, Block>>> {
    let text = fs::read_to_string(&req.input)?;
    if text.lines().all(|l| l.trim().is_empty() || l.starts_with('#')) {
        return Ok(None);
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let xi = column(&headers, &req.x)?;
    let yi: Vec<usize> = req.y.iter().map(|c| column(&headers, c)).collect::<Result<_>>()?;
    let gi = req.group.as_deref().map(|g| column(&headers, g)).transpose()?;
    let mut blocks: BTreeMap<String, Block> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let key = gi.map(|g| rec[g].to_string()).unwrap_or_default();
        let block = blocks.entry(key).or_insert_with(|| Block {
            x: Vec::new(),
            y: vec![Vec::new(); yi.len()],
        });
        block.x.push(parse(&rec[xi], &req.x)?);
        for (col, (&i, name)) in block.y.iter_mut().zip(yi.iter().zip(&req.y)) {
            col.push(if rec[i].is_empty() { f64::NAN } else { parse(&rec[i], name)? });
        }
    }
    Ok(Some(blocks))
}

fn write_dat(path: &Path, req: &PlotRequest, blocks: &BTreeMap<String, Block>, log_x: bool, log_y: bool) -> Result<()> {
    let tx = |v: f64| if log_x { v.ln() } else { v };
    let ty = |v: f64| if log_y { v.ln() } else { v };
    write_atomic(path, |w| {
        writeln!(w, "# {} {}", req.x, req.y.join(" "))?;
        for (n, (key, b)) in blocks.iter().enumerate() {
            if n > 0 {
                writeln!(w)?;
                writeln!(w)?;
            }
            if let Some(g) = &req.group {
                writeln!(w, "# {g} = {key}")?;
            }
            for (r, &x) in b.x.iter().enumerate() {
                write!(w, "{}", tx(x))?;
                for col in &b.y {
                    write!(w, " {}", ty(col[r]))?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.with_extension("");
    let mut s = stem.into_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn plot(req: &PlotRequest) -> Result<PlotOutput> {
    if req.y.is_empty() {
        return Err(Error::InvalidParameter("no y columns given".into()));
    }
    let out = req.output.clone().unwrap_or_else(|| req.input.with_extension("dat"));
    let Some(blocks) = read_blocks(req)? else {
        warn!("{} has no data; writing an empty {}", req.input.display(), out.display());
        fs::File::create(&out)?;
        return Ok(PlotOutput {
            files: vec![out],
            slopes: Vec::new(),
        });
    };
    write_dat(&out, req, &blocks, false, false)?;
    let mut files = vec![out.clone()];
    let mut slopes = Vec::new();
    if req.logy {
        let path = with_suffix(&out, ".logy.dat");
        write_dat(&path, req, &blocks, false, true)?;
        files.push(path);
    }
    if req.loglog {
        let log_path = with_suffix(&out, ".loglog.dat");
        write_dat(&log_path, req, &blocks, true, true)?;
        files.push(log_path);
        for (key, b) in &blocks {
            for (name, col) in req.y.iter().zip(&b.y) {
                let (x, y): (Vec<f64>, Vec<f64>) =
                    b.x.iter().zip(col).filter(|(_, y)| y.is_finite()).map(|(x, y)| (*x, *y)).unzip();
                match loglog_fit(&x, &y) {
                    Ok(f) => slopes.push((key.clone(), name.clone(), f.slope, f.r2)),
                    Err(e) => warn!("no slope for {name} ({key}): {e}"),
                }
            }
        }
        let side = with_suffix(&out, ".slope.txt");
        write_atomic(&side, |w| {
            for (g, c, s, r2) in &slopes {
                let g = if g.is_empty() { "-" } else { g };
                writeln!(w, "{g} {c} {s} {r2}")?;
            }
            Ok(())
        })?;
        files.push(side);
    }
    Ok(PlotOutput { files, slopes })
}
