//! XYZ and ASCII PLY readers and writers.
//!
//! XYZ: one point per line, `x y z` or `x y z label`, `#` starts a comment.
//! PLY: `element vertex` with float `x y z`, optional uchar `label` and float
//! `pred`; other vertex properties are skipped on read.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Point, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Xyz,
    Ply,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("ply") => Ok(Format::Ply),
            Some("xyz") | Some("txt") => Ok(Format::Xyz),
            _ => Err(Error::invalid(format!(
                "cannot infer point-cloud format from {}",
                path.display()
            ))),
        }
    }
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    match Format::from_path(path)? {
        Format::Xyz => read_xyz(path),
        Format::Ply => read_ply(path),
    }
}

pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    match Format::from_path(path)? {
        Format::Xyz => write_xyz(path, cloud),
        Format::Ply => write_ply(path, cloud),
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_label(path: &Path, line: usize, tok: &str) -> Result<bool> {
    match tok {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => tok
            .parse::<f64>()
            .ok()
            .and_then(|v| match v {
                v if v == 0.0 => Some(false),
                v if v == 1.0 => Some(true),
                _ => None,
            })
            .ok_or_else(|| parse_err(path, line, format!("label must be 0 or 1, got {tok:?}"))),
    }
}

fn parse_f64(path: &Path, line: usize, tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("not a number: {tok:?}")))
}

pub fn read_xyz(path: &Path) -> Result<PointCloud> {
    parse_xyz(BufReader::new(File::open(path)?), path)
}

pub fn parse_xyz(reader: impl BufRead, path: &Path) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut labeled: Option<bool> = None;
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        let has_label = match toks.len() {
            3 => false,
            4 => true,
            c => return Err(parse_err(path, lineno, format!("expected 3 or 4 columns, got {c}"))),
        };
        if *labeled.get_or_insert(has_label) != has_label {
            return Err(parse_err(path, lineno, "mixed labeled and unlabeled rows"));
        }
        points.push(Point::new(
            parse_f64(path, lineno, toks[0])?,
            parse_f64(path, lineno, toks[1])?,
            parse_f64(path, lineno, toks[2])?,
        ));
        if has_label {
            labels.push(parse_label(path, lineno, toks[3])?);
        }
    }
    let cloud = PointCloud::new(points)?;
    if labeled == Some(true) {
        cloud.with_labels(labels)
    } else {
        Ok(cloud)
    }
}

pub fn write_xyz(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_xyz_to(&mut w, cloud)?;
    w.flush()?;
    Ok(())
}

pub fn write_xyz_to(w: &mut impl Write, cloud: &PointCloud) -> Result<()> {
    for (i, p) in cloud.points().iter().enumerate() {
        match cloud.labels() {
            Some(l) => writeln!(w, "{} {} {} {}", p.x, p.y, p.z, u8::from(l[i]))?,
            None => writeln!(w, "{} {} {}", p.x, p.y, p.z)?,
        }
    }
    Ok(())
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    parse_ply(BufReader::new(File::open(path)?), path)
}

fn next(lines: &mut impl Iterator<Item = (usize, std::io::Result<String>)>) -> Result<Option<(usize, String)>> {
    match lines.next() {
        Some((n, l)) => Ok(Some((n + 1, l?))),
        None => Ok(None),
    }
}

struct PlyElement {
    name: String,
    count: usize,
    props: Vec<String>,
}

pub fn parse_ply(reader: impl BufRead, path: &Path) -> Result<PointCloud> {
    let mut lines = reader.lines().enumerate();

    match next(&mut lines)? {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(parse_err(path, 1, "missing 'ply' magic")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        let (n, line) = next(&mut lines)?.ok_or_else(|| parse_err(path, 0, "unterminated header"))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(parse_err(path, n, format!("unsupported PLY format {fmt}")));
                }
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| parse_err(path, n, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", ..] => {
                let el = elements.last().ok_or_else(|| parse_err(path, n, "property before element"))?;
                if el.name == "vertex" {
                    return Err(parse_err(path, n, "list properties on vertices are not supported"));
                }
                elements.last_mut().unwrap().props.push(String::new());
            }
            ["property", _ty, name] => elements
                .last_mut()
                .ok_or_else(|| parse_err(path, n, "property before element"))?
                .props
                .push(name.to_string()),
            ["end_header"] => break,
            _ => return Err(parse_err(path, n, format!("unrecognized header line {line:?}"))),
        }
    }

    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut preds = Vec::new();
    for el in &elements {
        if el.name != "vertex" {
            for _ in 0..el.count {
                next(&mut lines)?.ok_or_else(|| parse_err(path, 0, "truncated element data"))?;
            }
            continue;
        }
        let col = |name: &str| el.props.iter().position(|p| p == name);
        let (x, y, z) = match (col("x"), col("y"), col("z")) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => return Err(parse_err(path, 0, "vertex element lacks x/y/z")),
        };
        let (label, pred) = (col("label"), col("pred"));
        for _ in 0..el.count {
            let (n, line) = next(&mut lines)?.ok_or_else(|| parse_err(path, 0, "truncated vertex data"))?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != el.props.len() {
                return Err(parse_err(path, n, format!("expected {} values, got {}", el.props.len(), toks.len())));
            }
            points.push(Point::new(
                parse_f64(path, n, toks[x])?,
                parse_f64(path, n, toks[y])?,
                parse_f64(path, n, toks[z])?,
            ));
            if let Some(c) = label {
                labels.push(parse_label(path, n, toks[c])?);
            }
            if let Some(c) = pred {
                preds.push(parse_f64(path, n, toks[c])?);
            }
        }
        let mut cloud = PointCloud::new(std::mem::take(&mut points))?;
        if label.is_some() {
            cloud = cloud.with_labels(std::mem::take(&mut labels))?;
        }
        if pred.is_some() {
            cloud = cloud.with_predictions(std::mem::take(&mut preds))?;
        }
        return Ok(cloud);
    }
    Err(parse_err(path, 0, "no vertex element"))
}

pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_ply_to(&mut w, cloud)?;
    w.flush()?;
    Ok(())
}

pub fn write_ply_to(w: &mut impl Write, cloud: &PointCloud) -> Result<()> {
    write_ply_with(w, cloud, None)
}

/// PLY writer with an optional extra integer vertex property.
pub fn write_ply_with(w: &mut impl Write, cloud: &PointCloud, extra_int: Option<(&str, &[i64])>) -> Result<()> {
    writeln!(w, "ply\nformat ascii 1.0\nelement vertex {}", cloud.len())?;
    writeln!(w, "property float x\nproperty float y\nproperty float z")?;
    if cloud.labels().is_some() {
        writeln!(w, "property uchar label")?;
    }
    if cloud.predictions().is_some() {
        writeln!(w, "property float pred")?;
    }
    if let Some((name, _)) = extra_int {
        writeln!(w, "property int {name}")?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.points().iter().enumerate() {
        write!(w, "{} {} {}", p.x, p.y, p.z)?;
        if let Some(l) = cloud.labels() {
            write!(w, " {}", u8::from(l[i]))?;
        }
        if let Some(pr) = cloud.predictions() {
            write!(w, " {}", pr[i])?;
        }
        if let Some((_, values)) = extra_int {
            write!(w, " {}", values[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Path used when a reader reports errors for in-memory data.
pub fn memory_path() -> PathBuf {
    PathBuf::from("<memory>")
}
