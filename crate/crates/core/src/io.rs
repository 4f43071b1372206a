//! ASCII XYZ and PLY point files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Xyz,
    Ply,
}

impl CloudFormat {
    /// `.ply` selects PLY; anything else is treated as XYZ.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("ply") => CloudFormat::Ply,
            _ => CloudFormat::Xyz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloudFile {
    pub path: PathBuf,
    pub format: CloudFormat,
}

impl CloudFile {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        let format = CloudFormat::from_path(&path);
        Self { path, format }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_coord(path: &Path, line: usize, tok: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid number {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(
            path,
            line,
            format!("non-finite coordinate {tok:?}"),
        ));
    }
    Ok(v)
}

pub fn read_cloud(file: &CloudFile) -> Result<PointCloud> {
    let text = fs::read_to_string(&file.path).map_err(io_err(&file.path))?;
    let cloud = match file.format {
        CloudFormat::Xyz => parse_xyz(&file.path, &text)?,
        CloudFormat::Ply => parse_ply(&file.path, &text)?,
    };
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(cloud)
}

pub fn read_path(path: impl AsRef<Path>) -> Result<PointCloud> {
    read_cloud(&CloudFile::new(path.as_ref()))
}

/// Parses whitespace-separated `x y z` lines. Blank lines and `#` comments are
/// skipped; extra numeric columns (normals, colors) are dropped.
pub fn parse_xyz(path: &Path, text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut dropped_columns = false;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected 3 coordinates, found {}", toks.len()),
            ));
        }
        let x = parse_coord(path, line_no, toks[0])?;
        let y = parse_coord(path, line_no, toks[1])?;
        let z = parse_coord(path, line_no, toks[2])?;
        if toks.len() > 3 {
            for t in &toks[3..] {
                t.parse::<f64>()
                    .map_err(|_| parse_err(path, line_no, format!("invalid number {t:?}")))?;
            }
            dropped_columns = true;
        }
        points.push(Point3::new(x, y, z));
    }
    if dropped_columns {
        log::warn!(
            "{}: extra per-point columns (normals/colors) ignored",
            path.display()
        );
    }
    PointCloud::new(points)
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<String>,
    has_list: bool,
}

/// Parses ASCII PLY, keeping the `x y z` properties of the `vertex` element.
pub fn parse_ply(path: &Path, text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(parse_err(path, 1, "missing 'ply' magic")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut header_done = false;
    for (i, line) in lines.by_ref() {
        let line_no = i + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("format") => {
                if toks.get(1) != Some(&"ascii") {
                    return Err(parse_err(path, line_no, "only ASCII PLY is supported"));
                }
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let (name, count) = match (toks.get(1), toks.get(2)) {
                    (Some(n), Some(c)) => (
                        n.to_string(),
                        c.parse::<usize>()
                            .map_err(|_| parse_err(path, line_no, "invalid element count"))?,
                    ),
                    _ => return Err(parse_err(path, line_no, "malformed element line")),
                };
                elements.push(PlyElement {
                    name,
                    count,
                    properties: Vec::new(),
                    has_list: false,
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, line_no, "property before element"))?;
                if toks.get(1) == Some(&"list") {
                    el.has_list = true;
                    el.properties.push(toks.last().unwrap_or(&"").to_string());
                } else {
                    let name = toks
                        .get(2)
                        .ok_or_else(|| parse_err(path, line_no, "malformed property line"))?;
                    el.properties.push(name.to_string());
                }
            }
            Some("end_header") => {
                header_done = true;
                break;
            }
            Some(other) => {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("unexpected header keyword {other:?}"),
                ))
            }
        }
    }
    if !header_done {
        return Err(parse_err(path, 1, "missing end_header"));
    }

    let mut points = Vec::new();
    let mut warned = false;
    for el in &elements {
        let is_vertex = el.name == "vertex";
        let cols = if is_vertex {
            if el.has_list {
                return Err(parse_err(
                    path,
                    1,
                    "list properties on vertex are not supported",
                ));
            }
            let pos = |n: &str| el.properties.iter().position(|p| p == n);
            match (pos("x"), pos("y"), pos("z")) {
                (Some(x), Some(y), Some(z)) => Some([x, y, z]),
                _ => return Err(parse_err(path, 1, "vertex element lacks x, y, z")),
            }
        } else {
            None
        };
        if is_vertex && el.properties.len() > 3 && !warned {
            log::warn!("{}: extra vertex properties ignored", path.display());
            warned = true;
        }
        for _ in 0..el.count {
            let (i, line) = lines.next().ok_or_else(|| {
                parse_err(
                    path,
                    text.lines().count(),
                    format!("truncated {} data", el.name),
                )
            })?;
            let line_no = i + 1;
            if let Some([x, y, z]) = cols {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != el.properties.len() {
                    return Err(parse_err(
                        path,
                        line_no,
                        format!(
                            "expected {} values, found {}",
                            el.properties.len(),
                            toks.len()
                        ),
                    ));
                }
                points.push(Point3::new(
                    parse_coord(path, line_no, toks[x])?,
                    parse_coord(path, line_no, toks[y])?,
                    parse_coord(path, line_no, toks[z])?,
                ));
            }
        }
    }
    PointCloud::new(points)
}

/// Renders the cloud in the given format. Coordinates use the shortest
/// decimal form that parses back to the same bits.
pub fn format_cloud(cloud: &PointCloud, format: CloudFormat) -> String {
    let mut out = String::new();
    if format == CloudFormat::Ply {
        out.push_str(&format!(
            "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
            cloud.len()
        ));
    }
    for p in cloud.points() {
        out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    out
}

/// Writes through a temporary file in the target directory, then renames it into place.
pub fn write_cloud(cloud: &PointCloud, file: &CloudFile) -> Result<()> {
    write_atomic(&file.path, format_cloud(cloud, file.format).as_bytes())
}

pub fn write_path(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    write_cloud(cloud, &CloudFile::new(path.as_ref()))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        w.write_all(bytes).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))?;
    }
    tmp.persist(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}
