//! Cloud file formats: PLY (ascii and binary little endian) and plain XYZ text.
//!
//! Only the `x`, `y`, `z` vertex properties are used; color, normals and any
//! other scalar properties are parsed past and dropped. Saved PLY files carry
//! `double` coordinates so a save/load cycle is lossless.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{Point3, PointCloud};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("malformed data at row {row}: {msg}")]
    MalformedData { row: usize, msg: String },
    #[error("non-finite coordinate at row {row}")]
    NonFiniteCoordinate { row: usize },
    #[error("unsupported property: {0}")]
    UnsupportedProperty(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloudFormat {
    PlyAscii,
    PlyBinaryLe,
    Xyz,
}

impl CloudFormat {
    /// Guess from the file extension; `.ply` is read by header so either
    /// PLY flavor works for loading.
    pub fn from_path(path: &Path) -> Option<CloudFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "ply" => Some(CloudFormat::PlyBinaryLe),
            "xyz" | "txt" | "pts" => Some(CloudFormat::Xyz),
            _ => None,
        }
    }
}

impl FromStr for CloudFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ply-ascii" | "ply_ascii" | "ascii" => Ok(CloudFormat::PlyAscii),
            "ply-binary-le" | "ply_binary_le" | "ply-binary" | "binary" | "ply" => {
                Ok(CloudFormat::PlyBinaryLe)
            }
            "xyz" => Ok(CloudFormat::Xyz),
            other => Err(format!("unknown cloud format '{other}'")),
        }
    }
}

/// Loads a cloud. For the two PLY formats the encoding is taken from the
/// file header, so either variant reads any conforming PLY file.
pub fn load_cloud(path: impl AsRef<Path>, format: CloudFormat) -> Result<PointCloud, IoError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => IoError::FileNotFound(path.display().to_string()),
        _ => IoError::Io(e),
    })?;
    let mut reader = BufReader::new(file);
    match format {
        CloudFormat::Xyz => read_xyz(&mut reader),
        CloudFormat::PlyAscii | CloudFormat::PlyBinaryLe => read_ply(&mut reader),
    }
}

pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>, format: CloudFormat) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    match format {
        CloudFormat::Xyz => write_xyz(cloud, &mut w)?,
        CloudFormat::PlyAscii => write_ply(cloud, &mut w, false)?,
        CloudFormat::PlyBinaryLe => write_ply(cloud, &mut w, true)?,
    }
    w.flush()?;
    Ok(())
}

pub fn read_xyz<R: BufRead>(reader: &mut R) -> Result<PointCloud, IoError> {
    let mut cloud = PointCloud::new();
    let mut line = String::new();
    let mut lineno = 0usize;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        lineno += 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut it = t.split_whitespace();
        let mut xyz = [0.0f64; 3];
        for v in xyz.iter_mut() {
            let tok = it.next().ok_or_else(|| IoError::MalformedData {
                row: lineno,
                msg: "expected three coordinates".into(),
            })?;
            *v = parse_num(tok, lineno)?;
        }
        let p = Point3::from(xyz);
        if !p.is_finite() {
            return Err(IoError::NonFiniteCoordinate { row: lineno });
        }
        cloud.push(p);
    }
    Ok(cloud)
}

pub fn write_xyz<W: Write>(cloud: &PointCloud, w: &mut W) -> io::Result<()> {
    for p in cloud {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

fn parse_num(tok: &str, row: usize) -> Result<f64, IoError> {
    tok.parse::<f64>().map_err(|_| IoError::MalformedData {
        row,
        msg: format!("cannot parse '{tok}' as a number"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, PartialEq, Eq)]
enum Encoding {
    Ascii,
    BinaryLe,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
}

fn read_header<R: BufRead>(r: &mut R) -> Result<Header, IoError> {
    let bad = |m: &str| IoError::MalformedHeader(m.to_string());
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != "ply" {
        return Err(bad("missing 'ply' magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(bad("unexpected end of file before end_header"));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => continue,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["format", fmt, ver] => {
                if *ver != "1.0" {
                    return Err(bad(&format!("unsupported version {ver}")));
                }
                encoding = Some(match *fmt {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::BinaryLe,
                    "binary_big_endian" => {
                        return Err(IoError::UnsupportedProperty("binary_big_endian encoding".into()))
                    }
                    other => return Err(bad(&format!("unknown format '{other}'"))),
                });
            }
            ["element", name, count] => {
                let count = count
                    .parse::<usize>()
                    .map_err(|_| bad(&format!("bad element count '{count}'")))?;
                elements.push(Element { name: name.to_string(), count, props: Vec::new() });
            }
            ["property", "list", cty, ity, name] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before element"))?;
                let count = Scalar::parse(cty)
                    .ok_or_else(|| IoError::UnsupportedProperty(format!("list count type {cty}")))?;
                let item = Scalar::parse(ity)
                    .ok_or_else(|| IoError::UnsupportedProperty(format!("list item type {ity}")))?;
                el.props.push(Property::List { name: name.to_string(), count, item });
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before element"))?;
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| IoError::UnsupportedProperty(format!("type '{ty}' of '{name}'")))?;
                el.props.push(Property::Scalar { name: name.to_string(), ty });
            }
            ["end_header"] => break,
            _ => return Err(bad(&format!("unrecognized header line '{}'", line.trim_end()))),
        }
    }
    let encoding = encoding.ok_or_else(|| bad("missing format line"))?;
    Ok(Header { encoding, elements })
}

/// Column index of x, y, z in a vertex element, with float-type checks.
fn xyz_columns(el: &Element) -> Result<[usize; 3], IoError> {
    let mut cols = [usize::MAX; 3];
    for (i, p) in el.props.iter().enumerate() {
        match p {
            Property::Scalar { name, ty } => {
                let slot = match name.as_str() {
                    "x" => 0,
                    "y" => 1,
                    "z" => 2,
                    _ => continue,
                };
                if !matches!(ty, Scalar::F32 | Scalar::F64) {
                    return Err(IoError::UnsupportedProperty(format!(
                        "coordinate '{name}' must be float or double"
                    )));
                }
                cols[slot] = i;
            }
            Property::List { name, .. } => {
                if matches!(name.as_str(), "x" | "y" | "z") {
                    return Err(IoError::UnsupportedProperty(format!("list coordinate '{name}'")));
                }
            }
        }
    }
    if cols.contains(&usize::MAX) {
        return Err(IoError::MalformedHeader("vertex element lacks x, y or z".into()));
    }
    Ok(cols)
}

pub fn read_ply<R: BufRead>(r: &mut R) -> Result<PointCloud, IoError> {
    let header = read_header(r)?;
    let vi = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| IoError::MalformedHeader("no vertex element".into()))?;
    let vertex = &header.elements[vi];
    let cols = xyz_columns(vertex)?;

    match header.encoding {
        Encoding::Ascii => {
            let mut lines = r.lines();
            let mut row = 0usize;
            let mut next_line = |row: usize| -> Result<String, IoError> {
                lines.next().transpose()?.ok_or(IoError::MalformedData {
                    row,
                    msg: "unexpected end of data".into(),
                })
            };
            for el in &header.elements[..vi] {
                for _ in 0..el.count {
                    row += 1;
                    next_line(row)?;
                }
            }
            let mut cloud = PointCloud::with_capacity(vertex.count);
            for i in 0..vertex.count {
                row += 1;
                let line = next_line(row)?;
                let toks: Vec<&str> = line.split_whitespace().collect();
                let mut xyz = [0.0; 3];
                let mut t = 0usize;
                for (pi, prop) in vertex.props.iter().enumerate() {
                    match prop {
                        Property::Scalar { ty, .. } => {
                            let tok = toks.get(t).ok_or_else(|| IoError::MalformedData {
                                row: i,
                                msg: "too few values".into(),
                            })?;
                            if let Some(slot) = cols.iter().position(|&c| c == pi) {
                                let v = parse_num(tok, i)?;
                                // Same value a binary file of this type would hold.
                                xyz[slot] = if matches!(ty, Scalar::F32) { v as f32 as f64 } else { v };
                            }
                            t += 1;
                        }
                        Property::List { .. } => {
                            let n = toks
                                .get(t)
                                .ok_or_else(|| IoError::MalformedData { row: i, msg: "missing list count".into() })?
                                .parse::<usize>()
                                .map_err(|_| IoError::MalformedData { row: i, msg: "bad list count".into() })?;
                            t += 1 + n;
                        }
                    }
                }
                let p = Point3::from(xyz);
                if !p.is_finite() {
                    return Err(IoError::NonFiniteCoordinate { row: i });
                }
                cloud.push(p);
            }
            Ok(cloud)
        }
        Encoding::BinaryLe => {
            for el in &header.elements[..vi] {
                for _ in 0..el.count {
                    skip_binary_record(r, el)?;
                }
            }
            let fixed: Option<usize> = vertex
                .props
                .iter()
                .map(|p| match p {
                    Property::Scalar { ty, .. } => Some(ty.size()),
                    Property::List { .. } => None,
                })
                .sum();
            let mut cloud = PointCloud::with_capacity(vertex.count);
            let mut buf = vec![0u8; fixed.unwrap_or(0)];
            for i in 0..vertex.count {
                let mut xyz = [0.0; 3];
                if fixed.is_some() {
                    r.read_exact(&mut buf).map_err(|e| eof_as_data(e, i))?;
                    let mut off = 0;
                    for (pi, prop) in vertex.props.iter().enumerate() {
                        if let Property::Scalar { ty, .. } = prop {
                            if let Some(slot) = cols.iter().position(|&c| c == pi) {
                                xyz[slot] = ty.read_le(&buf[off..]);
                            }
                            off += ty.size();
                        }
                    }
                } else {
                    for (pi, prop) in vertex.props.iter().enumerate() {
                        match prop {
                            Property::Scalar { ty, .. } => {
                                let v = read_scalar(r, *ty).map_err(|e| eof_as_data(e, i))?;
                                if let Some(slot) = cols.iter().position(|&c| c == pi) {
                                    xyz[slot] = v;
                                }
                            }
                            Property::List { count, item, .. } => {
                                let n = read_scalar(r, *count).map_err(|e| eof_as_data(e, i))? as usize;
                                skip_bytes(r, n * item.size()).map_err(|e| eof_as_data(e, i))?;
                            }
                        }
                    }
                }
                let p = Point3::from(xyz);
                if !p.is_finite() {
                    return Err(IoError::NonFiniteCoordinate { row: i });
                }
                cloud.push(p);
            }
            Ok(cloud)
        }
    }
}

fn eof_as_data(e: io::Error, row: usize) -> IoError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        IoError::MalformedData { row, msg: "unexpected end of binary data".into() }
    } else {
        IoError::Io(e)
    }
}

fn read_scalar<R: Read>(r: &mut R, ty: Scalar) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b[..ty.size()])?;
    Ok(ty.read_le(&b))
}

fn skip_bytes<R: Read>(r: &mut R, n: usize) -> io::Result<()> {
    let copied = io::copy(&mut r.by_ref().take(n as u64), &mut io::sink())?;
    if copied as usize != n {
        return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "short read"));
    }
    Ok(())
}

fn skip_binary_record<R: Read>(r: &mut R, el: &Element) -> Result<(), IoError> {
    for p in &el.props {
        match p {
            Property::Scalar { ty, .. } => skip_bytes(r, ty.size())?,
            Property::List { count, item, .. } => {
                let n = read_scalar(r, *count)? as usize;
                skip_bytes(r, n * item.size())?;
            }
        }
    }
    Ok(())
}

pub fn write_ply<W: Write>(cloud: &PointCloud, w: &mut W, binary: bool) -> io::Result<()> {
    let fmt = if binary { "binary_little_endian" } else { "ascii" };
    write!(
        w,
        "ply\nformat {fmt} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        cloud.len()
    )?;
    if binary {
        for p in cloud {
            w.write_all(&p.x.to_le_bytes())?;
            w.write_all(&p.y.to_le_bytes())?;
            w.write_all(&p.z.to_le_bytes())?;
        }
    } else {
        for p in cloud {
            writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn xyz_two_points_with_comments() {
        let src = "# header comment\n0 0 0\n\n1 2 3\n";
        let c = read_xyz(&mut Cursor::new(src)).unwrap();
        assert_eq!(c.points(), &[Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 2.0, 3.0)]);
    }

    #[test]
    fn xyz_extra_columns_ignored_and_short_rows_rejected() {
        let c = read_xyz(&mut Cursor::new("1 2 3 255 0 0\n")).unwrap();
        assert_eq!(c.points(), &[Point3::new(1.0, 2.0, 3.0)]);
        let e = read_xyz(&mut Cursor::new("1 2\n")).unwrap_err();
        assert!(matches!(e, IoError::MalformedData { row: 1, .. }));
    }

    #[test]
    fn xyz_nan_reports_row() {
        let e = read_xyz(&mut Cursor::new("0 0 0\n1 nan 2\n")).unwrap_err();
        assert!(matches!(e, IoError::NonFiniteCoordinate { row: 2 }));
    }

    #[test]
    fn ply_ascii_single_vertex_exact() {
        let src = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n0.5 -1.0 2.25\n";
        let c = read_ply(&mut Cursor::new(src)).unwrap();
        assert_eq!(c.points(), &[Point3::new(0.5, -1.0, 2.25)]);
    }

    #[test]
    fn ply_color_properties_skipped() {
        let src = "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 2\nproperty uchar red\nproperty double x\nproperty double y\nproperty double z\nproperty uchar green\nend_header\n9 1 2 3 7\n8 4 5 6 1\n";
        let c = read_ply(&mut Cursor::new(src)).unwrap();
        assert_eq!(c.points(), &[Point3::new(1.0, 2.0, 3.0), Point3::new(4.0, 5.0, 6.0)]);
    }

    #[test]
    fn ply_header_errors() {
        let no_magic = "plx\nformat ascii 1.0\nend_header\n";
        assert!(matches!(read_ply(&mut Cursor::new(no_magic)), Err(IoError::MalformedHeader(_))));
        let no_z = "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nend_header\n";
        assert!(matches!(read_ply(&mut Cursor::new(no_z)), Err(IoError::MalformedHeader(_))));
        let int_x = "ply\nformat ascii 1.0\nelement vertex 0\nproperty int x\nproperty float y\nproperty float z\nend_header\n";
        assert!(matches!(read_ply(&mut Cursor::new(int_x)), Err(IoError::UnsupportedProperty(_))));
        let big = "ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n";
        assert!(matches!(read_ply(&mut Cursor::new(big)), Err(IoError::UnsupportedProperty(_))));
        let odd = "ply\nformat ascii 1.0\nelement vertex 0\nproperty quad x\nend_header\n";
        assert!(matches!(read_ply(&mut Cursor::new(odd)), Err(IoError::UnsupportedProperty(_))));
    }

    #[test]
    fn ply_binary_truncated_is_data_error() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n".to_vec();
        for v in [1.0f32, 2.0, 3.0, 4.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let e = read_ply(&mut Cursor::new(bytes)).unwrap_err();
        assert!(matches!(e, IoError::MalformedData { row: 1, .. }));
    }

    #[test]
    fn ply_binary_with_face_list_before_vertices() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement face 1\nproperty list uchar int vertex_indices\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\nend_header\n".to_vec();
        bytes.push(3);
        for i in [0i32, 1, 2] {
            bytes.extend_from_slice(&i.to_le_bytes());
        }
        for v in [0.25f64, 0.5, 0.75] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let c = read_ply(&mut Cursor::new(bytes)).unwrap();
        assert_eq!(c.points(), &[Point3::new(0.25, 0.5, 0.75)]);
    }

    #[test]
    fn empty_cloud_declares_zero_vertices() {
        let mut out = Vec::new();
        write_ply(&PointCloud::new(), &mut out, false).unwrap();
        let text = String::from_utf8(out.clone()).unwrap();
        assert!(text.contains("element vertex 0\n"));
        assert!(read_ply(&mut Cursor::new(out)).unwrap().is_empty());
    }
}
