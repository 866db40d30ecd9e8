use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use super::{non_finite_err, parse_err, Precision};
use crate::error::Result;
use crate::geom::{Point3, PointCloud};

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
    fn from_name(name: &str) -> Option<Scalar> {
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

    fn is_float(self) -> bool {
        matches!(self, Scalar::F32 | Scalar::F64)
    }

    /// Decodes `self.size()` little-endian bytes.
    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }

    /// Parses an ascii token at this type's precision.
    fn parse(self, tok: &str) -> Option<f64> {
        match self {
            Scalar::F32 => tok.parse::<f32>().ok().map(f64::from),
            Scalar::F64 => tok.parse::<f64>().ok(),
            _ => tok.parse::<i64>().ok().map(|v| v as f64),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug)]
struct Property {
    name: String,
    kind: Kind,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    binary: bool,
    elements: Vec<Element>,
    /// Byte offset of the body.
    body: usize,
    /// 1-based line number of the first body line.
    body_line: usize,
}

/// Where the vertex fields live inside a vertex record.
struct VertexLayout {
    element: usize,
    xyz: [usize; 3],
    label: Option<usize>,
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some(len) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(parse_err(path, "header is not terminated by `end_header`"));
        };
        line_no += 1;
        let raw = &bytes[pos..pos + len];
        pos += len + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| parse_err(path, format!("line {line_no}: header is not valid text")))?
            .trim_end_matches('\r');
        let mut words = line.split_whitespace();
        let bad = |what: &str| parse_err(path, format!("line {line_no}: {what}: `{line}`"));
        if line_no == 1 {
            if line != "ply" {
                return Err(bad("missing `ply` magic"));
            }
            continue;
        }
        match words.next() {
            Some("format") => {
                binary = Some(match (words.next(), words.next()) {
                    (Some("ascii"), Some("1.0")) => false,
                    (Some("binary_little_endian"), Some("1.0")) => true,
                    (Some("binary_big_endian"), _) => {
                        return Err(parse_err(path, "big-endian binary PLY is not supported"))
                    }
                    _ => return Err(bad("unsupported format line")),
                });
            }
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let (Some(name), Some(count), None) = (words.next(), words.next(), words.next()) else {
                    return Err(bad("malformed element line"));
                };
                let count = count.parse().map_err(|_| bad("bad element count"))?;
                elements.push(Element {
                    name: name.to_owned(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let Some(element) = elements.last_mut() else {
                    return Err(bad("property before any element"));
                };
                let parts: Vec<&str> = words.collect();
                let ty = |s: &str| Scalar::from_name(s).ok_or_else(|| bad("unknown property type"));
                let (kind, name) = match parts.as_slice() {
                    ["list", count, item, name] => (
                        Kind::List {
                            count: ty(count)?,
                            item: ty(item)?,
                        },
                        name,
                    ),
                    [t, name] => (Kind::Scalar(ty(t)?), name),
                    _ => return Err(bad("malformed property line")),
                };
                element.props.push(Property {
                    name: name.to_string(),
                    kind,
                });
            }
            Some("end_header") => break,
            Some(_) => return Err(bad("unexpected header line")),
            None => return Err(bad("empty header line")),
        }
    }
    let binary = binary.ok_or_else(|| parse_err(path, "header has no `format` line"))?;
    Ok(Header {
        binary,
        elements,
        body: pos,
        body_line: line_no + 1,
    })
}

fn vertex_layout(header: &Header, path: &Path) -> Result<VertexLayout> {
    let element = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| parse_err(path, "no `vertex` element"))?;
    let vertex = &header.elements[element];
    let find = |name: &str| vertex.props.iter().position(|p| p.name == name);
    let mut xyz = [0; 3];
    for (slot, axis) in xyz.iter_mut().zip(["x", "y", "z"]) {
        let i = find(axis).ok_or_else(|| parse_err(path, format!("vertex has no `{axis}` property")))?;
        match vertex.props[i].kind {
            Kind::Scalar(s) if s.is_float() => *slot = i,
            _ => return Err(parse_err(path, format!("vertex `{axis}` must be float or double"))),
        }
    }
    let label = find("is_noise");
    if let Some(i) = label {
        match vertex.props[i].kind {
            Kind::Scalar(s) if !s.is_float() => {}
            _ => return Err(parse_err(path, "`is_noise` must be an integer property")),
        }
    }
    let extra: Vec<&str> = vertex
        .props
        .iter()
        .enumerate()
        .filter(|(i, _)| !xyz.contains(i) && Some(*i) != label)
        .map(|(_, p)| p.name.as_str())
        .collect();
    if !extra.is_empty() {
        warn!("{}: ignoring vertex properties {:?}", path.display(), extra);
    }
    for e in header.elements.iter().filter(|e| e.name != "vertex") {
        warn!("{}: skipping element `{}` ({} records)", path.display(), e.name, e.count);
    }
    Ok(VertexLayout { element, xyz, label })
}

/// Accumulates vertex records and checks them at the end.
struct Collector {
    points: Vec<Point3>,
    labels: Vec<bool>,
    bad: Vec<usize>,
}

impl Collector {
    fn push(&mut self, values: &[f64], layout: &VertexLayout, record: usize, path: &Path, at: &str) -> Result<()> {
        let [x, y, z] = layout.xyz.map(|i| values[i]);
        let p = Point3::new(x, y, z);
        if !p.is_finite() {
            self.bad.push(record);
        }
        self.points.push(p);
        if let Some(i) = layout.label {
            match values[i] {
                0.0 => self.labels.push(false),
                1.0 => self.labels.push(true),
                v => return Err(parse_err(path, format!("{at}: `is_noise` must be 0 or 1, got {v}"))),
            }
        }
        Ok(())
    }

    fn finish(self, layout: &VertexLayout, path: &Path, what: &str) -> Result<PointCloud> {
        if !self.bad.is_empty() {
            return Err(non_finite_err(path, what, &self.bad));
        }
        if layout.label.is_some() {
            PointCloud::with_labels(self.points, self.labels)
        } else {
            PointCloud::new(self.points)
        }
    }
}

pub(super) fn parse(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    let header = parse_header(bytes, path)?;
    let layout = vertex_layout(&header, path)?;
    let n = header.elements[layout.element].count;
    let mut out = Collector {
        points: Vec::with_capacity(n),
        labels: Vec::new(),
        bad: Vec::new(),
    };
    if header.binary {
        parse_binary(bytes, &header, &layout, &mut out, path)?;
        out.finish(&layout, path, "vertex record")
    } else {
        parse_ascii(bytes, &header, &layout, &mut out, path)?;
        out.finish(&layout, path, "line")
    }
}

fn parse_ascii(bytes: &[u8], header: &Header, layout: &VertexLayout, out: &mut Collector, path: &Path) -> Result<()> {
    let body = std::str::from_utf8(&bytes[header.body..]).map_err(|e| {
        parse_err(path, format!("byte offset {}: body is not valid text", header.body + e.valid_up_to()))
    })?;
    let mut lines = body
        .lines()
        .enumerate()
        .map(|(i, l)| (header.body_line + i, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut values = Vec::new();
    for (ei, element) in header.elements.iter().enumerate() {
        for record in 0..element.count {
            let Some((line_no, line)) = lines.next() else {
                return Err(parse_err(
                    path,
                    format!(
                        "header declares {} `{}` records but the body ends after {record}",
                        element.count, element.name
                    ),
                ));
            };
            if ei != layout.element {
                continue;
            }
            values.clear();
            let mut toks = line.split_whitespace();
            let mut next = |ty: Scalar| {
                let tok = toks
                    .next()
                    .ok_or_else(|| parse_err(path, format!("line {line_no}: too few values")))?;
                ty.parse(tok)
                    .ok_or_else(|| parse_err(path, format!("line {line_no}: cannot parse `{tok}`")))
            };
            for prop in &element.props {
                match prop.kind {
                    Kind::Scalar(s) => values.push(next(s)?),
                    Kind::List { count, item } => {
                        let len = next(count)?;
                        for _ in 0..len as usize {
                            next(item)?;
                        }
                        values.push(f64::NAN);
                    }
                }
            }
            if toks.next().is_some() {
                return Err(parse_err(path, format!("line {line_no}: too many values")));
            }
            out.push(&values, layout, line_no, path, &format!("line {line_no}"))?;
        }
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(parse_err(path, format!("line {line_no}: data after the last declared record")));
    }
    Ok(())
}

fn parse_binary(bytes: &[u8], header: &Header, layout: &VertexLayout, out: &mut Collector, path: &Path) -> Result<()> {
    let mut pos = header.body;
    let mut values = Vec::new();
    for (ei, element) in header.elements.iter().enumerate() {
        for record in 0..element.count {
            let short = |pos: usize| {
                parse_err(
                    path,
                    format!(
                        "byte offset {pos}: body ends inside `{}` record {record} (header declares {})",
                        element.name, element.count
                    ),
                )
            };
            values.clear();
            for prop in &element.props {
                let mut take = |ty: Scalar| {
                    let end = pos + ty.size();
                    let b = bytes.get(pos..end).ok_or_else(|| short(pos))?;
                    pos = end;
                    Ok::<f64, crate::error::Error>(ty.decode(b))
                };
                match prop.kind {
                    Kind::Scalar(s) => values.push(take(s)?),
                    Kind::List { count, item } => {
                        let len = take(count)?;
                        if len < 0.0 {
                            return Err(parse_err(path, format!("byte offset {pos}: negative list length")));
                        }
                        let end = pos + len as usize * item.size();
                        if end > bytes.len() {
                            return Err(short(pos));
                        }
                        pos = end;
                        values.push(f64::NAN);
                    }
                }
            }
            if ei == layout.element {
                out.push(&values, layout, record, path, &format!("vertex record {record}"))?;
            }
        }
    }
    if pos != bytes.len() {
        return Err(parse_err(
            path,
            format!("byte offset {pos}: {} bytes after the last declared record", bytes.len() - pos),
        ));
    }
    Ok(())
}

pub(super) fn encode(cloud: &PointCloud, binary: bool, precision: Precision) -> Vec<u8> {
    let ty = match precision {
        Precision::F32 => "float",
        Precision::F64 => "double",
    };
    let mut head = String::new();
    head.push_str("ply\n");
    head.push_str(if binary {
        "format binary_little_endian 1.0\n"
    } else {
        "format ascii 1.0\n"
    });
    let _ = writeln!(head, "element vertex {}", cloud.len());
    for axis in ["x", "y", "z"] {
        let _ = writeln!(head, "property {ty} {axis}");
    }
    if cloud.labels().is_some() {
        head.push_str("property uchar is_noise\n");
    }
    head.push_str("end_header\n");

    let labels = cloud.labels();
    let mut out = head.into_bytes();
    if binary {
        for (i, p) in cloud.points().iter().enumerate() {
            for v in [p.x, p.y, p.z] {
                match precision {
                    Precision::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
                    Precision::F64 => out.extend_from_slice(&v.to_le_bytes()),
                }
            }
            if let Some(l) = labels {
                out.push(u8::from(l[i]));
            }
        }
    } else {
        let mut body = String::new();
        for (i, p) in cloud.points().iter().enumerate() {
            super::xyz::write_coords(&mut body, p, precision);
            if let Some(l) = labels {
                let _ = write!(body, " {}", u8::from(l[i]));
            }
            body.push('\n');
        }
        out.extend_from_slice(body.as_bytes());
    }
    out
}
