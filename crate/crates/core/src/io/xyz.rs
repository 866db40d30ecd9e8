use std::fmt::Write as _;
use std::path::Path;

use super::{non_finite_err, parse_err, Precision};
use crate::error::Result;
use crate::geom::{Point3, PointCloud};

/// Shortest representation that parses back to the same value.
pub(super) fn write_coords(out: &mut String, p: &Point3, precision: Precision) {
    let _ = match precision {
        Precision::F32 => write!(out, "{} {} {}", p.x as f32, p.y as f32, p.z as f32),
        Precision::F64 => write!(out, "{} {} {}", p.x, p.y, p.z),
    };
}

pub(super) fn encode(cloud: &PointCloud, precision: Precision) -> Vec<u8> {
    let mut out = String::new();
    let labels = cloud.labels();
    for (i, p) in cloud.points().iter().enumerate() {
        write_coords(&mut out, p, precision);
        if let Some(l) = labels {
            let _ = write!(out, " {}", u8::from(l[i]));
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// Lines of `x y z [is_noise]`; `#` starts a comment. Either every record
/// carries a label or none does.
pub(super) fn parse(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| parse_err(path, format!("byte offset {}: not valid text", e.valid_up_to())))?;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut labeled = None;
    let mut bad = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if !(3..=4).contains(&toks.len()) {
            return Err(parse_err(path, format!("line {line_no}: expected 3 or 4 values, got {}", toks.len())));
        }
        let has_label = toks.len() == 4;
        if *labeled.get_or_insert(has_label) != has_label {
            return Err(parse_err(path, format!("line {line_no}: label column present on some lines only")));
        }
        let mut c = [0.0; 3];
        for (slot, tok) in c.iter_mut().zip(&toks) {
            *slot = tok
                .parse()
                .map_err(|_| parse_err(path, format!("line {line_no}: cannot parse `{tok}`")))?;
        }
        let p = Point3::new(c[0], c[1], c[2]);
        if !p.is_finite() {
            bad.push(line_no);
        }
        points.push(p);
        if has_label {
            labels.push(match toks[3] {
                "0" => false,
                "1" => true,
                t => return Err(parse_err(path, format!("line {line_no}: label must be 0 or 1, got `{t}`"))),
            });
        }
    }
    if !bad.is_empty() {
        return Err(non_finite_err(path, "line", &bad));
    }
    if labeled == Some(true) {
        PointCloud::with_labels(points, labels)
    } else {
        PointCloud::new(points)
    }
}
