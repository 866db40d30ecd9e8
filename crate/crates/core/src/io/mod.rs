//! Point cloud file formats: PLY (ascii and binary little-endian) and plain
//! XYZ text. An optional `is_noise` channel carries ground-truth labels.

mod ply;
mod xyz;

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geom::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CloudFormat {
    PlyAscii,
    PlyBinaryLe,
    Xyz,
}

/// Coordinate storage width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl FromStr for CloudFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ply" | "ply-ascii" => Ok(CloudFormat::PlyAscii),
            "ply-binary" | "ply-binary-le" => Ok(CloudFormat::PlyBinaryLe),
            "xyz" => Ok(CloudFormat::Xyz),
            other => Err(format!("unknown cloud format `{other}`")),
        }
    }
}

impl CloudFormat {
    /// Guess from a file extension. `.ply` maps to ascii PLY.
    pub fn from_extension(path: &Path) -> Option<CloudFormat> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "ply" => Some(CloudFormat::PlyAscii),
            "xyz" | "txt" => Some(CloudFormat::Xyz),
            _ => None,
        }
    }
}

fn parse_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a cloud. Any PLY hint accepts both PLY encodings since the header
/// names the real one; without a hint the PLY magic decides, then XYZ.
pub fn read_cloud(path: &Path, format: Option<CloudFormat>) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_cloud(&bytes, path, format)
}

/// Parses in-memory file contents. `path` is only used in diagnostics.
pub fn parse_cloud(bytes: &[u8], path: &Path, format: Option<CloudFormat>) -> Result<PointCloud> {
    let is_ply = match format {
        Some(CloudFormat::Xyz) => false,
        Some(_) => true,
        None => bytes.starts_with(b"ply\n") || bytes.starts_with(b"ply\r\n"),
    };
    if is_ply {
        ply::parse(bytes, path)
    } else {
        xyz::parse(bytes, path)
    }
}

/// Serializes a cloud. Output is a pure function of the cloud and options.
pub fn encode_cloud(cloud: &PointCloud, format: CloudFormat, precision: Precision) -> Result<Vec<u8>> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(match format {
        CloudFormat::PlyAscii => ply::encode(cloud, false, precision),
        CloudFormat::PlyBinaryLe => ply::encode(cloud, true, precision),
        CloudFormat::Xyz => xyz::encode(cloud, precision),
    })
}

pub fn write_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat, precision: Precision) -> Result<()> {
    let bytes = encode_cloud(cloud, format, precision)?;
    fs::write(path, bytes).map_err(io_err(path))
}

/// Format for a path given an explicit choice, falling back to the extension.
pub fn resolve_format(path: &Path, explicit: Option<CloudFormat>) -> Result<CloudFormat> {
    explicit
        .or_else(|| CloudFormat::from_extension(path))
        .ok_or_else(|| parse_err(path, "cannot infer the cloud format from the file extension"))
}

pub(crate) fn non_finite_err(path: &Path, what: &str, records: &[usize]) -> Error {
    const SHOWN: usize = 10;
    let mut list: Vec<String> = records.iter().take(SHOWN).map(|r| r.to_string()).collect();
    if records.len() > SHOWN {
        list.push(format!("... ({} total)", records.len()));
    }
    parse_err(path, format!("non-finite coordinate at {what} {}", list.join(", ")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;
    use proptest::prelude::*;

    const ALL: [CloudFormat; 3] = [CloudFormat::PlyAscii, CloudFormat::PlyBinaryLe, CloudFormat::Xyz];

    fn p() -> &'static Path {
        Path::new("mem")
    }

    fn roundtrip(cloud: &PointCloud, format: CloudFormat, precision: Precision) -> PointCloud {
        let bytes = encode_cloud(cloud, format, precision).unwrap();
        parse_cloud(&bytes, p(), None).unwrap()
    }

    #[test]
    fn minimal_ascii_ply() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n\
                    property float z\nend_header\n1 2 3\n4 5 6\n";
        let c = parse_cloud(text.as_bytes(), p(), None).unwrap();
        assert_eq!(c.points(), &[Point3::new(1.0, 2.0, 3.0), Point3::new(4.0, 5.0, 6.0)]);
        assert_eq!(c.ids(), &[0, 1]);
        assert!(c.labels().is_none());
    }

    #[test]
    fn count_mismatch_is_reported() {
        let mut text = String::from(
            "ply\nformat ascii 1.0\nelement vertex 10\nproperty double x\nproperty double y\n\
             property double z\nend_header\n",
        );
        for i in 0..9 {
            text.push_str(&format!("{i} 0 0\n"));
        }
        let err = parse_cloud(text.as_bytes(), p(), None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("10") && msg.contains('9'), "{msg}");

        let mut bin = encode_cloud(
            &PointCloud::new(vec![Point3::new(1.0, 2.0, 3.0), Point3::new(4.0, 5.0, 6.0)]).unwrap(),
            CloudFormat::PlyBinaryLe,
            Precision::F64,
        )
        .unwrap();
        bin.truncate(bin.len() - 8);
        assert!(matches!(parse_cloud(&bin, p(), None), Err(Error::Parse { .. })));
    }

    #[test]
    fn rejects_big_endian_and_bad_headers() {
        let be = "ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n";
        let msg = parse_cloud(be.as_bytes(), p(), None).unwrap_err().to_string();
        assert!(msg.contains("big-endian"), "{msg}");
        let no_end = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n";
        assert!(parse_cloud(no_end.as_bytes(), p(), None).is_err());
        let no_z = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n";
        assert!(parse_cloud(no_z.as_bytes(), p(), None).is_err());
        let int_x = "ply\nformat ascii 1.0\nelement vertex 1\nproperty int x\nproperty float y\n\
                     property float z\nend_header\n1 2 3\n";
        assert!(parse_cloud(int_x.as_bytes(), p(), None).is_err());
    }

    #[test]
    fn non_finite_records_are_listed() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty double x\nproperty double y\n\
                    property double z\nend_header\n0 0 0\nnan 1 1\n2 inf 2\n";
        let msg = parse_cloud(text.as_bytes(), p(), None).unwrap_err().to_string();
        assert!(msg.contains("line 9") && msg.contains("10"), "{msg}");
        let xyz = "0 0 0\n# comment\n1 NaN 1\n";
        let msg = parse_cloud(xyz.as_bytes(), p(), Some(CloudFormat::Xyz)).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn skips_faces_and_extra_properties() {
        let text = "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 3\nproperty float x\n\
                    property float y\nproperty float z\nproperty uchar red\nproperty uchar is_noise\n\
                    element face 1\nproperty list uchar int vertex_indices\nend_header\n\
                    0 0 0 255 0\n1 0 0 0 1\n0 1 0 9 0\n3 0 1 2\n";
        let c = parse_cloud(text.as_bytes(), p(), None).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.labels().unwrap(), &[false, true, false]);
    }

    #[test]
    fn binary_with_leading_face_element() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement face 1\n\
                          property list uchar int vertex_indices\nelement vertex 1\nproperty float x\n\
                          property float y\nproperty float z\nproperty double nx\nend_header\n"
            .to_vec();
        bytes.push(3);
        for i in [0i32, 1, 2] {
            bytes.extend_from_slice(&i.to_le_bytes());
        }
        for v in [1.5f32, -2.0, 0.25] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&9.0f64.to_le_bytes());
        let c = parse_cloud(&bytes, p(), Some(CloudFormat::PlyBinaryLe)).unwrap();
        assert_eq!(c.points(), &[Point3::new(1.5, -2.0, 0.25)]);
    }

    #[test]
    fn labeled_header_and_determinism() {
        let c = PointCloud::with_labels(vec![Point3::new(0.1, 0.2, 0.3); 4], vec![false, true, true, false]).unwrap();
        for f in ALL {
            let a = encode_cloud(&c, f, Precision::F64).unwrap();
            let b = encode_cloud(&c, f, Precision::F64).unwrap();
            assert_eq!(a, b);
        }
        let text = encode_cloud(&c, CloudFormat::PlyBinaryLe, Precision::F32).unwrap();
        let header = String::from_utf8_lossy(&text[..text.windows(10).position(|w| w == b"end_header").unwrap()]);
        assert!(header.contains("property uchar is_noise"));
        assert!(header.contains("property float x"));
        let unlabeled = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0)]).unwrap();
        let text = encode_cloud(&unlabeled, CloudFormat::PlyAscii, Precision::F64).unwrap();
        assert!(!String::from_utf8(text).unwrap().contains("is_noise"));
    }

    #[test]
    fn empty_cloud_is_not_written() {
        let c = PointCloud::new(vec![]).unwrap();
        assert!(matches!(encode_cloud(&c, CloudFormat::Xyz, Precision::F64), Err(Error::EmptyInput)));
    }

    #[test]
    fn format_resolution() {
        assert_eq!(resolve_format(Path::new("a.PLY"), None).unwrap(), CloudFormat::PlyAscii);
        assert_eq!(resolve_format(Path::new("a.xyz"), None).unwrap(), CloudFormat::Xyz);
        assert_eq!(resolve_format(Path::new("a.bin"), Some(CloudFormat::PlyBinaryLe)).unwrap(), CloudFormat::PlyBinaryLe);
        assert!(resolve_format(Path::new("a.bin"), None).is_err());
        assert_eq!("ply-binary-le".parse::<CloudFormat>().unwrap(), CloudFormat::PlyBinaryLe);
    }

    fn arb_cloud() -> impl Strategy<Value = (Vec<Point3>, Option<Vec<bool>>)> {
        (1usize..60).prop_flat_map(|n| {
            (
                prop::collection::vec(
                    (-1e6f64..1e6, -1e-3f64..1e-3, -1e30f64..1e30).prop_map(|(x, y, z)| Point3::new(x, y, z)),
                    n,
                ),
                prop::option::of(prop::collection::vec(any::<bool>(), n)),
            )
        })
    }

    proptest! {
        #[test]
        fn roundtrip_identity((pts, labels) in arb_cloud()) {
            let cloud = match labels {
                Some(l) => PointCloud::with_labels(pts.clone(), l).unwrap(),
                None => PointCloud::new(pts.clone()).unwrap(),
            };
            for f in ALL {
                let back = roundtrip(&cloud, f, Precision::F64);
                prop_assert_eq!(back.points(), cloud.points());
                prop_assert_eq!(back.labels(), cloud.labels());

                let back32 = roundtrip(&cloud, f, Precision::F32);
                for (a, b) in back32.points().iter().zip(cloud.points()) {
                    prop_assert_eq!(a.x as f32, b.x as f32);
                    prop_assert_eq!(a.y as f32, b.y as f32);
                    prop_assert_eq!(a.z as f32, b.z as f32);
                    if f != CloudFormat::Xyz {
                        prop_assert_eq!(a.x, (a.x as f32) as f64);
                    }
                }
                prop_assert_eq!(back32.labels(), cloud.labels());
            }
        }
    }
}
