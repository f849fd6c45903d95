//! Minimal PLY reader and writer for colored point clouds.
//!
//! The vertex element must carry `x`, `y`, `z` (float or double) and `red`,
//! `green`, `blue` (uchar). Extra scalar properties and extra elements are
//! skipped. Both `ascii` and `binary_little_endian` encodings are supported.

use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyEncoding {
    #[default]
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    /// `None` marks a list property, which only non-vertex elements may use.
    properties: Vec<(String, Option<ScalarType>)>,
    header_offset: usize,
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let err = |offset: usize, msg: String| Error::format(path, offset, msg);
    let mut offset = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut first = true;
    loop {
        let Some(len) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            return Err(err(offset, "header is not terminated by end_header".into()));
        };
        let raw = &bytes[offset..offset + len];
        let line = std::str::from_utf8(raw)
            .map_err(|_| err(offset, "header is not valid UTF-8".into()))?
            .trim_end_matches('\r');
        let line_start = offset;
        offset += len + 1;
        let mut words = line.split_whitespace();
        let keyword = words.next().unwrap_or("");
        if first {
            if line != "ply" {
                return Err(err(line_start, "missing 'ply' magic".into()));
            }
            first = false;
            continue;
        }
        match keyword {
            "format" => {
                let kind = words.next().unwrap_or("");
                encoding = Some(match kind {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    other => return Err(err(line_start, format!("unsupported format {other:?}"))),
                });
            }
            "comment" | "obj_info" | "" => {}
            "element" => {
                let name = words.next().unwrap_or("").to_string();
                let count = words
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| err(line_start, format!("bad element line {line:?}")))?;
                elements.push(Element {
                    name,
                    count,
                    properties: Vec::new(),
                    header_offset: line_start,
                });
            }
            "property" => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| err(line_start, "property before any element".into()))?;
                let ty = words.next().unwrap_or("");
                if ty == "list" {
                    let name = words.nth(2).unwrap_or("").to_string();
                    element.properties.push((name, None));
                } else {
                    let scalar = ScalarType::parse(ty)
                        .ok_or_else(|| err(line_start, format!("unknown property type {ty:?}")))?;
                    let name = words.next().unwrap_or("").to_string();
                    element.properties.push((name, Some(scalar)));
                }
            }
            "end_header" => break,
            other => return Err(err(line_start, format!("unexpected header keyword {other:?}"))),
        }
    }
    let encoding = encoding.ok_or_else(|| err(0, "missing format line".into()))?;
    Ok(Header {
        encoding,
        elements,
        body_offset: offset,
    })
}

/// Column of each required vertex property.
struct VertexLayout {
    columns: [usize; 6],
    types: Vec<ScalarType>,
}

fn vertex_layout(path: &Path, element: &Element) -> Result<VertexLayout> {
    let mut types = Vec::new();
    for (name, ty) in &element.properties {
        match ty {
            Some(t) => types.push(*t),
            None => {
                return Err(Error::format(
                    path,
                    element.header_offset,
                    format!("vertex property {name:?} is a list"),
                ))
            }
        }
    }
    let mut columns = [0; 6];
    for (k, want) in ["x", "y", "z", "red", "green", "blue"].iter().enumerate() {
        let col = element
            .properties
            .iter()
            .position(|(n, _)| n == want)
            .ok_or_else(|| {
                Error::format(path, element.header_offset, format!("vertex element lacks property {want:?}"))
            })?;
        let ok = if k < 3 {
            matches!(types[col], ScalarType::F32 | ScalarType::F64)
        } else {
            types[col] == ScalarType::U8
        };
        if !ok {
            return Err(Error::format(
                path,
                element.header_offset,
                format!("property {want:?} has type {:?}", types[col]),
            ));
        }
        columns[k] = col;
    }
    Ok(VertexLayout { columns, types })
}

fn build_scene(path: &Path, rows: Vec<[f64; 6]>, offset_of: impl Fn(usize) -> usize) -> Result<Scene> {
    let mut points = Vec::with_capacity(rows.len());
    let mut colors = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if !(r[0].is_finite() && r[1].is_finite() && r[2].is_finite()) {
            return Err(Error::format(path, offset_of(i), format!("vertex {i} has a non-finite coordinate")));
        }
        points.push(Vector3::new(r[0], r[1], r[2]));
        colors.push([r[3] / 255.0, r[4] / 255.0, r[5] / 255.0]);
    }
    Scene::new(points, colors)
}

/// Parses a PLY byte buffer. `path` is used only for error messages.
pub fn parse_ply(path: &Path, bytes: &[u8]) -> Result<Scene> {
    let header = parse_header(path, bytes)?;
    let vertex_idx = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::format(path, 0, "no vertex element"))?;
    let vertex = &header.elements[vertex_idx];
    let layout = vertex_layout(path, vertex)?;
    let mut offset = header.body_offset;

    match header.encoding {
        PlyEncoding::BinaryLittleEndian => {
            for e in &header.elements[..vertex_idx] {
                let mut stride = 0;
                for (name, ty) in &e.properties {
                    stride += ty
                        .ok_or_else(|| {
                            Error::format(path, e.header_offset, format!("cannot skip list property {name:?}"))
                        })?
                        .size();
                }
                offset += stride * e.count;
            }
            let stride: usize = layout.types.iter().map(|t| t.size()).sum();
            let start = offset;
            if bytes.len() < start + stride * vertex.count {
                return Err(Error::format(
                    path,
                    bytes.len(),
                    format!("binary body holds fewer than {} vertices", vertex.count),
                ));
            }
            let mut rows = Vec::with_capacity(vertex.count);
            for i in 0..vertex.count {
                let mut values = Vec::with_capacity(layout.types.len());
                let mut p = start + i * stride;
                for t in &layout.types {
                    values.push(t.read_le(&bytes[p..p + t.size()]));
                    p += t.size();
                }
                rows.push(layout.columns.map(|c| values[c]));
            }
            build_scene(path, rows, |i| start + i * stride)
        }
        PlyEncoding::Ascii => {
            let text_err = |offset: usize, msg: String| Error::format(path, offset, msg);
            let mut lines = Vec::new();
            let mut pos = offset;
            while pos < bytes.len() {
                let len = bytes[pos..].iter().position(|&b| b == b'\n').unwrap_or(bytes.len() - pos);
                let line = std::str::from_utf8(&bytes[pos..pos + len])
                    .map_err(|_| text_err(pos, "body is not valid UTF-8".into()))?;
                if !line.trim().is_empty() {
                    lines.push((pos, line));
                }
                pos += len + 1;
            }
            let skip: usize = header.elements[..vertex_idx].iter().map(|e| e.count).sum();
            if lines.len() < skip + vertex.count {
                return Err(text_err(bytes.len(), format!("body holds fewer than {} vertices", vertex.count)));
            }
            let vertex_lines = &lines[skip..skip + vertex.count];
            let mut rows = Vec::with_capacity(vertex.count);
            for (line_offset, line) in vertex_lines {
                let words: Vec<&str> = line.split_whitespace().collect();
                if words.len() != layout.types.len() {
                    return Err(text_err(
                        *line_offset,
                        format!("expected {} values, found {}", layout.types.len(), words.len()),
                    ));
                }
                // float32 text goes through f32 so both encodings decode to the same value
                let values: Vec<f64> = words
                    .iter()
                    .zip(&layout.types)
                    .map(|(w, t)| match t {
                        ScalarType::F32 => w.parse::<f32>().map(f64::from),
                        _ => w.parse::<f64>(),
                    })
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| text_err(*line_offset, format!("unparsable vertex line {line:?}")))?;
                for k in 3..6 {
                    let c = values[layout.columns[k]];
                    if !(0.0..=255.0).contains(&c) || c.fract() != 0.0 {
                        return Err(text_err(*line_offset, format!("color value {c} is not a uchar")));
                    }
                }
                rows.push(layout.columns.map(|c| values[c]));
            }
            build_scene(path, rows, |i| vertex_lines[i].0)
        }
    }
}

pub fn read_ply(path: &Path) -> Result<Scene> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(path, &bytes)
}

fn color_byte(c: f64) -> u8 {
    (c * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Serializes with float32 coordinates and uchar colors.
pub fn encode_ply(scene: &Scene, encoding: PlyEncoding) -> Vec<u8> {
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    let mut out = format!(
        "ply\nformat {format} 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        scene.len()
    )
    .into_bytes();
    for (p, c) in scene.points().iter().zip(scene.colors()) {
        let xyz = [p.x as f32, p.y as f32, p.z as f32];
        let rgb = c.map(color_byte);
        match encoding {
            PlyEncoding::Ascii => {
                let line = format!("{} {} {} {} {} {}\n", xyz[0], xyz[1], xyz[2], rgb[0], rgb[1], rgb[2]);
                out.extend_from_slice(line.as_bytes());
            }
            PlyEncoding::BinaryLittleEndian => {
                for v in xyz {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out.extend_from_slice(&rgb);
            }
        }
    }
    out
}

pub fn write_ply(path: &Path, scene: &Scene, encoding: PlyEncoding) -> Result<()> {
    std::fs::write(path, encode_ply(scene, encoding)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("t.ply")
    }

    fn sample() -> Scene {
        Scene::new(
            vec![Vector3::new(0.1, -0.25, 0.5), Vector3::new(1.0, 2.0, -3.0)],
            vec![[1.0, 0.0, 128.0 / 255.0], [0.2, 0.4, 0.6]],
        )
        .unwrap()
    }

    #[test]
    fn ascii_and_binary_agree() {
        let s = sample();
        let a = parse_ply(p(), &encode_ply(&s, PlyEncoding::Ascii)).unwrap();
        let b = parse_ply(p(), &encode_ply(&s, PlyEncoding::BinaryLittleEndian)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        for (x, y) in a.points().iter().zip(s.points()) {
            assert!((x - y).norm() < 1e-6);
        }
    }

    #[test]
    fn canonical_bytes_round_trip() {
        for enc in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
            let bytes = encode_ply(&sample(), enc);
            let again = encode_ply(&parse_ply(p(), &bytes).unwrap(), enc);
            assert_eq!(bytes, again);
        }
    }

    #[test]
    fn missing_blue_is_a_format_error() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n\
                    property float z\nproperty uchar red\nproperty uchar green\nend_header\n0 0 0 1 2\n";
        match parse_ply(p(), text.as_bytes()) {
            Err(Error::Format { offset, message, .. }) => {
                assert_eq!(offset, 21);
                assert!(message.contains("blue"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_vertex_line_reports_its_offset() {
        let good = encode_ply(&sample(), PlyEncoding::Ascii);
        let text = String::from_utf8(good).unwrap().replace("1 2 -3", "1 two -3");
        let body = text.find("end_header\n").unwrap() + "end_header\n".len();
        let second = body + text[body..].find('\n').unwrap() + 1;
        match parse_ply(p(), text.as_bytes()) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, second),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let mut bytes = encode_ply(&sample(), PlyEncoding::BinaryLittleEndian);
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(parse_ply(p(), &bytes), Err(Error::Format { .. })));
    }

    #[test]
    fn doubles_extra_properties_and_faces() {
        let text = "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 2\nproperty double x\n\
                    property double y\nproperty double z\nproperty float nx\nproperty uchar red\n\
                    property uchar green\nproperty uchar blue\nelement face 1\n\
                    property list uchar int vertex_indices\nend_header\n\
                    0.5 0 0 1 255 0 0\n0 0.5 0 1 0 255 0\n3 0 1 1\n";
        let s = parse_ply(p(), text.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.colors()[1], [0.0, 1.0, 0.0]);
    }

    #[test]
    fn non_finite_and_magic() {
        assert!(parse_ply(p(), b"plx\n").is_err());
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n\
                    property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n\
                    end_header\nnan 0 0 0 0 0\n";
        assert!(matches!(parse_ply(p(), text.as_bytes()), Err(Error::Format { .. })));
    }
}
