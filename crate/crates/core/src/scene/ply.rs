//! Minimal PLY support: ingest of `ascii` and `binary_little_endian` vertex
//! data (x/y/z plus optional red/green/blue), and a colored point writer.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct PlyCloud {
    pub positions: Vec<Vec3>,
    /// Rescaled to [0, 1].
    pub colors: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
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

    fn width(self) -> usize {
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
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, PartialEq)]
enum Encoding {
    Ascii,
    BinaryLe,
}

fn perr(at: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Parse {
        at: at.into(),
        msg: msg.into(),
    }
}

pub fn read_ply(bytes: &[u8]) -> Result<PlyCloud> {
    let (encoding, elements, body_start) = parse_header(bytes)?;
    let vertex_pos = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| perr("header", "no vertex element"))?;
    let vertex = &elements[vertex_pos];
    let find = |n: &str| {
        vertex
            .props
            .iter()
            .position(|p| matches!(p, Property::Scalar { name, .. } if name == n))
    };
    let xyz = [find("x"), find("y"), find("z")];
    let [Some(ix), Some(iy), Some(iz)] = xyz else {
        return Err(perr("header", "vertex element lacks x/y/z"));
    };
    let rgb = match (find("red"), find("green"), find("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };
    let color_scale = rgb.map(|idx| match &vertex.props[idx[0]] {
        Property::Scalar { ty: Scalar::F32 | Scalar::F64, .. } => 1.0,
        Property::Scalar { ty: Scalar::U16, .. } => 65535.0,
        _ => 255.0,
    });

    let body = &bytes[body_start..];
    let mut values = vec![0.0f64; vertex.props.len()];
    let mut positions = Vec::with_capacity(vertex.count);
    let mut colors = rgb.map(|_| Vec::with_capacity(vertex.count));

    let mut emit = |values: &[f64], rec: usize| -> Result<()> {
        let p = Vec3::new(values[ix], values[iy], values[iz]);
        if !p.is_finite() {
            return Err(perr(format!("vertex[{rec}]"), "non-finite position"));
        }
        positions.push(p);
        if let (Some(idx), Some(out), Some(scale)) = (rgb, colors.as_mut(), color_scale) {
            let c = idx.map(|k| values[k] / scale);
            if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(perr(format!("vertex[{rec}]"), "color out of range"));
            }
            out.push(c);
        }
        Ok(())
    };

    match encoding {
        Encoding::BinaryLe => {
            let mut off = 0usize;
            let take = |off: &mut usize, n: usize, at: &str| -> Result<&[u8]> {
                let s = body
                    .get(*off..*off + n)
                    .ok_or_else(|| perr(at, "unexpected end of data"))?;
                *off += n;
                Ok(s)
            };
            for (ei, el) in elements.iter().enumerate().take(vertex_pos + 1) {
                for rec in 0..el.count {
                    let at = format!("{}[{rec}]", el.name);
                    for (pi, prop) in el.props.iter().enumerate() {
                        match prop {
                            Property::Scalar { ty, .. } => {
                                let v = ty.read_le(take(&mut off, ty.width(), &at)?);
                                if ei == vertex_pos {
                                    values[pi] = v;
                                }
                            }
                            Property::List { count, item } => {
                                let n = count.read_le(take(&mut off, count.width(), &at)?) as usize;
                                take(&mut off, n * item.width(), &at)?;
                            }
                        }
                    }
                    if ei == vertex_pos {
                        emit(&values, rec)?;
                    }
                }
            }
        }
        Encoding::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| perr("body", "ascii body is not UTF-8"))?;
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            for (ei, el) in elements.iter().enumerate().take(vertex_pos + 1) {
                for rec in 0..el.count {
                    let at = format!("{}[{rec}]", el.name);
                    let line = lines.next().ok_or_else(|| perr(&at, "unexpected end of data"))?;
                    let mut tokens = line.split_whitespace();
                    let mut next = || -> Result<f64> {
                        tokens
                            .next()
                            .ok_or_else(|| perr(&at, "too few values"))?
                            .parse::<f64>()
                            .map_err(|e| perr(&at, e.to_string()))
                    };
                    for (pi, prop) in el.props.iter().enumerate() {
                        match prop {
                            Property::Scalar { .. } => {
                                let v = next()?;
                                if ei == vertex_pos {
                                    values[pi] = v;
                                }
                            }
                            Property::List { .. } => {
                                let n = next()? as usize;
                                for _ in 0..n {
                                    next()?;
                                }
                            }
                        }
                    }
                    if ei == vertex_pos {
                        emit(&values, rec)?;
                    }
                }
            }
        }
    }
    Ok(PlyCloud { positions, colors })
}

fn parse_header(bytes: &[u8]) -> Result<(Encoding, Vec<Element>, usize)> {
    const END: &[u8] = b"end_header";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| perr("header", "missing end_header"))?;
    let mut body_start = end + END.len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) == Some(&b'\n') {
        body_start += 1;
    }
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| perr("header", "not UTF-8"))?;
    let mut lines = header.lines().map(str::trim);
    if lines.next() != Some("ply") {
        return Err(perr("header", "missing ply magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    for (ln, line) in lines.enumerate() {
        let at = format!("header line {}", ln + 2);
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", "ascii", _] => encoding = Some(Encoding::Ascii),
            ["format", "binary_little_endian", _] => encoding = Some(Encoding::BinaryLe),
            ["format", other, _] => return Err(perr(at, format!("unsupported format {other}"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| perr(&at, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, _name] => {
                let el = elements.last_mut().ok_or_else(|| perr(&at, "property before element"))?;
                el.props.push(Property::List {
                    count: Scalar::parse(count).ok_or_else(|| perr(&at, "bad list count type"))?,
                    item: Scalar::parse(item).ok_or_else(|| perr(&at, "bad list item type"))?,
                });
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| perr(&at, "property before element"))?;
                el.props.push(Property::Scalar {
                    name: name.to_string(),
                    ty: Scalar::parse(ty).ok_or_else(|| perr(&at, format!("unknown type {ty}")))?,
                });
            }
            _ => return Err(perr(at, format!("unrecognized line '{line}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| perr("header", "missing format line"))?;
    Ok((encoding, elements, body_start))
}

/// Writes a binary little-endian PLY with double x/y/z and uchar colors.
pub fn write_colored_ply(path: &Path, positions: &[Vec3], colors: &[[u8; 3]]) -> Result<()> {
    assert_eq!(positions.len(), colors.len());
    let mut buf = Vec::with_capacity(64 + positions.len() * 27);
    write!(
        buf,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        positions.len()
    )
    .expect("writing to a Vec cannot fail");
    for (p, c) in positions.iter().zip(colors) {
        for v in p.to_array() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(c);
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}
