//! Minimal PLY container: ASCII and binary, arbitrary elements and properties.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
    BinaryBigEndian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarType {
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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
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

    fn name(self) -> &'static str {
        match self {
            ScalarType::I8 => "char",
            ScalarType::U8 => "uchar",
            ScalarType::I16 => "short",
            ScalarType::U16 => "ushort",
            ScalarType::I32 => "int",
            ScalarType::U32 => "uint",
            ScalarType::F32 => "float",
            ScalarType::F64 => "double",
        }
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, ScalarType::F32 | ScalarType::F64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PropertyKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Property {
    pub name: String,
    pub kind: PropertyKind,
}

impl Property {
    pub fn scalar(name: &str, ty: ScalarType) -> Self {
        Self {
            name: name.to_string(),
            kind: PropertyKind::Scalar(ty),
        }
    }

    pub fn list(name: &str, count: ScalarType, item: ScalarType) -> Self {
        Self {
            name: name.to_string(),
            kind: PropertyKind::List { count, item },
        }
    }
}

/// Values of one element row; list properties are stored inline as their items.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub name: String,
    pub properties: Vec<Property>,
    pub rows: Vec<Vec<Value>>,
}

impl Element {
    pub fn new(name: &str, properties: Vec<Property>) -> Self {
        Self {
            name: name.to_string(),
            properties,
            rows: Vec::new(),
        }
    }

    pub fn property_index(&self, name: &str) -> Option<usize> {
        self.properties.iter().position(|p| p.name == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ply {
    pub format: PlyFormat,
    pub comments: Vec<String>,
    pub elements: Vec<Element>,
}

impl Ply {
    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name == name)
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn read_ply(path: &Path) -> Result<Ply> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes, path)
}

/// Parses PLY bytes; `path` is only used in error messages.
pub fn parse_ply(bytes: &[u8], path: &Path) -> Result<Ply> {
    let mut pos = 0;
    let mut line_no = 0;
    let next_line = |pos: &mut usize| -> Option<String> {
        if *pos >= bytes.len() {
            return None;
        }
        let end = bytes[*pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |i| *pos + i);
        let line = String::from_utf8_lossy(&bytes[*pos..end]).trim_end_matches('\r').to_string();
        *pos = (end + 1).min(bytes.len());
        Some(line)
    };
    let header_line = |pos: &mut usize, line_no: &mut usize| {
        *line_no += 1;
        next_line(pos)
    };
    if header_line(&mut pos, &mut line_no).as_deref() != Some("ply") {
        return Err(parse_err(path, 1, "missing 'ply' magic"));
    }
    let mut format = None;
    let mut comments = Vec::new();
    let mut elements: Vec<(Element, usize)> = Vec::new();
    loop {
        let Some(line) = header_line(&mut pos, &mut line_no) else {
            return Err(parse_err(path, line_no, "header ended without end_header"));
        };
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => {
                format = Some(match (words.next(), words.next()) {
                    (Some("ascii"), Some("1.0")) => PlyFormat::Ascii,
                    (Some("binary_little_endian"), Some("1.0")) => PlyFormat::BinaryLittleEndian,
                    (Some("binary_big_endian"), Some("1.0")) => PlyFormat::BinaryBigEndian,
                    _ => return Err(parse_err(path, line_no, format!("unsupported format line '{line}'"))),
                })
            }
            Some("comment") | Some("obj_info") => {
                comments.push(line.split_once(' ').map_or("", |(_, c)| c).to_string());
            }
            Some("element") => {
                let (Some(name), Some(count)) = (words.next(), words.next()) else {
                    return Err(parse_err(path, line_no, "malformed element line"));
                };
                let count: usize =
                    count.parse().map_err(|_| parse_err(path, line_no, format!("bad element count '{count}'")))?;
                elements.push((Element::new(name, Vec::new()), count));
            }
            Some("property") => {
                let Some((el, _)) = elements.last_mut() else {
                    return Err(parse_err(path, line_no, "property before any element"));
                };
                let bad_type = |t: &str| parse_err(path, line_no, format!("unknown property type '{t}'"));
                let prop = match words.next() {
                    Some("list") => {
                        let (Some(c), Some(i), Some(name)) = (words.next(), words.next(), words.next()) else {
                            return Err(parse_err(path, line_no, "malformed list property"));
                        };
                        let count = ScalarType::parse(c).ok_or_else(|| bad_type(c))?;
                        if !count.is_integer() {
                            return Err(parse_err(path, line_no, "list count must be an integer type"));
                        }
                        Property::list(name, count, ScalarType::parse(i).ok_or_else(|| bad_type(i))?)
                    }
                    Some(t) => {
                        let Some(name) = words.next() else {
                            return Err(parse_err(path, line_no, "property without a name"));
                        };
                        Property::scalar(name, ScalarType::parse(t).ok_or_else(|| bad_type(t))?)
                    }
                    None => return Err(parse_err(path, line_no, "empty property line")),
                };
                el.properties.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return Err(parse_err(path, line_no, format!("unexpected header keyword '{other}'"))),
            None => {}
        }
    }
    let format = format.ok_or_else(|| parse_err(path, line_no, "missing format line"))?;
    let body = &bytes[pos..];
    let elements = match format {
        PlyFormat::Ascii => read_ascii_body(body, elements, path, line_no)?,
        _ => read_binary_body(body, elements, format == PlyFormat::BinaryLittleEndian, path, line_no)?,
    };
    Ok(Ply {
        format,
        comments,
        elements,
    })
}

fn narrow(ty: ScalarType, v: f64) -> f64 {
    if ty == ScalarType::F32 {
        v as f32 as f64
    } else {
        v
    }
}

fn read_ascii_body(body: &[u8], elements: Vec<(Element, usize)>, path: &Path, header_lines: usize) -> Result<Vec<Element>> {
    let text = std::str::from_utf8(body).map_err(|_| parse_err(path, header_lines + 1, "body is not valid UTF-8"))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut out = Vec::with_capacity(elements.len());
    for (mut el, count) in elements {
        el.rows.reserve(count);
        for r in 0..count {
            let Some((i, line)) = lines.next() else {
                return Err(parse_err(
                    path,
                    header_lines + 1,
                    format!("file ends after {r} of {count} '{}' rows", el.name),
                ));
            };
            let line_no = header_lines + 1 + i;
            let mut words = line.split_whitespace();
            let mut next = |what: &str| -> Result<f64> {
                let w = words.next().ok_or_else(|| parse_err(path, line_no, format!("missing value for {what}")))?;
                w.parse::<f64>().map_err(|_| parse_err(path, line_no, format!("bad number '{w}' for {what}")))
            };
            let mut row = Vec::with_capacity(el.properties.len());
            for p in &el.properties {
                row.push(match &p.kind {
                    PropertyKind::Scalar(ty) => Value::Scalar(narrow(*ty, next(&p.name)?)),
                    PropertyKind::List { .. } => {
                        let n = next(&p.name)?;
                        if !(n >= 0.0 && n.fract() == 0.0) {
                            return Err(parse_err(path, line_no, format!("bad list length {n}")));
                        }
                        Value::List((0..n as usize).map(|_| next(&p.name)).collect::<Result<_>>()?)
                    }
                });
            }
            el.rows.push(row);
        }
        out.push(el);
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    little: bool,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Option<[u8; N]> {
        let chunk = self.bytes.get(self.pos..self.pos + N)?;
        self.pos += N;
        let mut out: [u8; N] = chunk.try_into().ok()?;
        if !self.little {
            out.reverse();
        }
        Some(out)
    }

    fn scalar(&mut self, ty: ScalarType) -> Option<f64> {
        Some(match ty {
            ScalarType::I8 => i8::from_le_bytes(self.take()?) as f64,
            ScalarType::U8 => u8::from_le_bytes(self.take()?) as f64,
            ScalarType::I16 => i16::from_le_bytes(self.take()?) as f64,
            ScalarType::U16 => u16::from_le_bytes(self.take()?) as f64,
            ScalarType::I32 => i32::from_le_bytes(self.take()?) as f64,
            ScalarType::U32 => u32::from_le_bytes(self.take()?) as f64,
            ScalarType::F32 => f32::from_le_bytes(self.take()?) as f64,
            ScalarType::F64 => f64::from_le_bytes(self.take()?),
        })
    }
}

fn read_binary_body(
    body: &[u8],
    elements: Vec<(Element, usize)>,
    little: bool,
    path: &Path,
    header_lines: usize,
) -> Result<Vec<Element>> {
    let mut r = Reader { bytes: body, pos: 0, little };
    let mut out = Vec::with_capacity(elements.len());
    for (mut el, count) in elements {
        let row_size: usize = el
            .properties
            .iter()
            .map(|p| match p.kind {
                PropertyKind::Scalar(t) => t.size(),
                PropertyKind::List { count, .. } => count.size(),
            })
            .sum();
        // refuse absurd counts before allocating
        if row_size > 0 && count > body.len() / row_size + 1 {
            return Err(parse_err(
                path,
                header_lines,
                format!("'{}' declares {count} rows but the file is only {} bytes", el.name, body.len()),
            ));
        }
        el.rows.reserve(count);
        for row_index in 0..count {
            let truncated = || {
                parse_err(
                    path,
                    header_lines,
                    format!("binary body truncated in '{}' row {row_index} of {count}", el.name),
                )
            };
            let mut row = Vec::with_capacity(el.properties.len());
            for p in &el.properties {
                row.push(match p.kind {
                    PropertyKind::Scalar(t) => Value::Scalar(r.scalar(t).ok_or_else(truncated)?),
                    PropertyKind::List { count, item } => {
                        let n = r.scalar(count).ok_or_else(truncated)?;
                        if n < 0.0 {
                            return Err(parse_err(path, header_lines, format!("negative list length {n}")));
                        }
                        let items = (0..n as usize)
                            .map(|_| r.scalar(item).ok_or_else(truncated))
                            .collect::<Result<Vec<_>>>()?;
                        Value::List(items)
                    }
                });
            }
            el.rows.push(row);
        }
        out.push(el);
    }
    Ok(out)
}

fn put(buf: &mut Vec<u8>, ty: ScalarType, v: f64, little: bool) {
    macro_rules! emit {
        ($t:ty) => {{
            let x = v as $t;
            if little {
                buf.extend_from_slice(&x.to_le_bytes())
            } else {
                buf.extend_from_slice(&x.to_be_bytes())
            }
        }};
    }
    match ty {
        ScalarType::I8 => emit!(i8),
        ScalarType::U8 => emit!(u8),
        ScalarType::I16 => emit!(i16),
        ScalarType::U16 => emit!(u16),
        ScalarType::I32 => emit!(i32),
        ScalarType::U32 => emit!(u32),
        ScalarType::F32 => emit!(f32),
        ScalarType::F64 => emit!(f64),
    }
}

fn fmt_value(out: &mut String, ty: ScalarType, v: f64) {
    if ty.is_integer() {
        let _ = write!(out, "{}", v as i64);
    } else if ty == ScalarType::F32 {
        let _ = write!(out, "{}", v as f32);
    } else {
        let _ = write!(out, "{v}");
    }
}

/// Serialises to bytes. Rows must match their element's property list.
pub fn encode_ply(ply: &Ply) -> Vec<u8> {
    let mut header = String::from("ply\n");
    header.push_str(match ply.format {
        PlyFormat::Ascii => "format ascii 1.0\n",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0\n",
        PlyFormat::BinaryBigEndian => "format binary_big_endian 1.0\n",
    });
    for c in &ply.comments {
        let _ = writeln!(header, "comment {c}");
    }
    for el in &ply.elements {
        let _ = writeln!(header, "element {} {}", el.name, el.rows.len());
        for p in &el.properties {
            match &p.kind {
                PropertyKind::Scalar(t) => {
                    let _ = writeln!(header, "property {} {}", t.name(), p.name);
                }
                PropertyKind::List { count, item } => {
                    let _ = writeln!(header, "property list {} {} {}", count.name(), item.name(), p.name);
                }
            }
        }
    }
    header.push_str("end_header\n");
    let mut buf = header.into_bytes();
    match ply.format {
        PlyFormat::Ascii => {
            let mut text = String::new();
            for el in &ply.elements {
                for row in &el.rows {
                    let mut first = true;
                    for (p, v) in el.properties.iter().zip(row) {
                        let mut sep = |text: &mut String| {
                            if !first {
                                text.push(' ');
                            }
                            first = false;
                        };
                        match (&p.kind, v) {
                            (PropertyKind::Scalar(t), Value::Scalar(x)) => {
                                sep(&mut text);
                                fmt_value(&mut text, *t, *x);
                            }
                            (PropertyKind::List { item, .. }, Value::List(xs)) => {
                                sep(&mut text);
                                let _ = write!(text, "{}", xs.len());
                                for x in xs {
                                    text.push(' ');
                                    fmt_value(&mut text, *item, *x);
                                }
                            }
                            _ => panic!("row does not match property '{}'", p.name),
                        }
                    }
                    text.push('\n');
                }
            }
            buf.extend_from_slice(text.as_bytes());
        }
        _ => {
            let little = ply.format == PlyFormat::BinaryLittleEndian;
            for el in &ply.elements {
                for row in &el.rows {
                    for (p, v) in el.properties.iter().zip(row) {
                        match (&p.kind, v) {
                            (PropertyKind::Scalar(t), Value::Scalar(x)) => put(&mut buf, *t, *x, little),
                            (PropertyKind::List { count, item }, Value::List(xs)) => {
                                put(&mut buf, *count, xs.len() as f64, little);
                                for x in xs {
                                    put(&mut buf, *item, *x, little);
                                }
                            }
                            _ => panic!("row does not match property '{}'", p.name),
                        }
                    }
                }
            }
        }
    }
    buf
}

pub fn write_ply(ply: &Ply, path: &Path) -> Result<()> {
    std::fs::write(path, encode_ply(ply)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(format: PlyFormat) -> Ply {
        let mut v = Element::new(
            "vertex",
            vec![
                Property::scalar("x", ScalarType::F32),
                Property::scalar("idx", ScalarType::I32),
                Property::scalar("d", ScalarType::F64),
            ],
        );
        v.rows.push(vec![Value::Scalar(0.1f32 as f64), Value::Scalar(-7.0), Value::Scalar(1.0 / 3.0)]);
        v.rows.push(vec![Value::Scalar(2.5), Value::Scalar(40000.0), Value::Scalar(-1e-300)]);
        let mut f = Element::new("face", vec![Property::list("vertex_indices", ScalarType::U8, ScalarType::I32)]);
        f.rows.push(vec![Value::List(vec![0.0, 1.0, 2.0])]);
        f.rows.push(vec![Value::List(vec![3.0, 4.0, 5.0, 6.0])]);
        Ply {
            format,
            comments: vec!["hello world".into()],
            elements: vec![v, f],
        }
    }

    #[test]
    fn round_trips_all_formats() {
        for format in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian, PlyFormat::BinaryBigEndian] {
            let ply = sample(format);
            let back = parse_ply(&encode_ply(&ply), Path::new("mem.ply")).unwrap();
            assert_eq!(back, ply, "{format:?}");
        }
    }

    #[test]
    fn truncation_is_an_error() {
        let bytes = encode_ply(&sample(PlyFormat::BinaryLittleEndian));
        for cut in [bytes.len() - 1, bytes.len() - 9, bytes.len() - 30] {
            assert!(matches!(parse_ply(&bytes[..cut], Path::new("t.ply")), Err(Error::Parse { .. })));
        }
    }

    #[test]
    fn malformed_headers() {
        for text in [
            "plx\n",
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty floot x\nend_header\n1\n",
            "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nend_header\n1\n",
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\nabc\n",
            "ply\nformat ascii 1.0\nelement vertex 1\n",
        ] {
            assert!(parse_ply(text.as_bytes(), Path::new("m.ply")).is_err(), "{text}");
        }
        let err = parse_ply(
            b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\nabc\n",
            Path::new("m.ply"),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 6, .. }), "{err}");
    }
}
