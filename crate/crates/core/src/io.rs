//! Text and image formats.
//!
//! All text formats are whitespace-delimited, one record per line, with `#`
//! starting a comment. Node indices in files are 0-based unless the reader is
//! told otherwise.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::prox::PiecewiseLinearPenalty;

/// Index base used at the file boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndexBase {
    #[default]
    Zero,
    One,
}

impl IndexBase {
    fn offset(self) -> usize {
        match self {
            IndexBase::Zero => 0,
            IndexBase::One => 1,
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Yields `(line number, fields)` for every non-blank, non-comment line.
fn records<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, Vec<String>)>> {
    reader.lines().enumerate().filter_map(|(k, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(parse_err(k + 1, e.to_string()))),
        };
        let body = line.split('#').next().unwrap_or("");
        let fields: Vec<String> = body.split_whitespace().map(str::to_owned).collect();
        if fields.is_empty() {
            None
        } else {
            Some(Ok((k + 1, fields)))
        }
    })
}

fn parse_index(line: usize, field: &str, base: IndexBase) -> Result<usize> {
    let raw: usize = field
        .parse()
        .map_err(|_| parse_err(line, format!("invalid node index '{field}'")))?;
    raw.checked_sub(base.offset())
        .ok_or_else(|| parse_err(line, format!("node index {raw} below the index base")))
}

fn parse_value(line: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_err(line, format!("invalid number '{field}'")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite number '{field}'")));
    }
    Ok(v)
}

/// Node file contents: one value per node and optional weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTable {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Reads `i v [w]` lines. Every index in `0..n` must appear exactly once;
/// a missing weight defaults to 1.
pub fn read_nodes<R: BufRead>(reader: R, base: IndexBase) -> Result<NodeTable> {
    let mut entries: Vec<(usize, usize, f64, f64)> = Vec::new();
    for rec in records(reader) {
        let (line, f) = rec?;
        if f.len() < 2 || f.len() > 3 {
            return Err(parse_err(line, "expected 'i value [weight]'"));
        }
        let i = parse_index(line, &f[0], base)?;
        let v = parse_value(line, &f[1])?;
        let w = match f.get(2) {
            Some(s) => parse_value(line, s)?,
            None => 1.0,
        };
        entries.push((line, i, v, w));
    }
    let n = entries.len();
    let mut values = vec![f64::NAN; n];
    let mut weights = vec![1.0; n];
    for (line, i, v, w) in entries {
        if i >= n {
            return Err(parse_err(line, format!("node index {i} out of range for {n} nodes")));
        }
        if !values[i].is_nan() {
            return Err(parse_err(line, format!("duplicate node {i}")));
        }
        values[i] = v;
        weights[i] = w;
    }
    Ok(NodeTable { values, weights })
}

/// Reads `i j v` lines.
pub fn read_edges<R: BufRead>(reader: R, base: IndexBase) -> Result<Vec<(usize, usize, f64)>> {
    let mut edges = Vec::new();
    for rec in records(reader) {
        let (line, f) = rec?;
        if f.len() != 3 {
            return Err(parse_err(line, "expected 'i j value'"));
        }
        edges.push((
            parse_index(line, &f[0], base)?,
            parse_index(line, &f[1], base)?,
            parse_value(line, &f[2])?,
        ));
    }
    Ok(edges)
}

/// Reads `i b_1 theta_1 ... b_{m-1} theta_{m-1} theta_m` lines: `theta_k`
/// is the slope left of `b_k` and the final value the slope right of the
/// last kink. A line `i theta` is a linear penalty.
pub fn read_penalties<R: BufRead>(
    reader: R,
    base: IndexBase,
    n: usize,
) -> Result<Vec<Option<PiecewiseLinearPenalty>>> {
    let mut out = vec![None; n];
    for rec in records(reader) {
        let (line, f) = rec?;
        if f.len() < 2 || f.len() % 2 != 0 {
            return Err(parse_err(line, "expected 'i b_1 theta_1 ... theta_m'"));
        }
        let i = parse_index(line, &f[0], base)?;
        if i >= n {
            return Err(parse_err(line, format!("node index {i} out of range for {n} nodes")));
        }
        let nums = f[1..]
            .iter()
            .map(|s| parse_value(line, s))
            .collect::<Result<Vec<_>>>()?;
        let (pairs, last) = nums.split_at(nums.len() - 1);
        let breakpoints = pairs.iter().step_by(2).copied().collect();
        let mut slopes: Vec<f64> = pairs.iter().skip(1).step_by(2).copied().collect();
        slopes.push(last[0]);
        if out[i].is_some() {
            return Err(parse_err(line, format!("duplicate penalty for node {i}")));
        }
        out[i] = Some(
            PiecewiseLinearPenalty::new(breakpoints, slopes)
                .map_err(|e| parse_err(line, e.to_string()))?,
        );
    }
    Ok(out)
}

/// Reads a numeric CSV. A first row that does not parse as numbers is taken
/// as a header.
pub fn read_csv_matrix<R: std::io::Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(k + 1, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(k + 1, |p| p.line() as usize);
        let parsed: std::result::Result<Vec<f64>, _> =
            rec.iter().map(|s| s.parse::<f64>()).collect();
        match parsed {
            Ok(row) => {
                if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                    return Err(parse_err(line, format!("non-finite value {bad}")));
                }
                if let Some(first) = rows.first().map(Vec::len) {
                    if first != row.len() {
                        return Err(parse_err(
                            line,
                            format!("expected {first} columns, found {}", row.len()),
                        ));
                    }
                }
                rows.push(row);
            }
            Err(_) if k == 0 => continue,
            Err(e) => return Err(parse_err(line, e.to_string())),
        }
    }
    Ok(rows)
}

/// Grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    /// Row-major.
    pub pixels: Vec<f64>,
}

struct PgmTokens<'a> {
    data: &'a [u8],
    pos: usize,
}

impl PgmTokens<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        let end = self.pos.min(self.data.len());
        let line = 1 + self.data[..end].iter().filter(|&&b| b == b'\n').count();
        parse_err(line, message)
    }

    fn skip_space(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&str> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("unexpected end of PGM data"));
        }
        std::str::from_utf8(&self.data[start..self.pos]).map_err(|_| self.err("non-ASCII PGM header"))
    }

    fn number(&mut self) -> Result<usize> {
        let t = self.token()?.to_owned();
        t.parse()
            .map_err(|_| self.err(format!("invalid PGM number '{t}'")))
    }
}

/// Reads a P2 or P5 PGM, scaling intensities by `maxval`.
pub fn read_pgm(data: &[u8]) -> Result<Image> {
    let mut tok = PgmTokens { data, pos: 0 };
    let magic = tok.token()?.to_owned();
    let binary = match magic.as_str() {
        "P2" => false,
        "P5" => true,
        m => return Err(parse_err(1, format!("unsupported PGM magic '{m}'"))),
    };
    let width = tok.number()?;
    let height = tok.number()?;
    let maxval = tok.number()?;
    if width == 0 || height == 0 {
        return Err(tok.err("PGM dimensions must be positive"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(tok.err(format!("PGM maxval {maxval} outside 1..=65535")));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| tok.err("PGM dimensions overflow"))?;
    let mut raw = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        let start = tok.pos + 1;
        let bytes = if maxval < 256 { 1 } else { 2 };
        let end = start + count * bytes;
        if tok.pos >= data.len() || end > data.len() {
            return Err(tok.err("truncated PGM raster"));
        }
        for chunk in data[start..end].chunks_exact(bytes) {
            raw.push(if bytes == 1 {
                chunk[0] as usize
            } else {
                u16::from_be_bytes([chunk[0], chunk[1]]) as usize
            });
        }
    } else {
        for _ in 0..count {
            raw.push(tok.number()?);
        }
    }
    if let Some(v) = raw.iter().find(|&&v| v > maxval) {
        return Err(tok.err(format!("PGM sample {v} exceeds maxval {maxval}")));
    }
    Ok(Image {
        height,
        width,
        pixels: raw.iter().map(|&v| v as f64 / maxval as f64).collect(),
    })
}

/// Writes a binary PGM, clamping to `[0, 1]` and rounding to the nearest
/// level.
pub fn write_pgm<W: Write>(mut out: W, image: &Image, maxval: u16) -> std::io::Result<()> {
    let maxval = maxval.max(1);
    write!(out, "P5\n{} {}\n{}\n", image.width, image.height, maxval)?;
    let m = maxval as f64;
    let mut buf = Vec::with_capacity(image.pixels.len() * 2);
    for &p in &image.pixels {
        let v = (p.clamp(0.0, 1.0) * m).round() as u16;
        if maxval < 256 {
            buf.push(v as u8);
        } else {
            buf.extend_from_slice(&v.to_be_bytes());
        }
    }
    out.write_all(&buf)
}

/// Float map: a `height width` header line, then one row of values per line.
/// Values use the shortest representation that reads back to the same
/// `f64`, so a round trip is exact.
pub fn write_float_map<W: Write>(mut out: W, image: &Image) -> std::io::Result<()> {
    writeln!(out, "{} {}", image.height, image.width)?;
    for row in image.pixels.chunks(image.width.max(1)) {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_float_map<R: BufRead>(reader: R) -> Result<Image> {
    let mut recs = records(reader);
    let (line, header) = recs
        .next()
        .ok_or_else(|| parse_err(1, "empty float map"))??;
    if header.len() != 2 {
        return Err(parse_err(line, "expected 'height width'"));
    }
    let dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| parse_err(line, format!("invalid dimension '{s}'")))
    };
    let (height, width) = (dim(&header[0])?, dim(&header[1])?);
    let mut pixels = Vec::with_capacity(height * width);
    let mut last = line;
    for rec in recs {
        let (line, f) = rec?;
        last = line;
        for s in &f {
            pixels.push(parse_value(line, s)?);
        }
    }
    if pixels.len() != height * width {
        return Err(parse_err(
            last,
            format!("expected {} values, found {}", height * width, pixels.len()),
        ));
    }
    Ok(Image {
        height,
        width,
        pixels,
    })
}

/// C `%.12g`.
pub fn fmt_g12(x: f64) -> String {
    const P: i32 = 12;
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= P {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes `i value` lines.
pub fn write_indexed<W: Write>(mut out: W, values: &[f64], base: IndexBase) -> std::io::Result<()> {
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{} {}", i + base.offset(), fmt_g12(*v))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g12_matches_printf() {
        let cases = [
            (0.5, "0.5"),
            (1.5, "1.5"),
            (100.0, "100"),
            (1.0 / 3.0, "0.333333333333"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-2.5, "-2.5"),
            (0.0, "0"),
            (9.9999999999999e5, "1000000"),
        ];
        for (x, s) in cases {
            assert_eq!(fmt_g12(x), s, "{x}");
        }
    }

    #[test]
    fn nodes_and_edges() {
        let nodes = read_nodes("# c\n1 2.0\n0 -1 3\n\n".as_bytes(), IndexBase::Zero).unwrap();
        assert_eq!(nodes.values, vec![-1.0, 2.0]);
        assert_eq!(nodes.weights, vec![3.0, 1.0]);
        let edges = read_edges("1 2 0.5 # x\n".as_bytes(), IndexBase::One).unwrap();
        assert_eq!(edges, vec![(0, 1, 0.5)]);
        assert!(read_nodes("0 1\n0 2\n".as_bytes(), IndexBase::Zero).is_err());
        assert!(read_nodes("0 x\n".as_bytes(), IndexBase::Zero).is_err());
        assert!(read_edges("0 1\n".as_bytes(), IndexBase::Zero).is_err());
        assert!(read_edges("0 1 2\n".as_bytes(), IndexBase::One).is_err());
    }

    #[test]
    fn penalties() {
        let p = read_penalties("1 0 -1 1\n0 0.5\n".as_bytes(), IndexBase::Zero, 3).unwrap();
        let abs = p[1].as_ref().unwrap();
        assert_eq!(abs.breakpoints(), &[0.0]);
        assert_eq!(abs.slopes(), &[-1.0, 1.0]);
        assert_eq!(p[0].as_ref().unwrap().slopes(), &[0.5]);
        assert!(p[2].is_none());
        assert!(read_penalties("0 0 1 -1\n".as_bytes(), IndexBase::Zero, 1).is_err());
        assert!(read_penalties("0 0 1\n".as_bytes(), IndexBase::Zero, 1).is_err());
    }

    #[test]
    fn csv_header_detection() {
        let m = read_csv_matrix("a,b\n1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(m, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let m = read_csv_matrix("1, 2\n3, 4\n".as_bytes()).unwrap();
        assert_eq!(m.len(), 2);
        assert!(read_csv_matrix("1,2\n3\n".as_bytes()).is_err());
        assert!(read_csv_matrix("1,2\nx,4\n".as_bytes()).is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let img = read_pgm(b"P2\n# hi\n3 1\n255\n0 128 255\n").unwrap();
        assert_eq!((img.height, img.width), (1, 3));
        for maxval in [255u16, 65535] {
            let mut buf = Vec::new();
            write_pgm(&mut buf, &img, maxval).unwrap();
            let back = read_pgm(&buf).unwrap();
            for (a, b) in back.pixels.iter().zip(&img.pixels) {
                assert!((a - b).abs() <= 0.5 / maxval as f64);
            }
        }
        assert!(read_pgm(b"P2\n2 1\n255\n0\n").is_err());
        assert!(read_pgm(b"P2\n1 1\n255\n300\n").is_err());
        assert!(read_pgm(b"P3\n1 1\n255\n0\n").is_err());
        assert!(read_pgm(b"P5\n2 1\n255\n\x01").is_err());
        assert!(read_pgm(b"P2\n1 1\n70000\n0\n").is_err());
    }

    #[test]
    fn float_map_round_trip_is_exact() {
        let img = Image {
            height: 2,
            width: 2,
            pixels: vec![0.1, 1.0 / 3.0, -2.5e-17, 7.0],
        };
        let mut buf = Vec::new();
        write_float_map(&mut buf, &img).unwrap();
        assert_eq!(read_float_map(&buf[..]).unwrap(), img);
    }
}
