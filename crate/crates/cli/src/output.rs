//! CSV tables with a schema line, binary checkpoints and a tiny SVG plotter.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use trpinn_core::model::Mlp;

use crate::error::CliError;

/// Version tag written as the first row of every CSV.
pub const SCHEMA_VERSION: u32 = 1;

pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    /// Creates `path` and writes `# schema: trpinn.<name>/<version>` then
    /// the header.
    pub fn create(path: &Path, name: &str, columns: &[&str]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = Self { path: path.to_path_buf(), out: BufWriter::new(file) };
        w.line(&format!("# schema: trpinn.{name}/{SCHEMA_VERSION}"))?;
        w.line(&columns.join(","))?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<(), CliError> {
        writeln!(self.out, "{s}").map_err(|e| CliError::io(&self.path, e))
    }

    pub fn row(&mut self, fields: &[Field<'_>]) -> Result<(), CliError> {
        let mut s = String::new();
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            match f {
                Field::Str(v) => s.push_str(v),
                Field::Int(v) => write!(s, "{v}").unwrap(),
                Field::Float(v) => write!(s, "{}", fmt_f64(*v)).unwrap(),
            }
        }
        self.line(&s)
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

pub enum Field<'a> {
    Str(&'a str),
    Int(u128),
    Float(f64),
}

/// Shortest round-trip scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

const MAGIC: &[u8; 8] = b"TRPINNCK";
const CHECKPOINT_VERSION: u32 = 1;

/// Little-endian layout: magic, version (u32), layer count (u32), layer
/// sizes (u32 each), parameter count (u64), parameters (f64 each).
pub fn write_checkpoint(path: &Path, net: &Mlp) -> Result<(), CliError> {
    let mut buf = Vec::with_capacity(32 + 8 * net.num_params());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let sizes = net.layer_sizes();
    buf.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for &s in sizes {
        buf.extend_from_slice(&(s as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(net.num_params() as u64).to_le_bytes());
    for p in net.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Mlp, CliError> {
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| CliError::io(path, e))?;
    let bad = |msg: &str| CliError::Parse(format!("{}: {msg}", path.display()));
    let mut at = 0usize;
    let mut take = |n: usize| -> Result<&[u8], CliError> {
        let s = bytes.get(at..at + n).ok_or_else(|| bad("truncated checkpoint"))?;
        at += n;
        Ok(s)
    };
    if take(8)? != MAGIC {
        return Err(bad("not a checkpoint"));
    }
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
    if u32_at(take(4)?) != CHECKPOINT_VERSION {
        return Err(bad("unsupported checkpoint version"));
    }
    let layers = u32_at(take(4)?) as usize;
    let mut sizes = Vec::with_capacity(layers);
    for _ in 0..layers {
        sizes.push(u32_at(take(4)?) as usize);
    }
    let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let mut params = Vec::with_capacity(n);
    for _ in 0..n {
        params.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
    }
    if take(1).is_ok() {
        return Err(bad("trailing bytes"));
    }
    Ok(Mlp::from_flat(&sizes, params)?)
}

/// A polyline plot with linear axes.
pub struct SvgPlot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub series: Vec<(&'a str, Vec<(f64, f64)>)>,
}

const COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

impl SvgPlot<'_> {
    pub fn render(&self) -> String {
        let (w, h, m) = (640.0, 400.0, 56.0);
        let pts = self.series.iter().flat_map(|(_, s)| s.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !(x1 > x0) {
            (x0, x1) = (x0 - 1.0, x0 + 1.0);
        }
        if !(y1 > y0) {
            (y0, y1) = (y0 - 1.0, y0 + 1.0);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
        let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#).unwrap();
        writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
        writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(self.title)).unwrap();
        writeln!(s, r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#, w - 2.0 * m, h - 2.0 * m).unwrap();
        for (v, anchor_x) in [(x0, m), (x1, w - m)] {
            writeln!(s, r#"<text x="{anchor_x}" y="{}" text-anchor="middle">{}</text>"#, h - m + 16.0, tick(v)).unwrap();
        }
        for (v, anchor_y) in [(y0, h - m), (y1, m)] {
            writeln!(s, r#"<text x="{}" y="{anchor_y}" text-anchor="end">{}</text>"#, m - 4.0, tick(v)).unwrap();
        }
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 12.0, escape(self.x_label)).unwrap();
        writeln!(
            s,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            h / 2.0,
            h / 2.0,
            escape(self.y_label)
        )
        .unwrap();
        for (k, (name, data)) in self.series.iter().enumerate() {
            let colour = COLOURS[k % COLOURS.len()];
            let path: Vec<String> =
                data.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, path.join(" ")).unwrap();
            let ly = m + 16.0 + 16.0 * k as f64;
            writeln!(s, r#"<text x="{}" y="{ly}" fill="{colour}">{}</text>"#, w - m - 120.0, escape(name)).unwrap();
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.render()).map_err(|e| CliError::io(path, e))
    }
}

fn tick(v: f64) -> String {
    format!("{v:.3}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let net = Mlp::init(&[2, 5, 3, 1], 9).unwrap();
        write_checkpoint(&path, &net).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back.layer_sizes(), net.layer_sizes());
        assert!(back.params().iter().zip(net.params()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 8 + 4 + 4 + 4 * 4 + 8 + 8 * net.num_params());
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_checkpoint(&path).is_err());
    }

    #[test]
    fn csv_starts_with_schema_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut w = CsvWriter::create(&path, "test", &["a", "b", "c"]).unwrap();
        w.row(&[Field::Str("x"), Field::Int(3), Field::Float(0.1)]).unwrap();
        w.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "# schema: trpinn.test/1\na,b,c\nx,3,1e-1\n");
    }

    #[test]
    fn floats_round_trip_through_text() {
        for v in [0.1, 1.0 / 3.0, 6.02e23, 5e-324, -0.0, 123456.789] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let plot = SvgPlot {
            title: "a < b",
            x_label: "θ",
            y_label: "u",
            series: vec![("u", vec![(0.0, 1.0), (1.0, 2.0)]), ("g", vec![(0.0, f64::NAN)])],
        };
        let s = plot.render();
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a &lt; b"));
        assert_eq!(s.matches("<polyline").count(), 2);
    }
}
