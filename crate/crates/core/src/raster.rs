//! Image time series container and its on-disk formats.
//!
//! RTS1 layout (little-endian): magic `RTS1`, `u32` image count, `u32` rows,
//! `u32` cols, then `count * rows * cols` `f32` values, image-major and
//! row-major within each image.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;

pub const RTS1_MAGIC: &[u8; 4] = b"RTS1";
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesFormat {
    #[serde(rename = "rts1")]
    Rts1,
    #[serde(rename = "ascii-matrix-dir")]
    AsciiMatrixDir,
}

impl FromStr for SeriesFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rts1" => Ok(SeriesFormat::Rts1),
            "ascii-matrix-dir" => Ok(SeriesFormat::AsciiMatrixDir),
            other => Err(Error::InvalidParameter(format!("unknown series format `{other}`"))),
        }
    }
}

/// Ordered stack of equally sized images, treated as equally spaced in time.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterSeries<T> {
    images: Vec<Grid<T>>,
    timestamps: Option<Vec<f64>>,
    pixel_spacing: (f64, f64),
}

impl<T: Scalar> RasterSeries<T> {
    pub fn new(images: Vec<Grid<T>>) -> Result<Self> {
        let first = images.first().ok_or(Error::TooFewImages(0))?;
        let (rows, cols) = first.shape();
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("images must be non-empty".into()));
        }
        for (index, img) in images.iter().enumerate() {
            if img.shape() != (rows, cols) {
                return Err(Error::InconsistentGrid {
                    index,
                    rows: img.rows(),
                    cols: img.cols(),
                    exp_rows: rows,
                    exp_cols: cols,
                });
            }
        }
        Ok(RasterSeries {
            images,
            timestamps: None,
            pixel_spacing: (1.0, 1.0),
        })
    }

    pub fn with_timestamps(mut self, timestamps: Vec<f64>) -> Result<Self> {
        if timestamps.len() != self.images.len() {
            return Err(Error::Dimension(format!(
                "{} timestamps for {} images",
                timestamps.len(),
                self.images.len()
            )));
        }
        if timestamps.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::InvalidParameter(
                "timestamps must be strictly increasing".into(),
            ));
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn with_pixel_spacing(mut self, dx: f64, dy: f64) -> Result<Self> {
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pixel spacing must be positive, got ({dx}, {dy})"
            )));
        }
        self.pixel_spacing = (dx, dy);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.images[0].rows()
    }

    pub fn cols(&self) -> usize {
        self.images[0].cols()
    }

    pub fn images(&self) -> &[Grid<T>] {
        &self.images
    }

    pub fn image(&self, m: usize) -> &Grid<T> {
        &self.images[m]
    }

    pub fn timestamps(&self) -> Option<&[f64]> {
        self.timestamps.as_deref()
    }

    pub fn pixel_spacing(&self) -> (f64, f64) {
        self.pixel_spacing
    }

    /// Applies `f` to every image, keeping metadata.
    pub fn map_images<E>(&self, f: impl Fn(&Grid<T>) -> std::result::Result<Grid<T>, E>) -> std::result::Result<Self, E> {
        let images = self.images.iter().map(f).collect::<std::result::Result<Vec<_>, E>>()?;
        Ok(RasterSeries {
            images,
            timestamps: self.timestamps.clone(),
            pixel_spacing: self.pixel_spacing,
        })
    }

    pub fn require_pairs(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(Error::TooFewImages(self.len()));
        }
        Ok(())
    }

    /// Reorders images by `order[m]` (used for permutation checks).
    pub fn permuted(&self, order: &[usize]) -> Self {
        RasterSeries {
            images: order.iter().map(|&m| self.images[m].clone()).collect(),
            timestamps: None,
            pixel_spacing: self.pixel_spacing,
        }
    }
}

/// Replaces each pixel `v` by `ln(v + offset)`.
pub fn log_transform<T: Scalar>(series: &RasterSeries<T>, offset: f64) -> Result<RasterSeries<T>> {
    if !(offset >= 0.0 && offset.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "log offset must be non-negative, got {offset}"
        )));
    }
    let off = T::lit(offset);
    for (m, img) in series.images().iter().enumerate() {
        for i in 0..img.rows() {
            for j in 0..img.cols() {
                let v = img[(i, j)];
                if !(v + off > T::zero()) {
                    return Err(Error::NonPositive {
                        m,
                        i,
                        j,
                        value: v.as_f64(),
                    });
                }
            }
        }
    }
    series.map_images(|img| Ok::<_, Error>(img.map(|v| (v + off).ln())))
}

pub fn load_series<T: Scalar>(path: &Path, format: SeriesFormat) -> Result<RasterSeries<T>> {
    let series = match format {
        SeriesFormat::Rts1 => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            decode_rts1(&bytes)?
        }
        SeriesFormat::AsciiMatrixDir => load_ascii_dir(path)?,
    };
    series.require_pairs()?;
    Ok(series)
}

pub fn save_series<T: Scalar>(series: &RasterSeries<T>, path: &Path) -> Result<()> {
    fs::write(path, encode_rts1(series)).map_err(|e| Error::io(path, e))
}

/// Values are stored as `f32`; series whose values are not exactly
/// representable in `f32` lose precision.
pub fn encode_rts1<T: Scalar>(series: &RasterSeries<T>) -> Vec<u8> {
    let (m, r, c) = (series.len(), series.rows(), series.cols());
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m * r * c);
    out.extend_from_slice(RTS1_MAGIC);
    for v in [m, r, c] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for img in series.images() {
        for &v in img.as_slice() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_rts1<T: Scalar>(bytes: &[u8]) -> Result<RasterSeries<T>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::MalformedHeader(format!(
            "header needs {HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    if &bytes[..4] != RTS1_MAGIC {
        return Err(Error::MalformedHeader("missing RTS1 magic".into()));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize;
    let (m, rows, cols) = (word(0), word(1), word(2));
    if m == 0 || rows == 0 || cols == 0 {
        return Err(Error::MalformedHeader(format!(
            "zero dimension in header: M={m}, rows={rows}, cols={cols}"
        )));
    }
    let expected = m
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::MalformedHeader("header dimensions overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::MalformedHeader(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        )));
    }
    let mut values = payload
        .chunks_exact(4)
        .map(|b| T::lit(f32::from_le_bytes(b.try_into().unwrap()) as f64));
    let images = (0..m)
        .map(|_| Grid::from_vec(rows, cols, values.by_ref().take(rows * cols).collect()))
        .collect::<Result<Vec<_>>>()?;
    RasterSeries::new(images)
}

fn parse_matrix<T: Scalar>(text: &str, path: &Path) -> Result<Grid<T>> {
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map(T::lit).map_err(|e| Error::Parse {
                    context: format!("{}:{}", path.display(), ln + 1),
                    message: format!("`{tok}`: {e}"),
                })
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            context: path.display().to_string(),
            message: "empty matrix".into(),
        });
    }
    Grid::from_rows(&rows).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })
}

fn load_ascii_dir<T: Scalar>(dir: &Path) -> Result<RasterSeries<T>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && !p
                    .file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with('.'))
        })
        .collect();
    files.sort();
    let images = files
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            parse_matrix(&text, p)
        })
        .collect::<Result<Vec<_>>>()?;
    if images.len() < 2 {
        return Err(Error::TooFewImages(images.len()));
    }
    RasterSeries::new(images)
}

/// Writes one whitespace-delimited matrix per image as `image_0000.txt`, ...
pub fn save_ascii_dir<T: Scalar>(series: &RasterSeries<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (m, img) in series.images().iter().enumerate() {
        let mut text = String::new();
        for i in 0..img.rows() {
            let line: Vec<String> = img.row(i).iter().map(|v| v.to_string()).collect();
            text.push_str(&line.join(" "));
            text.push('\n');
        }
        let path = dir.join(format!("image_{m:04}.txt"));
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
