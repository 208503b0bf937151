use std::path::Path;

use ndarray::Array2;

use super::fps::farthest_point_sample;
use crate::error::{Error, Result};
use crate::measure::MmSpace;

/// Grayscale raster with intensities in `[0, 1]`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Validation(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Validation("pixel intensities must lie in [0, 1]".into()));
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let pixels = (0..height)
            .flat_map(|row| (0..width).map(move |col| (row, col)))
            .map(|(row, col)| f(row, col))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    /// Centers `(col + 0.5, row + 0.5)` of pixels brighter than `threshold`,
    /// in row-major order.
    pub fn bright_pixels(&self, threshold: f64) -> Array2<f64> {
        let coords: Vec<f64> = (0..self.height)
            .flat_map(|row| (0..self.width).map(move |col| (row, col)))
            .filter(|&(row, col)| self.get(row, col) > threshold)
            .flat_map(|(row, col)| [col as f64 + 0.5, row as f64 + 0.5])
            .collect();
        let n = coords.len() / 2;
        Array2::from_shape_vec((n, 2), coords).expect("two coordinates per pixel")
    }

    /// Binary (P5) PGM with maxval 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|p| (p * 255.0).round() as u8));
        out
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

/// Parses plain (P2) or raw (P5) PGM bytes.
pub fn parse_pgm(bytes: &[u8], origin: &Path) -> Result<GrayImage> {
    let err = |detail: &str| Error::parse(origin, detail);
    let mut pos = 0;
    // Header tokens, skipping whitespace and `#` comments.
    let next_token = |pos: &mut usize| -> Option<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = next_token(&mut pos).ok_or_else(|| err("empty file"))?;
    if magic != "P2" && magic != "P5" {
        return Err(err(&format!("unsupported magic `{magic}`, expected P2 or P5")));
    }
    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        let token = next_token(&mut pos).ok_or_else(|| err(&format!("missing {name}")))?;
        *slot = token
            .parse()
            .map_err(|_| err(&format!("invalid {name} `{token}`")))?;
    }
    let [width, height, maxval] = header;
    if maxval == 0 || maxval > 65535 {
        return Err(err(&format!("invalid maxval {maxval}")));
    }
    let count = width * height;
    let raw: Vec<usize> = if magic == "P2" {
        (0..count)
            .map(|_| {
                let token = next_token(&mut pos).ok_or_else(|| err("truncated pixel data"))?;
                token
                    .parse()
                    .map_err(|_| err(&format!("invalid pixel value `{token}`")))
            })
            .collect::<Result<_>>()?
    } else {
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let data = bytes.get(pos..pos + need).ok_or_else(|| err("truncated pixel data"))?;
        if wide {
            data.chunks(2).map(|c| (c[0] as usize) << 8 | c[1] as usize).collect()
        } else {
            data.iter().map(|&b| b as usize).collect()
        }
    };
    if let Some(v) = raw.iter().find(|&&v| v > maxval) {
        return Err(err(&format!("pixel value {v} exceeds maxval {maxval}")));
    }
    let pixels = raw.iter().map(|&v| v as f64 / maxval as f64).collect();
    GrayImage::new(width, height, pixels)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes, path)
}

/// Reduces `points` to `sample` rows by Euclidean farthest-point sampling
/// (kept in their original order) and returns a uniform Euclidean space.
pub fn points_to_space(
    id: impl Into<String>,
    points: Array2<f64>,
    sample: usize,
    seed: u64,
) -> Result<MmSpace> {
    let n = points.nrows();
    if n < sample || n == 0 {
        return Err(Error::TooFewPixels {
            found: n,
            required: sample.max(1),
        });
    }
    let points = if n > sample {
        let mut keep = farthest_point_sample(|a, b| row_distance(&points, a, b), n, sample, seed);
        keep.sort_unstable();
        points.select(ndarray::Axis(0), &keep)
    } else {
        points
    };
    MmSpace::uniform_from_points(id, points)
}

/// Uniform space on the bright pixels of `image`.
pub fn raster_to_space(
    id: impl Into<String>,
    image: &GrayImage,
    threshold: f64,
    sample: usize,
    seed: u64,
) -> Result<MmSpace> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Config(format!("threshold {threshold} outside [0, 1]")));
    }
    points_to_space(id, image.bright_pixels(threshold), sample, seed)
}

/// Reads a PGM image and builds a uniform space on its bright pixels; the id
/// is the file stem.
pub fn image_to_space(
    path: impl AsRef<Path>,
    threshold: f64,
    sample: usize,
    seed: u64,
) -> Result<MmSpace> {
    let path = path.as_ref();
    let image = read_pgm(path)?;
    raster_to_space(file_stem(path), &image, threshold, sample, seed)
}

pub(crate) fn row_distance(points: &Array2<f64>, a: usize, b: usize) -> f64 {
    points
        .row(a)
        .iter()
        .zip(points.row(b))
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "space".into())
}

/// Point list with one `x,y[,z]` row per point; a non-numeric first row is
/// taken as a header.
pub fn read_points_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if rows.is_empty() && line_no == 0 => continue,
            Err(e) => return Err(Error::parse(path, format!("line {}: {e}", line_no + 1))),
        }
    }
    let dim = rows.first().map(Vec::len).unwrap_or(0);
    if !(2..=3).contains(&dim) || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::parse(path, "expected rows of 2 or 3 coordinates"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::parse(path, "non-finite coordinate"));
    }
    let n = rows.len();
    Ok(Array2::from_shape_vec((n, dim), rows.concat()).expect("rectangular rows"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MetricKind;

    #[test]
    fn white_square_gives_pixel_centers() {
        let img = GrayImage::new(2, 2, vec![1.0; 4]).unwrap();
        let s = raster_to_space("w", &img, 0.5, 4, 0).unwrap();
        assert_eq!(s.weights(), &[0.25; 4]);
        let pts = s.points().unwrap();
        assert_eq!(pts.row(0).to_vec(), vec![0.5, 0.5]);
        assert_eq!(pts.row(1).to_vec(), vec![1.5, 0.5]);
        assert_eq!(pts.row(3).to_vec(), vec![1.5, 1.5]);
    }

    #[test]
    fn disk_subsampled() {
        let img = GrayImage::from_fn(20, 20, |r, c| {
            let (x, y) = (c as f64 + 0.5 - 10.0, r as f64 + 0.5 - 10.0);
            if x * x + y * y <= 81.0 { 1.0 } else { 0.0 }
        })
        .unwrap();
        let s = raster_to_space("disk", &img, 0.5, 50, 3).unwrap();
        assert_eq!(s.len(), 50);
        assert!(s.weights().iter().all(|&w| w == 1.0 / 50.0));
        assert_eq!(s.kind(), MetricKind::Euclidean);
        assert_eq!(s, raster_to_space("disk", &img, 0.5, 50, 3).unwrap());
    }

    #[test]
    fn too_few_pixels() {
        let img = GrayImage::new(2, 1, vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            raster_to_space("x", &img, 0.5, 2, 0),
            Err(Error::TooFewPixels { found: 1, required: 2 })
        ));
    }

    #[test]
    fn pgm_round_trip_and_plain_format() {
        let img = GrayImage::from_fn(3, 2, |r, c| ((r * 3 + c) * 51) as f64 / 255.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        img.write_pgm(&p).unwrap();
        assert_eq!(read_pgm(&p).unwrap(), img);

        let plain = b"P2\n# comment\n3 2\n255\n0 51 102\n153 204 255\n";
        assert_eq!(parse_pgm(plain, Path::new("p.pgm")).unwrap(), img);
    }

    #[test]
    fn malformed_pgm() {
        for bad in [&b"P6\n1 1\n255\n\0"[..], b"P2\n2 2\n255\n1 2 3", b"P2\n1 1\n10\n11", b"P5\n2 2\n255\n\0"] {
            assert!(matches!(parse_pgm(bad, Path::new("x")), Err(Error::Parse { .. })));
        }
    }

    #[test]
    fn image_file_uses_stem_as_id() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("shape7.pgm");
        GrayImage::new(2, 2, vec![1.0, 1.0, 0.0, 1.0]).unwrap().write_pgm(&p).unwrap();
        let s = image_to_space(&p, 0.5, 3, 0).unwrap();
        assert_eq!(s.id(), "shape7");
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn points_csv_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        std::fs::write(&a, "x,y\n0,0\n3,4\n").unwrap();
        let pts = read_points_csv(&a).unwrap();
        assert_eq!(pts.dim(), (2, 2));
        let s = points_to_space("a", pts, 2, 0).unwrap();
        assert_eq!(s.metric()[[0, 1]], 5.0);

        let b = dir.path().join("b.csv");
        std::fs::write(&b, "0,0,1\n1,1,1\n").unwrap();
        assert_eq!(read_points_csv(&b).unwrap().dim(), (2, 3));

        let c = dir.path().join("c.csv");
        std::fs::write(&c, "0,0\n1,x\n").unwrap();
        assert!(matches!(read_points_csv(&c), Err(Error::Parse { .. })));
    }
}
