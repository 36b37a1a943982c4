//! Synthetic manifold samples with known pre-images, and CSV ingestion.

use std::f64::consts::PI;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{LleError, Result};
use crate::rng::SampleRng;

/// N x D matrix of finite reals; row `i` is point `x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    data: Mat<f64>,
}

impl PointCloud {
    pub fn new(data: Mat<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(LleError::InvalidArgument(format!(
                "point cloud must be non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        for j in 0..data.ncols() {
            for i in 0..data.nrows() {
                if !data[(i, j)].is_finite() {
                    return Err(LleError::InvalidArgument(format!(
                        "non-finite entry at row {i}, column {j}"
                    )));
                }
            }
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(LleError::ShapeMismatch(format!(
                "row {i} has {} entries, expected {d}",
                r.len()
            )));
        }
        Self::new(Mat::from_fn(n, d, |i, j| rows[i][j]))
    }

    /// Number of points N.
    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    /// Ambient dimension D.
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_mat(&self) -> MatRef<'_, f64> {
        self.data.as_ref()
    }

    pub fn into_mat(self) -> Mat<f64> {
        self.data
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        (0..self.dim()).map(|j| self.data[(i, j)]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Ring,
    Scurve,
    Swissroll,
}

impl Generator {
    pub fn intrinsic_dim(self) -> usize {
        match self {
            Generator::Ring => 1,
            Generator::Scurve | Generator::Swissroll => 2,
        }
    }

    pub fn generate(self, n: usize, seed: u64) -> Result<GeneratedSample> {
        match self {
            Generator::Ring => gen_open_ring(n),
            Generator::Scurve => gen_scurve(n, seed),
            Generator::Swissroll => gen_swissroll(n, seed),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Generator::Ring => "ring",
            Generator::Scurve => "scurve",
            Generator::Swissroll => "swissroll",
        })
    }
}

/// A generated sample `X = f(Z)` together with its pre-image `Z`.
#[derive(Debug, Clone)]
pub struct GeneratedSample {
    pub points: PointCloud,
    pub preimage: Mat<f64>,
    pub generator: Generator,
    pub seed: u64,
}

impl GeneratedSample {
    pub fn save(&self, points_path: &Path) -> Result<PathBuf> {
        save_csv(&self.points, points_path)?;
        let pre = preimage_path(points_path);
        save_matrix_csv(self.preimage.as_ref(), &pre)?;
        Ok(pre)
    }
}

/// Angular extent of the open ring: the circle minus a 90 degree gap. At 16 points and
/// `K = 4` the gap is wider than any neighbor chord, so neighborhoods never straddle it.
pub const RING_SPAN: f64 = 3.0 * PI / 2.0;

/// `n` points on the unit circle at equally spaced angles over `[0, 3pi/2]`.
/// The pre-image is the angle, which equals arc length on the unit circle.
pub fn gen_open_ring(n: usize) -> Result<GeneratedSample> {
    if n < 3 {
        return Err(LleError::InvalidArgument(format!(
            "open ring needs at least 3 points, got {n}"
        )));
    }
    let step = RING_SPAN / (n - 1) as f64;
    let theta: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
    let points = Mat::from_fn(n, 2, |i, j| {
        if j == 0 {
            theta[i].cos()
        } else {
            theta[i].sin()
        }
    });
    Ok(GeneratedSample {
        points: PointCloud::new(points)?,
        preimage: Mat::from_fn(n, 1, |i, _| theta[i]),
        generator: Generator::Ring,
        seed: 0,
    })
}

/// S-curve point for parameters `(u, h)` in the unit square; returns `(x, z)` with
/// pre-image `z = (t, 2h)`.
pub fn scurve_point(u: f64, h: f64) -> ([f64; 3], [f64; 2]) {
    let t = 3.0 * PI * (u - 0.5);
    let sign = if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    };
    ([t.sin(), 2.0 * h, sign * (t.cos() - 1.0)], [t, 2.0 * h])
}

/// Swissroll point for parameters `(u, h)` in the unit square; pre-image `(t, 21h)`.
pub fn swissroll_point(u: f64, h: f64) -> ([f64; 3], [f64; 2]) {
    let t = 1.5 * PI * (1.0 + 2.0 * u);
    ([t * t.cos(), 21.0 * h, t * t.sin()], [t, 21.0 * h])
}

fn sample_surface(
    n: usize,
    seed: u64,
    generator: Generator,
    map: fn(f64, f64) -> ([f64; 3], [f64; 2]),
) -> Result<GeneratedSample> {
    if n < 1 {
        return Err(LleError::InvalidArgument("sample size must be positive".into()));
    }
    let mut rng = SampleRng::new(seed);
    let mut points = Mat::zeros(n, 3);
    let mut preimage = Mat::zeros(n, 2);
    for i in 0..n {
        // u first, then h, for every point
        let u = rng.uniform();
        let h = rng.uniform();
        let (x, z) = map(u, h);
        for (j, v) in x.into_iter().enumerate() {
            points[(i, j)] = v;
        }
        for (j, v) in z.into_iter().enumerate() {
            preimage[(i, j)] = v;
        }
    }
    Ok(GeneratedSample {
        points: PointCloud::new(points)?,
        preimage,
        generator,
        seed,
    })
}

pub fn gen_scurve(n: usize, seed: u64) -> Result<GeneratedSample> {
    sample_surface(n, seed, Generator::Scurve, scurve_point)
}

pub fn gen_swissroll(n: usize, seed: u64) -> Result<GeneratedSample> {
    sample_surface(n, seed, Generator::Swissroll, swissroll_point)
}

/// `points.csv` -> `points.preimage.csv`.
pub fn preimage_path(points_path: &Path) -> PathBuf {
    let s = points_path.to_string_lossy();
    match s.strip_suffix(".csv") {
        Some(stem) => PathBuf::from(format!("{stem}.preimage.csv")),
        None => PathBuf::from(format!("{s}.preimage.csv")),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LleError + '_ {
    move |source| LleError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a headerless, comma-separated numeric matrix.
pub fn load_matrix_csv(path: &Path) -> Result<Mat<f64>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| LleError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if let Some(first) = rows.first() {
            if record.len() != first.len() {
                return Err(LleError::RaggedRow {
                    path: path.to_path_buf(),
                    line,
                    expected: first.len(),
                    found: record.len(),
                });
            }
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>().map_err(|_| LleError::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: c + 1,
                    text: cell.to_string(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(LleError::Format {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    }
    let cols = rows[0].len();
    Ok(Mat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn load_csv(path: &Path) -> Result<PointCloud> {
    let m = load_matrix_csv(path)?;
    PointCloud::new(m).map_err(|e| LleError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes a matrix as CSV using the shortest decimal form that parses back exactly.
pub fn save_matrix_csv(m: MatRef<'_, f64>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    write_matrix_csv(m, &mut out).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

pub fn write_matrix_csv<W: Write>(m: MatRef<'_, f64>, out: &mut W) -> std::io::Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.write_all(b",")?;
            }
            write!(out, "{:?}", m[(i, j)])?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_csv(cloud: &PointCloud, path: &Path) -> Result<()> {
    save_matrix_csv(cloud.as_mat(), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm2(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn ring_has_sixteen_unit_points() {
        let s = gen_open_ring(16).unwrap();
        assert_eq!(s.points.len(), 16);
        assert_eq!(s.preimage.ncols(), 1);
        for i in 0..16 {
            assert!((norm2(&s.points.point(i)) - 1.0).abs() < 1e-12);
            assert!((s.preimage[(i, 0)] - i as f64 * PI / 10.0).abs() < 1e-12);
        }
        assert!((s.preimage[(15, 0)] - 3.0 * PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn ring_three_points_angles() {
        let s = gen_open_ring(3).unwrap();
        let expected = [0.0, 3.0 * PI / 4.0, 3.0 * PI / 2.0];
        for (i, e) in expected.iter().enumerate() {
            assert!((s.preimage[(i, 0)] - e).abs() < 1e-15);
        }
    }

    #[test]
    fn ring_chords_equal() {
        let s = gen_open_ring(16).unwrap();
        let chord = |i: usize| {
            let a = s.points.point(i);
            let b = s.points.point(i + 1);
            norm2(&[a[0] - b[0], a[1] - b[1]])
        };
        let c0 = chord(0);
        for i in 1..15 {
            assert!((chord(i) - c0).abs() < 1e-12);
        }
    }

    #[test]
    fn ring_rejects_too_few_points() {
        assert!(matches!(gen_open_ring(2), Err(LleError::InvalidArgument(_))));
    }

    #[test]
    fn ring_continuity_ratio_bounded() {
        let s = gen_open_ring(16).unwrap();
        for i in 0..15 {
            let a = s.points.point(i);
            let b = s.points.point(i + 1);
            let dx = norm2(&[a[0] - b[0], a[1] - b[1]]);
            let dz = (s.preimage[(i, 0)] - s.preimage[(i + 1, 0)]).abs();
            assert!(dx / dz <= 2.0);
        }
    }

    #[test]
    fn scurve_reference_points() {
        let (x, z) = scurve_point(0.5, 0.5);
        assert_eq!(x, [0.0, 1.0, 0.0]);
        assert_eq!(z, [0.0, 1.0]);
        let (x, _) = scurve_point(1.0, 0.0);
        assert!((x[0] + 1.0).abs() < 1e-12);
        assert_eq!(x[1], 0.0);
        assert!((x[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn swissroll_radius_endpoints() {
        let r = |u: f64| {
            let (x, _) = swissroll_point(u, 0.3);
            (x[0] * x[0] + x[2] * x[2]).sqrt()
        };
        assert!((r(0.0) - 1.5 * PI).abs() < 1e-12);
        assert!((r(1.0) - 4.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn generators_are_deterministic() {
        let a = gen_scurve(2000, 11).unwrap();
        let b = gen_scurve(2000, 11).unwrap();
        assert_eq!(a.points, b.points);
        let c = gen_swissroll(2000, 1).unwrap();
        let d = gen_swissroll(2000, 2).unwrap();
        assert_ne!(c.points, d.points);
        assert_eq!(c.preimage.nrows(), 2000);
        assert_eq!(c.preimage.ncols(), 2);
    }

    #[test]
    fn preimage_sibling_name() {
        assert_eq!(
            preimage_path(Path::new("out/roll.csv")),
            PathBuf::from("out/roll.preimage.csv")
        );
        assert_eq!(
            preimage_path(Path::new("roll")),
            PathBuf::from("roll.preimage.csv")
        );
    }

    #[test]
    fn csv_parse_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, "1.0,2.0\n3.0,4.0").unwrap();
        let c = load_csv(&p).unwrap();
        assert_eq!((c.len(), c.dim()), (2, 2));
        assert_eq!(c.as_mat()[(1, 0)], 3.0);

        std::fs::write(&p, "1.0,2.0\n3.0").unwrap();
        match load_csv(&p) {
            Err(LleError::RaggedRow { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected ragged-row error, got {other:?}"),
        }

        std::fs::write(&p, "1.0,2.0\n3.0,abc\n").unwrap();
        match load_csv(&p) {
            Err(LleError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 2)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("roll.csv");
        let s = gen_swissroll(300, 5).unwrap();
        let pre = s.save(&p).unwrap();
        let back = load_csv(&p).unwrap();
        assert_eq!(back, s.points);
        let z = load_matrix_csv(&pre).unwrap();
        assert_eq!(z, s.preimage);
    }
}
