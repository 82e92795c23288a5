//! Synthetic data, matrix files and masked-grid ingestion.
//!
//! # Random stream
//!
//! All generated data comes from one reproducible stream:
//!
//! * `ChaCha20Rng::seed_from_u64(seed)` from `rand_chacha` 0.3;
//! * a uniform `u = ((next_u64() >> 11) + 1) · 2⁻⁵³` in `(0, 1]`;
//! * standard normals from Box–Muller on consecutive uniforms `(u1, u2)`:
//!   `√(-2 ln u1) cos(2π u2)` then `√(-2 ln u1) sin(2π u2)`.
//!
//! Matrices are filled column-major from the stream.
//!
//! # Binary matrix format
//!
//! ```text
//! bytes 0..8    b"SPNSMAT1"
//! bytes 8..16   n, u64 little-endian
//! bytes 16..24  m, u64 little-endian
//! bytes 24..    n·m f64 little-endian, column-major
//! ```
//!
//! # CSV conventions
//!
//! Matrix CSV: one row per spatial point, comma separated, no header, values
//! printed with 17 significant digits. Grid CSV: `height` rows of `width`
//! values; inactive cells may hold `NaN`. Mask CSV: `height` rows of `width`
//! `0`/`1` flags, `1` marking an active cell. A values file holds the snapshots
//! stacked vertically (`m · height` rows); alternatively a directory holds one
//! grid CSV per snapshot, read in file-name order.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Result, SensingError};
use crate::pod::SnapshotMatrix;

pub const MATRIX_MAGIC: &[u8; 8] = b"SPNSMAT1";

/// Seeded standard-normal stream (see the module docs for the exact algorithm).
pub struct GaussianStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        GaussianStream {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let (u1, u2) = (self.uniform(), self.uniform());
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// `rows x cols` matrix filled column-major.
    pub fn matrix(&mut self, rows: usize, cols: usize) -> DMatrix<f64> {
        let data: Vec<f64> = (0..rows * cols).map(|_| self.next_normal()).collect();
        DMatrix::from_vec(rows, cols, data)
    }
}

/// Orthonormal columns from QR, signs fixed so that `diag(R) >= 0`.
pub fn orthonormal_columns(a: DMatrix<f64>) -> DMatrix<f64> {
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// `[1, 1/√2, …, 1/√m]`.
pub fn inverse_sqrt_spectrum(m: usize) -> Vec<f64> {
    (1..=m).map(|k| 1.0 / (k as f64).sqrt()).collect()
}

fn validate_spectrum(spectrum: &[f64], m: usize) -> Result<()> {
    if spectrum.len() != m {
        return Err(SensingError::InvalidConfig(format!(
            "spectrum has {} values, expected m = {m}",
            spectrum.len()
        )));
    }
    if spectrum.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(SensingError::InvalidConfig(
            "spectrum must be finite and nonnegative".into(),
        ));
    }
    if spectrum.windows(2).any(|w| w[1] > w[0]) {
        return Err(SensingError::InvalidConfig("spectrum must be nonincreasing".into()));
    }
    Ok(())
}

/// Random matrix with a prescribed singular spectrum.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RandomSpecConfig {
    pub n: usize,
    pub m: usize,
    pub spectrum: Vec<f64>,
    pub seed: u64,
}

impl RandomSpecConfig {
    /// The `1/√k` family.
    pub fn inverse_sqrt(n: usize, m: usize, seed: u64) -> Self {
        RandomSpecConfig {
            n,
            m,
            spectrum: inverse_sqrt_spectrum(m),
            seed,
        }
    }
}

/// `X = U diag(spectrum) Vᵀ` with `U` (`n x m`) and `V` (`m x m`) the
/// orthonormal QR factors of Gaussian matrices drawn, in that order, from the
/// seeded stream.
pub fn gen_random_dataset(cfg: &RandomSpecConfig) -> Result<SnapshotMatrix> {
    if cfg.m == 0 || cfg.n < cfg.m {
        return Err(SensingError::InvalidConfig(format!(
            "random dataset needs n >= m >= 1, got n = {}, m = {}",
            cfg.n, cfg.m
        )));
    }
    validate_spectrum(&cfg.spectrum, cfg.m)?;
    let mut stream = GaussianStream::new(cfg.seed);
    let u = orthonormal_columns(stream.matrix(cfg.n, cfg.m));
    let v = orthonormal_columns(stream.matrix(cfg.m, cfg.m));
    SnapshotMatrix::new(compose(u, &cfg.spectrum, &v))
}

fn compose(mut u: DMatrix<f64>, spectrum: &[f64], v: &DMatrix<f64>) -> DMatrix<f64> {
    for (mut col, &s) in u.column_iter_mut().zip(spectrum) {
        col *= s;
    }
    u * v.transpose()
}

// ---------------------------------------------------------------------------
// Matrix files

pub fn write_matrix_bin(path: impl AsRef<Path>, x: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| SensingError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = |bytes: &[u8]| out.write_all(bytes).map_err(|e| SensingError::io(path, e));
    write(MATRIX_MAGIC)?;
    write(&(x.nrows() as u64).to_le_bytes())?;
    write(&(x.ncols() as u64).to_le_bytes())?;
    for v in x.iter() {
        write(&v.to_le_bytes())?;
    }
    out.flush().map_err(|e| SensingError::io(path, e))
}

pub fn read_matrix_bin(path: impl AsRef<Path>) -> Result<SnapshotMatrix> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| SensingError::io(path, e))?;
    let truncated = |detail: String| SensingError::TruncatedFile {
        path: path.to_path_buf(),
        detail,
    };
    if bytes.len() < 8 {
        return Err(truncated(format!("{} bytes, header needs 24", bytes.len())));
    }
    if &bytes[..8] != MATRIX_MAGIC {
        return Err(SensingError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    if bytes.len() < 24 {
        return Err(truncated(format!("{} bytes, header needs 24", bytes.len())));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let (n, m) = (word(8), word(16));
    let expected = n
        .checked_mul(m)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(24))
        .ok_or_else(|| SensingError::InvalidInput(format!("implausible shape {n}x{m}")))?;
    if (bytes.len() as u64) < expected {
        return Err(truncated(format!(
            "{n}x{m} matrix needs {expected} bytes, found {}",
            bytes.len()
        )));
    }
    if bytes.len() as u64 > expected {
        return Err(SensingError::DimensionMismatch(format!(
            "{}: {} trailing bytes after {n}x{m} matrix",
            path.display(),
            bytes.len() as u64 - expected
        )));
    }
    let (n, m) = (n as usize, m as usize);
    let data: Vec<f64> = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(SensingError::NonFiniteCell {
            path: path.to_path_buf(),
            line: pos % n.max(1) + 1,
            column: pos / n.max(1) + 1,
        });
    }
    SnapshotMatrix::new(DMatrix::from_vec(n, m, data))
}

pub fn write_matrix_csv(path: impl AsRef<Path>, x: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| SensingError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for row in x.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
        writeln!(out, "{}", line.join(",")).map_err(|e| SensingError::io(path, e))?;
    }
    out.flush().map_err(|e| SensingError::io(path, e))
}

/// 17 significant digits, `NaN` for missing cells.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Parsed numeric CSV: rows of cells, each row the same length.
fn read_cells(path: &Path, has_header: bool, allow_non_finite: bool) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = r + 1 + usize::from(has_header);
        let mut row = Vec::with_capacity(record.len());
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| SensingError::NonNumericCell {
                path: path.to_path_buf(),
                line,
                column: c + 1,
                value: cell.to_string(),
            })?;
            if !allow_non_finite && !value.is_finite() {
                return Err(SensingError::NonFiniteCell {
                    path: path.to_path_buf(),
                    line,
                    column: c + 1,
                });
            }
            row.push(value);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> SensingError {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => SensingError::io(path, io),
            _ => unreachable!(),
        },
        csv::ErrorKind::UnequalLengths { .. } => SensingError::DimensionMismatch(format!("{}: {e}", path.display())),
        _ => SensingError::InvalidInput(format!("{}: {e}", path.display())),
    }
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<SnapshotMatrix> {
    read_matrix_csv_with(path, false)
}

pub fn read_matrix_csv_with(path: impl AsRef<Path>, has_header: bool) -> Result<SnapshotMatrix> {
    let path = path.as_ref();
    let rows = read_cells(path, has_header, false)?;
    if rows.is_empty() {
        return Err(SensingError::InvalidInput(format!("{}: no data rows", path.display())));
    }
    let m = rows[0].len();
    let n = rows.len();
    SnapshotMatrix::new(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// Reads `.bin` files in the binary format and anything else as CSV.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<SnapshotMatrix> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "bin") {
        read_matrix_bin(path)
    } else {
        read_matrix_csv(path)
    }
}

pub fn write_matrix(path: impl AsRef<Path>, x: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "bin") {
        write_matrix_bin(path, x)
    } else {
        write_matrix_csv(path, x)
    }
}

// ---------------------------------------------------------------------------
// Masked grids

/// Active cells of a `height x width` grid, numbered row-major.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MaskedGrid {
    pub width: usize,
    pub height: usize,
    /// Row-major, `true` for an active cell.
    pub mask: Vec<bool>,
    /// Point index of every cell, `None` for inactive cells.
    pub point_index: Vec<Option<usize>>,
    /// Cell of every point.
    pub cells: Vec<usize>,
}

impl MaskedGrid {
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != width * height {
            return Err(SensingError::DimensionMismatch(format!(
                "mask has {} cells, grid is {height}x{width}",
                mask.len()
            )));
        }
        let mut point_index = vec![None; mask.len()];
        let mut cells = Vec::new();
        for (cell, &active) in mask.iter().enumerate() {
            if active {
                point_index[cell] = Some(cells.len());
                cells.push(cell);
            }
        }
        if cells.is_empty() {
            return Err(SensingError::InvalidInput("mask has no active cells".into()));
        }
        Ok(MaskedGrid {
            width,
            height,
            mask,
            point_index,
            cells,
        })
    }

    /// Number of active cells.
    pub fn n(&self) -> usize {
        self.cells.len()
    }

    /// `(row, column)` of point `i`.
    pub fn position(&self, i: usize) -> (usize, usize) {
        let cell = self.cells[i];
        (cell / self.width, cell % self.width)
    }

    /// Active cells of a row-major grid as a state vector.
    pub fn flatten(&self, grid_values: &[f64]) -> Result<DVector<f64>> {
        if grid_values.len() != self.mask.len() {
            return Err(SensingError::DimensionMismatch(format!(
                "grid has {} cells, mask {}",
                grid_values.len(),
                self.mask.len()
            )));
        }
        Ok(DVector::from_iterator(
            self.n(),
            self.cells.iter().map(|&c| grid_values[c]),
        ))
    }
}

/// Every cell active except the rectangle `[x0, x0+w) x [y0, y0+h)`.
pub fn rect_hole_mask(width: usize, height: usize, x0: usize, y0: usize, w: usize, h: usize) -> Vec<bool> {
    (0..width * height)
        .map(|cell| {
            let (row, col) = (cell / width, cell % width);
            !(col >= x0 && col < x0 + w && row >= y0 && row < y0 + h)
        })
        .collect()
}

/// Inverse of [`MaskedGrid::flatten`]; inactive cells become `NaN`.
pub fn scatter_to_grid(grid: &MaskedGrid, x: &DVector<f64>) -> Result<Vec<f64>> {
    if x.len() != grid.n() {
        return Err(SensingError::DimensionMismatch(format!(
            "vector of length {} for a grid with {} active cells",
            x.len(),
            grid.n()
        )));
    }
    let mut out = vec![f64::NAN; grid.mask.len()];
    for (i, &cell) in grid.cells.iter().enumerate() {
        out[cell] = x[i];
    }
    Ok(out)
}

/// Writes one grid (`height` rows of `width` values) as CSV.
pub fn write_grid_csv(path: impl AsRef<Path>, grid: &MaskedGrid, values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| SensingError::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_grid_rows(&mut out, grid.width, values).map_err(|e| SensingError::io(path, e))?;
    out.flush().map_err(|e| SensingError::io(path, e))
}

fn write_grid_rows(out: &mut impl Write, width: usize, values: &[f64]) -> std::io::Result<()> {
    for row in values.chunks(width) {
        let line: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_mask_csv(path: impl AsRef<Path>, grid: &MaskedGrid) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| SensingError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for row in grid.mask.chunks(grid.width) {
        let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        writeln!(out, "{}", line.join(",")).map_err(|e| SensingError::io(path, e))?;
    }
    out.flush().map_err(|e| SensingError::io(path, e))
}

/// Writes the snapshots of `x` stacked into one values file plus the mask file.
pub fn write_masked_grid(
    values_path: impl AsRef<Path>,
    mask_path: impl AsRef<Path>,
    grid: &MaskedGrid,
    x: &SnapshotMatrix,
) -> Result<()> {
    if x.n() != grid.n() {
        return Err(SensingError::DimensionMismatch(format!(
            "{} points for a grid with {} active cells",
            x.n(),
            grid.n()
        )));
    }
    let path = values_path.as_ref();
    let file = File::create(path).map_err(|e| SensingError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for col in x.values().column_iter() {
        let values = scatter_to_grid(grid, &col.into_owned())?;
        write_grid_rows(&mut out, grid.width, &values).map_err(|e| SensingError::io(path, e))?;
    }
    out.flush().map_err(|e| SensingError::io(path, e))?;
    write_mask_csv(mask_path, grid)
}

fn read_mask(path: &Path) -> Result<MaskedGrid> {
    let rows = read_cells(path, false, false)?;
    if rows.is_empty() {
        return Err(SensingError::InvalidInput(format!("{}: empty mask", path.display())));
    }
    let width = rows[0].len();
    let mut mask = Vec::with_capacity(rows.len() * width);
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v != 0.0 && v != 1.0 {
                return Err(SensingError::NonNumericCell {
                    path: path.to_path_buf(),
                    line: r + 1,
                    column: c + 1,
                    value: v.to_string(),
                });
            }
            mask.push(v == 1.0);
        }
    }
    MaskedGrid::new(width, rows.len(), mask)
}

fn snapshot_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| SensingError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    Ok(files)
}

/// Loads gridded snapshots and their mask; see the module docs for the layout.
pub fn load_masked_grid(
    values_path: impl AsRef<Path>,
    mask_path: impl AsRef<Path>,
) -> Result<(SnapshotMatrix, MaskedGrid)> {
    let values_path = values_path.as_ref();
    let grid = read_mask(mask_path.as_ref())?;
    let mut grids: Vec<(PathBuf, Vec<Vec<f64>>)> = Vec::new();
    if values_path.is_dir() {
        for file in snapshot_files(values_path)? {
            let rows = read_cells(&file, false, true)?;
            grids.push((file, rows));
        }
    } else {
        let rows = read_cells(values_path, false, true)?;
        if rows.len() % grid.height != 0 {
            return Err(SensingError::DimensionMismatch(format!(
                "{}: {} rows is not a multiple of the mask height {}",
                values_path.display(),
                rows.len(),
                grid.height
            )));
        }
        let mut rows = rows.into_iter();
        while rows.len() > 0 {
            grids.push((values_path.to_path_buf(), rows.by_ref().take(grid.height).collect()));
        }
    }
    if grids.is_empty() {
        return Err(SensingError::InvalidInput(format!(
            "{}: no snapshots",
            values_path.display()
        )));
    }

    let mut x = DMatrix::zeros(grid.n(), grids.len());
    for (j, (file, rows)) in grids.iter().enumerate() {
        if rows.len() != grid.height || rows.iter().any(|r| r.len() != grid.width) {
            return Err(SensingError::DimensionMismatch(format!(
                "{}: snapshot {j} is not {}x{}",
                file.display(),
                grid.height,
                grid.width
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let state = grid.flatten(&flat)?;
        let found = state.iter().filter(|v| v.is_finite()).count();
        if found != grid.n() {
            return Err(SensingError::ActiveCellMismatch {
                snapshot: j,
                found,
                expected: grid.n(),
            });
        }
        x.set_column(j, &state);
    }
    Ok((SnapshotMatrix::new(x)?, grid))
}

// ---------------------------------------------------------------------------
// Smooth gridded fields

/// Synthetic gridded data whose modes are smooth cosine patterns on the active
/// cells, so truncated modes produce strongly correlated noise.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SmoothGridConfig {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
    pub m: usize,
    pub spectrum: Vec<f64>,
    pub seed: u64,
}

/// Spatial modes are the `m` lowest-wavenumber products
/// `cos(π a (x+½)/W) cos(π b (y+½)/H)` restricted to the active cells and
/// orthonormalized in wavenumber order; temporal modes are the QR factor of a
/// seeded Gaussian `m x m` matrix.
pub fn gen_smooth_grid_dataset(cfg: &SmoothGridConfig) -> Result<(SnapshotMatrix, MaskedGrid)> {
    let grid = MaskedGrid::new(cfg.width, cfg.height, cfg.mask.clone())?;
    if cfg.m == 0 || cfg.m > grid.n() {
        return Err(SensingError::InvalidConfig(format!(
            "smooth grid needs 1 <= m <= n = {}, got m = {}",
            grid.n(),
            cfg.m
        )));
    }
    validate_spectrum(&cfg.spectrum, cfg.m)?;

    let mut waves: Vec<(usize, usize)> = (0..cfg.height)
        .flat_map(|b| (0..cfg.width).map(move |a| (a, b)))
        .collect();
    let wavenumber =
        |&(a, b): &(usize, usize)| (a as f64 / cfg.width as f64).powi(2) + (b as f64 / cfg.height as f64).powi(2);
    waves.sort_by(|x, y| wavenumber(x).total_cmp(&wavenumber(y)).then(x.cmp(y)));
    let mut modes = DMatrix::zeros(grid.n(), cfg.m);
    for (k, &(a, b)) in waves.iter().take(cfg.m).enumerate() {
        for i in 0..grid.n() {
            let (row, col) = grid.position(i);
            let fx = (PI * a as f64 * (col as f64 + 0.5) / cfg.width as f64).cos();
            let fy = (PI * b as f64 * (row as f64 + 0.5) / cfg.height as f64).cos();
            modes[(i, k)] = fx * fy;
        }
    }
    let u = orthonormal_columns(modes);
    let v = orthonormal_columns(GaussianStream::new(cfg.seed).matrix(cfg.m, cfg.m));
    Ok((SnapshotMatrix::new(compose(u, &cfg.spectrum, &v))?, grid))
}
