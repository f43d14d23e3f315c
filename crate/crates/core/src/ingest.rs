//! Loading, normalizing and pruning grid distributions, building ground
//! costs, and generating synthetic test images.
//!
//! Pixels are vectorized column-major: pixel `(row, col)` of a grid with
//! `height` rows has index `col * height + row`.

use crate::model::{ModelError, OtProblem, SparsePlan, WbProblem};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("negative mass {value} at row {row}, column {col}")]
    NegativeMass { row: usize, col: usize, value: f64 },
    #[error("distribution has no positive mass")]
    ZeroTotalMass,
    #[error("{0} distributions but {1} weights")]
    WeightCount(usize, usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn parse_err(location: String, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        location,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFormat {
    Pgm,
    Csv,
}

impl GridFormat {
    /// `.pgm` selects PGM; anything else is read as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("pgm") => GridFormat::Pgm,
            _ => GridFormat::Csv,
        }
    }
}

/// Nonnegative mass on a `height x width` pixel grid.
///
/// `mass[k]` belongs to the original pixel `kept_indices[k]`; before pruning
/// `kept_indices` is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDistribution {
    pub width: usize,
    pub height: usize,
    pub mass: Vec<f64>,
    pub kept_indices: Vec<usize>,
}

impl GridDistribution {
    /// Full grid from column-major mass.
    pub fn new(width: usize, height: usize, mass: Vec<f64>) -> Self {
        assert_eq!(
            mass.len(),
            width * height,
            "mass length must be width * height"
        );
        Self {
            width,
            height,
            kept_indices: (0..mass.len()).collect(),
            mass,
        }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// `(row, col)` of the `k`-th retained entry.
    pub fn coords(&self, k: usize) -> (usize, usize) {
        let idx = self.kept_indices[k];
        (idx % self.height, idx / self.height)
    }

    /// Mass on the full grid with pruned pixels set to zero.
    pub fn to_full(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.width * self.height];
        for (&k, &v) in self.kept_indices.iter().zip(&self.mass) {
            out[k] = v;
        }
        out
    }
}

pub fn load_grid(path: &Path, format: GridFormat) -> Result<GridDistribution, IngestError> {
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        GridFormat::Pgm => parse_pgm(&bytes),
        GridFormat::Csv => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|e| parse_err(format!("byte {}", e.valid_up_to()), "invalid UTF-8"))?;
            parse_csv(text)
        }
    }
}

/// One line per image row, comma-separated, no header.
pub fn parse_csv(text: &str) -> Result<GridDistribution, IngestError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                parse_err(
                    format!("line {}", ln + 1),
                    format!("invalid number {:?}", field.trim()),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(format!("line {}", ln + 1), "non-finite value"));
            }
            if v < 0.0 {
                return Err(IngestError::NegativeMass {
                    row: rows.len(),
                    col,
                    value: v,
                });
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    format!("line {}", ln + 1),
                    format!("expected {} values, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err("line 1".into(), "empty grid"));
    }
    let (height, width) = (rows.len(), rows[0].len());
    let mut mass = vec![0.0; width * height];
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            mass[c * height + r] = v;
        }
    }
    Ok(GridDistribution::new(width, height, mass))
}

/// Binary (P5) or ASCII (P2) graymap with `maxval <= 65535`.
pub fn parse_pgm(bytes: &[u8]) -> Result<GridDistribution, IngestError> {
    let mut pos = 0usize;
    let token = |pos: &mut usize| -> Result<(String, usize), IngestError> {
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
        if start == *pos {
            return Err(parse_err(format!("byte {start}"), "unexpected end of file"));
        }
        Ok((
            String::from_utf8_lossy(&bytes[start..*pos]).into_owned(),
            start,
        ))
    };
    let (magic, _) = token(&mut pos)?;
    if magic != "P2" && magic != "P5" {
        return Err(parse_err(
            "byte 0".into(),
            format!("unsupported magic {magic:?}"),
        ));
    }
    let mut header = [0usize; 3];
    for (h, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        let (t, at) = token(&mut pos)?;
        *h = t
            .parse()
            .map_err(|_| parse_err(format!("byte {at}"), format!("invalid {name} {t:?}")))?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(parse_err(format!("byte {pos}"), "invalid header values"));
    }
    let count = width * height;
    let mut values = Vec::with_capacity(count);
    if magic == "P2" {
        for _ in 0..count {
            let (t, at) = token(&mut pos)?;
            let v: usize = t
                .parse()
                .map_err(|_| parse_err(format!("byte {at}"), format!("invalid pixel {t:?}")))?;
            if v > maxval {
                return Err(parse_err(format!("byte {at}"), "pixel exceeds maxval"));
            }
            values.push(v as f64);
        }
    } else {
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        if bytes.len() < pos + need {
            return Err(parse_err(
                format!("byte {}", bytes.len()),
                "truncated raster",
            ));
        }
        let raster = &bytes[pos..pos + need];
        for k in 0..count {
            let v = if wide {
                u16::from_be_bytes([raster[2 * k], raster[2 * k + 1]]) as usize
            } else {
                raster[k] as usize
            };
            if v > maxval {
                return Err(parse_err(
                    format!("byte {}", pos + k),
                    "pixel exceeds maxval",
                ));
            }
            values.push(v as f64);
        }
    }
    let mut mass = vec![0.0; count];
    for r in 0..height {
        for c in 0..width {
            mass[c * height + r] = values[r * width + c];
        }
    }
    Ok(GridDistribution::new(width, height, mass))
}

/// Scales mass to sum 1 and drops zero entries, keeping the index map.
pub fn normalize_and_prune(dist: &GridDistribution) -> Result<GridDistribution, IngestError> {
    let total: f64 = dist.mass.iter().sum();
    if !(total > 0.0) {
        return Err(IngestError::ZeroTotalMass);
    }
    let (kept_indices, mass): (Vec<usize>, Vec<f64>) = dist
        .kept_indices
        .iter()
        .zip(&dist.mass)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&k, &v)| (k, v / total))
        .unzip();
    Ok(GridDistribution {
        width: dist.width,
        height: dist.height,
        mass,
        kept_indices,
    })
}

/// Ground cost normalized by its largest entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Column-major `rows x cols`.
    pub data: Vec<f64>,
    /// Largest raw entry; multiply objectives by this to recover raw units.
    pub max_raw: f64,
    /// All raw entries were zero, so no normalization was applied.
    pub degenerate: bool,
}

fn sq_dist(p: (usize, usize), q: (usize, usize)) -> f64 {
    let dr = p.0 as f64 - q.0 as f64;
    let dc = p.1 as f64 - q.1 as f64;
    dr * dr + dc * dc
}

fn raw_cost(a: &GridDistribution, b: &GridDistribution) -> Vec<f64> {
    let (m, n) = (a.len(), b.len());
    let pa: Vec<_> = (0..m).map(|i| a.coords(i)).collect();
    let mut data = Vec::with_capacity(m * n);
    for j in 0..n {
        let q = b.coords(j);
        data.extend(pa.iter().map(|&p| sq_dist(p, q)));
    }
    data
}

fn normalize_cost(rows: usize, cols: usize, mut data: Vec<f64>, max_raw: f64) -> CostMatrix {
    let degenerate = !(max_raw > 0.0);
    if !degenerate {
        data.iter_mut().for_each(|c| *c /= max_raw);
    }
    CostMatrix {
        rows,
        cols,
        data,
        max_raw,
        degenerate,
    }
}

/// `C_ij = |p_i - q_j|^2` over retained pixels, divided by `max C`.
pub fn cost_sq_euclidean(a: &GridDistribution, b: &GridDistribution) -> CostMatrix {
    let data = raw_cost(a, b);
    let max_raw = data.iter().fold(0.0f64, |s, &c| s.max(c));
    normalize_cost(a.len(), b.len(), data, max_raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticClass {
    WhiteNoise,
    Smooth,
    Bump,
}

impl std::str::FromStr for SyntheticClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "whitenoise" => Ok(Self::WhiteNoise),
            "smooth" => Ok(Self::Smooth),
            "bump" => Ok(Self::Bump),
            other => Err(format!(
                "unknown class {other:?} (whitenoise, smooth, bump)"
            )),
        }
    }
}

impl std::fmt::Display for SyntheticClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::WhiteNoise => "whitenoise",
            Self::Smooth => "smooth",
            Self::Bump => "bump",
        })
    }
}

const MASS_FLOOR: f64 = 1e-6;

/// Deterministic `res x res` test image, strictly positive and normalized.
pub fn generate_synthetic(class: SyntheticClass, res: usize, seed: u64) -> GridDistribution {
    let res = res.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..res * res).map(|_| rng.random_range(0.0..1.0)).collect()
    };
    let raw = match class {
        SyntheticClass::WhiteNoise => noise(&mut rng),
        SyntheticClass::Smooth => box_blur(&noise(&mut rng), res, 2),
        SyntheticClass::Bump => {
            let r0 = rng.random_range(0.0..res as f64);
            let c0 = rng.random_range(0.0..res as f64);
            let s = rng
                .random_range(res as f64 / 3.0..res as f64 / 2.0)
                .max(0.5);
            let mut v = vec![0.0; res * res];
            for c in 0..res {
                for r in 0..res {
                    let d2 = (r as f64 - r0).powi(2) + (c as f64 - c0).powi(2);
                    v[c * res + r] = (-d2 / (2.0 * s * s)).exp();
                }
            }
            v
        }
    };
    let total: f64 = raw.iter().map(|v| v + MASS_FLOOR).sum();
    let mass = raw.iter().map(|v| (v + MASS_FLOOR) / total).collect();
    GridDistribution::new(res, res, mass)
}

/// Mean over the `(2 radius + 1)^2` window clipped to the grid.
fn box_blur(v: &[f64], res: usize, radius: usize) -> Vec<f64> {
    let mut out = vec![0.0; res * res];
    for c in 0..res {
        for r in 0..res {
            let (r0, r1) = (r.saturating_sub(radius), (r + radius).min(res - 1));
            let (c0, c1) = (c.saturating_sub(radius), (c + radius).min(res - 1));
            let mut s = 0.0;
            for cc in c0..=c1 {
                for rr in r0..=r1 {
                    s += v[cc * res + rr];
                }
            }
            out[c * res + r] = s / ((r1 - r0 + 1) * (c1 - c0 + 1)) as f64;
        }
    }
    out
}

/// OT instance between two normalized, pruned distributions under the
/// normalized squared-Euclidean cost.
pub fn build_ot_problem(
    a: &GridDistribution,
    b: &GridDistribution,
    drop_last_row: bool,
) -> Result<(OtProblem, CostMatrix), IngestError> {
    let cost = cost_sq_euclidean(a, b);
    let p = OtProblem::new(
        cost.data.clone(),
        a.mass.clone(),
        b.mass.clone(),
        drop_last_row,
    )?;
    Ok((p, cost))
}

/// Fixed-support barycenter on the full `width x height` grid. Distances
/// are normalized by their largest entry over all inputs.
pub fn build_wb_problem(
    dists: &[GridDistribution],
    weights: &[f64],
    width: usize,
    height: usize,
) -> Result<(WbProblem, f64), IngestError> {
    if weights.len() != dists.len() {
        return Err(IngestError::WeightCount(dists.len(), weights.len()));
    }
    let support = GridDistribution::new(width, height, vec![0.0; width * height]);
    let raws: Vec<Vec<f64>> = dists.iter().map(|d| raw_cost(&support, d)).collect();
    let max_raw = raws.iter().flatten().fold(0.0f64, |s, &c| s.max(c));
    let scaled: Vec<Vec<f64>> = raws
        .into_iter()
        .map(|r| normalize_cost(width * height, 0, r, max_raw).data)
        .collect();
    let p = WbProblem::new(
        &scaled,
        dists.iter().map(|d| d.mass.clone()).collect(),
        weights.to_vec(),
        width * height,
    )?;
    Ok((p, max_raw))
}

/// `gamma_t = 1 / N`.
pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Maps a plan over retained indices back to original pixel indices.
pub fn embed_plan(
    plan: &SparsePlan,
    row_map: &[usize],
    col_map: &[usize],
    full_rows: usize,
    full_cols: usize,
) -> SparsePlan {
    SparsePlan {
        rows: full_rows,
        cols: full_cols,
        entries: plan
            .entries
            .iter()
            .map(|&(i, j, v)| (row_map[i], col_map[j], v))
            .collect(),
    }
}

/// Column-major grid values as CSV, one line per image row.
pub fn grid_to_csv(values: &[f64], width: usize, height: usize) -> String {
    let mut s = String::new();
    for r in 0..height {
        let line: Vec<String> = (0..width)
            .map(|c| values[c * height + r].to_string())
            .collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}
