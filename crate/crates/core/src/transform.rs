//! Random histogram transforms `H(x) = R·S·x + b`.
//!
//! `R` is a uniformly distributed rotation, `S = diag(s)` a stretching whose
//! log-scales are drawn uniformly around a data-driven reference scale, and
//! `b` a translation drawn uniformly from the unit cube. The integer lattice
//! of the transformed space induces a randomized partition of the input
//! space: two points share a cell iff `⌊H(x)⌋ = ⌊H(x')⌋`, and every cell has
//! volume `∏ h_i` with `h_i = 1 / s_i`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::{check_dim, check_finite, Points};

/// Orthogonal `d × d` matrix with determinant `+1`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl RotationMatrix {
    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Ok(Self { dim, entries })
    }

    /// Wrap a row-major matrix, checking orthogonality and orientation to `tol`.
    pub fn from_row_major(dim: usize, entries: Vec<f64>, tol: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        check_dim(dim * dim, entries.len())?;
        check_finite(&entries)?;
        let r = Self { dim, entries };
        if r.orthogonality_error() > tol || (r.determinant() - 1.0).abs() > tol {
            return Err(Error::InvalidConfig(
                "matrix is not a proper rotation".to_string(),
            ));
        }
        Ok(r)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// `R·x`.
    pub fn rotate(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.entries.chunks_exact(self.dim)) {
            *o = row.iter().zip(x).map(|(r, v)| r * v).sum();
        }
    }

    /// `Rᵀ·y`.
    pub fn rotate_transpose(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (row, yi) in self.entries.chunks_exact(self.dim).zip(y) {
            for (o, r) in out.iter_mut().zip(row) {
                *o += r * yi;
            }
        }
    }

    /// `max |RᵀR − I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = (0..d).map(|k| self.get(k, i) * self.get(k, j)).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    pub fn determinant(&self) -> f64 {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries).determinant()
    }
}

/// Per-dimension scales `s` and the matching input-space bin widths `h = 1/s`.
#[derive(Debug, Clone, PartialEq)]
pub struct StretchVector {
    scales: Vec<f64>,
    widths: Vec<f64>,
}

impl StretchVector {
    pub fn from_scales(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if let Some(bad) = scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "stretch scales must be positive and finite, got {bad}"
            )));
        }
        let widths = scales.iter().map(|s| 1.0 / s).collect();
        Ok(Self { scales, widths })
    }

    /// Same scale `s` in every dimension.
    pub fn uniform(dim: usize, scale: f64) -> Result<Self> {
        Self::from_scales(vec![scale; dim])
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Bin widths measured in the input space.
    pub fn widths(&self) -> &[f64] {
        &self.widths
    }
}

/// Translation `b ∈ [0, 1)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationVector(Vec<f64>);

impl TranslationVector {
    pub fn new(offsets: Vec<f64>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if let Some(bad) = offsets.iter().find(|b| !(0.0..1.0).contains(*b)) {
            return Err(Error::InvalidConfig(format!(
                "translation components must lie in [0, 1), got {bad}"
            )));
        }
        Ok(Self(offsets))
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Log-uniform stretch interval `[s_min_exp + log ŝ, s_max_exp + log ŝ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchConfig {
    pub s_min_exp: f64,
    pub s_max_exp: f64,
    pub reference_scale: f64,
}

impl StretchConfig {
    pub fn new(s_min_exp: f64, s_max_exp: f64, reference_scale: f64) -> Result<Self> {
        let cfg = Self {
            s_min_exp,
            s_max_exp,
            reference_scale,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Interval offsets around `ŝ = reference_scale(data)`.
    pub fn from_data(data: &Points, s_min_exp: f64, s_max_exp: f64) -> Result<Self> {
        Self::new(s_min_exp, s_max_exp, reference_scale(data)?)
    }

    /// Every bin width equal to `width` (no randomness in the stretch).
    pub fn fixed_width(width: f64) -> Result<Self> {
        Self::new(0.0, 0.0, 1.0 / width)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_min_exp.is_finite() && self.s_max_exp.is_finite()) {
            return Err(Error::InvalidConfig(
                "stretch exponents must be finite".to_string(),
            ));
        }
        if self.s_min_exp > self.s_max_exp {
            return Err(Error::InvalidConfig(format!(
                "s_min_exp ({}) exceeds s_max_exp ({})",
                self.s_min_exp, self.s_max_exp
            )));
        }
        if !(self.reference_scale.is_finite() && self.reference_scale > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "reference scale must be positive, got {}",
                self.reference_scale
            )));
        }
        Ok(())
    }
}

/// Haar-uniform rotation: QR of a Gaussian matrix with the sign ambiguity of
/// the factorization removed, then one column flipped if the orientation is
/// negative.
pub fn sample_rotation<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<RotationMatrix> {
    if dim == 0 {
        return Err(Error::InvalidDimension(dim));
    }
    let gaussian: Vec<f64> = (0..dim * dim).map(|_| rng.sample(StandardNormal)).collect();
    let qr = DMatrix::from_row_slice(dim, dim, &gaussian).qr();
    let upper = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if upper[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    let mut entries = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            entries.push(q[(i, j)]);
        }
    }
    Ok(RotationMatrix { dim, entries })
}

/// `ŝ = (3.5 σ)^{-1} n^{1/(2+d)}` with `σ = sqrt(trace(V)/d)` and `V` the
/// unbiased sample covariance.
pub fn reference_scale(data: &Points) -> Result<f64> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    data.check_finite()?;
    let d = data.dim();
    let cov = data.covariance()?;
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    let sigma = (trace / d as f64).sqrt();
    if !(sigma > 0.0) {
        return Err(Error::DegenerateData(
            "all points are identical; reference scale undefined".to_string(),
        ));
    }
    Ok((n as f64).powf(1.0 / (2.0 + d as f64)) / (3.5 * sigma))
}

/// Jeffreys-prior stretching: each `log s_i` uniform on the configured interval.
pub fn sample_stretch<R: Rng + ?Sized>(
    dim: usize,
    cfg: &StretchConfig,
    rng: &mut R,
) -> Result<StretchVector> {
    if dim == 0 {
        return Err(Error::InvalidDimension(dim));
    }
    cfg.validate()?;
    let span = cfg.s_max_exp - cfg.s_min_exp;
    let scales = (0..dim)
        .map(|_| {
            let offset = cfg.s_min_exp + span * rng.random::<f64>();
            cfg.reference_scale * offset.exp()
        })
        .collect();
    StretchVector::from_scales(scales)
}

pub fn sample_translation<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<TranslationVector> {
    if dim == 0 {
        return Err(Error::InvalidDimension(dim));
    }
    Ok(TranslationVector((0..dim).map(|_| rng.random::<f64>()).collect()))
}

/// The affine map `H(x) = R·S·x + b` and the partition it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramTransform {
    rotation: RotationMatrix,
    stretch: StretchVector,
    translation: TranslationVector,
    seed: Option<u64>,
    // R·S, row-major
    linear: Vec<f64>,
}

impl HistogramTransform {
    pub fn new(
        rotation: RotationMatrix,
        stretch: StretchVector,
        translation: TranslationVector,
    ) -> Result<Self> {
        let d = rotation.dim();
        check_dim(d, stretch.scales().len())?;
        check_dim(d, translation.as_slice().len())?;
        let mut linear = rotation.entries().to_vec();
        for row in linear.chunks_exact_mut(d) {
            for (r, s) in row.iter_mut().zip(stretch.scales()) {
                *r *= s;
            }
        }
        Ok(Self {
            rotation,
            stretch,
            translation,
            seed: None,
            linear,
        })
    }

    /// Draw rotation, stretch and translation (in that order) from `rng`.
    pub fn sample<R: Rng + ?Sized>(dim: usize, cfg: &StretchConfig, rng: &mut R) -> Result<Self> {
        let rotation = sample_rotation(dim, rng)?;
        let stretch = sample_stretch(dim, cfg, rng)?;
        let translation = sample_translation(dim, rng)?;
        Self::new(rotation, stretch, translation)
    }

    /// Pure rotation: unit stretch, zero translation.
    pub fn rotation_only(rotation: RotationMatrix) -> Result<Self> {
        let d = rotation.dim();
        Self::new(rotation, StretchVector::uniform(d, 1.0)?, TranslationVector::zero(d))
    }

    /// Record the seed the transform was drawn with, for provenance.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn dim(&self) -> usize {
        self.rotation.dim()
    }

    pub fn rotation(&self) -> &RotationMatrix {
        &self.rotation
    }

    pub fn stretch(&self) -> &StretchVector {
        &self.stretch
    }

    pub fn translation(&self) -> &TranslationVector {
        &self.translation
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `H(x)` written into `out`; no validation.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for ((o, row), b) in out
            .iter_mut()
            .zip(self.linear.chunks_exact(d))
            .zip(self.translation.as_slice())
        {
            *o = row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; self.dim()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    /// `S^{-1}·Rᵀ·(y − b)`.
    pub fn invert(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), y.len())?;
        let shifted: Vec<f64> = y
            .iter()
            .zip(self.translation.as_slice())
            .map(|(v, b)| v - b)
            .collect();
        let mut out = vec![0.0; self.dim()];
        self.rotation.rotate_transpose(&shifted, &mut out);
        for (o, h) in out.iter_mut().zip(self.stretch.widths()) {
            *o *= h;
        }
        Ok(out)
    }

    /// `⌊H(x)⌋`: the cell containing `x`; cells are half-open `[k, k+1)` in
    /// every transformed coordinate.
    pub fn bin_index(&self, x: &[f64]) -> Result<Vec<i64>> {
        check_dim(self.dim(), x.len())?;
        check_finite(x)?;
        let mut buf = vec![0.0; self.dim()];
        let mut index = vec![0; self.dim()];
        self.bin_index_into(x, &mut buf, &mut index)?;
        Ok(index)
    }

    pub(crate) fn bin_index_into(&self, x: &[f64], buf: &mut [f64], index: &mut [i64]) -> Result<()> {
        self.apply_into(x, buf);
        for (k, (i, v)) in index.iter_mut().zip(buf.iter()).enumerate() {
            if !v.is_finite() || v.abs() >= i64::MAX as f64 {
                return Err(Error::NonFinite { index: k, value: *v });
            }
            *i = v.floor() as i64;
        }
        Ok(())
    }

    /// Lebesgue measure of one cell, `∏ h_i`.
    pub fn cell_volume(&self) -> f64 {
        self.stretch.widths().iter().product()
    }
}

/// JSON form `{d, R, s, b, seed}` with `R` row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformRecord {
    pub d: usize,
    #[serde(rename = "R")]
    pub rotation: Vec<f64>,
    pub s: Vec<f64>,
    pub b: Vec<f64>,
    pub seed: Option<u64>,
}

impl From<&HistogramTransform> for TransformRecord {
    fn from(t: &HistogramTransform) -> Self {
        Self {
            d: t.dim(),
            rotation: t.rotation.entries().to_vec(),
            s: t.stretch.scales().to_vec(),
            b: t.translation.as_slice().to_vec(),
            seed: t.seed,
        }
    }
}

impl TryFrom<TransformRecord> for HistogramTransform {
    type Error = Error;

    fn try_from(rec: TransformRecord) -> Result<Self> {
        let rotation = RotationMatrix::from_row_major(rec.d, rec.rotation, 1e-9)?;
        let t = Self::new(
            rotation,
            StretchVector::from_scales(rec.s)?,
            TranslationVector::new(rec.b)?,
        )?;
        Ok(match rec.seed {
            Some(seed) => t.with_seed(seed),
            None => t,
        })
    }
}

impl Serialize for HistogramTransform {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        TransformRecord::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HistogramTransform {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rec = TransformRecord::deserialize(deserializer)?;
        HistogramTransform::try_from(rec).map_err(serde::de::Error::custom)
    }
}
