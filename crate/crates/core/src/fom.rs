//! Figure of merit over the channel parameters and the structure of `R_B`
//! it is built from.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fmt_full, CMatrix, ZERO};
use crate::scattering::{total_reflection_all_sectors, ChannelConfig, SectorReflection};

/// Matrix elements of `R_B` that matter for the entangling step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureReport {
    pub n: usize,
    /// Mean one-hot transfer amplitude `⟨u_i|M0|u_j⟩`, `i ≠ j`.
    pub alpha: Complex64,
    /// Mean one-hot diagonal of `M0`.
    pub beta: Complex64,
    /// Largest deviation of a transfer amplitude from `alpha`.
    pub alpha_spread: f64,
    pub beta_spread: f64,
    /// `‖M1‖_F` restricted to columns with `k` static excitations, `k = 1..=n`.
    pub gamma_norms: Vec<f64>,
    pub m1_frobenius: f64,
    /// `|β|² + (n−1)|α|² − 1`; zero when the one-hot block is unitary.
    pub unitarity_gap: f64,
}

/// Builds the report from a sector reflection that covers every excitation
/// number of the `n+1` qubits.
pub fn structure_report(refl: &SectorReflection) -> Result<StructureReport> {
    let n = refl.config.n;
    if n < 2 {
        return Err(Error::InvalidArgument("structure report needs n >= 2".into()));
    }
    let flying = 1usize << n;
    let get = |row: usize, col: usize| {
        refl.element(row, col)
            .ok_or_else(|| Error::InvalidArgument(format!("sector with {} excitations missing", col.count_ones())))
    };
    let onehot: Vec<usize> = (0..n).map(|i| 1usize << i).collect();
    let mut m0 = CMatrix::zeros(n, n);
    for (r, &a) in onehot.iter().enumerate() {
        for (c, &b) in onehot.iter().enumerate() {
            m0[(r, c)] = get(a, b)?;
        }
    }
    // M1 = ⟨1_f|R_B|0_f⟩ only links k static excitations to k−1.
    let mut gamma_sq = vec![0.0; n];
    for b in 1..flying {
        let k = b.count_ones() as usize;
        for a in (0..flying).filter(|a| a.count_ones() as usize + 1 == k) {
            gamma_sq[k - 1] += get(flying | a, b)?.norm_sqr();
        }
    }
    Ok(assemble(n, &m0, gamma_sq))
}

/// Same report from a dense `R_B` with `|0⟩` injection.
pub fn structure_report_full(rb: &CMatrix, n: usize) -> Result<StructureReport> {
    if n < 2 {
        return Err(Error::InvalidArgument("structure report needs n >= 2".into()));
    }
    let dim = 1usize << n;
    if rb.nrows() != 2 * dim {
        return Err(Error::DimensionMismatch {
            expected: 2 * dim,
            actual: rb.nrows(),
        });
    }
    let m0 = CMatrix::from_fn(n, n, |r, c| rb[(1 << r, 1 << c)]);
    let mut gamma_sq = vec![0.0; n];
    for b in 1..dim {
        let k = b.count_ones() as usize;
        gamma_sq[k - 1] += (0..dim).map(|a| rb[(dim + a, b)].norm_sqr()).sum::<f64>();
    }
    Ok(assemble(n, &m0, gamma_sq))
}

fn assemble(n: usize, m0: &CMatrix, gamma_sq: Vec<f64>) -> StructureReport {
    let mut off = ZERO;
    let mut diag = ZERO;
    for r in 0..n {
        for c in 0..n {
            if r == c {
                diag += m0[(r, c)];
            } else {
                off += m0[(r, c)];
            }
        }
    }
    let alpha = off / (n * (n - 1)) as f64;
    let beta = diag / n as f64;
    let mut alpha_spread: f64 = 0.0;
    let mut beta_spread: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r == c {
                beta_spread = beta_spread.max((m0[(r, c)] - beta).norm());
            } else {
                alpha_spread = alpha_spread.max((m0[(r, c)] - alpha).norm());
            }
        }
    }
    let m1_frobenius = gamma_sq.iter().sum::<f64>().sqrt();
    StructureReport {
        n,
        alpha,
        beta,
        alpha_spread,
        beta_spread,
        gamma_norms: gamma_sq.into_iter().map(f64::sqrt).collect(),
        m1_frobenius,
        unitarity_gap: beta.norm_sqr() + (n - 1) as f64 * alpha.norm_sqr() - 1.0,
    }
}

/// `ln(‖M1‖_F / |α|)`; `+inf` when nothing is transferred.
pub fn fom(report: &StructureReport) -> f64 {
    let a = report.alpha.norm();
    if a == 0.0 {
        return f64::INFINITY;
    }
    (report.m1_frobenius / a).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FomSample {
    pub kd: f64,
    pub kd0: f64,
    pub gamma: f64,
    pub omega: f64,
    pub fom: f64,
    /// Resonance hit or no transfer at all.
    pub degenerate: bool,
}

/// FOM at one parameter point. Never fails: singular or otherwise unusable
/// points come back flagged as degenerate.
pub fn evaluate(config: &ChannelConfig) -> FomSample {
    let fom = total_reflection_all_sectors(config)
        .and_then(|refl| structure_report(&refl))
        .map(|report| fom(&report));
    let (fom, degenerate) = match fom {
        Ok(v) if v.is_finite() => (v, false),
        Ok(v) => (v, true),
        Err(Error::ResonanceSingularity { .. }) => (f64::INFINITY, true),
        Err(e) => {
            warn!("fom at kd={} kd0={}: {e}", config.kd, config.kd0);
            (f64::INFINITY, true)
        }
    };
    FomSample {
        kd: config.kd,
        kd0: config.kd0,
        gamma: config.gamma,
        omega: config.omega,
        fom,
        degenerate,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    Kd,
    Kd0,
    Gamma,
    Omega,
}

impl Param {
    fn set(self, config: &mut ChannelConfig, value: f64) {
        match self {
            Param::Kd => config.kd = value,
            Param::Kd0 => config.kd0 = value,
            Param::Gamma => config.gamma = value,
            Param::Omega => config.omega = value,
        }
    }

    pub fn get(self, sample: &FomSample) -> f64 {
        match self {
            Param::Kd => sample.kd,
            Param::Kd0 => sample.kd0,
            Param::Gamma => sample.gamma,
            Param::Omega => sample.omega,
        }
    }
}

impl FromStr for Param {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kd" => Ok(Param::Kd),
            "kd0" => Ok(Param::Kd0),
            "gamma" => Ok(Param::Gamma),
            "omega" => Ok(Param::Omega),
            other => Err(Error::InvalidArgument(format!("unknown sweep parameter {other:?}"))),
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Param::Kd => "kd",
            Param::Kd0 => "kd0",
            Param::Gamma => "gamma",
            Param::Omega => "omega",
        })
    }
}

/// One sweep axis of `points` cells over `(lo, hi)`, sampled at cell
/// centres. With `log` the cells are equal in `ln(value)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: Param,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub log: bool,
}

impl Axis {
    pub fn linear(param: Param, lo: f64, hi: f64, points: usize) -> Self {
        Self { param, lo, hi, points, log: false }
    }

    pub fn logarithmic(param: Param, lo: f64, hi: f64, points: usize) -> Self {
        Self { param, lo, hi, points, log: true }
    }

    /// Cell width in the axis coordinate (log-space for log axes).
    pub fn cell(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi - lo) / self.points as f64
    }

    fn bounds(&self) -> (f64, f64) {
        if self.log {
            (self.lo.ln(), self.hi.ln())
        } else {
            (self.lo, self.hi)
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        let (lo, _) = self.bounds();
        let x = lo + (i as f64 + 0.5) * self.cell();
        if self.log {
            x.exp()
        } else {
            x
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.value(i)).collect()
    }

    fn coord(&self, v: f64) -> f64 {
        if self.log {
            v.ln()
        } else {
            v
        }
    }

    fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::InvalidArgument(format!("{} axis has no points", self.param)));
        }
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.hi < self.lo {
            return Err(Error::InvalidArgument(format!("bad {} range [{}, {}]", self.param, self.lo, self.hi)));
        }
        if self.log && self.lo <= 0.0 {
            return Err(Error::InvalidArgument(format!("log axis {} needs a positive range", self.param)));
        }
        Ok(())
    }
}

/// Two-parameter grid; the other two parameters come from the base config.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x: Axis,
    pub y: Axis,
}

impl GridSpec {
    /// `kd ∈ (0, 2π)`, `kd0 ∈ (0, π)`.
    pub fn kd_kd0(points: usize) -> Self {
        use std::f64::consts::PI;
        Self {
            x: Axis::linear(Param::Kd, 0.0, 2.0 * PI, points),
            y: Axis::linear(Param::Kd0, 0.0, PI, points),
        }
    }

    /// `Γ ∈ (10, 10⁵)`, `Ω ∈ (10⁻⁶, 10⁻²)`, both logarithmic.
    pub fn gamma_omega(points: usize) -> Self {
        Self {
            x: Axis::logarithmic(Param::Gamma, 1e1, 1e5, points),
            y: Axis::logarithmic(Param::Omega, 1e-6, 1e-2, points),
        }
    }

    pub fn len(&self) -> usize {
        self.x.points * self.y.points
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        self.x.validate()?;
        self.y.validate()?;
        if self.x.param == self.y.param {
            return Err(Error::InvalidArgument(format!("both axes sweep {}", self.x.param)));
        }
        Ok(())
    }

    /// Whether `sample` lies within one cell of `(x, y)` on both axes.
    pub fn within_one_cell(&self, sample: &FomSample, x: f64, y: f64) -> bool {
        let dx = (self.x.coord(self.x.param.get(sample)) - self.x.coord(x)).abs();
        let dy = (self.y.coord(self.y.param.get(sample)) - self.y.coord(y)).abs();
        dx <= self.x.cell() && dy <= self.y.cell()
    }
}

/// FOM over the grid, row-major with `x` outer. Points are evaluated in
/// parallel; output order depends only on the grid.
pub fn sweep(base: &ChannelConfig, grid: &GridSpec) -> Result<Vec<FomSample>> {
    grid.validate()?;
    if base.n < 2 {
        return Err(Error::InvalidArgument("fom needs n >= 2".into()));
    }
    let xs = grid.x.values();
    let ys = grid.y.values();
    Ok((0..grid.len())
        .into_par_iter()
        .map(|k| {
            let mut c = *base;
            grid.x.param.set(&mut c, xs[k / ys.len()]);
            grid.y.param.set(&mut c, ys[k % ys.len()]);
            evaluate(&c)
        })
        .collect())
}

/// Lowest non-degenerate sample; ties go to the earliest.
pub fn argmin(samples: &[FomSample]) -> Option<&FomSample> {
    samples
        .iter()
        .filter(|s| !s.degenerate)
        .fold(None, |best: Option<&FomSample>, s| match best {
            Some(b) if b.fom <= s.fom => Some(b),
            _ => Some(s),
        })
}

/// Indices of samples within `band` (natural-log units) of the sweep minimum.
pub fn minimum_region(samples: &[FomSample], band: f64) -> Vec<usize> {
    let Some(best) = argmin(samples) else {
        return Vec::new();
    };
    samples
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.degenerate && s.fom <= best.fom + band)
        .map(|(i, _)| i)
        .collect()
}

pub fn write_sweep_csv<W: Write>(samples: &[FomSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kd", "kd0", "gamma", "omega", "fom", "degenerate"])?;
    for s in samples {
        w.write_record([
            fmt_full(s.kd),
            fmt_full(s.kd0),
            fmt_full(s.gamma),
            fmt_full(s.omega),
            if s.fom.is_finite() { fmt_full(s.fom) } else { "inf".into() },
            s.degenerate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// How far FOM moves when `(Γ, Ω)` are scaled together by 2 and by 10.
/// Reported only; not an acceptance gate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sensitivity {
    pub base: f64,
    pub max_shift_factor2: f64,
    pub max_shift_factor10: f64,
}

impl Sensitivity {
    pub fn is_monotone(&self) -> bool {
        self.max_shift_factor2 <= self.max_shift_factor10
    }
}

pub fn sensitivity(config: &ChannelConfig) -> Sensitivity {
    let base = evaluate(config).fom;
    let shift = |f: f64| {
        let mut worst: f64 = 0.0;
        for (g, o) in [(f, 1.0), (1.0 / f, 1.0), (1.0, f), (1.0, 1.0 / f)] {
            let c = ChannelConfig {
                gamma: config.gamma * g,
                omega: config.omega * o,
                ..*config
            };
            worst = worst.max((evaluate(&c).fom - base).abs());
        }
        worst
    };
    Sensitivity {
        base,
        max_shift_factor2: shift(2.0),
        max_shift_factor10: shift(10.0),
    }
}
