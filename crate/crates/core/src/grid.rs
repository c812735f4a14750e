//! Vertex-centered state grids and space-time value tables.

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::paths::TimeGrid;

/// Stand-in for `+inf` in value tables.
pub const SENTINEL: f64 = 1e30;

pub(crate) fn is_reachable(v: f64) -> bool {
    v.is_finite() && v < 0.5 * SENTINEL
}

/// Vertex-centered lattice over the bounding box of a domain.
///
/// The base lattice is uniform and nodes outside `closure(G)` are masked.
/// A padded grid appends extra layers of nodes beyond the box, possibly
/// finer than the base spacing, and marks every node active; it hosts the
/// penalized dynamics, which may leave `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridMeta", into = "GridMeta")]
pub struct StateGrid {
    domain: Domain,
    base: Vec<usize>,
    h: Vec<f64>,
    pad: Vec<usize>,
    offsets: Vec<Vec<f64>>,
    axes: Vec<Vec<f64>>,
    inside: Vec<bool>,
    active: Vec<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GridMeta {
    domain: Domain,
    counts: Vec<usize>,
    /// Distances of the pad nodes beyond each end of each axis.
    #[serde(default)]
    pad: Vec<Vec<f64>>,
}

impl TryFrom<GridMeta> for StateGrid {
    type Error = Error;
    fn try_from(m: GridMeta) -> Result<Self> {
        let g = StateGrid::new(m.domain, &m.counts)?;
        if m.pad.iter().any(|p| !p.is_empty()) {
            let sorted = m.pad.iter().all(|p| p.windows(2).all(|w| w[0] < w[1]) && p.iter().all(|&d| d > 0.0));
            if m.pad.len() != g.dim() || !sorted {
                return Err(Error::Format {
                    what: "grid",
                    reason: "padding must list increasing positive offsets per axis".into(),
                });
            }
            Ok(g.padded(&m.pad))
        } else {
            Ok(g)
        }
    }
}

impl From<StateGrid> for GridMeta {
    fn from(g: StateGrid) -> Self {
        GridMeta {
            domain: g.domain,
            counts: g.base,
            pad: g.offsets,
        }
    }
}

impl StateGrid {
    /// `counts[i]` nodes along axis `i`, spanning the domain's bounding box.
    pub fn new(domain: Domain, counts: &[usize]) -> Result<Self> {
        domain.validate()?;
        if counts.len() != domain.dim() {
            return Err(Error::Dimension {
                what: "grid node counts",
                expected: domain.dim(),
                got: counts.len(),
            });
        }
        if domain.dim() > 2 {
            return Err(Error::param("domain", "grid solvers support dimension 1 and 2 only"));
        }
        if counts.iter().any(|&n| n < 3) {
            return Err(Error::param("nodes", "need at least 3 nodes per axis"));
        }
        let (lo, hi) = domain.bounds();
        let h: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .zip(counts)
            .map(|((l, u), &n)| (u - l) / (n - 1) as f64)
            .collect();
        let axes = (0..counts.len())
            .map(|a| {
                (0..counts[a])
                    .map(|j| if j + 1 == counts[a] { hi[a] } else { lo[a] + j as f64 * h[a] })
                    .collect()
            })
            .collect();
        let mut g = StateGrid {
            pad: vec![0; counts.len()],
            offsets: vec![Vec::new(); counts.len()],
            domain,
            base: counts.to_vec(),
            h,
            axes,
            inside: Vec::new(),
            active: Vec::new(),
        };
        g.classify(false);
        Ok(g)
    }

    /// Base lattice with extra nodes at distances `offsets[i]` (increasing)
    /// beyond both ends of axis `i`; every node is active.
    pub fn padded(&self, offsets: &[Vec<f64>]) -> Self {
        let mut g = StateGrid::new(self.domain.clone(), &self.base).expect("base lattice was validated");
        for a in 0..g.dim() {
            let core = std::mem::take(&mut g.axes[a]);
            let (first, last) = (core[0], core[core.len() - 1]);
            let off = &offsets[a];
            let mut ax = Vec::with_capacity(core.len() + 2 * off.len());
            ax.extend(off.iter().rev().map(|d| first - d));
            ax.extend_from_slice(&core);
            ax.extend(off.iter().map(|d| last + d));
            g.axes[a] = ax;
        }
        g.pad = offsets.iter().map(Vec::len).collect();
        g.offsets = offsets.to_vec();
        g.classify(true);
        g
    }

    /// Pads every axis to cover `margin` beyond the box. Offsets grow
    /// geometrically from `margin * 1e-6` (kept clear of the boundary
    /// tolerance) by `ratio` until the spacing
    /// reaches the base spacing, then continue uniformly, so thin boundary
    /// layers are resolved at every scale.
    pub fn extended(&self, margin: f64, ratio: f64) -> Self {
        let ratio = ratio.max(1.01);
        let offsets = self
            .h
            .iter()
            .map(|&h| {
                let mut out = Vec::new();
                let mut d = (margin * 1e-6).max(4.0 * self.domain.tol_boundary()).min(h);
                let mut step = d;
                out.push(d);
                while d < margin * (1.0 - 1e-9) {
                    step = (step * ratio).min(h);
                    d = (d + step).min(margin);
                    out.push(d);
                }
                out
            })
            .collect::<Vec<_>>();
        self.padded(&offsets)
    }

    fn classify(&mut self, all_active: bool) {
        let tol = self.domain.tol_boundary();
        let n = self.len();
        let mut x = vec![0.0; self.dim()];
        self.inside = (0..n)
            .map(|i| {
                self.node_into(i, &mut x);
                self.domain.dist(&x) <= tol
            })
            .collect();
        self.active = if all_active { vec![true; n] } else { self.inside.clone() };
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    /// Node counts per axis, padding included.
    pub fn counts(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    /// Node counts of the base lattice.
    pub fn base_counts(&self) -> &[usize] {
        &self.base
    }

    /// Spacing of the base lattice along `axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        self.h[axis]
    }

    pub fn min_spacing(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn axis(&self, axis: usize) -> &[f64] {
        &self.axes[axis]
    }

    pub fn pad(&self) -> &[usize] {
        &self.pad
    }

    pub fn is_extended(&self) -> bool {
        self.pad.iter().any(|&p| p > 0)
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node in `closure(G)`.
    pub fn inside(&self, i: usize) -> bool {
        self.inside[i]
    }

    /// Node carrying a value.
    pub fn active(&self, i: usize) -> bool {
        self.active[i]
    }

    pub fn coord(&self, axis: usize, j: usize) -> f64 {
        self.axes[axis][j]
    }

    /// Per-axis indices of flat node `i` (last axis fastest).
    pub fn multi(&self, mut i: usize) -> [usize; 2] {
        let mut m = [0; 2];
        for a in (0..self.dim()).rev() {
            let n = self.axes[a].len();
            m[a] = i % n;
            i /= n;
        }
        m
    }

    pub fn flat(&self, m: &[usize]) -> usize {
        m.iter().zip(&self.axes).fold(0, |acc, (&j, ax)| acc * ax.len() + j)
    }

    pub fn node_into(&self, i: usize, out: &mut [f64]) {
        let m = self.multi(i);
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.axes[a][m[a]];
        }
    }

    pub fn node(&self, i: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.node_into(i, &mut x);
        x
    }

    /// Flat index of the neighbour one step along `axis` in direction `dir`.
    pub fn neighbour(&self, i: usize, axis: usize, dir: isize) -> Option<usize> {
        let mut m = self.multi(i);
        let j = m[axis] as isize + dir;
        if j < 0 || j >= self.axes[axis].len() as isize {
            return None;
        }
        m[axis] = j as usize;
        Some(self.flat(&m[..self.dim()]))
    }

    /// Index of the node nearest to `x` (clamped to the lattice).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let m: Vec<usize> = (0..self.dim())
            .map(|a| {
                let ax = &self.axes[a];
                let (j, f) = locate(ax, x[a]);
                if f > 0.5 {
                    j + 1
                } else {
                    j
                }
            })
            .collect();
        self.flat(&m)
    }

    /// Whether `x` lies in the lattice's box (up to rounding).
    pub fn covers(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|a| {
            let ax = &self.axes[a];
            let slack = 1e-9 * (ax[1] - ax[0]);
            x[a] >= ax[0] - slack && x[a] <= ax[ax.len() - 1] + slack
        })
    }

    /// Multilinear interpolation of `values` at `x`.
    ///
    /// Inactive corners are skipped and the weights renormalized; a corner
    /// with positive weight rejected by `valid` makes the result `None`, as
    /// does a point outside the lattice.
    pub fn interpolate(&self, values: &[f64], x: &[f64], valid: impl Fn(usize) -> bool) -> Option<f64> {
        if !self.covers(x) {
            return None;
        }
        let d = self.dim();
        let mut base = [0usize; 2];
        let mut frac = [0.0; 2];
        for a in 0..d {
            let (j, f) = locate(&self.axes[a], x[a]);
            base[a] = j;
            frac[a] = f;
        }
        let mut acc = 0.0;
        let mut wsum = 0.0;
        let mut m = [0usize; 2];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for a in 0..d {
                let up = (corner >> a) & 1 == 1;
                m[a] = base[a] + up as usize;
                w *= if up { frac[a] } else { 1.0 - frac[a] };
            }
            if w <= 0.0 {
                continue;
            }
            let i = self.flat(&m[..d]);
            if !self.active[i] {
                continue;
            }
            if !valid(i) {
                return None;
            }
            acc += w * values[i];
            wsum += w;
        }
        if wsum > 1e-12 {
            Some(acc / wsum)
        } else {
            None
        }
    }

    /// Flat index of `other`'s node `i` in this grid, when both share the
    /// same base lattice.
    pub fn map_from(&self, other: &StateGrid, i: usize) -> Option<usize> {
        if self.domain != other.domain || self.base != other.base {
            return None;
        }
        let m = other.multi(i);
        let mut out = [0usize; 2];
        for a in 0..self.dim() {
            let j = m[a] as isize + self.pad[a] as isize - other.pad[a] as isize;
            if j < 0 || j >= self.axes[a].len() as isize {
                return None;
            }
            out[a] = j as usize;
        }
        Some(self.flat(&out[..self.dim()]))
    }
}

/// Cell index `j` (into `ax[j]..ax[j + 1]`) and fraction for coordinate `x`,
/// clamped to the axis.
fn locate(ax: &[f64], x: f64) -> (usize, f64) {
    let n = ax.len();
    let j = ax.partition_point(|&c| c <= x).saturating_sub(1).min(n - 2);
    let f = ((x - ax[j]) / (ax[j + 1] - ax[j])).clamp(0.0, 1.0);
    (j, f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldLabel {
    Constrained,
    Penalized { kappa: f64 },
    HjbSub,
    HjbSuper,
    ZakaiLog { epsilon: f64 },
}

impl std::fmt::Display for FieldLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FieldLabel::Constrained => write!(f, "constrained"),
            FieldLabel::Penalized { kappa } => write!(f, "penalized({kappa})"),
            FieldLabel::HjbSub => write!(f, "hjb-sub"),
            FieldLabel::HjbSuper => write!(f, "hjb-super"),
            FieldLabel::ZakaiLog { epsilon } => write!(f, "zakai-log({epsilon})"),
        }
    }
}

/// `V[k][i]` on a state grid and time grid. Inactive nodes hold NaN;
/// unreachable nodes hold [`SENTINEL`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    pub grid: StateGrid,
    pub times: TimeGrid,
    pub label: FieldLabel,
    values: Vec<f64>,
}

impl ValueField {
    pub fn new(grid: StateGrid, times: TimeGrid, label: FieldLabel, values: Vec<f64>) -> Result<Self> {
        let want = (times.steps + 1) * grid.len();
        if values.len() != want {
            return Err(Error::Dimension {
                what: "value table",
                expected: want,
                got: values.len(),
            });
        }
        Ok(ValueField { grid, times, label, values })
    }

    pub fn rows(&self) -> usize {
        self.times.steps + 1
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.grid.len() + i]
    }

    /// Row `k` interpolated at `x`, ignoring unreachable nodes.
    pub fn interpolate(&self, k: usize, x: &[f64]) -> Option<f64> {
        let row = self.row(k);
        self.grid.interpolate(row, x, |i| is_reachable(row[i]))
    }

    /// Number of sentinel entries among active nodes.
    pub fn unreachable_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_finite() && !is_reachable(**v)).count()
    }

    /// Row index for time `t` (must coincide with a grid node).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let s = (t - self.times.t0) / self.times.dt;
        let k = s.round();
        if (s - k).abs() > 1e-6 || k < 0.0 || k as usize > self.times.steps {
            None
        } else {
            Some(k as usize)
        }
    }

    /// `max |V - W|` over nodes of `closure(G)` and common times; `other`
    /// may live on a padded copy of this grid and on a finer time grid
    /// containing this one's nodes.
    pub fn sup_diff(&self, other: &ValueField) -> Result<f64> {
        self.sup_diff_rows(other, 0..self.rows())
    }

    pub fn sup_diff_rows(&self, other: &ValueField, rows: impl Iterator<Item = usize>) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for k in rows {
            let t = self.times.t(k);
            let ko = other.index_of(t).ok_or_else(|| Error::GridMismatch(format!("time {t} missing from other field")))?;
            let (ra, rb) = (self.row(k), other.row(ko));
            for i in 0..self.grid.len() {
                if !self.grid.inside(i) {
                    continue;
                }
                let j = other
                    .grid
                    .map_from(&self.grid, i)
                    .ok_or_else(|| Error::GridMismatch("state grids do not share a lattice".into()))?;
                let (a, b) = (ra[i], rb[j]);
                if is_reachable(a) && is_reachable(b) {
                    worst = worst.max((a - b).abs());
                } else if is_reachable(a) != is_reachable(b) {
                    return Ok(f64::INFINITY);
                }
            }
        }
        Ok(worst)
    }

    /// Minimum over reachable nodes of `closure(G)` in row `k`.
    pub fn row_min(&self, k: usize) -> Option<(usize, f64)> {
        let row = self.row(k);
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in row.iter().enumerate() {
            if self.grid.inside(i) && is_reachable(v) && best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
        best
    }

    /// Largest discrete slope `|V(x_i) - V(x_j)| / dx` between neighbouring
    /// reachable nodes of `closure(G)` in row `k`.
    pub fn lipschitz(&self, k: usize) -> f64 {
        let row = self.row(k);
        let mut best: f64 = 0.0;
        for i in 0..self.grid.len() {
            if !self.grid.inside(i) || !is_reachable(row[i]) {
                continue;
            }
            for a in 0..self.grid.dim() {
                if let Some(j) = self.grid.neighbour(i, a, 1) {
                    if self.grid.inside(j) && is_reachable(row[j]) {
                        best = best.max((row[j] - row[i]).abs() / self.grid.spacing(a));
                    }
                }
            }
        }
        best
    }
}
