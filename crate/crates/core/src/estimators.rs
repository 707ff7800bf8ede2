//! Angle estimators on an RSS grid.
//!
//! All three estimators work on one receiver's `N_tx x N_rx` RSS grid and the
//! power patterns `b = |g|^2` of the two codebooks. Only valid grid entries
//! take part in any sum.
//!
//! - **OR** picks the strongest beam pair and reports the main-lobe angles of
//!   its two beams.
//! - **LS2D** fits `RSS_{t,r} ~ alpha * b_r(theta) * b_t(phi)` in least squares.
//!   Eliminating `alpha` leaves the ratio
//!   `f(theta, phi) = (sum RSS * b_r * b_t)^2 / sum (b_r * b_t)^2`, which is
//!   maximized by exhaustive search over both angle grids. The numerator and
//!   denominator are each two dense matrix products.
//! - **LS1D** projects the grid onto one axis at a time using row- and
//!   column-normalized RSS and energy-normalized beampatterns, and maximizes
//!   `zeta(theta)` and `kappa(phi)` separately.
//!
//! Every argmax breaks ties towards the lowest index, i.e. the most negative
//! angle (AoA first for the 2D search).

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::channel::RssGrid;
use crate::codebook::{AngleGrid, BeamCodebook};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Or,
    Ls1d,
    Ls2d,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Or, Method::Ls1d, Method::Ls2d];

    pub fn name(self) -> &'static str {
        match self {
            Method::Or => "or",
            Method::Ls1d => "ls1d",
            Method::Ls2d => "ls2d",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "or" => Ok(Method::Or),
            "ls1d" => Ok(Method::Ls1d),
            "ls2d" => Ok(Method::Ls2d),
            other => Err(Error::invalid(
                "method",
                format!("unknown method {other:?}"),
            )),
        }
    }
}

/// Estimated angles in the local frames of the receive (AoA) and transmit
/// (AoD) arrays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleEstimate {
    pub method: Method,
    pub aoa_deg: f64,
    pub aod_deg: f64,
    /// Maximized objective: the peak RSS for OR, `f` for LS2D and `zeta` for
    /// LS1D.
    pub objective: f64,
}

/// One-dimensional objective over an angle axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub axis: Vec<f64>,
    pub values: Array1<f64>,
}

impl Profile {
    pub fn argmax(&self) -> usize {
        argmax_first(self.values.iter().copied())
    }

    pub fn peak_angle(&self) -> f64 {
        self.axis[self.argmax()]
    }

    /// Two-column CSV: `angle_deg,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("angle_deg,value\n");
        for (a, v) in self.axis.iter().zip(self.values.iter()) {
            let _ = writeln!(out, "{a},{v}");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// `f(theta, phi)` over the receive (rows) and transmit (columns) angle grids.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface2d {
    pub aoa_axis: Vec<f64>,
    pub aod_axis: Vec<f64>,
    pub values: Array2<f64>,
}

impl Surface2d {
    /// `(aoa index, aod index)` of the maximum.
    pub fn argmax(&self) -> (usize, usize) {
        let i = argmax_first(self.values.iter().copied());
        (i / self.values.ncols(), i % self.values.ncols())
    }

    /// CSV with the AoD axis on the first row, the AoA axis in the first column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("aoa_deg\\aod_deg");
        for a in &self.aod_axis {
            let _ = write!(out, ",{a}");
        }
        out.push('\n');
        for (theta, row) in self.aoa_axis.iter().zip(self.values.rows()) {
            let _ = write!(out, "{theta}");
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// LS1D objectives: `zeta` over AoA and `kappa` over AoD.
#[derive(Debug, Clone, PartialEq)]
pub struct Ls1dObjectives {
    pub zeta: Profile,
    pub kappa: Profile,
}

/// Index of the first maximum. NaN never wins.
fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

fn check_shapes(grid: &RssGrid, cb_tx: &BeamCodebook, cb_rx: &BeamCodebook) -> Result<()> {
    if grid.n_tx() != cb_tx.n_beams() || grid.n_rx() != cb_rx.n_beams() {
        return Err(Error::invalid(
            "grid",
            format!(
                "{}x{} grid does not match codebooks with {} TX and {} RX beams",
                grid.n_tx(),
                grid.n_rx(),
                cb_tx.n_beams(),
                cb_rx.n_beams()
            ),
        ));
    }
    if grid.n_valid() == 0 {
        return Err(Error::EmptyGrid);
    }
    Ok(())
}

/// Rough estimate from the strongest valid beam pair.
pub fn estimate_or(
    grid: &RssGrid,
    cb_tx: &BeamCodebook,
    cb_rx: &BeamCodebook,
) -> Result<AngleEstimate> {
    check_shapes(grid, cb_tx, cb_rx)?;
    let mut best = None;
    let mut best_v = f64::NEG_INFINITY;
    for ((t, r), &v) in grid.values().indexed_iter() {
        if grid.valid()[[t, r]] && v > best_v {
            best_v = v;
            best = Some((t, r));
        }
    }
    let (t, r) = best.ok_or(Error::EmptyGrid)?;
    Ok(AngleEstimate {
        method: Method::Or,
        aoa_deg: cb_rx.main_lobe_angle(r),
        aod_deg: cb_tx.main_lobe_angle(t),
        objective: best_v,
    })
}

/// Evaluate `f(theta, phi)` on the full angle grids.
///
/// With `W` the masked RSS, `M` the validity mask and `P_t`, `P_r` the power
/// patterns (beams x angles):
///
/// ```text
/// numerator   = P_r^T (W^T P_t)
/// denominator = (P_r^2)^T (M^T P_t^2)
/// ```
///
/// Angles where the denominator vanishes get `f = 0`.
pub fn ls2d_surface(
    grid: &RssGrid,
    cb_tx: &BeamCodebook,
    cb_rx: &BeamCodebook,
) -> Result<Surface2d> {
    check_shapes(grid, cb_tx, cb_rx)?;
    let w = grid.masked_values();
    let m = grid.mask_weights();
    let p_tx = cb_tx.power_matrix();
    let p_rx = cb_rx.power_matrix();
    let q_tx = p_tx.mapv(|v| v * v);
    let q_rx = p_rx.mapv(|v| v * v);

    let numerator = p_rx.t().dot(&w.t().dot(&p_tx));
    let denominator = q_rx.t().dot(&m.t().dot(&q_tx));

    let mut values = numerator;
    values.zip_mut_with(&denominator, |n, &d| {
        *n = if d > 0.0 { *n * *n / d } else { 0.0 };
    });
    Ok(Surface2d {
        aoa_axis: cb_rx.grid().angles(),
        aod_axis: cb_tx.grid().angles(),
        values,
    })
}

/// Joint least-squares estimate by grid search over `f(theta, phi)`.
pub fn estimate_ls2d(
    grid: &RssGrid,
    cb_tx: &BeamCodebook,
    cb_rx: &BeamCodebook,
) -> Result<(AngleEstimate, Surface2d)> {
    let surface = ls2d_surface(grid, cb_tx, cb_rx)?;
    let (i, j) = surface.argmax();
    let estimate = AngleEstimate {
        method: Method::Ls2d,
        aoa_deg: surface.aoa_axis[i],
        aod_deg: surface.aod_axis[j],
        objective: surface.values[[i, j]],
    };
    Ok((estimate, surface))
}

/// Beampatterns divided by their energy over the angle grid; silent beams
/// stay zero.
fn energy_normalized(power: &Array2<f64>) -> Array2<f64> {
    let mut out = power.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let energy: f64 = row.iter().map(|v| v * v).sum();
        if energy > 0.0 {
            row.mapv_inplace(|v| v / energy);
        }
    }
    out
}

/// Sum over the first axis of `w` after dividing each row by its squared norm;
/// rows with zero norm drop out. Returns `None` when every row does.
fn row_normalized_sums(w: &Array2<f64>) -> Option<Array1<f64>> {
    let mut sums = Array1::<f64>::zeros(w.ncols());
    let mut any = false;
    for row in w.rows() {
        let norm2: f64 = row.iter().map(|v| v * v).sum();
        if norm2 > 0.0 {
            any = true;
            sums.scaled_add(1.0 / norm2, &row);
        }
    }
    any.then_some(sums)
}

/// One-dimensional estimates: `theta = argmax zeta`, `phi = argmax kappa` with
///
/// ```text
/// zeta(theta) = (sum_{t,r} RSS_{t,r} / |RSS_t|^2 * b_r(theta) / |b_r|^2)^2
/// kappa(phi)  = (sum_{t,r} RSS_{t,r} / |RSS_r|^2 * b_t(phi)   / |b_t|^2)^2
/// ```
///
/// where `|RSS_t|` is the norm of TX row `t`, `|RSS_r|` that of RX column `r`
/// (valid entries only), and `|b|` the norm of a beam's pattern over the
/// angle grid.
pub fn estimate_ls1d(
    grid: &RssGrid,
    cb_tx: &BeamCodebook,
    cb_rx: &BeamCodebook,
) -> Result<(AngleEstimate, Ls1dObjectives)> {
    check_shapes(grid, cb_tx, cb_rx)?;
    let w = grid.masked_values();
    let zero_power = || Error::invalid("grid", "every valid row and column has zero power");
    // weight per RX beam from the TX-row-normalized grid, and vice versa
    let rx_weights = row_normalized_sums(&w).ok_or_else(zero_power)?;
    let tx_weights = row_normalized_sums(&w.t().to_owned()).ok_or_else(zero_power)?;

    let b_rx = energy_normalized(&cb_rx.power_matrix());
    let b_tx = energy_normalized(&cb_tx.power_matrix());
    let zeta = b_rx.t().dot(&rx_weights).mapv(|v| v * v);
    let kappa = b_tx.t().dot(&tx_weights).mapv(|v| v * v);

    let zeta = Profile {
        axis: cb_rx.grid().angles(),
        values: zeta,
    };
    let kappa = Profile {
        axis: cb_tx.grid().angles(),
        values: kappa,
    };
    let estimate = AngleEstimate {
        method: Method::Ls1d,
        aoa_deg: zeta.peak_angle(),
        aod_deg: kappa.peak_angle(),
        objective: zeta.values[zeta.argmax()],
    };
    Ok((estimate, Ls1dObjectives { zeta, kappa }))
}

/// Which angle a slice holds fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SliceAt {
    /// Fix AoA, return `f` along AoD.
    Aoa(f64),
    /// Fix AoD, return `f` along AoA.
    Aod(f64),
}

/// A row or column of the LS2D surface through an on-grid angle, scaled to
/// peak 1 (left as is when identically zero).
pub fn objective_slice(surface: &Surface2d, at: SliceAt) -> Result<Profile> {
    let locate = |axis: &[f64], angle: f64| -> Result<usize> {
        let grid = AngleGrid::from_angles(axis)?;
        grid.nearest(angle)
            .filter(|&i| (grid.angle(i) - angle).abs() < 1e-9)
            .ok_or_else(|| Error::invalid("slice", format!("{angle} is not a grid angle")))
    };
    let (axis, values) = match at {
        SliceAt::Aoa(theta) => {
            let i = locate(&surface.aoa_axis, theta)?;
            (surface.aod_axis.clone(), surface.values.row(i).to_owned())
        }
        SliceAt::Aod(phi) => {
            let j = locate(&surface.aod_axis, phi)?;
            (
                surface.aoa_axis.clone(),
                surface.values.column(j).to_owned(),
            )
        }
    };
    let peak = values.iter().copied().fold(0.0, f64::max);
    let values = if peak > 0.0 { values / peak } else { values };
    Ok(Profile { axis, values })
}

/// Run one estimator and drop its diagnostics.
pub fn estimate(
    method: Method,
    grid: &RssGrid,
    cb_tx: &BeamCodebook,
    cb_rx: &BeamCodebook,
) -> Result<AngleEstimate> {
    match method {
        Method::Or => estimate_or(grid, cb_tx, cb_rx),
        Method::Ls1d => estimate_ls1d(grid, cb_tx, cb_rx).map(|(e, _)| e),
        Method::Ls2d => estimate_ls2d(grid, cb_tx, cb_rx).map(|(e, _)| e),
    }
}
