//! Sensor geometry and measurement covariance models.
//!
//! The simulated camera has a sector field of view and an isotropic noise
//! intensity that is smallest at a preferred range straight ahead. A
//! tabulated map built from calibration samples can stand in for the
//! analytic one.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::SensingError;
use crate::estimation::{wrap_angle, CovMat, GaussianEstimate, RelVec};

/// Range resolution of the best-viewpoint scan for tabulated maps, bl.
pub const VIEWPOINT_RANGE_STEP: f64 = 0.1;
/// Bearing resolution of the best-viewpoint scan for tabulated maps, degrees.
pub const VIEWPOINT_BEARING_STEP_DEG: f64 = 1.0;

/// Sector-shaped field of view anchored at a pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorFov {
    pub range: f64,
    pub half_angle: f64,
    pub origin: RelVec,
    pub heading: f64,
}

impl SectorFov {
    /// `aperture` is the full sector angle in radians.
    pub fn new(range: f64, aperture: f64) -> Self {
        assert!(range > 0.0, "sensing range must be positive");
        assert!(aperture > 0.0 && aperture <= 2.0 * PI + 1e-12, "aperture must lie in (0, 2pi]");
        Self { range, half_angle: 0.5 * aperture, origin: RelVec::ZERO, heading: 0.0 }
    }

    pub fn at(mut self, origin: RelVec, heading: f64) -> Self {
        self.origin = origin;
        self.heading = heading;
        self
    }

    pub fn aperture(&self) -> f64 {
        2.0 * self.half_angle
    }

    pub fn contains(&self, point: RelVec) -> bool {
        let d = point - self.origin;
        let dist = d.norm();
        if dist > self.range {
            return false;
        }
        if dist == 0.0 {
            return true;
        }
        wrap_angle(d.bearing() - self.heading).abs() <= self.half_angle
    }

    /// Polar coordinates of `point` relative to the sensor pose.
    pub fn to_polar(&self, point: RelVec) -> PolarMeasurement {
        let d = point - self.origin;
        PolarMeasurement::planar(d.norm(), wrap_angle(d.bearing() - self.heading))
    }

    /// Longest straight segment that fits inside the sector.
    pub fn diameter(&self) -> f64 {
        let aperture = self.aperture();
        let chord = if aperture >= PI { 2.0 * self.range } else { 2.0 * self.range * self.half_angle.sin() };
        chord.max(self.range)
    }
}

/// Range, bearing and (for the 3D utility only) elevation of a target.
///
/// Planar measurements carry an elevation of pi/2, which makes the
/// spherical conversion collapse onto the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarMeasurement {
    pub range: f64,
    pub bearing: f64,
    pub elevation: f64,
}

impl PolarMeasurement {
    pub fn planar(range: f64, bearing: f64) -> Self {
        Self { range, bearing, elevation: FRAC_PI_2 }
    }

    /// Cartesian offset in the sensor frame.
    pub fn to_sensor_frame(&self) -> RelVec {
        RelVec::from_polar(self.range, self.bearing)
    }
}

/// Isotropic camera noise `eta = k1 (r - r_best)^2 + k2 phi^4`, clamped below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticCovMap {
    pub k1: f64,
    pub k2: f64,
    pub best_range: f64,
    pub eta_floor: f64,
}

impl AnalyticCovMap {
    pub const DEFAULT_ETA_FLOOR: f64 = 1e-3;

    pub fn new(k1: f64, k2: f64, best_range: f64) -> Self {
        Self { k1, k2, best_range, eta_floor: Self::DEFAULT_ETA_FLOOR }
    }

    pub fn eta(&self, meas: &PolarMeasurement) -> f64 {
        let dr = meas.range - self.best_range;
        let raw = self.k1 * dr * dr + self.k2 * meas.bearing.powi(4);
        raw.max(self.eta_floor)
    }
}

pub fn analytic_cov_at(map: &AnalyticCovMap, meas: &PolarMeasurement) -> CovMat {
    // T_r diag(eta, eta) T_r^T == eta * I, so the bearing rotation drops out.
    CovMat::isotropic(map.eta(meas))
}

/// Raw estimate in the agent's local frame; `heading` is the sensor heading
/// in that frame.
pub fn polar_to_estimate(meas: &PolarMeasurement, map: &AnalyticCovMap, heading: f64) -> GaussianEstimate {
    let mean = RelVec::from_polar(meas.range, meas.bearing + heading);
    GaussianEstimate::new(mean, analytic_cov_at(map, meas))
}

/// One calibration sample: grid point in the sensor frame and its covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationEntry {
    pub point: RelVec,
    pub cov: CovMat,
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationRow {
    r: f64,
    bearing_deg: f64,
    c11: f64,
    c12: f64,
    c22: f64,
}

/// Tabulated covariance map with N-nearest inverse-distance interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    entries: Vec<CalibrationEntry>,
    pub n_nearest: usize,
    pub r_max: f64,
}

impl CalibrationTable {
    pub fn new(entries: Vec<CalibrationEntry>, n_nearest: usize, r_max: f64) -> Result<Self, SensingError> {
        if entries.is_empty() {
            return Err(SensingError::EmptyTable);
        }
        if n_nearest == 0 {
            return Err(SensingError::InvalidEntry("n_nearest must be at least 1".into()));
        }
        if let Some(bad) = entries.iter().find(|e| !e.cov.is_psd() || !e.cov.is_finite() || !e.point.is_finite()) {
            return Err(SensingError::InvalidEntry(format!("{bad:?}")));
        }
        Ok(Self { entries, n_nearest, r_max })
    }

    /// Sample an analytic map on a polar grid (ranges x bearings), the way
    /// the pan/tilt calibration rig would.
    pub fn sample_analytic(
        map: &AnalyticCovMap,
        fov: &SectorFov,
        ranges: &[f64],
        bearings: &[f64],
        n_nearest: usize,
    ) -> Result<Self, SensingError> {
        let mut entries = Vec::with_capacity(ranges.len() * bearings.len());
        for &r in ranges {
            for &b in bearings {
                let meas = PolarMeasurement::planar(r, b);
                entries.push(CalibrationEntry { point: meas.to_sensor_frame(), cov: analytic_cov_at(map, &meas) });
            }
        }
        Self::new(entries, n_nearest, fov.diameter())
    }

    pub fn entries(&self) -> &[CalibrationEntry] {
        &self.entries
    }

    pub fn read_csv<R: Read>(reader: R, n_nearest: usize, r_max: f64) -> Result<Self, SensingError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut entries = Vec::new();
        for row in rdr.deserialize() {
            let row: CalibrationRow = row?;
            entries.push(CalibrationEntry {
                point: RelVec::from_polar(row.r, row.bearing_deg.to_radians()),
                cov: CovMat::new(row.c11, row.c12, row.c22),
            });
        }
        Self::new(entries, n_nearest, r_max)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SensingError> {
        let mut wtr = csv::Writer::from_writer(writer);
        for e in &self.entries {
            wtr.serialize(CalibrationRow {
                r: e.point.norm(),
                bearing_deg: e.point.bearing().to_degrees(),
                c11: e.cov.xx,
                c12: e.cov.xy,
                c22: e.cov.yy,
            })?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn interpolate_cov(table: &CalibrationTable, q: RelVec) -> Result<CovMat, SensingError> {
    if table.entries.is_empty() {
        return Err(SensingError::EmptyTable);
    }
    let mut ranked: Vec<(f64, usize)> =
        table.entries.iter().enumerate().map(|(i, e)| ((q - e.point).norm(), i)).collect();
    let n = table.n_nearest.min(ranked.len());
    if n < ranked.len() {
        ranked.select_nth_unstable_by(n - 1, |a, b| a.partial_cmp(b).expect("finite distances"));
        ranked.truncate(n);
    }
    let mut weight_sum = 0.0;
    let mut acc = CovMat::ZERO;
    for &(dist, i) in &ranked {
        let w = (1.0 - dist / table.r_max).max(0.0);
        weight_sum += w;
        acc += table.entries[i].cov.scale(w);
    }
    if weight_sum > 0.0 {
        return Ok(acc.scale(1.0 / weight_sum));
    }
    // Every neighbour sits at or beyond r_max: fall back to a plain average.
    let mut acc = CovMat::ZERO;
    for &(_, i) in &ranked {
        acc += table.entries[i].cov;
    }
    Ok(acc.scale(1.0 / ranked.len() as f64))
}

/// Bias-plus-spread covariance from (measured, true) calibration pairs.
pub fn conservative_cov(samples: &[(RelVec, RelVec)]) -> Result<CovMat, SensingError> {
    if samples.len() < 2 {
        return Err(SensingError::InsufficientSamples { needed: 2, got: samples.len() });
    }
    let n = samples.len() as f64;
    let errors: Vec<RelVec> = samples.iter().map(|(m, t)| *m - *t).collect();
    let mean = errors.iter().fold(RelVec::ZERO, |acc, e| acc + *e) * (1.0 / n);
    let (mut sq_x, mut sq_y) = (0.0, 0.0);
    let (mut cxx, mut cxy, mut cyy) = (0.0, 0.0, 0.0);
    for e in &errors {
        sq_x += e.x * e.x;
        sq_y += e.y * e.y;
        let d = *e - mean;
        cxx += d.x * d.x;
        cxy += d.x * d.y;
        cyy += d.y * d.y;
    }
    let bias = CovMat::diag(sq_x / n, sq_y / n);
    let spread = CovMat::new(cxx, cxy, cyy).scale(1.0 / (n - 1.0));
    Ok(bias + spread)
}

/// Normalised image-plane bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }
}

/// Camera gains converting a bounding box into range and angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxGains {
    pub k_range: f64,
    pub k_azimuth: f64,
    pub k_elevation: f64,
}

pub fn bbox_to_polar(bb: &BoundingBox, gains: &BoxGains) -> Result<PolarMeasurement, SensingError> {
    let area = bb.area();
    if !(bb.x_max > bb.x_min && bb.y_max > bb.y_min) || !(area > 0.0) {
        return Err(SensingError::ZeroArea);
    }
    Ok(PolarMeasurement {
        range: (gains.k_range / area).sqrt(),
        bearing: gains.k_azimuth * (bb.x_max + bb.x_min) / 2.0,
        elevation: gains.k_elevation * (bb.y_max + bb.y_min) / 2.0,
    })
}

pub fn spherical_to_euclidean(meas: &PolarMeasurement) -> [f64; 3] {
    let (st, ct) = meas.bearing.sin_cos();
    let (sp, cp) = meas.elevation.sin_cos();
    [meas.range * ct * sp, meas.range * st * sp, meas.range * cp]
}

/// Either covariance map the simulator can run with.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceMap {
    Analytic(AnalyticCovMap),
    Table(CalibrationTable),
}

impl CovarianceMap {
    pub fn cov_at(&self, meas: &PolarMeasurement) -> CovMat {
        match self {
            CovarianceMap::Analytic(map) => analytic_cov_at(map, meas),
            CovarianceMap::Table(table) => {
                interpolate_cov(table, meas.to_sensor_frame()).expect("tables are validated non-empty")
            }
        }
    }
}

/// The point of the sensor-frame FOV with the smallest measurement noise.
pub fn best_viewpoint(map: &CovarianceMap, fov: &SectorFov) -> RelVec {
    match map {
        CovarianceMap::Analytic(m) if m.k1 > 0.0 => RelVec::new(m.best_range.clamp(0.0, fov.range), 0.0),
        CovarianceMap::Analytic(_) => RelVec::new(VIEWPOINT_RANGE_STEP.min(fov.range), 0.0),
        CovarianceMap::Table(_) => scan_viewpoint(|meas| map.cov_at(meas).det(), fov),
    }
}

/// Grid scan used for tabulated maps. Ties go to the smaller range, then the
/// smaller absolute bearing, then the more negative bearing.
pub fn scan_viewpoint(cost: impl Fn(&PolarMeasurement) -> f64, fov: &SectorFov) -> RelVec {
    let n_range = (fov.range / VIEWPOINT_RANGE_STEP + 1e-9).floor() as i64;
    let max_deg = (fov.half_angle.to_degrees() / VIEWPOINT_BEARING_STEP_DEG + 1e-9).floor() as i64;
    let mut best: Option<(f64, PolarMeasurement)> = None;
    for ir in 1..=n_range {
        let range = ir as f64 * VIEWPOINT_RANGE_STEP;
        // |bearing| ascending, negative side first: the scan order is the tie rule
        for ib in (0..=max_deg).flat_map(|b| if b == 0 { vec![0] } else { vec![-b, b] }) {
            let meas = PolarMeasurement::planar(range, (ib as f64 * VIEWPOINT_BEARING_STEP_DEG).to_radians());
            let c = cost(&meas);
            if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
                best = Some((c, meas));
            }
        }
    }
    best.map(|(_, m)| m.to_sensor_frame()).unwrap_or(RelVec::ZERO)
}
