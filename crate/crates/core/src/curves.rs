//! Recloser time–current inverse (TCI) curves and tabulated fuse curves.
//!
//! Recloser trip time follows
//!
//! ```text
//! T = a·D / ((I/Ip)^m − c) + b·D + K
//! ```
//!
//! where `D` is the time dial and `Ip` the pickup current. Fuse minimum
//! melting (MM) and total clearing (TC) curves are point tables interpolated
//! piecewise-linearly in log–log space.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower and upper bound of the time dial setting.
pub const TIME_DIAL_MIN: f64 = 0.1;
pub const TIME_DIAL_MAX: f64 = 1.0;

/// Constants of one curve family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TciConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub m: f64,
    #[serde(rename = "k")]
    pub k: f64,
}

impl TciConstants {
    pub fn is_admissible(&self) -> bool {
        self.a > 0.0 && self.m > 0.0 && self.k >= 0.0 && self.c >= 0.0 && self.b >= 0.0
    }

    /// Coefficient of the time dial at a given multiple of pickup, i.e. the
    /// slope of the curve in `D` when current and pickup are held fixed.
    /// `None` when the multiple is outside the operating region.
    pub fn dial_coefficient(&self, multiple: f64) -> Option<f64> {
        let denom = multiple.powf(self.m) - self.c;
        if !(denom > 0.0) || !denom.is_finite() {
            return None;
        }
        Some(self.a / denom + self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecloserSettings {
    pub pickup: f64,
    pub time_dial: f64,
}

/// Result of evaluating a protective device at a current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TripTime {
    Trip(f64),
    /// The current does not reach the operating region of the device.
    NoTrip,
}

impl TripTime {
    pub fn seconds(self) -> Option<f64> {
        match self {
            TripTime::Trip(t) => Some(t),
            TripTime::NoTrip => None,
        }
    }

    /// Trip time with "never operates" mapped to +∞.
    pub fn or_infinite(self) -> f64 {
        self.seconds().unwrap_or(f64::INFINITY)
    }
}

pub fn tci_time(constants: &TciConstants, settings: &RecloserSettings, i_fault: f64) -> TripTime {
    if !(settings.pickup > 0.0) || !(i_fault > 0.0) {
        return TripTime::NoTrip;
    }
    match constants.dial_coefficient(i_fault / settings.pickup) {
        Some(alpha) => TripTime::Trip(alpha * settings.time_dial + constants.k),
        None => TripTime::NoTrip,
    }
}

/// Current at which the curve reaches `t_target`; closed-form inverse of
/// [`tci_time`].
pub fn invert_tci_for_current(
    constants: &TciConstants,
    settings: &RecloserSettings,
    t_target: f64,
) -> Result<f64> {
    let d = settings.time_dial;
    let asymptote = constants.b * d + constants.k;
    if !(t_target > asymptote) {
        return Err(Error::UnreachableTime { t: t_target, asymptote });
    }
    let multiple_pow = constants.c + constants.a * d / (t_target - asymptote);
    Ok(settings.pickup * multiple_pow.powf(1.0 / constants.m))
}

/// A named curve family bound to concrete settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TciCurve {
    pub family: String,
    pub constants: TciConstants,
    pub settings: RecloserSettings,
}

impl TciCurve {
    pub fn time(&self, i: f64) -> TripTime {
        tci_time(&self.constants, &self.settings, i)
    }

    pub fn current_for_time(&self, t: f64) -> Result<f64> {
        invert_tci_for_current(&self.constants, &self.settings, t)
    }

    pub fn with_time_dial(&self, time_dial: f64) -> Self {
        let mut c = self.clone();
        c.settings.time_dial = time_dial;
        c
    }

    pub fn with_pickup(&self, pickup: f64) -> Self {
        let mut c = self.clone();
        c.settings.pickup = pickup;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShotKind {
    Fast,
    Slow,
}

/// Reclosing sequence such as F-F-S. Every fast shot uses the `fast` curve
/// and every slow shot the `slow` curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReclosingSequence {
    pub pattern: Vec<ShotKind>,
    pub fast: Option<TciCurve>,
    pub slow: Option<TciCurve>,
}

impl ReclosingSequence {
    pub fn parse_pattern(s: &str) -> Result<Vec<ShotKind>> {
        s.split('-')
            .map(|p| match p.trim() {
                "F" | "f" => Ok(ShotKind::Fast),
                "S" | "s" => Ok(ShotKind::Slow),
                other => Err(Error::InvalidArgument(format!(
                    "reclosing pattern {s:?}: unknown shot {other:?}"
                ))),
            })
            .collect()
    }

    pub fn pattern_string(&self) -> String {
        self.pattern
            .iter()
            .map(|k| match k {
                ShotKind::Fast => "F",
                ShotKind::Slow => "S",
            })
            .collect::<Vec<_>>()
            .join("-")
    }

    pub fn curve(&self, kind: ShotKind) -> Option<&TciCurve> {
        match kind {
            ShotKind::Fast => self.fast.as_ref(),
            ShotKind::Slow => self.slow.as_ref(),
        }
    }

    pub fn first_kind(&self) -> Option<ShotKind> {
        self.pattern.first().copied()
    }

    /// Curve of the first trip, the only one that sees DG contribution when
    /// DG disconnects after the first trip.
    pub fn first_curve(&self) -> Option<&TciCurve> {
        self.first_kind().and_then(|k| self.curve(k))
    }

    pub fn first_curve_mut(&mut self) -> Option<&mut TciCurve> {
        match self.first_kind()? {
            ShotKind::Fast => self.fast.as_mut(),
            ShotKind::Slow => self.slow.as_mut(),
        }
    }

    pub fn has_fast(&self) -> bool {
        self.pattern.contains(&ShotKind::Fast)
    }

    /// Structural problems with the sequence; `relay` relaxes the
    /// at-least-one-fast-shot rule for the feeder-head relay.
    pub fn problems(&self, relay: bool) -> Vec<String> {
        let mut out = Vec::new();
        if self.pattern.is_empty() {
            out.push("reclosing pattern is empty".to_string());
        }
        if !relay && !self.has_fast() {
            out.push("reclosing sequence needs at least one fast shot".to_string());
        }
        for kind in [ShotKind::Fast, ShotKind::Slow] {
            let used = self.pattern.contains(&kind);
            match (used, self.curve(kind)) {
                (true, None) => out.push(format!("pattern uses a {kind:?} shot but no {kind:?} curve is given")),
                (_, Some(c)) => {
                    if !c.constants.is_admissible() {
                        out.push(format!("{kind:?} curve constants violate a>0, m>0, b,c,K>=0"));
                    }
                    if !(c.settings.pickup > 0.0) {
                        out.push(format!("{kind:?} curve pickup must be positive"));
                    }
                    let d = c.settings.time_dial;
                    if !(TIME_DIAL_MIN..=TIME_DIAL_MAX).contains(&d) {
                        out.push(format!("{kind:?} curve time dial {d} outside [0.1, 1]"));
                    }
                }
                (false, None) => {}
            }
        }
        out
    }
}

/// Shipped curve families, keyed by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveLibrary {
    pub format: String,
    pub families: BTreeMap<String, TciConstants>,
}

pub const CURVE_LIBRARY_FORMAT: &str = "tci-curve-families/1";

const DEFAULT_CURVES: &str = include_str!("../fixtures/curves.toml");

impl CurveLibrary {
    pub fn builtin() -> Self {
        Self::from_toml_str(DEFAULT_CURVES, "<builtin curves.toml>")
            .expect("shipped curve library parses")
    }

    pub fn from_toml_str(text: &str, path: &str) -> Result<Self> {
        let lib: CurveLibrary = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        if lib.format != CURVE_LIBRARY_FORMAT {
            return Err(Error::Parse {
                path: path.to_string(),
                message: format!("expected format {CURVE_LIBRARY_FORMAT:?}, got {:?}", lib.format),
            });
        }
        for (name, c) in &lib.families {
            if !c.is_admissible() {
                return Err(Error::Parse {
                    path: path.to_string(),
                    message: format!("family {name:?} violates a>0, m>0, b,c,K>=0"),
                });
            }
        }
        Ok(lib)
    }

    pub fn get(&self, family: &str) -> Result<TciConstants> {
        self.families
            .get(family)
            .copied()
            .ok_or_else(|| Error::UnknownCurveFamily(family.to_string()))
    }

    pub fn curve(&self, family: &str, settings: RecloserSettings) -> Result<TciCurve> {
        Ok(TciCurve {
            family: family.to_string(),
            constants: self.get(family)?,
            settings,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FuseCharacteristic {
    MinimumMelting,
    TotalClearing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FuseTime {
    Melt { seconds: f64, extrapolated: bool },
    /// Below the first tabulated current: the fuse does not melt.
    NoMelt,
}

impl FuseTime {
    pub fn seconds(self) -> Option<f64> {
        match self {
            FuseTime::Melt { seconds, .. } => Some(seconds),
            FuseTime::NoMelt => None,
        }
    }
}

/// Tabulated fuse curves in per-unit current and seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuseCurve {
    pub id: String,
    pub mm: Vec<(f64, f64)>,
    pub tc: Vec<(f64, f64)>,
}

impl FuseCurve {
    pub fn new(id: impl Into<String>, mm: Vec<(f64, f64)>, tc: Vec<(f64, f64)>) -> Result<Self> {
        let curve = FuseCurve { id: id.into(), mm, tc };
        let problems = curve.problems();
        if problems.is_empty() {
            Ok(curve)
        } else {
            Err(Error::InvalidArgument(format!("fuse {}: {}", curve.id, problems.join("; "))))
        }
    }

    pub fn points(&self, which: FuseCharacteristic) -> &[(f64, f64)] {
        match which {
            FuseCharacteristic::MinimumMelting => &self.mm,
            FuseCharacteristic::TotalClearing => &self.tc,
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, pts) in [("MM", &self.mm), ("TC", &self.tc)] {
            if pts.len() < 2 {
                out.push(format!("{name} curve needs at least 2 points"));
                continue;
            }
            if pts.iter().any(|&(i, t)| !(i > 0.0) || !(t > 0.0)) {
                out.push(format!("{name} curve has nonpositive entries"));
            }
            for w in pts.windows(2) {
                if !(w[1].0 > w[0].0) {
                    out.push(format!("{name} currents must strictly increase"));
                    break;
                }
                if !(w[1].1 < w[0].1) {
                    out.push(format!("{name} times must strictly decrease"));
                    break;
                }
            }
        }
        if out.is_empty() {
            // MM below TC wherever both tables are defined.
            let lo = self.mm[0].0.max(self.tc[0].0);
            let hi = self.mm.last().unwrap().0.min(self.tc.last().unwrap().0);
            let mut grid: Vec<f64> = self
                .mm
                .iter()
                .chain(self.tc.iter())
                .map(|p| p.0)
                .filter(|&i| i >= lo && i <= hi)
                .collect();
            grid.sort_by(f64::total_cmp);
            for i in grid {
                let mm = fuse_time(self, FuseCharacteristic::MinimumMelting, i).seconds();
                let tc = fuse_time(self, FuseCharacteristic::TotalClearing, i).seconds();
                if let (Some(mm), Some(tc)) = (mm, tc) {
                    if mm > tc {
                        out.push(format!("MM time exceeds TC time at {i}"));
                        break;
                    }
                }
            }
        }
        out
    }

    pub fn time(&self, which: FuseCharacteristic, i: f64) -> FuseTime {
        fuse_time(self, which, i)
    }

    /// Current at which the chosen curve reaches `t`; inverse of the log–log
    /// interpolation. `None` when `t` is slower than the first tabulated
    /// point (the fuse never takes that long to melt once it melts).
    pub fn current_for_time(&self, which: FuseCharacteristic, t: f64) -> Option<f64> {
        let pts = self.points(which);
        if !(t > 0.0) || t > pts[0].1 {
            return None;
        }
        let seg = pts
            .windows(2)
            .position(|w| t <= w[0].1 && t >= w[1].1)
            .unwrap_or(pts.len() - 2);
        let (i0, t0) = pts[seg];
        let (i1, t1) = pts[seg + 1];
        let slope = (t1.ln() - t0.ln()) / (i1.ln() - i0.ln());
        Some((i0.ln() + (t.ln() - t0.ln()) / slope).exp())
    }

    /// Scales every tabulated current, e.g. amperes to per-unit.
    pub fn scaled_currents(&self, factor: f64) -> Self {
        let scale = |pts: &[(f64, f64)]| pts.iter().map(|&(i, t)| (i * factor, t)).collect();
        FuseCurve { id: self.id.clone(), mm: scale(&self.mm), tc: scale(&self.tc) }
    }
}

/// Log–log piecewise-linear interpolation; beyond the last point the last
/// segment is extended and the result flagged.
pub fn fuse_time(curve: &FuseCurve, which: FuseCharacteristic, i_fault: f64) -> FuseTime {
    let pts = curve.points(which);
    if !(i_fault >= pts[0].0) {
        return FuseTime::NoMelt;
    }
    let last = pts.len() - 1;
    let (seg, extrapolated) = if i_fault > pts[last].0 {
        (last - 1, true)
    } else {
        let seg = pts.windows(2).position(|w| i_fault <= w[1].0).unwrap_or(last - 1);
        (seg, false)
    };
    let (i0, t0) = pts[seg];
    let (i1, t1) = pts[seg + 1];
    if i_fault == i0 {
        return FuseTime::Melt { seconds: t0, extrapolated };
    }
    if i_fault == i1 {
        return FuseTime::Melt { seconds: t1, extrapolated };
    }
    let s = (i_fault.ln() - i0.ln()) / (i1.ln() - i0.ln());
    let seconds = (t0.ln() + s * (t1.ln() - t0.ln())).exp();
    FuseTime::Melt { seconds, extrapolated }
}
