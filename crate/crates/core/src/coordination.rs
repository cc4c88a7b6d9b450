//! Coordination range and margin checks for device pairs.
//!
//! A pair has a primary device, which must operate first, and a backup. The
//! currents the two devices see are linked: the sweep runs over the current
//! `u` seen by the upstream device, and the downstream device sees
//! `u + ΔI`, where `ΔI` is the DG contribution fed in between them. For
//! fuse saving the primary is the upstream recloser's first (fast) curve
//! and the backup is the downstream fuse's minimum-melting curve; for a
//! recloser pair the primary is the downstream recloser.

use serde::{Deserialize, Serialize};

use crate::curves::{FuseCharacteristic, FuseCurve, TciCurve, TripTime};
use crate::error::{Error, Result};
use crate::fault::DeviceRef;

pub const DEFAULT_MARGIN_FR: f64 = 0.1;
pub const DEFAULT_MARGIN_RR: f64 = 0.3;
pub const DEFAULT_POINTS_PER_DECADE: usize = 200;

/// Operating characteristic of one device in a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Characteristic {
    Tci(TciCurve),
    Fuse { curve: FuseCurve, which: FuseCharacteristic },
}

impl Characteristic {
    /// Operating time, `None` when the device does not operate.
    pub fn time(&self, i: f64) -> Option<f64> {
        match self {
            Characteristic::Tci(c) => c.time(i).seconds(),
            Characteristic::Fuse { curve, which } => curve.time(*which, i).seconds(),
        }
    }

    /// Current at which the device operates in `t` seconds.
    pub fn current_for_time(&self, t: f64) -> Option<f64> {
        match self {
            Characteristic::Tci(c) => c.current_for_time(t).ok(),
            Characteristic::Fuse { curve, which } => curve.current_for_time(*which, t),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Characteristic::Tci(c) => format!("{} D={}", c.family, c.settings.time_dial),
            Characteristic::Fuse { curve, which: FuseCharacteristic::MinimumMelting } => format!("{} MM", curve.id),
            Characteristic::Fuse { curve, which: FuseCharacteristic::TotalClearing } => format!("{} TC", curve.id),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Characteristic::Tci(_) => Vec::new(),
            Characteristic::Fuse { curve, which } => curve.points(*which).iter().map(|p| p.0).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairKind {
    FuseRecloser,
    RecloserRecloser,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinationPair {
    pub name: String,
    pub kind: PairKind,
    pub primary: DeviceRef,
    pub backup: DeviceRef,
    pub primary_curve: Characteristic,
    pub backup_curve: Characteristic,
    pub margin_required: f64,
    /// Range of the upstream device's current, `(I_min, I_max)`.
    pub range: (f64, f64),
    /// Extra current seen by the downstream device.
    pub disparity: f64,
    /// Whether the primary is the downstream device of the two.
    pub primary_downstream: bool,
    /// Which sides use a recloser's first curve, the curve whose time dial
    /// the settings optimization adjusts.
    #[serde(default)]
    pub tunable: (bool, bool),
}

impl CoordinationPair {
    pub fn primary_current(&self, u: f64) -> f64 {
        if self.primary_downstream {
            u + self.disparity
        } else {
            u
        }
    }

    pub fn backup_current(&self, u: f64) -> f64 {
        if self.primary_downstream {
            u
        } else {
            u + self.disparity
        }
    }

    /// Backup time minus primary time at upstream current `u`. A primary that
    /// never operates counts as −∞; a backup that never operates as +∞.
    pub fn gap(&self, u: f64) -> f64 {
        match self.primary_curve.time(self.primary_current(u)) {
            None => f64::NEG_INFINITY,
            Some(tp) => match self.backup_curve.time(self.backup_current(u)) {
                None => f64::INFINITY,
                Some(tb) => tb - tp,
            },
        }
    }

    /// Whether the primary operates no later than the backup at `u`.
    pub fn ordered_at(&self, u: f64) -> bool {
        self.gap(u) >= 0.0
    }

    pub fn with_disparity(&self, disparity: f64) -> Self {
        CoordinationPair { disparity, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub points_per_decade: usize,
    /// Coarsest grid accepted.
    pub min_points_per_decade: usize,
    /// Check the margin for primary and backup currents varying
    /// independently over the range rather than linked by the disparity.
    pub independent_currents: bool,
    pub margin_tolerance: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            points_per_decade: DEFAULT_POINTS_PER_DECADE,
            min_points_per_decade: 20,
            independent_currents: false,
            margin_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode")]
pub enum FailureMode {
    None,
    RangeExceeded { current: f64, inequality: String },
    MarginViolated { current: f64, inequality: String },
}

impl FailureMode {
    pub fn name(&self) -> &'static str {
        match self {
            FailureMode::None => "None",
            FailureMode::RangeExceeded { .. } => "RangeExceeded",
            FailureMode::MarginViolated { .. } => "MarginViolated",
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, FailureMode::None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub current: f64,
    pub i_primary: f64,
    pub i_backup: f64,
    pub t_primary: Option<f64>,
    pub t_backup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinationReport {
    pub pair: String,
    pub kind: PairKind,
    pub primary: DeviceRef,
    pub backup: DeviceRef,
    pub margin_required: f64,
    pub range: (f64, f64),
    pub disparity: f64,
    pub range_ok: bool,
    pub margin_ok: bool,
    pub worst_margin: f64,
    pub worst_current: f64,
    pub failure_mode: FailureMode,
    /// Extra backup time caused by the disparity at the top of the range
    /// (recloser pairs only).
    pub backup_delay: Option<f64>,
    #[serde(skip)]
    pub samples: Vec<CurveSample>,
}

/// Log-spaced grid over `range` with both endpoints and any `extra` points
/// inside the range, sorted and deduplicated.
pub fn sweep_grid(range: (f64, f64), cfg: &SweepConfig, extra: &[f64]) -> Result<Vec<f64>> {
    if cfg.points_per_decade < cfg.min_points_per_decade.max(1) {
        return Err(Error::SweepTooCoarse { got: cfg.points_per_decade, need: cfg.min_points_per_decade.max(1) });
    }
    let (lo, hi) = range;
    let decades = (hi / lo).log10();
    let n = ((decades * cfg.points_per_decade as f64).ceil() as usize).max(1);
    let mut out: Vec<f64> = (0..=n).map(|k| lo * 10f64.powf(decades * k as f64 / n as f64)).collect();
    out[0] = lo;
    out[n] = hi;
    out.extend(extra.iter().copied().filter(|&x| x > lo && x < hi));
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

fn check_range(pair: &CoordinationPair) -> Result<()> {
    let (lo, hi) = pair.range;
    if !(lo > 0.0) || !(lo < hi) || !hi.is_finite() {
        return Err(Error::DegenerateRange { pair: pair.name.clone(), min: lo, max: hi });
    }
    Ok(())
}

/// The sweep grid used for a pair.
pub fn pair_grid(pair: &CoordinationPair, cfg: &SweepConfig) -> Result<Vec<f64>> {
    check_range(pair)?;
    sweep_grid(pair.range, cfg, &pair_breakpoints(pair))
}

/// Fuse breakpoints translated to upstream-current coordinates, so the
/// sweep hits every kink of the piecewise curves.
fn pair_breakpoints(pair: &CoordinationPair) -> Vec<f64> {
    let mut out = Vec::new();
    for (curve, downstream) in [(&pair.primary_curve, pair.primary_downstream), (&pair.backup_curve, !pair.primary_downstream)] {
        let shift = if downstream { pair.disparity } else { 0.0 };
        out.extend(curve.breakpoints().into_iter().map(|i| i - shift));
    }
    out
}

/// Golden-section refinement of the gap minimum on `[a, b]` in log space.
fn refine_minimum(pair: &CoordinationPair, a: f64, b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (a.ln(), b.ln());
    let f = |x: f64| pair.gap(x.exp());
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1.exp(), f1)
    } else {
        (x2.exp(), f2)
    }
}

/// Smallest gap over the linked sweep, with the current where it occurs.
pub fn worst_margin(pair: &CoordinationPair, cfg: &SweepConfig) -> Result<(f64, f64)> {
    check_range(pair)?;
    let grid = sweep_grid(pair.range, cfg, &pair_breakpoints(pair))?;
    let (k, worst) = grid
        .iter()
        .map(|&u| pair.gap(u))
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, g)| if g < acc.1 { (k, g) } else { acc });
    if !worst.is_finite() {
        return Ok((grid[k], worst));
    }
    let a = grid[k.saturating_sub(1)];
    let b = grid[(k + 1).min(grid.len() - 1)];
    let (u, g) = if a < b { refine_minimum(pair, a, b) } else { (grid[k], worst) };
    Ok(if g < worst { (u, g) } else { (grid[k], worst) })
}

pub fn check_pair(pair: &CoordinationPair, cfg: &SweepConfig) -> Result<CoordinationReport> {
    check_range(pair)?;
    let (lo, hi) = pair.range;
    let grid = sweep_grid(pair.range, cfg, &pair_breakpoints(pair))?;

    let range_ok = pair.ordered_at(lo) && pair.ordered_at(hi);
    let (mut worst_current, mut worst) = worst_margin(pair, cfg)?;
    if cfg.independent_currents {
        // Slowest primary at the bottom of the range against the fastest
        // backup at the top.
        let tp = pair.primary_curve.time(pair.primary_current(lo));
        let tb = pair.backup_curve.time(pair.backup_current(hi));
        let g = match (tp, tb) {
            (None, _) => f64::NEG_INFINITY,
            (Some(_), None) => f64::INFINITY,
            (Some(tp), Some(tb)) => tb - tp,
        };
        if g < worst {
            worst = g;
            worst_current = hi;
        }
    }
    let margin_ok = worst >= pair.margin_required - cfg.margin_tolerance;

    let (up, down) = match pair.kind {
        PairKind::FuseRecloser => ("I_R", "dI_FR"),
        PairKind::RecloserRecloser => ("I_R", "dI_RR"),
    };
    let failure_mode = if !range_ok {
        let at = if pair.ordered_at(hi) { lo } else { hi };
        let limit = pair
            .primary_curve
            .time(pair.primary_current(at))
            .and_then(|t| pair.backup_curve.current_for_time(t));
        let inequality = match limit {
            Some(limit) if at == hi => format!(
                "{up} + {down} > I_max: {:.6} + {:.6} > {:.6}",
                at, pair.disparity, limit
            ),
            Some(limit) => format!("{up} + {down} < I_min: {:.6} + {:.6} < {:.6}", at, pair.disparity, limit),
            None => format!("primary does not operate before backup at {up} = {at:.6}"),
        };
        FailureMode::RangeExceeded { current: at, inequality }
    } else if !margin_ok {
        FailureMode::MarginViolated {
            current: worst_current,
            inequality: format!(
                "T_backup - T_primary = {:.6} s < {:.6} s at {up} = {:.6}",
                worst, pair.margin_required, worst_current
            ),
        }
    } else {
        FailureMode::None
    };

    let backup_delay = match (pair.kind, &pair.backup_curve) {
        (PairKind::RecloserRecloser, Characteristic::Tci(b)) => {
            backup_delay(b, pair.disparity, pair.primary_current(hi)).seconds()
        }
        _ => None,
    };

    let samples = grid
        .iter()
        .map(|&u| {
            let (ip, ib) = (pair.primary_current(u), pair.backup_current(u));
            CurveSample {
                current: u,
                i_primary: ip,
                i_backup: ib,
                t_primary: pair.primary_curve.time(ip),
                t_backup: pair.backup_curve.time(ib),
            }
        })
        .collect();

    Ok(CoordinationReport {
        pair: pair.name.clone(),
        kind: pair.kind,
        primary: pair.primary.clone(),
        backup: pair.backup.clone(),
        margin_required: pair.margin_required,
        range: pair.range,
        disparity: pair.disparity,
        range_ok,
        margin_ok,
        worst_margin: worst,
        worst_current,
        failure_mode,
        backup_delay,
        samples,
    })
}

/// Extra time the backup recloser takes because DG between the pair feeds
/// the primary: the backup sees `i_primary − ΔI` instead of `i_primary`.
pub fn backup_delay(backup: &TciCurve, delta_rr: f64, i_primary: f64) -> TripTime {
    match (backup.time(i_primary - delta_rr), backup.time(i_primary)) {
        (TripTime::Trip(with_dg), TripTime::Trip(without)) => TripTime::Trip(with_dg - without),
        _ => TripTime::NoTrip,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentMargin {
    /// Upstream current where the check binds (top of the range).
    pub binding_current: f64,
    /// Downstream current at which the backup operates together with the
    /// primary.
    pub crossing_current: f64,
    /// Downstream current at which the backup lags the primary by `delta_t`.
    pub margin_crossing_current: f64,
    /// Current equivalent of the time margin.
    pub margin_current: f64,
    /// Largest disparity that keeps the margin at the binding current.
    pub bound: f64,
}

/// Largest disparity the pair tolerates at the top of its range while the
/// backup still lags the primary by `delta_t`.
pub fn coordination_current_margin(pair: &CoordinationPair, delta_t: f64) -> Result<CurrentMargin> {
    if !(delta_t >= 0.0) {
        return Err(Error::InvalidArgument(format!("delta_t must be nonnegative, got {delta_t}")));
    }
    let u = pair.range.1;
    let i_first = pair.primary_current(u);
    let t_first = pair.primary_curve.time(i_first).ok_or_else(|| Error::UnreachableMargin {
        delta_t,
        curve: pair.primary_curve.label(),
    })?;
    let unreachable = || Error::UnreachableMargin { delta_t, curve: pair.backup_curve.label() };
    let crossing = pair.backup_curve.current_for_time(t_first).ok_or_else(unreachable)?;
    let at_margin = pair.backup_curve.current_for_time(t_first + delta_t).ok_or_else(unreachable)?;
    Ok(CurrentMargin {
        binding_current: u,
        crossing_current: crossing,
        margin_crossing_current: at_margin,
        margin_current: crossing - at_margin,
        bound: at_margin - u,
    })
}

/// Largest disparity for which the linked margin holds over the whole
/// range: the minimum over the sweep of the downstream current that lags
/// the upstream primary by `delta_t`, less the upstream current. Applies to
/// pairs whose primary is the upstream device.
pub fn disparity_limit(pair: &CoordinationPair, delta_t: f64, cfg: &SweepConfig) -> Result<f64> {
    check_range(pair)?;
    if pair.primary_downstream {
        return Err(Error::InvalidArgument(format!(
            "{}: disparity only speeds up a downstream primary and has no upper limit",
            pair.name
        )));
    }
    let grid = sweep_grid(pair.range, cfg, &pair_breakpoints(pair))?;
    let mut limit = f64::INFINITY;
    for u in grid {
        let t = pair
            .primary_curve
            .time(u)
            .ok_or_else(|| Error::UnreachableMargin { delta_t, curve: pair.primary_curve.label() })?;
        let i = pair
            .backup_curve
            .current_for_time(t + delta_t)
            .ok_or_else(|| Error::UnreachableMargin { delta_t, curve: pair.backup_curve.label() })?;
        limit = limit.min(i - u);
    }
    Ok(limit)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::curves::{CurveLibrary, RecloserSettings};

    pub(crate) fn fuse() -> FuseCurve {
        // A K-rated-like shape in per-unit current.
        FuseCurve::new(
            "F1",
            vec![(0.5, 300.0), (1.0, 10.0), (2.0, 1.0), (4.0, 0.2), (8.0, 0.05), (16.0, 0.02)],
            vec![(0.6, 600.0), (1.2, 20.0), (2.4, 2.0), (4.8, 0.4), (9.6, 0.1), (19.2, 0.04)],
        )
        .unwrap()
    }

    pub(crate) fn recloser(dial: f64) -> TciCurve {
        CurveLibrary::builtin()
            .curve("extremely_inverse", RecloserSettings { pickup: 0.4, time_dial: dial })
            .unwrap()
    }

    fn slow_recloser(dial: f64) -> TciCurve {
        CurveLibrary::builtin()
            .curve("very_inverse", RecloserSettings { pickup: 0.4, time_dial: dial })
            .unwrap()
    }

    pub(crate) fn fr_pair(dial: f64, range: (f64, f64), disparity: f64) -> CoordinationPair {
        CoordinationPair {
            name: "R1/F1".into(),
            kind: PairKind::FuseRecloser,
            primary: DeviceRef::Recloser("R1".into()),
            backup: DeviceRef::Fuse("F1".into()),
            primary_curve: Characteristic::Tci(recloser(dial)),
            backup_curve: Characteristic::Fuse { curve: fuse(), which: FuseCharacteristic::MinimumMelting },
            margin_required: DEFAULT_MARGIN_FR,
            range,
            disparity,
            primary_downstream: false,
            tunable: (true, false),
        }
    }

    pub(crate) fn rr_pair(backup_dial: f64, primary_dial: f64, disparity: f64) -> CoordinationPair {
        CoordinationPair {
            name: "R1/R2".into(),
            kind: PairKind::RecloserRecloser,
            primary: DeviceRef::Recloser("R2".into()),
            backup: DeviceRef::Recloser("R1".into()),
            primary_curve: Characteristic::Tci(recloser(primary_dial)),
            backup_curve: Characteristic::Tci(slow_recloser(backup_dial)),
            margin_required: DEFAULT_MARGIN_RR,
            range: (2.0, 8.0),
            disparity,
            primary_downstream: true,
            tunable: (true, true),
        }
    }

    /// Exhaustive evaluation of the ordering at the endpoints and the
    /// linked margin on a fine log grid.
    fn brute(pair: &CoordinationPair, n: usize) -> &'static str {
        let (lo, hi) = pair.range;
        if !(pair.gap(lo) >= 0.0 && pair.gap(hi) >= 0.0) {
            return "RangeExceeded";
        }
        let worst = (0..n)
            .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
            .map(|u| pair.gap(u))
            .fold(f64::INFINITY, f64::min);
        if worst >= pair.margin_required - 1e-6 {
            "None"
        } else {
            "MarginViolated"
        }
    }

    #[test]
    fn coordinated_pair_has_no_failure() {
        let r = check_pair(&fr_pair(0.1, (1.5, 4.0), 0.0), &SweepConfig::default()).unwrap();
        assert_eq!(r.failure_mode, FailureMode::None, "{r:?}");
        assert!(r.worst_margin >= 0.1);
        assert!(r.samples.iter().all(|s| s.t_primary.unwrap() < s.t_backup.unwrap()));
    }

    #[test]
    fn large_disparity_exceeds_range() {
        let r = check_pair(&fr_pair(0.1, (1.5, 4.0), 6.0), &SweepConfig::default()).unwrap();
        assert_eq!(r.failure_mode.name(), "RangeExceeded");
        assert!(!r.range_ok);
        match r.failure_mode {
            FailureMode::RangeExceeded { current, inequality } => {
                assert_eq!(current, 4.0);
                assert!(inequality.starts_with("I_R + dI_FR > I_max"));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn moderate_disparity_violates_margin() {
        // Ordered at both ends but with less than 0.1 s to spare at the top.
        let pair = fr_pair(0.1, (1.5, 4.0), 1.2);
        let r = check_pair(&pair, &SweepConfig::default()).unwrap();
        assert!(r.range_ok);
        assert_eq!(r.failure_mode.name(), "MarginViolated", "{r:?}");
    }

    #[test]
    fn verdicts_match_exhaustive_grid() {
        let cfg = SweepConfig::default();
        for dial in [0.1, 0.2, 0.4, 0.8] {
            for k in 0..30 {
                let pair = fr_pair(dial, (1.2, 6.0), 0.1 * k as f64);
                assert_eq!(check_pair(&pair, &cfg).unwrap().failure_mode.name(), brute(&pair, 10_000));
            }
        }
        for d in [0.0, 0.5, 1.0] {
            for (b, p) in [(0.5, 0.1), (0.2, 0.1), (0.3, 0.3)] {
                let pair = rr_pair(b, p, d);
                assert_eq!(check_pair(&pair, &cfg).unwrap().failure_mode.name(), brute(&pair, 10_000));
            }
        }
    }

    #[test]
    fn coarse_sweep_is_rejected() {
        let cfg = SweepConfig { points_per_decade: 5, ..SweepConfig::default() };
        assert!(matches!(
            check_pair(&fr_pair(0.1, (1.5, 4.0), 0.0), &cfg),
            Err(Error::SweepTooCoarse { got: 5, need: 20 })
        ));
        assert!(matches!(
            check_pair(&fr_pair(0.1, (4.0, 4.0), 0.0), &SweepConfig::default()),
            Err(Error::DegenerateRange { .. })
        ));
    }

    #[test]
    fn independent_reading_is_stricter() {
        let linked = SweepConfig::default();
        let independent = SweepConfig { independent_currents: true, ..linked };
        let pair = fr_pair(0.1, (1.5, 4.0), 0.0);
        let a = check_pair(&pair, &linked).unwrap();
        let b = check_pair(&pair, &independent).unwrap();
        assert!(b.worst_margin <= a.worst_margin);
    }

    #[test]
    fn backup_delay_grows_with_disparity() {
        let b = slow_recloser(0.5);
        assert_eq!(backup_delay(&b, 0.0, 5.0), TripTime::Trip(0.0));
        let mut last = 0.0;
        for k in 1..10 {
            let d = backup_delay(&b, 0.3 * k as f64, 5.0).seconds().unwrap();
            assert!(d > last);
            last = d;
        }
        assert_eq!(backup_delay(&b, 4.8, 5.0), TripTime::NoTrip);
    }

    #[test]
    fn recloser_pairs_gain_margin_from_disparity() {
        let cfg = SweepConfig::default();
        let base = check_pair(&rr_pair(1.0, 0.1, 0.0), &cfg).unwrap();
        assert!(base.failure_mode.is_none(), "{base:?}");
        for d in [0.1, 0.5, 2.0] {
            let r = check_pair(&rr_pair(1.0, 0.1, d), &cfg).unwrap();
            assert!(r.failure_mode.is_none());
            assert!(r.worst_margin > base.worst_margin);
            assert!(r.backup_delay.unwrap() > 0.0);
        }
    }

    #[test]
    fn zero_margin_bound_is_crossing_gap() {
        let pair = fr_pair(0.1, (1.5, 4.0), 0.0);
        let m = coordination_current_margin(&pair, 0.0).unwrap();
        assert_eq!(m.margin_current, 0.0);
        assert_eq!(m.bound, m.crossing_current - 4.0);
        let t = recloser(0.1).time(4.0).seconds().unwrap();
        assert!((fuse().time(FuseCharacteristic::MinimumMelting, m.crossing_current).seconds().unwrap() - t).abs() < 1e-9);
    }

    #[test]
    fn larger_margin_shrinks_bound() {
        let pair = fr_pair(0.1, (1.5, 4.0), 0.0);
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let m = coordination_current_margin(&pair, 0.02 * k as f64).unwrap();
            assert!(m.bound < last);
            last = m.bound;
        }
        assert!(matches!(coordination_current_margin(&pair, 1e4), Err(Error::UnreachableMargin { .. })));
    }

    #[test]
    fn bound_reproduces_required_margin() {
        let pair = fr_pair(0.1, (1.5, 4.0), 0.0);
        let limit = disparity_limit(&pair, DEFAULT_MARGIN_FR, &SweepConfig::default()).unwrap();
        let r = check_pair(&pair.with_disparity(limit), &SweepConfig::default()).unwrap();
        assert!((r.worst_margin - DEFAULT_MARGIN_FR).abs() < 1e-6, "{}", r.worst_margin);
        let over = check_pair(&pair.with_disparity(limit + 1e-3), &SweepConfig::default()).unwrap();
        assert_eq!(over.failure_mode.name(), "MarginViolated");
    }
}
