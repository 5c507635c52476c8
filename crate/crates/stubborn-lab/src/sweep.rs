//! (q, gamma) parameter-plane exploration: classify every grid cell by the
//! strategy with the highest apparent hashrate and emit the map as CSV or
//! a binary PPM image.
//!
//! HM, LSM and EFSM scores are analytic (limit mode at gamma = 0 keeps the
//! map rectangular); the selfish-mining score has no closed form here and
//! is either simulated per cell or skipped.

use crate::closed_form::{revenue_ratio_efsm, revenue_ratio_lsm, GammaZeroMode, MiningParams};
use crate::race_sim::{derive_stream_seed, run_monte_carlo, RaceSimError, SimulatedMetrics, StrategyKind};
use rayon::prelude::*;
use std::io::{self, Write};
use thiserror::Error;

/// Grid q values are clamped into this closed interval so every cell has
/// valid mining parameters.
pub const Q_CLAMP_MIN: f64 = 1e-6;
pub const Q_CLAMP_MAX: f64 = 0.5 - 1e-6;

/// Default map bounds sit one percent-scale step inside the clamp interval:
/// simulated selfish-mining cycles have mean length ~ q^2/(p-q) events, which
/// diverges at the q -> 1/2 boundary. User grids may still request anything
/// inside the clamp bounds.
pub const DEFAULT_Q_MIN: f64 = 0.005;
pub const DEFAULT_Q_MAX: f64 = 0.495;

#[derive(Debug, Error, PartialEq)]
pub enum SweepError {
    #[error("grid bounds must be ordered with q_max < 0.5 and gamma within [0, 1]")]
    Bounds,
    #[error("step counts must be at least 1")]
    Steps,
}

/// Rectangular grid over the (q, gamma) plane, endpoints included.
///
/// An axis with a single step degenerates to its lower bound, which keeps
/// one-cell maps expressible; real maps use at least two steps per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub q_steps: usize,
    pub gamma_steps: usize,
}

impl GridSpec {
    pub fn new(
        q_min: f64,
        q_max: f64,
        gamma_min: f64,
        gamma_max: f64,
        q_steps: usize,
        gamma_steps: usize,
    ) -> Result<Self, SweepError> {
        let ordered = q_min <= q_max && gamma_min <= gamma_max;
        let in_range =
            q_min >= 0.0 && q_max < 0.5 && gamma_min >= 0.0 && gamma_max <= 1.0;
        if !(ordered && in_range) {
            return Err(SweepError::Bounds);
        }
        if q_steps < 1 || gamma_steps < 1 {
            return Err(SweepError::Steps);
        }
        Ok(Self { q_min, q_max, gamma_min, gamma_max, q_steps, gamma_steps })
    }

    /// The (q, gamma) plane at the requested resolution, using the default
    /// q bounds.
    pub fn full_plane(q_steps: usize, gamma_steps: usize) -> Result<Self, SweepError> {
        Self::new(DEFAULT_Q_MIN, DEFAULT_Q_MAX, 0.0, 1.0, q_steps, gamma_steps)
    }

    pub fn q_values(&self) -> Vec<f64> {
        axis(self.q_min, self.q_max, self.q_steps)
            .map(|q| q.clamp(Q_CLAMP_MIN, Q_CLAMP_MAX))
            .collect()
    }

    pub fn gamma_values(&self) -> Vec<f64> {
        axis(self.gamma_min, self.gamma_max, self.gamma_steps).collect()
    }

    pub fn cell_count(&self) -> usize {
        self.q_steps * self.gamma_steps
    }
}

fn axis(min: f64, max: f64, steps: usize) -> impl Iterator<Item = f64> {
    let span = max - min;
    (0..steps).map(move |i| {
        if i == 0 {
            min
        } else if i == steps - 1 {
            max // exact endpoint, no linspace rounding residue
        } else {
            min + span * i as f64 / (steps - 1) as f64
        }
    })
}

/// Apparent hashrate of each strategy at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellScores {
    pub hm: f64,
    pub sm: f64,
    pub lsm: f64,
    pub efsm: f64,
}

impl CellScores {
    pub fn get(&self, kind: StrategyKind) -> f64 {
        match kind {
            StrategyKind::Honest => self.hm,
            StrategyKind::Selfish => self.sm,
            StrategyKind::LeadStubborn => self.lsm,
            StrategyKind::EqualForkStubborn => self.efsm,
        }
    }

    /// Argmax with ties broken toward the least deviant strategy, in the
    /// fixed order HM, SM, LSM, EFSM.
    pub fn best(&self) -> StrategyKind {
        let mut best = StrategyKind::Honest;
        for kind in StrategyKind::ALL {
            if self.get(kind) > self.get(best) {
                best = kind;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionCell {
    pub q: f64,
    pub gamma: f64,
    pub best: StrategyKind,
    pub scores: CellScores,
    /// Standard error of the simulated SM score, 0 when SM was skipped.
    pub sm_std_error: f64,
}

/// How to obtain the selfish-mining score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmMode {
    /// Score SM as 0: a three-strategy analytic map.
    Skip,
    /// Per-cell Monte Carlo with the given cycle count; cell i uses the
    /// stream seed `derive_stream_seed(seed, i)`.
    Simulate { n_cycles: u64, seed: u64 },
}

/// Best-strategy classification over a grid, gamma-outer row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    pub grid: GridSpec,
    pub cells: Vec<RegionCell>,
}

/// Score one parameter point. HM scores q, the stubborn strategies score
/// their analytic apparent hashrates (gamma -> 0 limits at gamma = 0), and
/// SM scores its simulated estimate, or 0 when none is supplied.
pub fn classify_cell(params: &MiningParams, sm: Option<&SimulatedMetrics>) -> (StrategyKind, CellScores) {
    let lsm = revenue_ratio_lsm(params, GammaZeroMode::Limit)
        .expect("limit mode has no singular points");
    let efsm = revenue_ratio_efsm(params, GammaZeroMode::Limit)
        .expect("limit mode has no singular points");
    let scores = CellScores {
        hm: params.q(),
        sm: sm.map_or(0.0, |m| m.apparent_hashrate.mean),
        lsm: lsm.apparent_hashrate,
        efsm: efsm.apparent_hashrate,
    };
    (scores.best(), scores)
}

/// Evaluate `classify_cell` over every grid point. Cells are independent and
/// processed in parallel; output is deterministic for a fixed seed.
pub fn compute_map(grid: &GridSpec, sm_mode: SmMode) -> Result<RegionMap, RaceSimError> {
    let q_values = grid.q_values();
    let gamma_values = grid.gamma_values();
    let cells: Result<Vec<RegionCell>, RaceSimError> = (0..grid.cell_count())
        .into_par_iter()
        .map(|index| {
            let q = q_values[index % grid.q_steps];
            let gamma = gamma_values[index / grid.q_steps];
            let params = MiningParams::new(q, gamma, 1.0, 1.0)
                .expect("clamped grid values are always valid");
            let sm = match sm_mode {
                SmMode::Skip => None,
                SmMode::Simulate { n_cycles, seed } => Some(run_monte_carlo(
                    StrategyKind::Selfish,
                    &params,
                    n_cycles,
                    derive_stream_seed(seed, index as u64),
                )?),
            };
            let (best, scores) = classify_cell(&params, sm.as_ref());
            Ok(RegionCell {
                q,
                gamma,
                best,
                scores,
                sm_std_error: sm.map_or(0.0, |m| m.apparent_hashrate.std_error),
            })
        })
        .collect();
    Ok(RegionMap { grid: *grid, cells: cells? })
}

impl RegionMap {
    pub fn cell(&self, gamma_index: usize, q_index: usize) -> &RegionCell {
        &self.cells[gamma_index * self.grid.q_steps + q_index]
    }

    /// Cells won per strategy, in HM, SM, LSM, EFSM order.
    pub fn region_counts(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for cell in &self.cells {
            let slot = StrategyKind::ALL.iter().position(|k| *k == cell.best).unwrap();
            counts[slot] += 1;
        }
        counts
    }

    /// Grid points where HM reclaims a row after losing it at lower q.
    /// Reported, never asserted: on the analytic map this should be empty,
    /// and a simulated SM score can blur the frontier.
    pub fn hm_frontier_violations(&self) -> Vec<(usize, usize)> {
        let mut violations = Vec::new();
        for gi in 0..self.grid.gamma_steps {
            let mut deviant_seen = false;
            for qi in 0..self.grid.q_steps {
                let best = self.cell(gi, qi).best;
                if best == StrategyKind::Honest {
                    if deviant_seen {
                        violations.push((gi, qi));
                    }
                } else {
                    deviant_seen = true;
                }
            }
        }
        violations
    }

    /// True when the winning strategies along a gamma row never step back
    /// in the HM -> SM -> LSM -> EFSM order as q grows.
    pub fn row_transitions_ordered(&self, gamma_index: usize) -> bool {
        let rank = |kind: StrategyKind| {
            StrategyKind::ALL.iter().position(|k| *k == kind).unwrap()
        };
        let mut last = 0usize;
        for qi in 0..self.grid.q_steps {
            let here = rank(self.cell(gamma_index, qi).best);
            if here < last {
                return false;
            }
            last = here;
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    Csv,
    Ppm,
}

/// Nine significant digits, always.
pub(crate) fn fmt_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Serialize the map. CSV has `#` metadata comments, a fixed header and one
/// row per cell (gamma-outer, row-major, nine significant digits). PPM is
/// binary P6, one pixel per cell, q rightward and gamma upward, colored
/// HM white, SM blue, LSM green, EFSM red.
pub fn emit_map(map: &RegionMap, format: MapFormat) -> Vec<u8> {
    let mut bytes = Vec::new();
    match format {
        MapFormat::Csv => write_csv(map, &mut bytes).expect("infallible write to Vec"),
        MapFormat::Ppm => write_ppm(map, &mut bytes).expect("infallible write to Vec"),
    }
    bytes
}

fn write_csv(map: &RegionMap, out: &mut impl Write) -> io::Result<()> {
    let g = &map.grid;
    writeln!(out, "# stubborn-lab region map")?;
    writeln!(
        out,
        "# q_min={} q_max={} q_steps={} gamma_min={} gamma_max={} gamma_steps={}",
        fmt_sig9(g.q_min),
        fmt_sig9(g.q_max),
        g.q_steps,
        fmt_sig9(g.gamma_min),
        fmt_sig9(g.gamma_max),
        g.gamma_steps
    )?;
    writeln!(
        out,
        "# q clamped to [{}, {}]; scores are apparent hashrates",
        fmt_sig9(Q_CLAMP_MIN),
        fmt_sig9(Q_CLAMP_MAX)
    )?;
    let sm_stderr_max = map
        .cells
        .iter()
        .map(|c| c.sm_std_error)
        .fold(0.0f64, f64::max);
    writeln!(out, "# sm_stderr_max={}", fmt_sig9(sm_stderr_max))?;
    writeln!(out, "q,gamma,best,score_hm,score_sm,score_lsm,score_efsm")?;
    for cell in &map.cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_sig9(cell.q),
            fmt_sig9(cell.gamma),
            cell.best.label(),
            fmt_sig9(cell.scores.hm),
            fmt_sig9(cell.scores.sm),
            fmt_sig9(cell.scores.lsm),
            fmt_sig9(cell.scores.efsm),
        )?;
    }
    Ok(())
}

fn palette(kind: StrategyKind) -> [u8; 3] {
    match kind {
        StrategyKind::Honest => [255, 255, 255],
        StrategyKind::Selfish => [0, 0, 255],
        StrategyKind::LeadStubborn => [0, 255, 0],
        StrategyKind::EqualForkStubborn => [255, 0, 0],
    }
}

fn write_ppm(map: &RegionMap, out: &mut impl Write) -> io::Result<()> {
    let g = &map.grid;
    write!(out, "P6\n{} {}\n255\n", g.q_steps, g.gamma_steps)?;
    // PPM scans top row first; gamma increases upward
    for gi in (0..g.gamma_steps).rev() {
        for qi in 0..g.q_steps {
            out.write_all(&palette(map.cell(gi, qi).best))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(0.1, 0.4, 0.0, 1.0, 5, 5).is_ok());
        assert_eq!(GridSpec::new(0.4, 0.1, 0.0, 1.0, 5, 5), Err(SweepError::Bounds));
        assert_eq!(GridSpec::new(0.1, 0.5, 0.0, 1.0, 5, 5), Err(SweepError::Bounds));
        assert_eq!(GridSpec::new(0.1, 0.4, 0.0, 1.1, 5, 5), Err(SweepError::Bounds));
        assert_eq!(GridSpec::new(0.1, 0.4, 0.0, 1.0, 0, 5), Err(SweepError::Steps));
    }

    #[test]
    fn axis_endpoints_and_clamping() {
        let grid = GridSpec::full_plane(11, 11).unwrap();
        let qs = grid.q_values();
        assert_eq!(qs.len(), 11);
        assert_eq!(qs[0], DEFAULT_Q_MIN);
        assert_eq!(qs[10], DEFAULT_Q_MAX);
        let gs = grid.gamma_values();
        assert_eq!(gs[0], 0.0);
        assert_eq!(gs[10], 1.0);

        // user-supplied bounds clamp into the valid open interval
        let edge = GridSpec::new(0.0, 0.4999999, 0.0, 1.0, 3, 2).unwrap();
        let qs = edge.q_values();
        assert_eq!(qs[0], Q_CLAMP_MIN);
        assert_eq!(qs[2], Q_CLAMP_MAX);
    }

    #[test]
    fn classify_examples() {
        let hm_corner = MiningParams::new(0.05, 0.1, 1.0, 1.0).unwrap();
        assert_eq!(classify_cell(&hm_corner, None).0, StrategyKind::Honest);

        let efsm_corner = MiningParams::new(0.45, 0.95, 1.0, 1.0).unwrap();
        assert_eq!(classify_cell(&efsm_corner, None).0, StrategyKind::EqualForkStubborn);

        let gamma_one = MiningParams::new(0.4, 1.0, 1.0, 1.0).unwrap();
        let (best, scores) = classify_cell(&gamma_one, None);
        assert_eq!(best, StrategyKind::EqualForkStubborn);
        assert!((scores.efsm - 0.4 / 0.6).abs() < 1e-12);
        assert!((scores.lsm - 0.4 * 0.68 / 0.44).abs() < 1e-12);
    }

    #[test]
    fn tie_break_prefers_least_deviant() {
        let tied = CellScores { hm: 0.3, sm: 0.3, lsm: 0.3, efsm: 0.3 };
        assert_eq!(tied.best(), StrategyKind::Honest);
        let sm_lsm = CellScores { hm: 0.1, sm: 0.4, lsm: 0.4, efsm: 0.2 };
        assert_eq!(sm_lsm.best(), StrategyKind::Selfish);
    }

    #[test]
    fn classification_invariant_under_reward_time_rescale() {
        // argmax depends only on dimensionless apparent hashrates
        let a = MiningParams::new(0.35, 0.7, 1.0, 1.0).unwrap();
        let b = MiningParams::new(0.35, 0.7, 625.0, 625.0).unwrap();
        let (best_a, scores_a) = classify_cell(&a, None);
        let (best_b, scores_b) = classify_cell(&b, None);
        assert_eq!(best_a, best_b);
        assert!((scores_a.lsm - scores_b.lsm).abs() < 1e-12);
        assert!((scores_a.efsm - scores_b.efsm).abs() < 1e-12);
    }

    #[test]
    fn single_cell_map_equals_classify_cell() {
        let grid = GridSpec::new(0.3, 0.3, 0.5, 0.5, 1, 1).unwrap();
        let map = compute_map(&grid, SmMode::Skip).unwrap();
        assert_eq!(map.cells.len(), 1);
        let params = MiningParams::new(0.3, 0.5, 1.0, 1.0).unwrap();
        let (best, scores) = classify_cell(&params, None);
        assert_eq!(map.cells[0].best, best);
        assert_eq!(map.cells[0].scores, scores);
    }

    #[test]
    fn analytic_map_gamma_one_row_is_all_efsm() {
        let grid = GridSpec::full_plane(11, 11).unwrap();
        let map = compute_map(&grid, SmMode::Skip).unwrap();
        for cell in &map.cells {
            assert!(matches!(
                cell.best,
                StrategyKind::Honest | StrategyKind::LeadStubborn | StrategyKind::EqualForkStubborn
            ));
        }
        for qi in 0..11 {
            assert_eq!(map.cell(10, qi).best, StrategyKind::EqualForkStubborn);
        }
    }

    #[test]
    fn analytic_map_has_clean_hm_frontier() {
        let grid = GridSpec::full_plane(41, 41).unwrap();
        let map = compute_map(&grid, SmMode::Skip).unwrap();
        assert!(map.hm_frontier_violations().is_empty());
    }

    #[test]
    fn csv_shape_and_round_trip() {
        let grid = GridSpec::new(0.1, 0.4, 0.2, 0.8, 2, 2).unwrap();
        let map = compute_map(&grid, SmMode::Skip).unwrap();
        let bytes = emit_map(&map, MapFormat::Csv);
        let text = String::from_utf8(bytes).unwrap();
        let mut lines = text.lines();
        let data: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect();
        assert_eq!(data[0], "q,gamma,best,score_hm,score_sm,score_lsm,score_efsm");
        assert_eq!(data.len(), 1 + 4); // header + one row per cell
        assert!(lines.next().unwrap().starts_with('#'));

        // parse back and re-format: scores survive to nine digits
        for (row, cell) in data[1..].iter().zip(&map.cells) {
            let fields: Vec<&str> = row.split(',').collect();
            assert_eq!(fields[2], cell.best.label());
            for (field, score) in fields[3..].iter().zip([
                cell.scores.hm,
                cell.scores.sm,
                cell.scores.lsm,
                cell.scores.efsm,
            ]) {
                let parsed: f64 = field.parse().unwrap();
                assert_eq!(fmt_sig9(parsed), fmt_sig9(score));
            }
        }
    }

    #[test]
    fn ppm_layout() {
        let grid = GridSpec::new(0.1, 0.4, 0.0, 1.0, 3, 2, ).unwrap();
        let map = compute_map(&grid, SmMode::Skip).unwrap();
        let bytes = emit_map(&map, MapFormat::Ppm);
        let header = b"P6\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 3 * 3 * 2);
        // top-left pixel is the gamma_max row, q_min column
        let top_left: [u8; 3] = bytes[header.len()..header.len() + 3].try_into().unwrap();
        assert_eq!(top_left, palette(map.cell(1, 0).best));
    }

    #[test]
    fn deterministic_csv_with_simulated_sm() {
        let grid = GridSpec::new(0.2, 0.4, 0.4, 0.8, 3, 3).unwrap();
        let mode = SmMode::Simulate { n_cycles: 2_000, seed: 5 };
        let a = emit_map(&compute_map(&grid, mode).unwrap(), MapFormat::Csv);
        let b = emit_map(&compute_map(&grid, mode).unwrap(), MapFormat::Csv);
        assert_eq!(a, b);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| emit_map(&compute_map(&grid, mode).unwrap(), MapFormat::Csv));
        assert_eq!(a, single);
    }
}
