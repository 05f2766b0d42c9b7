//! Plain rating arithmetic: the expectation curve, rating updates, and the
//! rank band ladder.
//!
//! This module is the reference the encrypted pipeline is measured against.
//! Everything here is ordinary floating point; the homomorphic side
//! reproduces `expected_score` through a fixed Chebyshev interpolant of the
//! same curve (see [`expectation_coeffs`]) and must track these functions to
//! within its noise budget.

use crate::ckks::eval::{chebyshev_fit, clenshaw};
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

/// Update gain: how far one match can move a rating.
pub const K_FACTOR: f64 = 32.0;
pub const RATING_FLOOR: f64 = 0.0;
pub const RATING_CEIL: f64 = 4000.0;

/// Every player enters the ladder here (before their private perturbation).
pub const INITIAL_RATING: f64 = 1500.0;

/// The public rank ladder: eight 500-point bands across the rating range.
pub const BAND_WIDTH: f64 = 500.0;
pub const BAND_COUNT: usize = 8;

/// Rating differences are divided by 400 before the expectation curve;
/// the interpolation window [−5, 5] then covers differences up to ±2000,
/// far beyond anything band-constrained matchmaking can produce.
pub const DIFF_SCALE: f64 = 1.0 / 400.0;
pub const EXPECTATION_DOMAIN: (f64, f64) = (-5.0, 5.0);
pub const EXPECTATION_DEGREE: usize = 50;

/// Probability-like expected score of `r_player` against `r_opponent`:
/// 1 / (1 + 10^((r_opponent − r_player)/400)).
pub fn expected_score(r_player: f64, r_opponent: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((r_opponent - r_player) * DIFF_SCALE))
}

/// The curve evaluated on the scaled difference u = (r_opp − r_player)/400.
pub fn expectation_curve(u: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf(u))
}

pub fn clamp_rating(r: f64) -> f64 {
    r.clamp(RATING_FLOOR, RATING_CEIL)
}

/// Rating-period update: R' = R + K·(S_actual − ΣS_expected), clamped.
/// `expected_sum` aggregates the expected scores of the period's matches,
/// `actual_sum` the achieved scores (1 win, ½ draw, 0 loss).
pub fn update_rating(r: f64, expected_sum: f64, actual_sum: f64) -> f64 {
    update_rating_with(r, K_FACTOR, expected_sum, actual_sum)
}

/// [`update_rating`] with an explicit K-factor, for deployments that tune
/// the gain.
pub fn update_rating_with(r: f64, k: f64, expected_sum: f64, actual_sum: f64) -> f64 {
    clamp_rating(r + k * (actual_sum - expected_sum))
}

/// Single-match update of both sides; `score_a` is player A's result
/// (1 win, ½ draw, 0 loss). Absent clamping the total rating is conserved.
pub fn update_pair(r_a: f64, r_b: f64, score_a: f64) -> (f64, f64) {
    let e_a = expected_score(r_a, r_b);
    let new_a = update_rating(r_a, e_a, score_a);
    let new_b = update_rating(r_b, 1.0 - e_a, 1.0 - score_a);
    (new_a, new_b)
}

/// Band index on the public ladder; the ceiling rating stays in the top band.
pub fn band_of(r: f64) -> usize {
    let idx = (clamp_rating(r) / BAND_WIDTH) as usize;
    idx.min(BAND_COUNT - 1)
}

/// Half-open rating range [lo, hi) of a band; the top band closes at the
/// ceiling inclusively.
pub fn band_range(band: usize) -> (f64, f64) {
    assert!(band < BAND_COUNT, "band {} out of range", band);
    (band as f64 * BAND_WIDTH, (band as f64 + 1.0) * BAND_WIDTH)
}

/// One named band of a rank ladder: ratings in [min, max) hold the rank
/// (the ladder's top band also includes its own max, the rating ceiling).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub label: String,
    pub min: f64,
    pub max: f64,
}

/// A rank ladder: ordered bands partitioning [0, 4000) without gaps or
/// overlaps. Loadable from JSON so deployments can rename or re-cut ranks;
/// the stock ladder matches [`band_range`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    pub bands: Vec<Band>,
}

impl Default for Ladder {
    fn default() -> Self {
        let labels = [
            "novice",
            "class-d",
            "class-c",
            "class-b",
            "class-a",
            "expert",
            "master",
            "grandmaster",
        ];
        let bands = labels
            .iter()
            .enumerate()
            .map(|(i, label)| {
                let (min, max) = band_range(i);
                Band { label: (*label).into(), min, max }
            })
            .collect();
        Ladder { bands }
    }
}

impl Ladder {
    /// Checks the partition property: bands ascend, meet exactly, start at
    /// the rating floor, end at the ceiling, and carry distinct labels.
    pub fn validate(&self) -> Result<(), String> {
        if self.bands.is_empty() {
            return Err("ladder has no bands".into());
        }
        let mut edge = RATING_FLOOR;
        for (i, band) in self.bands.iter().enumerate() {
            if band.label.trim().is_empty() {
                return Err(format!("band {} has an empty label", i));
            }
            if band.min != edge {
                return Err(format!(
                    "band {} ({}) starts at {} but the previous band ends at {}",
                    i, band.label, band.min, edge
                ));
            }
            if band.max <= band.min {
                return Err(format!("band {} ({}) is empty or inverted", i, band.label));
            }
            edge = band.max;
        }
        if edge != RATING_CEIL {
            return Err(format!("ladder ends at {} instead of {}", edge, RATING_CEIL));
        }
        for (i, band) in self.bands.iter().enumerate() {
            if self.bands[..i].iter().any(|other| other.label == band.label) {
                return Err(format!("duplicate band label {:?}", band.label));
            }
        }
        Ok(())
    }

    /// The band holding rating `r`; the ceiling rating stays in the top band.
    pub fn rank(&self, r: f64) -> &Band {
        let r = clamp_rating(r);
        self.bands
            .iter()
            .find(|b| r >= b.min && r < b.max)
            .unwrap_or_else(|| self.bands.last().expect("validated ladder is nonempty"))
    }

    /// Whether the numeric cuts equal the stock eight-band ladder that the
    /// deployed proof relation and matchmaking tables are built on.
    pub fn matches_stock_boundaries(&self) -> bool {
        self.bands.len() == BAND_COUNT
            && self
                .bands
                .iter()
                .enumerate()
                .all(|(i, b)| (b.min, b.max) == band_range(i))
    }
}

/// Chebyshev coefficients of the expectation curve on
/// [`EXPECTATION_DOMAIN`], shared by every homomorphic update.
pub fn expectation_coeffs() -> &'static [f64] {
    static COEFFS: Lazy<Vec<f64>> = Lazy::new(|| {
        let (a, b) = EXPECTATION_DOMAIN;
        chebyshev_fit(expectation_curve, a, b, EXPECTATION_DEGREE)
    });
    &COEFFS
}

/// The interpolant itself, for plain-side reference computations.
pub fn expected_score_interpolated(r_player: f64, r_opponent: f64) -> f64 {
    let (a, b) = EXPECTATION_DOMAIN;
    clenshaw(expectation_coeffs(), a, b, (r_opponent - r_player) * DIFF_SCALE)
}

// ═══════════════════════════════════════════════════════════════════════════
// Tests
// ═══════════════════════════════════════════════════════════════════════════

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expectation_hits_pinned_values() {
        assert!((expected_score(1400.0, 1600.0) - 0.2402530733520421).abs() < 1e-15);
        assert!((expected_score(1600.0, 1400.0) - 0.7597469266479578).abs() < 1e-15);
        assert_eq!(expected_score(1500.0, 1500.0), 0.5);
    }

    #[test]
    fn expectations_of_both_sides_sum_to_one() {
        for (a, b) in [(100.0, 3900.0), (1234.5, 1678.9), (2000.0, 2000.0)] {
            let s = expected_score(a, b) + expected_score(b, a);
            assert!((s - 1.0).abs() < 1e-12, "{} + {} sides sum to {}", a, b, s);
        }
    }

    #[test]
    fn batch_update_of_three_wins_lands_on_1548() {
        // three wins against 1500-rated opponents in one period:
        // 1500 + 32·(3 − 3·0.5) = 1548 exactly
        let e_sum = 3.0 * expected_score(1500.0, 1500.0);
        assert_eq!(update_rating(1500.0, e_sum, 3.0), 1548.0);
    }

    #[test]
    fn single_win_moves_sixteen_points_at_parity() {
        let (a, b) = update_pair(1500.0, 1500.0, 1.0);
        assert_eq!(a, 1516.0);
        assert_eq!(b, 1484.0);
    }

    #[test]
    fn pair_update_conserves_total_rating_without_clamping() {
        for (ra, rb, s) in [(1700.0, 1400.0, 0.0), (2210.5, 2190.25, 0.5), (900.0, 1100.0, 1.0)] {
            let (na, nb) = update_pair(ra, rb, s);
            assert!(
                ((na + nb) - (ra + rb)).abs() < 1e-9,
                "total drifted: {} + {} -> {} + {}",
                ra,
                rb,
                na,
                nb
            );
        }
    }

    #[test]
    fn updates_clamp_at_the_ladder_edges() {
        let (a, _) = update_pair(3995.0, 3995.0, 1.0);
        assert_eq!(a, RATING_CEIL, "ceiling must hold");
        let (_, b) = update_pair(10.0, 10.0, 1.0);
        assert_eq!(b, RATING_FLOOR, "floor must hold");
        assert_eq!(clamp_rating(-50.0), 0.0);
        assert_eq!(clamp_rating(4400.0), 4000.0);
    }

    #[test]
    fn band_ladder_boundaries() {
        assert_eq!(band_of(0.0), 0);
        assert_eq!(band_of(499.999), 0);
        assert_eq!(band_of(500.0), 1);
        assert_eq!(band_of(1500.0), 3);
        assert_eq!(band_of(3999.9), 7);
        assert_eq!(band_of(4000.0), 7, "ceiling stays in the top band");
        for band in 0..BAND_COUNT {
            let (lo, hi) = band_range(band);
            assert_eq!(band_of(lo), band);
            assert_eq!(hi - lo, BAND_WIDTH);
        }
    }

    #[test]
    fn stock_ladder_agrees_with_band_arithmetic() {
        let ladder = Ladder::default();
        ladder.validate().expect("stock ladder must validate");
        assert!(ladder.matches_stock_boundaries());
        assert_eq!(ladder.rank(1250.0).label, "class-c");
        assert_eq!(ladder.rank(0.0).label, "novice");
        assert_eq!(ladder.rank(4000.0).label, "grandmaster", "ceiling stays in the top band");
        for r in [0.0, 499.9, 500.0, 1750.0, 3999.9, 4000.0] {
            let band = ladder.rank(r);
            let idx = ladder.bands.iter().position(|b| b == band).unwrap();
            assert_eq!(idx, band_of(r), "ladder and index lookup disagree at {}", r);
        }
    }

    #[test]
    fn ladder_validation_rejects_bad_partitions() {
        let mut gap = Ladder::default();
        gap.bands[3].min = 1501.0;
        assert!(gap.validate().is_err(), "gap must be rejected");

        let mut short = Ladder::default();
        short.bands.pop();
        assert!(short.validate().is_err(), "missing ceiling must be rejected");

        let mut dup = Ladder::default();
        dup.bands[1].label = "novice".into();
        assert!(dup.validate().is_err(), "duplicate labels must be rejected");

        let custom = Ladder {
            bands: vec![
                Band { label: "low".into(), min: 0.0, max: 2200.0 },
                Band { label: "high".into(), min: 2200.0, max: 4000.0 },
            ],
        };
        custom.validate().expect("coarser cuts are a valid ladder");
        assert!(!custom.matches_stock_boundaries());
        assert_eq!(custom.rank(2199.9).label, "low");
        assert_eq!(custom.rank(2200.0).label, "high");
    }

    #[test]
    fn ladder_round_trips_through_json() {
        let ladder = Ladder::default();
        let text = serde_json::to_string(&ladder).unwrap();
        let back: Ladder = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ladder);
    }

    #[test]
    fn explicit_k_factor_scales_the_gain() {
        assert_eq!(update_rating_with(1500.0, 10.0, 0.5, 1.0), 1505.0);
        assert_eq!(update_rating_with(1500.0, 64.0, 0.5, 1.0), 1532.0);
        assert_eq!(update_rating(1500.0, 0.5, 1.0), update_rating_with(1500.0, K_FACTOR, 0.5, 1.0));
    }

    #[test]
    fn interpolant_tracks_the_true_curve() {
        let mut max_err = 0.0f64;
        for i in 0..=4000 {
            let rp = i as f64;
            let ro = 4000.0 - rp;
            if (ro - rp).abs() > 2000.0 {
                continue; // outside the fit window
            }
            let err = (expected_score_interpolated(rp, ro) - expected_score(rp, ro)).abs();
            max_err = max_err.max(err);
        }
        assert!(max_err < 5e-6, "interpolant error {} out of budget", max_err);
    }
}
