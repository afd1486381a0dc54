//! Performance-based regulation market.
//!
//! Regulation offers are ranked by their performance-adjusted price
//! (`offer / score`), the imbalance is filled in merit order, and the
//! marginal unit sets a uniform clearing price. This stands in for a full
//! ISO clearing engine and can be swapped behind [`MeritOrder::dispatch`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative remainder (of total capacity) treated as fully cleared.
const CLEARING_EPS: f64 = 1e-12;

/// One AGC unit offering symmetric regulation capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgcUnit {
    pub id: u32,
    /// Normalized regulation performance score in (0, 1].
    pub perf_score: f64,
    /// Mileage offer ($/MW).
    pub offer_price: f64,
    /// Biddable capacity (MW), usable up and down.
    pub capacity: f64,
}

impl AgcUnit {
    pub fn validate(&self) -> Result<()> {
        if !(self.perf_score > 0.0 && self.perf_score <= 1.0) {
            return Err(Error::Domain(format!(
                "unit {}: performance score {} outside (0, 1]",
                self.id, self.perf_score
            )));
        }
        if !(self.offer_price >= 0.0) {
            return Err(Error::Domain(format!(
                "unit {}: negative offer price",
                self.id
            )));
        }
        if !(self.capacity > 0.0) {
            return Err(Error::Domain(format!(
                "unit {}: capacity must be positive",
                self.id
            )));
        }
        Ok(())
    }

    /// Offer price scaled by performance.
    #[inline]
    pub fn adjusted_price(&self) -> f64 {
        self.offer_price / self.perf_score
    }
}

/// The three regulation units of the reference test system.
pub fn reference_units() -> Vec<AgcUnit> {
    vec![
        AgcUnit {
            id: 1,
            perf_score: 0.7168,
            offer_price: 2.0,
            capacity: 1.5,
        },
        AgcUnit {
            id: 2,
            perf_score: 0.6074,
            offer_price: 4.0,
            capacity: 4.0,
        },
        AgcUnit {
            id: 3,
            perf_score: 1.0,
            offer_price: 1.0,
            capacity: 2.5,
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeritEntry {
    /// Position of the unit in the original unit list.
    pub index: usize,
    pub id: u32,
    pub adjusted_price: f64,
    pub capacity: f64,
}

/// Units ranked by adjusted price; ties go to the larger capacity, then
/// the lower id.
#[derive(Debug, Clone, PartialEq)]
pub struct MeritOrder {
    entries: Vec<MeritEntry>,
    total_capacity: f64,
}

/// Ranks `units` into a merit order.
pub fn adjusted_offers(units: &[AgcUnit]) -> Result<MeritOrder> {
    MeritOrder::new(units)
}

impl MeritOrder {
    pub fn new(units: &[AgcUnit]) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::Domain("at least one AGC unit is required".into()));
        }
        for u in units {
            u.validate()?;
        }
        let mut entries: Vec<MeritEntry> = units
            .iter()
            .enumerate()
            .map(|(index, u)| MeritEntry {
                index,
                id: u.id,
                adjusted_price: u.adjusted_price(),
                capacity: u.capacity,
            })
            .collect();
        entries.sort_by(|a, b| {
            a.adjusted_price
                .total_cmp(&b.adjusted_price)
                .then_with(|| b.capacity.total_cmp(&a.capacity))
                .then_with(|| a.id.cmp(&b.id))
        });
        let total_capacity = entries.iter().map(|e| e.capacity).sum();
        Ok(MeritOrder {
            entries,
            total_capacity,
        })
    }

    pub fn entries(&self) -> &[MeritEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_capacity(&self) -> f64 {
        self.total_capacity
    }

    pub fn cheapest_price(&self) -> f64 {
        self.entries[0].adjusted_price
    }

    pub fn highest_price(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.adjusted_price)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Clears `imbalance` (MW, positive = regulation up) into `g`, which is
    /// indexed like the original unit list. Allocation-free variant of
    /// [`MeritOrder::dispatch`].
    pub fn dispatch_into(&self, imbalance: f64, g: &mut [f64]) -> Clearing {
        debug_assert_eq!(g.len(), self.entries.len());
        g.fill(0.0);
        let sign = if imbalance < 0.0 { -1.0 } else { 1.0 };
        let mut remaining = imbalance.abs();
        let mut gamma = self.cheapest_price();
        for e in &self.entries {
            if remaining <= 0.0 {
                break;
            }
            let take = remaining.min(e.capacity);
            g[e.index] = sign * take;
            gamma = e.adjusted_price;
            remaining = if take == remaining {
                0.0
            } else {
                remaining - take
            };
            // capacities that sum to the imbalance in decimal can leave a
            // few ulps behind in binary
            if remaining <= CLEARING_EPS * self.total_capacity {
                remaining = 0.0;
            }
        }
        Clearing {
            gamma,
            feasible: remaining == 0.0,
            residual: sign * remaining,
        }
    }

    pub fn dispatch(&self, imbalance: f64) -> DispatchResult {
        let mut g = vec![0.0; self.entries.len()];
        let c = self.dispatch_into(imbalance, &mut g);
        DispatchResult {
            g,
            gamma: c.gamma,
            feasible: c.feasible,
            residual: c.residual,
        }
    }
}

/// Price and feasibility of one clearing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clearing {
    pub gamma: f64,
    pub feasible: bool,
    pub residual: f64,
}

/// Cleared regulation dispatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchResult {
    /// Regulation power per unit (MW), in unit-list order.
    pub g: Vec<f64>,
    /// Clearing price ($/MW).
    pub gamma: f64,
    pub feasible: bool,
    /// Unmet imbalance (MW), zero when feasible.
    pub residual: f64,
}

/// Clears `imbalance` against `units` in merit order.
pub fn dispatch(imbalance: f64, units: &[AgcUnit]) -> Result<DispatchResult> {
    Ok(MeritOrder::new(units)?.dispatch(imbalance))
}

/// Instantaneous quadratic mileage penalty `Σ (γ·g_i)²` ($²).
#[inline]
pub fn step_mileage_penalty(gamma: f64, g: &[f64]) -> f64 {
    g.iter().map(|&x| (gamma * x) * (gamma * x)).sum()
}

/// Movement-based settlement `γ_t · Σ|g_i^t − g_i^(t−1)|` for one step.
#[inline]
pub fn step_movement_cost(gamma: f64, g: &[f64], g_prev: &[f64]) -> f64 {
    gamma
        * g.iter()
            .zip(g_prev)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
}

/// Totals of the two mileage metrics over a dispatch series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MileageTotals {
    /// Movement-based settlement ($).
    pub settlement: f64,
    /// Time integral of the quadratic penalty ($²·s).
    pub quadratic: f64,
}

/// Settles a time-ordered dispatch series with spacing `dt` (s). The
/// series starts from zero regulation, so the first step's ramp counts.
pub fn settlement_mileage_cost(series: &[DispatchResult], dt: f64) -> Result<MileageTotals> {
    let first = series
        .first()
        .ok_or_else(|| Error::Domain("dispatch series is empty".into()))?;
    let mut prev = vec![0.0; first.g.len()];
    let mut totals = MileageTotals {
        settlement: 0.0,
        quadratic: 0.0,
    };
    for d in series {
        if d.g.len() != prev.len() {
            return Err(Error::Domain("dispatch series changes unit count".into()));
        }
        totals.settlement += step_movement_cost(d.gamma, &d.g, &prev);
        totals.quadratic += step_mileage_penalty(d.gamma, &d.g) * dt;
        prev.copy_from_slice(&d.g);
    }
    Ok(totals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn reference_merit_order() {
        let m = adjusted_offers(&reference_units()).unwrap();
        let ids: Vec<u32> = m.entries().iter().map(|e| e.id).collect();
        assert_eq!(ids, vec![3, 1, 2]);
        let p: Vec<f64> = m.entries().iter().map(|e| e.adjusted_price).collect();
        assert!(close(p[0], 1.0, 1e-12));
        assert!(close(p[1], 2.7902, 5e-5));
        assert!(close(p[2], 6.5854, 5e-5));
    }

    #[test]
    fn single_unit_order() {
        let u = reference_units()[1];
        let m = adjusted_offers(&[u]).unwrap();
        assert_eq!(m.entries()[0].id, 2);
    }

    #[test]
    fn ties_prefer_larger_capacity() {
        let units = [
            AgcUnit {
                id: 1,
                perf_score: 1.0,
                offer_price: 2.0,
                capacity: 2.0,
            },
            AgcUnit {
                id: 2,
                perf_score: 0.5,
                offer_price: 1.0,
                capacity: 4.0,
            },
        ];
        let m = adjusted_offers(&units).unwrap();
        assert_eq!(m.entries()[0].id, 2);
    }

    #[test]
    fn zero_score_is_a_domain_error() {
        let mut units = reference_units();
        units[0].perf_score = 0.0;
        assert!(matches!(adjusted_offers(&units), Err(Error::Domain(_))));
        assert!(adjusted_offers(&[]).is_err());
    }

    #[test]
    fn zero_imbalance() {
        let d = dispatch(0.0, &reference_units()).unwrap();
        assert_eq!(d.g, vec![0.0, 0.0, 0.0]);
        assert!(d.feasible);
        assert_eq!(d.residual, 0.0);
        assert_eq!(d.gamma, 1.0);
    }

    #[test]
    fn five_megawatts_up() {
        let d = dispatch(5.0, &reference_units()).unwrap();
        assert_eq!(d.g, vec![1.5, 1.0, 2.5]);
        assert!(close(d.gamma, 4.0 / 0.6074, 1e-12));
        assert!(close(d.gamma, 6.5854, 5e-5));
        assert!(d.feasible);
    }

    #[test]
    fn saturated_down() {
        let d = dispatch(-9.0, &reference_units()).unwrap();
        assert_eq!(d.g, vec![-1.5, -4.0, -2.5]);
        assert!(!d.feasible);
        assert!(close(d.residual, -1.0, 1e-12));
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(step_mileage_penalty(3.0, &[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(step_mileage_penalty(1.0, &[2.0, 0.0, 0.0]), 4.0);
        let gamma = 4.0 / 0.6074;
        let p = step_mileage_penalty(gamma, &[1.5, 1.0, 2.5]);
        assert!(close(p, gamma * gamma * 9.5, 1e-9));
    }

    fn series(gs: &[[f64; 3]], gamma: f64) -> Vec<DispatchResult> {
        gs.iter()
            .map(|g| DispatchResult {
                g: g.to_vec(),
                gamma,
                feasible: true,
                residual: 0.0,
            })
            .collect()
    }

    #[test]
    fn settlement_examples() {
        let s = series(&[[1.0, 0.5, 0.0]; 6], 2.0);
        let t = settlement_mileage_cost(&s, 4.0).unwrap();
        assert!(close(t.settlement, 2.0 * 1.5, 1e-12));

        let s = series(&[[1.0, 0.0, 0.0]], 2.0);
        let t = settlement_mileage_cost(&s, 4.0).unwrap();
        assert_eq!(t.settlement, 2.0);
        assert_eq!(t.quadratic, 4.0 * 4.0);

        let alt: Vec<[f64; 3]> = (0..10)
            .map(|k| {
                if k % 2 == 0 {
                    [1.0, 0.0, 0.0]
                } else {
                    [0.0; 3]
                }
            })
            .collect();
        let t = settlement_mileage_cost(&series(&alt, 1.0), 4.0).unwrap();
        assert_eq!(t.settlement, 10.0);

        assert!(settlement_mileage_cost(&[], 4.0).is_err());
    }

    /// Exhaustive minimum-cost allocation on a 0.1 MW grid.
    fn brute_force_cost(units: &[AgcUnit], imbalance_tenths: i64) -> Option<f64> {
        let caps: Vec<i64> = units
            .iter()
            .map(|u| (u.capacity * 10.0).round() as i64)
            .collect();
        let target = imbalance_tenths.abs();
        let mut best: Option<f64> = None;
        for a in 0..=caps[0] {
            for b in 0..=caps[1] {
                let c = target - a - b;
                if c < 0 || c > caps[2] {
                    continue;
                }
                let cost = [a, b, c]
                    .iter()
                    .zip(units)
                    .map(|(&x, u)| u.adjusted_price() * x as f64 / 10.0)
                    .sum::<f64>();
                best = Some(best.map_or(cost, |bst: f64| bst.min(cost)));
            }
        }
        best
    }

    fn unit_strategy() -> impl Strategy<Value = AgcUnit> {
        (1u32..100, 0.1f64..=1.0, 0.0f64..10.0, 1u32..50).prop_map(|(id, s, o, c)| AgcUnit {
            id,
            perf_score: s,
            offer_price: o,
            capacity: c as f64 / 10.0,
        })
    }

    proptest! {
        #[test]
        fn dispatch_is_minimum_cost(
            units in proptest::collection::vec(unit_strategy(), 3),
            frac in 0.0f64..=1.0,
            negative in any::<bool>(),
        ) {
            let m = MeritOrder::new(&units).unwrap();
            let total = (m.total_capacity() * 10.0).round() as i64;
            let tenths = ((total as f64) * frac).round() as i64 * if negative { -1 } else { 1 };
            let imbalance = tenths as f64 / 10.0;
            let d = m.dispatch(imbalance);
            prop_assert!(d.feasible);
            let cost: f64 = d.g.iter().zip(&units).map(|(g, u)| u.adjusted_price() * g.abs()).sum();
            let best = brute_force_cost(&units, tenths).unwrap();
            prop_assert!((cost - best).abs() <= 1e-9 * best.max(1.0), "{cost} vs {best}");
        }

        #[test]
        fn dispatch_invariants(
            units in proptest::collection::vec(unit_strategy(), 1..5),
            x in -12.0f64..12.0,
            y in -12.0f64..12.0,
        ) {
            let m = MeritOrder::new(&units).unwrap();
            let (small, large) = if x.abs() <= y.abs() { (x, y) } else { (y, x) };
            // compare in the same direction
            let small = small.abs() * large.signum();
            let a = m.dispatch(small);
            let b = m.dispatch(large);
            for (i, u) in units.iter().enumerate() {
                prop_assert!(b.g[i].abs() <= u.capacity + 1e-12);
                prop_assert!(b.g[i] == 0.0 || b.g[i].signum() == large.signum());
                prop_assert!(a.g[i].abs() <= b.g[i].abs() + 1e-12);
            }
            prop_assert!(a.gamma <= b.gamma);
            if b.feasible {
                let s: f64 = b.g.iter().sum();
                prop_assert!((s - large).abs() <= 1e-9);
            } else {
                let s: f64 = b.g.iter().sum();
                prop_assert!((s + b.residual - large).abs() <= 1e-9);
            }
        }

        #[test]
        fn penalty_sign_symmetry(g in proptest::collection::vec(-5.0f64..5.0, 1..6), gamma in 0.0f64..10.0) {
            let neg: Vec<f64> = g.iter().map(|x| -x).collect();
            prop_assert_eq!(step_mileage_penalty(gamma, &g), step_mileage_penalty(gamma, &neg));
        }
    }
}
