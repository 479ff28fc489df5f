//! The digital twin's stale view of the world: periodic snapshots of the
//! catalog and request history, and the purchasable set derived from them.

use std::ops::Range;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{aoi, ContentIdx, Slot};
use crate::workload::{io, Workload, WorkloadError};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("DT update interval must be at least 1")]
pub struct ZeroInterval;

/// Updates fire at every slot that is a multiple of `interval`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UpdateSchedule {
    interval: u64,
}

impl UpdateSchedule {
    pub fn new(interval: u64) -> Result<Self, ZeroInterval> {
        if interval == 0 {
            return Err(ZeroInterval);
        }
        Ok(UpdateSchedule { interval })
    }

    pub fn interval(&self) -> u64 {
        self.interval
    }

    pub fn is_update_slot(&self, t: Slot) -> bool {
        t.is_multiple_of(self.interval)
    }
}

/// Most recent update slot at or before `t`.
pub fn last_update_slot(t: Slot, schedule: &UpdateSchedule) -> Slot {
    t / schedule.interval * schedule.interval
}

/// What the twin knew at `taken_at`.
///
/// Visible contents are those generated at or before `taken_at`. History holds
/// the slots strictly before `taken_at`: at an update slot the requests of that
/// slot have not arrived yet when decisions are made.
#[derive(Clone, Debug)]
pub struct DtSnapshot<'w> {
    taken_at: Slot,
    workload: &'w Workload,
    visible_end: u32,
    purchasable: Range<u32>,
}

/// Builds the snapshot of `workload` as seen at slot `t`.
pub fn take_snapshot(workload: &Workload, t: Slot, phi: u64) -> DtSnapshot<'_> {
    let visible_end = workload.catalog.generated_between(0, t + 1).end;
    let purchasable = workload.catalog.generated_between(t.saturating_sub(phi), t);
    DtSnapshot { taken_at: t, workload, visible_end, purchasable }
}

impl<'w> DtSnapshot<'w> {
    pub fn taken_at(&self) -> Slot {
        self.taken_at
    }

    pub fn workload(&self) -> &'w Workload {
        self.workload
    }

    pub fn is_visible(&self, idx: ContentIdx) -> bool {
        idx.0 < self.visible_end
    }

    pub fn visible(&self) -> impl Iterator<Item = ContentIdx> {
        (0..self.visible_end).map(ContentIdx)
    }

    /// N_p' in index order.
    pub fn purchasable_at_snapshot(&self) -> impl Iterator<Item = ContentIdx> {
        self.purchasable.clone().map(ContentIdx)
    }

    /// Number of history slots available for a visible content.
    pub fn history_len(&self, idx: ContentIdx) -> u64 {
        let t_gen = self.workload.catalog.get(idx).t_gen;
        self.taken_at.saturating_sub(t_gen + 1)
    }

    /// The last `max_len` history counts (all of them when `None`), oldest
    /// first. Invisible contents have no history.
    pub fn history(&self, idx: ContentIdx, max_len: Option<u64>) -> Vec<u32> {
        if !self.is_visible(idx) {
            return Vec::new();
        }
        let len = self.history_len(idx);
        let take = max_len.map_or(len, |m| m.min(len));
        self.workload.trace.window(idx, self.taken_at - take, self.taken_at)
    }

    /// Writes the visible catalog and history as catalog and trace CSVs, each
    /// headed by a `taken_at` comment.
    pub fn dump(&self, dir: &Path) -> Result<(PathBuf, PathBuf), WorkloadError> {
        std::fs::create_dir_all(dir).map_err(|source| WorkloadError::Io { path: dir.display().to_string(), source })?;
        let comments = [format!("taken_at={}", self.taken_at)];
        let catalog = dir.join(format!("snapshot_{}_catalog.csv", self.taken_at));
        let trace = dir.join(format!("snapshot_{}_trace.csv", self.taken_at));
        let entries = &self.workload.catalog.entries()[..self.visible_end as usize];
        io::write_catalog_rows(&catalog, entries, &comments)?;
        io::write_trace_until(&trace, self.workload, self.taken_at, &comments)?;
        Ok((catalog, trace))
    }
}

/// N_p†: the snapshot's purchasable set minus contents whose AoI at `now`
/// exceeds `phi`. Index order.
pub fn visible_purchasable_set(snapshot: &DtSnapshot<'_>, now: Slot, phi: u64) -> Vec<ContentIdx> {
    debug_assert!(now >= snapshot.taken_at);
    let catalog = &snapshot.workload.catalog;
    snapshot
        .purchasable_at_snapshot()
        .filter(|&i| aoi(now, catalog.get(i).t_gen) <= phi)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Catalog, ContentCatalogEntry, ContentId};
    use crate::money::Money;
    use crate::workload::{RequestTrace, TraceRow};

    fn workload(t_gens: &[u64]) -> Workload {
        let entries = t_gens
            .iter()
            .enumerate()
            .map(|(i, &t_gen)| ContentCatalogEntry {
                id: ContentId(i as u64),
                t_gen,
                size: 1,
                price: Money::from_units(1),
                fee_ceiling: Money::from_units(30),
            })
            .collect();
        let catalog = Catalog::new(entries).unwrap();
        let rows = catalog
            .entries()
            .iter()
            .map(|e| TraceRow { start: e.t_gen + 1, counts: (1..=20).collect() })
            .collect();
        Workload::new(catalog, RequestTrace::from_rows(rows))
    }

    #[test]
    fn last_update_examples() {
        let s = UpdateSchedule::new(5).unwrap();
        assert_eq!(last_update_slot(13, &s), 10);
        assert_eq!(last_update_slot(10, &s), 10);
        let one = UpdateSchedule::new(1).unwrap();
        assert!((0..50).all(|t| last_update_slot(t, &one) == t));
        assert_eq!(UpdateSchedule::new(0), Err(ZeroInterval));
    }

    #[test]
    fn visibility_and_purchasable_boundaries() {
        // phi = 30: t_gen 12 invisible at 10; t_gen 10 has aoi 0; t_gen 0 has aoi 10.
        let w = workload(&[0, 10, 12]);
        let snap = take_snapshot(&w, 10, 30);
        let visible: Vec<_> = snap.visible().collect();
        assert_eq!(visible, vec![ContentIdx(0), ContentIdx(1)]);
        assert!(!snap.is_visible(ContentIdx(2)));
        assert!(snap.history(ContentIdx(2), None).is_empty());
        assert_eq!(snap.purchasable_at_snapshot().collect::<Vec<_>>(), vec![ContentIdx(0)]);
        // aoi(taken_at) == phi is included.
        let snap = take_snapshot(&w, 30, 30);
        assert!(snap.purchasable_at_snapshot().any(|i| i == ContentIdx(0)));
        let snap = take_snapshot(&w, 31, 30);
        assert!(!snap.purchasable_at_snapshot().any(|i| i == ContentIdx(0)));
    }

    #[test]
    fn history_stops_before_snapshot() {
        let w = workload(&[3]);
        let snap = take_snapshot(&w, 8, 30);
        // Slots 4..8 hold counts 1..=4.
        assert_eq!(snap.history(ContentIdx(0), None), vec![1, 2, 3, 4]);
        assert_eq!(snap.history(ContentIdx(0), Some(2)), vec![3, 4]);
        assert_eq!(snap.history(ContentIdx(0), Some(0)), Vec::<u32>::new());
        assert_eq!(take_snapshot(&w, 4, 30).history(ContentIdx(0), None), Vec::<u32>::new());
    }

    #[test]
    fn stale_contents_leave_the_purchasable_set() {
        // At 10 both a (t_gen 0) and b (t_gen 5) are purchasable; at 14 a has aoi 14 > 13.
        let w = workload(&[0, 5]);
        let snap = take_snapshot(&w, 10, 13);
        assert_eq!(visible_purchasable_set(&snap, 10, 13), vec![ContentIdx(0), ContentIdx(1)]);
        assert_eq!(visible_purchasable_set(&snap, 14, 13), vec![ContentIdx(1)]);
    }

    #[test]
    fn content_generated_after_update_stays_invisible_for_the_period() {
        // b = 10, interval 10: the update at 10 precedes the content at 11, so at
        // the period start 20 it is visible only because of the update at 20.
        let w = workload(&[11]);
        let s = UpdateSchedule::new(10).unwrap();
        for now in 11..20 {
            let snap = take_snapshot(&w, last_update_slot(now, &s), 30);
            assert!(!snap.is_visible(ContentIdx(0)));
        }
        let snap = take_snapshot(&w, last_update_slot(20, &s), 30);
        assert_eq!(visible_purchasable_set(&snap, 20, 30), vec![ContentIdx(0)]);
    }

    #[test]
    fn dump_writes_visible_part_only() {
        let w = workload(&[0, 2, 9]);
        let dir = tempfile::tempdir().unwrap();
        let (cat, trace) = take_snapshot(&w, 4, 30).dump(dir.path()).unwrap();
        let cat = std::fs::read_to_string(cat).unwrap();
        assert!(cat.starts_with("# taken_at=4\n"));
        assert_eq!(cat.lines().count(), 4);
        let trace = std::fs::read_to_string(trace).unwrap();
        // Content 0: slots 1..=3; content 1: slot 3.
        assert_eq!(trace.lines().count(), 2 + 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn nested_sets_and_monotone_visibility(
                t_gens in proptest::collection::vec(0u64..60, 1..20),
                now in 0u64..80, phi in 0u64..40, d1 in 1u64..12, d2 in 1u64..12,
            ) {
                let w = workload(&t_gens);
                let (small, large) = (d1.min(d2), d1.max(d2));
                let fine = UpdateSchedule::new(small).unwrap();
                let coarse = UpdateSchedule::new(large).unwrap();
                let snap = take_snapshot(&w, last_update_slot(now, &coarse), phi);
                let dagger = visible_purchasable_set(&snap, now, phi);
                let prime: Vec<_> = snap.purchasable_at_snapshot().collect();
                prop_assert!(dagger.iter().all(|i| prime.contains(i)));
                prop_assert!(prime.iter().all(|&i| snap.is_visible(i)));
                let fresh = take_snapshot(&w, now, phi);
                prop_assert_eq!(visible_purchasable_set(&fresh, now, phi), w.catalog.purchasable_at(now, phi));
                // Monotone visibility only compares nested schedules.
                if large % small == 0 {
                    let finer = take_snapshot(&w, last_update_slot(now, &fine), phi);
                    let finer_set = visible_purchasable_set(&finer, now, phi);
                    prop_assert!(dagger.iter().all(|i| finer_set.contains(i)));
                }
            }
        }
    }
}
