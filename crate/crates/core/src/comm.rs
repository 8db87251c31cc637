//! Pairwise communication: the rotating matching schedule and the per-UAV
//! packet store.
//!
//! UAVs are identified by zero-based ids; id 0 is the reported UAV.
//! At step `k` each UAV talks to (and ranges with) at most one partner,
//! given by [`CommSchedule::edge_set`]. Three matchings are cycled:
//!
//! - `E0`: `(0,1), (2,3), ...`
//! - `E1`: `(1,2), (3,4), ..., (M-1,0)`
//! - `E2`: `(0,M/2), (1,M/2+1), ...`
//!
//! where `M` is the group size rounded up to even. For odd groups the
//! phantom vertex `M-1` and its edges are removed.

use std::collections::BTreeMap;

use thiserror::Error;

/// Zero-based UAV index.
pub type UavId = usize;

/// Discrete filter step.
pub type Step = u64;

#[derive(Debug, Error, PartialEq)]
pub enum CommError {
    #[error("conflicting `{field}` for uav {uav} at step {time_index}")]
    ConflictingEntry {
        time_index: Step,
        uav: UavId,
        field: &'static str,
    },
    #[error("packet for {found} uavs merged into a store for {expected}")]
    GroupSizeMismatch { expected: usize, found: usize },
}

/// The cyclic `E0, E1, E2` schedule for a group of `n_uavs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommSchedule {
    n_uavs: usize,
}

impl CommSchedule {
    pub fn new(n_uavs: usize) -> Self {
        assert!(n_uavs >= 1, "group needs at least one uav");
        Self { n_uavs }
    }

    pub fn n_uavs(&self) -> usize {
        self.n_uavs
    }

    /// Group size rounded up to even.
    pub fn even_base(&self) -> usize {
        self.n_uavs + self.n_uavs % 2
    }

    /// Pairs `(a, b)` with `a < b` active at step `k`, sorted.
    pub fn edge_set(&self, k: Step) -> Vec<(UavId, UavId)> {
        if self.n_uavs < 2 {
            return Vec::new();
        }
        let m = self.even_base();
        let half = m / 2;
        let mut edges: Vec<(UavId, UavId)> = match k % 3 {
            0 => (0..half).map(|i| (2 * i, 2 * i + 1)).collect(),
            1 => (0..half)
                .map(|i| (2 * i + 1, (2 * i + 2) % m))
                .collect(),
            _ => (0..half).map(|i| (i, i + half)).collect(),
        };
        for e in &mut edges {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.retain(|&(a, b)| a < self.n_uavs && b < self.n_uavs && a != b);
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Partner of `uav` at step `k`, if any.
    pub fn partner(&self, uav: UavId, k: Step) -> Option<UavId> {
        self.edge_set(k).into_iter().find_map(|(a, b)| {
            if a == uav {
                Some(b)
            } else if b == uav {
                Some(a)
            } else {
                None
            }
        })
    }

    /// Every pair that appears in at least one of the three edge sets.
    pub fn measured_pairs(&self) -> Vec<(UavId, UavId)> {
        let mut all: Vec<_> = (0..3).flat_map(|k| self.edge_set(k)).collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Which UAVs hold a datum that `source` created at `start`, after the
    /// exchanges of steps `start, start+1, ..., start+exchanges-1`.
    pub fn informed_after(&self, source: UavId, start: Step, exchanges: u64) -> Vec<bool> {
        let mut informed = vec![false; self.n_uavs];
        informed[source] = true;
        for t in 0..exchanges {
            let before = informed.clone();
            for (a, b) in self.edge_set(start + t) {
                if before[a] || before[b] {
                    informed[a] = true;
                    informed[b] = true;
                }
            }
        }
        informed
    }

    /// Worst-case number of exchanges (over every source and schedule phase)
    /// until a datum has reached the whole group.
    pub fn propagation_steps(&self) -> u64 {
        if self.n_uavs < 2 {
            return 0;
        }
        let mut worst = 0;
        for source in 0..self.n_uavs {
            for phase in 0..3 {
                let mut informed = vec![false; self.n_uavs];
                informed[source] = true;
                let mut count = 1;
                let mut t = 0;
                while count < self.n_uavs {
                    let before = informed.clone();
                    for (a, b) in self.edge_set(phase + t) {
                        if before[a] != before[b] {
                            informed[a] = true;
                            informed[b] = true;
                            count += 1;
                        }
                    }
                    t += 1;
                    assert!(t <= 3 * self.n_uavs as u64, "schedule is disconnected");
                }
                worst = worst.max(t);
            }
        }
        worst
    }

    /// [`vertices_reached`] capped at the group size.
    pub fn vertices_reached(&self, k: u64) -> u64 {
        vertices_reached(k).min(self.n_uavs as u64)
    }
}

/// Vertices reached after `k` steps in an unbounded group (closed form).
pub fn vertices_reached(k: u64) -> u64 {
    if k <= 1 {
        2 * (k + 1)
    } else {
        4 * k - 4 * ((k - 2) / 3)
    }
}

/// `ceil(3N/8)`.
pub fn steps_lower_bound(n_uavs: usize) -> u64 {
    (3 * n_uavs as u64).div_ceil(8)
}

pub fn edge_set(n_uavs: usize, k: Step) -> Vec<(UavId, UavId)> {
    CommSchedule::new(n_uavs).edge_set(k)
}

pub fn propagation_steps(n_uavs: usize) -> u64 {
    CommSchedule::new(n_uavs).propagation_steps()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeMeasurement {
    pub partner: UavId,
    pub distance: f64,
}

/// One UAV's data for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketEntry {
    /// m/s, averaged over the step.
    pub velocity: f64,
    /// rad/s, averaged over the step.
    pub yaw_rate: f64,
    /// nT
    pub magnetic: f64,
    pub range: Option<RangeMeasurement>,
}

impl PacketEntry {
    fn first_difference(&self, other: &PacketEntry) -> Option<&'static str> {
        if self.velocity.to_bits() != other.velocity.to_bits() {
            return Some("velocity");
        }
        if self.yaw_rate.to_bits() != other.yaw_rate.to_bits() {
            return Some("yaw_rate");
        }
        if self.magnetic.to_bits() != other.magnetic.to_bits() {
            return Some("magnetic");
        }
        match (self.range, other.range) {
            (None, None) => None,
            (Some(a), Some(b)) if a.partner != b.partner => Some("range_partner"),
            (Some(a), Some(b)) if a.distance.to_bits() != b.distance.to_bits() => Some("range"),
            (Some(_), Some(_)) => None,
            _ => Some("range"),
        }
    }
}

/// Everything known about step `time_index`, possibly incomplete.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub time_index: Step,
    pub entries: Vec<Option<PacketEntry>>,
}

impl Packet {
    pub fn empty(time_index: Step, n_uavs: usize) -> Self {
        Self {
            time_index,
            entries: vec![None; n_uavs],
        }
    }

    pub fn single(time_index: Step, n_uavs: usize, uav: UavId, entry: PacketEntry) -> Self {
        let mut p = Self::empty(time_index, n_uavs);
        p.entries[uav] = Some(entry);
        p
    }

    pub fn is_complete(&self) -> bool {
        self.entries.iter().all(Option::is_some)
    }

    pub fn entry(&self, uav: UavId) -> Option<&PacketEntry> {
        self.entries.get(uav).and_then(Option::as_ref)
    }

    /// Union of entries; fails without partial writes on a conflict.
    pub fn merge_from(&mut self, other: &Packet) -> Result<(), CommError> {
        if other.entries.len() != self.entries.len() {
            return Err(CommError::GroupSizeMismatch {
                expected: self.entries.len(),
                found: other.entries.len(),
            });
        }
        for (uav, (mine, theirs)) in self.entries.iter().zip(&other.entries).enumerate() {
            if let (Some(a), Some(b)) = (mine, theirs) {
                if let Some(field) = a.first_difference(b) {
                    return Err(CommError::ConflictingEntry {
                        time_index: self.time_index,
                        uav,
                        field,
                    });
                }
            }
        }
        for (mine, theirs) in self.entries.iter_mut().zip(&other.entries) {
            if mine.is_none() {
                *mine = *theirs;
            }
        }
        Ok(())
    }

    /// Ranges in this packet as `(i, j, d)` with `i < j`.
    pub fn ranges(&self) -> Vec<(UavId, UavId, f64)> {
        let mut out: Vec<_> = self
            .entries
            .iter()
            .enumerate()
            .filter_map(|(uav, e)| {
                let r = e.as_ref()?.range?;
                (uav < r.partner).then_some((uav, r.partner, r.distance))
            })
            .collect();
        out.sort_by_key(|r| (r.0, r.1));
        out
    }

    /// `(k, uav, field, value)` rows for trace output.
    pub fn trace_rows(&self) -> Vec<(Step, UavId, &'static str, f64)> {
        let mut rows = Vec::new();
        for (uav, e) in self.entries.iter().enumerate() {
            let Some(e) = e else { continue };
            rows.push((self.time_index, uav, "velocity", e.velocity));
            rows.push((self.time_index, uav, "yaw_rate", e.yaw_rate));
            rows.push((self.time_index, uav, "magnetic", e.magnetic));
            if let Some(r) = e.range {
                rows.push((self.time_index, uav, "range_partner", r.partner as f64));
                rows.push((self.time_index, uav, "range", r.distance));
            }
        }
        rows
    }
}

/// Packets for steps `[now - horizon, now]` held by one UAV.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketStore {
    n_uavs: usize,
    horizon: u64,
    packets: BTreeMap<Step, Packet>,
}

impl PacketStore {
    pub fn new(n_uavs: usize, horizon: u64) -> Self {
        Self {
            n_uavs,
            horizon,
            packets: BTreeMap::new(),
        }
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn packet(&self, k: Step) -> Option<&Packet> {
        self.packets.get(&k)
    }

    pub fn packets(&self) -> impl Iterator<Item = &Packet> {
        self.packets.values()
    }

    /// Merges `incoming` and drops everything older than `now - horizon`.
    pub fn merge<'a, I>(&mut self, incoming: I, now: Step) -> Result<(), CommError>
    where
        I: IntoIterator<Item = &'a Packet>,
    {
        let oldest = now.saturating_sub(self.horizon);
        for p in incoming {
            if p.time_index < oldest {
                continue;
            }
            match self.packets.get_mut(&p.time_index) {
                Some(existing) => existing.merge_from(p)?,
                None => {
                    if p.entries.len() != self.n_uavs {
                        return Err(CommError::GroupSizeMismatch {
                            expected: self.n_uavs,
                            found: p.entries.len(),
                        });
                    }
                    self.packets.insert(p.time_index, p.clone());
                }
            }
        }
        self.packets = self.packets.split_off(&oldest);
        Ok(())
    }

    /// Stores this UAV's own measurements for step `k`.
    pub fn record(&mut self, k: Step, uav: UavId, entry: PacketEntry) -> Result<(), CommError> {
        let p = Packet::single(k, self.n_uavs, uav, entry);
        self.merge(std::iter::once(&p), k)
    }
}

/// Simultaneous pairwise exchange at step `now`: every pair trades the
/// contents its members held before the step.
pub fn exchange(
    stores: &mut [PacketStore],
    edges: &[(UavId, UavId)],
    now: Step,
) -> Result<(), CommError> {
    let snapshots: Vec<(UavId, UavId, Vec<Packet>, Vec<Packet>)> = edges
        .iter()
        .map(|&(a, b)| {
            (
                a,
                b,
                stores[a].packets().cloned().collect(),
                stores[b].packets().cloned().collect(),
            )
        })
        .collect();
    for (a, b, from_a, from_b) in snapshots {
        stores[a].merge(&from_b, now)?;
        stores[b].merge(&from_a, now)?;
    }
    Ok(())
}
