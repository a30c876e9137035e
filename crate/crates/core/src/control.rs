//! The VSS condition: exclusive VSS occupation plus the release rule for
//! trains without integrity monitoring.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::kinematics::{RouteTimeline, Train};
use crate::sections::{SectionId, SectionPartition};
use crate::report::ValidationReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConflictKind {
    VssExclusive,
    NonTimRelease,
}

impl fmt::Display for ConflictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConflictKind::VssExclusive => "VSS_EXCLUSIVE",
            ConflictKind::NonTimRelease => "NON_TIM_RELEASE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictRecord {
    pub t_ms: i64,
    pub kind: ConflictKind,
    pub section: SectionId,
    /// Train indices; for a release conflict the first one is the train
    /// holding the uncleared section.
    pub trains: Vec<usize>,
}

impl fmt::Display for ConflictRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let trains: Vec<String> = self.trains.iter().map(|t| format!("#{t}")).collect();
        write!(f, "t={} {} V{} {}", self.t_ms, self.kind, self.section.0, trains.join(","))
    }
}

fn check_grid(timelines: &[RouteTimeline], dt_ms: i64) -> Result<()> {
    if dt_ms <= 0 {
        return Err(Error::Sampling("dt must be positive".into()));
    }
    for tl in timelines {
        if let Some(step) = tl.uniform_step()? {
            if step != dt_ms {
                return Err(Error::Sampling(format!("train #{} sampled every {step} ms", tl.train)));
            }
        }
        if let Some(s) = tl.samples.first() {
            if s.t_ms.rem_euclid(dt_ms) != 0 {
                return Err(Error::Sampling(format!("train #{} off the common grid", tl.train)));
            }
        }
    }
    Ok(())
}

/// Occupied sections per train at every sample instant.
fn occupancy_by_time(
    timelines: &[RouteTimeline],
    part: &SectionPartition,
) -> BTreeMap<i64, Vec<(usize, BTreeSet<SectionId>)>> {
    let mut by_t: BTreeMap<i64, Vec<(usize, BTreeSet<SectionId>)>> = BTreeMap::new();
    for tl in timelines {
        for s in &tl.samples {
            let secs = s.state.range.edges().map(|e| part.section_of(e)).collect();
            by_t.entry(s.t_ms).or_default().push((tl.train, secs));
        }
    }
    by_t
}

fn exclusive_conflicts(
    t_ms: i64,
    occ: &[(usize, BTreeSet<SectionId>)],
    report: &mut ValidationReport<ConflictRecord>,
) {
    let mut holders: BTreeMap<SectionId, Vec<usize>> = BTreeMap::new();
    for (train, secs) in occ {
        for &s in secs {
            holders.entry(s).or_default().push(*train);
        }
    }
    for (section, mut trains) in holders {
        if trains.len() > 1 {
            trains.sort_unstable();
            report.push(ConflictRecord { t_ms, kind: ConflictKind::VssExclusive, section, trains });
        }
    }
}

pub fn check_vss_condition(
    timelines: &[RouteTimeline],
    trains: &[Train],
    vss: &SectionPartition,
    ttd: &SectionPartition,
    dt_ms: i64,
) -> Result<ValidationReport<ConflictRecord>> {
    check_grid(timelines, dt_ms)?;
    let vss_occ = occupancy_by_time(timelines, vss);
    let ttd_occ = occupancy_by_time(timelines, ttd);
    let mut report = ValidationReport::new();
    // (train, ttd) -> VSS sections touched during the current episode
    let mut history: BTreeMap<(usize, SectionId), BTreeSet<SectionId>> = BTreeMap::new();
    for (&t, occ) in &vss_occ {
        exclusive_conflicts(t, occ, &mut report);
        let ttds: BTreeMap<usize, &BTreeSet<SectionId>> =
            ttd_occ[&t].iter().map(|(tr, s)| (*tr, s)).collect();
        let now: BTreeMap<usize, &BTreeSet<SectionId>> = occ.iter().map(|(tr, s)| (*tr, s)).collect();
        // drop episodes of trains that left their TTD (or the network)
        history.retain(|(tr, h), _| {
            ttds.get(tr).is_some_and(|s| s.contains(h))
                && timelines.iter().any(|tl| tl.train == *tr && tl.at(t - dt_ms).is_some())
        });
        for (&tr, secs) in &now {
            if trains[tr].tim {
                continue;
            }
            for &v in secs.iter() {
                let h = ttd.section_of(vss.edges(v)[0]);
                history.entry((tr, h)).or_default().insert(v);
            }
            for &h in ttds[&tr].iter() {
                history.entry((tr, h)).or_default();
            }
        }
        for ((holder, _), touched) in &history {
            for &v in touched {
                if now[holder].contains(&v) {
                    continue;
                }
                for (&other, secs) in &now {
                    if other != *holder && secs.contains(&v) {
                        report.push(ConflictRecord {
                            t_ms: t,
                            kind: ConflictKind::NonTimRelease,
                            section: v,
                            trains: vec![*holder, other],
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Exclusive-occupation check only; valid when every train has TIM.
pub fn all_tim_fast_path(
    timelines: &[RouteTimeline],
    trains: &[Train],
    vss: &SectionPartition,
    dt_ms: i64,
) -> Result<ValidationReport<ConflictRecord>> {
    if let Some(tl) = timelines.iter().find(|tl| !trains[tl.train].tim) {
        return Err(Error::NotApplicable(format!(
            "train {} has no integrity monitoring",
            trains[tl.train].name
        )));
    }
    check_grid(timelines, dt_ms)?;
    let mut report = ValidationReport::new();
    for (t, occ) in occupancy_by_time(timelines, vss) {
        exclusive_conflicts(t, &occ, &mut report);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{Sample, TrackInterval, TrackRange, TrainState};
    use crate::network::{Border, EdgeId, NetworkBuilder, RailwayNetwork};
    use crate::sections::{derive_sections, Level};

    /// a |TTD| p -VSS- q |TTD| b, three edges of 10 m, one TTD, three VSS.
    fn line() -> RailwayNetwork {
        let mut nb = NetworkBuilder::new();
        let a = nb.boundary("a", 0);
        let p = nb.vertex("p", Border::Vss);
        let q = nb.vertex("q", Border::Vss);
        let b = nb.boundary("b", 0);
        let e0 = nb.edge("e0", a, p, 10_000);
        let e1 = nb.edge("e1", p, q, 10_000);
        let e2 = nb.edge("e2", q, b, 10_000);
        nb.allow(e0, &[e1]);
        nb.allow(e1, &[e2]);
        nb.build()
    }

    fn train(tim: bool) -> Train {
        Train {
            name: if tim { "tim".into() } else { "plain".into() },
            length_mm: 3000,
            v_max_mm_s: 10_000,
            accel_mm_s2: 1000,
            decel_mm_s2: 1000,
            tim,
        }
    }

    fn tl(train: usize, t0: i64, spans: &[(u32, i64, i64)]) -> RouteTimeline {
        RouteTimeline {
            train,
            samples: spans
                .iter()
                .enumerate()
                .map(|(i, &(e, a, b))| Sample {
                    t_ms: t0 + i as i64 * 1000,
                    state: TrainState {
                        range: TrackRange {
                            s_in_mm: 0,
                            intervals: vec![TrackInterval::new(EdgeId(e), a, b)],
                            s_out_mm: 0,
                        },
                        v_mm_s: 0,
                    },
                })
                .collect(),
        }
    }

    #[test]
    fn single_train_is_always_fine() {
        let net = line();
        let (v, t) = (derive_sections(&net, Level::Vss), derive_sections(&net, Level::Ttd));
        let a = tl(0, 0, &[(0, 0, 3000), (1, 0, 3000), (2, 0, 3000)]);
        let r = check_vss_condition(&[a], &[train(false)], &v, &t, 1000).unwrap();
        assert!(r.is_ok());
    }

    #[test]
    fn shared_vss_is_a_conflict() {
        let net = line();
        let (v, t) = (derive_sections(&net, Level::Vss), derive_sections(&net, Level::Ttd));
        let a = tl(0, 0, &[(1, 0, 3000)]);
        let b = tl(1, 0, &[(1, 5000, 8000)]);
        let r = check_vss_condition(&[a, b], &[train(true), train(true)], &v, &t, 1000).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.violations[0].kind, ConflictKind::VssExclusive);
        assert_eq!(r.violations[0].trains, vec![0, 1]);
    }

    /// Leader clears e0 but stays in the TTD; follower enters e0.
    fn release_scenario(leader_tim: bool) -> ValidationReport<ConflictRecord> {
        let net = line();
        let (v, t) = (derive_sections(&net, Level::Vss), derive_sections(&net, Level::Ttd));
        let leader = tl(0, 0, &[(0, 5000, 8000), (1, 2000, 5000), (1, 6000, 9000)]);
        let follower = tl(1, 2000, &[(0, 0, 3000)]);
        let trains = [train(leader_tim), train(true)];
        check_vss_condition(&[leader, follower], &trains, &v, &t, 1000).unwrap()
    }

    #[test]
    fn non_tim_release_scenario() {
        let r = release_scenario(false);
        assert_eq!(r.len(), 1);
        let c = &r.violations[0];
        assert_eq!((c.t_ms, c.kind, c.section, c.trains.clone()), (2000, ConflictKind::NonTimRelease, SectionId(0), vec![0, 1]));
        assert!(release_scenario(true).is_ok());
    }

    #[test]
    fn leaving_the_ttd_resets_history() {
        let mut nb = NetworkBuilder::new();
        let a = nb.boundary("a", 0);
        let p = nb.vertex("p", Border::Vss);
        let q = nb.vertex("q", Border::Ttd);
        let b = nb.boundary("b", 0);
        let e0 = nb.edge("e0", a, p, 10_000);
        let e1 = nb.edge("e1", p, q, 10_000);
        let e2 = nb.edge("e2", q, b, 10_000);
        nb.allow(e0, &[e1]);
        nb.allow(e1, &[e2]);
        let net = nb.build();
        let (v, t) = (derive_sections(&net, Level::Vss), derive_sections(&net, Level::Ttd));
        // non-TIM leader moves from e0 to e2 (other TTD); follower then uses e0
        let leader = tl(0, 0, &[(0, 0, 3000), (2, 0, 3000), (2, 4000, 7000)]);
        let follower = tl(1, 1000, &[(0, 0, 3000), (1, 0, 3000)]);
        let r = check_vss_condition(&[leader, follower], &[train(false), train(true)], &v, &t, 1000)
            .unwrap();
        assert!(r.is_ok(), "{r}");
    }

    #[test]
    fn fast_path_rules() {
        let net = line();
        let v = derive_sections(&net, Level::Vss);
        assert!(all_tim_fast_path(&[], &[], &v, 1000).unwrap().is_ok());
        let a = tl(0, 0, &[(1, 0, 3000)]);
        assert!(all_tim_fast_path(&[a], &[train(false)], &v, 1000).is_err());
    }

    #[test]
    fn mismatched_grids_rejected() {
        let net = line();
        let (v, t) = (derive_sections(&net, Level::Vss), derive_sections(&net, Level::Ttd));
        let a = tl(0, 500, &[(1, 0, 3000)]);
        assert!(check_vss_condition(&[a], &[train(true)], &v, &t, 1000).is_err());
    }
}
