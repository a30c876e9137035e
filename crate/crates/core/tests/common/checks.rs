//! Property checks returning a description of the first failure.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;

use htd_core::control::{all_tim_fast_path, check_vss_condition};
use htd_core::network::{EdgeId, RailwayNetwork};
use htd_core::operator::{apply_vss_operator, VssOperator};
use htd_core::sections::{derive_sections, Level};

use super::gen;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Derived partitions equal the oracle, cover every edge once and the VSS
/// partition refines the TTD partition.
pub fn partition<R: Rng>(rng: &mut R) -> Result<(), String> {
    let net = gen::random_network(rng);
    let ttd = derive_sections(&net, Level::Ttd);
    let vss = derive_sections(&net, Level::Vss);
    for (p, level) in [(&ttd, 2), (&vss, 1)] {
        let got: Vec<BTreeSet<EdgeId>> = p.sections.iter().map(|s| s.iter().copied().collect()).collect();
        ensure(got == gen::oracle_sections(&net, level), || format!("level {level} partition differs from oracle"))?;
        let total: usize = p.sections.iter().map(Vec::len).sum();
        ensure(total == net.edge_count(), || "sections do not partition the edges".into())?;
        for e in net.edge_ids() {
            ensure(p.sections[p.section_of(e).idx()].contains(&e), || "edge_to_section inconsistent".into())?;
        }
    }
    ensure(vss.refines(&ttd), || "VSS partition does not refine TTD partition".into())
}

/// Network shape without names: sorted (source, target, length) triples
/// with the new vertex replaced by a fixed token, and vertex borders.
fn shape(net: &RailwayNetwork, new_vertex: &str) -> (Vec<(String, String, i64)>, Vec<(String, u8)>) {
    let name = |v| {
        let n = &net.vertex(v).name;
        if n == new_vertex {
            "*".to_string()
        } else {
            n.clone()
        }
    };
    let mut edges: Vec<_> = net.edges().map(|(_, e)| (name(e.source), name(e.target), e.length_mm)).collect();
    edges.sort();
    let mut vs: Vec<_> = net.vertices().map(|(v, x)| (name(v), x.border.level())).collect();
    vs.sort();
    (edges, vs)
}

fn walk_length(net: &RailwayNetwork, w: &[EdgeId]) -> i64 {
    w.iter().map(|&e| net.length(e)).sum()
}

/// One random split on a random tree: exact lengths, section counts,
/// movement equivalence in both directions, and symmetry under reversal.
pub fn operator<R: Rng>(rng: &mut R, walks: usize) -> Result<(), String> {
    let net = gen::random_tree(rng);
    let edges: Vec<EdgeId> = net.edge_ids().collect();
    let e = *edges.choose(rng).unwrap();
    let len = net.length(e);
    let off = rng.gen_range(1..len);
    let op = VssOperator { edge: e, rho: Ratio::new(off, len) };
    let a = apply_vss_operator(&net, &[], &op).map_err(|err| err.to_string())?;
    let new = &a.network;
    ensure(new.validate().is_ok(), || format!("result invalid: {}", new.validate()))?;
    ensure(new.total_length_mm() == net.total_length_mm(), || "total length changed".into())?;
    for old in net.edge_ids() {
        let kids = a.refinement.refine_edge(old);
        ensure(walk_length(new, kids) == net.length(old), || format!("children of {} lose length", old.0))?;
    }
    let (v0, v1) = (derive_sections(&net, Level::Vss).len(), derive_sections(new, Level::Vss).len());
    ensure(v1 == v0 + 1, || format!("VSS count {v0} -> {v1}"))?;
    let (t0, t1) = (derive_sections(&net, Level::Ttd).len(), derive_sections(new, Level::Ttd).len());
    ensure(t1 == t0, || format!("TTD count {t0} -> {t1}"))?;

    let mut parent: BTreeMap<EdgeId, EdgeId> = BTreeMap::new();
    for old in net.edge_ids() {
        for &k in a.refinement.refine_edge(old) {
            parent.insert(k, old);
        }
    }
    for _ in 0..walks {
        let w = gen::random_walk(&net, rng);
        let r = a.refinement.refine_sequence(&w);
        ensure(new.is_valid_track_sequence(&r).unwrap(), || format!("refined walk {w:?} invalid"))?;
        ensure(walk_length(new, &r) == walk_length(&net, &w), || "refined walk changes length".into())?;
        let w2 = gen::random_walk(new, rng);
        let mut back: Vec<EdgeId> = w2.iter().map(|k| parent[k]).collect();
        back.dedup();
        ensure(net.is_valid_track_sequence(&back).unwrap(), || format!("coarsened walk {w2:?} invalid"))?;
    }

    if let Some(r) = net.reverse(e) {
        let mirror = VssOperator { edge: r, rho: Ratio::from_integer(1) - op.rho };
        let b = apply_vss_operator(&net, &[], &mirror).map_err(|err| err.to_string())?;
        let na = &new.vertex(a.new_vertices[0]).name;
        let nb = &b.network.vertex(b.new_vertices[0]).name;
        ensure(shape(new, na) == shape(&b.network, nb), || "split and mirrored split differ".into())?;
    }
    Ok(())
}

/// The exclusive-only check agrees with the full check on all-TIM
/// scenarios, and without VSS-only borders both agree with per-TTD
/// exclusivity.
pub fn all_tim<R: Rng>(rng: &mut R) -> Result<(), String> {
    let vss_borders = rng.gen_bool(0.5);
    let (net, trains, tls) = gen::random_scenario(rng, true, vss_borders);
    let vss = derive_sections(&net, Level::Vss);
    let ttd = derive_sections(&net, Level::Ttd);
    let full = check_vss_condition(&tls, &trains, &vss, &ttd, 1000).map_err(|e| e.to_string())?;
    let fast = all_tim_fast_path(&tls, &trains, &vss, 1000).map_err(|e| e.to_string())?;
    ensure(full.violations == fast.violations, || "fast path and full check disagree".into())?;
    if !vss_borders {
        let classical = gen::classical_ttd_ok(&net, &tls);
        ensure(full.is_ok() == classical, || format!("full {} vs per-TTD {classical}", full.is_ok()))?;
    }
    Ok(())
}
