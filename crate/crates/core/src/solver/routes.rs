//! Enumeration of simple routes between two border vertices.

use crate::network::{EdgeId, RailwayNetwork, VertexId};
use crate::timetable::{Station, TimetableRequest};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RouteEnumeration {
    pub routes: Vec<Vec<EdgeId>>,
    /// True when `max_routes` cut the enumeration short.
    pub truncated: bool,
}

/// Valid track sequences from the request's entry to its exit vertex that
/// never revisit a vertex and pass the stop stations in order. Routes are
/// produced in depth-first order over ascending edge ids.
pub fn enumerate_routes(
    net: &RailwayNetwork,
    req: &TimetableRequest,
    stations: &[Station],
    max_routes: usize,
) -> RouteEnumeration {
    let mut out = RouteEnumeration::default();
    let mut visited = vec![false; net.vertex_count()];
    visited[req.entry.idx()] = true;
    let mut path = Vec::new();
    let mut first: Vec<EdgeId> = net.out_edges(req.entry).to_vec();
    first.sort_unstable();
    for e in first {
        if out.truncated {
            break;
        }
        dfs(net, req, stations, max_routes, e, &mut visited, &mut path, &mut out);
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    net: &RailwayNetwork,
    req: &TimetableRequest,
    stations: &[Station],
    max_routes: usize,
    e: EdgeId,
    visited: &mut Vec<bool>,
    path: &mut Vec<EdgeId>,
    out: &mut RouteEnumeration,
) {
    let w: VertexId = net.target(e);
    if visited[w.idx()] {
        return;
    }
    path.push(e);
    if w == req.exit {
        if hosts_stops(path, req, stations) {
            if out.routes.len() == max_routes {
                out.truncated = true;
            } else {
                out.routes.push(path.clone());
            }
        }
    } else {
        visited[w.idx()] = true;
        if let Ok(next) = net.successors(e) {
            for &f in next {
                if out.truncated {
                    break;
                }
                dfs(net, req, stations, max_routes, f, visited, path, out);
            }
        }
        visited[w.idx()] = false;
    }
    path.pop();
}

/// Every stop has a station edge on the route, in stop order.
pub(crate) fn hosts_stops(route: &[EdgeId], req: &TimetableRequest, stations: &[Station]) -> bool {
    let mut i = 0;
    for stop in &req.stops {
        let st = &stations[stop.station];
        match route[i..].iter().position(|e| st.edges.contains(e)) {
            Some(p) => i += p,
            None => return false,
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests::siding;
    use crate::timetable::TimeWindow;

    fn req(net: &RailwayNetwork, from: &str, to: &str) -> TimetableRequest {
        TimetableRequest {
            train: 0,
            entry: net.vertex_id(from).unwrap(),
            entry_window: TimeWindow::new(0, 0),
            exit: net.vertex_id(to).unwrap(),
            exit_window: TimeWindow::new(0, 100_000),
            stops: vec![],
            route: None,
            weight: 1,
            optional: false,
        }
    }

    #[test]
    fn siding_has_main_line_and_loop() {
        let net = siding();
        let r = enumerate_routes(&net, &req(&net, "v1", "v5"), &[], 64);
        assert_eq!(r.routes.len(), 2);
        assert!(!r.truncated);
        for route in &r.routes {
            assert!(net.is_valid_track_sequence(route).unwrap());
        }
        let r = enumerate_routes(&net, &req(&net, "v1", "v5"), &[], 1);
        assert_eq!(r.routes.len(), 1);
        assert!(r.truncated);
    }

    #[test]
    fn no_path_gives_nothing() {
        let net = siding();
        let r = enumerate_routes(&net, &req(&net, "v1", "v1"), &[], 64);
        assert!(r.routes.is_empty());
    }
}
