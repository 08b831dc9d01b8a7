//! Successive-shortest-path min-cost flow.
//!
//! Costs may be negative (commuter minutes can be under triangle-inequality
//! violations), so augmenting paths are found with SPFA rather than
//! Dijkstra. The assignment networks built here are layered and acyclic, so
//! no negative cycle can arise and successive shortest paths stay exact.
//! Capacities are integers; augmentation is by integral bottlenecks, so the
//! optimum is integral.

use crate::scalar::Scalar;

#[derive(Debug, Clone)]
struct Edge<T> {
    to: usize,
    residual: i64,
    initial: i64,
    cost: T,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork<T> {
    edges: Vec<Edge<T>>,
    adjacency: Vec<Vec<usize>>,
}

impl<T: Scalar> FlowNetwork<T> {
    pub fn new(n_nodes: usize) -> Self {
        Self {
            edges: Vec::new(),
            adjacency: vec![Vec::new(); n_nodes],
        }
    }

    /// Add a forward edge (and its zero-capacity twin); returns the forward
    /// edge id for later flow queries.
    pub fn add_edge(&mut self, from: usize, to: usize, capacity: i64, cost: T) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge {
            to,
            residual: capacity,
            initial: capacity,
            cost,
        });
        self.edges.push(Edge {
            to: from,
            residual: 0,
            initial: 0,
            cost: -cost,
        });
        self.adjacency[from].push(id);
        self.adjacency[to].push(id + 1);
        id
    }

    /// Units routed through a forward edge.
    pub fn flow_on(&self, edge_id: usize) -> i64 {
        self.edges[edge_id].initial - self.edges[edge_id].residual
    }

    /// Push as much flow as possible from `source` to `sink` at minimum
    /// cost; returns `(flow, cost)`.
    pub fn min_cost_max_flow(&mut self, source: usize, sink: usize) -> (i64, T) {
        let n = self.adjacency.len();
        let mut total_flow = 0i64;
        let mut total_cost = T::zero();
        loop {
            // SPFA shortest path on the residual graph.
            let mut dist = vec![T::infinity(); n];
            let mut parent_edge = vec![usize::MAX; n];
            let mut in_queue = vec![false; n];
            let mut queue = std::collections::VecDeque::new();
            dist[source] = T::zero();
            queue.push_back(source);
            in_queue[source] = true;
            // Relaxations demand a real improvement: float rounding on
            // fractional costs can otherwise cycle forever through
            // zero-weight residual loops. The slack this leaves is far
            // below any caller's decision tolerance.
            let epsilon = T::from_f64_c(1e-12);
            while let Some(node) = queue.pop_front() {
                in_queue[node] = false;
                let node_dist = dist[node];
                for &edge_id in &self.adjacency[node] {
                    let edge = &self.edges[edge_id];
                    if edge.residual > 0 {
                        let candidate = node_dist + edge.cost;
                        let slack = epsilon * (T::one() + candidate.abs());
                        if candidate + slack < dist[edge.to] {
                            dist[edge.to] = candidate;
                            parent_edge[edge.to] = edge_id;
                            if !in_queue[edge.to] {
                                queue.push_back(edge.to);
                                in_queue[edge.to] = true;
                            }
                        }
                    }
                }
            }
            if parent_edge[sink] == usize::MAX {
                break;
            }
            // Bottleneck along the path.
            let mut bottleneck = i64::MAX;
            let mut node = sink;
            while node != source {
                let edge_id = parent_edge[node];
                bottleneck = bottleneck.min(self.edges[edge_id].residual);
                node = self.edges[edge_id ^ 1].to;
            }
            // Apply.
            let mut node = sink;
            while node != source {
                let edge_id = parent_edge[node];
                self.edges[edge_id].residual -= bottleneck;
                self.edges[edge_id ^ 1].residual += bottleneck;
                total_cost += T::from_count(bottleneck as u64) * self.edges[edge_id].cost;
                node = self.edges[edge_id ^ 1].to;
            }
            total_flow += bottleneck;
        }
        (total_flow, total_cost)
    }
}
