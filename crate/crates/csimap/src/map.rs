//! The CSI map: a weighted directed graph over quantized channel states.
//!
//! Each node holds one distinct quantized state; edges carry transition
//! weights that are reinforced online and always sum to 1 out of any node
//! that has outgoing edges. Every terminal owns a cursor pointing at the
//! node the base station currently believes it occupies. Prediction follows
//! the maximum-weight edge out of the cursor; garbage collection prunes
//! weak edges and deletes fully isolated nodes.

use crate::quantizer::Qcsi;
use std::collections::HashMap;
use std::fmt::Write as _;
use thiserror::Error;

pub type NodeId = usize;

const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("terminal {0} out of range")]
    BadTerminal(usize),
    #[error("node {0} does not exist")]
    BadNode(NodeId),
    #[error("winner index {winner} out of range for {edges} edges")]
    BadWinner { winner: usize, edges: usize },
    #[error("map file, line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("learning rate must lie in (0, 1), got {0}")]
    BadLearningRate(f64),
    #[error("prune threshold must lie in [0, 1), got {0}")]
    BadPruneThreshold(f64),
}

/// Why a prediction could not be made. Either way the caller must fall back
/// to an Initiative (pilot-carrying) session for that terminal.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PredictError {
    #[error("terminal has no cursor yet")]
    NoHistory,
    #[error("cursor node has no outgoing edges yet")]
    ColdNode,
}

/// Outcome flags for one [`CsiMap::observe`] call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObserveOutcome {
    pub created_node: bool,
    pub created_edge: bool,
}

/// Edge/node removal counts from one garbage-collection pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GcReport {
    pub edges_removed: usize,
    pub nodes_removed: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    qcsi: Qcsi,
    out: Vec<Edge>,
    incoming: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Edge {
    to: NodeId,
    weight: f64,
}

/// Reinforces `weights[winner]` in place: the winner gains
/// `min(theta, 1 - w_winner)` and every other weight gives up a share
/// proportional to its fraction of the loser mass. Sums and bounds are
/// preserved exactly up to rounding.
pub fn reinforce(weights: &mut [f64], winner: usize, theta: f64) -> Result<(), MapError> {
    if winner >= weights.len() {
        return Err(MapError::BadWinner {
            winner,
            edges: weights.len(),
        });
    }
    if !(0.0 < theta && theta < 1.0) {
        return Err(MapError::BadLearningRate(theta));
    }
    let w_winner = weights[winner];
    let step = theta.min(1.0 - w_winner);
    if step <= 0.0 {
        return Ok(());
    }
    let loser_mass: f64 = weights
        .iter()
        .enumerate()
        .filter(|(c, _)| *c != winner)
        .map(|(_, w)| *w)
        .sum();
    if loser_mass <= 0.0 {
        return Ok(());
    }
    // step <= 1 - w_winner = loser_mass when the weights sum to 1, so the
    // proportional decrement can never push a loser below zero.
    let drain = step / loser_mass;
    for (c, w) in weights.iter_mut().enumerate() {
        if c == winner {
            *w += step;
        } else {
            *w -= *w * drain;
        }
        *w = w.clamp(0.0, 1.0);
    }
    Ok(())
}

/// The per-base-station graph of quantized channel states.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiMap {
    /// Slot per node id; garbage-collected slots stay `None` so ids are
    /// never reused.
    nodes: Vec<Option<Node>>,
    index: HashMap<Qcsi, NodeId>,
    cursors: Vec<Option<NodeId>>,
    learning_rate: f64,
    prune_threshold: f64,
    codebook_version: u32,
    live_nodes: usize,
    live_edges: usize,
}

impl CsiMap {
    /// `terminals` fixes the cursor table size; `learning_rate` is the
    /// reinforcement step and `prune_threshold` the GC cutoff.
    pub fn new(
        terminals: usize,
        learning_rate: f64,
        prune_threshold: f64,
        codebook_version: u32,
    ) -> Result<Self, MapError> {
        if !(0.0 < learning_rate && learning_rate < 1.0) {
            return Err(MapError::BadLearningRate(learning_rate));
        }
        if !(0.0..1.0).contains(&prune_threshold) {
            return Err(MapError::BadPruneThreshold(prune_threshold));
        }
        Ok(CsiMap {
            nodes: Vec::new(),
            index: HashMap::new(),
            cursors: vec![None; terminals],
            learning_rate,
            prune_threshold,
            codebook_version,
            live_nodes: 0,
            live_edges: 0,
        })
    }

    pub fn node_count(&self) -> usize {
        self.live_nodes
    }

    pub fn edge_count(&self) -> usize {
        self.live_edges
    }

    pub fn terminals(&self) -> usize {
        self.cursors.len()
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune_threshold
    }

    pub fn codebook_version(&self) -> u32 {
        self.codebook_version
    }

    pub fn cursor(&self, terminal: usize) -> Option<NodeId> {
        self.cursors.get(terminal).copied().flatten()
    }

    pub fn qcsi_of(&self, node: NodeId) -> Option<Qcsi> {
        self.nodes
            .get(node)
            .and_then(|n| n.as_ref())
            .map(|n| n.qcsi)
    }

    pub fn node_for(&self, qcsi: Qcsi) -> Option<NodeId> {
        self.index.get(&qcsi).copied()
    }

    /// Live node ids in ascending order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(id, slot)| slot.as_ref().map(|_| id))
    }

    /// Outgoing `(target, weight)` pairs of a node, in insertion order.
    pub fn out_edges(&self, node: NodeId) -> Option<Vec<(NodeId, f64)>> {
        self.nodes
            .get(node)
            .and_then(|n| n.as_ref())
            .map(|n| n.out.iter().map(|e| (e.to, e.weight)).collect())
    }

    fn node_mut(&mut self, id: NodeId) -> &mut Node {
        self.nodes[id].as_mut().expect("live node")
    }

    /// Records one estimated state for a terminal: finds or creates the
    /// node, reinforces (or creates) the edge from the terminal's cursor,
    /// and moves the cursor. The first observation for a terminal creates
    /// the node and cursor without touching any edge.
    pub fn observe(&mut self, terminal: usize, qcsi: Qcsi) -> Result<ObserveOutcome, MapError> {
        if terminal >= self.cursors.len() {
            return Err(MapError::BadTerminal(terminal));
        }
        let (target, created_node) = match self.index.get(&qcsi) {
            Some(&id) => (id, false),
            None => {
                let id = self.nodes.len();
                self.nodes.push(Some(Node {
                    qcsi,
                    out: Vec::new(),
                    incoming: 0,
                }));
                self.index.insert(qcsi, id);
                self.live_nodes += 1;
                (id, true)
            }
        };
        let mut created_edge = false;
        if let Some(from) = self.cursors[terminal] {
            let theta = self.learning_rate;
            let node = self.node_mut(from);
            match node.out.iter().position(|e| e.to == target) {
                Some(winner) => {
                    let mut w: Vec<f64> = node.out.iter().map(|e| e.weight).collect();
                    reinforce(&mut w, winner, theta)?;
                    for (e, w) in node.out.iter_mut().zip(w) {
                        e.weight = w;
                    }
                }
                None if node.out.is_empty() => {
                    // First edge out of this node owns all the mass.
                    node.out.push(Edge {
                        to: target,
                        weight: 1.0,
                    });
                    created_edge = true;
                }
                None => {
                    // New edge starts at zero, then immediately wins one
                    // reinforcement step taken from the existing edges.
                    node.out.push(Edge {
                        to: target,
                        weight: 0.0,
                    });
                    let winner = node.out.len() - 1;
                    let mut w: Vec<f64> = node.out.iter().map(|e| e.weight).collect();
                    reinforce(&mut w, winner, theta)?;
                    for (e, w) in node.out.iter_mut().zip(w) {
                        e.weight = w;
                    }
                    created_edge = true;
                }
            }
            if created_edge {
                self.live_edges += 1;
                self.node_mut(target).incoming += 1;
            }
        }
        self.cursors[terminal] = Some(target);
        Ok(ObserveOutcome {
            created_node,
            created_edge,
        })
    }

    /// Maximum-weight outgoing edge of the terminal's cursor node; ties go
    /// to the smaller target node id.
    pub fn predict_node(&self, terminal: usize) -> Result<NodeId, PredictError> {
        let cursor = self
            .cursors
            .get(terminal)
            .copied()
            .flatten()
            .ok_or(PredictError::NoHistory)?;
        let node = self.nodes[cursor]
            .as_ref()
            .expect("cursor points at live node");
        node.out
            .iter()
            .map(|e| (e.to, e.weight))
            .max_by(|a, b| {
                a.1.partial_cmp(&b.1)
                    .unwrap()
                    // On equal weight prefer the smaller id, i.e. treat it
                    // as the larger element for max_by.
                    .then_with(|| b.0.cmp(&a.0))
            })
            .map(|(to, _)| to)
            .ok_or(PredictError::ColdNode)
    }

    /// Predicted quantized state for a terminal.
    pub fn predict(&self, terminal: usize) -> Result<Qcsi, PredictError> {
        let node = self.predict_node(terminal)?;
        Ok(self.nodes[node].as_ref().expect("live node").qcsi)
    }

    /// Moves a terminal's cursor to a known node without any weight update:
    /// tracks the station's belief across pilot-free sessions.
    pub fn set_cursor(&mut self, terminal: usize, node: NodeId) -> Result<(), MapError> {
        if terminal >= self.cursors.len() {
            return Err(MapError::BadTerminal(terminal));
        }
        if self.nodes.get(node).and_then(|n| n.as_ref()).is_none() {
            return Err(MapError::BadNode(node));
        }
        self.cursors[terminal] = Some(node);
        Ok(())
    }

    /// Drops every edge with weight strictly below `threshold`, renormalizes
    /// the survivors of each affected node, then deletes nodes with no
    /// incident edges that no cursor points at.
    pub fn garbage_collect(&mut self, threshold: f64) -> Result<GcReport, MapError> {
        if !(0.0..1.0).contains(&threshold) {
            return Err(MapError::BadPruneThreshold(threshold));
        }
        let mut report = GcReport::default();
        let mut incoming_drops: Vec<usize> = vec![0; self.nodes.len()];
        for slot in self.nodes.iter_mut() {
            let Some(node) = slot.as_mut() else { continue };
            let before = node.out.len();
            node.out.retain(|e| {
                let keep = e.weight >= threshold;
                if !keep {
                    incoming_drops[e.to] += 1;
                }
                keep
            });
            let dropped = before - node.out.len();
            if dropped > 0 {
                report.edges_removed += dropped;
                let total: f64 = node.out.iter().map(|e| e.weight).sum();
                if total > 0.0 {
                    for e in node.out.iter_mut() {
                        e.weight /= total;
                    }
                }
            }
        }
        self.live_edges -= report.edges_removed;
        for (id, drops) in incoming_drops.into_iter().enumerate() {
            if drops > 0 {
                self.node_mut(id).incoming -= drops;
            }
        }
        let cursor_targets: Vec<NodeId> = self.cursors.iter().filter_map(|c| *c).collect();
        for id in 0..self.nodes.len() {
            let Some(node) = self.nodes[id].as_ref() else {
                continue;
            };
            let isolated = node.out.is_empty() && node.incoming == 0;
            if isolated && !cursor_targets.contains(&id) {
                self.index.remove(&node.qcsi);
                self.nodes[id] = None;
                self.live_nodes -= 1;
                report.nodes_removed += 1;
            }
        }
        Ok(report)
    }

    /// Runs [`Self::garbage_collect`] with the threshold stored at
    /// construction.
    pub fn garbage_collect_default(&mut self) -> GcReport {
        self.garbage_collect(self.prune_threshold)
            .expect("stored threshold is valid")
    }

    /// Flat text serialization: header, `N id i n` node lines in id order,
    /// `E from to weight` edge lines, `C terminal node` cursor lines.
    /// Weights are printed with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "CSIMAP v1 {} {} {}",
            crate::fmt_f64_exact(self.learning_rate),
            crate::fmt_f64_exact(self.prune_threshold),
            self.codebook_version
        );
        for (id, slot) in self.nodes.iter().enumerate() {
            if let Some(node) = slot {
                let _ = writeln!(
                    out,
                    "N {} {} {}",
                    id, node.qcsi.shadow_idx, node.qcsi.distance_idx
                );
            }
        }
        for (id, slot) in self.nodes.iter().enumerate() {
            if let Some(node) = slot {
                for e in &node.out {
                    let _ = writeln!(out, "E {} {} {}", id, e.to, crate::fmt_f64_exact(e.weight));
                }
            }
        }
        for (terminal, cursor) in self.cursors.iter().enumerate() {
            if let Some(node) = cursor {
                let _ = writeln!(out, "C {} {}", terminal, node);
            }
        }
        out
    }

    /// Parses the text format. `terminals` must cover every cursor line.
    /// Any malformed line, dangling reference, bound violation, or weight
    /// sum away from 1 aborts the parse; no partial map is ever returned.
    pub fn from_text(text: &str, terminals: usize) -> Result<Self, MapError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(MapError::Parse {
            line: 1,
            reason: "empty file".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "CSIMAP" || fields[1] != "v1" {
            return Err(MapError::Parse {
                line: 1,
                reason: "header must be `CSIMAP v1 <theta> <threshold> <codebook_version>`".into(),
            });
        }
        let theta: f64 = fields[2].parse().map_err(|_| MapError::Parse {
            line: 1,
            reason: format!("bad theta {:?}", fields[2]),
        })?;
        let threshold: f64 = fields[3].parse().map_err(|_| MapError::Parse {
            line: 1,
            reason: format!("bad threshold {:?}", fields[3]),
        })?;
        let version: u32 = fields[4].parse().map_err(|_| MapError::Parse {
            line: 1,
            reason: format!("bad version {:?}", fields[4]),
        })?;
        let mut map =
            CsiMap::new(terminals, theta, threshold, version).map_err(|e| MapError::Parse {
                line: 1,
                reason: e.to_string(),
            })?;

        #[derive(PartialEq, PartialOrd)]
        enum Section {
            Nodes,
            Edges,
            Cursors,
        }
        let mut section = Section::Nodes;
        for (idx, line) in lines {
            let lineno = idx + 1;
            let parse_err = |reason: String| MapError::Parse {
                line: lineno,
                reason,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            match fields[0] {
                "N" => {
                    if section > Section::Nodes {
                        return Err(parse_err("node line after edge/cursor section".into()));
                    }
                    if fields.len() != 4 {
                        return Err(parse_err("node line must be `N id i n`".into()));
                    }
                    let id: usize = fields[1]
                        .parse()
                        .map_err(|_| parse_err("bad node id".into()))?;
                    let i: usize = fields[2]
                        .parse()
                        .map_err(|_| parse_err("bad shadow index".into()))?;
                    let n: usize = fields[3]
                        .parse()
                        .map_err(|_| parse_err("bad distance index".into()))?;
                    let qcsi = Qcsi {
                        shadow_idx: i,
                        distance_idx: n,
                    };
                    if map.index.contains_key(&qcsi) {
                        return Err(parse_err(format!("duplicate quantized state ({i}, {n})")));
                    }
                    if map.nodes.len() <= id {
                        map.nodes.resize(id + 1, None);
                    }
                    if map.nodes[id].is_some() {
                        return Err(parse_err(format!("duplicate node id {id}")));
                    }
                    map.nodes[id] = Some(Node {
                        qcsi,
                        out: Vec::new(),
                        incoming: 0,
                    });
                    map.index.insert(qcsi, id);
                    map.live_nodes += 1;
                }
                "E" => {
                    if section > Section::Edges {
                        return Err(parse_err("edge line after cursor section".into()));
                    }
                    section = Section::Edges;
                    if fields.len() != 4 {
                        return Err(parse_err("edge line must be `E from to weight`".into()));
                    }
                    let from: usize = fields[1]
                        .parse()
                        .map_err(|_| parse_err("bad source id".into()))?;
                    let to: usize = fields[2]
                        .parse()
                        .map_err(|_| parse_err("bad target id".into()))?;
                    let weight: f64 = fields[3]
                        .parse()
                        .map_err(|_| parse_err("bad weight".into()))?;
                    if !(0.0..=1.0).contains(&weight) {
                        return Err(parse_err(format!("weight {weight} outside [0, 1]")));
                    }
                    if map.nodes.get(to).and_then(|n| n.as_ref()).is_none() {
                        return Err(parse_err(format!("edge target {to} does not exist")));
                    }
                    let Some(node) = map.nodes.get_mut(from).and_then(|n| n.as_mut()) else {
                        return Err(parse_err(format!("edge source {from} does not exist")));
                    };
                    if node.out.iter().any(|e| e.to == to) {
                        return Err(parse_err(format!("duplicate edge {from} -> {to}")));
                    }
                    node.out.push(Edge { to, weight });
                    map.live_edges += 1;
                    map.node_mut(to).incoming += 1;
                }
                "C" => {
                    section = Section::Cursors;
                    if fields.len() != 3 {
                        return Err(parse_err("cursor line must be `C terminal node`".into()));
                    }
                    let terminal: usize = fields[1]
                        .parse()
                        .map_err(|_| parse_err("bad terminal".into()))?;
                    let node: usize = fields[2]
                        .parse()
                        .map_err(|_| parse_err("bad node id".into()))?;
                    if terminal >= terminals {
                        return Err(parse_err(format!(
                            "terminal {terminal} outside 0..{terminals}"
                        )));
                    }
                    if map.cursors[terminal].is_some() {
                        return Err(parse_err(format!(
                            "duplicate cursor for terminal {terminal}"
                        )));
                    }
                    if map.nodes.get(node).and_then(|n| n.as_ref()).is_none() {
                        return Err(parse_err(format!("cursor target {node} does not exist")));
                    }
                    map.cursors[terminal] = Some(node);
                }
                other => return Err(parse_err(format!("unknown record {other:?}"))),
            }
        }
        for (id, slot) in map.nodes.iter().enumerate() {
            let Some(node) = slot else { continue };
            if !node.out.is_empty() {
                let sum: f64 = node.out.iter().map(|e| e.weight).sum();
                if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(MapError::Parse {
                        line: 1,
                        reason: format!("node {id}: outgoing weights sum to {sum}, expected 1"),
                    });
                }
            }
        }
        Ok(map)
    }

    /// Invariant sweep used by tests and the fuzz harness: weight bounds,
    /// out-sums, cursor validity, and node (qcsi) uniqueness.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = HashMap::new();
        for (id, slot) in self.nodes.iter().enumerate() {
            let Some(node) = slot else { continue };
            if let Some(prev) = seen.insert(node.qcsi, id) {
                return Err(format!("nodes {prev} and {id} share {:?}", node.qcsi));
            }
            for e in &node.out {
                if !(0.0..=1.0).contains(&e.weight) {
                    return Err(format!(
                        "edge {id}->{} weight {} outside [0,1]",
                        e.to, e.weight
                    ));
                }
                if self.nodes.get(e.to).and_then(|n| n.as_ref()).is_none() {
                    return Err(format!("edge {id}->{} dangles", e.to));
                }
            }
            if !node.out.is_empty() {
                let sum: f64 = node.out.iter().map(|e| e.weight).sum();
                if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(format!("node {id} out-weights sum to {sum}"));
                }
            }
        }
        for (t, cursor) in self.cursors.iter().enumerate() {
            if let Some(c) = cursor {
                if self.nodes.get(*c).and_then(|n| n.as_ref()).is_none() {
                    return Err(format!("terminal {t} cursor dangles at {c}"));
                }
            }
        }
        Ok(())
    }
}
