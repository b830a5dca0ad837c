//! Electrode graph weighted by summed forest importances of coherence
//! features.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::FeatureColumn;

pub const DEFAULT_DEGREE_QUANTILE: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: String,
    pub b: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRank {
    pub name: String,
    pub strength: f64,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PainNetwork {
    /// Sorted electrode names with at least one edge.
    pub nodes: Vec<String>,
    /// Sorted by `(a, b)` with `a < b`; zero-weight edges are pruned.
    pub edges: Vec<Edge>,
    pub node_strength: BTreeMap<String, f64>,
    /// Incident edges whose weight reaches the `degree_quantile` of all
    /// edge weights.
    pub node_degree: BTreeMap<String, usize>,
    pub degree_quantile: f64,
    pub degree_threshold: f64,
    /// Band-power importances present in the input and ignored.
    pub ignored_pib: usize,
}

/// Linear-interpolation quantile of unsorted values.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn build_network<K: AsRef<str>>(importances: impl IntoIterator<Item = (K, f64)>) -> Result<PainNetwork> {
    build_network_with_quantile(importances, DEFAULT_DEGREE_QUANTILE)
}

pub fn build_network_with_quantile<K: AsRef<str>>(
    importances: impl IntoIterator<Item = (K, f64)>,
    degree_quantile: f64,
) -> Result<PainNetwork> {
    if !(0.0..=1.0).contains(&degree_quantile) {
        return Err(Error::invalid(format!("quantile {degree_quantile} outside [0, 1]")));
    }
    let mut entries: Vec<(String, f64)> = importances
        .into_iter()
        .map(|(k, v)| (k.as_ref().to_string(), v))
        .collect();
    entries.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let mut ignored_pib = 0;
    let mut msc_seen = 0;
    let mut pairs: BTreeMap<(String, String), f64> = BTreeMap::new();
    for (key, w) in entries {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::invalid(format!("importance of `{key}` is {w}")));
        }
        match FeatureColumn::from_str(&key)? {
            FeatureColumn::Pib { .. } => ignored_pib += 1,
            FeatureColumn::Msc { a, b, .. } => {
                msc_seen += 1;
                *pairs.entry((a, b)).or_insert(0.0) += w;
            }
        }
    }
    if msc_seen == 0 {
        return Err(Error::EmptyNetwork(format!(
            "no coherence importances ({ignored_pib} band-power keys ignored)"
        )));
    }
    let edges: Vec<Edge> = pairs
        .into_iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|((a, b), weight)| Edge { a, b, weight })
        .collect();
    Ok(from_edges(edges, degree_quantile, ignored_pib))
}

fn from_edges(mut edges: Vec<Edge>, degree_quantile: f64, ignored_pib: usize) -> PainNetwork {
    edges.sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));
    let weights: Vec<f64> = edges.iter().map(|e| e.weight).collect();
    let threshold = quantile(&weights, degree_quantile);
    let mut strength: BTreeMap<String, f64> = BTreeMap::new();
    let mut degree: BTreeMap<String, usize> = BTreeMap::new();
    for e in &edges {
        for n in [&e.a, &e.b] {
            *strength.entry(n.clone()).or_insert(0.0) += e.weight;
            *degree.entry(n.clone()).or_insert(0) += (e.weight >= threshold) as usize;
        }
    }
    PainNetwork {
        nodes: strength.keys().cloned().collect(),
        edges,
        node_strength: strength,
        node_degree: degree,
        degree_quantile,
        degree_threshold: threshold,
        ignored_pib,
    }
}

impl PainNetwork {
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Every node by strength, then degree, descending; ties by name.
    pub fn ranking(&self) -> Vec<NodeRank> {
        let mut r: Vec<NodeRank> = self
            .nodes
            .iter()
            .map(|n| NodeRank {
                name: n.clone(),
                strength: self.node_strength[n],
                degree: self.node_degree[n],
            })
            .collect();
        r.sort_by(|x, y| {
            y.strength
                .total_cmp(&x.strength)
                .then(y.degree.cmp(&x.degree))
                .then_with(|| x.name.cmp(&y.name))
        });
        r
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            #[serde(flatten)]
            net: &'a PainNetwork,
            ranking: Vec<NodeRank>,
        }
        Ok(serde_json::to_string_pretty(&Doc {
            net: self,
            ranking: self.ranking(),
        })?)
    }
}

pub fn top_electrodes(net: &PainNetwork, k: usize) -> Vec<String> {
    net.ranking().into_iter().take(k).map(|r| r.name).collect()
}

/// Writes `edges.csv`, `network.json` and a circular-layout `network.svg`
/// into `dir`.
pub fn export_network(net: &PainNetwork, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("edges.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::csv(&csv_path, e))?;
    w.write_record(["a", "b", "weight"])
        .map_err(|e| Error::csv(&csv_path, e))?;
    for e in &net.edges {
        w.write_record([e.a.as_str(), e.b.as_str(), &e.weight.to_string()])
            .map_err(|err| Error::csv(&csv_path, err))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    let json_path = dir.join("network.json");
    std::fs::write(&json_path, net.to_json()?).map_err(|e| Error::io(&json_path, e))?;
    let svg_path = dir.join("network.svg");
    std::fs::write(&svg_path, render_svg(net)).map_err(|e| Error::io(&svg_path, e))
}

/// Reads a network written by [`export_network`].
pub fn import_network(dir: &Path) -> Result<PainNetwork> {
    let path = dir.join("network.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Rebuilds a network from an `a,b,weight` edge list.
pub fn read_edge_csv(path: &Path, degree_quantile: f64) -> Result<PainNetwork> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut edges = Vec::new();
    for rec in r.deserialize() {
        let e: Edge = rec.map_err(|e| Error::csv(path, e))?;
        let (a, b) = if e.a <= e.b { (e.a, e.b) } else { (e.b, e.a) };
        edges.push(Edge { a, b, weight: e.weight });
    }
    Ok(from_edges(edges, degree_quantile, 0))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn render_svg(net: &PainNetwork) -> String {
    let size = 640.0;
    let c = size / 2.0;
    let radius = size * 0.38;
    let n = net.nodes.len().max(1) as f64;
    let pos: BTreeMap<&str, (f64, f64)> = net
        .nodes
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let t = std::f64::consts::TAU * i as f64 / n - std::f64::consts::FRAC_PI_2;
            (name.as_str(), (c + radius * t.cos(), c + radius * t.sin()))
        })
        .collect();
    let max_w = net.edges.iter().map(|e| e.weight).fold(0.0, f64::max);
    let max_s = net.node_strength.values().cloned().fold(0.0, f64::max);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for e in &net.edges {
        let (x1, y1) = pos[e.a.as_str()];
        let (x2, y2) = pos[e.b.as_str()];
        let rel = if max_w > 0.0 { e.weight / max_w } else { 0.0 };
        let _ = writeln!(
            svg,
            r##"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#b03030" stroke-opacity="{:.3}" stroke-width="{:.3}"/>"##,
            0.2 + 0.8 * rel,
            0.5 + 7.5 * rel
        );
    }
    for name in &net.nodes {
        let (x, y) = pos[name.as_str()];
        let s = net.node_strength[name];
        let r = 4.0 + if max_s > 0.0 { 10.0 * s / max_s } else { 0.0 };
        let _ = writeln!(
            svg,
            r##"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="#3060b0"/><text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"##,
            y - r - 3.0,
            xml_escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summation_example() {
        let net = build_network([
            ("MSC:A|B:alpha", 0.3),
            ("MSC:A|B:beta", 0.1),
            ("MSC:A|C:gamma", 0.2),
            ("PIB:A:alpha", 0.5),
        ])
        .unwrap();
        assert_eq!(net.edges.len(), 2);
        assert!((net.edges[0].weight - 0.4).abs() < 1e-12);
        assert!((net.node_strength["A"] - 0.6).abs() < 1e-12);
        assert_eq!(net.ignored_pib, 1);
        assert_eq!(top_electrodes(&net, 2), vec!["A", "B"]);
        assert_eq!(top_electrodes(&net, 10).len(), 3);
    }

    #[test]
    fn zero_weights_prune_everything() {
        let net = build_network([("MSC:A|B:alpha", 0.0)]).unwrap();
        assert!(net.edges.is_empty());
        assert!(top_electrodes(&net, 3).is_empty());
        assert!(matches!(
            build_network([("PIB:A:alpha", 1.0)]),
            Err(Error::EmptyNetwork(_))
        ));
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[4.0, 1.0, 3.0, 2.0], 0.75), 3.25);
        assert_eq!(quantile(&[5.0], 0.75), 5.0);
    }
}
