//! Station/route CSV files and the GraphML cache format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeKind, Mode, MultilayerGraph, Route, Station};

pub const STATIONS_HEADER: [&str; 5] = ["id", "mode", "lat", "lon", "in_core"];
pub const ROUTES_HEADER: [&str; 4] = ["route_id", "mode", "seq", "station_id"];

fn check_header(found: &csv::StringRecord, want: &[&str], what: &str) -> Result<()> {
    let got: Vec<&str> = found.iter().map(str::trim).collect();
    if got != want {
        return Err(Error::input(format!(
            "{what}: expected header `{}`, found `{}`",
            want.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str, what: &str) -> Result<T> {
    let line = rec.position().map_or(0, |p| p.line());
    let raw = rec.get(i).map(str::trim).unwrap_or("");
    raw.parse().map_err(|_| {
        Error::input(format!("{what} line {line}: cannot parse {name} from `{raw}`"))
    })
}

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

pub fn read_stations<R: Read>(reader: R) -> Result<Vec<Station>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &STATIONS_HEADER, "stations.csv")?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let mode: Mode = rec.get(1).unwrap_or("").parse().map_err(|e: Error| {
            Error::input(format!("stations.csv line {line}: {e}"))
        })?;
        let in_core = parse_bool(rec.get(4).unwrap_or("")).ok_or_else(|| {
            Error::input(format!("stations.csv line {line}: bad in_core value"))
        })?;
        out.push(Station {
            id: rec.get(0).unwrap_or("").to_owned(),
            mode,
            lat: parse_field(&rec, 2, "lat", "stations.csv")?,
            lon: parse_field(&rec, 3, "lon", "stations.csv")?,
            in_core,
        });
    }
    Ok(out)
}

/// Reads `route_id,mode,seq,station_id` rows; stops are ordered by `seq`
/// within each route and routes come back sorted by id.
pub fn read_routes<R: Read>(reader: R) -> Result<Vec<Route>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &ROUTES_HEADER, "routes.csv")?;
    let mut grouped: BTreeMap<String, (Mode, Vec<(i64, String)>)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let route_id = rec.get(0).unwrap_or("").to_owned();
        let mode: Mode = rec.get(1).unwrap_or("").parse().map_err(|e: Error| {
            Error::input(format!("routes.csv line {line}: {e}"))
        })?;
        let seq: i64 = parse_field(&rec, 2, "seq", "routes.csv")?;
        let station = rec.get(3).unwrap_or("").to_owned();
        let entry = grouped
            .entry(route_id.clone())
            .or_insert_with(|| (mode, Vec::new()));
        if entry.0 != mode {
            return Err(Error::input(format!(
                "routes.csv line {line}: route `{route_id}` switches mode"
            )));
        }
        entry.1.push((seq, station));
    }
    grouped
        .into_iter()
        .map(|(route_id, (mode, mut stops))| {
            stops.sort_by_key(|(seq, _)| *seq);
            if stops.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::input(format!(
                    "routes.csv: route `{route_id}` repeats a seq number"
                )));
            }
            Ok(Route {
                route_id,
                mode,
                stations: stops.into_iter().map(|(_, s)| s).collect(),
            })
        })
        .collect()
}

pub fn write_stations<W: Write>(writer: W, stations: &[Station]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(STATIONS_HEADER)?;
    for s in stations {
        w.write_record([
            s.id.clone(),
            s.mode.to_string(),
            s.lat.to_string(),
            s.lon.to_string(),
            s.in_core.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_routes<W: Write>(writer: W, routes: &[Route]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(ROUTES_HEADER)?;
    for r in routes {
        for (seq, sid) in r.stations.iter().enumerate() {
            w.write_record([
                r.route_id.clone(),
                r.mode.to_string(),
                seq.to_string(),
                sid.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Serializes a graph as GraphML. Output is deterministic: stations and edges
/// appear in the graph's canonical order and floats use the shortest
/// round-tripping representation.
pub fn to_graphml(g: &MultilayerGraph) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    for (id, target, ty) in [
        ("mode", "node", "string"),
        ("lat", "node", "double"),
        ("lon", "node", "double"),
        ("in_core", "node", "boolean"),
        ("kind", "edge", "string"),
        ("length_m", "edge", "double"),
        ("d_imt", "graph", "double"),
    ] {
        let _ = writeln!(
            s,
            "  <key id=\"{id}\" for=\"{target}\" attr.name=\"{id}\" attr.type=\"{ty}\"/>"
        );
    }
    s.push_str("  <graph id=\"G\" edgedefault=\"directed\">\n");
    let _ = writeln!(s, "    <data key=\"d_imt\">{}</data>", g.d_imt());
    for st in g.stations() {
        let _ = writeln!(
            s,
            "    <node id=\"{}\"><data key=\"mode\">{}</data><data key=\"lat\">{}</data><data key=\"lon\">{}</data><data key=\"in_core\">{}</data></node>",
            escape(&st.id),
            st.mode,
            st.lat,
            st.lon,
            st.in_core
        );
    }
    for e in g.edges() {
        let _ = writeln!(
            s,
            "    <edge source=\"{}\" target=\"{}\"><data key=\"kind\">{}</data><data key=\"length_m\">{}</data></edge>",
            escape(&e.src),
            escape(&e.dst),
            e.kind.as_str(),
            e.length_m
        );
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

pub fn from_graphml(text: &str) -> Result<MultilayerGraph> {
    let doc = roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        Error::Parse {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let err_off = |offset: usize, msg: String| {
        let pos = doc.text_pos_at(offset);
        Error::Parse {
            line: pos.row,
            column: pos.col,
            message: msg,
        }
    };

    let err_at = |node: roxmltree::Node, msg: String| err_off(node.range().start, msg);

    let root = doc.root_element();
    if root.tag_name().name() != "graphml" {
        return Err(err_at(root, format!("expected <graphml>, found <{}>", root.tag_name().name())));
    }
    let graph = root
        .children()
        .find(|n| n.has_tag_name("graph") || n.tag_name().name() == "graph")
        .ok_or_else(|| err_at(root, "missing <graph> element".into()))?;

    fn data_of(node: roxmltree::Node) -> BTreeMap<String, (String, usize)> {
        node.children()
            .filter(|c| c.is_element() && c.tag_name().name() == "data")
            .filter_map(|c| {
                c.attribute("key").map(|k| {
                    let text = c.text().unwrap_or("").trim().to_owned();
                    (k.to_owned(), (text, c.range().start))
                })
            })
            .collect()
    }
    fn field<T: std::str::FromStr>(
        data: &BTreeMap<String, (String, usize)>,
        key: &str,
        owner: roxmltree::Node,
        err_off: &dyn Fn(usize, String) -> Error,
    ) -> Result<T> {
        let (raw, offset) = data
            .get(key)
            .ok_or_else(|| err_off(owner.range().start, format!("missing data key `{key}`")))?;
        raw.parse()
            .map_err(|_| err_off(*offset, format!("cannot parse `{key}` from `{raw}`")))
    }

    let d_imt: f64 = {
        let data = data_of(graph);
        if data.contains_key("d_imt") {
            field(&data, "d_imt", graph, &err_off)?
        } else {
            0.0
        }
    };

    let mut stations = Vec::new();
    let mut edges = Vec::new();
    for child in graph.children().filter(|c| c.is_element()) {
        match child.tag_name().name() {
            "node" => {
                let id = child
                    .attribute("id")
                    .ok_or_else(|| err_at(child, "node without id".into()))?;
                let data = data_of(child);
                let mode: String = field(&data, "mode", child, &err_off)?;
                let in_core: String = field(&data, "in_core", child, &err_off)?;
                stations.push(Station {
                    id: id.to_owned(),
                    mode: mode.parse().map_err(|e: Error| err_at(child, e.to_string()))?,
                    lat: field(&data, "lat", child, &err_off)?,
                    lon: field(&data, "lon", child, &err_off)?,
                    in_core: parse_bool(&in_core)
                        .ok_or_else(|| err_at(child, format!("bad in_core `{in_core}`")))?,
                });
            }
            "edge" => {
                let (Some(src), Some(dst)) = (child.attribute("source"), child.attribute("target")) else {
                    return Err(err_at(child, "edge without source/target".into()));
                };
                let data = data_of(child);
                let kind: String = field(&data, "kind", child, &err_off)?;
                edges.push(Edge {
                    src: src.to_owned(),
                    dst: dst.to_owned(),
                    kind: kind
                        .parse::<EdgeKind>()
                        .map_err(|e| err_at(child, e.to_string()))?,
                    length_m: field(&data, "length_m", child, &err_off)?,
                });
            }
            _ => {}
        }
    }
    MultilayerGraph::new(stations, edges, d_imt).map_err(|e| err_at(graph, e.to_string()))
}
