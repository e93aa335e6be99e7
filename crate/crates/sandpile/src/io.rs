//! File formats: configuration JSON, pmf CSV, run records and images.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::chain::{format_rational, to_f64, Rational};
use crate::engine::SandpileConfig;
use crate::error::{Error, Result};
use crate::graph::Lattice;

pub const ORDER_TAG: &str = "lex-xy";
pub const RECORD_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub level: u32,
    pub order: String,
    pub heights: Vec<i64>,
}

pub fn config_to_json<L: Lattice>(g: &L, c: &SandpileConfig) -> Result<String> {
    if c.len() != g.site_count() {
        return Err(Error::Domain("configuration does not fit the graph".into()));
    }
    let f = ConfigFile {
        level: g.level(),
        order: ORDER_TAG.into(),
        heights: c.heights.clone(),
    };
    serde_json::to_string(&f).map_err(|e| Error::Format(e.to_string()))
}

/// Parses a configuration and checks it against `g`.
pub fn config_from_json<L: Lattice>(g: &L, s: &str) -> Result<SandpileConfig> {
    let f: ConfigFile = serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
    if f.order != ORDER_TAG {
        return Err(Error::Format(format!("unknown vertex order {:?}", f.order)));
    }
    if f.level != g.level() || f.heights.len() != g.site_count() {
        return Err(Error::Format(format!(
            "level {} with {} heights does not match level {} ({} sites)",
            f.level,
            f.heights.len(),
            g.level(),
            g.site_count()
        )));
    }
    Ok(SandpileConfig::new(f.heights))
}

/// `n,numerator,denominator,value` rows with a header.
pub fn pmf_csv(rows: &[(u64, Rational)]) -> String {
    let mut out = String::from("n,numerator,denominator,value\n");
    for (n, p) in rows {
        let _ = writeln!(out, "{n},{},{},{:e}", p.numer(), p.denom(), to_f64(p));
    }
    out
}

pub fn rationals_csv(v: &[Rational]) -> String {
    let cells: Vec<String> = v.iter().map(format_rational).collect();
    cells.join(",") + "\n"
}

pub fn rationals_json(v: &[Rational]) -> serde_json::Value {
    serde_json::Value::Array(v.iter().map(|r| format_rational(r).into()).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub format_version: u32,
    pub command: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: serde_json::Value,
    pub duration_secs: f64,
}

impl RunRecord {
    pub fn new(
        command: &str,
        parameters: serde_json::Value,
        seed: Option<u64>,
        outputs: serde_json::Value,
        duration_secs: f64,
    ) -> Self {
        RunRecord {
            format_version: RECORD_VERSION,
            command: command.into(),
            parameters,
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            outputs,
            duration_secs,
        }
    }
}

fn gray(h: i64) -> u8 {
    match h {
        2 => 80,
        4 => 160,
        _ => 240,
    }
}

/// Plain PGM, one pixel per lattice point; non-vertices and the sink are white.
pub fn render_pgm<L: Lattice>(g: &L, c: &SandpileConfig) -> String {
    let side = 3usize.pow(g.level()) + 1;
    let mut px = vec![255u8; side * side];
    for v in 0..g.site_count() {
        let p = g.coord(v);
        // Row 0 of the image is the top, i.e. the largest y.
        px[(side - 1 - p.y as usize) * side + p.x as usize] = gray(c.heights[v]);
    }
    let mut out = format!("P2\n{side} {side}\n255\n");
    for row in px.chunks(side) {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn render_svg<L: Lattice>(g: &L, c: &SandpileConfig) -> String {
    let side = 3u32.pow(g.level()) + 1;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{w}\" viewBox=\"0 0 {side} {side}\">\n",
        w = side * 8
    );
    for v in 0..g.site_count() {
        let p = g.coord(v);
        let fill = match c.heights[v] {
            2 => "#3b6fb6",
            4 => "#f08c2b",
            _ => "#c0392b",
        };
        let _ = writeln!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"1\" height=\"1\" fill=\"{fill}\"><title>{} h={}</title></rect>",
            p.x,
            side - 1 - p.y,
            p,
            c.heights[v]
        );
    }
    out.push_str("</svg>\n");
    out
}
