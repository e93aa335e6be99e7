use proptest::prelude::*;
use vicsek_sandpile::chain::{parse_rational, radius_pmf, rat};
use vicsek_sandpile::identity::identity;
use vicsek_sandpile::io::{
    config_from_json, config_to_json, pmf_csv, render_pgm, render_svg, RunRecord,
};
use vicsek_sandpile::{Error, SandpileConfig, Topology, VicsekGraph};

proptest! {
    #[test]
    fn config_json_round_trip(level in 0u32..3, seed in any::<u64>()) {
        let g = VicsekGraph::build(level).unwrap();
        let heights = (0..g.site_count() as u64).map(|i| ((seed >> (i % 60)) & 7) as i64 - 1).collect();
        let c = SandpileConfig::new(heights);
        let s = config_to_json(&g, &c).unwrap();
        prop_assert_eq!(config_from_json(&g, &s).unwrap(), c);
    }
}

#[test]
fn malformed_configs() {
    let g = VicsekGraph::build(1).unwrap();
    assert!(matches!(config_from_json(&g, "{"), Err(Error::Format(_))));
    let wrong_order = r#"{"level":1,"order":"yx","heights":[]}"#;
    assert!(matches!(
        config_from_json(&g, wrong_order),
        Err(Error::Format(_))
    ));
    let short = r#"{"level":1,"order":"lex-xy","heights":[1,2]}"#;
    assert!(matches!(config_from_json(&g, short), Err(Error::Format(_))));
}

#[test]
fn pmf_csv_parses_back() {
    let rows: Vec<(u64, _)> = (0..=10).map(|n| (n, radius_pmf(n))).collect();
    let csv = pmf_csv(&rows);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,numerator,denominator,value"));
    for ((n, p), line) in rows.iter().zip(lines) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0].parse::<u64>().unwrap(), *n);
        assert_eq!(parse_rational(&format!("{}/{}", f[1], f[2])).unwrap(), *p);
        let v: f64 = f[3].parse().unwrap();
        assert!((v - vicsek_sandpile::chain::to_f64(p)).abs() < 1e-15);
    }
    assert_eq!(parse_rational("3/4").unwrap(), rat(3, 4));
    assert!(parse_rational("3/0").is_err());
}

#[test]
fn renders_are_deterministic() {
    let g = VicsekGraph::build(2).unwrap();
    let id = identity(2).unwrap();
    let pgm = render_pgm(&g, &id);
    assert_eq!(pgm, render_pgm(&g, &id));
    let mut lines = pgm.lines();
    assert_eq!(lines.next(), Some("P2"));
    assert_eq!(lines.next(), Some("10 10"));
    assert_eq!(lines.next(), Some("255"));
    let pixels: Vec<u8> = lines
        .flat_map(|l| l.split(' ').map(|p| p.parse::<u8>().unwrap()))
        .collect();
    assert_eq!(pixels.len(), 100);
    assert_eq!(pixels.iter().filter(|&&p| p != 255).count(), g.site_count());
    let svg = render_svg(&g, &id);
    assert_eq!(svg.matches("<rect").count(), g.site_count());
}

#[test]
fn run_record_serializes() {
    let r = RunRecord::new(
        "chain pmf",
        serde_json::json!({"max_n": 3}),
        None,
        serde_json::json!([]),
        0.5,
    );
    let s = serde_json::to_string(&r).unwrap();
    let back: RunRecord = serde_json::from_str(&s).unwrap();
    assert_eq!(back, r);
    assert_eq!(back.format_version, 1);
}
