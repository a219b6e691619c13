use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EmbeddingTable, LeakageResult, Pca, ProbeResult};
use crate::error::{Error, Result};

pub const PROBE_HEADER: &str = "representation,train_size,r2_mean,r2_std,n_runs";
pub const COORDS_HEADER: &str = "obs_id,star_id,instrument_id,pc1,pc2";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordRow {
    pub obs_id: usize,
    pub star_id: usize,
    pub instrument_id: usize,
    pub pc1: f64,
    pub pc2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSummary {
    pub representation: String,
    pub explained_variance: [f64; 2],
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub probes: Vec<ProbeResult>,
    pub leakage: Vec<LeakageResult>,
    pub pca: Vec<PcaSummary>,
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_probe_csv(results: &[ProbeResult], path: impl AsRef<Path>) -> Result<()> {
    if results.is_empty() {
        fs::write(path, format!("{PROBE_HEADER}\n"))?;
        return Ok(());
    }
    write_rows(results, path.as_ref())
}

pub fn read_probe_csv(path: impl AsRef<Path>) -> Result<Vec<ProbeResult>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let header: Vec<&str> = r.headers()?.iter().collect();
    if header.join(",") != PROBE_HEADER {
        return Err(Error::Format(format!(
            "{}: expected header {PROBE_HEADER}",
            path.as_ref().display()
        )));
    }
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<ProbeResult>, _>>()?)
}

pub fn write_coords_csv(table: &EmbeddingTable, pca: &Pca, path: impl AsRef<Path>) -> Result<()> {
    if pca.coords.nrows() != table.len() {
        return Err(Error::Shape(format!(
            "{} PCA rows for {} observations",
            pca.coords.nrows(),
            table.len()
        )));
    }
    let rows: Vec<CoordRow> = (0..table.len())
        .map(|i| CoordRow {
            obs_id: table.obs_id[i],
            star_id: table.star_id[i],
            instrument_id: table.instrument_id[i],
            pc1: pca.coords[[i, 0]],
            pc2: pca.coords[[i, 1]],
        })
        .collect();
    write_rows(&rows, path.as_ref())
}

/// Writes the probe table, per-representation PCA coordinates, `summary.json` and SVG plots into `dir`.
pub fn write_report(
    dir: impl AsRef<Path>,
    table: &EmbeddingTable,
    probes: &[ProbeResult],
    leakage: &[LeakageResult],
    pcas: &[(String, Pca)],
) -> Result<Report> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_probe_csv(probes, dir.join("probe_results.csv"))?;
    for (name, pca) in pcas {
        write_coords_csv(table, pca, dir.join(format!("coords_{name}.csv")))?;
        fs::write(
            dir.join(format!("pca_{name}.svg")),
            scatter_svg(name, table, pca),
        )?;
    }
    if !probes.is_empty() {
        fs::write(dir.join("r2_vs_train_size.svg"), probe_svg(probes))?;
    }
    let report = Report {
        probes: probes.to_vec(),
        leakage: leakage.to_vec(),
        pca: pcas
            .iter()
            .map(|(n, p)| PcaSummary {
                representation: n.clone(),
                explained_variance: p.explained_variance,
            })
            .collect(),
    };
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    fs::write(dir.join("summary.json"), json)?;
    Ok(report)
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 50.0;

fn colour(i: usize) -> String {
    let hue = (i * 137) % 360;
    format!("hsl({hue},65%,45%)")
}

fn frame(title: &str, x_label: &str, y_label: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n\
         <line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n\
         <text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{y_label}</text>\n",
        W / 2.0,
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD,
        W / 2.0,
        H - 12.0,
        H / 2.0,
        H / 2.0
    )
}

struct Scale {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Scale {
    fn new(values: impl Iterator<Item = f64>, from: f64, to: f64) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
            (l.min(v), h.max(v))
        });
        if !(hi > lo) {
            lo -= 0.5;
            hi += 0.5;
        }
        Self { lo, hi, from, to }
    }

    fn map(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }
}

fn probe_svg(probes: &[ProbeResult]) -> String {
    let mut groups: BTreeMap<&str, Vec<&ProbeResult>> = BTreeMap::new();
    for p in probes {
        groups.entry(p.representation.as_str()).or_default().push(p);
    }
    let sx = Scale::new(
        probes.iter().map(|p| (p.train_size as f64).log10()),
        PAD,
        W - PAD - 90.0,
    );
    let sy = Scale::new(
        probes
            .iter()
            .flat_map(|p| [p.r2_mean - p.r2_std, p.r2_mean + p.r2_std]),
        H - PAD,
        PAD,
    );
    let mut svg = frame(
        "held-out R\u{b2} vs labelled examples",
        "train size (log scale)",
        "R\u{b2}",
    );
    for p in probes
        .iter()
        .filter(|p| p.representation == probes[0].representation)
    {
        let x = sx.map((p.train_size as f64).log10());
        let _ = writeln!(
            svg,
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            H - PAD + 15.0,
            p.train_size
        );
    }
    for (tick, label) in [(sy.lo, sy.lo), (sy.hi, sy.hi)] {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{label:.2}</text>",
            PAD - 4.0,
            sy.map(tick) + 4.0
        );
    }
    for (g, (name, rows)) in groups.iter().enumerate() {
        let c = colour(g);
        let mut rows = rows.clone();
        rows.sort_by_key(|p| p.train_size);
        let points: Vec<String> = rows
            .iter()
            .map(|p| {
                format!(
                    "{:.1},{:.1}",
                    sx.map((p.train_size as f64).log10()),
                    sy.map(p.r2_mean)
                )
            })
            .collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{c}\" stroke-width=\"2\" points=\"{}\"/>",
            points.join(" ")
        );
        for p in &rows {
            let x = sx.map((p.train_size as f64).log10());
            let _ = writeln!(
                svg,
                "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"{c}\"/>",
                sy.map(p.r2_mean - p.r2_std),
                sy.map(p.r2_mean + p.r2_std)
            );
        }
        let y = PAD + 16.0 * g as f64;
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{y:.1}\" fill=\"{c}\">{name}</text>",
            W - PAD - 80.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn scatter_svg(name: &str, table: &EmbeddingTable, pca: &Pca) -> String {
    let sx = Scale::new(pca.coords.column(0).iter().copied(), PAD, W - PAD);
    let sy = Scale::new(pca.coords.column(1).iter().copied(), H - PAD, PAD);
    let mut svg = frame(
        &format!("{name}: first two principal components, coloured by instrument"),
        "PC1",
        "PC2",
    );
    for (i, row) in pca.coords.rows().into_iter().enumerate() {
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"1.8\" fill=\"{}\" fill-opacity=\"0.6\"/>",
            sx.map(row[0]),
            sy.map(row[1]),
            colour(table.instrument_id[i])
        );
    }
    svg.push_str("</svg>\n");
    svg
}
