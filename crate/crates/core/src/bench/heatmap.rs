use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sched::{Instance, Permutation};

const CELL: f64 = 28.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_TOP: f64 = 40.0;
const LOW: (f64, f64, f64) = (215.0, 48.0, 39.0);
const HIGH: (f64, f64, f64) = (26.0, 152.0, 80.0);

/// Buffer times `p - T_W`, one row per position.
pub fn buffer_matrix(inst: &Instance, perm: &Permutation) -> Result<Vec<Vec<f64>>> {
    perm.check_len(inst)?;
    Ok(perm
        .as_slice()
        .iter()
        .map(|&j| {
            inst.jobs[j]
                .processing_times
                .iter()
                .map(|p| p - inst.station_time)
                .collect()
        })
        .collect())
}

/// CSV with a `position,job,w1..wW` header; positions and jobs are 1-based.
pub fn heatmap_csv(inst: &Instance, perm: &Permutation) -> Result<String> {
    let m = buffer_matrix(inst, perm)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["position".to_string(), "job".to_string()];
    header.extend((1..=inst.n_stations()).map(|s| format!("w{s}")));
    let csv_err = |e: csv::Error| Error::Shape(format!("csv: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for (pos, row) in m.iter().enumerate() {
        let mut rec = vec![(pos + 1).to_string(), (perm.job_at(pos) + 1).to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Shape(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Parses [`heatmap_csv`] output back into the buffer matrix.
pub fn parse_heatmap_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Shape(format!("csv: {e}")))?;
        let row = rec
            .iter()
            .skip(2)
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|e| Error::Shape(format!("csv cell {c:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(row);
    }
    Ok(out)
}

fn color(t: f64) -> String {
    let mix = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(LOW.0, HIGH.0),
        mix(LOW.1, HIGH.1),
        mix(LOW.2, HIGH.2)
    )
}

/// Self-contained SVG: one `rect` per operation, red for the smallest buffer in
/// the data and green for the largest. A constant matrix is drawn in the mid color.
pub fn heatmap_svg(inst: &Instance, perm: &Permutation) -> Result<String> {
    let m = buffer_matrix(inst, perm)?;
    let (n, w) = (m.len(), inst.n_stations());
    let (lo, hi) = m
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let width = MARGIN_LEFT + CELL * w as f64 + 10.0;
    let height = MARGIN_TOP + CELL * n as f64 + 10.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="14" text-anchor="middle">workstation</text>"#,
        MARGIN_LEFT + CELL * w as f64 / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="12" y="{}" transform="rotate(-90 12 {0})" text-anchor="middle">position (job)</text>"#,
        MARGIN_TOP + CELL * n as f64 / 2.0
    );
    for c in 0..w {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + CELL * (c as f64 + 0.5),
            MARGIN_TOP - 6.0,
            c + 1
        );
    }
    for (i, row) in m.iter().enumerate() {
        let y = MARGIN_TOP + CELL * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{} ({})</text>"#,
            MARGIN_LEFT - 6.0,
            y + CELL * 0.65,
            i + 1,
            perm.job_at(i) + 1
        );
        for (c, &v) in row.iter().enumerate() {
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{y}" width="{CELL}" height="{CELL}" fill="{}"><title>{v}</title></rect>"#,
                MARGIN_LEFT + CELL * c as f64,
                color(t)
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes `<stem>.csv` and `<stem>.svg`.
pub fn export_heatmap(inst: &Instance, perm: &Permutation, stem: &Path) -> Result<()> {
    let csv_path = stem.with_extension("csv");
    let svg_path = stem.with_extension("svg");
    std::fs::write(&csv_path, heatmap_csv(inst, perm)?).map_err(|e| Error::io(&csv_path, e))?;
    std::fs::write(&svg_path, heatmap_svg(inst, perm)?).map_err(|e| Error::io(&svg_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sched::Job;

    fn inst(p: &[&[f64]]) -> Instance {
        Instance {
            id: "h".into(),
            station_time: 10.0,
            jobs: p
                .iter()
                .enumerate()
                .map(|(i, p)| Job {
                    processing_times: p.to_vec(),
                    due_date: 10.0 * (i + 1) as f64,
                })
                .collect(),
        }
    }

    #[test]
    fn constant_matrix_uses_mid_color() {
        let i = inst(&[&[10.0, 10.0], &[10.0, 10.0], &[10.0, 10.0]]);
        let p = Permutation::identity(3);
        assert!(buffer_matrix(&i, &p)
            .unwrap()
            .iter()
            .flatten()
            .all(|&v| v == 0.0));
        let svg = heatmap_svg(&i, &p).unwrap();
        assert_eq!(svg.matches("<rect").count(), 6);
        assert_eq!(svg.matches(&format!("fill=\"{}\"", color(0.5))).count(), 6);
    }

    #[test]
    fn csv_cells_and_round_trip() {
        let i = inst(&[&[1.0 / 3.0, 9.75], &[0.1, 10.0], &[7.0, 2.2]]);
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        let text = heatmap_csv(&i, &p).unwrap();
        assert!(text.starts_with("position,job,w1,w2\n1,3,"));
        let back = parse_heatmap_csv(&text).unwrap();
        assert_eq!(back, buffer_matrix(&i, &p).unwrap());
        assert_eq!(back[1][0], 1.0 / 3.0 - 10.0);
    }

    #[test]
    fn extremes_get_end_colors() {
        let i = inst(&[&[0.0, 5.0], &[10.0, 5.0]]);
        let svg = heatmap_svg(&i, &Permutation::identity(2)).unwrap();
        assert!(svg.contains(&format!("fill=\"{}\"", color(0.0))));
        assert!(svg.contains(&format!("fill=\"{}\"", color(1.0))));
        assert_eq!(color(0.0), "#d73027");
    }
}
