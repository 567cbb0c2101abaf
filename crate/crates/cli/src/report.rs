//! Frontier comparison, sample-efficiency curves and coverage rasters.

use std::io::Write;

use cco_core::objectives::{classify_cells, Configuration, Thresholds};
use cco_core::pareto::{
    compare_frontiers, hypervolume_trace, non_dominated, FrontierReport, MethodSummary, NamedFront, Point2,
};
use cco_core::rfmap::{apply_configuration, CoverageTensor};

use crate::error::{CliError, Result};
use crate::history::HistoryRow;

pub const UNDER_GRAY: u8 = 0;
pub const COVERED_GRAY: u8 = 128;
pub const OVER_GRAY: u8 = 255;

/// A history under the name it is reported as.
#[derive(Clone, Debug)]
pub struct LabeledHistory {
    pub label: String,
    pub rows: Vec<HistoryRow>,
}

/// Labels histories by method, suffixing `#2`, `#3`, ... on repeats.
pub fn label_histories(histories: Vec<Vec<HistoryRow>>) -> Vec<LabeledHistory> {
    let mut out: Vec<LabeledHistory> = Vec::with_capacity(histories.len());
    for rows in histories {
        let base = rows.first().map_or_else(|| "empty".to_string(), |r| r.method.clone());
        let repeats = out.iter().filter(|h| h.label == base || h.label.starts_with(&format!("{base}#"))).count();
        let label = if repeats == 0 { base } else { format!("{base}#{}", repeats + 1) };
        out.push(LabeledHistory { label, rows });
    }
    out
}

pub fn frontier_report(histories: &[LabeledHistory], reference: &Point2) -> Result<FrontierReport> {
    let fronts: Vec<NamedFront> = histories
        .iter()
        .map(|h| NamedFront {
            name: h.label.clone(),
            points: h.rows.iter().map(HistoryRow::point).collect(),
            evaluations: h.rows.len(),
        })
        .collect();
    if fronts.len() >= 2 {
        return Ok(compare_frontiers(&fronts, reference)?);
    }
    let methods = fronts
        .iter()
        .map(|f| {
            let front = non_dominated(&f.points);
            MethodSummary {
                name: f.name.clone(),
                hypervolume: front.hypervolume(reference),
                evaluations: f.evaluations,
                front_size: front.len(),
            }
        })
        .collect();
    Ok(FrontierReport { reference: *reference, methods, pairwise: Vec::new(), excluded: Vec::new() })
}

/// `method,evaluations,hypervolume`, recomputed from the objective columns.
pub fn write_curves<W: Write>(out: W, histories: &[LabeledHistory], reference: &Point2) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let werr = |e: csv::Error| CliError::Runtime(format!("writing curves: {e}"));
    w.write_record(["method", "evaluations", "hypervolume"]).map_err(werr)?;
    for h in histories {
        let trace = hypervolume_trace(h.rows.iter().map(HistoryRow::point), reference);
        for (i, hv) in trace.iter().enumerate() {
            w.write_record([h.label.clone(), (i + 1).to_string(), hv.to_string()]).map_err(werr)?;
        }
    }
    w.flush().map_err(|e| CliError::Runtime(format!("writing curves: {e}")))?;
    Ok(())
}

/// The row with the smallest `under + over`, ties to the earliest. Such a row
/// is always on the front.
pub fn balanced_row(rows: &[HistoryRow]) -> Option<&HistoryRow> {
    rows.iter().reduce(|best, r| {
        if r.under_cov + r.over_cov < best.under_cov + best.over_cov {
            r
        } else {
            best
        }
    })
}

/// Hard-threshold class per cell as gray levels; under-coverage wins when a
/// cell is both under- and over-covered.
pub fn coverage_raster(tensor: &CoverageTensor, config: &Configuration, thresholds: &Thresholds) -> Result<Vec<u8>> {
    let stack = apply_configuration(tensor, config)?;
    Ok(classify_cells(&stack, thresholds)?
        .iter()
        .map(|c| {
            if c.under {
                UNDER_GRAY
            } else if c.over {
                OVER_GRAY
            } else {
                COVERED_GRAY
            }
        })
        .collect())
}

/// Binary 8-bit PGM, first row north.
pub fn write_pgm<W: Write>(mut out: W, rows: usize, cols: usize, pixels: &[u8]) -> std::io::Result<()> {
    assert_eq!(pixels.len(), rows * cols, "raster size");
    write!(out, "P5\n{cols} {rows}\n255\n")?;
    out.write_all(pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cco_core::pareto::REFERENCE_POINT;

    fn rows(method: &str, pts: &[Point2]) -> Vec<HistoryRow> {
        pts.iter()
            .enumerate()
            .map(|(i, p)| HistoryRow {
                iteration: i,
                method: method.into(),
                lambda: None,
                config: Configuration::uniform(2, 0, 30.0).unwrap(),
                under_cov: p[0],
                over_cov: p[1],
                under_pct: p[0],
                over_pct: p[1],
                hypervolume: 0.0,
            })
            .collect()
    }

    #[test]
    fn duplicate_histories_show_no_improvement() {
        let pts = [[0.2, 0.7], [0.4, 0.3], [0.9, 0.1]];
        let hs = label_histories(vec![rows("bo", &pts), rows("bo", &pts)]);
        assert_eq!(hs[1].label, "bo#2");
        let r = frontier_report(&hs, &REFERENCE_POINT).unwrap();
        assert!(r.pairwise.iter().all(|p| p.mean_gap_pct == 0.0 && p.hypervolume_ratio_pct == 0.0));
    }

    #[test]
    fn single_history_is_summarized() {
        let hs = label_histories(vec![rows("random", &[[0.5, 0.5]])]);
        let r = frontier_report(&hs, &REFERENCE_POINT).unwrap();
        assert_eq!(r.methods.len(), 1);
        assert!((r.methods[0].hypervolume - 0.55 * 0.55).abs() < 1e-12);
    }

    #[test]
    fn curves_are_monotone() {
        let hs = label_histories(vec![rows("a", &[[0.5, 0.5], [0.9, 0.9], [0.2, 0.8], [0.4, 0.2]])]);
        let mut buf = Vec::new();
        write_curves(&mut buf, &hs, &REFERENCE_POINT).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let hv: Vec<f64> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
        assert_eq!(hv.len(), 4);
        assert!(hv.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn pgm_header_and_payload() {
        let mut buf = Vec::new();
        write_pgm(&mut buf, 2, 3, &[0, 128, 255, 0, 0, 0]).unwrap();
        assert_eq!(&buf[..11], b"P5\n3 2\n255\n");
        assert_eq!(buf.len(), 11 + 6);
    }
}
