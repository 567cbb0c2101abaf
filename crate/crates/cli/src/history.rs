//! History and front CSV files.
//!
//! One history row per black-box evaluation:
//! `iteration, method, lambda, tilt_0.., power_0.., under_cov, over_cov,
//! under_pct, over_pct, hypervolume`. The coverage scores are divided by the
//! cell count; `hypervolume` is that of the front of all rows up to and
//! including this one.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use cco_core::objectives::{Configuration, Evaluation, SectorSetting};
use cco_core::pareto::{hypervolume_trace, ParetoFront, Point2};

use crate::error::{CliError, Result};

/// One parsed history row.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub iteration: usize,
    pub method: String,
    pub lambda: Option<f64>,
    pub config: Configuration,
    pub under_cov: f64,
    pub over_cov: f64,
    pub under_pct: f64,
    pub over_pct: f64,
    pub hypervolume: f64,
}

impl HistoryRow {
    pub fn point(&self) -> Point2 {
        [self.under_cov, self.over_cov]
    }
}

fn header(sectors: usize) -> Vec<String> {
    let mut h: Vec<String> = ["iteration", "method", "lambda"].map(String::from).to_vec();
    h.extend((0..sectors).map(|i| format!("tilt_{i}")));
    h.extend((0..sectors).map(|i| format!("power_{i}")));
    h.extend(["under_cov", "over_cov", "under_pct", "over_pct", "hypervolume"].map(String::from));
    h
}

fn config_fields(config: &Configuration) -> impl Iterator<Item = String> + '_ {
    let s = config.settings();
    s.iter().map(|x| x.downtilt_deg.to_string()).chain(s.iter().map(|x| x.power_dbm.to_string()))
}

/// Writes a history, computing the running hypervolume column.
pub fn write_history<W: Write>(out: W, method: &str, evaluations: &[Evaluation], reference: &Point2) -> Result<()> {
    let sectors = evaluations.first().map_or(0, |e| e.config.len());
    let trace = hypervolume_trace(evaluations.iter().map(|e| e.objectives.normalized()), reference);
    let mut w = csv::Writer::from_writer(out);
    let werr = |e: csv::Error| CliError::Runtime(format!("writing history: {e}"));
    w.write_record(header(sectors)).map_err(werr)?;
    for (i, (e, hv)) in evaluations.iter().zip(&trace).enumerate() {
        let [u, o] = e.objectives.normalized();
        let mut rec = vec![i.to_string(), method.to_string(), e.lambda.map_or_else(String::new, |l| l.to_string())];
        rec.extend(config_fields(&e.config));
        rec.extend([u, o, e.objectives.under_pct, e.objectives.over_pct, *hv].map(|v| v.to_string()));
        w.write_record(&rec).map_err(werr)?;
    }
    w.flush().map_err(|e| CliError::Runtime(format!("writing history: {e}")))?;
    Ok(())
}

/// Writes the final non-dominated set, one row per front point.
pub fn write_front<W: Write>(out: W, method: &str, evaluations: &[Evaluation]) -> Result<()> {
    let front = ParetoFront::from_items(evaluations.iter().enumerate().map(|(i, e)| (e.objectives.normalized(), i)));
    let sectors = evaluations.first().map_or(0, |e| e.config.len());
    let mut w = csv::Writer::from_writer(out);
    let werr = |e: csv::Error| CliError::Runtime(format!("writing front: {e}"));
    let mut h: Vec<String> = ["method", "iteration", "lambda", "under_cov", "over_cov"].map(String::from).to_vec();
    h.extend(header(sectors)[3..3 + 2 * sectors].iter().cloned());
    w.write_record(&h).map_err(werr)?;
    for (p, &i) in front.iter() {
        let e = &evaluations[i];
        let mut rec = vec![method.to_string(), i.to_string(), e.lambda.map_or_else(String::new, |l| l.to_string())];
        rec.extend([p[0], p[1]].map(|v| v.to_string()));
        rec.extend(config_fields(&e.config));
        w.write_record(&rec).map_err(werr)?;
    }
    w.flush().map_err(|e| CliError::Runtime(format!("writing front: {e}")))?;
    Ok(())
}

pub fn write_history_file(path: &Path, method: &str, evaluations: &[Evaluation], reference: &Point2) -> Result<()> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_history(BufWriter::new(f), method, evaluations, reference)
}

pub fn write_front_file(path: &Path, method: &str, evaluations: &[Evaluation]) -> Result<()> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_front(BufWriter::new(f), method, evaluations)
}

/// Parses a history, reporting the first bad row by line number.
pub fn read_history<R: Read>(input: R, source: &str) -> Result<Vec<HistoryRow>> {
    let mut r = csv::Reader::from_reader(input);
    let bad = |line: u64, msg: String| CliError::Config(format!("{source}:{line}: {msg}"));
    let headers = r.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| bad(1, format!("missing column {name}")));
    let sectors = headers.iter().filter(|h| h.starts_with("tilt_")).count();
    if sectors == 0 {
        return Err(bad(1, "no tilt_ columns".into()));
    }
    let (c_iter, c_method, c_lambda) = (col("iteration")?, col("method")?, col("lambda")?);
    let tilt_cols: Vec<usize> = (0..sectors).map(|i| col(&format!("tilt_{i}"))).collect::<Result<_>>()?;
    let power_cols: Vec<usize> = (0..sectors).map(|i| col(&format!("power_{i}"))).collect::<Result<_>>()?;
    let metric_cols: Vec<usize> =
        ["under_cov", "over_cov", "under_pct", "over_pct", "hypervolume"].iter().map(|n| col(n)).collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |c: usize| rec.get(c).unwrap_or("");
        let num = |c: usize| -> Result<f64> {
            field(c).parse::<f64>().map_err(|_| bad(line, format!("column {} is not a number: {:?}", &headers[c], field(c))))
        };
        let settings = tilt_cols
            .iter()
            .zip(&power_cols)
            .map(|(&t, &p)| {
                let downtilt_deg = field(t)
                    .parse::<u32>()
                    .map_err(|_| bad(line, format!("column {} is not a downtilt: {:?}", &headers[t], field(t))))?;
                Ok(SectorSetting { downtilt_deg, power_dbm: num(p)? })
            })
            .collect::<Result<Vec<_>>>()?;
        let config = Configuration::new(settings).map_err(|e| bad(line, e.to_string()))?;
        let lambda = match field(c_lambda) {
            "" => None,
            _ => Some(num(c_lambda)?),
        };
        let iteration =
            field(c_iter).parse::<usize>().map_err(|_| bad(line, format!("bad iteration {:?}", field(c_iter))))?;
        rows.push(HistoryRow {
            iteration,
            method: field(c_method).to_string(),
            lambda,
            config,
            under_cov: num(metric_cols[0])?,
            over_cov: num(metric_cols[1])?,
            under_pct: num(metric_cols[2])?,
            over_pct: num(metric_cols[3])?,
            hypervolume: num(metric_cols[4])?,
        });
    }
    Ok(rows)
}

pub fn read_history_file(path: &Path) -> Result<Vec<HistoryRow>> {
    let f = File::open(path).map_err(|e| CliError::read(path, e))?;
    read_history(std::io::BufReader::new(f), &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use cco_core::objectives::ObjectivePair;
    use cco_core::pareto::REFERENCE_POINT;

    fn eval(tilt: u32, u: f64, o: f64, lambda: Option<f64>) -> Evaluation {
        Evaluation {
            config: Configuration::uniform(3, tilt, 31.5).unwrap(),
            objectives: ObjectivePair { under_cov: u * 10.0, over_cov: o * 10.0, under_pct: u, over_pct: o, cells: 10 },
            lambda,
        }
    }

    #[test]
    fn round_trip() {
        let evals = vec![eval(1, 0.5, 0.4, Some(0.1)), eval(7, 0.2, 0.6, Some(0.1)), eval(3, 0.6, 0.6, None)];
        let mut buf = Vec::new();
        write_history(&mut buf, "ddpg", &evals, &REFERENCE_POINT).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iteration,method,lambda,tilt_0,tilt_1,tilt_2,power_0,"));
        let rows = read_history(buf.as_slice(), "mem").unwrap();
        assert_eq!(rows.len(), 3);
        for (r, e) in rows.iter().zip(&evals) {
            assert_eq!(r.config, e.config);
            assert_eq!(r.point(), e.objectives.normalized());
            assert_eq!(r.lambda, e.lambda);
            assert_eq!(r.method, "ddpg");
        }
        assert!(rows.windows(2).all(|w| w[1].hypervolume >= w[0].hypervolume));
    }

    #[test]
    fn front_lists_non_dominated_rows() {
        let evals = vec![eval(1, 0.5, 0.4, None), eval(7, 0.2, 0.6, None), eval(3, 0.6, 0.6, None)];
        let mut buf = Vec::new();
        write_front(&mut buf, "bo", &evals).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("bo,1,,0.2,0.6,"));
        assert!(lines[2].starts_with("bo,0,,0.5,0.4,"));
    }

    #[test]
    fn malformed_rows_are_located() {
        let evals = vec![eval(1, 0.5, 0.4, None), eval(2, 0.3, 0.3, None)];
        let mut buf = Vec::new();
        write_history(&mut buf, "random", &evals, &REFERENCE_POINT).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen(",0.3,0.3,", ",zero,0.3,", 1);
        let err = read_history(text.as_bytes(), "h.csv").unwrap_err();
        assert!(err.to_string().starts_with("h.csv:3:"), "{err}");
        let err = read_history("iteration,method\n".as_bytes(), "x.csv").unwrap_err();
        assert!(err.to_string().contains("x.csv:1"));
    }
}
