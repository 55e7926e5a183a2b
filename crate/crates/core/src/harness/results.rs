//! Result tables, CSV export and plot scripts.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub strategy: String,
    pub sweep: f64,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

const HEADER: [&str; 8] = ["scenario", "strategy", "sweep", "metric", "value", "stderr", "trials", "seed"];

impl ResultTable {
    pub fn push(&mut self, row: ResultRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// First row matching strategy, sweep and metric.
    pub fn find(&self, strategy: &str, sweep: f64, metric: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.strategy == strategy && r.sweep == sweep && r.metric == metric)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        wr.write_record(HEADER)?;
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let rows = rd.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn export_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn import_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Gnuplot script plotting every (strategy, metric) series of `csv_path` against the sweep.
    pub fn gnuplot_script(&self, csv_path: &Path) -> String {
        let mut series: Vec<(String, String)> = Vec::new();
        for r in &self.rows {
            let key = (r.strategy.clone(), r.metric.clone());
            if !series.contains(&key) {
                series.push(key);
            }
        }
        let file = csv_path.display().to_string().replace('\'', "");
        let mut out = String::new();
        out.push_str("set datafile separator ','\nset key outside\nset grid\n");
        let scenario = self.rows.first().map(|r| r.scenario.as_str()).unwrap_or("results");
        out.push_str(&format!("set title '{scenario}'\nset xlabel 'sweep'\n"));
        let plots: Vec<String> = series
            .iter()
            .map(|(s, m)| {
                format!(
                    "'{file}' skip 1 using (strcol(2) eq '{s}' && strcol(4) eq '{m}' ? $3 : 1/0):5:6 with yerrorlines title '{s} {m}'"
                )
            })
            .collect();
        if plots.is_empty() {
            out.push_str("# no data\n");
        } else {
            out.push_str("plot ");
            out.push_str(&plots.join(", \\\n     "));
            out.push('\n');
        }
        out
    }
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let (a, b) = x.split_at(x.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Sample mean and its standard error s / sqrt(n); the error is 0 for n < 2.
pub fn mean_and_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(x) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = x.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(i: usize) -> ResultRow {
        ResultRow {
            scenario: "multi-user".into(),
            strategy: if i % 2 == 0 { "sdb".into() } else { "cst:90".into() },
            sweep: (i % 3) as f64,
            metric: "min_rate".into(),
            value: 0.1 * i as f64 + 1.0 / 3.0,
            stderr: 1e-3 / (i + 1) as f64,
            trials: 5000,
            seed: 42,
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let mut buf = Vec::new();
        ResultTable::default().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "scenario,strategy,sweep,metric,value,stderr,trials,seed\n");
    }

    #[test]
    fn csv_round_trip() {
        let t = ResultTable { rows: (0..50).map(row).collect() };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(ResultTable::read_csv(buf.as_slice()).unwrap(), t);
        let script = t.gnuplot_script(Path::new("out.csv"));
        assert!(script.contains("'sdb'") && script.contains("'cst:90'"));
    }

    #[test]
    fn stderr_matches_formula() {
        let (m, se) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        let x: Vec<f64> = (0..1001).map(|i| i as f64 * 0.1).collect();
        assert!((pairwise_sum(&x) - 50050.0).abs() < 1e-9);
    }
}
