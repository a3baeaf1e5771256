use std::fmt::Write as _;
use std::io::Write;

use super::{SimReport, TimingTable};
use crate::error::{Result, RsvdError};

pub const SIM_CSV_HEADER: [&str; 8] = [
    "method", "setup", "alpha", "sq_bias", "mse", "diss_left", "diss_right", "failures",
];

fn csv_err(e: csv::Error) -> RsvdError {
    RsvdError::Parse(e.to_string())
}

/// One row per method, baseline first.
pub fn write_sim_csv<W: Write>(report: &SimReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SIM_CSV_HEADER).map_err(csv_err)?;
    for m in &report.methods {
        w.write_record([
            m.method.clone(),
            report.setup.to_string(),
            m.alpha.to_string(),
            m.sq_bias.to_string(),
            m.mse.to_string(),
            m.diss_left_total.to_string(),
            m.diss_right_total.to_string(),
            m.failures.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| RsvdError::Parse(e.to_string()))
}

/// Grid with header `n,p,alpha=<a1>,...` and mean milliseconds per cell.
pub fn write_timing_csv<W: Write>(table: &TimingTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["n".to_string(), "p".to_string()];
    header.extend(table.alphas.iter().map(|a| format!("alpha={a}")));
    w.write_record(&header).map_err(csv_err)?;
    for (n, times) in table.rows.iter().zip(&table.mean_ms) {
        let mut rec = vec![n.to_string(), table.cols.to_string()];
        rec.extend(times.iter().map(|t| format!("{t:.4}")));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| RsvdError::Parse(e.to_string()))
}

impl SimReport {
    /// Aligned text table: metrics as rows, methods as columns.
    pub fn to_table(&self) -> String {
        let labels: Vec<String> = self
            .methods
            .iter()
            .map(|m| {
                if m.method == "SVD" {
                    "Usual SVD".to_string()
                } else {
                    format!("alpha={}", m.alpha)
                }
            })
            .collect();
        let rows: [(&str, Box<dyn Fn(usize) -> f64>); 4] = [
            ("Total sq. bias", Box::new(|i| self.methods[i].sq_bias)),
            ("Total MSE", Box::new(|i| self.methods[i].mse)),
            ("Diss (left)", Box::new(|i| self.methods[i].diss_left_total)),
            ("Diss (right)", Box::new(|i| self.methods[i].diss_right_total)),
        ];
        let width = labels.iter().map(|l| l.len()).max().unwrap_or(0).max(12);
        let mut s = String::new();
        let _ = writeln!(s, "Setup {} (B = {}, seed = {})", self.setup, self.replicates, self.seed);
        let _ = write!(s, "{:<16}", "");
        for l in &labels {
            let _ = write!(s, " {l:>width$}");
        }
        s.push('\n');
        for (name, f) in rows.iter() {
            let _ = write!(s, "{name:<16}");
            for i in 0..self.methods.len() {
                let _ = write!(s, " {:>width$.3}", f(i));
            }
            s.push('\n');
        }
        let _ = write!(s, "{:<16}", "Failures");
        for m in &self.methods {
            let _ = write!(s, " {:>width$}", m.failures);
        }
        s.push('\n');
        s
    }
}
