//! Aligned-text and CSV renderings of the training, feature-selection and
//! simulation reports.

use std::fmt::Write as _;

use crate::featselect::FeatselReport;
use crate::preset::Preset;
use crate::regression::TrainingReport;
use crate::simulate::SimulationReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Align {
    Left,
    Right,
}

/// Plain table rendered with `|` separators and padded columns.
#[derive(Debug, Clone, Default)]
pub struct TextTable {
    headers: Vec<String>,
    align: Vec<Align>,
    rows: Vec<Vec<String>>,
}

impl TextTable {
    pub fn new(headers: &[&str], align: &[Align]) -> Self {
        assert_eq!(headers.len(), align.len(), "one alignment per column");
        TextTable {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            align: align.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.headers.len(), "row width");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let widths: Vec<usize> = (0..self.headers.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r[c].chars().count())
                    .chain([self.headers[c].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(c, s)| match self.align[c] {
                    Align::Left => format!("{s:<w$}", w = widths[c]),
                    Align::Right => format!("{s:>w$}", w = widths[c]),
                })
                .collect();
            parts.join(" | ").trim_end().to_string()
        };
        let mut out = line(&self.headers);
        out.push('\n');
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        out.push_str(&rule.join("-+-"));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

/// Best model and metrics per preset, plus a "Mean Value" row.
pub fn training_text(report: &TrainingReport) -> String {
    use Align::*;
    let mut t = TextTable::new(
        &["Preset", "Best Model", "MAE", "MSE", "MAPE"],
        &[Left, Left, Right, Right, Right],
    );
    for r in &report.rows {
        t.push(vec![
            r.preset.label().to_string(),
            r.family.label().to_string(),
            f4(r.metrics.mae),
            f4(r.metrics.mse),
            f4(r.metrics.mape),
        ]);
    }
    t.push(vec![
        "Mean Value".into(),
        String::new(),
        f4(report.mean.mae),
        f4(report.mean.mse),
        f4(report.mean.mape),
    ]);
    format!("metrics: {}\n{}", report.source, t.render())
}

pub fn training_csv(report: &TrainingReport) -> String {
    let mut out = String::from("source,preset,family,mae,mse,mape\n");
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            report.source, r.preset, r.family, r.metrics.mae, r.metrics.mse, r.metrics.mape
        )
        .unwrap();
    }
    let m = report.mean;
    writeln!(out, "{},mean,,{},{},{}", report.source, m.mae, m.mse, m.mape).unwrap();
    out
}

/// `n_selected/19` with before/after MAPE per preset and a MEAN row.
pub fn featsel_text(report: &FeatselReport) -> String {
    use Align::*;
    let mut t = TextTable::new(
        &["Preset", "Selected", "MAPE before", "MAPE after"],
        &[Left, Right, Right, Right],
    );
    for r in &report.rows {
        t.push(vec![
            r.preset.token().to_uppercase(),
            format!("{}/{}", r.n_selected, r.n_total),
            f4(r.mape_before),
            f4(r.mape_after),
        ]);
    }
    let total = report.rows.first().map_or(0, |r| r.n_total);
    t.push(vec![
        "MEAN".into(),
        format!("{:.1}/{total}", report.mean_selected),
        f4(report.mean_before),
        f4(report.mean_after),
    ]);
    t.render()
}

pub fn featsel_csv(report: &FeatselReport) -> String {
    let mut out = String::from("preset,n_selected,n_total,mape_before,mape_after\n");
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.preset, r.n_selected, r.n_total, r.mape_before, r.mape_after
        )
        .unwrap();
    }
    let total = report.rows.first().map_or(0, |r| r.n_total);
    writeln!(
        out,
        "mean,{},{total},{},{}",
        report.mean_selected, report.mean_before, report.mean_after
    )
    .unwrap();
    out
}

pub fn simulation_text(report: &SimulationReport) -> String {
    use Align::*;
    let mut t = TextTable::new(
        &[
            "Chunk",
            "Chosen",
            "Feasible",
            "Time (s)",
            "PSNR (dB)",
            "Baseline PSNR (dB)",
            "Over budget",
        ],
        &[Left, Left, Left, Right, Right, Right, Left],
    );
    for r in &report.rows {
        t.push(vec![
            r.chunk_id.clone(),
            r.chosen.to_string(),
            r.feasible.to_string(),
            format!("{:.2}", r.time),
            format!("{:.2}", r.psnr),
            format!("{:.2}", r.baseline_psnr),
            if r.violation { "yes" } else { "no" }.to_string(),
        ]);
    }
    let mut out = format!(
        "mode: {}  budget: {} s  margin: {}\n",
        report.mode, report.budget, report.margin
    );
    out.push_str(&t.render());
    writeln!(
        out,
        "policy:   total {:.2} s, mean PSNR {:.4} dB",
        report.policy_total_time, report.policy_mean_psnr
    )
    .unwrap();
    writeln!(
        out,
        "baseline: total {:.2} s, mean PSNR {:.4} dB ({} everywhere)",
        report.baseline_total_time,
        report.baseline_mean_psnr,
        Preset::Ultrafast
    )
    .unwrap();
    writeln!(
        out,
        "gain: {:+.4} dB, budget violations: {}",
        report.gain, report.violations
    )
    .unwrap();
    out
}

pub fn simulation_csv(report: &SimulationReport) -> String {
    let mut out = String::from("chunk_id,chosen,feasible,time,psnr,baseline_time,baseline_psnr,violation\n");
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.chunk_id, r.chosen, r.feasible, r.time, r.psnr, r.baseline_time, r.baseline_psnr, r.violation
        )
        .unwrap();
    }
    out
}
