//! CSV emission. Floats use Rust's shortest round-trip formatting so a
//! report re-reads to the exact values; missing cells are `NA`.

use std::fmt::Display;
use std::fmt::Write;

use hashlookup_core::EvalReport;

pub const REPORT_HEADER: &str =
    "radius,probes,map_opt,map_pes,map_rand_mean,precision,recall,ramap,empty_shell_queries,wall_ns";
pub const BENCH_HEADER: &str = "radius,probes,wall_ns_mean,wall_ns_std";

fn cell<T: Display>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn float(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:?}"))
}

/// One row per radius of `report`, then a `# excluded_queries=K` footer.
/// `wall_ns[r]` is the mean search time through radius `r`, if measured.
pub fn eval_csv(report: &EvalReport, wall_ns: Option<&[f64]>) -> String {
    let mut out = String::new();
    writeln!(out, "{REPORT_HEADER}").unwrap();
    for r in 0..report.radii() {
        writeln!(
            out,
            "{r},{},{},{},{},{},{},{},{},{}",
            cell(report.probes.get(r).copied().flatten()),
            float(report.map_optimistic_curve.get(r)),
            float(report.map_pessimistic_curve.get(r)),
            float(report.map_random_mean_curve.get(r)),
            float(report.precision.get(r)),
            float(report.recall.get(r)),
            float(report.ramap.get(r)),
            cell(report.empty_shells.get(r).copied().flatten()),
            float(wall_ns.and_then(|w| w.get(r).copied())),
        )
        .unwrap();
    }
    writeln!(out, "# excluded_queries={}", report.excluded_queries).unwrap();
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub radius: usize,
    pub probes: u128,
    pub wall_ns_mean: f64,
    pub wall_ns_std: f64,
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{BENCH_HEADER}").unwrap();
    for row in rows {
        writeln!(
            out,
            "{},{},{:?},{:?}",
            row.radius, row.probes, row.wall_ns_mean, row.wall_ns_std
        )
        .unwrap();
    }
    out
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
