//! Gnuplot data and script for a sweep: sum throughput against K, one series
//! per scheme, with the standard deviation as error bars.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sdma_core::SweepResult;

/// Indexed data blocks, one per scheme.
pub fn data(r: &SweepResult) -> String {
    let mut out = String::new();
    for (i, s) in r.schemes.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        writeln!(out, "# {s}\n# k mean_mbps std_mbps").unwrap();
        for &k in &r.k_values {
            if let Some(c) = r.cell(s, k) {
                writeln!(out, "{k} {:.6} {:.6}", c.mean_mbps, c.std_mbps).unwrap();
            }
        }
    }
    out
}

pub fn script(r: &SweepResult, data_file: &str, png_file: &str) -> String {
    let mut out = String::new();
    writeln!(out, "set terminal pngcairo size 800,600").unwrap();
    writeln!(out, "set output '{png_file}'").unwrap();
    writeln!(out, "set title '{}'", r.scenario).unwrap();
    writeln!(out, "set xlabel 'Number of concurrent links'").unwrap();
    writeln!(out, "set ylabel 'Sum throughput (Mbps)'").unwrap();
    writeln!(out, "set key outside right").unwrap();
    writeln!(out, "set grid").unwrap();
    let series: Vec<String> = r
        .schemes
        .iter()
        .enumerate()
        .map(|(i, s)| format!("'{data_file}' index {i} using 1:2 with linespoints title '{s}'"))
        .collect();
    writeln!(out, "plot {}", series.join(", \\\n     ")).unwrap();
    out
}

/// Writes `<stem>.dat` and `<stem>.gp` beside `base`; returns both paths.
pub fn write(r: &SweepResult, base: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
    let dat = base.with_extension("dat");
    let gp = base.with_extension("gp");
    let png = base.with_extension("png");
    let name = |p: &Path| {
        p.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    std::fs::write(&dat, data(r))?;
    std::fs::write(&gp, script(r, &name(&dat), &name(&png)))?;
    Ok((dat, gp))
}
