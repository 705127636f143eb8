//! Rendering result documents: the summary row plus JSON, TSV and text
//! report files.
//!
//!     cargo run --example report_rendering

use zeroleaf::fixtures;
use zeroleaf::harness::{emit_report, render_summary_row, ReportFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let result = fixtures::published_clip_result();
    println!("{}", render_summary_row(&result));

    let dir = tempfile::tempdir()?;
    let written = emit_report(
        &[result],
        &[ReportFormat::Json, ReportFormat::Tsv, ReportFormat::Text],
        dir.path(),
    )?;
    for p in &written {
        println!("wrote {}", p.file_name().unwrap().to_string_lossy());
    }
    let summary = std::fs::read_to_string(dir.path().join("summary.tsv"))?;
    print!("{summary}");
    Ok(())
}
