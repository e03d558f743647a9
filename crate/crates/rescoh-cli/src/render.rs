//! ASCII bar charts for scan results; the numbers beside the bars are the
//! same values written to the CSV/JSON outputs.

use rescoh::lagfamily::ScanResult;

const BAR_WIDTH: usize = 60;

pub fn render_bars(title: &str, scan: &ScanResult) -> String {
    let mut out = format!("{title}\n");
    let max = scan
        .entries
        .iter()
        .map(|e| e.value)
        .fold(0.0_f64, f64::max);
    for e in &scan.entries {
        let width = if max > 0.0 && e.value > 0.0 {
            ((e.value / max) * BAR_WIDTH as f64).round() as usize
        } else {
            0
        };
        let mut note = String::new();
        if e.excluded {
            note.push_str(" (excluded)");
        }
        if e.degenerate {
            note.push_str(" (degenerate)");
        }
        if e.value < 0.0 {
            note.push_str(" (negative!)");
        }
        let marker = if Some(e.lag) == scan.argmax { " <- max" } else { "" };
        out.push_str(&format!(
            "  h = {:>3} |{:<BAR_WIDTH$}| {:.6}{note}{marker}\n",
            e.lag,
            "#".repeat(width.min(BAR_WIDTH)),
            e.value
        ));
    }
    out
}
