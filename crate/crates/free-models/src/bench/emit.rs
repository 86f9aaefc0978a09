//! Heatmap emission: a percent-formatted CSV and an optional SVG grid.

use std::fmt::Write as _;
use std::path::Path;

use super::heatmap::HeatmapResult;
use super::BenchError;

/// CSV rendering: columns are training sets, rows are test sets, cells are
/// errors in percent with two decimals (`NA` for failed cells).
pub fn heatmap_csv_string(result: &HeatmapResult) -> String {
    let mut out = String::new();
    out.push_str("test\\train");
    for name in &result.set_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (j, test_name) in result.set_names.iter().enumerate() {
        out.push_str(test_name);
        for i in 0..result.set_names.len() {
            match result.errors[i][j] {
                Some(e) => {
                    let _ = write!(out, ",{:.2}", e * 100.0);
                }
                None => out.push_str(",NA"),
            }
        }
        out.push('\n');
    }
    out
}

const CELL: f64 = 52.0;
const LEFT: f64 = 96.0;
const TOP: f64 = 64.0;

/// Grayscale sRGB level for a normalized value in [0, 1]; darker means
/// higher error.
fn ramp(value: f64) -> u8 {
    let clamped = value.clamp(0.0, 1.0);
    (235.0 - clamped * 197.0).round() as u8
}

/// SVG rendering of the matrix in the same orientation as the CSV
/// (training sets across, test sets down). Cell shade is a monotone
/// grayscale ramp over the observed error range, the minimum and maximum
/// cells are annotated with their percent values, and the mean error
/// appears in the header line.
pub fn heatmap_svg_string(result: &HeatmapResult) -> String {
    let n = result.set_names.len();
    let width = LEFT + CELL * n as f64 + 24.0;
    let height = TOP + CELL * n as f64 + 24.0;

    let values: Vec<f64> = result.errors.iter().flatten().flatten().copied().collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let extremes = result.min_max();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"monospace\" font-size=\"11\">"
    );
    let title = match result.mean_error() {
        Some(mean) => format!(
            "{} model, mean normalized error {:.2}%",
            result.model,
            mean * 100.0
        ),
        None => format!("{} model, no successful cells", result.model),
    };
    let _ = writeln!(svg, "  <title>{title}</title>");
    let _ = writeln!(
        svg,
        "  <text x=\"{LEFT:.0}\" y=\"20\" font-size=\"13\">{title}</text>"
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{LEFT:.0}\" y=\"{:.0}\" font-size=\"11\">train set &#8594;  (test set &#8595;)</text>",
        TOP - 28.0
    );

    // column labels: training sets
    for (i, name) in result.set_names.iter().enumerate() {
        let x = LEFT + CELL * (i as f64 + 0.5);
        let _ = writeln!(
            svg,
            "  <text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{name}</text>",
            TOP - 8.0
        );
    }
    // row labels: test sets
    for (j, name) in result.set_names.iter().enumerate() {
        let y = TOP + CELL * (j as f64 + 0.5) + 4.0;
        let _ = writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{y:.1}\" text-anchor=\"end\">{name}</text>",
            LEFT - 8.0
        );
    }

    for (i, _) in result.set_names.iter().enumerate() {
        for (j, _) in result.set_names.iter().enumerate() {
            let x = LEFT + CELL * i as f64;
            let y = TOP + CELL * j as f64;
            match result.errors[i][j] {
                Some(v) => {
                    let level = ramp((v - lo) / span);
                    let _ = writeln!(
                        svg,
                        "  <rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{CELL:.0}\" height=\"{CELL:.0}\" \
                         fill=\"rgb({level},{level},{level})\" stroke=\"white\"/>"
                    );
                    let annotate = extremes.is_some_and(|(min, max)| {
                        (min.0, min.1) == (i, j) || (max.0, max.1) == (i, j)
                    });
                    if annotate {
                        let text_fill = if level < 128 { "white" } else { "black" };
                        let _ = writeln!(
                            svg,
                            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"{text_fill}\">{:.2}%</text>",
                            x + CELL / 2.0,
                            y + CELL / 2.0 + 4.0,
                            v * 100.0
                        );
                    }
                }
                None => {
                    let _ = writeln!(
                        svg,
                        "  <rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{CELL:.0}\" height=\"{CELL:.0}\" \
                         fill=\"none\" stroke=\"#cc3333\"/>"
                    );
                    let _ = writeln!(
                        svg,
                        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"#cc3333\">NA</text>",
                        x + CELL / 2.0,
                        y + CELL / 2.0 + 4.0
                    );
                }
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Write the CSV (and optionally the SVG) renderings of a heatmap.
pub fn emit_heatmap(
    result: &HeatmapResult,
    csv_path: impl AsRef<Path>,
    svg_path: Option<&Path>,
) -> Result<(), BenchError> {
    std::fs::write(csv_path, heatmap_csv_string(result))?;
    if let Some(path) = svg_path {
        std::fs::write(path, heatmap_svg_string(result))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> HeatmapResult {
        HeatmapResult {
            set_names: vec!["A".into(), "B".into()],
            errors: vec![vec![Some(0.0), Some(0.5)], vec![Some(0.5), Some(1.0)]],
            model: "mock".into(),
        }
    }

    #[test]
    fn csv_formats_percentages_with_two_decimals() {
        let csv = heatmap_csv_string(&two_by_two());
        assert!(csv.contains("0.00"), "{csv}");
        assert!(csv.contains("50.00"), "{csv}");
        assert!(csv.contains("100.00"), "{csv}");
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "test\\train,A,B");
        assert_eq!(lines.next().unwrap(), "A,0.00,50.00");
        assert_eq!(lines.next().unwrap(), "B,50.00,100.00");
    }

    #[test]
    fn csv_marks_failed_cells() {
        let mut result = two_by_two();
        result.errors[1][0] = None;
        let csv = heatmap_csv_string(&result);
        assert!(csv.lines().any(|l| l.contains("NA")), "{csv}");
    }

    #[test]
    fn svg_max_cell_uses_the_darkest_ramp_color() {
        let svg = heatmap_svg_string(&two_by_two());
        let darkest = format!("rgb({0},{0},{0})", ramp(1.0));
        let lightest = format!("rgb({0},{0},{0})", ramp(0.0));
        assert!(svg.contains(&darkest), "{svg}");
        assert!(svg.contains(&lightest));
        // annotated extremes and mean in the header
        assert!(svg.contains("0.00%"));
        assert!(svg.contains("100.00%"));
        assert!(svg.contains("mean normalized error 50.00%"));
    }

    #[test]
    fn ramp_is_monotone_decreasing_in_brightness() {
        let mut last = 255u8;
        for step in 0..=20 {
            let level = ramp(step as f64 / 20.0);
            assert!(level <= last, "ramp brightened at step {step}");
            last = level;
        }
        assert_eq!(ramp(0.0), 235);
        assert_eq!(ramp(1.0), 38);
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("h.csv");
        let svg = dir.path().join("h.svg");
        emit_heatmap(&two_by_two(), &csv, Some(svg.as_path())).unwrap();
        assert!(csv.exists());
        assert!(svg.exists());
    }
}
