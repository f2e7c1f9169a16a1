use std::collections::HashMap;

use super::EvalError;
use crate::noise::NOISE_NAMES;

/// Recomputed averages further than this (in EER percentage points) from a printed
/// average are flagged in the rendered report.
pub const AVG_FLAG_TOLERANCE: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowKind {
    /// A measured condition identified by its condition tag.
    Condition { tag: String },
    /// Mean of the condition rows of the same group, always recomputed.
    Average,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridRow {
    pub group: String,
    pub parameter: String,
    pub kind: RowKind,
}

impl GridRow {
    fn condition(group: &str, parameter: impl Into<String>, tag: impl Into<String>) -> Self {
        Self { group: group.into(), parameter: parameter.into(), kind: RowKind::Condition { tag: tag.into() } }
    }

    fn average(group: &str) -> Self {
        Self { group: group.into(), parameter: "avg".into(), kind: RowKind::Average }
    }

    pub fn tag(&self) -> Option<&str> {
        match &self.kind {
            RowKind::Condition { tag } => Some(tag),
            RowKind::Average => None,
        }
    }
}

fn title_case(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

/// Standard report layout: clean eval, reverberation, five noises, recompression,
/// resampling and low-pass filtering, with an average row after each parameter sweep
/// of reverberation and noise.
pub fn report_layout(lpf_cutoff_hz: u32) -> Vec<GridRow> {
    let mut rows = vec![GridRow::condition("Clean eval", "", "clean")];
    for rt in ["0.3", "0.6", "0.9"] {
        rows.push(GridRow::condition("Reverberation", rt, format!("rt_{}", rt.replace('.', "_"))));
    }
    rows.push(GridRow::average("Reverberation"));
    for noise in NOISE_NAMES {
        let group = format!("{} Noise", title_case(noise));
        for snr in [0, 10, 20] {
            rows.push(GridRow::condition(&group, snr.to_string(), format!("{noise}_{snr}")));
        }
        rows.push(GridRow::average(&group));
    }
    for kbps in [16, 64, 128, 192, 256, 320] {
        rows.push(GridRow::condition("Recompression", kbps.to_string(), format!("mp3_{kbps}")));
    }
    for (label, rate) in [("8k", 8000), ("11k", 11_025), ("22k", 22_050), ("44k", 44_100)] {
        rows.push(GridRow::condition("Resampling", label, format!("rs_{rate}")));
    }
    rows.push(GridRow::condition("Low Pass Filtering", format!("{}k", f64::from(lpf_cutoff_hz) / 1000.0), format!("lpf_{lpf_cutoff_hz}")));
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format '{other}' (expected markdown or csv)")),
        }
    }
}

/// Attack-condition x system grid of EER percentages.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsGrid {
    rows: Vec<GridRow>,
    systems: Vec<String>,
    /// `(condition tag, system) -> EER %`.
    cells: HashMap<(String, String), f64>,
    /// `(group, system) -> externally printed average EER %`, kept only for comparison.
    printed_avgs: HashMap<(String, String), f64>,
}

impl ResultsGrid {
    pub fn new(rows: Vec<GridRow>) -> Self {
        Self { rows, ..Self::default() }
    }

    pub fn rows(&self) -> &[GridRow] {
        &self.rows
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn condition_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.tag().is_some()).count()
    }

    pub fn add_system(&mut self, system: &str) {
        if !self.systems.iter().any(|s| s == system) {
            self.systems.push(system.to_string());
        }
    }

    /// Records an EER given as a fraction in `[0, 1]`.
    pub fn set_eer(&mut self, tag: &str, system: &str, eer: f64) {
        self.set_percent(tag, system, 100.0 * eer);
    }

    pub fn set_percent(&mut self, tag: &str, system: &str, percent: f64) {
        self.add_system(system);
        self.cells.insert((tag.to_string(), system.to_string()), percent);
    }

    pub fn set_printed_avg(&mut self, group: &str, system: &str, percent: f64) {
        self.add_system(system);
        self.printed_avgs.insert((group.to_string(), system.to_string()), percent);
    }

    pub fn get(&self, tag: &str, system: &str) -> Option<f64> {
        self.cells.get(&(tag.to_string(), system.to_string())).copied()
    }

    /// Arithmetic mean of the group's condition rows; `None` unless all are present.
    pub fn average(&self, group: &str, system: &str) -> Option<f64> {
        let vals: Option<Vec<f64>> =
            self.rows.iter().filter(|r| r.group == group).filter_map(GridRow::tag).map(|t| self.get(t, system)).collect();
        let vals = vals?;
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    fn cell(&self, row: &GridRow, system: &str) -> Option<f64> {
        match &row.kind {
            RowKind::Condition { tag } => self.get(tag, system),
            RowKind::Average => self.average(&row.group, system),
        }
    }

    /// Average cells whose recomputed value disagrees with the printed one:
    /// `(group, system, recomputed, printed)` in row and system order.
    pub fn flagged_averages(&self) -> Vec<(String, String, f64, f64)> {
        let mut out = Vec::new();
        for row in self.rows.iter().filter(|r| r.kind == RowKind::Average) {
            for sys in &self.systems {
                let printed = self.printed_avgs.get(&(row.group.clone(), sys.clone()));
                if let (Some(&p), Some(r)) = (printed, self.average(&row.group, sys)) {
                    if (r - p).abs() > AVG_FLAG_TOLERANCE {
                        out.push((row.group.clone(), sys.clone(), r, p));
                    }
                }
            }
        }
        out
    }

    pub fn render(&self, format: ReportFormat) -> Result<String, EvalError> {
        if self.rows.is_empty() || self.systems.is_empty() {
            return Err(EvalError::EmptyGrid);
        }
        Ok(match format {
            ReportFormat::Markdown => self.render_markdown(),
            ReportFormat::Csv => self.render_csv(),
        })
    }

    fn render_markdown(&self) -> String {
        let flagged = self.flagged_averages();
        let is_flagged = |g: &str, s: &str| flagged.iter().any(|(fg, fs, _, _)| fg == g && fs == s);
        let mut out = String::from("| Laundering attack | Parameter |");
        for s in &self.systems {
            out += &format!(" {s} |");
        }
        out += "\n|---|---|";
        out += &"---:|".repeat(self.systems.len());
        out.push('\n');
        let mut prev_group: Option<&str> = None;
        for row in &self.rows {
            let group = if prev_group == Some(row.group.as_str()) { "" } else { row.group.as_str() };
            prev_group = Some(&row.group);
            out += &format!("| {group} | {} |", row.parameter);
            for s in &self.systems {
                let text = match self.cell(row, s) {
                    Some(v) if row.kind == RowKind::Average && is_flagged(&row.group, s) => format!("{v:.2}*"),
                    Some(v) => format!("{v:.2}"),
                    None => "—".to_string(),
                };
                out += &format!(" {text} |");
            }
            out.push('\n');
        }
        if !flagged.is_empty() {
            out += "\n\\* Recomputed mean of the parameter rows differs from the printed average:\n";
            for (g, s, r, p) in &flagged {
                out += &format!("- {s}, {g}: printed {p:.2}, recomputed {r:.2}\n");
            }
        }
        out
    }

    fn render_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["attack".to_string(), "parameter".to_string(), "tag".to_string()];
        header.extend(self.systems.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut rec = vec![row.group.clone(), row.parameter.clone(), row.tag().unwrap_or("avg").to_string()];
            rec.extend(self.systems.iter().map(|s| self.cell(row, s).map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    /// Parses CSV produced by [`render`](Self::render). Average rows are kept as printed
    /// averages and recomputed on demand.
    pub fn from_csv(text: &str) -> Result<Self, EvalError> {
        let bad = |line: usize, reason: String| EvalError::Malformed { source_name: None, line, reason };
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| bad(1, e.to_string()))?.clone();
        if header.len() < 3 || &header[0] != "attack" || &header[1] != "parameter" || &header[2] != "tag" {
            return Err(bad(1, "header must start with attack,parameter,tag".into()));
        }
        let systems: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
        let mut grid = ResultsGrid::default();
        systems.iter().for_each(|s| grid.add_system(s));
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| bad(line, e.to_string()))?;
            let row = if &rec[2] == "avg" { GridRow::average(&rec[0]) } else { GridRow::condition(&rec[0], &rec[1], &rec[2]) };
            for (s, field) in systems.iter().zip(rec.iter().skip(3)) {
                if field.is_empty() {
                    continue;
                }
                let v: f64 = field.parse().map_err(|_| bad(line, format!("'{field}' is not a number")))?;
                match &row.kind {
                    RowKind::Condition { tag } => grid.set_percent(tag, s, v),
                    RowKind::Average => grid.set_printed_avg(&row.group, s, v),
                }
            }
            grid.rows.push(row);
        }
        Ok(grid)
    }
}

/// Published EER (%) of seven countermeasures on the laundered evaluation sets,
/// including the averages as printed (which are compared, never used).
pub fn published_results() -> ResultsGrid {
    const SYSTEMS: [&str; 7] = ["CQCC-GMM", "LFCC-GMM", "LFCC-LCNN", "OC-Softmax", "RawNet2", "RawGat-ST", "AASIST"];
    const CELLS: [(&str, [f64; 7]); 30] = [
        ("clean", [8.9, 3.7, 6.35, 5.8, 4.6, 1.06, 0.83]),
        ("rt_0_3", [41.13, 22.4, 16.0, 9.01, 32.81, 27.21, 36.4]),
        ("rt_0_6", [48.47, 22.9, 20.68, 15.06, 41.45, 43.02, 55.27]),
        ("rt_0_9", [51.55, 25.96, 26.67, 22.04, 43.0, 48.69, 58.9]),
        ("babble_0", [28.74, 27.27, 34.77, 34.25, 26.97, 24.84, 33.39]),
        ("babble_10", [28.56, 28.5, 18.39, 19.16, 8.44, 20.78, 17.65]),
        ("babble_20", [30.69, 24.61, 9.53, 11.24, 4.76, 1.7, 2.33]),
        ("volvo_0", [37.92, 11.02, 8.83, 29.25, 8.73, 19.71, 10.48]),
        ("volvo_10", [27.53, 13.41, 7.17, 22.05, 5.76, 5.91, 5.52]),
        ("volvo_20", [15.65, 6.02, 6.63, 15.05, 4.77, 1.51, 1.76]),
        ("white_0", [42.24, 22.74, 28.88, 17.65, 15.12, 33.85, 41.31]),
        ("white_10", [43.78, 24.14, 30.06, 14.37, 7.88, 20.16, 12.66]),
        ("white_20", [37.58, 30.14, 21.36, 12.87, 5.43, 1.2, 3.95]),
        ("cafe_0", [38.22, 43.21, 27.46, 31.49, 24.23, 23.97, 38.48]),
        ("cafe_10", [36.69, 40.46, 19.43, 28.82, 8.93, 19.16, 14.74]),
        ("cafe_20", [33.32, 35.29, 12.5, 22.35, 5.09, 2.06, 2.81]),
        ("street_0", [29.68, 46.67, 30.03, 33.84, 32.47, 32.03, 40.08]),
        ("street_10", [40.45, 46.29, 17.54, 24.86, 12.1, 17.63, 21.26]),
        ("street_20", [39.49, 38.79, 9.66, 18.14, 5.09, 2.35, 2.9]),
        ("mp3_16", [42.88, 55.44, 15.09, 17.12, 4.51, 2.01, 1.6]),
        ("mp3_64", [13.68, 33.8, 6.26, 15.29, 5.09, 1.09, 0.88]),
        ("mp3_128", [13.43, 33.22, 6.35, 15.09, 4.06, 1.07, 0.83]),
        ("mp3_192", [13.4, 33.25, 6.35, 15.1, 4.07, 1.07, 0.83]),
        ("mp3_256", [13.4, 33.25, 6.35, 15.1, 4.07, 1.07, 0.83]),
        ("mp3_320", [13.4, 33.25, 6.35, 15.1, 4.07, 1.07, 0.83]),
        ("rs_8000", [18.92, 58.6, 14.79, 30.37, 3.75, 4.7, 4.62]),
        ("rs_11025", [13.73, 61.41, 22.17, 16.51, 3.63, 1.51, 1.81]),
        ("rs_22050", [13.69, 55.73, 10.74, 8.47, 4.16, 5.22, 2.91]),
        ("rs_44100", [13.68, 53.3, 13.51, 7.4, 4.16, 39.55, 25.49]),
        ("lpf_7000", [13.63, 50.1, 10.74, 10.02, 3.98, 5.29, 2.83]),
    ];
    const AVGS: [(&str, [f64; 7]); 6] = [
        ("Reverberation", [47.05, 23.75, 21.12, 15.37, 39.09, 39.64, 50.19]),
        ("Babble Noise", [34.78, 26.79, 20.9, 21.55, 13.39, 15.77, 17.79]),
        ("Volvo Noise", [27.03, 10.15, 7.54, 22.12, 6.42, 9.04, 5.92]),
        ("White Noise", [41.2, 25.67, 26.77, 14.96, 9.48, 18.4, 19.31]),
        ("Cafe Noise", [36.08, 39.65, 19.8, 27.55, 12.75, 15.06, 18.68]),
        ("Street Noise", [36.54, 43.92, 19.08, 25.61, 16.55, 17.34, 21.41]),
    ];
    let mut grid = ResultsGrid::new(report_layout(7000));
    for (tag, vals) in CELLS {
        for (s, v) in SYSTEMS.iter().zip(vals) {
            grid.set_percent(tag, s, v);
        }
    }
    for (group, vals) in AVGS {
        for (s, v) in SYSTEMS.iter().zip(vals) {
            grid.set_printed_avg(group, s, v);
        }
    }
    grid
}
