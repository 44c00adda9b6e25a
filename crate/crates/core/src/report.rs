//! The fit / compare / simulate / summarize workflow and its output files.
//!
//! Every output file starts with `# config_hash = ...` and `# seed = ...`
//! lines. CSV tables follow those lines with a header row; text files hold
//! `key = value` lines. Floats are written in their shortest round-trip
//! decimal form, so identical runs produce identical bytes. Only the
//! `timestamp` line of `provenance.txt` varies between runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::diagnostics::{
    convergence_report, dic_or_nearest, five_number, parameter_summaries, r_squared, summarize,
    tail_area_pi0, weight_differences, weight_label, ConvergenceRow, DicResult, PlugIn,
    SummaryRow, MIN_DIAGNOSTIC_DRAWS,
};
use crate::error::{Error, Result};
use crate::io::{
    load_survey_csv, load_truth, truth_string, write_survey_csv, write_text, IngestionReport,
    ModelChoice, RunConfig,
};
use crate::model::{Dataset, LatentVector};
use crate::sampler::{run_chain, run_separated_pair, Chain, ModelKind};
use crate::synth::generate_dataset;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// SHA-256 of the canonical configuration lines.
pub fn config_hash(config: &RunConfig) -> String {
    let mut text = config.canonical_lines().join("\n");
    text.push('\n');
    sha256_hex(text.as_bytes())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub input_sha256: String,
}

impl Provenance {
    fn header(&self) -> String {
        format!("# config_hash = {}\n# seed = {}\n", self.config_hash, self.seed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceRow {
    /// Summary of the period 1 minus period 2 draws.
    pub summary: SummaryRow,
    pub pi0: f64,
}

/// Everything a fit produces.
#[derive(Clone, Debug)]
pub struct ResultBundle {
    pub model_kind: ModelChoice,
    /// Weights then `sigma2`, per fitted model; separated labels carry a
    /// `period1.` or `period2.` prefix.
    pub summaries: Vec<SummaryRow>,
    /// Total over the fitted models.
    pub dic: DicResult,
    /// Per fitted model, labelled `joint`, `period1` or `period2`.
    pub model_dic: Vec<(String, DicResult)>,
    pub r2: Vec<SummaryRow>,
    pub differences: Option<Vec<DifferenceRow>>,
    pub convergence: Vec<(String, Vec<ConvergenceRow>)>,
    pub ingestion: IngestionReport,
    pub provenance: Provenance,
    pub chains: Vec<Chain>,
}

impl ResultBundle {
    /// Number of weights per fitted model, `k + 1`.
    pub fn weight_count(&self) -> usize {
        self.chains[0].weight_count()
    }
}

fn prefixed(rows: Vec<SummaryRow>, prefix: &str) -> Vec<SummaryRow> {
    rows.into_iter()
        .map(|mut r| {
            if !prefix.is_empty() {
                r.label = format!("{prefix}.{}", r.label);
            }
            r
        })
        .collect()
}

/// Loads the configured input and checks that every period present has
/// enough rows to fit.
pub fn load_input(config: &RunConfig) -> Result<(Dataset, IngestionReport, String)> {
    let path = &config.input_path;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (data, report) = load_survey_csv(path, config.scale_mapping, config.boundary_policy)?;
    data.check_groups()?;
    Ok((data, report, sha256_hex(&bytes)))
}

/// Runs the configured model on `data` without writing anything.
pub fn fit_dataset(
    config: &RunConfig,
    data: &Dataset,
    ingestion: IngestionReport,
    input_sha256: String,
) -> Result<ResultBundle> {
    config.sampler.validate()?;
    let provenance = Provenance {
        config_hash: config_hash(config),
        seed: config.sampler.seed,
        version: VERSION.to_string(),
        input_sha256,
    };
    let chains = match config.model_kind {
        ModelChoice::Joint => vec![run_chain(data, ModelKind::Joint, &config.sampler)?],
        ModelChoice::Separated => {
            let (a, b) = run_separated_pair(data, &config.sampler)?;
            vec![a, b]
        }
    };
    let prefix = |c: &Chain| match config.model_kind {
        ModelChoice::Joint => String::new(),
        ModelChoice::Separated => c.model_kind.label(),
    };

    let mut summaries = Vec::new();
    let mut r2 = Vec::new();
    let mut model_dic = Vec::new();
    let mut convergence = Vec::new();
    for c in &chains {
        summaries.extend(prefixed(parameter_summaries(c)?, &prefix(c)));
        r2.extend(prefixed(vec![r_squared(c, data)?], &prefix(c)));
        model_dic.push((c.model_kind.label(), dic_or_nearest(c, data)?));
        if c.len() >= MIN_DIAGNOSTIC_DRAWS {
            convergence.push((c.model_kind.label(), convergence_report(c)?));
        }
    }
    let dic = model_dic[1..]
        .iter()
        .fold(model_dic[0].1.clone(), |acc, (_, d)| acc.combine(d));

    let differences = if chains.len() == 2 {
        let columns = difference_columns(&chains[0], &chains[1])?;
        Some(
            columns
                .iter()
                .enumerate()
                .map(|(l, d)| {
                    Ok(DifferenceRow {
                        summary: summarize(d, &weight_label(l))?,
                        pi0: tail_area_pi0(d)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };

    Ok(ResultBundle {
        model_kind: config.model_kind,
        summaries,
        dic,
        model_dic,
        r2,
        differences,
        convergence,
        ingestion,
        provenance,
        chains,
    })
}

/// Per-weight difference draws, period 1 minus period 2.
fn difference_columns(first: &Chain, second: &Chain) -> Result<Vec<Vec<f64>>> {
    let matrix = weight_differences(first, second)?;
    let k1 = first.weight_count();
    Ok((0..k1).map(|l| matrix.iter().map(|row| row[l]).collect()).collect())
}

/// Fits the configured model and writes every result file to `output_dir`.
pub fn cmd_fit(config: &RunConfig) -> Result<ResultBundle> {
    config.validate()?;
    let (data, ingestion, input_sha) = load_input(config)?;
    let bundle = fit_dataset(config, &data, ingestion, input_sha)?;
    write_bundle(&bundle, config, &config.output_dir)?;
    Ok(bundle)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

const SUMMARY_HEADER: &str = "label,mean,sd,p2.5,median,p97.5";

fn summary_line(r: &SummaryRow) -> String {
    format!(
        "{},{},{},{},{},{}",
        r.label, r.mean, r.sd, r.p2_5, r.median, r.p97_5
    )
}

fn summary_csv(header: &str, rows: &[SummaryRow]) -> String {
    let mut out = format!("{header}{SUMMARY_HEADER}\n");
    for r in rows {
        out.push_str(&summary_line(r));
        out.push('\n');
    }
    out
}

fn plug_in_text(p: &PlugIn) -> String {
    match p {
        PlugIn::PosteriorMean => "posterior_mean".into(),
        PlugIn::NearestDraw(i) => format!("nearest_draw({i})"),
    }
}

fn dic_lines(prefix: &str, d: &DicResult, out: &mut String) {
    let p = if prefix.is_empty() {
        String::new()
    } else {
        format!("{prefix}.")
    };
    let _ = writeln!(out, "{p}dbar = {}", d.dbar);
    let _ = writeln!(out, "{p}d_at_mean = {}", d.d_at_mean);
    let _ = writeln!(out, "{p}p_d = {}", d.p_d);
    let _ = writeln!(out, "{p}dic = {}", d.dic);
}

fn dic_text(bundle: &ResultBundle) -> String {
    let mut out = bundle.provenance.header();
    dic_lines("", &bundle.dic, &mut out);
    if bundle.model_dic.len() == 1 {
        let _ = writeln!(out, "plug_in = {}", plug_in_text(&bundle.dic.plug_in[0]));
    } else {
        for (label, d) in &bundle.model_dic {
            dic_lines(label, d, &mut out);
            let _ = writeln!(out, "{label}.plug_in = {}", plug_in_text(&d.plug_in[0]));
        }
    }
    out
}

fn differences_csv(header: &str, rows: &[DifferenceRow]) -> String {
    let mut out = format!("{header}{SUMMARY_HEADER},pi0\n");
    for r in rows {
        let _ = writeln!(out, "{},{}", summary_line(&r.summary), r.pi0);
    }
    out
}

fn convergence_csv(header: &str, groups: &[(String, Vec<ConvergenceRow>)], prefixed: bool) -> String {
    let mut out = format!("{header}label,ess,geweke_z\n");
    for (model, rows) in groups {
        for r in rows {
            let label = if prefixed {
                format!("{model}.{}", r.label)
            } else {
                r.label.clone()
            };
            let _ = writeln!(out, "{label},{},{}", r.ess, r.geweke_z);
        }
    }
    out
}

fn ingestion_text(header: &str, r: &IngestionReport) -> String {
    let list = |v: &[usize]| {
        v.iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    };
    format!(
        "{header}rows_read = {}\nscale = {}\ndropped = {}\ndropped_rows = {}\nclamped = {}\nclamped_rows = {}\n",
        r.rows_read,
        match r.scale {
            crate::io::CellScale::Levels => "levels",
            crate::io::CellScale::Percent => "percent",
        },
        r.dropped_rows.len(),
        list(&r.dropped_rows),
        r.clamped_rows.len(),
        list(&r.clamped_rows),
    )
}

/// One column per named series, one row per draw.
fn draws_csv(header: &str, series: &[(String, Vec<f64>)]) -> String {
    let mut out = header.to_string();
    let names: Vec<&str> = series.iter().map(|(n, _)| n.as_str()).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    let rows = series.first().map_or(0, |s| s.1.len());
    for i in 0..rows {
        let cells: Vec<String> = series.iter().map(|(_, d)| d[i].to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn chain_series(chain: &Chain) -> Vec<(String, Vec<f64>)> {
    let mut s: Vec<(String, Vec<f64>)> = (0..chain.weight_count())
        .map(|l| (weight_label(l), chain.weight_trace(l)))
        .collect();
    s.push(("sigma2".into(), chain.sigma2_trace()));
    s
}

/// Writes the raw draws of each series to `draws_<stem>.csv` and, when
/// `emit_plots` is set, box plots of the series to `<plot_name>`.
pub fn emit_boxplot_data(
    dir: &Path,
    header: &str,
    stem: &str,
    series: &[(String, Vec<f64>)],
    plot: Option<(&str, &str)>,
) -> Result<()> {
    write_text(&dir.join(format!("draws_{stem}.csv")), &draws_csv(header, series))?;
    if let Some((file, title)) = plot {
        write_text(&dir.join(file), &boxplot_svg(title, series)?)?;
    }
    Ok(())
}

/// Box plots (minimum, quartiles, median, maximum) of each series, side by
/// side on a shared vertical axis.
pub fn boxplot_svg(title: &str, series: &[(String, Vec<f64>)]) -> Result<String> {
    let stats = series
        .iter()
        .map(|(_, d)| five_number(d))
        .collect::<Result<Vec<_>>>()?;
    let lo = stats.iter().map(|s| s.min).fold(f64::INFINITY, f64::min);
    let hi = stats.iter().map(|s| s.max).fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (left, top, plot_h, slot) = (60.0, 40.0, 300.0, 48.0);
    let width = left + slot * series.len() as f64 + 20.0;
    let height = top + plot_h + 60.0;
    let y = |v: f64| top + plot_h * (hi - v) / span;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{title}</text>"#,
        width / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#,
        top + plot_h
    );
    for (v, anchor) in [(hi, "end"), (lo, "end")] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="{anchor}">{v:.4}</text>"#,
            left - 4.0,
            y(v) + 3.0
        );
    }
    if lo < 0.0 && hi > 0.0 {
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{0}" x2="{1}" y2="{0}" stroke="#999" stroke-dasharray="4 3"/>"##,
            y(0.0),
            width - 20.0
        );
    }
    for (i, ((name, _), s)) in series.iter().zip(&stats).enumerate() {
        let cx = left + slot * (i as f64 + 0.5);
        let half = slot * 0.3;
        let _ = writeln!(svg, "<g>");
        let _ = writeln!(
            svg,
            "<title>{name}: min {} q1 {} median {} q3 {} max {}</title>",
            s.min, s.q1, s.median, s.q3, s.max
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{cx}" y1="{}" x2="{cx}" y2="{}" stroke="black"/>"#,
            y(s.max),
            y(s.min)
        );
        for v in [s.min, s.max] {
            let _ = writeln!(
                svg,
                r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/>"#,
                cx - half / 2.0,
                y(v),
                cx + half / 2.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="white" stroke="black"/>"#,
            cx - half,
            y(s.q3),
            2.0 * half,
            (y(s.q1) - y(s.q3)).max(0.0)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            y(s.median),
            cx + half
        );
        let _ = writeln!(
            svg,
            r#"<text x="{cx}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end" transform="rotate(-60 {cx} {})">{name}</text>"#,
            top + plot_h + 14.0,
            top + plot_h + 14.0
        );
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn table_text(rows: &[SummaryRow], extra: Option<&[f64]>) -> String {
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
    let mut out = format!(
        "{:<width$} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "", "Mean", "SD", "2.5%", "Median", "97.5%"
    );
    if extra.is_some() {
        let _ = write!(out, " {:>10}", "pi0");
    }
    out.push('\n');
    for (i, r) in rows.iter().enumerate() {
        let _ = write!(
            out,
            "{:<width$} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            r.label, r.mean, r.sd, r.p2_5, r.median, r.p97_5
        );
        if let Some(e) = extra {
            let _ = write!(out, " {:>10.4}", e[i]);
        }
        out.push('\n');
    }
    out
}

fn human_report(bundle: &ResultBundle) -> String {
    let mut out = format!(
        "{}Posterior summaries ({} model)\n\n",
        bundle.provenance.header(),
        bundle.model_kind
    );
    out.push_str(&table_text(&bundle.summaries, None));
    if let Some(diffs) = &bundle.differences {
        out.push_str("\nDifferences in weights (period 1 - period 2)\n\n");
        let rows: Vec<SummaryRow> = diffs.iter().map(|d| d.summary.clone()).collect();
        let pi0: Vec<f64> = diffs.iter().map(|d| d.pi0).collect();
        out.push_str(&table_text(&rows, Some(&pi0)));
    }
    out.push_str("\nR2\n\n");
    out.push_str(&table_text(&bundle.r2, None));
    let d = &bundle.dic;
    let _ = write!(
        out,
        "\nDIC = {:.3}  (Dbar = {:.3}, D(mean) = {:.3}, pD = {:.3})\n",
        d.dic, d.dbar, d.d_at_mean, d.p_d
    );
    let i = &bundle.ingestion;
    let _ = writeln!(
        out,
        "\nRows read: {}, dropped: {}, clamped: {}",
        i.rows_read,
        i.dropped_rows.len(),
        i.clamped_rows.len()
    );
    out
}

fn provenance_text(bundle: &ResultBundle, config: &RunConfig) -> String {
    let p = &bundle.provenance;
    let mut out = format!(
        "config_hash = {}\nversion = {}\ninput_sha256 = {}\n",
        p.config_hash, p.version, p.input_sha256
    );
    for line in config.canonical_lines() {
        out.push_str(&line);
        out.push('\n');
    }
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let _ = writeln!(out, "timestamp = {secs}");
    out
}

/// Writes every result file of `bundle` into `dir`.
pub fn write_bundle(bundle: &ResultBundle, config: &RunConfig, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let header = bundle.provenance.header();
    let separated = bundle.chains.len() == 2;
    write_text(&dir.join("summary.csv"), &summary_csv(&header, &bundle.summaries))?;
    write_text(&dir.join("r2.csv"), &summary_csv(&header, &bundle.r2))?;
    write_text(&dir.join("dic.txt"), &dic_text(bundle))?;
    write_text(
        &dir.join("convergence.csv"),
        &convergence_csv(&header, &bundle.convergence, separated),
    )?;
    write_text(&dir.join("ingestion.txt"), &ingestion_text(&header, &bundle.ingestion))?;

    let plots = config.emit_plots;
    if separated {
        let mut all = Vec::new();
        for c in &bundle.chains {
            let label = c.model_kind.label();
            let series = chain_series(c);
            emit_boxplot_data(dir, &header, &label, &series, None)?;
            let k1 = c.weight_count();
            all.extend(
                series
                    .into_iter()
                    .take(k1)
                    .map(|(n, d)| (format!("{label}.{n}"), d)),
            );
        }
        if plots {
            write_text(&dir.join("boxplots.svg"), &boxplot_svg("Posterior weights", &all)?)?;
        }
        let diffs: Vec<(String, Vec<f64>)> = difference_columns(&bundle.chains[0], &bundle.chains[1])?
            .into_iter()
            .enumerate()
            .map(|(l, d)| (weight_label(l), d))
            .collect();
        emit_boxplot_data(
            dir,
            &header,
            "differences",
            &diffs,
            plots.then_some(("differences_boxplots.svg", "Weight differences (period 1 - period 2)")),
        )?;
        if let Some(rows) = &bundle.differences {
            write_text(&dir.join("differences.csv"), &differences_csv(&header, rows))?;
        }
    } else {
        let c = &bundle.chains[0];
        let series = chain_series(c);
        emit_boxplot_data(dir, &header, &c.model_kind.label(), &series, None)?;
        if plots {
            let k1 = c.weight_count();
            write_text(
                &dir.join("boxplots.svg"),
                &boxplot_svg("Posterior weights", &series[..k1])?,
            )?;
        }
    }
    write_text(&dir.join("report.txt"), &human_report(bundle))?;
    write_text(&dir.join("provenance.txt"), &provenance_text(bundle, config))?;
    Ok(())
}

/// Joint and separated fits on the same data.
#[derive(Clone, Debug)]
pub struct CompareReport {
    pub joint: ResultBundle,
    pub separated: ResultBundle,
}

impl CompareReport {
    /// Joint DIC minus separated DIC; negative favours the joint model.
    pub fn dic_difference(&self) -> f64 {
        self.joint.dic.dic - self.separated.dic.dic
    }

    pub fn text(&self) -> String {
        let (j, s) = (&self.joint, &self.separated);
        let mut out = j.provenance.header();
        let _ = writeln!(out, "joint.dic = {}", j.dic.dic);
        let _ = writeln!(out, "joint.p_d = {}", j.dic.p_d);
        let _ = writeln!(out, "joint.dbar = {}", j.dic.dbar);
        let _ = writeln!(out, "separated.dic = {}", s.dic.dic);
        let _ = writeln!(out, "separated.p_d = {}", s.dic.p_d);
        let _ = writeln!(out, "separated.dbar = {}", s.dic.dbar);
        let _ = writeln!(out, "dic_difference = {}", self.dic_difference());
        for r in j.r2.iter().chain(&s.r2) {
            let name = if r.label == "R2" { "joint.R2" } else { &r.label };
            let _ = writeln!(out, "{name}_mean = {}", r.mean);
        }
        let preferred = if self.dic_difference() <= 0.0 {
            "joint"
        } else {
            "separated"
        };
        let _ = writeln!(out, "preferred = {preferred}");
        out
    }
}

/// Fits both models, writes each bundle to `joint/` and `separated/` under
/// the output directory, and the side-by-side DIC report to `compare.txt`.
pub fn cmd_compare(config: &RunConfig) -> Result<CompareReport> {
    config.validate()?;
    let (data, ingestion, input_sha) = load_input(config)?;
    let mut joint_cfg = config.clone();
    joint_cfg.model_kind = ModelChoice::Joint;
    let mut sep_cfg = config.clone();
    sep_cfg.model_kind = ModelChoice::Separated;
    let joint = fit_dataset(&joint_cfg, &data, ingestion.clone(), input_sha.clone())?;
    let separated = fit_dataset(&sep_cfg, &data, ingestion, input_sha)?;
    let dir = &config.output_dir;
    write_bundle(&joint, &joint_cfg, &dir.join("joint"))?;
    write_bundle(&separated, &sep_cfg, &dir.join("separated"))?;
    let report = CompareReport { joint, separated };
    write_text(&dir.join("compare.txt"), &report.text())?;
    Ok(report)
}

/// Paths of the sidecar files written next to a simulated dataset.
pub fn simulation_sidecars(output: &Path) -> (PathBuf, PathBuf) {
    let base = output.as_os_str().to_string_lossy().into_owned();
    (
        PathBuf::from(format!("{base}.truth.txt")),
        PathBuf::from(format!("{base}.latents.csv")),
    )
}

/// Generates a dataset from the truth file and writes it as survey CSV,
/// with the truth and the generating latent scores in sidecar files.
pub fn cmd_simulate(truth_path: &Path, seed: u64, output: &Path) -> Result<(Dataset, LatentVector)> {
    let truth = load_truth(truth_path)?;
    let (data, latents) = generate_dataset(&truth, seed)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_survey_csv(output, &data)?;
    let (truth_file, latent_file) = simulation_sidecars(output);
    write_text(&truth_file, &format!("# seed = {seed}\n{}", truth_string(&truth)))?;
    let mut z = String::from("z\n");
    for v in latents.as_slice() {
        let _ = writeln!(z, "{v}");
    }
    write_text(&latent_file, &z)?;
    Ok((data, latents))
}

/// Summaries of every column of a draws file.
pub fn summarize_draws_file(path: &Path) -> Result<Vec<SummaryRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if names.is_empty() {
        return Err(Error::Schema("draws file has no columns".into()));
    }
    let mut columns = vec![Vec::new(); names.len()];
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row: i + 1,
            column: String::new(),
            message: e.to_string(),
        })?;
        for (j, col) in columns.iter_mut().enumerate() {
            let cell = record.get(j).unwrap_or("");
            col.push(cell.parse::<f64>().map_err(|_| Error::Parse {
                row: i + 1,
                column: names[j].clone(),
                message: format!("'{cell}' is not a number"),
            })?);
        }
    }
    names
        .iter()
        .zip(&columns)
        .map(|(n, c)| summarize(c, n))
        .collect()
}

/// Summary rows as a CSV table without the provenance header.
pub fn summary_table_csv(rows: &[SummaryRow]) -> String {
    summary_csv("", rows)
}
