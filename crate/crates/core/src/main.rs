use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use polspec::bands::band_rows;
use polspec::config::{ConfigDoc, OutputSection, RunConfig};
use polspec::diagnostics::{analyze_spectrum, assign_sub_lines, harmonic_line_positions, AnalysisOptions, LinePredictions, SidebandAnalysis};
use polspec::ensemble::ModelTag;
use polspec::fgr::{fgr_bands, FgrConfig};
use polspec::output::{read_spectrum_csv, write_bands_csv, write_output};
use polspec::presets::preset_text;
use polspec::{Error, Result};

#[derive(Parser)]
#[command(name = "polspec", version, about = "Modulation spectra of Rydberg atoms in ponderomotive optical lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute spectra and write CSV files plus report.json.
    Run(RunArgs),
    /// Export the Bloch bands of both levels.
    Bands(BandsArgs),
    /// Peak, dip and sub-line analysis of a spectrum CSV.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct Source {
    /// TOML run description.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in parameter set (fig2a, fig2b, fig3a, fig3b, fig4, fig5, fig7).
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn doc(&self) -> Result<Option<(ConfigDoc, String)>> {
        match (&self.config, &self.preset) {
            (Some(p), _) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))
                })?;
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                Ok(Some((ConfigDoc::parse(&text)?, stem)))
            }
            (None, Some(name)) => Ok(Some((ConfigDoc::parse(preset_text(name)?)?, name.clone()))),
            (None, None) => Ok(None),
        }
    }

    fn require(&self) -> Result<(ConfigDoc, String)> {
        self.doc()?
            .ok_or_else(|| Error::Config("either --config or --preset is required".into()))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of tdse, fgr, semiclassical.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct BandsArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 101)]
    p0_points: usize,
    #[arg(long, default_value_t = 12)]
    max_bands: usize,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Spectrum CSV written by `run`.
    input: PathBuf,
    /// Model that produced the file; guessed from the file name by default.
    #[arg(long)]
    model: Option<String>,
    /// Parameters used for harmonic line predictions.
    #[command(flatten)]
    source: Source,
    /// Write the JSON analysis here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0)]
    threshold: f64,
    /// Highest vibrational index of the predicted sub-lines.
    #[arg(long, default_value_t = 4)]
    nu_max: u32,
}

fn pool(workers: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let (mut doc, stem) = a.source.require()?;
    if let Some(m) = a.models {
        doc.models = m;
    }
    if a.seed.is_some() {
        doc.seed = a.seed;
    }
    if a.workers.is_some() {
        doc.workers = a.workers;
    }
    if let Some(o) = a.out {
        doc.output = Some(OutputSection { dir: Some(o) });
    }
    let cfg = RunConfig::from_doc(&doc)?;
    let dir = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("polspec-{stem}")));
    match polspec::run::run(&cfg) {
        Ok(out) => {
            for p in write_output(&out.spectra, &out.report, &dir)? {
                println!("{}", p.display());
            }
            for m in &out.report.models {
                eprintln!("{}: {} points in {:.1} s", m.model.name(), m.points, m.wall_time_s);
            }
            Ok(())
        }
        Err(f) => {
            // Keep what finished so the failure can be inspected.
            let _ = write_output(&f.partial.spectra, &f.partial.report, &dir);
            Err(f.error)
        }
    }
}

fn cmd_bands(a: BandsArgs) -> Result<()> {
    let (doc, _) = a.source.require()?;
    let cfg = RunConfig::from_doc(&doc)?;
    pool(a.workers.unwrap_or(cfg.workers))?;
    let scales = cfg.scales();
    let fcfg = FgrConfig {
        p0_points: a.p0_points,
        ..cfg.fgr
    };
    fcfg.validate()?;
    let mut model = cfg.model.clone();
    // Band shapes are wanted across the zone, even for a zero-temperature config.
    model.temperature = model.temperature.max(1e-9);
    let (b1, b2) = fgr_bands(&model, &scales, &fcfg, fcfg.sigma_for(&cfg.pulse))?;
    let mut rows = band_rows(1, &b1, a.max_bands);
    rows.extend(band_rows(2, &b2, a.max_bands));
    std::fs::create_dir_all(&a.out)?;
    let path = a.out.join("bands.csv");
    write_bands_csv(&rows, scales.omega_k, &path)?;
    println!("{}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct AnalyzeReport {
    input: String,
    omega_k: f64,
    analysis: SidebandAnalysis,
    predictions: Option<LinePredictions>,
}

fn guess_tag(path: &Path) -> ModelTag {
    let stem = path.file_stem().map(|s| s.to_string_lossy().to_ascii_lowercase()).unwrap_or_default();
    ModelTag::parse(&stem).unwrap_or(ModelTag::Fgr)
}

/// Sub-lines weaker than this fraction of the strongest one are ignored.
const SUB_LINE_PROMINENCE: f64 = 0.1;

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    let tag = match &a.model {
        Some(m) => ModelTag::parse(m)?,
        None => guess_tag(&a.input),
    };
    let spec = read_spectrum_csv(&a.input, tag)?;
    let opts = AnalysisOptions {
        threshold: a.threshold,
        ..Default::default()
    };
    let mut analysis = analyze_spectrum(&spec, &opts);
    let predictions = match a.source.doc()? {
        Some((doc, _)) => {
            let cfg = RunConfig::from_doc(&doc)?;
            Some(harmonic_line_positions(&cfg.model, &cfg.scales(), a.nu_max))
        }
        None => None,
    };
    if let Some(p) = &predictions {
        for lines in [&p.blue2, &p.red2] {
            analysis
                .sub_lines
                .extend(assign_sub_lines(&spec.delta, &spec.value, lines, SUB_LINE_PROMINENCE));
        }
    }
    let report = AnalyzeReport {
        input: a.input.display().to_string(),
        omega_k: spec.meta.omega_k,
        analysis,
        predictions,
    };
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match a.out {
        Some(p) => std::fs::write(&p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Bands(a) => cmd_bands(a),
        Command::Analyze(a) => cmd_analyze(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polspec: error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
