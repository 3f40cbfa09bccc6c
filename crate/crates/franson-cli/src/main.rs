//! Command-line driver for the coincidence-imaging simulator.
//!
//! Subcommands cover the full workflow: `render` simulates (or predicts)
//! a frame pair from a scene document, `sweep` records an interference
//! fringe against the trim phase, `keygen`/`auth` generate and compare
//! phase key cards in the bucket configuration, `analyze` reruns the
//! contrast analysis on stored frames, and `budget` computes the exact
//! sample size a card comparison needs.
//!
//! Exit codes: 0 on success (and on an accepted card), 1 on any error,
//! 2 when a card is rejected, 3 when a comparison is indeterminate.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use franson::auth::{default_auth_scene, DEFAULT_CARD_STEP, DEFAULT_THRESHOLD};
use franson::io::{pgm, report, scene_doc};
use franson::{
    chi2_frame_test, difference_image, expected_counts, fit_fringe, generate_card_with_step,
    phase_sweep, predicted_snr, required_pairs, run_authentication, simulate_frame, snr, Basis,
    Decision, DetectionFrame, Error, GridSpec, RegionSpec,
};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_REJECT: u8 = 2;
const EXIT_INDETERMINATE: u8 = 3;

/// Prints a line to stdout, ignoring write failures so that a closed pipe
/// (for example `franson render ... | head`) truncates instead of
/// panicking.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "franson",
    version,
    about = "Simulates coincidence imaging of phase objects in a polarization two-photon interferometer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one frame per output basis from a scene document.
    Render(RenderArgs),
    /// Sweep the trim phase and record the fringe in both bases.
    Sweep(SweepArgs),
    /// Generate a quantized random phase key card.
    Keygen(KeygenArgs),
    /// Compare two key cards with bucket detectors.
    Auth(AuthArgs),
    /// Recompute difference and contrast from stored frames.
    Analyze(AnalyzeArgs),
    /// Exact binomial sample size for separating card hypotheses.
    Budget(BudgetArgs),
}

#[derive(Args)]
struct RenderArgs {
    /// Scene document (JSON).
    #[arg(long)]
    scene: PathBuf,
    /// Pair budget per output basis.
    #[arg(long, default_value_t = 1_000_000)]
    pairs: u64,
    /// Seed for the pair and dark-count streams.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Directory the output files are written into.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Basename shared by the output files.
    #[arg(long, default_value = "frame")]
    prefix: String,
    /// Write rounded expected counts instead of Monte Carlo draws.
    #[arg(long)]
    analytic: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Scene document (JSON).
    #[arg(long)]
    scene: PathBuf,
    /// Pair budget per basis at each phase step.
    #[arg(long, default_value_t = 200_000)]
    pairs: u64,
    /// Number of uniform phase steps over one turn (at least 4).
    #[arg(long, default_value_t = 16)]
    steps: u32,
    /// Seed; each step derives its own child seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV path.
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct KeygenArgs {
    /// Card width in pixels.
    #[arg(long, default_value_t = 64)]
    width: u32,
    /// Card height in pixels.
    #[arg(long, default_value_t = 64)]
    height: u32,
    /// Pixel pitch in meters.
    #[arg(long, default_value_t = 1e-5)]
    pitch: f64,
    /// Seed the card pattern is derived from.
    #[arg(long)]
    seed: u64,
    /// Card identifier; defaults to card-<seed>.
    #[arg(long)]
    id: Option<String>,
    /// Delay quantization step in meters.
    #[arg(long, default_value_t = DEFAULT_CARD_STEP)]
    step: f64,
    /// Output PGM path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AuthArgs {
    /// Card inserted in the idler path (PGM).
    #[arg(long)]
    alice: PathBuf,
    /// Card inserted in the signal path (PGM).
    #[arg(long)]
    bob: PathBuf,
    /// Total pair budget, split evenly between the bases.
    #[arg(long, default_value_t = 4096)]
    pairs: u64,
    /// Seed for the detection streams.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Reject when the destructive fraction exceeds this.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Constructive-basis frame (PGM).
    #[arg(long)]
    constructive: PathBuf,
    /// Destructive-basis frame (PGM).
    #[arg(long)]
    destructive: PathBuf,
    /// Region expected to hold signal, as x0,y0,x1,y1 (inclusive).
    #[arg(long, value_parser = parse_region)]
    region_in: RegionSpec,
    /// Disjoint background region, same format.
    #[arg(long, value_parser = parse_region)]
    region_out: RegionSpec,
    /// Optional path for the difference image (PGM).
    #[arg(long)]
    diff: Option<PathBuf>,
    /// Optional path for the contrast statistics.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct BudgetArgs {
    /// False-accept probability bound.
    #[arg(long, default_value_t = 1e-6)]
    alpha: f64,
    /// False-reject probability bound.
    #[arg(long, default_value_t = 1e-6)]
    beta: f64,
    /// Destructive fraction of a mismatched card.
    #[arg(long, default_value_t = 0.5)]
    mismatch_fraction: f64,
    /// Destructive fraction of a genuine card.
    #[arg(long, default_value_t = 0.0)]
    match_fraction: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are not failures; usage mistakes are.
            let code = if err.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Render(args) => cmd_render(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Keygen(args) => cmd_keygen(&args),
        Command::Auth(args) => cmd_auth(&args),
        Command::Analyze(args) => cmd_analyze(&args),
        Command::Budget(args) => cmd_budget(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            use std::io::Write;
            let _ = writeln!(std::io::stderr(), "error: {err}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn parse_region(text: &str) -> Result<RegionSpec, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 4 {
        return Err(format!("expected x0,y0,x1,y1, got {text:?}"));
    }
    let mut corners = [0u32; 4];
    for (slot, part) in corners.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|err| format!("bad coordinate {part:?}: {err}"))?;
    }
    RegionSpec::new(corners[0], corners[1], corners[2], corners[3]).map_err(|err| err.to_string())
}

/// Formats an f64 with the shortest representation that round-trips.
/// Shortest round-trip decimal, switching to exponent notation for tiny
/// magnitudes so an extreme binomial tail does not print hundreds of zeros.
fn num(value: f64) -> String {
    if value != 0.0 && value.abs() < 1e-4 {
        format!("{value:e}")
    } else {
        format!("{value}")
    }
}

fn cmd_render(args: &RenderArgs) -> franson::Result<u8> {
    let parsed = scene_doc::load_scene_document(&args.scene)?;
    let scene = &parsed.scene;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|source| Error::Io {
            path: args.out_dir.clone(),
            source,
        })?;
    let render_one = |basis: Basis| -> franson::Result<DetectionFrame> {
        if args.analytic {
            let mu = expected_counts(scene, basis, args.pairs)?;
            let counts = mu
                .iter()
                .map(|&m| m.round().min(u32::MAX as f64) as u32)
                .collect();
            DetectionFrame::from_parts(scene.grid, counts, basis, args.pairs, args.seed)
        } else {
            simulate_frame(scene, basis, args.pairs, args.seed)
        }
    };
    let con = render_one(Basis::Constructive)?;
    let des = render_one(Basis::Destructive)?;
    let path_for = |suffix: &str, ext: &str| {
        args.out_dir.join(format!("{}_{suffix}.{ext}", args.prefix))
    };
    pgm::write_frame(&path_for("constructive", "pgm"), &con)?;
    pgm::write_frame(&path_for("destructive", "pgm"), &des)?;
    let diff = difference_image(&con, &des)?;
    pgm::write_difference(&path_for("difference", "pgm"), &diff)?;

    let mut lines: Vec<(String, String)> = vec![
        (
            "mode".into(),
            if args.analytic { "analytic" } else { "monte-carlo" }.into(),
        ),
        ("pairs_per_basis".into(), args.pairs.to_string()),
        ("seed".into(), args.seed.to_string()),
        ("constructive_total".into(), con.total().to_string()),
        ("destructive_total".into(), des.total().to_string()),
    ];
    if !args.analytic {
        for frame in [&con, &des] {
            let mu = expected_counts(scene, frame.basis(), args.pairs)?;
            let fit = chi2_frame_test(frame, &mu)?;
            let label = frame.basis().label();
            lines.push((format!("chi2_{label}"), num(fit.statistic)));
            lines.push((format!("chi2_{label}_dof"), fit.dof.to_string()));
            lines.push((format!("chi2_{label}_p"), num(fit.p_value)));
        }
    }
    for (name_in, name_out) in &parsed.snr_pairs {
        let region_in = &parsed.regions[name_in];
        let region_out = &parsed.regions[name_out];
        let predicted = predicted_snr(scene, args.pairs, region_in, region_out)?;
        lines.push((
            format!("predicted_snr_{name_in}_{name_out}"),
            num(predicted),
        ));
        if args.analytic {
            // A noiseless rendering has no shot noise to measure against;
            // only the finite-budget prediction is meaningful.
            say!("contrast {name_in}/{name_out}: predicted {predicted:.3}");
        } else {
            let measured = snr(&diff, region_in, region_out)?;
            lines.push((format!("snr_{name_in}_{name_out}"), num(measured.snr)));
            say!(
                "contrast {name_in}/{name_out}: measured {:.3}, predicted {:.3}",
                measured.snr, predicted
            );
        }
    }
    let stats_path = path_for("stats", "txt");
    report::write_stats(&stats_path, &lines)?;
    say!(
        "wrote {} frames and stats under {} (prefix {:?})",
        if args.analytic { "analytic" } else { "simulated" },
        args.out_dir.display(),
        args.prefix
    );
    Ok(EXIT_OK)
}

fn cmd_sweep(args: &SweepArgs) -> franson::Result<u8> {
    let parsed = scene_doc::load_scene_document(&args.scene)?;
    let rows = phase_sweep(&parsed.scene, args.pairs, args.steps, args.seed)?;
    let phases: Vec<f64> = rows.iter().map(|row| row.phase).collect();
    let rates: Vec<f64> = rows.iter().map(|row| row.constructive_rate()).collect();
    let fit = fit_fringe(&phases, &rates)?;
    report::write_sweep_csv(&args.out, &rows, Some(&fit))?;
    say!("wrote {} ({} steps)", args.out.display(), rows.len());
    say!(
        "fitted visibility {:.4} at phase {:.4}",
        fit.visibility, fit.phase
    );
    Ok(EXIT_OK)
}

fn cmd_keygen(args: &KeygenArgs) -> franson::Result<u8> {
    let grid = GridSpec::new(args.width, args.height, args.pitch)?;
    let id = args
        .id
        .clone()
        .unwrap_or_else(|| format!("card-{}", args.seed));
    let card = generate_card_with_step(grid, args.seed, id, args.step)?;
    pgm::write_card(&args.out, &card, args.step)?;
    say!(
        "wrote card {:?} ({}x{}) to {}",
        card.id(),
        args.width,
        args.height,
        args.out.display()
    );
    Ok(EXIT_OK)
}

fn cmd_auth(args: &AuthArgs) -> franson::Result<u8> {
    let alice = pgm::read_card(&args.alice)?;
    let bob = pgm::read_card(&args.bob)?;
    let scene = default_auth_scene(*alice.grid());
    match run_authentication(&scene, &alice, &bob, args.pairs, args.seed, args.threshold) {
        Ok(result) => {
            say!("n_constructive = {}", result.n_constructive);
            say!("n_destructive = {}", result.n_destructive);
            say!("destructive_fraction = {}", num(result.destructive_fraction));
            say!("p_value = {}", num(result.p_value));
            match result.decision {
                Decision::Accept => {
                    say!("decision = accept");
                    Ok(EXIT_OK)
                }
                Decision::Reject => {
                    say!("decision = reject");
                    Ok(EXIT_REJECT)
                }
            }
        }
        Err(Error::IndeterminateAuth) => {
            say!("decision = indeterminate");
            Ok(EXIT_INDETERMINATE)
        }
        Err(err) => Err(err),
    }
}

fn cmd_analyze(args: &AnalyzeArgs) -> franson::Result<u8> {
    let con = pgm::read_frame(&args.constructive)?;
    let des = pgm::read_frame(&args.destructive)?;
    let diff = difference_image(&con, &des)?;
    let contrast = snr(&diff, &args.region_in, &args.region_out)?;
    let lines: Vec<(String, String)> = vec![
        ("mean_in".into(), num(contrast.mean_in)),
        ("mean_out".into(), num(contrast.mean_out)),
        ("std_in".into(), num(contrast.std_in)),
        ("std_out".into(), num(contrast.std_out)),
        ("sigma".into(), num(contrast.sigma)),
        ("snr".into(), num(contrast.snr)),
    ];
    for (key, value) in &lines {
        say!("{key} = {value}");
    }
    if let Some(path) = &args.diff {
        pgm::write_difference(path, &diff)?;
    }
    if let Some(path) = &args.stats {
        report::write_stats(path, &lines)?;
    }
    Ok(EXIT_OK)
}

fn cmd_budget(args: &BudgetArgs) -> franson::Result<u8> {
    let pairs = required_pairs(
        args.alpha,
        args.beta,
        args.mismatch_fraction,
        args.match_fraction,
    )?;
    say!("required_pairs = {pairs}");
    Ok(EXIT_OK)
}
