use clap::{Parser, Subcommand};
use occ_sim::detect::{binarize, connected_components, differential_image, shape_filter, ShapeFilterParams};
use occ_sim::harness::{
    ber_csv, run_ber_sweep, run_packet_trace, run_throughput, steady_scene, throughput_csv,
    trace_csv, ScenarioConfig,
};
use occ_sim::ranging::{depth, disparity_to_pgm, sad_disparity};
use occ_sim::scene::{pgm_string, render, render_stereo, Frame};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// LED-to-camera link simulator.
#[derive(Parser)]
#[command(name = "occ-sim", version, about)]
struct Cli {
    /// Scenario description, TOML.
    #[arg(long, global = true, default_value = "scenario.toml")]
    config: PathBuf,
    /// Overrides the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for reports and debug frames.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep SNR and report both receivers' bit error rates.
    Ber,
    /// Sweep camera rate and report queue throughput.
    Throughput,
    /// Stream packets under image jitter and report per-second delivery.
    Trace,
    /// Run one differential detection pass and dump every stage.
    DetectDemo,
    /// Render a stereo pair and report the range to each detected region.
    RangeDemo,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn Error>> {
    let mut config = ScenarioConfig::from_path(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    std::fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::Ber => {
            let points = run_ber_sweep(&config)?;
            save(&cli.out.join("ber.csv"), &ber_csv(&points))?;
            for p in &points {
                println!(
                    "{:>8} dB  adaptive {:.6}  standard {:.6}  ({} symbols)",
                    p.snr_db, p.adaptive_ber, p.standard_ber, p.symbols
                );
            }
        }
        Command::Throughput => {
            let points = run_throughput(&config)?;
            save(&cli.out.join("throughput.csv"), &throughput_csv(&points))?;
            for p in &points {
                println!("{:>8} fps  {:.1} bps", p.arrival_fps, p.bits_per_second);
            }
        }
        Command::Trace => {
            let points = run_packet_trace(&config)?;
            save(&cli.out.join("trace.csv"), &trace_csv(&points))?;
            for p in &points {
                println!("{:>4} s  {:.3}", p.time, p.received_fraction);
            }
        }
        Command::DetectDemo => detect_demo(&config, &cli.out)?,
        Command::RangeDemo => range_demo(&config, &cli.out)?,
    }
    Ok(())
}

fn save(path: &Path, contents: &str) -> std::io::Result<()> {
    std::fs::write(path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn lit_and_dark_frames(
    config: &ScenarioConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Frame, Frame), Box<dyn Error>> {
    let mut scene = steady_scene(config, 1);
    let lit = render(&scene, &config.camera, 0.0, &config.channel, "left", rng)?;
    for vehicle in &mut scene.vehicles {
        let off = occ_sim::modem::WaveBody::Levels(vec![false]);
        vehicle.waveform.body = off;
    }
    let dark = render(&scene, &config.camera, 0.0, &config.channel, "left", rng)?;
    Ok((lit, dark))
}

fn detect_demo(config: &ScenarioConfig, out: &Path) -> Result<(), Box<dyn Error>> {
    if config.vehicles.is_empty() {
        return Err("the detection demo needs at least one vehicle".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (lit, dark) = lit_and_dark_frames(config, &mut rng)?;
    let diff = differential_image(&lit, &dark)?;
    let peak = diff.pixels.iter().cloned().fold(0.0, f64::max);
    let mask = binarize(&diff, 0.5 * peak);
    let regions = connected_components(&mask);
    let rois = shape_filter(&regions, diff.width, diff.height, &ShapeFilterParams::default());

    save(&out.join("lit.pgm"), &pgm_string(&lit))?;
    save(&out.join("dark.pgm"), &pgm_string(&dark))?;
    save(&out.join("differential.pgm"), &pgm_string(&diff))?;
    println!("{} candidate regions", rois.len());
    for (i, roi) in rois.iter().enumerate() {
        println!(
            "region {i}: {:?} centroid ({:.2}, {:.2}) area {} fill {:.2}",
            roi.tag, roi.centroid.0, roi.centroid.1, roi.area, roi.circumcircle_fill
        );
    }
    Ok(())
}

fn range_demo(config: &ScenarioConfig, out: &Path) -> Result<(), Box<dyn Error>> {
    if config.vehicles.is_empty() {
        return Err("the range demo needs at least one vehicle".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scene = steady_scene(config, 1);
    let (left, right) = render_stereo(
        &scene,
        &config.camera,
        &config.camera,
        config.ranging.baseline,
        0.0,
        &config.channel,
        &mut rng,
    )?;
    let map = sad_disparity(&left, &right, config.ranging.sad_window, config.ranging.max_disparity)?;

    save(&out.join("left.pgm"), &pgm_string(&left))?;
    save(&out.join("right.pgm"), &pgm_string(&right))?;
    save(&out.join("disparity.pgm"), &disparity_to_pgm(&map))?;

    let mask = binarize(&left, 0.5);
    let regions = connected_components(&mask);
    let rois = shape_filter(&regions, left.width, left.height, &ShapeFilterParams::default());
    let focal_px = config.camera.focal_px();
    for (i, roi) in rois.iter().filter(|r| r.accepted()).enumerate() {
        let mut samples: Vec<f64> = (roi.bbox.y0..=roi.bbox.y1)
            .flat_map(|y| (roi.bbox.x0..=roi.bbox.x1).map(move |x| (x, y)))
            .filter_map(|(x, y)| map.at(x, y))
            .collect();
        if samples.is_empty() {
            println!("region {i}: no disparity samples");
            continue;
        }
        samples.sort_by(f64::total_cmp);
        let median = samples[samples.len() / 2];
        match depth(median, focal_px, config.ranging.baseline) {
            Ok(z) => println!(
                "region {i}: centroid ({:.2}, {:.2}) disparity {median:.2} px, range {z:.2} m",
                roi.centroid.0, roi.centroid.1
            ),
            Err(_) => println!("region {i}: disparity {median:.2} px gives no range"),
        }
    }
    Ok(())
}
