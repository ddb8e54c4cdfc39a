use std::path::PathBuf;

use clap::{Args, Subcommand};
use wavefield_core::dictionary::bins_up_to;
use wavefield_core::{
    build_free_field, build_rigid_sphere, load_dictionary, save_dictionary, ArrayGeometry,
    DirectionGrid, FrequencyGrid, Result, SphereSpec, DEFAULT_SPEED_OF_SOUND,
};

use super::read_text;

#[derive(Subcommand)]
pub enum DictCommand {
    /// Microphones flush-mounted on a rigid sphere.
    BuildSphere(SphereArgs),
    /// Microphones in free field, no scattering body.
    BuildFreefield(FreeFieldArgs),
    /// Print dimensions, grid and frequency coverage of a dictionary.
    Info { path: PathBuf },
}

#[derive(Args)]
pub struct GridArgs {
    /// Equiangular grid step in degrees.
    #[arg(long, default_value_t = 10.0)]
    grid_step: f64,
    #[arg(long, default_value_t = 16_000)]
    sample_rate: u32,
    /// FFT size, which must match the STFT frame used on captures.
    #[arg(long, default_value_t = 1024)]
    fft_size: usize,
    /// Highest frequency stored, Hz.
    #[arg(long, default_value_t = 8000.0)]
    max_freq: f64,
    #[arg(long, default_value_t = DEFAULT_SPEED_OF_SOUND)]
    speed_of_sound: f64,
}

impl GridArgs {
    fn build(&self) -> Result<(DirectionGrid, FrequencyGrid, Vec<usize>)> {
        let grid = DirectionGrid::equiangular(self.grid_step)?;
        let freqs = FrequencyGrid::with_speed_of_sound(
            self.sample_rate,
            self.fft_size,
            self.speed_of_sound,
        )?;
        let bins = bins_up_to(&freqs, self.max_freq);
        Ok((grid, freqs, bins))
    }
}

#[derive(Args)]
pub struct SphereArgs {
    /// Sphere radius in meters.
    #[arg(long, default_value_t = 0.042)]
    radius: f64,
    /// Geometry JSON whose positions give the microphone directions; the
    /// 32-capsule layout is used when omitted.
    #[arg(long)]
    layout: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
pub struct FreeFieldArgs {
    /// Geometry JSON with `positions_m`.
    #[arg(long)]
    geometry: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(short, long)]
    output: PathBuf,
}

pub fn run(cmd: DictCommand) -> Result<()> {
    match cmd {
        DictCommand::BuildSphere(a) => {
            let spec = match &a.layout {
                Some(p) => {
                    SphereSpec::from_geometry(a.radius, &ArrayGeometry::from_json(&read_text(p)?)?)?
                }
                None => SphereSpec::em32(a.radius)?,
            };
            let (grid, freqs, bins) = a.grid.build()?;
            let dict = build_rigid_sphere(&spec, &grid, &freqs, &bins)?;
            save_dictionary(&dict, &a.output)
        }
        DictCommand::BuildFreefield(a) => {
            let geom = ArrayGeometry::from_json(&read_text(&a.geometry)?)?;
            let (grid, freqs, bins) = a.grid.build()?;
            let dict = build_free_field(&geom, &grid, &freqs, &bins)?;
            save_dictionary(&dict, &a.output)
        }
        DictCommand::Info { path } => {
            let d = load_dictionary(&path)?;
            let meta = d.metadata();
            let f = d.freqs();
            let bins = d.bins();
            println!("device        {}", meta.device_name);
            println!("builder       {:?}", meta.builder);
            if let Some(r) = meta.radius_m {
                println!("radius_m      {r}");
            }
            println!("microphones   {}", d.num_mics());
            println!(
                "directions    {} ({:?})",
                d.num_directions(),
                d.grid().scheme()
            );
            println!("grid_hash     {}", d.grid().content_hash());
            println!("sample_rate   {}", f.sample_rate);
            println!("fft_size      {}", f.fft_size);
            println!(
                "bins          {} ({:.1} Hz to {:.1} Hz)",
                bins.len(),
                f.bin_freq(bins[0]),
                f.bin_freq(*bins.last().unwrap())
            );
            Ok(())
        }
    }
}
