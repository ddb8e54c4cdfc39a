use std::path::PathBuf;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wavefield_core::{
    read_wav, simulate_capture, simulate_sphere_capture, write_wav, ArrayGeometry, Result,
    RoomSpec, SphereSpec,
};

use super::{expect_rate, invalid, mono, read_text};

#[derive(Args)]
pub struct SimArgs {
    /// Room description (dimensions, wall reflection coefficients, image
    /// order, source and receiver positions, sample rate).
    #[arg(long)]
    room: PathBuf,
    /// Microphone positions relative to the receiver origin. With
    /// --sphere-radius only their directions are used, and the 32-capsule
    /// layout is taken when omitted.
    #[arg(long, required_unless_present = "sphere_radius")]
    geometry: Option<PathBuf>,
    /// Mono source signal.
    #[arg(
        long,
        conflicts_with = "white_noise",
        required_unless_present = "white_noise"
    )]
    source: Option<PathBuf>,
    /// Use this many seconds of Gaussian white noise as the source.
    #[arg(long)]
    white_noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the generated source signal here.
    #[arg(long, requires = "white_noise")]
    source_out: Option<PathBuf>,
    /// Mount the microphones on a rigid sphere of this radius, in the
    /// directions of the geometry positions.
    #[arg(long)]
    sphere_radius: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

/// Standard deviation of the generated source.
const NOISE_STD: f64 = 0.1;

pub fn run(a: SimArgs) -> Result<()> {
    let room = RoomSpec::from_json(&read_text(&a.room)?)?;
    let geom = a
        .geometry
        .as_ref()
        .map(|p| ArrayGeometry::from_json(&read_text(p)?))
        .transpose()?;
    let sphere = match (a.sphere_radius, &geom) {
        (Some(r), Some(g)) => Some(SphereSpec::from_geometry(r, g)?),
        (Some(r), None) => Some(SphereSpec::em32(r)?),
        (None, _) => None,
    };
    let source = match (&a.source, a.white_noise) {
        (Some(p), _) => {
            let audio = read_wav(p)?;
            expect_rate(&audio, room.sample_rate, "source")?;
            mono(audio, "source")?
        }
        (None, Some(secs)) => {
            if !(secs.is_finite() && secs > 0.0) {
                return Err(invalid("--white-noise needs a positive duration"));
            }
            let n = (secs * room.sample_rate as f64).round() as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let dist = Normal::new(0.0, NOISE_STD).expect("valid normal distribution");
            let x: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
            if let Some(p) = &a.source_out {
                write_wav(p, std::slice::from_ref(&x), room.sample_rate)?;
            }
            x
        }
        (None, None) => return Err(invalid("either --source or --white-noise is required")),
    };
    let capture = match &sphere {
        Some(s) => simulate_sphere_capture(&room, s, &source)?,
        None => {
            let geom =
                geom.ok_or_else(|| invalid("--geometry is required without --sphere-radius"))?;
            simulate_capture(&room, &geom, &source)?
        }
    };
    write_wav(&a.output, &capture, room.sample_rate)
}
