//! Sound-field synthesis for microphone arrays on rigid devices.
//!
//! A room capture from a large reference array is decomposed into sparse
//! plane waves per time-frequency cell. The resulting map is re-rendered
//! through the acoustic dictionary of any other device, and the multichannel
//! room impulse response of that device is estimated from the rendering.

#![allow(clippy::needless_range_loop)]

pub mod dictionary;
pub mod error;
pub mod geometry;
pub mod pwd;
pub mod rir;
pub mod roomsim;
pub mod sphere;
pub mod stft;
pub mod synthesis;
pub mod wav;

pub use dictionary::{
    build_free_field, build_rigid_sphere, load_dictionary, save_dictionary, DeviceDictionary,
    DirectionGrid, SphereSpec,
};
pub use error::{Error, Result};
pub use geometry::{
    plane_wave_pressure, steering_vector, ArrayGeometry, ComplexPressure, Direction, FrequencyGrid,
    Vec3, DEFAULT_SPEED_OF_SOUND,
};
pub use pwd::{
    decompose, decompose_cell, decompose_traced, goa, load_map, save_map, AtomMatrix,
    DecompositionConfig, GoaReport, MapAtom, TimeFrequencyMap,
};
pub use rir::{
    apply_rir, estimate_rir, load_transfer_function, save_transfer_function, to_impulse_response,
    CrossSpectra, TransferFunction,
};
pub use roomsim::{
    generate_scene, image_sources, simulate_capture, simulate_sphere_capture, GroundTruthScene,
    ImageSource, RoomSpec,
};
pub use stft::{istft, stft, SpectralTensor, StftConfig, WindowKind};
pub use synthesis::{add_noise, render, synthesize_field, NoiseMap};
pub use wav::{read_wav, write_wav, Audio};
