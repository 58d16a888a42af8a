//! Shared inputs for the benchmarks.

use prnu_core::sensor_sim::{render_sequence, SequenceRole};
use prnu_core::{make_camera, FrameSequence, SceneSchedule, SensorModel};

pub fn camera(width: usize, height: usize) -> SensorModel {
    make_camera("bench", width, height, 0.02, 2.0, 17).expect("valid camera")
}

pub fn frames(width: usize, height: usize, count: usize) -> FrameSequence {
    render_sequence(&camera(width, height), SequenceRole::Query, count, SceneSchedule::default(), true)
        .expect("renders")
}
