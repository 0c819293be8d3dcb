//! Renders one synthetic depth frame and runs the region-proposal detector.

use dynmap::geometry::{CameraIntrinsics, Frame, ObstacleBox, Pose};
use dynmap::sim::{render_depth, NoiseModel};
use dynmap::umap::{detect_raw_boxes, DetectorConfig};
use nalgebra::Vector3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let intr = CameraIntrinsics::from_fov(320, 240, 87.0, 58.0, 0.3, 10.0)?;
    let pose = Pose::looking(Vector3::new(0.0, 0.0, 1.1), 0.0, 0.0);
    let scene = [
        ObstacleBox::new(Frame::Map, Vector3::new(3.0, 0.5, 0.85), Vector3::new(0.4, 0.4, 1.7))?,
        ObstacleBox::new(Frame::Map, Vector3::new(5.0, -1.2, 0.85), Vector3::new(0.4, 0.4, 1.7))?,
        ObstacleBox::from_min_max(Frame::Map, Vector3::new(8.0, -4.0, 0.0), Vector3::new(8.3, 4.0, 3.0))?,
    ];
    let img = render_depth(&scene, &pose, &intr, &NoiseModel::default(), 7, 0);
    println!("{}x{} depth image, {} valid pixels", img.width(), img.height(), img.valid_count());

    for b in detect_raw_boxes(&img, &pose, &DetectorConfig::default()) {
        println!(
            "box at ({:.2}, {:.2}, {:.2}) size ({:.2}, {:.2}, {:.2})",
            b.center.x, b.center.y, b.center.z, b.size.x, b.size.y, b.size.z
        );
    }
    Ok(())
}
