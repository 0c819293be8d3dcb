//! Builds an occupancy map from depth frames, refines a raw detection with it,
//! then cleans the region and shows refinement persisting through the clean
//! history.

use dynmap::geometry::{CameraIntrinsics, Frame, ObstacleBox, Pose};
use dynmap::occupancy::{
    clean_dynamic_region, refine_box, CleanHistory, DynamicBoxHistory, MapConfig, OccupancyGrid, RefineConfig,
};
use dynmap::sim::{render_depth, NoiseModel};
use dynmap::umap::{detect_raw_boxes, DetectorConfig};
use nalgebra::Vector3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let intr = CameraIntrinsics::from_fov(320, 240, 87.0, 58.0, 0.3, 10.0)?;
    let pose = Pose::looking(Vector3::new(0.0, 0.0, 1.1), 0.0, 0.0);
    let person = ObstacleBox::new(Frame::Map, Vector3::new(4.0, 0.0, 0.85), Vector3::new(0.4, 0.4, 1.7))?;
    let map = MapConfig::default();
    let refine = RefineConfig::default();
    let mut grid = OccupancyGrid::covering(Vector3::new(-0.5, -4.0, 0.0), Vector3::new(8.0, 4.0, 3.0), &map)?;
    let mut clean = CleanHistory::new(map.clean_frames);
    let mut dynamic = DynamicBoxHistory::new(map.clean_frames);
    let noise = NoiseModel::default();

    let mut raw = None;
    for frame in 0..5 {
        let img = render_depth(&[person], &pose, &intr, &noise, 1, frame);
        grid.integrate_depth(&img, &pose, 1);
        raw = detect_raw_boxes(&img, &pose, &DetectorConfig::default()).into_iter().next();
    }
    let raw = raw.ok_or("nothing detected")?;
    let r = refine_box(&grid, &clean, &raw, &refine)?;
    println!("raw size     {:.2?}", raw.size.as_slice());
    println!("refined size {:.2?} (refined: {})", r.bx.size.as_slice(), r.refined);

    dynamic.push(4, vec![r.bx]);
    let freed = clean_dynamic_region(&mut grid, &mut clean, dynamic.boxes(), refine.c_inflate, 4);
    println!("cleaned {freed} voxels");

    for frame in 5..5 + map.clean_frames + 2 {
        let img = render_depth(&[], &pose, &intr, &noise, 1, frame);
        grid.integrate_depth(&img, &pose, 1);
        dynamic.push(frame, vec![]);
        clean_dynamic_region(&mut grid, &mut clean, dynamic.boxes(), refine.c_inflate, frame);
        let again = refine_box(&grid, &clean, &raw, &refine)?;
        println!("frame {frame:2}: refined {}", again.refined);
    }
    Ok(())
}
