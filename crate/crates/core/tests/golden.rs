use sha2::{Digest, Sha256};

use intensity_map::config::EpisodeConfig;
use intensity_map::episode::run_episode_observed;
use intensity_map::export::{goal_cell, plan_ppm, GLASS};
use intensity_map::sim::scene::Scene;

const FRAME: usize = 40;
const PLAN_SHA256: &str = "69bb419142d97d97168ae1a76b46c38e23ff73f3e7f7d724f07c1a35d921a1da";

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Mid-corridor plan map of the glass scene: pins the color mapping, the
/// image orientation and the whole perception pipeline at once.
#[test]
fn glass_corridor_plan_image() {
    let scene = Scene::builtin("scenario1").unwrap();
    let config = EpisodeConfig::for_scene(&scene);
    let mut image = None;
    run_episode_observed(&scene, &config, |v| {
        if v.index == FRAME {
            let g = v.frame.plan.cost.geometry();
            image = Some(plan_ppm(
                &v.frame.plan,
                Some(g.center_cell()),
                Some(goal_cell(g, v.goal_local)),
            ));
        }
    })
    .unwrap();
    let image = image.expect("episode reaches the frame");
    let header = b"P6\n200 200\n255\n";
    assert!(image.starts_with(header));
    let glass = image[header.len()..]
        .chunks(3)
        .filter(|p| *p == GLASS)
        .count();
    assert!(glass > 50, "only {glass} glass pixels");
    assert_eq!(hex(&Sha256::digest(&image)), PLAN_SHA256);
}
