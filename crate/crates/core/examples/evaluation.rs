//! Mask AP, precision and recall on a hand-made example.

use boxvote::eval::{default_thresholds, evaluate};
use boxvote::instancer::InstanceMask;

fn mask(points: std::ops::Range<usize>, label: u32, score: f64) -> InstanceMask {
    InstanceMask { point_indices: points.collect(), label, score }
}

fn main() {
    let names: Vec<String> = ["background", "chair", "table"].iter().map(|s| s.to_string()).collect();
    let gts = vec![mask(0..100, 1, 1.0), mask(100..200, 1, 1.0), mask(200..400, 2, 1.0)];
    let preds = vec![
        mask(0..90, 1, 0.9),
        mask(150..260, 1, 0.8),
        mask(100..160, 1, 0.4),
        mask(200..390, 2, 0.7),
    ];
    let report = evaluate(&preds, &gts, &default_thresholds(), &names);
    print!("{}", report.to_table());
    println!("{}", serde_json::to_string_pretty(&report.classes[0].matches[1]).unwrap());
}
