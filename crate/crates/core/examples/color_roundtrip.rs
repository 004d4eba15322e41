//! RGB <-> HSV hexcone conversion on single pixels and a whole image.

use edit_planner::image::{hsv_to_rgb, hsv_to_rgb_pixel, rgb_to_hsv, rgb_to_hsv_pixel};
use edit_planner::synth;

fn main() {
    for rgb in [[0.5, 0.5, 0.5], [1.0, 0.0, 0.0], [0.2, 0.4, 0.6], [0.9, 0.7, 0.1]] {
        let hsv = rgb_to_hsv_pixel(rgb);
        let back = hsv_to_rgb_pixel(hsv);
        println!("rgb {rgb:?} -> hsv [{:.4}, {:.4}, {:.4}] -> rgb [{:.4}, {:.4}, {:.4}]",
            hsv[0], hsv[1], hsv[2], back[0], back[1], back[2]);
    }

    let img = synth::photo_like(128, 96, 7);
    let back = hsv_to_rgb(&rgb_to_hsv(&img));
    let err = img
        .data()
        .iter()
        .zip(back.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    println!("128x96 image round trip: max abs error {err:e}");
}
