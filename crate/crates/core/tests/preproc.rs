mod common;

use common::oracles;
use eegret::preproc::{blur_plane, build_blur_pyramid, compose_rsvp, gaussian_kernel, BlurSpec, Image, RsvpSpec};
use eegret::Error;

#[test]
fn kernels_match_the_analytic_gaussian() {
    for k in [1, 3, 5, 15, 21, 33, 45, 57, 63] {
        let got = gaussian_kernel(k).unwrap();
        let want = oracles::analytic_kernel(k);
        assert_eq!(got.len(), k);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
    }
    assert!(matches!(gaussian_kernel(4), Err(Error::Parameter(_))));
    assert!(matches!(gaussian_kernel(0), Err(Error::Parameter(_))));
}

#[test]
fn interior_impulses_conserve_energy() {
    let (h, w) = (41, 37);
    let mut plane = vec![0.0; h * w];
    plane[20 * w + 18] = 2.0;
    plane[15 * w + 12] = -1.0;
    for k in [3, 7, 15] {
        let out = blur_plane(&plane, h, w, k).unwrap();
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn constant_images_are_fixed_points() {
    let img = Image::filled(20, 9, [0.2, 0.4, 0.9]).unwrap();
    for level in build_blur_pyramid(&img, &BlurSpec::default()).unwrap() {
        for (a, b) in level.pixels().iter().zip(img.pixels()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn rsvp_canvas_layout() {
    let img = Image::filled(10, 10, [0.0, 1.0, 0.0]).unwrap();
    let spec = RsvpSpec::default();
    let out = compose_rsvp(&img, &spec).unwrap();
    assert_eq!((out.height(), out.width()), (224, 224));
    assert_eq!(out.pixel(0, 0), [0.5; 3]);
    assert_eq!(out.pixel(112, 112), spec.dot_color);
    let (ih, _) = spec.inner_size(10, 10);
    assert_eq!(ih, 112);
    assert_eq!(out.pixel(112 - 30, 112 - 30), [0.0, 1.0, 0.0]);
    let bad = RsvpSpec { image_area_fraction: 0.0, ..RsvpSpec::default() };
    assert!(compose_rsvp(&img, &bad).is_err());
}
