//! Image-domain preprocessing: multi-level Gaussian blur and RSVP scene recreation.

mod blur;
mod image;
mod rsvp;

pub use self::image::Image;
pub use blur::{
    blur_plane, build_blur_pyramid, gaussian_blur, gaussian_kernel, sigma_for_kernel, BlurSpec,
    DEFAULT_KERNEL_SIZES,
};
pub use rsvp::{compose_rsvp, RsvpSpec};
