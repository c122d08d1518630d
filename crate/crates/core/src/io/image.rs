//! Image files: binary PPM always, PNG with the `png` feature.

use std::fs;
use std::io;
use std::path::Path;

use crate::raycast::Image;

pub fn encode_ppm(image: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.to_rgb8());
    out
}

pub fn write_ppm(image: &Image, path: impl AsRef<Path>) -> io::Result<()> {
    fs::write(path, encode_ppm(image))
}

#[cfg(feature = "png")]
pub fn encode_png(image: &Image) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.width, image.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("writing to a Vec cannot fail");
        w.write_image_data(&image.to_rgb8())
            .expect("buffer size matches the header");
    }
    out
}

#[cfg(feature = "png")]
pub fn write_png(image: &Image, path: impl AsRef<Path>) -> io::Result<()> {
    fs::write(path, encode_png(image))
}

/// Picks the format from the extension: `.png` (when built in), else PPM.
pub fn write_image(image: &Image, path: impl AsRef<Path>) -> io::Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        #[cfg(feature = "png")]
        Some("png") => write_png(image, path),
        #[cfg(not(feature = "png"))]
        Some("png") => Err(io::Error::new(
            io::ErrorKind::Unsupported,
            "built without PNG support",
        )),
        _ => write_ppm(image, path),
    }
}
