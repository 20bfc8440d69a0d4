use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageFormat, Luma};

use crate::error::Result;
use crate::geom::Rect;
use crate::material::DensityField;
use crate::mesh::Locator;

/// Rasterize `field` over `bounds` at `res` pixels per unit length, with
/// 0 = black = solid and 1 = white = fluid. Pixels outside the mesh are
/// white. Row 0 is the top.
pub fn render_density(field: &DensityField, bounds: Rect, res: u32) -> GrayImage {
    let w = ((bounds.width() * res as f64).round() as u32).max(1);
    let h = ((bounds.height() * res as f64).round() as u32).max(1);
    let loc = Locator::new(&field.mesh);
    GrayImage::from_fn(w, h, |i, j| {
        let x = bounds.x0 + (i as f64 + 0.5) * bounds.width() / w as f64;
        let y = bounds.y1 - (j as f64 + 0.5) * bounds.height() / h as f64;
        let v = match loc.locate(&field.mesh, [x, y]) {
            Some((t, l)) => field.at(t, l).clamp(0.0, 1.0),
            None => 1.0,
        };
        Luma([(255.0 * v).round() as u8])
    })
}

/// Replicate an image `nx` times horizontally and `ny` times vertically.
pub fn tile(img: &GrayImage, nx: u32, ny: u32) -> GrayImage {
    let (w, h) = img.dimensions();
    GrayImage::from_fn(w * nx.max(1), h * ny.max(1), |i, j| *img.get_pixel(i % w, j % h))
}

/// Stack images vertically on a white background, separated by gray bands.
pub fn contact_sheet(images: &[GrayImage]) -> GrayImage {
    const GAP: u32 = 4;
    let w = images.iter().map(|i| i.width()).max().unwrap_or(1);
    let h = images.iter().map(|i| i.height()).sum::<u32>() + GAP * images.len().saturating_sub(1) as u32;
    let mut out = GrayImage::from_pixel(w, h.max(1), Luma([255]));
    let mut y0 = 0;
    for (k, img) in images.iter().enumerate() {
        if k > 0 {
            for j in y0..y0 + GAP {
                for i in 0..w {
                    out.put_pixel(i, j, Luma([128]));
                }
            }
            y0 += GAP;
        }
        image::imageops::replace(&mut out, img, 0, y0 as i64);
        y0 += img.height();
    }
    out
}

pub fn save_png(img: &GrayImage, path: &Path) -> Result<()> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    super::atomic_write(path, &buf.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rect;
    use std::sync::Arc;

    #[test]
    fn render_is_deterministic_and_oriented() {
        let r = Rect::new(0.0, 1.0, 0.0, 1.0);
        let m = Arc::new(generate_rect(r, 0.1).unwrap());
        let v = m.vertices.iter().map(|p| p[1]).collect();
        let f = DensityField::new(m, v).unwrap();
        let a = render_density(&f, r, 20);
        assert_eq!(a, render_density(&f, r, 20));
        assert_eq!(a.dimensions(), (20, 20));
        // top rows are fluid (rho = y)
        assert!(a.get_pixel(5, 0)[0] > 240 && a.get_pixel(5, 19)[0] < 15);
        let t = tile(&a, 4, 4);
        assert_eq!(t.dimensions(), (80, 80));
        assert_eq!(t.get_pixel(25, 41), a.get_pixel(5, 1));
        let s = contact_sheet(&[a.clone(), a]);
        assert_eq!(s.dimensions(), (20, 44));
    }
}
