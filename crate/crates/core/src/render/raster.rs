//! Minimal drawing primitives over `RgbImage`.

use image::{Rgb, RgbImage};

use super::font::{glyph, GLYPH_HEIGHT, GLYPH_WIDTH};

pub fn put(img: &mut RgbImage, x: i64, y: i64, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

pub fn fill_rect(img: &mut RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgb<u8>) {
    let (xa, xb) = (x0.max(0), x1.min(img.width() as i64 - 1));
    let (ya, yb) = (y0.max(0), y1.min(img.height() as i64 - 1));
    for y in ya..=yb {
        for x in xa..=xb {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

/// Axis-aligned outline with inclusive corners and inward stroke.
pub fn stroke_rect(
    img: &mut RgbImage,
    x0: i64,
    y0: i64,
    x1: i64,
    y1: i64,
    width: i64,
    color: Rgb<u8>,
) {
    for k in 0..width {
        let (a, b, c, d) = (x0 + k, y0 + k, x1 - k, y1 - k);
        if a > c || b > d {
            break;
        }
        for x in a..=c {
            put(img, x, b, color);
            put(img, x, d, color);
        }
        for y in b..=d {
            put(img, a, y, color);
            put(img, c, y, color);
        }
    }
}

/// Bresenham line with a square brush of side `width`.
pub fn line(img: &mut RgbImage, p0: (f64, f64), p1: (f64, f64), width: i64, color: Rgb<u8>) {
    let (mut x0, mut y0) = (p0.0.round() as i64, p0.1.round() as i64);
    let (x1, y1) = (p1.0.round() as i64, p1.1.round() as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let half = width / 2;
    // guard against pathological coordinates far outside the canvas
    let limit = 4 * (img.width() as i64 + img.height() as i64);
    if x0.abs().max(y0.abs()).max(x1.abs()).max(y1.abs()) > limit * 4 {
        return;
    }
    loop {
        for oy in -half..width - half {
            for ox in -half..width - half {
                put(img, x0 + ox, y0 + oy, color);
            }
        }
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

pub fn polyline(img: &mut RgbImage, pts: &[(f64, f64)], closed: bool, width: i64, color: Rgb<u8>) {
    for w in pts.windows(2) {
        line(img, w[0], w[1], width, color);
    }
    if closed && pts.len() > 2 {
        line(img, pts[pts.len() - 1], pts[0], width, color);
    }
}

/// Even-odd scanline fill sampled at pixel centers.
pub fn fill_polygon(img: &mut RgbImage, pts: &[(f64, f64)], color: Rgb<u8>) {
    if pts.len() < 3 {
        return;
    }
    let ymin = pts
        .iter()
        .map(|p| p.1)
        .fold(f64::INFINITY, f64::min)
        .floor()
        .max(0.0) as i64;
    let ymax = pts
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max)
        .ceil()
        .min(img.height() as f64 - 1.0) as i64;
    let mut xs = Vec::new();
    for y in ymin..=ymax {
        let yc = y as f64 + 0.5;
        xs.clear();
        for k in 0..pts.len() {
            let (a, b) = (pts[k], pts[(k + 1) % pts.len()]);
            if (a.1 <= yc && b.1 > yc) || (b.1 <= yc && a.1 > yc) {
                xs.push(a.0 + (yc - a.1) / (b.1 - a.1) * (b.0 - a.0));
            }
        }
        xs.sort_by(|a, b| a.total_cmp(b));
        for pair in xs.chunks(2) {
            if let [xa, xb] = pair {
                let start = (xa - 0.5).ceil() as i64;
                let end = (xb - 0.5).floor() as i64;
                for x in start..=end {
                    put(img, x, y, color);
                }
            }
        }
    }
}

pub fn text(img: &mut RgbImage, x: i64, y: i64, s: &str, scale: u32, color: Rgb<u8>) {
    let scale = scale.max(1) as i64;
    for (k, c) in s.chars().enumerate() {
        let cols = glyph(c);
        let gx = x + k as i64 * (GLYPH_WIDTH as i64 + 1) * scale;
        for (cx, bits) in cols.iter().enumerate() {
            for cy in 0..GLYPH_HEIGHT as i64 {
                if bits >> cy & 1 == 1 {
                    fill_rect(
                        img,
                        gx + cx as i64 * scale,
                        y + cy * scale,
                        gx + (cx as i64 + 1) * scale - 1,
                        y + (cy + 1) * scale - 1,
                        color,
                    );
                }
            }
        }
    }
}

/// Text on a filled backing box with a one-pixel-scale margin.
pub fn label(img: &mut RgbImage, x: i64, y: i64, s: &str, scale: u32, fg: Rgb<u8>, bg: Rgb<u8>) {
    let (w, h) = super::font::text_size(s, scale);
    let m = scale as i64;
    fill_rect(
        img,
        x,
        y,
        x + w as i64 + 2 * m - 1,
        y + h as i64 + 2 * m - 1,
        bg,
    );
    text(img, x + m, y + m, s, scale, fg);
}
