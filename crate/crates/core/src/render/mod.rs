//! Raster products: bird's-eye-view maps, multi-view camera grids with 2D
//! box overlays, lettered camera grids and masked sequences.
//!
//! Camera tiles come from the frame's image references. In placeholder mode
//! missing or `placeholder://` references are replaced by a synthetic tile:
//! a checker background with every annotated 2D box painted far to near.

pub mod font;
pub mod raster;

use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{camera_depth, ordered_cameras};
use crate::geometry::yaw_rotation;
use crate::schema::{Category, Scene};

use raster::{fill_polygon, fill_rect, label, polyline, stroke_rect};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("frame {0} out of range")]
    FrameOutOfRange(usize),
    #[error("unknown camera {0}")]
    UnknownCamera(String),
    #[error("no image for camera {camera} at frame {frame}")]
    MissingImage { camera: String, frame: usize },
    #[error("image error: {0}")]
    Image(String),
    #[error("invalid style: {0}")]
    InvalidStyle(String),
    #[error("sequence needs at least two frames")]
    SequenceTooShort,
}

pub const BACKGROUND: Rgb<u8> = Rgb([24, 24, 28]);
pub const MASK_FILL: Rgb<u8> = Rgb([40, 40, 40]);
pub const MASK_TEXT: Rgb<u8> = Rgb([230, 230, 230]);
pub const HIGHLIGHT: [Rgb<u8>; 4] = [
    Rgb([255, 40, 40]),
    Rgb([40, 200, 255]),
    Rgb([255, 220, 0]),
    Rgb([80, 255, 80]),
];
const EGO_COLOR: Rgb<u8> = Rgb([30, 110, 255]);
const LANE_COLOR: Rgb<u8> = Rgb([90, 90, 90]);
const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const BLACK: Rgb<u8> = Rgb([0, 0, 0]);
const GRID_GAP: u32 = 4;

/// An object to outline, by index into the frame's objects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Highlight {
    pub object: usize,
    pub text: String,
    /// Restrict the outline to one camera; `None` outlines it everywhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<String>,
}

impl Highlight {
    pub fn new(object: usize, text: impl Into<String>) -> Self {
        Highlight {
            object,
            text: text.into(),
            camera: None,
        }
    }

    pub fn in_camera(object: usize, text: impl Into<String>, camera: impl Into<String>) -> Self {
        Highlight {
            object,
            text: text.into(),
            camera: Some(camera.into()),
        }
    }
}

pub fn category_color(c: Category) -> Rgb<u8> {
    match c {
        Category::Car => Rgb([255, 158, 0]),
        Category::Truck => Rgb([255, 99, 71]),
        Category::Pedestrian => Rgb([0, 200, 200]),
        Category::Cyclist => Rgb([220, 20, 160]),
        Category::TrafficCone => Rgb([255, 240, 60]),
        Category::Barrier => Rgb([160, 160, 200]),
        Category::Other => Rgb([150, 110, 80]),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BevStyle {
    /// Half-width of the square map in meters.
    pub extent: f64,
    /// Pixels per meter.
    pub resolution: f64,
    pub show_lanes: bool,
    pub highlight: Vec<Highlight>,
}

impl Default for BevStyle {
    fn default() -> Self {
        BevStyle {
            extent: 50.0,
            resolution: 4.0,
            show_lanes: true,
            highlight: Vec::new(),
        }
    }
}

impl BevStyle {
    pub fn side(&self) -> u32 {
        (2.0 * self.extent * self.resolution).round() as u32
    }

    /// Pixel coordinates of an ego-frame point; ego forward points right, ego left points up.
    pub fn pixel(&self, x: f64, y: f64) -> (f64, f64) {
        let c = f64::from(self.side()) / 2.0;
        (c + x * self.resolution, c - y * self.resolution)
    }
}

fn footprint(center: [f64; 3], size: [f64; 3], yaw: f64) -> [Vector3<f64>; 4] {
    let r = yaw_rotation(yaw);
    let c = Vector3::from(center);
    let (l, w) = (size[0] / 2.0, size[1] / 2.0);
    [(l, w), (l, -w), (-l, -w), (-l, w)].map(|(a, b)| c + r * Vector3::new(a, b, 0.0))
}

pub fn render_bev(scene: &Scene, frame: usize, style: &BevStyle) -> Result<RgbImage, RenderError> {
    if !(style.extent > 0.0 && style.resolution > 0.0) {
        return Err(RenderError::InvalidStyle(
            "extent and resolution must be positive".into(),
        ));
    }
    let f = scene
        .frames
        .get(frame)
        .ok_or(RenderError::FrameOutOfRange(frame))?;
    let side = style.side();
    let mut img = RgbImage::from_pixel(side, side, BACKGROUND);
    let px = |p: &Vector3<f64>| style.pixel(p.x, p.y);

    if style.show_lanes {
        let ego_from_world = f.ego_pose.inverse();
        for lane in &scene.lanes {
            let pts: Vec<(f64, f64)> = lane
                .iter()
                .map(|p| px(&ego_from_world.transform_point(&Vector3::new(p[0], p[1], 0.0))))
                .collect();
            polyline(&mut img, &pts, false, 1, LANE_COLOR);
        }
    }

    for obj in &f.objects {
        let pts: Vec<(f64, f64)> = footprint(obj.center, obj.size, obj.yaw)
            .iter()
            .map(px)
            .collect();
        fill_polygon(&mut img, &pts, category_color(obj.category));
        // heading tick from center to the front edge
        let front = Vector3::from(obj.center)
            + yaw_rotation(obj.yaw) * Vector3::new(obj.size[0] / 2.0, 0.0, 0.0);
        raster::line(
            &mut img,
            px(&Vector3::from(obj.center)),
            px(&front),
            1,
            BLACK,
        );
    }

    let ego = scene.metadata.ego_type.size();
    let ego_pts: Vec<(f64, f64)> = footprint([0.0; 3], ego, 0.0).iter().map(px).collect();
    fill_polygon(&mut img, &ego_pts, EGO_COLOR);
    let nose = [
        style.pixel(ego[0] / 2.0 + 1.5, 0.0),
        style.pixel(ego[0] / 2.0, ego[1] / 2.0),
        style.pixel(ego[0] / 2.0, -ego[1] / 2.0),
    ];
    fill_polygon(&mut img, &nose, EGO_COLOR);

    for (k, h) in style.highlight.iter().enumerate() {
        let Some(obj) = f.objects.get(h.object) else {
            continue;
        };
        let color = HIGHLIGHT[k % HIGHLIGHT.len()];
        let pts: Vec<(f64, f64)> = footprint(obj.center, obj.size, obj.yaw)
            .iter()
            .map(px)
            .collect();
        polyline(&mut img, &pts, true, 2, color);
        let (x, y) = px(&Vector3::from(obj.center));
        label(
            &mut img,
            x as i64 + 6,
            y as i64 - 22,
            &h.text,
            2,
            BLACK,
            color,
        );
    }
    Ok(img)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiviewStyle {
    /// Tile width in pixels; tile height follows the camera aspect ratio.
    pub tile_width: u32,
    /// Substitute synthetic tiles for missing or placeholder image references.
    pub placeholder: bool,
    pub stroke: u32,
}

impl Default for MultiviewStyle {
    fn default() -> Self {
        MultiviewStyle {
            tile_width: 400,
            placeholder: true,
            stroke: 3,
        }
    }
}

fn placeholder_tile(
    scene: &Scene,
    frame: usize,
    camera: &str,
    w: u32,
    h: u32,
    scale: f64,
) -> RgbImage {
    let f = &scene.frames[frame];
    let seed = camera
        .bytes()
        .fold(7u32, |a, b| a.wrapping_mul(31).wrapping_add(u32::from(b)));
    let tint = (seed % 40) as u8;
    let mut img = RgbImage::from_fn(w, h, |x, y| {
        let check = ((x / 16) + (y / 16)) % 2 == 0;
        let sky = y < h / 2;
        match (sky, check) {
            (true, true) => Rgb([150 + tint, 180, 210]),
            (true, false) => Rgb([140 + tint, 170, 200]),
            (false, true) => Rgb([96, 96 + tint / 2, 96]),
            (false, false) => Rgb([86, 86 + tint / 2, 86]),
        }
    });
    let Some(cal) = f.camera(camera) else {
        return img;
    };
    let mut boxes: Vec<(f64, &crate::schema::ObjectAnnotation, [f64; 4])> = f
        .objects
        .iter()
        .filter_map(|o| {
            o.projection(camera)
                .map(|p| (camera_depth(&o.center_vec(), cal), o, p.bbox))
        })
        .collect();
    boxes.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (_, obj, bb) in boxes {
        let [x0, y0, x1, y1] = bb.map(|v| v * scale);
        let c = category_color(obj.category);
        fill_rect(&mut img, x0 as i64, y0 as i64, x1 as i64, y1 as i64, c);
        stroke_rect(
            &mut img, x0 as i64, y0 as i64, x1 as i64, y1 as i64, 1, BLACK,
        );
    }
    img
}

fn tile_geometry(
    scene: &Scene,
    frame: usize,
    camera: &str,
    style: &MultiviewStyle,
) -> Result<(u32, u32, f64), RenderError> {
    let f = scene
        .frames
        .get(frame)
        .ok_or(RenderError::FrameOutOfRange(frame))?;
    let cal = f
        .camera(camera)
        .ok_or_else(|| RenderError::UnknownCamera(camera.to_string()))?;
    let scale = f64::from(style.tile_width) / f64::from(cal.image_size[0]);
    let h = (f64::from(cal.image_size[1]) * scale).round().max(1.0) as u32;
    Ok((style.tile_width, h, scale))
}

/// One camera view with highlighted 2D boxes drawn over it.
pub fn camera_tile(
    scene: &Scene,
    frame: usize,
    camera: &str,
    highlights: &[Highlight],
    style: &MultiviewStyle,
) -> Result<RgbImage, RenderError> {
    let (w, h, scale) = tile_geometry(scene, frame, camera, style)?;
    let f = &scene.frames[frame];
    let reference = f.image_ref(camera);
    let mut img = match reference {
        Some(r) if !r.starts_with("placeholder://") && Path::new(r).exists() => {
            let loaded = image::open(r).map_err(|e| RenderError::Image(format!("{r}: {e}")))?;
            image::imageops::resize(
                &loaded.to_rgb8(),
                w,
                h,
                image::imageops::FilterType::Triangle,
            )
        }
        _ if style.placeholder => placeholder_tile(scene, frame, camera, w, h, scale),
        _ => {
            return Err(RenderError::MissingImage {
                camera: camera.to_string(),
                frame,
            })
        }
    };
    for (k, h) in highlights.iter().enumerate() {
        if h.camera.as_deref().is_some_and(|c| c != camera) {
            continue;
        }
        let Some(p) = f.objects.get(h.object).and_then(|o| o.projection(camera)) else {
            continue;
        };
        let color = HIGHLIGHT[k % HIGHLIGHT.len()];
        let [x0, y0, x1, y1] = p.bbox.map(|v| (v * scale).round() as i64);
        stroke_rect(&mut img, x0, y0, x1, y1, i64::from(style.stroke), color);
        let ty = if y0 >= 22 {
            y0 - 20
        } else {
            y0 + i64::from(style.stroke) + 1
        };
        label(&mut img, x0, ty, &h.text, 2, BLACK, color);
    }
    Ok(img)
}

/// Canonically ordered tiles for every camera of a frame.
pub fn multiview_tiles(
    scene: &Scene,
    frame: usize,
    highlights: &[Highlight],
    style: &MultiviewStyle,
) -> Result<Vec<(String, RgbImage)>, RenderError> {
    let f = scene
        .frames
        .get(frame)
        .ok_or(RenderError::FrameOutOfRange(frame))?;
    let names: Vec<String> = f.cameras.iter().map(|c| c.camera_name.clone()).collect();
    ordered_cameras(scene.source(), &names)
        .into_iter()
        .map(|cam| camera_tile(scene, frame, &cam, highlights, style).map(|t| (cam, t)))
        .collect()
}

/// Lays tiles row-major on a near-square grid.
pub fn grid(tiles: &[RgbImage]) -> RgbImage {
    if tiles.is_empty() {
        return RgbImage::from_pixel(1, 1, BACKGROUND);
    }
    let cols = (tiles.len() as f64).sqrt().ceil() as u32;
    let rows = (tiles.len() as u32).div_ceil(cols);
    let tw = tiles.iter().map(|t| t.width()).max().unwrap();
    let th = tiles.iter().map(|t| t.height()).max().unwrap();
    let mut out = RgbImage::from_pixel(
        cols * tw + (cols + 1) * GRID_GAP,
        rows * th + (rows + 1) * GRID_GAP,
        BACKGROUND,
    );
    for (k, tile) in tiles.iter().enumerate() {
        let (c, r) = (k as u32 % cols, k as u32 / cols);
        let (x, y) = (
            GRID_GAP + c * (tw + GRID_GAP),
            GRID_GAP + r * (th + GRID_GAP),
        );
        image::imageops::replace(&mut out, tile, i64::from(x), i64::from(y));
    }
    out
}

/// Top-left pixel of tile `k` in a grid of `n` tiles of size `tw × th`.
pub fn grid_origin(n: usize, k: usize, tw: u32, th: u32) -> (u32, u32) {
    let cols = (n as f64).sqrt().ceil() as u32;
    let (c, r) = (k as u32 % cols, k as u32 / cols);
    (
        GRID_GAP + c * (tw + GRID_GAP),
        GRID_GAP + r * (th + GRID_GAP),
    )
}

pub fn render_multiview(
    scene: &Scene,
    frame: usize,
    highlights: &[Highlight],
    style: &MultiviewStyle,
) -> Result<RgbImage, RenderError> {
    let tiles: Vec<RgbImage> = multiview_tiles(scene, frame, highlights, style)?
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    Ok(grid(&tiles))
}

pub fn letter(k: usize) -> char {
    (b'A' + k as u8) as char
}

/// Places `views[order[k]]` at grid slot `k`, stamped with letter `k`.
///
/// Returns the grid and the letter-to-camera lookup in slot order.
pub fn compose_camera_grid(
    views: &[(String, RgbImage)],
    order: &[usize],
) -> (RgbImage, Vec<(char, String)>) {
    let mut tiles = Vec::with_capacity(order.len());
    let mut lookup = Vec::with_capacity(order.len());
    for (k, &src) in order.iter().enumerate() {
        let (name, tile) = &views[src];
        let mut t = tile.clone();
        label(&mut t, 6, 6, &letter(k).to_string(), 4, BLACK, WHITE);
        tiles.push(t);
        lookup.push((letter(k), name.clone()));
    }
    (grid(&tiles), lookup)
}

pub fn mask_tile(w: u32, h: u32, camera: &str) -> RgbImage {
    let mut t = RgbImage::from_pixel(w, h, MASK_FILL);
    let (tw, th) = font::text_size(camera, 2);
    let x = (i64::from(w) - i64::from(tw)) / 2;
    let y = (i64::from(h) - i64::from(th)) / 2;
    raster::text(&mut t, x.max(0), y.max(0), camera, 2, MASK_TEXT);
    t
}

/// Multi-view grid of one frame with `camera` replaced by a mask tile.
pub fn render_masked(
    scene: &Scene,
    frame: usize,
    camera: &str,
    style: &MultiviewStyle,
) -> Result<RgbImage, RenderError> {
    let mut tiles = multiview_tiles(scene, frame, &[], style)?;
    let slot = tiles
        .iter()
        .position(|(n, _)| n == camera)
        .ok_or_else(|| RenderError::UnknownCamera(camera.to_string()))?;
    let (w, h) = tiles[slot].1.dimensions();
    tiles[slot].1 = mask_tile(w, h, camera);
    Ok(grid(&tiles.into_iter().map(|(_, t)| t).collect::<Vec<_>>()))
}

/// Multi-view grids over `frames`; from the second frame on, `camera` is masked.
pub fn mask_camera_sequence(
    scene: &Scene,
    frames: &[usize],
    camera: &str,
    style: &MultiviewStyle,
) -> Result<Vec<RgbImage>, RenderError> {
    if frames.len() < 2 {
        return Err(RenderError::SequenceTooShort);
    }
    frames
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            if k == 0 {
                let tiles = multiview_tiles(scene, t, &[], style)?;
                if !tiles.iter().any(|(n, _)| n == camera) {
                    return Err(RenderError::UnknownCamera(camera.to_string()));
                }
                Ok(grid(&tiles.into_iter().map(|(_, t)| t).collect::<Vec<_>>()))
            } else {
                render_masked(scene, t, camera, style)
            }
        })
        .collect()
}

pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .expect("in-memory PNG encoding cannot fail");
    buf.into_inner()
}

pub fn write_png(img: &RgbImage, path: &Path) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, encode_png(img))
}
