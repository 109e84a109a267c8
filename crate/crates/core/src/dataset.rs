//! Visual-observer training data at desk scale.
//!
//! Simulated screens are rasterized with a deterministic flat style (no
//! fonts: text renders as per-character glyph blocks derived from the
//! character code), annotated from ground truth, masked around target
//! elements, and augmented. Augmentation emits the original plus two
//! modified copies per sample (color shift, bbox jitter, Gaussian noise),
//! tripling the dataset.

use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{oracle_for, SimEnv, TaskStatus};
use crate::rng::SplitMix64;
use crate::splits::ANNOTATION_SEEDS;
use crate::ui::{BBox, ElementKind, RenderStyle, UiElement};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("bbox [{left}-{right}]x[{top}-{bottom}] exceeds {width}x{height} image")]
    BBoxOutOfImage { left: i32, right: i32, top: i32, bottom: i32, width: u32, height: u32 },
    #[error("unknown task family `{0}`")]
    UnknownFamily(String),
    #[error("oracle failed while capturing {family} seed {seed}")]
    CaptureFailed { family: String, seed: u64 },
    #[error("io error: {0}")]
    Io(String),
}

// ---------------------------------------------------------------------------
// Samples
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub family: String,
    pub seed: u64,
    /// Number of actions executed before this screen was captured.
    pub step: u32,
}

/// A rasterized screen with its ground-truth element annotations.
#[derive(Debug, Clone)]
pub struct AnnotatedScreenshot {
    pub image: RgbImage,
    pub annotations: Vec<UiElement>,
    pub provenance: Provenance,
}

// ---------------------------------------------------------------------------
// Rasterization
// ---------------------------------------------------------------------------

const BACKGROUND: Rgb<u8> = Rgb([245, 245, 245]);
const BORDER: Rgb<u8> = Rgb([70, 70, 70]);
const GLYPH: Rgb<u8> = Rgb([40, 40, 40]);
const FIELD_FILL: Rgb<u8> = Rgb([255, 255, 255]);
const BUTTON_FILL: Rgb<u8> = Rgb([214, 214, 220]);
const LINK: Rgb<u8> = Rgb([30, 60, 190]);
const ACCENT: Rgb<u8> = Rgb([120, 170, 240]);
const NEUTRAL_FILL: Rgb<u8> = Rgb([190, 190, 195]);

fn fill_rect(img: &mut RgbImage, bbox: &BBox, color: Rgb<u8>) {
    for y in bbox.top.max(0)..bbox.bottom.min(img.height() as i32) {
        for x in bbox.left.max(0)..bbox.right.min(img.width() as i32) {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

fn draw_border(img: &mut RgbImage, bbox: &BBox, color: Rgb<u8>) {
    for x in bbox.left..bbox.right {
        put(img, x, bbox.top, color);
        put(img, x, bbox.bottom - 1, color);
    }
    for y in bbox.top..bbox.bottom {
        put(img, bbox.left, y, color);
        put(img, bbox.right - 1, y, color);
    }
}

fn put(img: &mut RgbImage, x: i32, y: i32, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

/// Per-character 3x5 glyph pattern derived from the character code.
fn glyph_bits(c: char) -> u16 {
    ((c as u32).wrapping_mul(2654435761) >> 13) as u16 | 0b100000000000001
}

/// Render text as glyph blocks inside the bbox, one cell per character.
fn draw_text(img: &mut RgbImage, bbox: &BBox, text: &str, color: Rgb<u8>) {
    let len = text.chars().count();
    if len == 0 || bbox.width() < len as i32 {
        return;
    }
    let width = bbox.width() as i64;
    for (i, c) in text.chars().enumerate() {
        let cell_left = bbox.left + (i as i64 * width / len as i64) as i32;
        let cell_right = bbox.left + ((i as i64 + 1) * width / len as i64) as i32;
        let bits = glyph_bits(c);
        let cw = (cell_right - cell_left).max(1);
        let ch = bbox.height().max(1);
        for bit in 0..15 {
            if bits & (1 << bit) == 0 {
                continue;
            }
            let (gx, gy) = (bit % 3, bit / 3);
            let x0 = cell_left + gx * cw / 3;
            let x1 = cell_left + (gx + 1) * cw / 3;
            let y0 = bbox.top + gy * ch / 5;
            let y1 = bbox.top + (gy + 1) * ch / 5;
            fill_rect(img, &BBox::new(x0, x1.max(x0 + 1), y0, y1.max(y0 + 1)), color);
        }
    }
}

fn draw_disk(img: &mut RgbImage, bbox: &BBox, color: Rgb<u8>, filled: bool) {
    let cx = (bbox.left + bbox.right - 1) as f32 / 2.0;
    let cy = (bbox.top + bbox.bottom - 1) as f32 / 2.0;
    let r = (bbox.width().min(bbox.height()) as f32 / 2.0) - 0.5;
    for y in bbox.top..bbox.bottom {
        for x in bbox.left..bbox.right {
            let d = ((x as f32 - cx).powi(2) + (y as f32 - cy).powi(2)).sqrt();
            if (filled && d <= r) || (!filled && (d <= r && d >= r - 1.5)) {
                put(img, x, y, color);
            }
        }
    }
}

fn render_widget(img: &mut RgbImage, env: &SimEnv, idx: usize) {
    let w = &env.widgets()[idx];
    let b = w.bbox;
    let text = w.buffer.as_deref().or(w.text.as_deref()).unwrap_or("");
    match w.kind {
        ElementKind::Text => draw_text(img, &b, text, GLYPH),
        ElementKind::Hyperlink => {
            draw_text(img, &b, text, LINK);
            for x in b.left..b.right {
                put(img, x, b.bottom - 1, LINK);
            }
        }
        ElementKind::Button => {
            fill_rect(img, &b, BUTTON_FILL);
            draw_border(img, &b, BORDER);
            let inner = BBox::new(b.left + 3, b.right - 3, b.top + 3, b.bottom - 3);
            if inner.width() > 0 && inner.height() > 0 {
                draw_text(img, &inner, text, GLYPH);
            }
        }
        ElementKind::Radio => {
            let box_side = b.height().min(12);
            let circle = BBox::new(b.left, b.left + box_side, b.top, b.top + box_side);
            draw_disk(img, &circle, BORDER, false);
            if w.checked == Some(true) {
                let dot = BBox::new(circle.left + 3, circle.right - 3, circle.top + 3, circle.bottom - 3);
                draw_disk(img, &dot, GLYPH, true);
            }
            let label = BBox::new(circle.right + 2, b.right, b.top, b.bottom);
            if label.width() > 0 {
                draw_text(img, &label, text, GLYPH);
            }
        }
        ElementKind::Checkbox => {
            let box_side = b.height().min(12);
            let square = BBox::new(b.left, b.left + box_side, b.top, b.top + box_side);
            fill_rect(img, &square, FIELD_FILL);
            draw_border(img, &square, BORDER);
            if w.checked == Some(true) {
                fill_rect(
                    img,
                    &BBox::new(square.left + 3, square.right - 3, square.top + 3, square.bottom - 3),
                    GLYPH,
                );
            }
            let label = BBox::new(square.right + 2, b.right, b.top, b.bottom);
            if label.width() > 0 {
                draw_text(img, &label, text, GLYPH);
            }
        }
        ElementKind::Dropdown => {
            fill_rect(img, &b, FIELD_FILL);
            draw_border(img, &b, BORDER);
            let marker = BBox::new(b.right - 10, b.right - 4, b.top + 4, b.bottom - 4);
            fill_rect(img, &marker, BORDER);
            let inner = BBox::new(b.left + 3, b.right - 12, b.top + 3, b.bottom - 3);
            if inner.width() > 0 {
                draw_text(img, &inner, text, GLYPH);
            }
        }
        ElementKind::InputField | ElementKind::TextArea => {
            fill_rect(img, &b, FIELD_FILL);
            draw_border(img, &b, if w.focus_flag == Some(true) { LINK } else { BORDER });
            let inner = BBox::new(b.left + 3, b.right - 3, b.top + 3, b.bottom - 3);
            if inner.width() > 0 && !text.is_empty() {
                draw_text(img, &inner, text, GLYPH);
            }
        }
        ElementKind::ResizeHandle | ElementKind::Scrollbar => {
            fill_rect(img, &b, NEUTRAL_FILL);
            draw_border(img, &b, BORDER);
        }
        ElementKind::TabledText => {
            let fill = if w.highlight_flag == Some(true) { ACCENT } else { FIELD_FILL };
            fill_rect(img, &b, fill);
            draw_border(img, &b, NEUTRAL_FILL);
            let inner = BBox::new(b.left + 3, b.right - 3, b.top + 2, b.bottom - 2);
            if inner.width() > 0 {
                draw_text(img, &inner, text, GLYPH);
            }
        }
        ElementKind::DraggableText => {
            if let Some((a, c)) = w.selection {
                let (lo, hi) = (a.min(c), a.max(c));
                let len = text.chars().count().max(1) as i64;
                let width = b.width() as i64;
                let x0 = b.left + (lo as i64 * width / len) as i32;
                let x1 = b.left + ((hi as i64 + 1) * width / len) as i32;
                fill_rect(img, &BBox::new(x0, x1, b.top, b.bottom), ACCENT);
            }
            draw_text(img, &b, text, GLYPH);
        }
        ElementKind::Shape => {
            draw_disk(img, &b, NEUTRAL_FILL, true);
        }
        ElementKind::Icon => {
            fill_rect(img, &b, BUTTON_FILL);
            draw_border(img, &b, BORDER);
        }
        ElementKind::Image => {
            fill_rect(img, &b, NEUTRAL_FILL);
            draw_border(img, &b, BORDER);
        }
    }
}

/// Deterministic flat rendering of the current environment state.
pub fn render_screen(env: &SimEnv) -> RgbImage {
    let mut img = RgbImage::from_pixel(
        crate::env::SCREEN_WIDTH,
        crate::env::SCREEN_HEIGHT,
        BACKGROUND,
    );
    for idx in env.visible_widget_indices() {
        render_widget(&mut img, env, idx);
    }
    img
}

/// Rasterize the current state together with its annotations.
pub fn annotate_screen(env: &SimEnv, step: u32) -> AnnotatedScreenshot {
    let obs = env.snapshot();
    AnnotatedScreenshot {
        image: render_screen(env),
        annotations: obs.elements().map(|(_, el)| el.clone()).collect(),
        provenance: Provenance { family: env.family().to_string(), seed: env.seed(), step },
    }
}

/// Capture screens for `(family, seed)`: the initial screen and, when
/// `trajectory` is set, the screen after every oracle action.
pub fn capture_screens(
    family: &str,
    seed: u64,
    trajectory: bool,
) -> Result<Vec<AnnotatedScreenshot>, DatasetError> {
    let mut env =
        SimEnv::reset(family, seed).map_err(|_| DatasetError::UnknownFamily(family.to_string()))?;
    let mut shots = vec![annotate_screen(&env, 0)];
    if !trajectory {
        return Ok(shots);
    }
    let oracle =
        oracle_for(family).ok_or_else(|| DatasetError::UnknownFamily(family.to_string()))?;
    let failed = || DatasetError::CaptureFailed { family: family.to_string(), seed };
    let mut step = 0;
    while env.status() == TaskStatus::Running && step < 16 {
        let Some(cmd) = oracle.next_action(&env) else { break };
        let obs = env.snapshot();
        let checked = crate::action::validate(&cmd, &obs).map_err(|_| failed())?;
        crate::executor::execute_command(&mut env, &checked).map_err(|_| failed())?;
        step += 1;
        if env.status() == TaskStatus::Running {
            shots.push(annotate_screen(&env, step));
        }
    }
    Ok(shots)
}

// ---------------------------------------------------------------------------
// Masking
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MaskOptions {
    /// Multiplier applied to pixels outside the bbox, in (0, 1].
    pub darken: f64,
    pub outline_px: u32,
    pub outline_color: Rgb<u8>,
}

impl Default for MaskOptions {
    fn default() -> Self {
        Self { darken: 0.4, outline_px: 2, outline_color: Rgb([0, 200, 0]) }
    }
}

fn check_bbox(img: &RgbImage, bbox: &BBox) -> Result<(), DatasetError> {
    if bbox.left < 0
        || bbox.top < 0
        || bbox.right > img.width() as i32
        || bbox.bottom > img.height() as i32
        || bbox.width() <= 0
        || bbox.height() <= 0
    {
        return Err(DatasetError::BBoxOutOfImage {
            left: bbox.left,
            right: bbox.right,
            top: bbox.top,
            bottom: bbox.bottom,
            width: img.width(),
            height: img.height(),
        });
    }
    Ok(())
}

/// Highlight a target element: pixels inside the bbox are untouched, the
/// surroundings are darkened channel-wise, and an outline ring is drawn just
/// outside the bbox.
pub fn semi_mask(img: &RgbImage, bbox: &BBox, opts: &MaskOptions) -> Result<RgbImage, DatasetError> {
    check_bbox(img, bbox)?;
    let o = opts.outline_px as i32;
    let ring = BBox::new(bbox.left - o, bbox.right + o, bbox.top - o, bbox.bottom + o);
    let mut out = RgbImage::new(img.width(), img.height());
    for y in 0..img.height() as i32 {
        for x in 0..img.width() as i32 {
            let src = *img.get_pixel(x as u32, y as u32);
            let px = if bbox.contains(x, y) {
                src
            } else if ring.contains(x, y) {
                opts.outline_color
            } else {
                Rgb([
                    darken_channel(src[0], opts.darken),
                    darken_channel(src[1], opts.darken),
                    darken_channel(src[2], opts.darken),
                ])
            };
            out.put_pixel(x as u32, y as u32, px);
        }
    }
    Ok(out)
}

fn darken_channel(v: u8, factor: f64) -> u8 {
    (f64::from(v) * factor).round().clamp(0.0, 255.0) as u8
}

const XBOX_FILL: Rgb<u8> = Rgb([200, 200, 200]);
const XBOX_LINE: Rgb<u8> = Rgb([30, 30, 30]);

/// Cover a target element with a solid box crossed by both diagonals.
pub fn xbox_mask(img: &RgbImage, bbox: &BBox) -> Result<RgbImage, DatasetError> {
    check_bbox(img, bbox)?;
    let mut out = img.clone();
    fill_rect(&mut out, bbox, XBOX_FILL);
    let (l, r, t, b) = (bbox.left, bbox.right - 1, bbox.top, bbox.bottom - 1);
    draw_line(&mut out, l, t, r, b, XBOX_LINE);
    draw_line(&mut out, r, t, l, b, XBOX_LINE);
    Ok(out)
}

/// Integer Bresenham line.
fn draw_line(img: &mut RgbImage, x0: i32, y0: i32, x1: i32, y1: i32, color: Rgb<u8>) {
    let (mut x, mut y) = (x0, y0);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        put(img, x, y, color);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AugmentConfig {
    /// Relative channel shift bound (0.10 = +-10%).
    pub color_shift: f64,
    /// Bbox edge jitter bound in pixels.
    pub bbox_jitter_px: i32,
    /// Additive Gaussian pixel noise sigma (0 disables).
    pub noise_sigma: f64,
    /// Augmented copies per sample (the original is always kept).
    pub copies: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { color_shift: 0.10, bbox_jitter_px: 2, noise_sigma: 8.0, copies: 2 }
    }
}

/// Emit the original plus `copies` augmented variants per sample. With the
/// default two copies the dataset triples. Deterministic for a fixed rng.
pub fn augment_dataset(
    samples: &[AnnotatedScreenshot],
    cfg: &AugmentConfig,
    rng: &mut SplitMix64,
) -> Vec<AnnotatedScreenshot> {
    let mut out = Vec::with_capacity(samples.len() * (cfg.copies + 1));
    for sample in samples {
        out.push(sample.clone());
        for _ in 0..cfg.copies {
            out.push(augment_one(sample, cfg, rng));
        }
    }
    out
}

fn augment_one(
    sample: &AnnotatedScreenshot,
    cfg: &AugmentConfig,
    rng: &mut SplitMix64,
) -> AnnotatedScreenshot {
    let factors = [
        1.0 + cfg.color_shift * (2.0 * rng.next_f64() - 1.0),
        1.0 + cfg.color_shift * (2.0 * rng.next_f64() - 1.0),
        1.0 + cfg.color_shift * (2.0 * rng.next_f64() - 1.0),
    ];
    let (w, h) = (sample.image.width(), sample.image.height());
    let mut image = RgbImage::new(w, h);
    for (x, y, px) in sample.image.enumerate_pixels() {
        let mut channels = [0u8; 3];
        for c in 0..3 {
            let mut v = f64::from(px[c]) * factors[c];
            if cfg.noise_sigma > 0.0 {
                v += cfg.noise_sigma * rng.next_gaussian();
            }
            channels[c] = v.round().clamp(0.0, 255.0) as u8;
        }
        image.put_pixel(x, y, Rgb(channels));
    }
    let annotations = sample
        .annotations
        .iter()
        .map(|el| {
            let mut out = el.clone();
            out.bbox = jitter_bbox(&el.bbox, cfg.bbox_jitter_px, w as i32, h as i32, rng);
            out
        })
        .collect();
    AnnotatedScreenshot { image, annotations, provenance: sample.provenance.clone() }
}

/// Jitter each edge within the bound, clamped to the image; a pair that
/// would collapse keeps its original edges.
fn jitter_bbox(bbox: &BBox, jitter: i32, w: i32, h: i32, rng: &mut SplitMix64) -> BBox {
    let j = i64::from(jitter);
    let left = (bbox.left + rng.range_inclusive(-j, j) as i32).clamp(0, w);
    let right = (bbox.right + rng.range_inclusive(-j, j) as i32).clamp(0, w);
    let top = (bbox.top + rng.range_inclusive(-j, j) as i32).clamp(0, h);
    let bottom = (bbox.bottom + rng.range_inclusive(-j, j) as i32).clamp(0, h);
    let (left, right) = if left < right { (left, right) } else { (bbox.left, bbox.right) };
    let (top, bottom) = if top < bottom { (top, bottom) } else { (bbox.top, bbox.bottom) };
    BBox { left, right, top, bottom }
}

// ---------------------------------------------------------------------------
// Training pairs and export
// ---------------------------------------------------------------------------

/// Attribute text of an element without its coordinates: the fine-tuning
/// target paired with a semi-masked image.
pub fn pair_target(el: &UiElement) -> String {
    let full = crate::ui::render_attributes(el, RenderStyle::DemoState);
    // Drop the `X: c [l-r], Y: c [t-b], ` span; everything else stays.
    let x_start = full.find("X: ").expect("rendered attributes carry coordinates");
    let after_y = full[x_start..]
        .find("], ")
        .and_then(|first| {
            let rest = x_start + first + 3;
            full[rest..].find("], ").map(|second| rest + second + 3)
        })
        .expect("rendered attributes carry X then Y");
    format!("{}{}", &full[..x_start], &full[after_y..])
}

/// One (semi-masked image, attribute text) pair per annotation.
pub fn export_pairs(
    samples: &[AnnotatedScreenshot],
    mask: &MaskOptions,
) -> Result<Vec<(RgbImage, String)>, DatasetError> {
    let mut pairs = Vec::new();
    for sample in samples {
        for el in &sample.annotations {
            pairs.push((semi_mask(&sample.image, &el.bbox, mask)?, pair_target(el)));
        }
    }
    Ok(pairs)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_path: String,
    pub split: String,
    pub annotations: Vec<UiElement>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub samples: usize,
    pub annotations: usize,
    pub pairs: usize,
}

/// Write images, the annotation manifest, and masked training pairs:
/// `images/*.png`, `manifest.json`, `pairs/*.png`, `pairs/targets.jsonl`.
pub fn export_dataset(
    dir: &Path,
    samples: &[AnnotatedScreenshot],
    mask: &MaskOptions,
) -> Result<DatasetSummary, DatasetError> {
    let io = |e: std::io::Error| DatasetError::Io(e.to_string());
    let images_dir = dir.join("images");
    let pairs_dir = dir.join("pairs");
    std::fs::create_dir_all(&images_dir).map_err(io)?;
    std::fs::create_dir_all(&pairs_dir).map_err(io)?;

    let mut manifest = Vec::new();
    let mut targets = String::new();
    let mut summary = DatasetSummary::default();
    for (i, sample) in samples.iter().enumerate() {
        let p = &sample.provenance;
        let stem = format!("{i:04}-{}-{}-{}", p.family, p.seed, p.step);
        let image_path = format!("images/{stem}.png");
        sample.image.save(dir.join(&image_path)).map_err(|e| DatasetError::Io(e.to_string()))?;
        let split =
            if ANNOTATION_SEEDS.contains(&p.seed) { "train" } else { "extra" }.to_string();
        manifest.push(ManifestEntry {
            image_path,
            split,
            annotations: sample.annotations.clone(),
        });
        summary.samples += 1;
        summary.annotations += sample.annotations.len();

        for (a, el) in sample.annotations.iter().enumerate() {
            let masked = semi_mask(&sample.image, &el.bbox, mask)?;
            let pair_path = format!("pairs/{stem}-{a}.png");
            masked.save(dir.join(&pair_path)).map_err(|e| DatasetError::Io(e.to_string()))?;
            let line = serde_json::json!({"image": pair_path, "target": pair_target(el)});
            targets.push_str(&line.to_string());
            targets.push('\n');
            summary.pairs += 1;
        }
    }
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(io)?;
    std::fs::write(pairs_dir.join("targets.jsonl"), targets).map_err(io)?;
    Ok(summary)
}
