//! Optional PNG output. The raster is a sketch for command-line use; the web
//! client draws from the spec itself.

use std::path::Path;

use thiserror::Error;

use super::ChartSpec;

/// tEXt keyword carrying the x categories, one per line, in drawing order.
pub const CATEGORY_KEYWORD: &str = "x-categories";

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("RenderUnavailable: no raster backend compiled in")]
    Unavailable,
    #[error("cannot write chart image: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot encode chart image: {0}")]
    Encode(String),
}

/// Writes `spec` as a PNG to `path`. Identical specs give identical bytes.
pub fn render_chart(spec: &ChartSpec, path: &Path) -> Result<(), RenderError> {
    let bytes = render_png(spec)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

#[cfg(not(feature = "render"))]
pub fn render_png(_spec: &ChartSpec) -> Result<Vec<u8>, RenderError> {
    Err(RenderError::Unavailable)
}

#[cfg(feature = "render")]
pub fn render_png(spec: &ChartSpec) -> Result<Vec<u8>, RenderError> {
    raster::render(spec)
}

#[cfg(feature = "render")]
mod raster {
    use indexmap::IndexMap;

    use super::{RenderError, CATEGORY_KEYWORD};
    use crate::engine::{ChartSpec, ColumnRole};
    use crate::value::Value;
    use crate::vql::VisType;

    const W: usize = 640;
    const H: usize = 480;
    const LEFT: usize = 70;
    const RIGHT: usize = 620;
    const TOP: usize = 40;
    const BOTTOM: usize = 360;
    const SCALE: i64 = 2;

    type Rgb = [u8; 3];
    const WHITE: Rgb = [255, 255, 255];
    const BLACK: Rgb = [0, 0, 0];
    const PALETTE: [Rgb; 8] = [
        [31, 119, 180],
        [255, 127, 14],
        [44, 160, 44],
        [214, 39, 40],
        [148, 103, 189],
        [140, 86, 75],
        [227, 119, 194],
        [127, 127, 127],
    ];

    // 3x5 glyphs, rows top to bottom
    const GLYPHS: &[(char, &str)] = &[
        ('0', "111101101101111"),
        ('1', "010110010010111"),
        ('2', "111001111100111"),
        ('3', "111001111001111"),
        ('4', "101101111001001"),
        ('5', "111100111001111"),
        ('6', "111100111101111"),
        ('7', "111001001001001"),
        ('8', "111101111101111"),
        ('9', "111101111001111"),
        ('A', "010101111101101"),
        ('B', "110101110101110"),
        ('C', "011100100100011"),
        ('D', "110101101101110"),
        ('E', "111100110100111"),
        ('F', "111100110100100"),
        ('G', "011100101101011"),
        ('H', "101101111101101"),
        ('I', "111010010010111"),
        ('J', "001001001101010"),
        ('K', "101101110101101"),
        ('L', "100100100100111"),
        ('M', "101111111101101"),
        ('N', "110101101101101"),
        ('O', "010101101101010"),
        ('P', "110101110100100"),
        ('Q', "010101101110011"),
        ('R', "110101110101101"),
        ('S', "011100010001110"),
        ('T', "111010010010010"),
        ('U', "101101101101111"),
        ('V', "101101101101010"),
        ('W', "101101111111101"),
        ('X', "101101010101101"),
        ('Y', "101101010010010"),
        ('Z', "111001010100111"),
        ('-', "000000111000000"),
        ('.', "000000000000010"),
        ('_', "000000000000111"),
        (':', "000010000010000"),
        ('/', "001001010100100"),
        ('(', "010100100100010"),
        (')', "010001001001010"),
        (' ', "000000000000000"),
        ('?', "111001010000010"),
    ];

    fn glyph(c: char) -> &'static str {
        let c = c.to_ascii_uppercase();
        GLYPHS
            .iter()
            .find(|(g, _)| *g == c)
            .or_else(|| GLYPHS.iter().find(|(g, _)| *g == '?'))
            .map(|(_, bits)| *bits)
            .unwrap_or("")
    }

    struct Canvas {
        px: Vec<u8>,
    }

    impl Canvas {
        fn new() -> Self {
            Canvas {
                px: WHITE.repeat(W * H),
            }
        }

        fn set(&mut self, x: i64, y: i64, c: Rgb) {
            if x < 0 || y < 0 || x >= W as i64 || y >= H as i64 {
                return;
            }
            let i = (y as usize * W + x as usize) * 3;
            self.px[i..i + 3].copy_from_slice(&c);
        }

        fn rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, c: Rgb) {
            for y in y0.min(y1)..=y0.max(y1) {
                for x in x0.min(x1)..=x0.max(x1) {
                    self.set(x, y, c);
                }
            }
        }

        fn line(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64), c: Rgb) {
            let steps = (x1 - x0).abs().max((y1 - y0).abs()).max(1);
            for s in 0..=steps {
                self.set(x0 + (x1 - x0) * s / steps, y0 + (y1 - y0) * s / steps, c);
            }
        }

        /// Horizontal text with its top-left corner at (x, y).
        fn text(&mut self, x: i64, y: i64, s: &str, c: Rgb) {
            for (i, ch) in s.chars().enumerate() {
                for (bit, on) in glyph(ch).chars().enumerate() {
                    if on == '1' {
                        let gx = x + (i as i64 * 4 + bit as i64 % 3) * SCALE;
                        let gy = y + (bit as i64 / 3) * SCALE;
                        self.rect(gx, gy, gx + SCALE - 1, gy + SCALE - 1, c);
                    }
                }
            }
        }

        /// Text rotated 45 degrees, ending at (x, y) and rising to the right.
        fn text_rotated(&mut self, x: i64, y: i64, s: &str, c: Rgb) {
            let len = s.chars().count() as i64 * 4 * SCALE;
            for (i, ch) in s.chars().enumerate() {
                for (bit, on) in glyph(ch).chars().enumerate() {
                    if on != '1' {
                        continue;
                    }
                    for dy in 0..SCALE {
                        for dx in 0..SCALE {
                            let lx = (i as i64 * 4 + bit as i64 % 3) * SCALE + dx - len;
                            let ly = (bit as i64 / 3) * SCALE + dy;
                            // unit vectors (1,-1)/sqrt2 along the text, (1,1)/sqrt2 down
                            let rx = x
                                + ((lx + ly) as f64 * std::f64::consts::FRAC_1_SQRT_2).round()
                                    as i64;
                            let ry = y
                                + ((ly - lx) as f64 * std::f64::consts::FRAC_1_SQRT_2).round()
                                    as i64;
                            self.set(rx, ry, c);
                        }
                    }
                }
            }
        }
    }

    fn number(v: &Value) -> f64 {
        v.as_f64().filter(|f| f.is_finite()).unwrap_or(0.0)
    }

    fn fmt_tick(v: f64) -> String {
        if v.fract() == 0.0 && v.abs() < 1e12 {
            format!("{}", v as i64)
        } else {
            format!("{v:.2}")
        }
    }

    pub(super) fn render(spec: &ChartSpec) -> Result<Vec<u8>, RenderError> {
        let t = &spec.data;
        let xi = t.role_index(ColumnRole::X);
        let yi = t.role_index(ColumnRole::Y);
        let gi = t.role_index(ColumnRole::Group);

        let mut categories: IndexMap<String, usize> = IndexMap::new();
        let mut groups: IndexMap<String, usize> = IndexMap::new();
        let mut points: Vec<(usize, usize, f64)> = Vec::new();
        if let (Some(xi), Some(yi)) = (xi, yi) {
            for r in &t.rows {
                let n = categories.len();
                let cx = *categories.entry(r[xi].to_string()).or_insert(n);
                let g = gi.map(|g| r[g].to_string()).unwrap_or_default();
                let n = groups.len();
                let cg = *groups.entry(g).or_insert(n);
                points.push((cx, cg, number(&r[yi])));
            }
        }

        let mut canvas = Canvas::new();
        canvas.text(LEFT as i64, 12, &spec.title, BLACK);

        if spec.mark == VisType::Pie {
            draw_pie(&mut canvas, &points);
        } else {
            draw_axes(&mut canvas, spec, &categories, &groups, &points);
        }

        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, W as u32, H as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let cats: Vec<&str> = categories.keys().map(String::as_str).collect();
            enc.add_text_chunk(CATEGORY_KEYWORD.to_string(), cats.join("\n"))
                .map_err(|e| RenderError::Encode(e.to_string()))?;
            let mut writer = enc
                .write_header()
                .map_err(|e| RenderError::Encode(e.to_string()))?;
            writer
                .write_image_data(&canvas.px)
                .map_err(|e| RenderError::Encode(e.to_string()))?;
        }
        Ok(out)
    }

    fn draw_pie(canvas: &mut Canvas, points: &[(usize, usize, f64)]) {
        let total: f64 = points.iter().map(|p| p.2.max(0.0)).sum();
        let (cx, cy, radius) = (320.0, 220.0, 150.0);
        if total <= 0.0 {
            return;
        }
        let mut bounds = Vec::new();
        let mut acc = 0.0;
        for p in points {
            acc += p.2.max(0.0) / total;
            bounds.push(acc * std::f64::consts::TAU);
        }
        for y in (cy - radius) as i64..=(cy + radius) as i64 {
            for x in (cx - radius) as i64..=(cx + radius) as i64 {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                if dx * dx + dy * dy > radius * radius {
                    continue;
                }
                let angle = dy.atan2(dx).rem_euclid(std::f64::consts::TAU);
                let slice = bounds.iter().position(|b| angle <= *b).unwrap_or(0);
                canvas.set(x, y, PALETTE[slice % PALETTE.len()]);
            }
        }
    }

    fn draw_axes(
        canvas: &mut Canvas,
        spec: &ChartSpec,
        categories: &IndexMap<String, usize>,
        groups: &IndexMap<String, usize>,
        points: &[(usize, usize, f64)],
    ) {
        let stacked = spec.mark == VisType::StackedBar;
        let mut stack_tops = vec![0.0f64; categories.len()];
        let mut max_y = 0.0f64;
        let mut min_y = 0.0f64;
        for p in points {
            if stacked {
                stack_tops[p.0] += p.2.max(0.0);
                max_y = max_y.max(stack_tops[p.0]);
            } else {
                max_y = max_y.max(p.2);
                min_y = min_y.min(p.2);
            }
        }
        if max_y <= min_y {
            max_y = min_y + 1.0;
        }
        let span = max_y - min_y;
        let to_px =
            |v: f64| BOTTOM as i64 - (((v - min_y) / span) * (BOTTOM - TOP) as f64).round() as i64;

        canvas.line(
            (LEFT as i64, TOP as i64),
            (LEFT as i64, BOTTOM as i64),
            BLACK,
        );
        canvas.line(
            (LEFT as i64, BOTTOM as i64),
            (RIGHT as i64, BOTTOM as i64),
            BLACK,
        );
        for k in 0..=4 {
            let v = min_y + span * k as f64 / 4.0;
            let py = to_px(v);
            canvas.line((LEFT as i64 - 4, py), (LEFT as i64, py), BLACK);
            let label = fmt_tick(v);
            canvas.text(
                LEFT as i64 - 8 - label.len() as i64 * 8,
                py - 5,
                &label,
                BLACK,
            );
        }

        let n = categories.len().max(1) as i64;
        let band = (RIGHT - LEFT) as i64 / n;
        let center = |c: usize| LEFT as i64 + band * c as i64 + band / 2;
        for (name, &c) in categories {
            canvas.line(
                (center(c), BOTTOM as i64),
                (center(c), BOTTOM as i64 + 4),
                BLACK,
            );
            canvas.text_rotated(center(c), BOTTOM as i64 + 8, name, BLACK);
        }

        let ng = groups.len().max(1) as i64;
        let mut stack_base = vec![0.0f64; categories.len()];
        let mut previous: Vec<Option<(i64, i64)>> = vec![None; groups.len()];
        for &(c, g, y) in points {
            let color = PALETTE[g % PALETTE.len()];
            match spec.mark {
                VisType::Bar | VisType::StackedBar if stacked => {
                    let base = stack_base[c];
                    stack_base[c] += y.max(0.0);
                    let half = (band * 3 / 8).max(1);
                    canvas.rect(
                        center(c) - half,
                        to_px(base),
                        center(c) + half,
                        to_px(stack_base[c]),
                        color,
                    );
                }
                VisType::Bar | VisType::StackedBar => {
                    let half = (band * 3 / 8).max(1);
                    canvas.rect(
                        center(c) - half,
                        to_px(0.0f64.max(min_y)),
                        center(c) + half,
                        to_px(y),
                        color,
                    );
                }
                VisType::Line | VisType::GroupedLine => {
                    let here = (center(c), to_px(y));
                    if let Some(prev) = previous[g] {
                        canvas.line(prev, here, color);
                    }
                    previous[g] = Some(here);
                    canvas.rect(here.0 - 2, here.1 - 2, here.0 + 2, here.1 + 2, color);
                }
                VisType::Scatter | VisType::GroupedScatter | VisType::Pie => {
                    let offset = if ng > 1 { (g as i64 - ng / 2) * 2 } else { 0 };
                    let (px, py) = (center(c) + offset, to_px(y));
                    canvas.rect(px - 3, py - 3, px + 3, py + 3, color);
                }
            }
        }
    }
}
