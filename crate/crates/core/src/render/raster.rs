//! Exact pixel-center rasterization of filled discs and capsules.
//!
//! A pixel `(px, py)` belongs to a shape when its center `(px + 0.5, py + 0.5)`
//! lies inside the closed shape. Both scanners compute an analytic x-interval
//! per row, widen it by one pixel on each side and then trim the ends with
//! the exact membership predicate, so the emitted spans match a per-pixel
//! test bit for bit.

/// Raster dimensions in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
}

impl Canvas {
    pub fn new(width: u32, height: u32) -> Self {
        Canvas { width, height }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

#[inline]
fn disc_contains(cx: f64, cy: f64, r2: f64, px: u32, py: u32) -> bool {
    let dx = px as f64 + 0.5 - cx;
    let dy = py as f64 + 0.5 - cy;
    dx * dx + dy * dy <= r2
}

#[derive(Debug, Clone, Copy)]
struct Capsule {
    a: Point,
    abx: f64,
    aby: f64,
    len2: f64,
    r2: f64,
}

impl Capsule {
    fn new(a: Point, b: Point, half_width: f64) -> Self {
        let abx = b.x - a.x;
        let aby = b.y - a.y;
        Capsule {
            a,
            abx,
            aby,
            len2: abx * abx + aby * aby,
            r2: half_width * half_width,
        }
    }

    #[inline]
    fn contains(&self, px: u32, py: u32) -> bool {
        let x = px as f64 + 0.5;
        let y = py as f64 + 0.5;
        let (qx, qy) = if self.len2 == 0.0 {
            (self.a.x, self.a.y)
        } else {
            let t = ((x - self.a.x) * self.abx + (y - self.a.y) * self.aby) / self.len2;
            let t = t.clamp(0.0, 1.0);
            (self.a.x + t * self.abx, self.a.y + t * self.aby)
        };
        let dx = x - qx;
        let dy = y - qy;
        dx * dx + dy * dy <= self.r2
    }
}

/// Clamps a float pixel index range to the canvas, `None` when empty.
#[inline]
fn clamp_range(lo: f64, hi: f64, limit: u32) -> Option<(u32, u32)> {
    if limit == 0 || hi < 0.0 || lo > (limit - 1) as f64 || lo > hi || lo.is_nan() || hi.is_nan() {
        return None;
    }
    let lo = lo.max(0.0) as u32;
    let hi = hi.min((limit - 1) as f64) as u32;
    Some((lo, hi))
}

/// Given an approximate continuous x-interval `[lo, hi]` on a row, returns the
/// exact run of member pixels, trimming with `inside`.
#[inline]
fn trim_row(lo: f64, hi: f64, width: u32, inside: impl Fn(u32) -> bool) -> Option<(u32, u32)> {
    let (mut x0, mut x1) = clamp_range((lo - 0.5).ceil() - 1.0, (hi - 0.5).floor() + 1.0, width)?;
    while x0 <= x1 && !inside(x0) {
        x0 += 1;
    }
    while x1 > x0 && !inside(x1) {
        x1 -= 1;
    }
    (x0 <= x1 && inside(x0)).then_some((x0, x1))
}

/// Calls `emit(y, x0, x1)` for every row run of the disc, top to bottom.
pub fn for_each_disc_span(center: Point, radius: f64, canvas: Canvas, mut emit: impl FnMut(u32, u32, u32)) {
    if !(radius >= 0.0) || !center.x.is_finite() || !center.y.is_finite() {
        return;
    }
    let r2 = radius * radius;
    let Some((y0, y1)) = clamp_range(
        (center.y - radius - 0.5).ceil() - 1.0,
        (center.y + radius - 0.5).floor() + 1.0,
        canvas.height,
    ) else {
        return;
    };
    for py in y0..=y1 {
        let dy = py as f64 + 0.5 - center.y;
        let rem = r2 - dy * dy;
        let half = if rem > 0.0 { rem.sqrt() } else { 0.0 };
        if let Some((x0, x1)) = trim_row(center.x - half, center.x + half, canvas.width, |px| {
            disc_contains(center.x, center.y, r2, px, py)
        }) {
            emit(py, x0, x1);
        }
    }
}

/// Calls `emit(y, x0, x1)` for every row run of the capsule (thick segment
/// with round caps) of total width `width`, top to bottom.
pub fn for_each_capsule_span(a: Point, b: Point, width: f64, canvas: Canvas, mut emit: impl FnMut(u32, u32, u32)) {
    let r = width / 2.0;
    if !(r >= 0.0) || ![a.x, a.y, b.x, b.y].iter().all(|v| v.is_finite()) {
        return;
    }
    let cap = Capsule::new(a, b, r);
    let Some((y0, y1)) = clamp_range(
        (a.y.min(b.y) - r - 0.5).ceil() - 1.0,
        (a.y.max(b.y) + r - 0.5).floor() + 1.0,
        canvas.height,
    ) else {
        return;
    };

    // Body of the capsule: parallelogram a±rn, b±rn.
    let len = cap.len2.sqrt();
    let quad = (len > 0.0).then(|| {
        let nx = -cap.aby / len * r;
        let ny = cap.abx / len * r;
        [
            Point::new(a.x + nx, a.y + ny),
            Point::new(b.x + nx, b.y + ny),
            Point::new(b.x - nx, b.y - ny),
            Point::new(a.x - nx, a.y - ny),
        ]
    });

    for py in y0..=y1 {
        let yc = py as f64 + 0.5;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in [a, b] {
            let dy = yc - c.y;
            let rem = cap.r2 - dy * dy;
            if rem >= 0.0 {
                let h = rem.sqrt();
                lo = lo.min(c.x - h);
                hi = hi.max(c.x + h);
            }
        }
        if let Some(q) = &quad {
            for i in 0..4 {
                let p0 = q[i];
                let p1 = q[(i + 1) % 4];
                if (p0.y - yc) * (p1.y - yc) > 0.0 {
                    continue;
                }
                if p0.y == p1.y {
                    lo = lo.min(p0.x.min(p1.x));
                    hi = hi.max(p0.x.max(p1.x));
                } else {
                    let x = p0.x + (yc - p0.y) * (p1.x - p0.x) / (p1.y - p0.y);
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
            }
        }
        if lo > hi {
            // Margin rows outside the analytic extent; a boundary pixel can
            // still qualify through rounding, so probe near the nearest cap.
            let c = if (yc - a.y).abs() < (yc - b.y).abs() { a } else { b };
            lo = c.x;
            hi = c.x;
        }
        if let Some((x0, x1)) = trim_row(lo, hi, canvas.width, |px| cap.contains(px, py)) {
            emit(py, x0, x1);
        }
    }
}

/// Pixels `(x, y)` whose centers lie within `radius` of `center`, in
/// row-major order.
pub fn rasterize_circle(center: Point, radius: f64, canvas: Canvas) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for_each_disc_span(center, radius, canvas, |y, x0, x1| {
        out.extend((x0..=x1).map(|x| (x, y)));
    });
    out
}

/// Pixels `(x, y)` whose centers lie within `width / 2` of the closed segment
/// `ab`, in row-major order.
pub fn rasterize_segment(a: Point, b: Point, width: f64, canvas: Canvas) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for_each_capsule_span(a, b, width, canvas, |y, x0, x1| {
        out.extend((x0..=x1).map(|x| (x, y)));
    });
    out
}
