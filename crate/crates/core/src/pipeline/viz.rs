//! PNG and SVG renderings of planes and profiles.

use std::path::Path;

use crate::error::Result;
use crate::image::{save_png, ImageU8, Plane};
use crate::spectral::RadialProfile;

/// Dark-to-bright ramp for non-negative maps.
const HEAT: [[f32; 3]; 5] = [
    [0.0, 0.0, 4.0],
    [87.0, 16.0, 110.0],
    [188.0, 55.0, 84.0],
    [249.0, 142.0, 9.0],
    [252.0, 255.0, 164.0],
];

fn lerp3(a: [f32; 3], b: [f32; 3], t: f32) -> [u8; 3] {
    let mut out = [0u8; 3];
    for k in 0..3 {
        out[k] = (a[k] + (b[k] - a[k]) * t).round().clamp(0.0, 255.0) as u8;
    }
    out
}

fn ramp(stops: &[[f32; 3]], t: f32) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let seg = t * (stops.len() - 1) as f32;
    let i = (seg.floor() as usize).min(stops.len() - 2);
    lerp3(stops[i], stops[i + 1], seg - i as f32)
}

fn render(plane: &Plane, color: impl Fn(f32) -> [u8; 3]) -> ImageU8 {
    let data = plane.data().iter().flat_map(|&v| color(v)).collect();
    ImageU8::new(plane.height(), plane.width(), 3, data).expect("rgb layout")
}

fn min_max(plane: &Plane) -> (f32, f32) {
    plane
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Min-max stretched heat map.
pub fn heatmap(plane: &Plane) -> ImageU8 {
    let (lo, hi) = min_max(plane);
    let span = if hi > lo { hi - lo } else { 1.0 };
    render(plane, |v| ramp(&HEAT, (v - lo) / span))
}

/// Min-max stretched single-channel image.
pub fn grayscale(plane: &Plane) -> ImageU8 {
    let (lo, hi) = min_max(plane);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let data = plane
        .data()
        .iter()
        .map(|&v| ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    ImageU8::new(plane.height(), plane.width(), 1, data).expect("gray layout")
}

/// Blue for negative, white at zero, red for positive, scaled by the
/// largest magnitude so zero always maps to white.
pub fn diverging(plane: &Plane) -> ImageU8 {
    let peak = plane.data().iter().fold(0.0f32, |m, v| m.max(v.abs()));
    let peak = if peak > 0.0 { peak } else { 1.0 };
    let blue = [33.0, 102.0, 172.0];
    let white = [247.0, 247.0, 247.0];
    let red = [178.0, 24.0, 43.0];
    render(plane, |v| {
        let t = v / peak;
        if t < 0.0 {
            lerp3(white, blue, -t)
        } else {
            lerp3(white, red, t)
        }
    })
}

pub fn save_heatmap(plane: &Plane, path: &Path) -> Result<()> {
    save_png(&heatmap(plane), path)
}

pub fn save_grayscale(plane: &Plane, path: &Path) -> Result<()> {
    save_png(&grayscale(plane), path)
}

pub fn save_diverging(plane: &Plane, path: &Path) -> Result<()> {
    save_png(&diverging(plane), path)
}

/// Line chart of one or more radial profiles sharing an axis.
pub fn profile_svg(series: &[(&str, &RadialProfile)]) -> String {
    const W: f64 = 420.0;
    const H: f64 = 260.0;
    const L: f64 = 48.0;
    const B: f64 = 30.0;
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e"];
    let r_max = series.iter().map(|(_, p)| p.r_max()).max().unwrap_or(0).max(1) as f64;
    let vals = series.iter().flat_map(|(_, p)| {
        p.magnitudes.iter().zip(&p.empty).filter(|(_, &e)| !e).map(|(&m, _)| m)
    });
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (0.0, 1.0) };
    let px = |r: f64| L + r / r_max * (W - L - 10.0);
    let py = |m: f64| (H - B) - (m - lo) / (hi - lo) * (H - B - 10.0);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"10\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <line x1=\"{L}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"#888\"/>\n\
         <line x1=\"{L}\" y1=\"10\" x2=\"{L}\" y2=\"{y0}\" stroke=\"#888\"/>\n\
         <text x=\"{L}\" y=\"{ty}\">0</text><text x=\"{x1}\" y=\"{ty}\" text-anchor=\"end\">r = {r_max}</text>\n\
         <text x=\"{lx}\" y=\"14\" text-anchor=\"end\">{hi:.2}</text><text x=\"{lx}\" y=\"{y0}\" text-anchor=\"end\">{lo:.2}</text>\n",
        y0 = H - B,
        x1 = W - 10.0,
        ty = H - B + 14.0,
        lx = L - 4.0,
    );
    for (k, (name, p)) in series.iter().enumerate() {
        let pts: Vec<String> = p
            .radii
            .iter()
            .zip(&p.magnitudes)
            .zip(&p.empty)
            .filter(|(_, &e)| !e)
            .map(|((&r, &m), _)| format!("{:.2},{:.2}", px(r as f64), py(m)))
            .collect();
        let c = colors[k % colors.len()];
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{c}\" stroke-width=\"1.2\" points=\"{}\"/>\n\
             <text x=\"{:.0}\" y=\"{:.0}\" fill=\"{c}\" text-anchor=\"end\">{name}</text>\n",
            pts.join(" "),
            W - 14.0,
            24.0 + 12.0 * k as f64
        ));
    }
    out.push_str("</svg>\n");
    out
}
