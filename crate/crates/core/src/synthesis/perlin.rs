//! Seeded gradient-lattice (Perlin) noise and its fractal sum.
//!
//! Lattice gradients come from a 64-bit integer hash of `(seed, ix, iy)`, so
//! output depends only on the arguments, never on platform or call order.

use crate::image::Plane;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn gradient(seed: u64, ix: i64, iy: i64) -> (f64, f64) {
    let h = splitmix(seed ^ splitmix(ix as u64 ^ splitmix(iy as u64)));
    // 53 high bits -> [0, 1)
    let t = (h >> 11) as f64 / (1u64 << 53) as f64;
    let angle = t * std::f64::consts::TAU;
    (angle.cos(), angle.sin())
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Noise value at a point given in lattice units. Roughly in `[-0.71, 0.71]`.
pub(crate) fn perlin_at(seed: u64, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let (fx, fy) = (x - x0, y - y0);
    let (ix, iy) = (x0 as i64, y0 as i64);
    let dot = |gx: i64, gy: i64, dx: f64, dy: f64| {
        let (cx, cy) = gradient(seed, gx, gy);
        cx * dx + cy * dy
    };
    let n00 = dot(ix, iy, fx, fy);
    let n10 = dot(ix + 1, iy, fx - 1.0, fy);
    let n01 = dot(ix, iy + 1, fx, fy - 1.0);
    let n11 = dot(ix + 1, iy + 1, fx - 1.0, fy - 1.0);
    let (u, v) = (fade(fx), fade(fy));
    lerp(lerp(n00, n10, u), lerp(n01, n11, u), v)
}

/// Raw (unscaled) Perlin plane with square cells of `cell` pixels, sampled at
/// pixel centres.
pub fn perlin_plane(h: usize, w: usize, cell: f64, seed: u64) -> Plane {
    let cell = cell.max(1.0);
    let data = (0..h)
        .flat_map(|y| {
            (0..w).map(move |x| {
                perlin_at(seed, (x as f64 + 0.5) / cell, (y as f64 + 0.5) / cell) as f32
            })
        })
        .collect();
    Plane::new(h, w, data).expect("layout")
}

/// Fractal Brownian motion: `octaves` layers of Perlin noise, each with half
/// the cell size and `persistence` times the amplitude of the previous one.
pub fn fbm(h: usize, w: usize, base_cell: f64, octaves: u32, persistence: f64, seed: u64) -> Plane {
    let mut acc = vec![0.0f64; h * w];
    let mut amplitude = 1.0;
    let mut cell = base_cell;
    for octave in 0..octaves {
        let layer_seed = splitmix(seed.wrapping_add(octave as u64));
        let c = cell.max(1.0);
        for (i, a) in acc.iter_mut().enumerate() {
            let (y, x) = (i / w, i % w);
            *a += amplitude * perlin_at(layer_seed, (x as f64 + 0.5) / c, (y as f64 + 0.5) / c);
        }
        amplitude *= persistence;
        cell /= 2.0;
    }
    Plane::new(h, w, acc.into_iter().map(|v| v as f32).collect()).expect("layout")
}
