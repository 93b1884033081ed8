use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid_arg, Result};

/// Half-pixel bins keep the ramp filter from aliasing sharp metal edges.
pub const DEFAULT_BIN_WIDTH: f64 = 0.5;

/// Parallel-beam acquisition over `[0, π)` for a square `image_size` grid.
///
/// Detector bins are `bin_width` pixels wide and centred on the rotation
/// axis; the middle bin (`n_bins` is odd) passes through the image centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionGeometry {
    pub image_size: usize,
    pub n_angles: usize,
    pub n_bins: usize,
    /// Ray sampling step in pixels.
    pub step: f64,
    /// Detector bin spacing in pixels.
    pub bin_width: f64,
}

impl ProjectionGeometry {
    /// 180 angles and half-pixel bins covering the image diagonal.
    pub fn new(image_size: usize) -> Self {
        Self::with_angles(image_size, 180)
    }

    pub fn with_angles(image_size: usize, n_angles: usize) -> Self {
        Self::with_bins(image_size, n_angles, DEFAULT_BIN_WIDTH)
    }

    /// Bins of `bin_width` pixels covering the image diagonal.
    pub fn with_bins(image_size: usize, n_angles: usize, bin_width: f64) -> Self {
        let diag = image_size as f64 * core::f64::consts::SQRT_2 + 2.0;
        let n_bins = libm::ceil(diag / bin_width) as usize | 1;
        Self { image_size, n_angles, n_bins, step: 0.5, bin_width }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 || self.n_angles == 0 || self.n_bins == 0 {
            return Err(invalid_arg!("projection geometry must have positive sizes: {self:?}"));
        }
        if !(self.bin_width > 0.0 && self.bin_width <= 1.0) {
            return Err(invalid_arg!("bin width must lie in (0, 1], got {}", self.bin_width));
        }
        if !(self.step > 0.0 && self.step <= 0.5) {
            return Err(invalid_arg!("ray step must lie in (0, 0.5], got {}", self.step));
        }
        Ok(())
    }

    /// Projection angles in radians, evenly spaced in `[0, π)`.
    pub fn angles(&self) -> Vec<f64> {
        (0..self.n_angles).map(|a| a as f64 * PI / self.n_angles as f64).collect()
    }

    fn centre_bin(&self) -> f64 {
        (self.n_bins as f64 - 1.0) / 2.0
    }

    fn centre_pixel(&self) -> f64 {
        (self.image_size as f64 - 1.0) / 2.0
    }
}

/// Line integrals laid out `[angle][bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub values: Vec<f64>,
    pub geometry: ProjectionGeometry,
}

impl Sinogram {
    pub fn zeros(geometry: ProjectionGeometry) -> Self {
        Self { values: vec![0.0; geometry.n_angles * geometry.n_bins], geometry }
    }

    pub fn row(&self, angle: usize) -> &[f64] {
        let nb = self.geometry.n_bins;
        &self.values[angle * nb..(angle + 1) * nb]
    }

    pub fn get(&self, angle: usize, bin: usize) -> f64 {
        self.values[angle * self.geometry.n_bins + bin]
    }
}

#[inline]
fn bilinear(image: &[f64], n: usize, fi: f64, fj: f64) -> f64 {
    let i0 = libm::floor(fi);
    let j0 = libm::floor(fj);
    let (di, dj) = (fi - i0, fj - j0);
    let (i0, j0) = (i0 as isize, j0 as isize);
    let n = n as isize;
    let at = |i: isize, j: isize| if i >= 0 && i < n && j >= 0 && j < n { image[(i * n + j) as usize] } else { 0.0 };
    (1.0 - di) * ((1.0 - dj) * at(i0, j0) + dj * at(i0, j0 + 1)) + di * ((1.0 - dj) * at(i0 + 1, j0) + dj * at(i0 + 1, j0 + 1))
}

/// Parallel-beam forward projection by bilinear ray sampling.
///
/// Pixel `(row, col)` sits at `x = col - c`, `y = c - row` with
/// `c = (size - 1) / 2`; angle θ integrates along the direction
/// `(-sin θ, cos θ)` at signed offset `t` along `(cos θ, sin θ)`.
pub fn radon(image: &[f64], geometry: &ProjectionGeometry) -> Result<Sinogram> {
    geometry.validate()?;
    let n = geometry.image_size;
    if image.len() != n * n {
        return Err(invalid_arg!("image has {} pixels, geometry expects {n}x{n}", image.len()));
    }
    if image.iter().any(|v| !v.is_finite()) {
        return Err(invalid_arg!("image contains non-finite attenuation"));
    }
    let c = geometry.centre_pixel();
    let cb = geometry.centre_bin();
    let radius = c * core::f64::consts::SQRT_2 + 1.5;
    let step = geometry.step;
    let mut sino = Sinogram::zeros(*geometry);
    for (a, theta) in geometry.angles().into_iter().enumerate() {
        let (s, co) = libm::sincos(theta);
        let row = &mut sino.values[a * geometry.n_bins..(a + 1) * geometry.n_bins];
        for (b, out) in row.iter_mut().enumerate() {
            let t = (b as f64 - cb) * geometry.bin_width;
            if t.abs() >= radius {
                continue;
            }
            let half = libm::sqrt(radius * radius - t * t);
            let k_max = libm::ceil(half / step) as isize;
            let mut acc = 0.0;
            for k in -k_max..=k_max {
                let u = k as f64 * step;
                let x = t * co - u * s;
                let y = t * s + u * co;
                acc += bilinear(image, n, c - y, x + c);
            }
            *out = acc * step;
        }
    }
    Ok(sino)
}

/// Discrete Ram-Lak kernel for unit bin spacing, indexed by `offset + (n - 1)`.
fn ramp_kernel(n: usize) -> Vec<f64> {
    (0..2 * n - 1)
        .map(|i| {
            let k = i as isize - (n as isize - 1);
            if k == 0 {
                0.25
            } else if k % 2 == 0 {
                0.0
            } else {
                -1.0 / (PI * PI * (k * k) as f64)
            }
        })
        .collect()
}

/// Ramp-filtered back-projection onto the `image_size` grid of `geometry`.
pub fn fbp(sinogram: &Sinogram, geometry: &ProjectionGeometry) -> Result<Vec<f64>> {
    geometry.validate()?;
    if sinogram.geometry != *geometry || sinogram.values.len() != geometry.n_angles * geometry.n_bins {
        return Err(invalid_arg!("sinogram geometry {:?} does not match {:?}", sinogram.geometry, geometry));
    }
    if sinogram.values.iter().any(|v| !v.is_finite()) {
        return Err(invalid_arg!("sinogram contains non-finite values"));
    }
    let nb = geometry.n_bins;
    // Ram-Lak for spacing τ is the unit kernel over τ², times τ for the sum.
    let kernel: Vec<f64> = ramp_kernel(nb).into_iter().map(|v| v / geometry.bin_width).collect();
    let mut filtered = vec![0.0; sinogram.values.len()];
    for a in 0..geometry.n_angles {
        let p = sinogram.row(a);
        let q = &mut filtered[a * nb..(a + 1) * nb];
        for (b, out) in q.iter_mut().enumerate() {
            // kernel index of (b - k) is b - k + nb - 1
            let h = &kernel[b..b + nb];
            let mut acc = 0.0;
            for (k, &pv) in p.iter().enumerate() {
                if pv != 0.0 {
                    acc += pv * h[nb - 1 - k];
                }
            }
            *out = acc;
        }
    }

    let n = geometry.image_size;
    let c = geometry.centre_pixel();
    let cb = geometry.centre_bin();
    let mut image = vec![0.0; n * n];
    for (a, theta) in geometry.angles().into_iter().enumerate() {
        let (s, co) = libm::sincos(theta);
        let q = &filtered[a * nb..(a + 1) * nb];
        for row in 0..n {
            let y = c - row as f64;
            for col in 0..n {
                let x = col as f64 - c;
                let t = (x * co + y * s) / geometry.bin_width + cb;
                let t0 = libm::floor(t);
                let i0 = t0 as isize;
                if i0 < 0 || i0 as usize + 1 >= nb {
                    continue;
                }
                let f = t - t0;
                image[row * n + col] += (1.0 - f) * q[i0 as usize] + f * q[i0 as usize + 1];
            }
        }
    }
    let scale = PI / geometry.n_angles as f64;
    image.iter_mut().for_each(|v| *v *= scale);
    Ok(image)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_image_projects_to_zero() {
        let g = ProjectionGeometry::with_angles(32, 30);
        let s = radon(&vec![0.0; 32 * 32], &g).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
        assert!(fbp(&s, &g).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = ProjectionGeometry::with_angles(16, 10);
        assert!(radon(&vec![0.0; 15], &g).is_err());
        let mut img = vec![0.0; 256];
        img[3] = f64::NAN;
        assert!(radon(&img, &g).is_err());
        let s = Sinogram::zeros(ProjectionGeometry::with_angles(16, 12));
        assert!(fbp(&s, &g).is_err());
    }

    #[test]
    fn geometry_defaults() {
        let g = ProjectionGeometry::new(128);
        assert_eq!(g.n_angles, 180);
        assert_eq!(g.n_bins % 2, 1);
        assert!(g.n_bins as f64 * g.bin_width >= 128.0 * 2f64.sqrt());
        let a = g.angles();
        assert!(a.windows(2).all(|w| w[1] > w[0]));
        assert!(a[0] == 0.0 && *a.last().unwrap() < PI);
    }
}
