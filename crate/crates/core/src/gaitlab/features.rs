//! Handcrafted per-frame features standing in for a CNN backbone.
//!
//! Each frame is cut into horizontal bands; the feature for a band is the
//! fraction of its pixels carrying each class (CRF, one-hot expanded) or each
//! channel (DCF, channels as stored). Output shape is `n=1, c=13, s=frames,
//! h=bands, w=1`.

use crate::error::{Error, Result};
use crate::fusion::FusedSample;
use crate::label::NUM_CLASSES;

/// Dense `n × c × s × h × w` volume, row-major in that axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    dims: [usize; 5],
    values: Vec<f64>,
}

impl FeatureTensor {
    pub fn new(dims: [usize; 5], values: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Feature(format!("zero dimension in {dims:?}")));
        }
        let n: usize = dims.iter().product();
        if n != values.len() {
            return Err(Error::Feature(format!(
                "dims {dims:?} need {n} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Feature("non-finite feature value".into()));
        }
        Ok(FeatureTensor { dims, values })
    }

    /// `[n, c, s, h, w]`
    pub fn dims(&self) -> [usize; 5] {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn index(&self, n: usize, c: usize, s: usize, h: usize, w: usize) -> usize {
        let [_, dc, ds, dh, dw] = self.dims;
        (((n * dc + c) * ds + s) * dh + h) * dw + w
    }

    pub fn get(&self, n: usize, c: usize, s: usize, h: usize, w: usize) -> f64 {
        self.values[self.index(n, c, s, h, w)]
    }

    /// Concatenates single-sample tensors along `n`.
    pub fn stack(parts: &[FeatureTensor]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Feature("nothing to stack".into()))?;
        let mut dims = first.dims;
        for p in parts {
            if p.dims[1..] != first.dims[1..] {
                return Err(Error::Feature(format!(
                    "cannot stack {:?} with {:?}",
                    p.dims, first.dims
                )));
            }
        }
        dims[0] = parts.iter().map(|p| p.dims[0]).sum();
        let values = parts.iter().flat_map(|p| p.values.iter().copied()).collect();
        Ok(FeatureTensor { dims, values })
    }

    /// Reorders frames of every sample by `perm` (a permutation of `0..s`).
    pub fn permute_frames(&self, perm: &[usize]) -> Result<Self> {
        let [n, c, s, h, w] = self.dims;
        let mut seen = vec![false; s];
        if perm.len() != s || !perm.iter().all(|&p| p < s && !std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Feature("not a frame permutation".into()));
        }
        let mut values = Vec::with_capacity(self.values.len());
        for ni in 0..n {
            for ci in 0..c {
                for &si in perm {
                    let start = self.index(ni, ci, si, 0, 0);
                    values.extend_from_slice(&self.values[start..start + h * w]);
                }
            }
        }
        Ok(FeatureTensor { dims: self.dims, values })
    }
}

/// Row range `[start, end)` of band `b` out of `bands` over `height` rows.
pub fn band_rows(b: usize, bands: usize, height: usize) -> (usize, usize) {
    (b * height / bands, (b + 1) * height / bands)
}

/// Per-band class fractions of a fused sequence.
pub fn extract_frame_features(frames: &[FusedSample], bands: usize) -> Result<FeatureTensor> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Feature("empty sequence".into()))?;
    let strategy = first.strategy();
    let (width, height) = first.dims();
    for (i, f) in frames.iter().enumerate() {
        if f.strategy() != strategy {
            return Err(Error::Feature(format!(
                "frame {i} is {}, sequence started as {strategy}",
                f.strategy()
            )));
        }
        if f.dims() != (width, height) {
            return Err(Error::Feature(format!(
                "frame {i} is {:?}, sequence started as {:?}",
                f.dims(),
                (width, height)
            )));
        }
    }
    if bands == 0 || bands > height as usize {
        return Err(Error::Feature(format!(
            "bands must be in 1..={height}, got {bands}"
        )));
    }
    if let FusedSample::Dcf(s) = first {
        if s.channels() != NUM_CLASSES {
            return Err(Error::Feature(format!(
                "expected {NUM_CLASSES} channels, got {}",
                s.channels()
            )));
        }
    }

    let (w, h) = (width as usize, height as usize);
    let s = frames.len();
    let mut values = vec![0.0; NUM_CLASSES * s * bands];
    let at = |c: usize, si: usize, b: usize| (c * s + si) * bands + b;
    for (si, frame) in frames.iter().enumerate() {
        for b in 0..bands {
            let (r0, r1) = band_rows(b, bands, h);
            let area = ((r1 - r0) * w) as f64;
            let mut counts = [0u64; NUM_CLASSES];
            match frame {
                FusedSample::Crf(r) => {
                    for y in r0..r1 {
                        for &l in r.row(y as u32) {
                            counts[l as usize] += 1;
                        }
                    }
                }
                FusedSample::Dcf(st) => {
                    for (c, count) in counts.iter_mut().enumerate() {
                        let ch = &st.channel(c)[r0 * w..r1 * w];
                        *count = ch.iter().filter(|&&v| v != 0).count() as u64;
                    }
                }
            }
            for (c, &n) in counts.iter().enumerate() {
                values[at(c, si, b)] = n as f64 / area;
            }
        }
    }
    FeatureTensor::new([1, NUM_CLASSES, s, bands, 1], values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{ChannelStack, SilhouetteMask};
    use crate::label::LabelRaster;

    #[test]
    fn background_sequence() {
        let f = vec![FusedSample::Crf(LabelRaster::new(44, 64)); 3];
        let t = extract_frame_features(&f, 64).unwrap();
        assert_eq!(t.dims(), [1, 13, 3, 64, 1]);
        for c in 0..13 {
            for s in 0..3 {
                for b in 0..64 {
                    assert_eq!(t.get(0, c, s, b, 0), if c == 0 { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn constant_class() {
        let f = vec![FusedSample::Crf(LabelRaster::filled(44, 64, 5))];
        let t = extract_frame_features(&f, 16).unwrap();
        assert!((0..16).all(|b| t.get(0, 5, 0, b, 0) == 1.0));
    }

    #[test]
    fn counting_oracle() {
        let mut r = LabelRaster::new(10, 8);
        r.set(3, 0, 2);
        r.set(4, 0, 2);
        r.set(0, 7, 12);
        let t = extract_frame_features(&[FusedSample::Crf(r)], 4).unwrap();
        assert_eq!(t.get(0, 2, 0, 0, 0), 2.0 / 20.0);
        assert_eq!(t.get(0, 12, 0, 3, 0), 1.0 / 20.0);
        assert_eq!(t.get(0, 0, 0, 0, 0), 18.0 / 20.0);
    }

    #[test]
    fn dcf_uses_channels_as_is() {
        let mut sil = SilhouetteMask::new(4, 4);
        sil.set(1, 1, true);
        let mut p = LabelRaster::new(4, 4);
        p.set(1, 1, 3);
        let st = crate::fusion::fuse_dcf(&p, &sil).unwrap();
        let t = extract_frame_features(&[FusedSample::Dcf(st)], 1).unwrap();
        assert_eq!(t.get(0, 1, 0, 0, 0), 1.0 / 16.0);
        assert_eq!(t.get(0, 3, 0, 0, 0), 1.0 / 16.0);
        assert_eq!(t.get(0, 0, 0, 0, 0), 15.0 / 16.0);
    }

    #[test]
    fn mixed_strategies_rejected() {
        let f = vec![
            FusedSample::Crf(LabelRaster::new(4, 4)),
            FusedSample::Dcf(ChannelStack::zeros(13, 4, 4)),
        ];
        assert!(matches!(extract_frame_features(&f, 2), Err(Error::Feature(_))));
        assert!(extract_frame_features(&[], 2).is_err());
        assert!(extract_frame_features(&f[..1], 5).is_err());
    }

    #[test]
    fn uneven_bands_cover_all_rows() {
        let covered: usize = (0..3).map(|b| {
            let (a, z) = band_rows(b, 3, 64);
            z - a
        }).sum();
        assert_eq!(covered, 64);
    }

    #[test]
    fn frame_permutation() {
        let t = FeatureTensor::new([1, 1, 3, 1, 1], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.permute_frames(&[2, 0, 1]).unwrap().values(), &[3.0, 1.0, 2.0]);
        assert!(t.permute_frames(&[0, 0, 1]).is_err());
    }
}
