//! Temporal and horizontal pooling.

use crate::error::{Error, Result};
use crate::gaitlab::features::FeatureTensor;

/// Frame-pooled `n × c × h × w` volume.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledTensor {
    dims: [usize; 4],
    values: Vec<f64>,
}

impl PooledTensor {
    pub fn new(dims: [usize; 4], values: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) || dims.iter().product::<usize>() != values.len() {
            return Err(Error::Pooling(format!(
                "dims {dims:?} do not fit {} values",
                values.len()
            )));
        }
        Ok(PooledTensor { dims, values })
    }

    /// `[n, c, h, w]`
    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, n: usize, c: usize, h: usize, w: usize) -> f64 {
        let [_, dc, dh, dw] = self.dims;
        self.values[((n * dc + c) * dh + h) * dw + w]
    }

    pub fn scaled(&self, k: f64) -> PooledTensor {
        PooledTensor {
            dims: self.dims,
            values: self.values.iter().map(|v| v * k).collect(),
        }
    }
}

/// One sample's stripe features, `stripes × channels`, stripe-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StripeFeature {
    pub stripes: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl StripeFeature {
    pub fn get(&self, stripe: usize, channel: usize) -> f64 {
        self.values[stripe * self.channels + channel]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Element-wise maximum over frames.
pub fn temporal_pool(f: &FeatureTensor) -> PooledTensor {
    let [n, c, s, h, w] = f.dims();
    let hw = h * w;
    let mut out = Vec::with_capacity(n * c * hw);
    for ni in 0..n {
        for ci in 0..c {
            let base = f.index(ni, ci, 0, 0, 0);
            let mut acc = f.values()[base..base + hw].to_vec();
            for si in 1..s {
                let start = base + si * hw;
                for (a, &v) in acc.iter_mut().zip(&f.values()[start..start + hw]) {
                    *a = a.max(v);
                }
            }
            out.extend(acc);
        }
    }
    PooledTensor {
        dims: [n, c, h, w],
        values: out,
    }
}

/// Splits `h` into `stripes` equal bands; per band and channel the output is
/// max + mean over the band's `(h/stripes) × w` cells.
pub fn horizontal_pool(z: &PooledTensor, stripes: usize) -> Result<Vec<StripeFeature>> {
    let [n, c, h, w] = z.dims();
    if stripes == 0 || h % stripes != 0 {
        return Err(Error::Pooling(format!(
            "height {h} is not divisible into {stripes} stripes"
        )));
    }
    let rows = h / stripes;
    let cells = (rows * w) as f64;
    let mut out = Vec::with_capacity(n);
    for ni in 0..n {
        let mut values = vec![0.0; stripes * c];
        for st in 0..stripes {
            for ci in 0..c {
                let mut mx = f64::NEG_INFINITY;
                let mut sum = 0.0;
                for hi in st * rows..(st + 1) * rows {
                    for wi in 0..w {
                        let v = z.get(ni, ci, hi, wi);
                        mx = mx.max(v);
                        sum += v;
                    }
                }
                values[st * c + ci] = mx + sum / cells;
            }
        }
        out.push(StripeFeature {
            stripes,
            channels: c,
            values,
        });
    }
    Ok(out)
}
