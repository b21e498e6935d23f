//! Pull-resampling of source images through a correspondence map.

use crate::image::ImageBuf;

use super::{CorrespondenceMap, RegError};

/// Sampling filter: bilinear for continuous-valued channels, nearest for
/// label channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interp {
    Bilinear,
    Nearest,
}

/// Build the registered image: every target pixel with in-bounds source
/// coordinates samples the source image; all other pixels keep the null
/// value 0 (the case mask tells them apart from true zeros). Works for any
/// channel count.
pub fn resample(
    source: &ImageBuf,
    map: &CorrespondenceMap,
    interp: Interp,
) -> Result<ImageBuf, RegError> {
    if source.width != map.source_width || source.height != map.source_height {
        return Err(RegError::ImageSizeMismatch {
            camera: map.source_id.clone(),
            got_w: source.width,
            got_h: source.height,
            got_c: source.channels,
            want_w: map.source_width,
            want_h: map.source_height,
        });
    }
    let mut out = ImageBuf::zeros(map.width, map.height, source.channels);
    for row in 0..map.height {
        for col in 0..map.width {
            let entry = map.get(col, row);
            if let Some(px) = &entry.source_px {
                for c in 0..source.channels {
                    let v = match interp {
                        Interp::Bilinear => source.sample_bilinear(px.u, px.v, c),
                        Interp::Nearest => source.sample_nearest(px.u, px.v, c),
                    };
                    out.set(col, row, c, v);
                }
            }
        }
    }
    Ok(out)
}
