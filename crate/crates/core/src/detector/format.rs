//! Flat binary model exchange format.
//!
//! ```text
//! "MRSN"  u32 version
//! u32 input_size  u32 stem_channels  u32 stem_kernel  u32 stem_stride
//! u32 width[4]  u32 num_classes  u64 seed
//! u64 value_count  f32 values[value_count]
//! ```
//!
//! All integers and floats are little-endian. Values follow the network's
//! topological order: stem conv weight, stem BN (gamma, beta, running mean,
//! running var), then for each of the eight blocks conv1 weight, bn1, conv2
//! weight, bn2 and, for downsampling blocks, the projection conv weight and
//! its BN; finally the linear weight (`[2][in]`) and bias. Convolution weights
//! are `[out][in][ky][kx]`.

use std::path::Path;

use super::resnet::StateRef;
use super::{build_mini_resnet, DetectorError, MiniResNet, MiniResNetConfig, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"MRSN";
pub const MODEL_VERSION: u32 = 1;

pub fn model_to_bytes(model: &MiniResNet) -> Vec<u8> {
    let cfg = model.config();
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    let header = [
        MODEL_VERSION,
        cfg.input_size as u32,
        cfg.stem_channels as u32,
        cfg.stem_kernel as u32,
        cfg.stem_stride as u32,
        cfg.layer_widths[0] as u32,
        cfg.layer_widths[1] as u32,
        cfg.layer_widths[2] as u32,
        cfg.layer_widths[3] as u32,
        cfg.num_classes as u32,
    ];
    for v in header {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&cfg.seed.to_le_bytes());
    let mut model = model.clone();
    let mut values = Vec::new();
    model.for_each_state(&mut |s| values.extend(s.values().iter().map(|&v| v as f32)));
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Option<[u8; N]> {
        let chunk = self.bytes.get(self.pos..self.pos + N)?;
        self.pos += N;
        chunk.try_into().ok()
    }

    fn u32(&mut self) -> Option<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Option<u64> {
        self.take::<8>().map(u64::from_le_bytes)
    }
}

pub fn model_from_bytes(bytes: &[u8], path: &Path) -> Result<MiniResNet> {
    let fail = |msg: String| DetectorError::Format { path: path.into(), msg };
    let truncated = || fail("truncated model file".into());
    let mut r = Reader { bytes, pos: 0 };
    if r.take::<4>().as_ref() != Some(MODEL_MAGIC) {
        return Err(fail("missing MRSN magic".into()));
    }
    let version = r.u32().ok_or_else(truncated)?;
    if version != MODEL_VERSION {
        return Err(fail(format!("unsupported model version {version}")));
    }
    let mut h = [0usize; 9];
    for v in &mut h {
        *v = r.u32().ok_or_else(truncated)? as usize;
    }
    let cfg = MiniResNetConfig {
        input_size: h[0],
        stem_channels: h[1],
        stem_kernel: h[2],
        stem_stride: h[3],
        layer_widths: [h[4], h[5], h[6], h[7]],
        num_classes: h[8],
        seed: r.u64().ok_or_else(truncated)?,
    };
    let mut model = build_mini_resnet(&cfg).map_err(|e| fail(e.to_string()))?;
    let count = r.u64().ok_or_else(truncated)?;
    let expected = model.state_len() as u64;
    if count != expected {
        return Err(fail(format!("{count} values stored, architecture needs {expected}")));
    }
    let mut values = Vec::with_capacity(count as usize);
    for _ in 0..count {
        values.push(f32::from_le_bytes(r.take::<4>().ok_or_else(truncated)?) as f64);
    }
    if r.pos != bytes.len() {
        return Err(fail(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let mut it = values.into_iter();
    model.for_each_state(&mut |mut s: StateRef<'_>| {
        s.values_mut().iter_mut().for_each(|v| *v = it.next().expect("length checked"));
    });
    Ok(model)
}

pub fn save_model(model: &MiniResNet, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_bytes(model)).map_err(|source| DetectorError::Io { path: path.into(), source })
}

pub fn load_model(path: &Path) -> Result<MiniResNet> {
    let bytes = std::fs::read(path).map_err(|source| DetectorError::Io { path: path.into(), source })?;
    model_from_bytes(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> MiniResNetConfig {
        MiniResNetConfig { input_size: 32, stem_channels: 3, layer_widths: [3, 4, 5, 6], seed: 11, ..Default::default() }
    }

    #[test]
    fn round_trip_is_exact() {
        let mut m = build_mini_resnet(&cfg()).unwrap();
        // perturb running statistics so they are not defaults
        m.for_each_state(&mut |mut s| {
            if let StateRef::Buffer(_) = s {
                s.values_mut().iter_mut().enumerate().for_each(|(i, v)| *v = (0.25 * i as f64) as f32 as f64);
            }
        });
        let bytes = model_to_bytes(&m);
        assert_eq!(&bytes[..4], b"MRSN");
        let back = model_from_bytes(&bytes, Path::new("m")).unwrap();
        assert_eq!(back, m);
        assert_eq!(model_to_bytes(&back), bytes);
    }

    #[test]
    fn header_layout() {
        let m = build_mini_resnet(&cfg()).unwrap();
        let bytes = model_to_bytes(&m);
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        assert_eq!(u32_at(4), 1);
        assert_eq!(u32_at(8), 32);
        assert_eq!([u32_at(24), u32_at(28), u32_at(32), u32_at(36)], [3, 4, 5, 6]);
        assert_eq!(u64::from_le_bytes(bytes[44..52].try_into().unwrap()), 11);
        let count = u64::from_le_bytes(bytes[52..60].try_into().unwrap()) as usize;
        assert_eq!(bytes.len(), 60 + 4 * count);
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = model_to_bytes(&build_mini_resnet(&cfg()).unwrap());
        let p = Path::new("m");
        assert!(model_from_bytes(&bytes[..bytes.len() - 1], p).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(model_from_bytes(&bad, p).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(model_from_bytes(&extra, p).is_err());
        let mut ver = bytes;
        ver[4] = 9;
        assert!(model_from_bytes(&ver, p).is_err());
    }
}
