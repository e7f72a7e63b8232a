//! Encoder architecture, parameters and the `ENC1` checkpoint format.
//!
//! `ENC1` layout: the magic `ENC1`, one ASCII architecture descriptor line
//! terminated by `\n`, then every parameter blob in declaration order, each
//! as a little-endian `u32` value count followed by that many `f32`s.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::Real;
use crate::projection::{parse_view_list, ProjectionView};
use crate::synth::unit_f64;
use crate::{seed, Error, Result};

/// What the network sees in each pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputMode {
    Depth,
    Silhouette,
}

impl InputMode {
    pub fn name(self) -> &'static str {
        match self {
            InputMode::Depth => "depth",
            InputMode::Silhouette => "silhouette",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConvSpec {
    pub out_channels: usize,
    /// 2×2 max pooling after the activation.
    pub pool: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Architecture {
    /// One convolutional branch per projection view.
    pub views: Vec<ProjectionView>,
    pub input: InputMode,
    pub conv: Vec<ConvSpec>,
    /// Horizontal strips pooled independently.
    pub parts: usize,
    pub embed_dim: usize,
    pub n_classes: usize,
}

impl Architecture {
    /// 3×3 convolutions 32, 32, pool, 64, 64, pool, 128, 128; four strips of
    /// 128-d part embeddings.
    pub fn standard(views: Vec<ProjectionView>, n_classes: usize) -> Self {
        let c = |out_channels, pool| ConvSpec { out_channels, pool };
        Self {
            views,
            input: InputMode::Depth,
            conv: vec![
                c(32, false),
                c(32, true),
                c(64, false),
                c(64, true),
                c(128, false),
                c(128, false),
            ],
            parts: 4,
            embed_dim: 128,
            n_classes,
        }
    }

    pub fn with_input(mut self, input: InputMode) -> Self {
        self.input = input;
        self
    }

    /// Channels of one branch's output map.
    pub fn branch_channels(&self) -> usize {
        self.conv.last().map_or(1, |c| c.out_channels)
    }

    /// Channels after frame-level concatenation of all branches.
    pub fn fused_channels(&self) -> usize {
        self.branch_channels() * self.views.len()
    }

    /// Spatial downscale factor of a branch.
    pub fn stride(&self) -> usize {
        1 << self.conv.iter().filter(|c| c.pool).count()
    }

    pub fn embedding_len(&self) -> usize {
        self.parts * self.embed_dim
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidArgument(format!("architecture: {why}")));
        if self.views.is_empty() {
            return bad("no views");
        }
        if self.conv.is_empty() || self.conv.iter().any(|c| c.out_channels == 0) {
            return bad("empty conv stack");
        }
        if self.parts == 0 || self.embed_dim == 0 {
            return bad("parts and embed_dim must be positive");
        }
        if self.n_classes < 2 {
            return bad("need at least 2 classes");
        }
        Ok(())
    }

    /// Shapes of all parameter blobs in declaration order.
    pub fn blob_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = Vec::new();
        for _ in &self.views {
            let mut cin = 1;
            for c in &self.conv {
                shapes.push(vec![c.out_channels, cin * 9]);
                shapes.push(vec![c.out_channels]);
                cin = c.out_channels;
            }
        }
        shapes.push(vec![self.parts, self.embed_dim, self.fused_channels()]);
        shapes.push(vec![self.parts, self.n_classes, self.embed_dim]);
        shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.blob_shapes()
            .iter()
            .map(|s| s.iter().product::<usize>())
            .sum()
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let views: Vec<&str> = self.views.iter().map(|v| v.short_name()).collect();
        let conv: Vec<String> = self
            .conv
            .iter()
            .map(|c| format!("{}{}", c.out_channels, if c.pool { "p" } else { "" }))
            .collect();
        write!(
            f,
            "views={};input={};conv={};parts={};embed={};classes={}",
            views.join(","),
            self.input.name(),
            conv.join(","),
            self.parts,
            self.embed_dim,
            self.n_classes
        )
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::format("architecture descriptor", s.to_string());
        let mut views = None;
        let mut input = None;
        let mut conv = None;
        let (mut parts, mut embed, mut classes) = (None, None, None);
        for field in s.trim().split(';') {
            let (key, value) = field.split_once('=').ok_or_else(bad)?;
            let num = || value.parse::<usize>().map_err(|_| bad());
            match key {
                "views" => views = Some(parse_view_list(value)?),
                "input" => {
                    input = Some(match value {
                        "depth" => InputMode::Depth,
                        "silhouette" => InputMode::Silhouette,
                        _ => return Err(bad()),
                    })
                }
                "conv" => {
                    conv = Some(
                        value
                            .split(',')
                            .map(|t| {
                                let pool = t.ends_with('p');
                                let n = t.trim_end_matches('p').parse().map_err(|_| bad())?;
                                Ok(ConvSpec {
                                    out_channels: n,
                                    pool,
                                })
                            })
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "parts" => parts = Some(num()?),
                "embed" => embed = Some(num()?),
                "classes" => classes = Some(num()?),
                _ => return Err(bad()),
            }
        }
        let arch = Architecture {
            views: views.ok_or_else(bad)?,
            input: input.ok_or_else(bad)?,
            conv: conv.ok_or_else(bad)?,
            parts: parts.ok_or_else(bad)?,
            embed_dim: embed.ok_or_else(bad)?,
            n_classes: classes.ok_or_else(bad)?,
        };
        arch.validate()?;
        Ok(arch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub pool: bool,
    /// `out × (in·9)`, kernel taps in row-major `(channel, dy, dx)` order.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// All learnable weights. Also used, with the same shapes, for gradients
/// and optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    pub arch: Architecture,
    /// `branches[view][layer]`.
    pub branches: Vec<Vec<ConvLayer<T>>>,
    /// `parts × embed × fused_channels`.
    pub part_maps: Vec<T>,
    /// `parts × classes × embed`.
    pub classifier: Vec<T>,
}

impl<T: Real> EncoderParams<T> {
    pub fn zeros(arch: &Architecture) -> Self {
        let branches = arch
            .views
            .iter()
            .map(|_| {
                let mut cin = 1;
                arch.conv
                    .iter()
                    .map(|c| {
                        let layer = ConvLayer {
                            in_channels: cin,
                            out_channels: c.out_channels,
                            pool: c.pool,
                            weight: vec![T::zero(); c.out_channels * cin * 9],
                            bias: vec![T::zero(); c.out_channels],
                        };
                        cin = c.out_channels;
                        layer
                    })
                    .collect()
            })
            .collect();
        Self {
            arch: arch.clone(),
            branches,
            part_maps: vec![T::zero(); arch.parts * arch.embed_dim * arch.fused_channels()],
            classifier: vec![T::zero(); arch.parts * arch.n_classes * arch.embed_dim],
        }
    }

    /// Fan-in scaled uniform initialization, biases zero.
    ///
    /// Convolutions draw from `U(−√(6/fan_in), √(6/fan_in))` (fan_in = in·9),
    /// part maps and classifier from `U(−√(3/fan_in), √(3/fan_in))`. Every
    /// blob has its own xoshiro256++ stream derived from `seed`.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut params = Self::zeros(arch);
        let fill = |blob: &mut [T], fan_in: usize, gain: f64, stream: u64| {
            let bound = (gain / fan_in as f64).sqrt();
            let mut rng = seed::rng(seed::derive(seed, &[stream]));
            for w in blob.iter_mut() {
                *w = T::from_f64(bound * (2.0 * unit_f64(&mut rng) - 1.0));
            }
        };
        let mut stream = 0u64;
        for branch in &mut params.branches {
            for layer in branch.iter_mut() {
                fill(&mut layer.weight, layer.in_channels * 9, 6.0, stream);
                stream += 1;
            }
        }
        fill(&mut params.part_maps, arch.fused_channels(), 3.0, 1000);
        fill(&mut params.classifier, arch.embed_dim, 3.0, 1001);
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.arch)
    }

    /// Parameter blobs in declaration order.
    pub fn blobs(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for branch in &self.branches {
            for layer in branch {
                out.push(&layer.weight);
                out.push(&layer.bias);
            }
        }
        out.push(&self.part_maps);
        out.push(&self.classifier);
        out
    }

    pub fn blobs_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for branch in &mut self.branches {
            for layer in branch.iter_mut() {
                out.push(&mut layer.weight);
                out.push(&mut layer.bias);
            }
        }
        out.push(&mut self.part_maps);
        out.push(&mut self.classifier);
        out
    }

    /// `self += other`, blob by blob in a fixed order.
    pub fn accumulate(&mut self, other: &Self) {
        for (dst, src) in self.blobs_mut().into_iter().zip(other.blobs()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += *s;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for blob in self.blobs_mut() {
            blob.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blobs().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn cast<U: Real>(&self) -> EncoderParams<U> {
        let mut out = EncoderParams::<U>::zeros(&self.arch);
        for (dst, src) in out.blobs_mut().into_iter().zip(self.blobs()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = U::from_f64(Real::to_f64(*s));
            }
        }
        out
    }

    pub fn to_enc1(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(ENC_MAGIC);
        out.extend_from_slice(self.arch.to_string().as_bytes());
        out.push(b'\n');
        for blob in self.blobs() {
            out.extend_from_slice(&(blob.len() as u32).to_le_bytes());
            for v in blob {
                out.extend_from_slice(&(Real::to_f64(*v) as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_enc1(bytes: &[u8]) -> Result<Self> {
        let bad = |why: &str| Error::format("ENC1", why);
        if bytes.len() < 4 || &bytes[..4] != ENC_MAGIC {
            return Err(bad("missing magic"));
        }
        let eol = bytes[4..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("missing descriptor line"))?;
        let descriptor =
            std::str::from_utf8(&bytes[4..4 + eol]).map_err(|_| bad("descriptor is not ASCII"))?;
        let arch: Architecture = descriptor.parse()?;
        let mut params = Self::zeros(&arch);
        let mut pos = 5 + eol;
        for blob in params.blobs_mut() {
            let header = bytes.get(pos..pos + 4).ok_or_else(|| bad("truncated"))?;
            let n = u32::from_le_bytes(header.try_into().unwrap()) as usize;
            if n != blob.len() {
                return Err(bad("blob size does not match the architecture"));
            }
            pos += 4;
            let body = bytes
                .get(pos..pos + 4 * n)
                .ok_or_else(|| bad("truncated"))?;
            for (dst, chunk) in blob.iter_mut().zip(body.chunks_exact(4)) {
                *dst = T::from_f64(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
            }
            pos += 4 * n;
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_enc1()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_enc1(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

pub const ENC_MAGIC: &[u8; 4] = b"ENC1";

/// Reads only the architecture line of a checkpoint.
pub fn read_architecture(path: &Path) -> Result<Architecture> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 4 || &bytes[..4] != ENC_MAGIC {
        return Err(Error::format("ENC1", "missing magic"));
    }
    let eol = bytes[4..]
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format("ENC1", "missing descriptor line"))?;
    std::str::from_utf8(&bytes[4..4 + eol])
        .map_err(|_| Error::format("ENC1", "descriptor is not ASCII"))?
        .parse()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch() -> Architecture {
        Architecture::standard(vec![ProjectionView::RangeView], 30)
    }

    #[test]
    fn descriptor_round_trip() {
        let a = Architecture::standard(
            vec![ProjectionView::RangeView, ProjectionView::RightSideView],
            12,
        )
        .with_input(InputMode::Silhouette);
        let text = a.to_string();
        assert_eq!(
            text,
            "views=rv,rsv;input=silhouette;conv=32,32p,64,64p,128,128;parts=4;embed=128;classes=12"
        );
        assert_eq!(text.parse::<Architecture>().unwrap(), a);
        assert!("views=rv".parse::<Architecture>().is_err());
    }

    #[test]
    fn shapes_of_standard_encoder() {
        let a = arch();
        assert_eq!(a.branch_channels(), 128);
        assert_eq!(a.stride(), 4);
        assert_eq!(a.embedding_len(), 512);
        let shapes = a.blob_shapes();
        assert_eq!(shapes[0], vec![32, 9]);
        assert_eq!(shapes[2], vec![32, 288]);
        assert_eq!(shapes[12], vec![4, 128, 128]);
        assert_eq!(shapes[13], vec![4, 30, 128]);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = EncoderParams::<f32>::init(&arch(), 5).unwrap();
        let b = EncoderParams::<f32>::init(&arch(), 5).unwrap();
        let c = EncoderParams::<f32>::init(&arch(), 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bound = (6.0f32 / 288.0).sqrt();
        assert!(a.branches[0][1].weight.iter().all(|w| w.abs() <= bound));
        assert!(a.branches[0][1].bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn enc1_round_trip() {
        let a = Architecture {
            conv: vec![ConvSpec {
                out_channels: 3,
                pool: true,
            }],
            embed_dim: 5,
            ..Architecture::standard(vec![ProjectionView::BirdsEyeView], 2)
        };
        let p = EncoderParams::<f32>::init(&a, 1).unwrap();
        let bytes = p.to_enc1();
        assert!(bytes.starts_with(b"ENC1views=bev;input=depth;conv=3p;parts=4;embed=5;classes=2\n"));
        assert_eq!(EncoderParams::<f32>::from_enc1(&bytes).unwrap(), p);
        assert!(EncoderParams::<f32>::from_enc1(&bytes[..bytes.len() - 1]).is_err());
    }
}
