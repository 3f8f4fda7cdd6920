//! Portable network checkpoints.
//!
//! Layout:
//!
//! ```text
//! <JSON header>\n<space padding>   bytes [0, data_offset)
//! <num_params little-endian f64>   bytes [data_offset, data_offset + 8 * num_params)
//! ```
//!
//! The header is a single-line JSON object:
//!
//! ```text
//! {"format":"mbom-mlp","version":1,"spec":{...},"param_version":N,"num_params":P,"data_offset":D}
//! ```
//!
//! `version` is the format version, `param_version` the parameter set's update
//! counter. `data_offset` is a multiple of 8. Parameters are stored in the
//! order of [`ParamSet::to_flat`]. `f32` networks are widened to `f64` on
//! write, which is exact, so every round trip is bit-exact.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Mlp, NetSpec, ParamSet};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FORMAT_NAME: &str = "mbom-mlp";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    spec: NetSpec,
    param_version: u64,
    num_params: usize,
    data_offset: usize,
}

fn render_header(spec: &NetSpec, param_version: u64) -> Result<Vec<u8>> {
    let mut header = Header {
        format: FORMAT_NAME.to_owned(),
        version: FORMAT_VERSION,
        spec: spec.clone(),
        param_version,
        num_params: spec.num_params(),
        data_offset: 0,
    };
    // The offset is written inside the header, so iterate until it is self-consistent.
    loop {
        let mut bytes = serde_json::to_vec(&header)?;
        bytes.push(b'\n');
        let padded = bytes.len().div_ceil(8) * 8;
        if padded == header.data_offset {
            bytes.resize(padded, b' ');
            return Ok(bytes);
        }
        header.data_offset = padded;
    }
}

pub fn to_bytes<S: Scalar>(net: &Mlp<S>) -> Result<Vec<u8>> {
    let mut out = render_header(net.spec(), net.version())?;
    out.reserve(net.spec().num_params() * 8);
    for v in net.params().iter() {
        out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    Ok(out)
}

pub fn from_bytes<S: Scalar>(bytes: &[u8]) -> Result<Mlp<S>> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("checkpoint header is not terminated".into()))?;
    let header: Header = serde_json::from_slice(&bytes[..newline])?;
    if header.format != FORMAT_NAME {
        return Err(Error::Format(format!("unknown checkpoint format {:?}", header.format)));
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {}", header.version)));
    }
    header.spec.validate()?;
    if header.num_params != header.spec.num_params() {
        return Err(Error::Format("parameter count does not match the topology".into()));
    }
    let end = header.data_offset + 8 * header.num_params;
    if header.data_offset <= newline || bytes.len() != end {
        return Err(Error::Format(format!(
            "checkpoint has {} bytes, expected {}",
            bytes.len(),
            end
        )));
    }
    let flat: Vec<S> = bytes[header.data_offset..end]
        .chunks_exact(8)
        .map(|c| {
            let v = f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
            S::from_f64(v).unwrap_or_else(S::nan)
        })
        .collect();
    let params = ParamSet::from_flat(&header.spec, &flat, header.param_version)?;
    Mlp::new(header.spec, params)
}

pub fn write<S: Scalar, W: Write>(net: &Mlp<S>, mut w: W) -> Result<()> {
    w.write_all(&to_bytes(net)?)?;
    Ok(())
}

pub fn read<S: Scalar, R: Read>(mut r: R) -> Result<Mlp<S>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

pub fn save<S: Scalar>(net: &Mlp<S>, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, to_bytes(net)?)?;
    Ok(())
}

pub fn load<S: Scalar>(path: &std::path::Path) -> Result<Mlp<S>> {
    from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::OutputHead;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn header_fields_and_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::<f64>::init(NetSpec::mlp(3, &[4], 2, OutputHead::Softmax).unwrap(), &mut rng).unwrap();
        let bytes = to_bytes(&net).unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let header: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
        let offset = header["data_offset"].as_u64().unwrap() as usize;
        assert_eq!(offset % 8, 0);
        assert_eq!(header["version"], 1);
        assert_eq!(header["spec"]["output_head"], "softmax");
        assert_eq!(bytes.len(), offset + 8 * net.spec().num_params());
        let first = f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
        assert_eq!(first.to_bits(), net.params().to_flat()[0].to_bits());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let net = Mlp::<f64>::zeros(NetSpec::mlp(2, &[2], 2, OutputHead::Linear).unwrap()).unwrap();
        let mut bytes = to_bytes(&net).unwrap();
        bytes.pop();
        assert!(from_bytes::<f64>(&bytes).is_err());
    }

    #[test]
    fn f32_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = Mlp::<f32>::init(NetSpec::mlp(3, &[5], 2, OutputHead::Linear).unwrap(), &mut rng).unwrap();
        let back: Mlp<f32> = from_bytes(&to_bytes(&net).unwrap()).unwrap();
        assert_eq!(back, net);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), hidden in 1usize..9, version in any::<u32>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = NetSpec::mlp(3, &[hidden, 4], 2, OutputHead::Linear).unwrap();
            let mut params = ParamSet::<f64>::init(&spec, &mut rng);
            params.version = version as u64;
            let net = Mlp::new(spec, params).unwrap();
            let back: Mlp<f64> = from_bytes(&to_bytes(&net).unwrap()).unwrap();
            prop_assert_eq!(back.version(), net.version());
            let a: Vec<u64> = back.params().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = net.params().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
