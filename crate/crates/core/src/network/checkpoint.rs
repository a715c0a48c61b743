//! Model checkpoint container.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "MRNETCKP"
//! 8       4     format version, u32 little-endian
//! 12      4     header length H, u32 little-endian
//! 16      H     UTF-8 header: "input=..\nhidden=..\nclasses=..\n"
//! 16+H    8     parameter count P, u64 little-endian
//! 24+H    8P    parameters as f64 little-endian, in `Params::flatten` order
//! ```
//!
//! Values are stored as raw IEEE-754 bits, so save/load is bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Architecture, Params};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MRNETCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

fn header(arch: &Architecture) -> String {
    let input = arch.input_shape().iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x");
    format!("input={input}\nhidden={}\nclasses={}\n", arch.hidden_string(), arch.classes())
}

fn parse_header(text: &str, offset: u64) -> Result<Architecture> {
    let (mut input, mut hidden, mut classes) = (None, None, None);
    for line in text.lines() {
        let (k, v) = line.split_once('=').ok_or_else(|| Error::format(offset, format!("bad header line '{line}'")))?;
        match k {
            "input" => input = Some(v.to_string()),
            "hidden" => hidden = Some(v.to_string()),
            "classes" => classes = Some(v.to_string()),
            _ => return Err(Error::format(offset, format!("unknown header key '{k}'"))),
        }
    }
    let missing = |k: &str| Error::format(offset, format!("header lacks '{k}'"));
    let input: Vec<usize> = input
        .ok_or_else(|| missing("input"))?
        .split('x')
        .map(|d| d.parse().map_err(|_| Error::format(offset, format!("bad input extent '{d}'"))))
        .collect::<Result<_>>()?;
    let classes: usize = classes
        .ok_or_else(|| missing("classes"))?
        .parse()
        .map_err(|_| Error::format(offset, "bad class count"))?;
    Architecture::parse(&input, &hidden.ok_or_else(|| missing("hidden"))?, classes)
}

pub fn write_checkpoint(out: &mut impl Write, arch: &Architecture, params: &Params) -> Result<()> {
    params.validate(arch)?;
    let header = header(arch);
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u32).to_le_bytes())?;
    out.write_all(header.as_bytes())?;
    let values = params.flatten();
    out.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact(input: &mut impl Read, buf: &mut [u8], offset: &mut u64, what: &str) -> Result<()> {
    input.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(*offset, format!("truncated checkpoint while reading {what}"))
        } else {
            Error::Io(e)
        }
    })?;
    *offset += buf.len() as u64;
    Ok(())
}

pub fn read_checkpoint(input: &mut impl Read) -> Result<(Architecture, Params)> {
    let mut offset = 0u64;
    let mut magic = [0u8; 8];
    read_exact(input, &mut magic, &mut offset, "magic")?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::format(0, "not a checkpoint (bad magic)"));
    }
    let mut word = [0u8; 4];
    read_exact(input, &mut word, &mut offset, "version")?;
    let version = u32::from_le_bytes(word);
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(8, format!("unsupported checkpoint version {version}")));
    }
    read_exact(input, &mut word, &mut offset, "header length")?;
    let mut text = vec![0u8; u32::from_le_bytes(word) as usize];
    let header_at = offset;
    read_exact(input, &mut text, &mut offset, "header")?;
    let text = String::from_utf8(text).map_err(|_| Error::format(header_at, "header is not UTF-8"))?;
    let arch = parse_header(&text, header_at)?;

    let mut long = [0u8; 8];
    let count_at = offset;
    read_exact(input, &mut long, &mut offset, "parameter count")?;
    let count = u64::from_le_bytes(long) as usize;
    let expected = Params::zeros(&arch).count();
    if count != expected {
        return Err(Error::format(count_at, format!("{count} parameters stored, architecture needs {expected}")));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        read_exact(input, &mut long, &mut offset, "parameters")?;
        values.push(f64::from_le_bytes(long));
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::format(offset, "trailing bytes after parameters"));
    }
    let params = Params::unflatten(&arch, &values)?;
    Ok((arch, params))
}

pub fn save_checkpoint(path: &Path, arch: &Architecture, params: &Params) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut out, arch, params)?;
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Architecture, Params)> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let arch = Architecture::parse(&[1, 6, 6], "conv:2x3x3,pool:2,dense:5,dropout:0.5", 4).unwrap();
        let mut params = Params::init(&arch, &mut ChaCha8Rng::seed_from_u64(0));
        *params.scalar_mut(0).unwrap() = f64::MIN_POSITIVE / 3.0; // subnormal
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &arch, &params).unwrap();
        assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
        let (arch2, params2) = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(arch, arch2);
        let a: Vec<u64> = params.flatten().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = params2.flatten().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_corruption() {
        let arch = Architecture::parse(&[3], "dense:2", 2).unwrap();
        let params = Params::zeros(&arch);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &arch, &params).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(&mut bad.as_slice()), Err(Error::Format { offset: 0, .. })));

        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(read_checkpoint(&mut &truncated[..]), Err(Error::Format { .. })));

        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_checkpoint(&mut extra.as_slice()).is_err());
    }
}
