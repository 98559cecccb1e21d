//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic "ELGEOCKP" | u32 version | u64 dim | u64 classes | u64 relations
//! f64 margin | u8 reg mode | f64 reg radius | u8 activation | f64 slope | u64 seed
//! f64 centers[classes*dim] | f64 radii[classes] | f64 relations[relations*dim]
//! u64 n, n × (u64 len, utf-8 bytes)   class names
//! u64 n, n × (u64 len, utf-8 bytes)   relation names
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Activation, EmbeddingModel, GeometryError, ModelConfig, RegMode};
use crate::kb::Signature;

const MAGIC: &[u8; 8] = b"ELGEOCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

fn io(e: std::io::Error) -> GeometryError {
    GeometryError::Checkpoint(e.to_string())
}

fn put_f64s<W: Write>(w: &mut W, xs: &[f64]) -> std::io::Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn put_names<W: Write>(w: &mut W, names: &[String]) -> std::io::Result<()> {
    w.write_all(&(names.len() as u64).to_le_bytes())?;
    for n in names {
        w.write_all(&(n.len() as u64).to_le_bytes())?;
        w.write_all(n.as_bytes())?;
    }
    Ok(())
}

pub fn write_checkpoint<W: Write>(model: &EmbeddingModel, sig: &Signature, mut w: W) -> Result<(), GeometryError> {
    if sig.num_classes() != model.num_classes() || sig.num_relations() != model.num_relations() {
        return Err(GeometryError::Checkpoint(format!(
            "signature has {} classes and {} relations, model has {} and {}",
            sig.num_classes(),
            sig.num_relations(),
            model.num_classes(),
            model.num_relations()
        )));
    }
    let cfg = model.config();
    let reg = match cfg.reg_mode {
        RegMode::Strict => 0u8,
        RegMode::Relaxed => 1,
    };
    let (act, slope) = match cfg.activation {
        Activation::Relu => (0u8, 0.0),
        Activation::LeakyRelu { slope } => (1, slope),
    };
    let mut go = || -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        for n in [cfg.dim, model.num_classes(), model.num_relations()] {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        w.write_all(&cfg.margin.to_le_bytes())?;
        w.write_all(&[reg])?;
        w.write_all(&cfg.reg_radius.to_le_bytes())?;
        w.write_all(&[act])?;
        w.write_all(&slope.to_le_bytes())?;
        w.write_all(&model.seed().to_le_bytes())?;
        let (c, r, l) = model.params();
        put_f64s(&mut w, c)?;
        put_f64s(&mut w, r)?;
        put_f64s(&mut w, l)?;
        put_names(&mut w, sig.class_names())?;
        put_names(&mut w, sig.relation_names())?;
        w.flush()
    };
    go().map_err(io)
}

struct Reader<R> {
    r: R,
}

impl<R: Read> Reader<R> {
    fn fill(&mut self, buf: &mut [u8]) -> Result<(), GeometryError> {
        self.r.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => GeometryError::Checkpoint("truncated file".into()),
            _ => io(e),
        })
    }

    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], GeometryError> {
        let mut b = [0u8; N];
        self.fill(&mut b)?;
        Ok(b)
    }

    fn u8(&mut self) -> Result<u8, GeometryError> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u64(&mut self) -> Result<u64, GeometryError> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn len(&mut self, limit: u64) -> Result<usize, GeometryError> {
        let n = self.u64()?;
        if n > limit {
            return Err(GeometryError::Checkpoint(format!("implausible length {n}")));
        }
        Ok(n as usize)
    }

    fn f64(&mut self) -> Result<f64, GeometryError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, GeometryError> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn names(&mut self) -> Result<Vec<String>, GeometryError> {
        let n = self.len(1 << 32)?;
        let mut out = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let len = self.len(1 << 24)?;
            let mut buf = vec![0u8; len];
            self.fill(&mut buf)?;
            out.push(String::from_utf8(buf).map_err(|_| GeometryError::Checkpoint("identifier is not UTF-8".into()))?);
        }
        Ok(out)
    }
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<(EmbeddingModel, Signature), GeometryError> {
    let mut rd = Reader { r };
    if &rd.bytes::<8>()? != MAGIC {
        return Err(GeometryError::Checkpoint("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(rd.bytes()?);
    if version != CHECKPOINT_VERSION {
        return Err(GeometryError::Checkpoint(format!("unsupported version {version}")));
    }
    let dim = rd.len(1 << 20)?;
    let nc = rd.len(1 << 32)?;
    let nr = rd.len(1 << 32)?;
    let margin = rd.f64()?;
    let reg_mode = match rd.u8()? {
        0 => RegMode::Strict,
        1 => RegMode::Relaxed,
        x => return Err(GeometryError::Checkpoint(format!("unknown regularization tag {x}"))),
    };
    let reg_radius = rd.f64()?;
    let act = rd.u8()?;
    let slope = rd.f64()?;
    let activation = match act {
        0 => Activation::Relu,
        1 => Activation::LeakyRelu { slope },
        x => return Err(GeometryError::Checkpoint(format!("unknown activation tag {x}"))),
    };
    let seed = rd.u64()?;
    let centers = rd.f64s(nc * dim)?;
    let radii = rd.f64s(nc)?;
    let relations = rd.f64s(nr * dim)?;
    let classes = rd.names()?;
    let rels = rd.names()?;
    if classes.len() != nc || rels.len() != nr {
        return Err(GeometryError::Checkpoint("identifier tables do not match the header".into()));
    }
    let sig = Signature::from_tables(classes, rels)
        .ok_or_else(|| GeometryError::Checkpoint("invalid identifier tables".into()))?;
    let config = ModelConfig {
        dim,
        margin,
        reg_mode,
        reg_radius,
        activation,
    };
    Ok((EmbeddingModel::from_parts(config, seed, centers, radii, relations), sig))
}

pub fn save_checkpoint(model: &EmbeddingModel, sig: &Signature, path: &Path) -> Result<(), GeometryError> {
    let f = File::create(path).map_err(|e| GeometryError::Checkpoint(format!("{}: {e}", path.display())))?;
    write_checkpoint(model, sig, BufWriter::new(f))
}

pub fn load_checkpoint(path: &Path) -> Result<(EmbeddingModel, Signature), GeometryError> {
    let f = File::open(path).map_err(|e| GeometryError::Checkpoint(format!("{}: {e}", path.display())))?;
    read_checkpoint(BufReader::new(f))
}
