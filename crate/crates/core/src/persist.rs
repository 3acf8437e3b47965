//! Binary model file.
//!
//! All integers are little-endian. Strings are a `u32` byte length followed
//! by UTF-8 bytes.
//!
//! ```text
//! header   magic "CTGN" | version u32 | body length u64
//! body     config | flags u8
//!          tokens      : u32 count, string*
//!          features    : u32 count, (kind u8, token u32 [, token u32], quality f64)*
//!          domains     : u32 count, (name string, is_driver u8)*
//!          categories  : u32 count, (domain u32, label string, quality f64, F_c f64)*
//!          cf cells    : per feature in id order:
//!                        C_f(all) f64, u32 span count, (domain u32, C_f f64, cell count u32)*,
//!                        then every cell (category u32, cf f64, confirmed u8)
//!          co-occurrence: u32 count, (category u32, domain u32, count u64)*
//!          fingerprints: u32 count, u64*
//! trailer  CRC-32 of every preceding byte, u32
//! ```
//!
//! The config block is `max_frame_distance u32, top_k u32 (0 = unbounded),
//! scoring u8, ranking u8, order_priority u8, scope u8,
//! min_matched_features u32, min_score f64, cf_formula u8, total_scope u8,
//! driver count u32, driver name string*`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::config::{CfFormula, EngineConfig, RankingMode, ScopeMode, ScoringMode, TopK, TotalScope};
use crate::error::{Error, FormatError, Result};
use crate::ids::{CategoryId, DomainId, TokenId};
use crate::model::{Category, CfCell, Domain, DomainSpan, Feature, FeatureKey, Model};

pub const MAGIC: &[u8; 4] = b"CTGN";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("table exceeds u32 range"));
    }
    fn str(&mut self, s: &str) {
        self.len(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn corrupt(msg: impl Into<String>) -> FormatError {
    FormatError::Corrupt(msg.into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| corrupt(format!("unexpected end of body at offset {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Result<usize, FormatError> {
        let n = self.u32()? as usize;
        // every counted element occupies at least one byte
        if n > self.buf.len() - self.pos {
            return Err(corrupt(format!("count {n} exceeds remaining body")));
        }
        Ok(n)
    }
    fn str(&mut self) -> Result<String, FormatError> {
        let n = self.len()?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| corrupt("invalid UTF-8 string"))
    }
    fn bool(&mut self) -> Result<bool, FormatError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(corrupt(format!("invalid boolean byte {v}"))),
        }
    }
}

fn enum_index<T: Copy + PartialEq>(all: &[T], v: T) -> u8 {
    all.iter().position(|&x| x == v).expect("variant listed in ALL") as u8
}

fn enum_at<T: Copy>(all: &[T], i: u8, what: &str) -> Result<T, FormatError> {
    all.get(i as usize).copied().ok_or_else(|| corrupt(format!("invalid {what} tag {i}")))
}

fn write_config(w: &mut Writer, c: &EngineConfig) {
    w.u32(c.max_frame_distance as u32);
    w.u32(match c.top_k {
        TopK::Unbounded => 0,
        TopK::Limit(k) => u32::try_from(k).unwrap_or(u32::MAX),
    });
    w.u8(enum_index(ScoringMode::ALL, c.scoring_mode));
    w.u8(enum_index(RankingMode::ALL, c.ranking_mode));
    w.u8(c.order_priority as u8);
    w.u8(enum_index(ScopeMode::ALL, c.scope_mode));
    w.u32(u32::try_from(c.min_matched_features).unwrap_or(u32::MAX));
    w.f64(c.min_score);
    w.u8(enum_index(CfFormula::ALL, c.cf_formula));
    w.u8(enum_index(TotalScope::ALL, c.total_scope));
    w.len(c.driver_domains.len());
    for d in &c.driver_domains {
        w.str(d);
    }
}

fn read_config(r: &mut Reader<'_>) -> Result<EngineConfig, FormatError> {
    let max_frame_distance = r.u32()? as usize;
    let top_k = match r.u32()? {
        0 => TopK::Unbounded,
        k => TopK::Limit(k as usize),
    };
    let scoring_mode = enum_at(ScoringMode::ALL, r.u8()?, "scoring mode")?;
    let ranking_mode = enum_at(RankingMode::ALL, r.u8()?, "ranking mode")?;
    let order_priority = r.bool()?;
    let scope_mode = enum_at(ScopeMode::ALL, r.u8()?, "scope mode")?;
    let min_matched_features = r.u32()? as usize;
    let min_score = r.f64()?;
    let cf_formula = enum_at(CfFormula::ALL, r.u8()?, "cf formula")?;
    let total_scope = enum_at(TotalScope::ALL, r.u8()?, "total scope")?;
    let n = r.len()?;
    let driver_domains = (0..n).map(|_| r.str()).collect::<Result<_, _>>()?;
    let config = EngineConfig {
        max_frame_distance,
        top_k,
        scoring_mode,
        ranking_mode,
        order_priority,
        scope_mode,
        min_matched_features,
        min_score,
        driver_domains,
        cf_formula,
        total_scope,
    };
    config.validate().map_err(|e| corrupt(e.to_string()))?;
    Ok(config)
}

impl Model {
    /// Serializes a frozen model.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if !self.frozen {
            return Err(Error::ModelNotFrozen);
        }
        let mut w = Writer { buf: Vec::with_capacity(HEADER_LEN + 32 * self.cell_count() + 1024) };
        w.buf.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        w.u64(0); // body length, patched below

        write_config(&mut w, &self.config);
        w.u8(self.specialized as u8);

        w.len(self.tokens.len());
        for t in &self.tokens {
            w.str(t);
        }
        w.len(self.features.len());
        for f in &self.features {
            match f.key {
                FeatureKey::Keyword(t) => {
                    w.u8(0);
                    w.u32(t.0);
                }
                FeatureKey::Frame(a, b) => {
                    w.u8(1);
                    w.u32(a.0);
                    w.u32(b.0);
                }
            }
            w.f64(f.quality);
        }
        w.len(self.domains.len());
        for d in &self.domains {
            w.str(&d.name);
            w.u8(d.is_driver as u8);
        }
        w.len(self.categories.len());
        for (c, total) in self.categories.iter().zip(&self.category_totals) {
            w.u32(c.domain.0);
            w.str(&c.label);
            w.f64(c.quality);
            w.f64(*total);
        }
        for ((cells, spans), total) in self.feature_cells.iter().zip(&self.feature_spans).zip(&self.feature_totals) {
            w.f64(*total);
            w.len(spans.len());
            for s in spans {
                w.u32(s.domain.0);
                w.f64(s.total);
                w.u32(s.end - s.start);
            }
            for cell in cells {
                w.u32(cell.category.0);
                w.f64(cell.cf);
                w.u8(cell.confirmed as u8);
            }
        }
        let cooc: Vec<(usize, DomainId, u64)> = self
            .category_domains
            .iter()
            .enumerate()
            .flat_map(|(c, row)| row.iter().map(move |&(d, n)| (c, d, n)))
            .collect();
        w.len(cooc.len());
        for (c, d, n) in cooc {
            w.u32(c as u32);
            w.u32(d.0);
            w.u64(n);
        }
        w.len(self.text_fingerprints.len());
        for fp in &self.text_fingerprints {
            w.u64(*fp);
        }

        let body_len = (w.buf.len() - HEADER_LEN) as u64;
        w.buf[8..16].copy_from_slice(&body_len.to_le_bytes());
        let crc = crc32fast::hash(&w.buf);
        w.u32(crc);
        Ok(w.buf)
    }

    /// Parses a model file. Nothing is returned unless the whole file checks out.
    pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
        let prefix = &bytes[..bytes.len().min(4)];
        if prefix != &MAGIC[..prefix.len()] {
            return Err(FormatError::BadMagic.into());
        }
        if bytes.len() < HEADER_LEN {
            return Err(FormatError::Truncated { expected: HEADER_LEN as u64, actual: bytes.len() as u64 }.into());
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(FormatError::UnsupportedVersion { found: version, expected: FORMAT_VERSION }.into());
        }
        let body_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let expected = (HEADER_LEN as u64).saturating_add(body_len).saturating_add(4);
        if (bytes.len() as u64) < expected {
            return Err(FormatError::Truncated { expected, actual: bytes.len() as u64 }.into());
        }
        if (bytes.len() as u64) > expected {
            return Err(corrupt(format!("{} trailing bytes", bytes.len() as u64 - expected)).into());
        }
        let crc_at = bytes.len() - 4;
        let stored = u32::from_le_bytes(bytes[crc_at..].try_into().unwrap());
        let computed = crc32fast::hash(&bytes[..crc_at]);
        if stored != computed {
            return Err(FormatError::ChecksumMismatch { stored, computed }.into());
        }
        let mut r = Reader { buf: &bytes[..crc_at], pos: HEADER_LEN };
        let model = read_body(&mut r)?;
        if r.pos != crc_at {
            return Err(corrupt("body length disagrees with contents").into());
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut file = fs::File::create(path)?;
        file.write_all(&bytes)?;
        file.sync_all()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        let bytes = fs::read(path)?;
        Model::from_bytes(&bytes)
    }
}

fn read_body(r: &mut Reader<'_>) -> Result<Model, FormatError> {
    let config = read_config(r)?;
    let mut m = Model::new(config);
    m.specialized = r.bool()?;

    let n = r.len()?;
    for _ in 0..n {
        let s = r.str()?;
        if s.is_empty() {
            return Err(corrupt("empty token"));
        }
        m.tokens.push(s);
    }
    let token = |t: u32, ntok: usize| -> Result<TokenId, FormatError> {
        if (t as usize) < ntok {
            Ok(TokenId(t))
        } else {
            Err(corrupt(format!("feature references unknown token {t}")))
        }
    };
    let n = r.len()?;
    let ntok = m.tokens.len();
    for _ in 0..n {
        let key = match r.u8()? {
            0 => FeatureKey::Keyword(token(r.u32()?, ntok)?),
            1 => FeatureKey::Frame(token(r.u32()?, ntok)?, token(r.u32()?, ntok)?),
            k => return Err(corrupt(format!("invalid feature kind {k}"))),
        };
        let quality = r.f64()?;
        m.features.push(Feature { key, quality });
    }
    let n = r.len()?;
    for _ in 0..n {
        let name = r.str()?;
        let is_driver = r.bool()?;
        m.domains.push(Domain { name, is_driver });
    }
    let n = r.len()?;
    for _ in 0..n {
        let domain = r.u32()?;
        if domain as usize >= m.domains.len() {
            return Err(corrupt(format!("category references unknown domain {domain}")));
        }
        let label = r.str()?;
        let quality = r.f64()?;
        let total = r.f64()?;
        m.categories.push(Category { domain: DomainId(domain), label, quality });
        m.category_totals.push(total);
        m.category_domains.push(Vec::new());
    }
    let ncat = m.categories.len();
    for _ in 0..m.features.len() {
        m.feature_totals.push(r.f64()?);
        let nspans = r.len()?;
        let mut spans = Vec::with_capacity(nspans);
        let mut start = 0u32;
        for _ in 0..nspans {
            let domain = DomainId(r.u32()?);
            let total = r.f64()?;
            let count = r.u32()?;
            let end = start.checked_add(count).ok_or_else(|| corrupt("span overflow"))?;
            spans.push(DomainSpan { domain, total, start, end });
            start = end;
        }
        let mut cells = Vec::with_capacity(start as usize);
        for s in &spans {
            for _ in s.start..s.end {
                let c = r.u32()?;
                if c as usize >= ncat || m.categories[c as usize].domain != s.domain {
                    return Err(corrupt(format!("cell references category {c} outside its span")));
                }
                let cf = r.f64()?;
                let confirmed = r.bool()?;
                cells.push(CfCell { category: CategoryId(c), cf, confirmed });
            }
        }
        m.feature_cells.push(cells);
        m.feature_spans.push(spans);
    }
    let n = r.len()?;
    for _ in 0..n {
        let c = r.u32()? as usize;
        let d = r.u32()?;
        let count = r.u64()?;
        if c >= ncat || d as usize >= m.domains.len() {
            return Err(corrupt("co-occurrence cell references unknown id"));
        }
        m.category_domains[c].push((DomainId(d), count));
    }
    let n = r.len()?;
    for _ in 0..n {
        m.text_fingerprints.push(r.u64()?);
    }
    m.frozen = true;
    m.rebuild_indexes();
    Ok(m)
}
