//! Variable-length mode built on top of the block ABE scheme.
//!
//! A fresh 256-bit data key is encapsulated under the ABE policy (the
//! header); the data is split into fixed-size chunks, each sealed with
//! AES-256-GCM under the data key. Every chunk's associated data binds the
//! header digest, the chunk geometry and the chunk index, so chunks cannot be
//! reordered or moved between resources.

use std::fmt;
use std::ops::Range;

use aes_gcm::aead::{AeadInPlace, KeyInit};
use aes_gcm::{Aes256Gcm, Nonce, Tag};
use sha2::{Digest, Sha256};

use super::{Abe, AbeCiphertext, AbeError, AbePrivateKey, AbePublicParams, SecureRng};
use crate::policy::PolicyExpr;
use crate::wire::{Reader, WireError, Writer};

pub const DEFAULT_CHUNK_SIZE: u32 = 64 * 1024;

const CHAIN_VERSION: u8 = 1;
const SLICE_VERSION: u8 = 1;
const MANIFEST_VERSION: u8 = 1;
const CHUNK_LIST_VERSION: u8 = 1;
const CHUNK_AAD_LABEL: &[u8] = b"cpabe-dss chain chunk v1";

#[derive(Clone, PartialEq, Eq)]
pub struct DataKey([u8; 32]);

impl fmt::Debug for DataKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DataKey(..)")
    }
}

/// Geometry every chunk of one resource version is bound to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkContext {
    pub header_digest: [u8; 32],
    pub chunk_size: u32,
    pub total_len: u64,
}

impl ChunkContext {
    fn aad(&self, index: u32) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(CHUNK_AAD_LABEL)
            .raw(&self.header_digest)
            .u32(self.chunk_size)
            .u64(self.total_len)
            .u32(index);
        w.finish()
    }

    pub fn chunk_count(&self) -> u32 {
        chunk_count(self.total_len, self.chunk_size)
    }

    pub fn chunk_len(&self, index: u32) -> usize {
        let start = index as u64 * self.chunk_size as u64;
        self.total_len.saturating_sub(start).min(self.chunk_size as u64) as usize
    }

    /// Chunk indices covering the byte range.
    pub fn chunks_covering(&self, range: &Range<u64>) -> Result<Range<u32>, AbeError> {
        if range.start > range.end || range.end > self.total_len {
            return Err(AbeError::RangeOutOfBounds {
                start: range.start,
                end: range.end,
                len: self.total_len,
            });
        }
        if range.start == range.end {
            return Ok(0..0);
        }
        let cs = self.chunk_size as u64;
        Ok((range.start / cs) as u32..range.end.div_ceil(cs) as u32)
    }
}

fn chunk_count(total_len: u64, chunk_size: u32) -> u32 {
    total_len.div_ceil(chunk_size as u64) as u32
}

impl DataKey {
    pub fn generate(rng: &mut dyn SecureRng) -> Self {
        let mut k = [0u8; 32];
        rng.fill_bytes(&mut k);
        Self(k)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, AbeError> {
        let k: [u8; 32] = bytes
            .try_into()
            .map_err(|_| AbeError::Malformed("data key length".into()))?;
        Ok(Self(k))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    fn cipher(&self) -> Aes256Gcm {
        Aes256Gcm::new_from_slice(&self.0).expect("32-byte key")
    }

    pub fn seal_chunk(&self, ctx: &ChunkContext, index: u32, plaintext: &[u8], rng: &mut dyn SecureRng) -> ChainChunk {
        let mut nonce = [0u8; 12];
        rng.fill_bytes(&mut nonce);
        let mut buf = plaintext.to_vec();
        let tag = self
            .cipher()
            .encrypt_in_place_detached(Nonce::from_slice(&nonce), &ctx.aad(index), &mut buf)
            .expect("chunk within AES-GCM limits");
        ChainChunk {
            index,
            nonce,
            ciphertext: buf,
            tag: tag.into(),
        }
    }

    pub fn open_chunk(&self, ctx: &ChunkContext, chunk: &ChainChunk) -> Result<Vec<u8>, AbeError> {
        if chunk.ciphertext.len() != ctx.chunk_len(chunk.index) {
            return Err(AbeError::ChunkAuthentication { index: chunk.index });
        }
        let mut buf = chunk.ciphertext.clone();
        self.cipher()
            .decrypt_in_place_detached(
                Nonce::from_slice(&chunk.nonce),
                &ctx.aad(chunk.index),
                &mut buf,
                Tag::from_slice(&chunk.tag),
            )
            .map_err(|_| AbeError::ChunkAuthentication { index: chunk.index })?;
        Ok(buf)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainChunk {
    pub index: u32,
    pub nonce: [u8; 12],
    pub ciphertext: Vec<u8>,
    pub tag: [u8; 16],
}

impl ChainChunk {
    pub fn digest(&self) -> [u8; 32] {
        Sha256::new()
            .chain_update(self.index.to_be_bytes())
            .chain_update(self.nonce)
            .chain_update(&self.ciphertext)
            .chain_update(self.tag)
            .finalize()
            .into()
    }

    fn write(&self, w: &mut Writer) {
        w.u32(self.index).raw(&self.nonce).bytes(&self.ciphertext).raw(&self.tag);
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(Self {
            index: r.u32()?,
            nonce: r.array()?,
            ciphertext: r.bytes()?.to_vec(),
            tag: r.array()?,
        })
    }

    /// Standalone encoding of a chunk run, as carried by ranged writes.
    pub fn encode_list(chunks: &[ChainChunk]) -> Vec<u8> {
        let mut w = Writer::with_version(CHUNK_LIST_VERSION);
        write_chunks(&mut w, chunks);
        w.finish()
    }

    pub fn decode_list(buf: &[u8]) -> Result<Vec<ChainChunk>, WireError> {
        let mut r = Reader::versioned(buf, CHUNK_LIST_VERSION)?;
        let chunks = read_chunks(&mut r)?;
        r.finish()?;
        Ok(chunks)
    }
}

fn write_chunks(w: &mut Writer, chunks: &[ChainChunk]) {
    w.u32(chunks.len() as u32);
    for c in chunks {
        c.write(w);
    }
}

fn read_chunks(r: &mut Reader<'_>) -> Result<Vec<ChainChunk>, WireError> {
    let n = r.u32()? as usize;
    // 36 bytes is the smallest possible encoded chunk.
    if n > r.remaining() / 36 + 1 {
        return Err(WireError::Invalid(format!("chunk count {n} exceeds input")));
    }
    (0..n).map(|_| ChainChunk::read(r)).collect()
}

fn check_contiguous(chunks: &[ChainChunk], first: u32) -> Result<(), WireError> {
    for (i, c) in chunks.iter().enumerate() {
        if c.index != first + i as u32 {
            return Err(WireError::Invalid(format!("chunk index {} out of sequence", c.index)));
        }
    }
    Ok(())
}

/// Signed summary of one resource version: what the owner signature covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainManifest {
    pub header_digest: [u8; 32],
    pub chunk_size: u32,
    pub total_len: u64,
    pub chunk_digests: Vec<[u8; 32]>,
}

impl ChainManifest {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(MANIFEST_VERSION);
        w.raw(&self.header_digest)
            .u32(self.chunk_size)
            .u64(self.total_len)
            .u32(self.chunk_digests.len() as u32);
        for d in &self.chunk_digests {
            w.raw(d);
        }
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, MANIFEST_VERSION)?;
        let header_digest = r.array()?;
        let chunk_size = r.u32()?;
        let total_len = r.u64()?;
        let n = r.u32()? as usize;
        if n > r.remaining() / 32 {
            return Err(WireError::Invalid("digest count".into()));
        }
        let chunk_digests = (0..n).map(|_| r.array()).collect::<Result<_, _>>()?;
        r.finish()?;
        Ok(Self {
            header_digest,
            chunk_size,
            total_len,
            chunk_digests,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainCiphertext {
    pub header: AbeCiphertext,
    pub chunk_size: u32,
    pub total_len: u64,
    pub chunks: Vec<ChainChunk>,
}

impl ChainCiphertext {
    pub fn policy(&self) -> &PolicyExpr {
        self.header.policy()
    }

    pub fn header_digest(&self) -> [u8; 32] {
        Sha256::digest(self.header.to_bytes()).into()
    }

    pub fn context(&self) -> ChunkContext {
        ChunkContext {
            header_digest: self.header_digest(),
            chunk_size: self.chunk_size,
            total_len: self.total_len,
        }
    }

    pub fn manifest(&self) -> ChainManifest {
        ChainManifest {
            header_digest: self.header_digest(),
            chunk_size: self.chunk_size,
            total_len: self.total_len,
            chunk_digests: self.chunks.iter().map(ChainChunk::digest).collect(),
        }
    }

    /// Header plus the chunks covering `range`.
    pub fn slice(&self, range: &Range<u64>) -> Result<ChainSlice, AbeError> {
        let idx = self.context().chunks_covering(range)?;
        Ok(ChainSlice {
            header: self.header.clone(),
            chunk_size: self.chunk_size,
            total_len: self.total_len,
            first_chunk: idx.start,
            chunks: self.chunks[idx.start as usize..idx.end as usize].to_vec(),
        })
    }

    pub fn full_slice(&self) -> ChainSlice {
        ChainSlice {
            header: self.header.clone(),
            chunk_size: self.chunk_size,
            total_len: self.total_len,
            first_chunk: 0,
            chunks: self.chunks.clone(),
        }
    }

    /// Swaps in re-sealed chunks at their indices. Geometry is unchanged.
    pub fn replace_chunks(&mut self, replacements: Vec<ChainChunk>) -> Result<(), AbeError> {
        let ctx = self.context();
        for c in &replacements {
            if c.index as usize >= self.chunks.len() {
                return Err(AbeError::Malformed(format!("replacement chunk {} out of range", c.index)));
            }
            if c.ciphertext.len() != ctx.chunk_len(c.index) {
                return Err(AbeError::Malformed(format!("replacement chunk {} has wrong length", c.index)));
            }
        }
        for c in replacements {
            let i = c.index as usize;
            self.chunks[i] = c;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(CHAIN_VERSION);
        w.bytes(&self.header.to_bytes()).u32(self.chunk_size).u64(self.total_len);
        write_chunks(&mut w, &self.chunks);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, CHAIN_VERSION)?;
        let header = AbeCiphertext::from_bytes(r.bytes()?)?;
        let chunk_size = r.u32()?;
        let total_len = r.u64()?;
        let chunks = read_chunks(&mut r)?;
        r.finish()?;
        if chunk_size == 0 {
            return Err(WireError::Invalid("zero chunk size".into()));
        }
        if chunks.len() as u64 != chunk_count(total_len, chunk_size) as u64 {
            return Err(WireError::Invalid("chunk count does not match length".into()));
        }
        check_contiguous(&chunks, 0)?;
        Ok(Self {
            header,
            chunk_size,
            total_len,
            chunks,
        })
    }
}

/// Header plus a contiguous run of chunks: what a ranged read transfers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainSlice {
    pub header: AbeCiphertext,
    pub chunk_size: u32,
    pub total_len: u64,
    pub first_chunk: u32,
    pub chunks: Vec<ChainChunk>,
}

impl ChainSlice {
    pub fn context(&self) -> ChunkContext {
        ChunkContext {
            header_digest: Sha256::digest(self.header.to_bytes()).into(),
            chunk_size: self.chunk_size,
            total_len: self.total_len,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(SLICE_VERSION);
        w.bytes(&self.header.to_bytes())
            .u32(self.chunk_size)
            .u64(self.total_len)
            .u32(self.first_chunk);
        write_chunks(&mut w, &self.chunks);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, SLICE_VERSION)?;
        let header = AbeCiphertext::from_bytes(r.bytes()?)?;
        let chunk_size = r.u32()?;
        let total_len = r.u64()?;
        let first_chunk = r.u32()?;
        let chunks = read_chunks(&mut r)?;
        r.finish()?;
        if chunk_size == 0 {
            return Err(WireError::Invalid("zero chunk size".into()));
        }
        if first_chunk as u64 + chunks.len() as u64 > chunk_count(total_len, chunk_size) as u64 {
            return Err(WireError::Invalid("slice extends past resource".into()));
        }
        check_contiguous(&chunks, first_chunk)?;
        Ok(Self {
            header,
            chunk_size,
            total_len,
            first_chunk,
            chunks,
        })
    }

    /// Decrypts `range` (absolute byte offsets) out of this slice.
    pub fn decrypt_range(
        &self,
        abe: &Abe,
        pk: &AbePublicParams,
        sk: &AbePrivateKey,
        range: Range<u64>,
    ) -> Result<Vec<u8>, AbeError> {
        let ctx = self.context();
        let needed = ctx.chunks_covering(&range)?;
        let key = abe.open_chain_key(pk, &self.header, sk)?;
        if needed.is_empty() {
            return Ok(Vec::new());
        }
        let have = self.first_chunk..self.first_chunk + self.chunks.len() as u32;
        if needed.start < have.start || needed.end > have.end {
            return Err(AbeError::Malformed(format!(
                "slice holds chunks {have:?}, range needs {needed:?}"
            )));
        }
        let mut out = Vec::with_capacity((range.end - range.start) as usize);
        for idx in needed.clone() {
            let chunk = &self.chunks[(idx - self.first_chunk) as usize];
            out.extend_from_slice(&key.open_chunk(&ctx, chunk)?);
        }
        let skip = (range.start - needed.start as u64 * self.chunk_size as u64) as usize;
        let len = (range.end - range.start) as usize;
        out.drain(..skip);
        out.truncate(len);
        Ok(out)
    }
}

impl Abe {
    pub fn encrypt_chain(
        &self,
        pk: &AbePublicParams,
        data: &[u8],
        policy: &PolicyExpr,
        chunk_size: u32,
        rng: &mut dyn SecureRng,
    ) -> Result<ChainCiphertext, AbeError> {
        if chunk_size == 0 {
            return Err(AbeError::Malformed("zero chunk size".into()));
        }
        let key = DataKey::generate(rng);
        let header = self.encrypt(pk, key.as_bytes(), policy, rng)?;
        let mut chain = ChainCiphertext {
            header,
            chunk_size,
            total_len: data.len() as u64,
            chunks: Vec::new(),
        };
        let ctx = chain.context();
        chain.chunks = data
            .chunks(chunk_size as usize)
            .enumerate()
            .map(|(i, piece)| key.seal_chunk(&ctx, i as u32, piece, rng))
            .collect();
        Ok(chain)
    }

    /// Re-encrypts `data` under an existing data key, keeping the header.
    pub fn reseal_chain(
        &self,
        header: AbeCiphertext,
        key: &DataKey,
        data: &[u8],
        chunk_size: u32,
        rng: &mut dyn SecureRng,
    ) -> ChainCiphertext {
        let mut chain = ChainCiphertext {
            header,
            chunk_size,
            total_len: data.len() as u64,
            chunks: Vec::new(),
        };
        let ctx = chain.context();
        chain.chunks = data
            .chunks(chunk_size as usize)
            .enumerate()
            .map(|(i, piece)| key.seal_chunk(&ctx, i as u32, piece, rng))
            .collect();
        chain
    }

    pub fn open_chain_key(
        &self,
        pk: &AbePublicParams,
        header: &AbeCiphertext,
        sk: &AbePrivateKey,
    ) -> Result<DataKey, AbeError> {
        DataKey::from_slice(&self.decrypt(pk, header, sk)?)
    }

    pub fn decrypt_chain(
        &self,
        pk: &AbePublicParams,
        chain: &ChainCiphertext,
        sk: &AbePrivateKey,
    ) -> Result<Vec<u8>, AbeError> {
        self.decrypt_chain_range(pk, chain, sk, 0..chain.total_len)
    }

    pub fn decrypt_chain_range(
        &self,
        pk: &AbePublicParams,
        chain: &ChainCiphertext,
        sk: &AbePrivateKey,
        range: Range<u64>,
    ) -> Result<Vec<u8>, AbeError> {
        chain.slice(&range)?.decrypt_range(self, pk, sk, range)
    }
}
