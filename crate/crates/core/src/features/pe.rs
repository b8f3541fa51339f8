//! Minimal PE (Portable Executable) header parser.
//!
//! Parses just enough of the DOS stub, COFF header, and section table to
//! feed the static feature layout: machine code, section count, link
//! timestamp, and per-section raw-data entropy with an executable flag.
//!
//! Every read is bounds-checked against the input buffer. A malformed or
//! truncated header yields a structured [`PeParseError`] naming the
//! offending byte offset; the parser never reads past the buffer and
//! never panics on arbitrary input.

use alloc::string::String;
use alloc::vec::Vec;

use super::shannon_entropy;

const DOS_MAGIC: [u8; 2] = *b"MZ";
const PE_SIGNATURE: [u8; 4] = *b"PE\0\0";
/// Offset of the `e_lfanew` field (points at the PE signature).
const E_LFANEW_OFFSET: usize = 0x3c;
const COFF_HEADER_LEN: usize = 20;
const SECTION_ENTRY_LEN: usize = 40;
const IMAGE_SCN_MEM_EXECUTE: u32 = 0x2000_0000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PeParseError {
    #[error("missing MZ magic at offset 0")]
    BadDosMagic,
    #[error("missing PE\\0\\0 signature at offset {offset}")]
    BadPeSignature { offset: usize },
    #[error("truncated: need {needed} bytes at offset {offset}, file has {available}")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("section table entry {index} overruns the file at offset {offset}")]
    SectionTableOverrun { index: usize, offset: usize },
}

/// One section-table entry reduced to the fields the feature layout uses.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SectionSummary {
    pub name: String,
    pub raw_size: u32,
    pub entropy: f64,
    pub executable: bool,
}

/// The header subset consumed by static feature extraction.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PeHeaderSummary {
    pub machine: u16,
    pub section_count: u16,
    pub timestamp: u32,
    pub sections: Vec<SectionSummary>,
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&self, offset: usize, len: usize) -> Result<&'a [u8], PeParseError> {
        let end = offset.checked_add(len).ok_or(PeParseError::Truncated {
            offset,
            needed: len,
            available: self.buf.len(),
        })?;
        if end > self.buf.len() {
            return Err(PeParseError::Truncated {
                offset,
                needed: len,
                available: self.buf.len(),
            });
        }
        Ok(&self.buf[offset..end])
    }

    fn u16_le(&self, offset: usize) -> Result<u16, PeParseError> {
        let b = self.take(offset, 2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32_le(&self, offset: usize) -> Result<u32, PeParseError> {
        let b = self.take(offset, 4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parse the DOS magic, COFF header, and section table of a PE image.
///
/// Section raw-data ranges that point past the end of the file are
/// clamped rather than rejected (packed and corrupted samples do this
/// routinely); the entropy is then computed over whatever bytes are
/// actually present. The section *table* itself overrunning the file is
/// a hard error.
pub fn parse_pe_header(bytes: &[u8]) -> Result<PeHeaderSummary, PeParseError> {
    let r = Reader { buf: bytes };

    if r.take(0, 2)? != DOS_MAGIC {
        return Err(PeParseError::BadDosMagic);
    }

    let pe_offset = r.u32_le(E_LFANEW_OFFSET)? as usize;
    if r.take(pe_offset, 4)? != PE_SIGNATURE {
        return Err(PeParseError::BadPeSignature { offset: pe_offset });
    }

    let coff = pe_offset + 4;
    let machine = r.u16_le(coff)?;
    let section_count = r.u16_le(coff + 2)?;
    let timestamp = r.u32_le(coff + 4)?;
    let opt_header_len = r.u16_le(coff + 16)? as usize;
    // The optional header must be present in full before the section table.
    let table_start = coff + COFF_HEADER_LEN;
    r.take(table_start, opt_header_len)?;
    let table_start = table_start + opt_header_len;

    let mut sections = Vec::with_capacity(section_count as usize);
    for index in 0..section_count as usize {
        let entry = table_start + index * SECTION_ENTRY_LEN;
        let raw = r
            .take(entry, SECTION_ENTRY_LEN)
            .map_err(|_| PeParseError::SectionTableOverrun {
                index,
                offset: entry,
            })?;

        let name_bytes = &raw[0..8];
        let name_len = name_bytes.iter().position(|&b| b == 0).unwrap_or(8);
        let name = String::from_utf8_lossy(&name_bytes[..name_len]).into_owned();

        let raw_size = u32::from_le_bytes([raw[16], raw[17], raw[18], raw[19]]);
        let raw_ptr = u32::from_le_bytes([raw[20], raw[21], raw[22], raw[23]]) as usize;
        let characteristics = u32::from_le_bytes([raw[36], raw[37], raw[38], raw[39]]);

        let start = raw_ptr.min(bytes.len());
        let end = raw_ptr.saturating_add(raw_size as usize).min(bytes.len());
        let entropy = shannon_entropy(&bytes[start..end]);

        sections.push(SectionSummary {
            name,
            raw_size,
            entropy,
            executable: characteristics & IMAGE_SCN_MEM_EXECUTE != 0,
        });
    }

    Ok(PeHeaderSummary {
        machine,
        section_count,
        timestamp,
        sections,
    })
}

pub mod fixture {
    //! Hand-built PE images with a known layout, used as parser oracles
    //! and fuzz seeds.

    use alloc::vec::Vec;

    /// Build a minimal valid PE with the given sections. Layout:
    /// 64-byte DOS header, PE signature at 64, COFF header, no optional
    /// header, section table, then raw section data back to back.
    pub fn build_pe(machine: u16, timestamp: u32, sections: &[(&str, &[u8], bool)]) -> Vec<u8> {
        let pe_offset = 64usize;
        let table_start = pe_offset + 4 + 20;
        let data_start = table_start + sections.len() * 40;

        let mut out = alloc::vec![0u8; 64];
        out[0] = b'M';
        out[1] = b'Z';
        out[0x3c..0x40].copy_from_slice(&(pe_offset as u32).to_le_bytes());

        out.extend_from_slice(b"PE\0\0");
        out.extend_from_slice(&machine.to_le_bytes());
        out.extend_from_slice(&(sections.len() as u16).to_le_bytes());
        out.extend_from_slice(&timestamp.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes()); // symbol table ptr
        out.extend_from_slice(&0u32.to_le_bytes()); // symbol count
        out.extend_from_slice(&0u16.to_le_bytes()); // optional header size
        out.extend_from_slice(&0u16.to_le_bytes()); // characteristics

        let mut cursor = data_start;
        for (name, data, exec) in sections {
            let mut name_bytes = [0u8; 8];
            name_bytes[..name.len()].copy_from_slice(name.as_bytes());
            out.extend_from_slice(&name_bytes);
            out.extend_from_slice(&(data.len() as u32).to_le_bytes()); // virtual size
            out.extend_from_slice(&0u32.to_le_bytes()); // virtual address
            out.extend_from_slice(&(data.len() as u32).to_le_bytes()); // raw size
            out.extend_from_slice(&(cursor as u32).to_le_bytes()); // raw ptr
            out.extend_from_slice(&[0u8; 12]); // reloc/lineno ptrs and counts
            let characteristics: u32 = if *exec { 0x2000_0020 } else { 0x4000_0040 };
            out.extend_from_slice(&characteristics.to_le_bytes());
            cursor += data.len();
        }
        for (_, data, _) in sections {
            out.extend_from_slice(data);
        }
        out
    }
}
