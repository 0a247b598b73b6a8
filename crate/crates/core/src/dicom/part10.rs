//! Part-10 file reading and writing for explicit-VR little-endian data sets.
//!
//! The reader keeps top-level elements only. Sequences (defined or undefined
//! length) are walked and skipped; their contents are never needed for
//! volume ingest.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

pub const EXPLICIT_VR_LITTLE_ENDIAN: &str = "1.2.840.10008.1.2.1";
/// CT Image Storage.
pub const CT_IMAGE_STORAGE: &str = "1.2.840.10008.5.1.4.1.1.2";
pub const IMPLEMENTATION_CLASS_UID: &str = "1.2.826.0.1.3680043.9.7433.1.1";

const PREAMBLE_LEN: usize = 128;
const UNDEFINED_LENGTH: u32 = 0xFFFF_FFFF;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(pub u16, pub u16);

impl fmt::Debug for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:04X},{:04X})", self.0, self.1)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub mod tags {
    use super::Tag;

    pub const TRANSFER_SYNTAX_UID: Tag = Tag(0x0002, 0x0010);
    pub const SOP_CLASS_UID: Tag = Tag(0x0008, 0x0016);
    pub const SOP_INSTANCE_UID: Tag = Tag(0x0008, 0x0018);
    pub const MODALITY: Tag = Tag(0x0008, 0x0060);
    pub const PATIENT_ID: Tag = Tag(0x0010, 0x0020);
    pub const SLICE_THICKNESS: Tag = Tag(0x0018, 0x0050);
    pub const SPACING_BETWEEN_SLICES: Tag = Tag(0x0018, 0x0088);
    pub const STUDY_INSTANCE_UID: Tag = Tag(0x0020, 0x000D);
    pub const SERIES_INSTANCE_UID: Tag = Tag(0x0020, 0x000E);
    pub const INSTANCE_NUMBER: Tag = Tag(0x0020, 0x0013);
    pub const IMAGE_POSITION_PATIENT: Tag = Tag(0x0020, 0x0032);
    pub const IMAGE_ORIENTATION_PATIENT: Tag = Tag(0x0020, 0x0037);
    pub const SAMPLES_PER_PIXEL: Tag = Tag(0x0028, 0x0002);
    pub const PHOTOMETRIC_INTERPRETATION: Tag = Tag(0x0028, 0x0004);
    pub const ROWS: Tag = Tag(0x0028, 0x0010);
    pub const COLUMNS: Tag = Tag(0x0028, 0x0011);
    pub const PIXEL_SPACING: Tag = Tag(0x0028, 0x0030);
    pub const BITS_ALLOCATED: Tag = Tag(0x0028, 0x0100);
    pub const BITS_STORED: Tag = Tag(0x0028, 0x0101);
    pub const HIGH_BIT: Tag = Tag(0x0028, 0x0102);
    pub const PIXEL_REPRESENTATION: Tag = Tag(0x0028, 0x0103);
    pub const RESCALE_INTERCEPT: Tag = Tag(0x0028, 0x1052);
    pub const RESCALE_SLOPE: Tag = Tag(0x0028, 0x1053);
    pub const PIXEL_DATA: Tag = Tag(0x7FE0, 0x0010);

    pub const ITEM: Tag = Tag(0xFFFE, 0xE000);
    pub const ITEM_DELIMITATION: Tag = Tag(0xFFFE, 0xE00D);
    pub const SEQUENCE_DELIMITATION: Tag = Tag(0xFFFE, 0xE0DD);
}

/// VRs whose explicit-VR header carries a 4-byte length.
fn has_long_length(vr: [u8; 2]) -> bool {
    matches!(
        &vr,
        b"OB"
            | b"OD"
            | b"OF"
            | b"OL"
            | b"OV"
            | b"OW"
            | b"SQ"
            | b"SV"
            | b"UC"
            | b"UN"
            | b"UR"
            | b"UT"
            | b"UV"
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub vr: [u8; 2],
    pub value: Vec<u8>,
}

/// Top-level elements of one Part-10 file, file meta group included.
#[derive(Debug, Clone, Default)]
pub struct DataSet {
    elements: BTreeMap<Tag, Element>,
}

impl DataSet {
    pub fn get(&self, tag: Tag) -> Option<&Element> {
        self.elements.get(&tag)
    }

    pub fn contains(&self, tag: Tag) -> bool {
        self.elements.contains_key(&tag)
    }

    /// String value with trailing NUL/space padding removed.
    pub fn string(&self, tag: Tag) -> Option<String> {
        self.get(tag).map(|e| {
            String::from_utf8_lossy(&e.value)
                .trim_end_matches(['\0', ' '])
                .trim_start()
                .to_string()
        })
    }

    pub fn require_string(&self, tag: Tag, name: &str) -> Result<String> {
        self.string(tag)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Parse(format!("missing required tag {tag} {name}")))
    }

    pub fn u16(&self, tag: Tag) -> Result<Option<u16>> {
        match self.get(tag) {
            None => Ok(None),
            Some(e) if e.value.len() >= 2 => Ok(Some(u16::from_le_bytes([e.value[0], e.value[1]]))),
            Some(_) => Err(Error::Parse(format!("tag {tag} is too short for US"))),
        }
    }

    pub fn require_u16(&self, tag: Tag, name: &str) -> Result<u16> {
        self.u16(tag)?
            .ok_or_else(|| Error::Parse(format!("missing required tag {tag} {name}")))
    }

    /// Backslash-separated decimal strings.
    pub fn decimals(&self, tag: Tag) -> Result<Option<Vec<f64>>> {
        let Some(s) = self.string(tag) else {
            return Ok(None);
        };
        s.split('\\')
            .map(|part| {
                part.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("tag {tag}: '{part}' is not a decimal")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn require_decimals(&self, tag: Tag, name: &str, count: usize) -> Result<Vec<f64>> {
        let v = self
            .decimals(tag)?
            .ok_or_else(|| Error::Parse(format!("missing required tag {tag} {name}")))?;
        if v.len() != count {
            return Err(Error::Parse(format!(
                "tag {tag} {name}: expected {count} values, got {}",
                v.len()
            )));
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Parse(format!(
                "unexpected end of data at offset {} (need {n} bytes)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn tag(&mut self) -> Result<Tag> {
        Ok(Tag(self.u16()?, self.u16()?))
    }

    fn peek_tag(&self) -> Option<Tag> {
        (self.remaining() >= 4).then(|| {
            let b = &self.bytes[self.pos..];
            Tag(
                u16::from_le_bytes([b[0], b[1]]),
                u16::from_le_bytes([b[2], b[3]]),
            )
        })
    }
}

/// Reads one explicit-VR element. Sequences are skipped and returned with
/// an empty value.
fn read_element(cur: &mut Cursor<'_>) -> Result<(Tag, Element)> {
    let tag = cur.tag()?;
    if tag.0 == 0xFFFE {
        return Err(Error::Parse(format!(
            "unexpected delimiter {tag} at offset {}",
            cur.pos - 4
        )));
    }
    let vr_bytes = cur.take(2)?;
    let vr = [vr_bytes[0], vr_bytes[1]];
    if !vr.iter().all(u8::is_ascii_uppercase) {
        return Err(Error::Parse(format!(
            "tag {tag} has invalid VR bytes {vr:?}; data is not explicit VR"
        )));
    }
    let len = if has_long_length(vr) {
        cur.take(2)?;
        cur.u32()?
    } else {
        cur.u16()? as u32
    };
    if len == UNDEFINED_LENGTH {
        if &vr == b"SQ" {
            skip_undefined_sequence(cur)?;
            return Ok((
                tag,
                Element {
                    vr,
                    value: Vec::new(),
                },
            ));
        }
        if tag == tags::PIXEL_DATA {
            return Err(Error::Unsupported(
                "encapsulated (compressed) pixel data".into(),
            ));
        }
        return Err(Error::Unsupported(format!(
            "undefined length on {tag} with VR {}",
            vr_str(vr)
        )));
    }
    let value = cur.take(len as usize)?;
    let value = if &vr == b"SQ" {
        Vec::new()
    } else {
        value.to_vec()
    };
    Ok((tag, Element { vr, value }))
}

fn skip_undefined_sequence(cur: &mut Cursor<'_>) -> Result<()> {
    loop {
        let tag = cur.tag()?;
        let len = cur.u32()?;
        match tag {
            tags::SEQUENCE_DELIMITATION => return Ok(()),
            tags::ITEM if len == UNDEFINED_LENGTH => loop {
                if cur.peek_tag() == Some(tags::ITEM_DELIMITATION) {
                    cur.tag()?;
                    cur.u32()?;
                    break;
                }
                read_element(cur)?;
            },
            tags::ITEM => {
                cur.take(len as usize)?;
            }
            other => {
                return Err(Error::Parse(format!(
                    "unexpected tag {other} inside sequence"
                )));
            }
        }
    }
}

fn vr_str(vr: [u8; 2]) -> String {
    String::from_utf8_lossy(&vr).into_owned()
}

/// Parses a Part-10 file.
pub fn read_part10(bytes: &[u8]) -> Result<DataSet> {
    if bytes.len() < PREAMBLE_LEN + 4 || &bytes[PREAMBLE_LEN..PREAMBLE_LEN + 4] != b"DICM" {
        return Err(Error::Parse(
            "missing DICM prefix; not a Part-10 file".into(),
        ));
    }
    let mut cur = Cursor {
        bytes,
        pos: PREAMBLE_LEN + 4,
    };
    let mut ds = DataSet::default();
    // File meta information is always explicit VR little endian.
    while cur.peek_tag().is_some_and(|t| t.0 == 0x0002) {
        let (tag, el) = read_element(&mut cur)?;
        ds.elements.insert(tag, el);
    }
    let ts = ds.require_string(tags::TRANSFER_SYNTAX_UID, "TransferSyntaxUID")?;
    if ts != EXPLICIT_VR_LITTLE_ENDIAN {
        return Err(Error::Unsupported(format!("transfer syntax {ts}")));
    }
    while cur.remaining() > 0 {
        let (tag, el) = read_element(&mut cur)?;
        ds.elements.insert(tag, el);
    }
    Ok(ds)
}

/// Builds a Part-10 file element by element.
#[derive(Debug, Default)]
pub struct DataSetBuilder {
    elements: BTreeMap<Tag, Element>,
}

impl DataSetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn put(&mut self, tag: Tag, vr: &[u8; 2], mut value: Vec<u8>, pad: u8) -> &mut Self {
        if value.len() % 2 == 1 {
            value.push(pad);
        }
        self.elements.insert(tag, Element { vr: *vr, value });
        self
    }

    pub fn uid(&mut self, tag: Tag, uid: &str) -> &mut Self {
        self.put(tag, b"UI", uid.as_bytes().to_vec(), 0)
    }

    /// Text with a string VR such as `CS`, `LO` or `SH`.
    pub fn text(&mut self, tag: Tag, vr: &[u8; 2], s: &str) -> &mut Self {
        self.put(tag, vr, s.as_bytes().to_vec(), b' ')
    }

    pub fn us(&mut self, tag: Tag, v: u16) -> &mut Self {
        self.put(tag, b"US", v.to_le_bytes().to_vec(), 0)
    }

    pub fn is(&mut self, tag: Tag, v: i64) -> &mut Self {
        self.text(tag, b"IS", &v.to_string())
    }

    pub fn ds(&mut self, tag: Tag, values: &[f64]) -> &mut Self {
        let s = values
            .iter()
            .map(|v| format_decimal(*v))
            .collect::<Vec<_>>()
            .join("\\");
        self.text(tag, b"DS", &s)
    }

    pub fn ow(&mut self, tag: Tag, bytes: Vec<u8>) -> &mut Self {
        self.put(tag, b"OW", bytes, 0)
    }

    /// Serializes with a preamble and file meta group.
    pub fn to_part10(&self, sop_class: &str, sop_instance: &str) -> Vec<u8> {
        let mut meta = DataSetBuilder::new();
        meta.put(Tag(0x0002, 0x0001), b"OB", vec![0, 1], 0);
        meta.uid(Tag(0x0002, 0x0002), sop_class);
        meta.uid(Tag(0x0002, 0x0003), sop_instance);
        meta.uid(tags::TRANSFER_SYNTAX_UID, EXPLICIT_VR_LITTLE_ENDIAN);
        meta.uid(Tag(0x0002, 0x0012), IMPLEMENTATION_CLASS_UID);
        let meta_body = meta.encode();

        let mut out = vec![0u8; PREAMBLE_LEN];
        out.extend_from_slice(b"DICM");
        let mut group_len = DataSetBuilder::new();
        group_len.put(
            Tag(0x0002, 0x0000),
            b"UL",
            (meta_body.len() as u32).to_le_bytes().to_vec(),
            0,
        );
        out.extend(group_len.encode());
        out.extend(meta_body);
        out.extend(self.encode());
        out
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (tag, el) in &self.elements {
            out.extend_from_slice(&tag.0.to_le_bytes());
            out.extend_from_slice(&tag.1.to_le_bytes());
            out.extend_from_slice(&el.vr);
            if has_long_length(el.vr) {
                out.extend_from_slice(&[0, 0]);
                out.extend_from_slice(&(el.value.len() as u32).to_le_bytes());
            } else {
                out.extend_from_slice(&(el.value.len() as u16).to_le_bytes());
            }
            out.extend_from_slice(&el.value);
        }
        out
    }
}

/// Formats `v` as a DS value (at most 16 characters), exactly when possible.
pub fn format_decimal(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    let s = v.to_string();
    if s.len() <= 16 {
        return s;
    }
    let fixed = (0..=16usize)
        .rev()
        .map(|d| format!("{v:.d$}"))
        .find(|s| s.len() <= 16);
    let sci = (0..=16usize)
        .rev()
        .map(|d| format!("{v:.d$e}"))
        .find(|s| s.len() <= 16);
    let err = |s: &String| (s.parse::<f64>().unwrap_or(f64::INFINITY) - v).abs();
    match (fixed, sci) {
        (Some(f), Some(e)) => {
            if err(&f) <= err(&e) {
                f
            } else {
                e
            }
        }
        (Some(s), None) | (None, Some(s)) => s,
        (None, None) => format!("{v:.0e}"),
    }
}
