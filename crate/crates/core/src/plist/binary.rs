use std::collections::BTreeMap;

use super::{PlistError, PlistValue};

const HEADER_LEN: usize = 8;
const TRAILER_LEN: usize = 32;
const MAX_DEPTH: usize = 512;
/// Upper bound on decoded nodes, so shared references cannot blow up the
/// output exponentially.
const MAX_NODES: usize = 1 << 20;

struct Trailer {
    offset_int_size: usize,
    ref_size: usize,
    num_objects: usize,
    top_object: usize,
    offset_table_offset: usize,
}

struct Decoder<'a> {
    bytes: &'a [u8],
    trailer: Trailer,
    on_path: Vec<bool>,
    nodes: usize,
}

pub(super) fn parse(bytes: &[u8]) -> Result<PlistValue, PlistError> {
    if bytes.len() < HEADER_LEN {
        return Err(PlistError::malformed(bytes.len(), "truncated header"));
    }
    if &bytes[6..8] != b"00" {
        return Err(PlistError::unsupported(
            format!("bplist{}", String::from_utf8_lossy(&bytes[6..8])),
            6,
        ));
    }
    if bytes.len() < HEADER_LEN + TRAILER_LEN {
        return Err(PlistError::malformed(bytes.len(), "file too short for trailer"));
    }
    let t = bytes.len() - TRAILER_LEN;
    let trailer = Trailer {
        offset_int_size: bytes[t + 6] as usize,
        ref_size: bytes[t + 7] as usize,
        num_objects: be_u64(&bytes[t + 8..t + 16]),
        top_object: be_u64(&bytes[t + 16..t + 24]),
        offset_table_offset: be_u64(&bytes[t + 24..t + 32]),
    };
    if !(1..=8).contains(&trailer.offset_int_size) || !(1..=8).contains(&trailer.ref_size) {
        return Err(PlistError::malformed(t + 6, "bad integer sizes in trailer"));
    }
    if trailer.num_objects == 0 || trailer.top_object >= trailer.num_objects {
        return Err(PlistError::malformed(t + 8, "bad object count or top object"));
    }
    let table_len = trailer
        .num_objects
        .checked_mul(trailer.offset_int_size)
        .ok_or_else(|| PlistError::malformed(t + 8, "object count overflows"))?;
    let table_end = trailer.offset_table_offset.checked_add(table_len);
    if trailer.offset_table_offset < HEADER_LEN || table_end.is_none_or(|end| end > t) {
        return Err(PlistError::malformed(t + 24, "offset table out of bounds"));
    }

    let mut decoder = Decoder {
        bytes,
        on_path: vec![false; trailer.num_objects],
        trailer,
        nodes: 0,
    };
    let top = decoder.trailer.top_object;
    decoder.object(top, 0)
}

/// Big-endian unsigned read, saturating to `usize::MAX` when the value
/// does not fit (which every later bounds check then rejects).
fn be_u64(b: &[u8]) -> usize {
    let v = b.iter().fold(0u64, |acc, &x| (acc << 8) | x as u64);
    usize::try_from(v).unwrap_or(usize::MAX)
}

impl Decoder<'_> {
    fn table_end(&self) -> usize {
        self.bytes.len() - TRAILER_LEN
    }

    fn slice(&self, start: usize, len: usize) -> Result<&[u8], PlistError> {
        match start.checked_add(len) {
            Some(end) if end <= self.table_end() => Ok(&self.bytes[start..end]),
            _ => Err(PlistError::malformed(start, "object runs past end of data")),
        }
    }

    fn object_offset(&self, index: usize) -> Result<usize, PlistError> {
        let size = self.trailer.offset_int_size;
        let at = self.trailer.offset_table_offset + index * size;
        let off = be_u64(&self.bytes[at..at + size]);
        if off < HEADER_LEN || off >= self.table_end() {
            return Err(PlistError::malformed(at, format!("object {index} offset out of bounds")));
        }
        Ok(off)
    }

    fn object(&mut self, index: usize, depth: usize) -> Result<PlistValue, PlistError> {
        if index >= self.trailer.num_objects {
            return Err(PlistError::malformed(0, format!("object reference {index} out of range")));
        }
        let offset = self.object_offset(index)?;
        if depth > MAX_DEPTH {
            return Err(PlistError::malformed(offset, "nesting too deep"));
        }
        self.nodes += 1;
        if self.nodes > MAX_NODES {
            return Err(PlistError::malformed(offset, "too many objects"));
        }
        if self.on_path[index] {
            return Err(PlistError::malformed(offset, "reference cycle"));
        }
        self.on_path[index] = true;
        let result = self.decode_at(offset, depth);
        self.on_path[index] = false;
        result
    }

    fn decode_at(&mut self, offset: usize, depth: usize) -> Result<PlistValue, PlistError> {
        let marker = self.bytes[offset];
        let (kind, info) = (marker >> 4, marker & 0x0F);
        match kind {
            0x0 => match info {
                0x8 => Ok(PlistValue::Boolean(false)),
                0x9 => Ok(PlistValue::Boolean(true)),
                0x0 => Err(PlistError::unsupported("null", offset)),
                _ => Err(PlistError::malformed(offset, format!("unknown marker {marker:#04x}"))),
            },
            0x1 => self.integer(offset, info).map(PlistValue::Integer),
            0x2 => {
                let body = self.slice(offset + 1, 1 << info)?;
                match info {
                    2 => Ok(PlistValue::Real(f32::from_be_bytes(body.try_into().unwrap()) as f64)),
                    3 => Ok(PlistValue::Real(f64::from_be_bytes(body.try_into().unwrap()))),
                    _ => Err(PlistError::malformed(offset, "unsupported real width")),
                }
            }
            0x3 => Err(PlistError::unsupported("date", offset)),
            0x4 => {
                let (len, start) = self.length(offset, info)?;
                Ok(PlistValue::Data(self.slice(start, len)?.to_vec()))
            }
            0x5 => {
                let (len, start) = self.length(offset, info)?;
                let body = self.slice(start, len)?;
                if !body.is_ascii() {
                    return Err(PlistError::malformed(offset, "ASCII string has high bytes"));
                }
                Ok(PlistValue::String(String::from_utf8(body.to_vec()).unwrap()))
            }
            0x6 => {
                let (units, start) = self.length(offset, info)?;
                let byte_len = units
                    .checked_mul(2)
                    .ok_or_else(|| PlistError::malformed(offset, "string length overflows"))?;
                let body = self.slice(start, byte_len)?;
                let code_units: Vec<u16> = body
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]))
                    .collect();
                String::from_utf16(&code_units)
                    .map(PlistValue::String)
                    .map_err(|_| PlistError::malformed(offset, "invalid UTF-16"))
            }
            0x8 => Err(PlistError::unsupported("uid", offset)),
            0xA => {
                let refs = self.refs(offset, info, 1)?;
                let mut items = Vec::with_capacity(refs.len());
                for r in refs {
                    items.push(self.object(r, depth + 1)?);
                }
                Ok(PlistValue::Array(items))
            }
            0xC => Err(PlistError::unsupported("set", offset)),
            0xD => {
                let refs = self.refs(offset, info, 2)?;
                let (keys, values) = refs.split_at(refs.len() / 2);
                let mut dict = BTreeMap::new();
                for (&k, &v) in keys.iter().zip(values) {
                    let key = match self.object(k, depth + 1)? {
                        PlistValue::String(s) => s,
                        _ => return Err(PlistError::malformed(offset, "dictionary key is not a string")),
                    };
                    let value = self.object(v, depth + 1)?;
                    dict.insert(key, value);
                }
                Ok(PlistValue::Dictionary(dict))
            }
            _ => Err(PlistError::malformed(offset, format!("unknown marker {marker:#04x}"))),
        }
    }

    fn integer(&self, offset: usize, info: u8) -> Result<i128, PlistError> {
        let width = match info {
            0..=4 => 1usize << info,
            _ => return Err(PlistError::malformed(offset, "unsupported integer width")),
        };
        let body = self.slice(offset + 1, width)?;
        Ok(match width {
            1 => body[0] as i128,
            2 => u16::from_be_bytes(body.try_into().unwrap()) as i128,
            4 => u32::from_be_bytes(body.try_into().unwrap()) as i128,
            // 8-byte ints are signed; 16-byte ints carry values above i64::MAX.
            8 => i64::from_be_bytes(body.try_into().unwrap()) as i128,
            _ => i128::from_be_bytes(body.try_into().unwrap()),
        })
    }

    /// Object length from the marker nibble, or from the following integer
    /// when the nibble is 0xF. Returns (length, start of payload).
    fn length(&self, offset: usize, info: u8) -> Result<(usize, usize), PlistError> {
        if info != 0x0F {
            return Ok((info as usize, offset + 1));
        }
        let next = *self
            .slice(offset + 1, 1)?
            .first()
            .expect("slice of length 1");
        if next >> 4 != 0x1 {
            return Err(PlistError::malformed(offset + 1, "length is not an integer"));
        }
        let width_info = next & 0x0F;
        let len = self.integer(offset + 1, width_info)?;
        let len = usize::try_from(len)
            .map_err(|_| PlistError::malformed(offset + 1, "negative or huge length"))?;
        Ok((len, offset + 2 + (1usize << width_info)))
    }

    fn refs(&self, offset: usize, info: u8, per_item: usize) -> Result<Vec<usize>, PlistError> {
        let (count, start) = self.length(offset, info)?;
        let total = count
            .checked_mul(per_item)
            .and_then(|n| n.checked_mul(self.trailer.ref_size))
            .ok_or_else(|| PlistError::malformed(offset, "container length overflows"))?;
        let body = self.slice(start, total)?;
        Ok(body.chunks_exact(self.trailer.ref_size).map(be_u64).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Builds a bplist00 file from already-encoded objects (1-byte refs and offsets).
    fn assemble(objects: &[Vec<u8>], top: u8) -> Vec<u8> {
        let mut out = b"bplist00".to_vec();
        let mut offsets = Vec::new();
        for o in objects {
            offsets.push(out.len() as u8);
            out.extend_from_slice(o);
        }
        let table = out.len() as u64;
        out.extend_from_slice(&offsets);
        out.extend_from_slice(&[0; 6]);
        out.extend_from_slice(&[1, 1]);
        out.extend_from_slice(&(objects.len() as u64).to_be_bytes());
        out.extend_from_slice(&(top as u64).to_be_bytes());
        out.extend_from_slice(&table.to_be_bytes());
        out
    }

    #[test]
    fn hand_built_dictionary() {
        let bytes = assemble(&[vec![0xD1, 1, 2], b"\x51K".to_vec(), vec![0x10, 7]], 0);
        let PlistValue::Dictionary(d) = parse(&bytes).unwrap() else { panic!() };
        assert_eq!(d["K"], PlistValue::Integer(7));
    }

    #[test]
    fn self_reference_is_a_cycle() {
        let bytes = assemble(&[vec![0xA1, 0]], 0);
        match parse(&bytes) {
            Err(PlistError::MalformedPlist { reason, .. }) => assert!(reason.contains("cycle")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shared_references_are_fine() {
        let bytes = assemble(&[vec![0xA2, 1, 1], b"\x51x".to_vec()], 0);
        assert_eq!(
            parse(&bytes).unwrap(),
            PlistValue::Array(vec![PlistValue::String("x".into()), PlistValue::String("x".into())])
        );
    }

    #[test]
    fn unsupported_markers() {
        for (obj, kind) in [
            (vec![0x33, 0, 0, 0, 0, 0, 0, 0, 0], "date"),
            (vec![0x80, 1], "uid"),
            (vec![0xC0], "set"),
            (vec![0x00], "null"),
        ] {
            match parse(&assemble(&[obj], 0)) {
                Err(PlistError::UnsupportedObject { kind: k, .. }) => assert_eq!(k, kind),
                other => panic!("{kind}: {other:?}"),
            }
        }
    }

    #[test]
    fn other_versions_are_unsupported() {
        let mut bytes = assemble(&[vec![0x09]], 0);
        bytes[6..8].copy_from_slice(b"15");
        assert!(matches!(
            parse(&bytes),
            Err(PlistError::UnsupportedObject { offset: 6, .. })
        ));
    }

    #[test]
    fn truncation_and_bad_trailers() {
        let good = assemble(&[vec![0xD1, 1, 2], b"\x51K".to_vec(), vec![0x10, 7]], 0);
        for cut in 0..good.len() {
            assert!(parse(&good[..cut]).is_err(), "prefix {cut}");
        }
        let mut bad_top = good.clone();
        let n = bad_top.len();
        bad_top[n - 9] = 9;
        assert!(parse(&bad_top).is_err());
        let mut bad_ref = good.clone();
        bad_ref[9] = 40;
        assert!(parse(&bad_ref).is_err());
    }

    #[test]
    fn extended_length_string() {
        let mut s = vec![0x5F, 0x10, 20];
        s.extend_from_slice(&[b'a'; 20]);
        let bytes = assemble(&[s], 0);
        assert_eq!(parse(&bytes).unwrap(), PlistValue::String("a".repeat(20)));
    }
}
