//! Grouped hex dump of a data frame, one column group per field:
//!
//! ```text
//! 40 | 63 56 34 12 | 00 00 00 | 01 | 40 D2 83 92 | A8 C8 EB F3
//! ```
//!
//! Groups are MHDR, DevAddr, FCtrl+FCnt (+FOpts), FPort, payload and MIC.
//! A frame without FPort shows `--` in that column and an empty payload.

use super::{CodecError, MIN_DATA_FRAME};

fn hex_bytes(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02X}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn format(wire: &[u8]) -> Result<String, CodecError> {
    if wire.len() < MIN_DATA_FRAME {
        return Err(CodecError::TooShort { len: wire.len(), need: MIN_DATA_FRAME });
    }
    let fhdr_end = (8 + (wire[5] & 0x0F) as usize).min(wire.len() - 4);
    let mic_start = wire.len() - 4;
    let (port, payload) = if mic_start > fhdr_end {
        (hex_bytes(&wire[fhdr_end..fhdr_end + 1]), hex_bytes(&wire[fhdr_end + 1..mic_start]))
    } else {
        ("--".to_string(), String::new())
    };
    Ok(format!(
        "{} | {} | {} | {} | {} | {}",
        hex_bytes(&wire[..1]),
        hex_bytes(&wire[1..5]),
        hex_bytes(&wire[5..fhdr_end]),
        port,
        payload,
        hex_bytes(&wire[mic_start..]),
    ))
}

/// Accepts grouped dumps as produced by [`format`] as well as plain
/// whitespace-separated hex.
pub fn parse(text: &str) -> Result<Vec<u8>, CodecError> {
    let digits: String = text
        .split(|c: char| c.is_whitespace() || c == '|')
        .filter(|tok| !tok.is_empty() && *tok != "--")
        .collect();
    hex::decode(&digits).map_err(|e| CodecError::Hex(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROWS: [&str; 4] = [
        "40 | 63 56 34 12 | 00 00 00 | 01 | 40 D2 83 92 | A8 C8 EB F3",
        "40 | 63 56 34 12 | 00 00 00 | 01 | 40 D2 5D F6 | 71 DA EB CB",
        "40 | 63 56 34 12 | 00 00 00 | 01 | 40 D2 3D 9A | 1A 7A C7 99",
        "40 | 63 56 34 12 | 00 00 00 | 01 | 40 D2 34 90 | D6 F5 FF 69",
    ];

    #[test]
    fn golden_rows_reformat_identically() {
        for row in ROWS {
            let bytes = parse(row).unwrap();
            assert_eq!(bytes.len(), 17);
            assert_eq!(format(&bytes).unwrap(), row);
        }
    }

    #[test]
    fn jammed_rows_share_eleven_byte_prefix() {
        let clean = parse(ROWS[0]).unwrap();
        for row in &ROWS[1..] {
            let jammed = parse(row).unwrap();
            assert_eq!(clean[..11], jammed[..11]);
            let first_diff = clean.iter().zip(&jammed).position(|(a, b)| a != b).unwrap();
            assert!(first_diff + 1 >= 12);
        }
    }

    #[test]
    fn no_port_and_fopts() {
        let bytes = parse("40 01 00 00 00 02 05 00 AA BB 11 22 33 44").unwrap();
        assert_eq!(format(&bytes).unwrap(), "40 | 01 00 00 00 | 02 05 00 AA BB | -- |  | 11 22 33 44");
        assert_eq!(parse(&format(&bytes).unwrap()).unwrap(), bytes);
        assert!(format(&bytes[..11]).is_err());
        assert!(parse("4").is_err());
    }
}
