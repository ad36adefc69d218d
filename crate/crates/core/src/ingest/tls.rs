//! Just enough TLS record parsing to pull the server_name out of a
//! ClientHello carried in a single TCP segment.

const CONTENT_HANDSHAKE: u8 = 0x16;
const HANDSHAKE_CLIENT_HELLO: u8 = 0x01;
const EXT_SERVER_NAME: u16 = 0x0000;
const NAME_TYPE_HOST: u8 = 0x00;

/// Cheap check on the record and handshake type bytes.
pub fn is_client_hello(payload: &[u8]) -> bool {
    payload.len() >= 6 && payload[0] == CONTENT_HANDSHAKE && payload[5] == HANDSHAKE_CLIENT_HELLO
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.buf.len() < n {
            return None;
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Some(head)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_be_bytes([b[0], b[1]]))
    }

    fn u24(&mut self) -> Option<usize> {
        self.take(3).map(|b| (usize::from(b[0]) << 16) | (usize::from(b[1]) << 8) | usize::from(b[2]))
    }

    fn vec8(&mut self) -> Option<&'a [u8]> {
        let n = self.u8()?;
        self.take(usize::from(n))
    }

    fn vec16(&mut self) -> Option<&'a [u8]> {
        let n = self.u16()?;
        self.take(usize::from(n))
    }
}

/// Returns the host_name of the server_name extension if `payload` starts
/// with a TLS handshake record holding a ClientHello. Anything malformed or
/// truncated yields `None`.
pub fn extract_sni(payload: &[u8]) -> Option<String> {
    let mut rec = Reader { buf: payload };
    if rec.u8()? != CONTENT_HANDSHAKE {
        return None;
    }
    rec.take(2)?;
    let fragment = rec.vec16()?;

    let mut hs = Reader { buf: fragment };
    if hs.u8()? != HANDSHAKE_CLIENT_HELLO {
        return None;
    }
    let body_len = hs.u24()?;
    let mut body = Reader { buf: hs.take(body_len)? };
    body.take(2 + 32)?; // client_version, random
    body.vec8()?; // session_id
    body.vec16()?; // cipher_suites
    body.vec8()?; // compression_methods
    if body.buf.is_empty() {
        return None;
    }
    let mut exts = Reader { buf: body.vec16()? };
    while !exts.buf.is_empty() {
        let ext_type = exts.u16()?;
        let data = exts.vec16()?;
        if ext_type != EXT_SERVER_NAME {
            continue;
        }
        let mut list = Reader { buf: Reader { buf: data }.vec16()? };
        while !list.buf.is_empty() {
            let name_type = list.u8()?;
            let name = list.vec16()?;
            if name_type == NAME_TYPE_HOST {
                return std::str::from_utf8(name).ok().filter(|s| !s.is_empty()).map(str::to_owned);
            }
        }
        return None;
    }
    None
}

const CIPHER_SUITES: [u16; 4] = [0x1301, 0x1302, 0xc02b, 0xc02f];

fn push_u16(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u16).to_be_bytes());
}

/// Builds a minimal TLS 1.2 ClientHello record carrying `sni` in a
/// server_name extension. Random and cipher suites are fixed constants.
pub fn client_hello_record(sni: &str) -> Vec<u8> {
    let name = sni.as_bytes();

    let mut sni_ext = Vec::new();
    push_u16(&mut sni_ext, name.len() + 3);
    sni_ext.push(NAME_TYPE_HOST);
    push_u16(&mut sni_ext, name.len());
    sni_ext.extend_from_slice(name);

    let mut extensions = Vec::new();
    push_u16(&mut extensions, usize::from(EXT_SERVER_NAME));
    push_u16(&mut extensions, sni_ext.len());
    extensions.extend_from_slice(&sni_ext);

    let mut body = vec![0x03, 0x03];
    body.extend((0u8..32).map(|i| i.wrapping_mul(37)));
    body.push(0); // empty session_id
    push_u16(&mut body, CIPHER_SUITES.len() * 2);
    for cs in CIPHER_SUITES {
        body.extend_from_slice(&cs.to_be_bytes());
    }
    body.extend_from_slice(&[1, 0]); // null compression
    push_u16(&mut body, extensions.len());
    body.extend_from_slice(&extensions);

    let mut handshake = vec![HANDSHAKE_CLIENT_HELLO];
    handshake.extend_from_slice(&(body.len() as u32).to_be_bytes()[1..]);
    handshake.extend_from_slice(&body);

    let mut record = vec![CONTENT_HANDSHAKE, 0x03, 0x01];
    push_u16(&mut record, handshake.len());
    record.extend_from_slice(&handshake);
    record
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_round_trips() {
        let rec = client_hello_record("example.com");
        assert!(is_client_hello(&rec));
        assert_eq!(extract_sni(&rec).as_deref(), Some("example.com"));
    }

    #[test]
    fn application_data_is_not_a_hello() {
        let rec = [0x17, 0x03, 0x03, 0x00, 0x03, 1, 2, 3];
        assert!(!is_client_hello(&rec));
        assert_eq!(extract_sni(&rec), None);
    }

    #[test]
    fn every_truncation_is_rejected() {
        let rec = client_hello_record("a.example.org");
        for cut in 0..rec.len() {
            assert_eq!(extract_sni(&rec[..cut]), None, "cut at {cut}");
        }
    }
}
