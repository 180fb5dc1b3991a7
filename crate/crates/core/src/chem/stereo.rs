/// Deletes chirality (`@`) and bond-direction (`/`, `\`) marks. Bracket atoms
/// are left in place even when the brackets become redundant.
pub fn strip_stereo(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'/' | b'\\' => i += 1,
            b'@' => {
                while i < bytes.len() && bytes[i] == b'@' {
                    i += 1;
                }
                // extended classes: @TH1, @SP2, @OH12 ...
                if bytes.len() >= i + 2 && matches!(&bytes[i..i + 2], b"TH" | b"AL" | b"SP" | b"TB" | b"OH") {
                    i += 2;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            _ => {
                let ch = text[i..].chars().next().unwrap();
                out.push(ch);
                i += ch.len_utf8();
            }
        }
    }
    out
}
