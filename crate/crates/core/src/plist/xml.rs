use std::collections::BTreeMap;

use base64::Engine;
use quick_xml::events::Event;
use quick_xml::Reader;

use super::{PlistError, PlistValue};

enum Frame {
    Array(Vec<PlistValue>),
    Dict {
        entries: BTreeMap<String, PlistValue>,
        pending_key: Option<String>,
    },
    Text {
        tag: String,
        text: String,
    },
}

/// Either a finished value or a dictionary key, handed to the parent frame.
enum Item {
    Key(String),
    Value(PlistValue),
}

pub(super) fn parse(bytes: &[u8]) -> Result<PlistValue, PlistError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| PlistError::malformed(e.valid_up_to(), "XML plist is not valid UTF-8"))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    if !text.trim_start().starts_with('<') {
        return Err(PlistError::malformed(0, "neither a binary nor an XML property list"));
    }

    let mut reader = Reader::from_str(text);
    let mut stack: Vec<Frame> = Vec::new();
    let mut root: Option<PlistValue> = None;
    let mut seen_plist = false;

    loop {
        let offset = reader.buffer_position() as usize;
        let event = reader
            .read_event()
            .map_err(|e| PlistError::malformed(offset, e.to_string()))?;
        match event {
            Event::Start(start) => {
                let tag = start.name().as_ref().to_string();
                match tag.as_str() {
                    "plist" if !seen_plist && stack.is_empty() => seen_plist = true,
                    "dict" => stack.push(Frame::Dict {
                        entries: BTreeMap::new(),
                        pending_key: None,
                    }),
                    "array" => stack.push(Frame::Array(Vec::new())),
                    "key" | "string" | "integer" | "real" | "data" | "true" | "false" => {
                        stack.push(Frame::Text {
                            tag,
                            text: String::new(),
                        })
                    }
                    other => return Err(unknown_tag(other, offset)),
                }
            }
            Event::Empty(start) => {
                let tag = start.name().as_ref().to_string();
                let item = match tag.as_str() {
                    "dict" => Item::Value(PlistValue::Dictionary(BTreeMap::new())),
                    "array" => Item::Value(PlistValue::Array(Vec::new())),
                    "key" => Item::Key(String::new()),
                    "true" | "false" | "string" | "data" | "integer" | "real" => {
                        scalar(&tag, "", offset)?
                    }
                    "plist" => return Err(PlistError::malformed(offset, "empty <plist/>")),
                    other => return Err(unknown_tag(other, offset)),
                };
                deliver(item, &mut stack, &mut root, offset)?;
            }
            Event::End(end) => {
                let tag = end.name().as_ref().to_string();
                if tag == "plist" && stack.is_empty() {
                    continue;
                }
                let item = match stack.pop() {
                    Some(Frame::Array(items)) if tag == "array" => {
                        Item::Value(PlistValue::Array(items))
                    }
                    Some(Frame::Dict {
                        entries,
                        pending_key: None,
                    }) if tag == "dict" => Item::Value(PlistValue::Dictionary(entries)),
                    Some(Frame::Dict { .. }) if tag == "dict" => {
                        return Err(PlistError::malformed(offset, "dictionary key without value"))
                    }
                    Some(Frame::Text { tag: open, text }) if open == tag => {
                        scalar(&tag, &text, offset)?
                    }
                    _ => {
                        return Err(PlistError::malformed(offset, format!("unexpected </{tag}>")))
                    }
                };
                deliver(item, &mut stack, &mut root, offset)?;
            }
            Event::Text(t) => {
                let content = t.xml10_content();
                push_text(&mut stack, &content, offset)?;
            }
            Event::CData(c) => {
                let content: &str = c.as_ref();
                push_text(&mut stack, content, offset)?;
            }
            Event::GeneralRef(r) => {
                let resolved = match r.resolve_char_ref() {
                    Ok(Some(ch)) => ch.to_string(),
                    Ok(None) => {
                        let name = r.xml10_content();
                        match name.as_ref() {
                            "amp" => "&".to_string(),
                            "lt" => "<".to_string(),
                            "gt" => ">".to_string(),
                            "quot" => "\"".to_string(),
                            "apos" => "'".to_string(),
                            other => {
                                return Err(PlistError::malformed(
                                    offset,
                                    format!("unknown entity &{other};"),
                                ))
                            }
                        }
                    }
                    Err(e) => return Err(PlistError::malformed(offset, e.to_string())),
                };
                push_text(&mut stack, &resolved, offset)?;
            }
            Event::Eof => break,
            Event::Decl(_) | Event::PI(_) | Event::Comment(_) | Event::DocType(_) => {}
        }
    }

    if !stack.is_empty() {
        return Err(PlistError::malformed(text.len(), "unterminated element"));
    }
    root.ok_or_else(|| PlistError::malformed(text.len(), "no top-level object"))
}

fn unknown_tag(tag: &str, offset: usize) -> PlistError {
    match tag {
        "date" => PlistError::unsupported("date", offset),
        _ => PlistError::malformed(offset, format!("unknown element <{tag}>")),
    }
}

fn push_text(stack: &mut [Frame], content: &str, offset: usize) -> Result<(), PlistError> {
    match stack.last_mut() {
        Some(Frame::Text { text, .. }) => {
            text.push_str(content);
            Ok(())
        }
        _ if content.trim().is_empty() => Ok(()),
        _ => Err(PlistError::malformed(offset, "text outside a value element")),
    }
}

fn scalar(tag: &str, text: &str, offset: usize) -> Result<Item, PlistError> {
    let value = match tag {
        "key" => return Ok(Item::Key(text.to_string())),
        "string" => PlistValue::String(text.to_string()),
        "true" | "false" if text.trim().is_empty() => PlistValue::Boolean(tag == "true"),
        "true" | "false" => {
            return Err(PlistError::malformed(offset, format!("<{tag}> has content")))
        }
        "integer" => PlistValue::Integer(parse_integer(text.trim()).ok_or_else(|| {
            PlistError::malformed(offset, format!("bad integer {:?}", text.trim()))
        })?),
        "real" => PlistValue::Real(
            text.trim()
                .parse::<f64>()
                .map_err(|_| PlistError::malformed(offset, format!("bad real {:?}", text.trim())))?,
        ),
        "data" => {
            let compact: String = text.chars().filter(|c| !c.is_ascii_whitespace()).collect();
            PlistValue::Data(
                base64::engine::general_purpose::STANDARD
                    .decode(compact.as_bytes())
                    .map_err(|e| PlistError::malformed(offset, format!("bad base64: {e}")))?,
            )
        }
        other => return Err(unknown_tag(other, offset)),
    };
    Ok(Item::Value(value))
}

fn parse_integer(s: &str) -> Option<i128> {
    let (neg, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let magnitude = match digits.strip_prefix("0x").or_else(|| digits.strip_prefix("0X")) {
        Some(hex) => i128::from_str_radix(hex, 16).ok()?,
        None => digits.parse::<i128>().ok()?,
    };
    if digits.is_empty() || digits.starts_with(['+', '-']) {
        return None;
    }
    Some(if neg { -magnitude } else { magnitude })
}

fn deliver(
    item: Item,
    stack: &mut [Frame],
    root: &mut Option<PlistValue>,
    offset: usize,
) -> Result<(), PlistError> {
    match (stack.last_mut(), item) {
        (None, Item::Value(v)) => {
            if root.is_some() {
                return Err(PlistError::malformed(offset, "more than one top-level object"));
            }
            *root = Some(v);
        }
        (None, Item::Key(_)) => {
            return Err(PlistError::malformed(offset, "<key> outside a dictionary"))
        }
        (Some(Frame::Array(items)), Item::Value(v)) => items.push(v),
        (Some(Frame::Dict { pending_key, .. }), Item::Key(k)) if pending_key.is_none() => {
            *pending_key = Some(k)
        }
        (Some(Frame::Dict { entries, pending_key }), Item::Value(v)) => match pending_key.take() {
            Some(k) => {
                entries.insert(k, v);
            }
            None => return Err(PlistError::malformed(offset, "dictionary value without key")),
        },
        _ => return Err(PlistError::malformed(offset, "misplaced element")),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entities_and_cdata() {
        let xml = r#"<plist><dict><key>A&amp;B</key><string>x &lt;y&gt; &#x263A; <![CDATA[<raw>]]></string></dict></plist>"#;
        let value = parse(xml.as_bytes()).unwrap();
        let PlistValue::Dictionary(d) = value else { panic!() };
        assert_eq!(d["A&B"], PlistValue::String("x <y> \u{263A} <raw>".into()));
    }

    #[test]
    fn integers() {
        assert_eq!(parse_integer("42"), Some(42));
        assert_eq!(parse_integer("-7"), Some(-7));
        assert_eq!(parse_integer("0x1F"), Some(31));
        assert_eq!(parse_integer("18446744073709551615"), Some(u64::MAX as i128));
        assert_eq!(parse_integer(""), None);
        assert_eq!(parse_integer("--1"), None);
        assert_eq!(parse_integer("1.5"), None);
    }

    #[test]
    fn structural_errors() {
        for bad in [
            "<plist><dict><key>a</key></dict></plist>",
            "<plist><dict><string>a</string></dict></plist>",
            "<plist><dict>",
            "<plist><string>a</string><string>b</string></plist>",
            "<plist><widget/></plist>",
            "<plist>loose text</plist>",
            "<plist><integer>x</integer></plist>",
            "<plist></plist>",
        ] {
            assert!(
                matches!(parse(bad.as_bytes()), Err(PlistError::MalformedPlist { .. })),
                "{bad}"
            );
        }
    }
}
