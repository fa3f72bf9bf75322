//! Plain-text extraction from raw HTML.
//!
//! A small forgiving scanner, not a conforming parser: tags are dropped,
//! `script`/`style`/`noscript`/`template` content is skipped, block-level
//! tags become line breaks and character references are decoded.

const BLOCK_TAGS: &[&str] = &[
    "address",
    "article",
    "aside",
    "blockquote",
    "br",
    "dd",
    "div",
    "dl",
    "dt",
    "fieldset",
    "figcaption",
    "figure",
    "footer",
    "form",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "header",
    "hr",
    "li",
    "main",
    "nav",
    "ol",
    "p",
    "pre",
    "section",
    "table",
    "tbody",
    "td",
    "tfoot",
    "th",
    "thead",
    "tr",
    "ul",
    "body",
    "html",
];

const RAW_TEXT_TAGS: &[&str] = &["script", "style", "noscript", "template"];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extracted {
    pub title: String,
    pub text: String,
}

struct Tag<'a> {
    name: String,
    closing: bool,
    /// Input after the closing `>`.
    rest: &'a str,
}

fn parse_tag(input: &str) -> Option<Tag<'_>> {
    debug_assert!(input.starts_with('<'));
    let body = &input[1..];
    let (closing, body) = match body.strip_prefix('/') {
        Some(b) => (true, b),
        None => (false, body),
    };
    let name: String = body
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '-' || *c == ':')
        .collect::<String>()
        .to_ascii_lowercase();

    // Find the end of the tag, skipping quoted attribute values.
    let mut quote: Option<char> = None;
    for (i, c) in body.char_indices() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == '"' || c == '\'' => quote = Some(c),
            None if c == '>' => return Some(Tag { name, closing, rest: &body[i + 1..] }),
            None => {}
        }
    }
    None
}

/// Whether `<` at the start of `s` opens markup rather than being text.
fn opens_markup(s: &str) -> bool {
    matches!(s[1..].chars().next(), Some(c) if c.is_ascii_alphabetic() || c == '/' || c == '!' || c == '?')
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let needle = needle.as_bytes();
    haystack.as_bytes().windows(needle.len()).position(|w| w.eq_ignore_ascii_case(needle))
}

pub fn extract(html: &str) -> Extracted {
    let mut raw = String::with_capacity(html.len() / 2);
    let mut title_raw = String::new();
    let mut in_title = false;
    let mut rest = html;

    while let Some(lt) = rest.find('<') {
        let (text, markup) = rest.split_at(lt);
        if in_title {
            title_raw.push_str(text);
        } else {
            raw.push_str(text);
        }
        if !opens_markup(markup) {
            if in_title {
                title_raw.push('<');
            } else {
                raw.push('<');
            }
            rest = &markup[1..];
            continue;
        }
        if let Some(comment) = markup.strip_prefix("<!--") {
            rest = match comment.find("-->") {
                Some(end) => &comment[end + 3..],
                None => "",
            };
            continue;
        }
        let Some(tag) = parse_tag(markup) else {
            // Unterminated tag: the remainder is markup.
            rest = "";
            break;
        };
        rest = tag.rest;
        if tag.name == "title" {
            in_title = !tag.closing;
            continue;
        }
        if !tag.closing && RAW_TEXT_TAGS.contains(&tag.name.as_str()) {
            let close = format!("</{}", tag.name);
            rest = match find_ci(rest, &close) {
                Some(at) => match rest[at..].find('>') {
                    Some(gt) => &rest[at + gt + 1..],
                    None => "",
                },
                None => "",
            };
            continue;
        }
        if BLOCK_TAGS.contains(&tag.name.as_str()) {
            raw.push('\n');
        }
    }
    if in_title {
        title_raw.push_str(rest);
    } else {
        raw.push_str(rest);
    }

    Extracted { title: normalize_inline(&decode(&title_raw)), text: normalize_lines(&decode(&raw)) }
}

fn decode(s: &str) -> String {
    html_escape::decode_html_entities(s).into_owned()
}

fn normalize_inline(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Collapses whitespace inside lines and drops empty lines.
fn normalize_lines(s: &str) -> String {
    s.lines().map(normalize_inline).filter(|l| !l.is_empty()).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn title_and_paragraph() {
        let e = extract("<title>T</title><p>cassava</p>");
        assert_eq!(e.title, "T");
        assert_eq!(e.text, "cassava");
    }

    #[test]
    fn scripts_and_styles_are_dropped() {
        let e = extract(
            "<html><head><style>p { color: red }</style><script>var x = '<p>';</script></head>\
             <body><p>Hello</p><SCRIPT type=\"x\">alert(1)</SCRIPT><p>world</p></body></html>",
        );
        assert_eq!(e.text, "Hello\nworld");
    }

    #[test]
    fn block_tags_break_lines_and_inline_tags_do_not() {
        let e = extract("<div>one <b>two</b></div><div>three<br>four</div>");
        assert_eq!(e.text, "one two\nthree\nfour");
    }

    #[test]
    fn entities_are_decoded() {
        let e = extract("<p>Fish &amp; chips &lt;3 &eacute;t&#233; &#x41;</p>");
        assert_eq!(e.text, "Fish & chips <3 été A");
    }

    #[test]
    fn quoted_angle_brackets_in_attributes() {
        let e = extract("<a title=\"a > b\" href='x'>link</a> text");
        assert_eq!(e.text, "link text");
    }

    #[test]
    fn comments_and_unterminated_tags() {
        assert_eq!(extract("a<!-- <p>hidden</p> -->b").text, "ab");
        assert_eq!(extract("before <p class=\"x").text, "before");
        assert_eq!(extract("1 < 2").text, "1 < 2");
    }
}
