//! HTML ingestion: parse a page and pull out its leaf text blocks.
//!
//! Every block is identified by a canonical DOM path of the form
//! `/html[1]/body[1]/div[2]/p[1]/#text[1]`, where element steps count
//! same-tag element siblings and the final step counts text-node siblings
//! (1-based). The same grammar is produced by the tagging script, so paths
//! and text hashes here must stay byte-for-byte stable.

use std::collections::HashMap;
use std::fmt::Write as _;

use scraper::{Html, Node};
use serde::Serialize;
use thiserror::Error;

/// Elements whose text never counts as page content.
pub const EXCLUDED_TAGS: [&str; 5] = ["script", "style", "noscript", "template", "iframe"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("page is not valid UTF-8 and no usable charset was declared: {0}")]
    Encoding(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Document,
    Element {
        name: String,
        attrs: Vec<(String, String)>,
    },
    Text(String),
}

#[derive(Debug, Clone)]
pub struct DomNode {
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub kind: NodeKind,
}

impl DomNode {
    pub fn element_name(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Element { name, .. } => Some(name),
            _ => None,
        }
    }

    pub fn attr(&self, key: &str) -> Option<&str> {
        match &self.kind {
            NodeKind::Element { attrs, .. } => attrs
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(key))
                .map(|(_, v)| v.as_str()),
            _ => None,
        }
    }
}

/// Element tree of a parsed page. Comments, doctypes and processing
/// instructions are dropped; they take no part in path numbering.
#[derive(Debug, Clone)]
pub struct DomTree {
    nodes: Vec<DomNode>,
}

impl DomTree {
    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node(&self, id: NodeId) -> &DomNode {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    /// Text content of a text node.
    pub fn text(&self, id: NodeId) -> Option<&str> {
        match &self.node(id).kind {
            NodeKind::Text(t) => Some(t),
            _ => None,
        }
    }

    /// Number of text nodes anywhere in the tree.
    pub fn text_node_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Text(_)))
            .count()
    }

    /// Find the first element with the given (lowercase) name, in document order.
    pub fn find_element(&self, name: &str) -> Option<NodeId> {
        self.preorder()
            .into_iter()
            .find(|&id| self.node(id).element_name() == Some(name))
    }

    /// All node ids in document (pre-)order.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root()];
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.node(id).children.iter().rev().copied());
        }
        out
    }

    /// Resolve a canonical DOM path to the text node it names.
    pub fn resolve_path(&self, path: &str) -> Option<NodeId> {
        let rest = path.strip_prefix('/')?;
        let mut current = self.root();
        let steps: Vec<&str> = rest.split('/').collect();
        let (last, elements) = steps.split_last()?;
        for step in elements {
            let (tag, k) = parse_step(step)?;
            current = self
                .node(current)
                .children
                .iter()
                .copied()
                .filter(|&c| self.node(c).element_name() == Some(tag))
                .nth(k.checked_sub(1)?)?;
        }
        let (tag, m) = parse_step(last)?;
        if tag != "#text" {
            return None;
        }
        self.node(current)
            .children
            .iter()
            .copied()
            .filter(|&c| matches!(self.node(c).kind, NodeKind::Text(_)))
            .nth(m.checked_sub(1)?)
    }

    fn push(&mut self, parent: Option<NodeId>, kind: NodeKind) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(DomNode {
            parent,
            children: Vec::new(),
            kind,
        });
        if let Some(p) = parent {
            self.nodes[p.0].children.push(id);
        }
        id
    }
}

fn parse_step(step: &str) -> Option<(&str, usize)> {
    let open = step.find('[')?;
    let inner = step[open + 1..].strip_suffix(']')?;
    Some((&step[..open], inner.parse().ok()?))
}

/// Parse HTML with the error-recovering HTML5 algorithm. Never fails.
pub fn parse_document(html: &str) -> DomTree {
    let parsed = Html::parse_document(html);
    let mut tree = DomTree { nodes: Vec::new() };
    let root = tree.push(None, NodeKind::Document);

    let mut stack = vec![(parsed.tree.root(), root)];
    while let Some((src, dst)) = stack.pop() {
        // children pushed in reverse so they pop (and get ids) in document order
        let mut pending = Vec::new();
        for child in src.children() {
            let kind = match child.value() {
                Node::Element(el) => NodeKind::Element {
                    name: el.name().to_ascii_lowercase(),
                    attrs: el
                        .attrs()
                        .map(|(k, v)| (k.to_string(), v.to_string()))
                        .collect(),
                },
                Node::Text(t) => NodeKind::Text(t.to_string()),
                _ => continue,
            };
            let id = tree.push(Some(dst), kind);
            pending.push((child, id));
        }
        stack.extend(pending.into_iter().rev());
    }
    tree
}

/// Decode raw page bytes and parse them.
pub fn parse_document_bytes(bytes: &[u8]) -> Result<DomTree, IngestError> {
    Ok(parse_document(&decode_html(bytes)?))
}

/// Decode page bytes as UTF-8, falling back to a charset declared in a
/// `<meta>` tag within the first 1024 bytes.
pub fn decode_html(bytes: &[u8]) -> Result<String, IngestError> {
    let body = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let utf8_err = match std::str::from_utf8(body) {
        Ok(s) => return Ok(s.to_owned()),
        Err(e) => e,
    };
    let label = sniff_meta_charset(&body[..body.len().min(1024)])
        .ok_or_else(|| IngestError::Encoding(format!("{utf8_err}; no meta charset declared")))?;
    let encoding = encoding_rs::Encoding::for_label(label.as_bytes())
        .ok_or_else(|| IngestError::Encoding(format!("unknown charset {label:?}")))?;
    if encoding == encoding_rs::UTF_8 {
        return Err(IngestError::Encoding(utf8_err.to_string()));
    }
    encoding
        .decode_without_bom_handling_and_without_replacement(body)
        .map(|cow| cow.into_owned())
        .ok_or_else(|| IngestError::Encoding(format!("malformed {} input", encoding.name())))
}

fn sniff_meta_charset(head: &[u8]) -> Option<String> {
    let lower = head.to_ascii_lowercase();
    let mut from = 0;
    while let Some(pos) = find(&lower[from..], b"<meta") {
        let start = from + pos;
        let end = find(&lower[start..], b">").map_or(lower.len(), |e| start + e);
        let tag = &lower[start..end];
        if let Some(cs) = find(tag, b"charset=") {
            let value: String = tag[cs + 8..]
                .iter()
                .skip_while(|&&b| b == b'"' || b == b'\'' || b == b' ')
                .take_while(|&&b| b.is_ascii_alphanumeric() || b"-_:.".contains(&b))
                .map(|&b| b as char)
                .collect();
            if !value.is_empty() {
                return Some(value);
            }
        }
        from = end;
    }
    None
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

/// Collapse every run of Unicode whitespace to one space and trim the ends.
pub fn normalize_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// 64-bit FNV-1a over the UTF-8 bytes, as 16 lowercase hex digits.
pub fn text_hash(text: &str) -> String {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let h = text
        .bytes()
        .fold(OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(PRIME));
    format!("{h:016x}")
}

/// Attributes of one ancestor element that seed heuristics look at.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AncestorAttrs {
    pub id: Option<String>,
    pub class: Option<String>,
    /// `hidden` attribute or inline `display:none`.
    pub hidden: bool,
}

/// One leaf text node of the page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TextBlock {
    pub index: usize,
    pub dom_path: String,
    /// Lowercase element names from the root element down to the parent.
    pub tag_chain: Vec<String>,
    /// Parallel to `tag_chain`.
    #[serde(skip)]
    pub ancestors: Vec<AncestorAttrs>,
    pub text: String,
    pub text_hash: String,
}

impl TextBlock {
    /// True when some ancestor is hidden by attribute or inline style.
    pub fn is_hidden(&self) -> bool {
        self.ancestors.iter().any(|a| a.hidden)
    }
}

fn ancestor_attrs(node: &DomNode) -> AncestorAttrs {
    let style_hidden = node.attr("style").is_some_and(|s| {
        let compact: String = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_ascii_lowercase();
        compact.contains("display:none")
    });
    AncestorAttrs {
        id: node.attr("id").map(str::to_owned),
        class: node.attr("class").map(str::to_owned),
        hidden: node.attr("hidden").is_some() || style_hidden,
    }
}

/// Path step (`/tag[k]` or `/#text[m]`) for every node.
fn path_steps(tree: &DomTree) -> Vec<String> {
    let mut steps = vec![String::new(); tree.len()];
    for id in tree.preorder() {
        let mut tag_counts: HashMap<&str, usize> = HashMap::new();
        let mut text_count = 0usize;
        for &child in &tree.node(id).children {
            match &tree.node(child).kind {
                NodeKind::Element { name, .. } => {
                    let k = tag_counts.entry(name.as_str()).or_default();
                    *k += 1;
                    steps[child.0] = format!("/{name}[{k}]");
                }
                NodeKind::Text(_) => {
                    text_count += 1;
                    steps[child.0] = format!("/#text[{text_count}]");
                }
                NodeKind::Document => {}
            }
        }
    }
    steps
}

/// Extract the ordered, non-empty, non-excluded text blocks of a page.
pub fn extract_text_blocks(tree: &DomTree) -> Vec<TextBlock> {
    let steps = path_steps(tree);
    let mut blocks = Vec::new();
    for id in tree.preorder() {
        let Some(raw) = tree.text(id) else { continue };
        let text = normalize_text(raw);
        if text.is_empty() {
            continue;
        }

        let mut lineage = Vec::new();
        let mut cur = tree.node(id).parent;
        while let Some(p) = cur {
            if tree.node(p).element_name().is_some() {
                lineage.push(p);
            }
            cur = tree.node(p).parent;
        }
        lineage.reverse();

        let tag_chain: Vec<String> = lineage
            .iter()
            .filter_map(|&p| tree.node(p).element_name().map(str::to_owned))
            .collect();
        if tag_chain
            .iter()
            .any(|t| EXCLUDED_TAGS.contains(&t.as_str()))
        {
            continue;
        }

        let mut dom_path = String::new();
        for &p in &lineage {
            dom_path.push_str(&steps[p.0]);
        }
        let _ = write!(dom_path, "{}", steps[id.0]);

        blocks.push(TextBlock {
            index: blocks.len(),
            dom_path,
            tag_chain,
            ancestors: lineage
                .iter()
                .map(|&p| ancestor_attrs(tree.node(p)))
                .collect(),
            text_hash: text_hash(&text),
            text,
        });
    }
    blocks
}
