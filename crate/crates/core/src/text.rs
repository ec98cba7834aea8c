//! Code-point addressing over UTF-8 strings.
//!
//! Every offset stored in this crate counts Unicode scalar values. Rust
//! strings are byte-indexed, so anything that slices document text goes
//! through a [`CharIndex`].

/// Byte offset of every code point boundary of a string, plus the final
/// boundary at `text.len()`.
#[derive(Debug, Clone)]
pub struct CharIndex<'a> {
    text: &'a str,
    boundaries: Vec<usize>,
}

impl<'a> CharIndex<'a> {
    pub fn new(text: &'a str) -> Self {
        let mut boundaries: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        boundaries.push(text.len());
        Self { text, boundaries }
    }

    /// Length in code points.
    pub fn len(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn text(&self) -> &'a str {
        self.text
    }

    /// Slice by code-point range; `None` when out of range or inverted.
    pub fn slice(&self, start: usize, stop: usize) -> Option<&'a str> {
        if start > stop || stop > self.len() {
            return None;
        }
        Some(&self.text[self.boundaries[start]..self.boundaries[stop]])
    }

    pub fn byte_offset(&self, char_offset: usize) -> usize {
        self.boundaries[char_offset]
    }

    /// Code-point offset of a byte offset that lies on a char boundary.
    pub fn char_offset(&self, byte_offset: usize) -> usize {
        self.boundaries
            .binary_search(&byte_offset)
            .expect("byte offset is not on a char boundary")
    }
}

/// Code-point length of a string.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slices_multibyte_text_by_code_point() {
        let idx = CharIndex::new("Zoë Ünal");
        assert_eq!(idx.len(), 8);
        assert_eq!(idx.slice(0, 3), Some("Zoë"));
        assert_eq!(idx.slice(4, 8), Some("Ünal"));
        assert_eq!(idx.slice(4, 9), None);
        assert_eq!(idx.char_offset(idx.byte_offset(5)), 5);
    }

    #[test]
    fn empty_text_has_one_boundary() {
        let idx = CharIndex::new("");
        assert!(idx.is_empty());
        assert_eq!(idx.slice(0, 0), Some(""));
    }
}
