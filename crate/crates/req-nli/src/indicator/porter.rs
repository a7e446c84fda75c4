//! Porter suffix-stripping stemmer, as published in 1980.
//!
//! This is the original algorithm (step 2 maps `abli` to `able` and has no
//! `logi` rule). Words shorter than three characters are returned unchanged.

struct Stemmer {
    b: Vec<u8>,
    /// Current word length; bytes past `k` are stale, as in the reference
    /// implementation.
    k: usize,
    /// Stem length set by the last successful `ends` call.
    j: usize,
}

impl Stemmer {
    fn new(word: &str) -> Self {
        let b: Vec<u8> = word.bytes().collect();
        let k = b.len();
        Stemmer { b, k, j: 0 }
    }

    fn is_consonant(&self, i: usize) -> bool {
        match self.b[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => i == 0 || !self.is_consonant(i - 1),
            _ => true,
        }
    }

    /// Count of vowel-consonant sequences in the stem `b[0..j]`.
    fn measure(&self) -> usize {
        let n = self.j;
        let mut m = 0;
        let mut i = 0;
        while i < n && self.is_consonant(i) {
            i += 1;
        }
        loop {
            while i < n && !self.is_consonant(i) {
                i += 1;
            }
            if i == n {
                return m;
            }
            while i < n && self.is_consonant(i) {
                i += 1;
            }
            m += 1;
            if i == n {
                return m;
            }
        }
    }

    fn vowel_in_stem(&self) -> bool {
        (0..self.j).any(|i| !self.is_consonant(i))
    }

    /// True when `b[i]` repeats `b[i-1]` as a consonant pair.
    fn double_consonant(&self, i: usize) -> bool {
        i >= 1 && self.b[i] == self.b[i - 1] && self.is_consonant(i)
    }

    /// consonant-vowel-consonant ending at `i`, last consonant not w, x or y.
    fn cvc(&self, i: usize) -> bool {
        if i < 2 || !self.is_consonant(i) || self.is_consonant(i - 1) || !self.is_consonant(i - 2)
        {
            return false;
        }
        !matches!(self.b[i], b'w' | b'x' | b'y')
    }

    /// On a suffix match, record the stem length in `j`.
    fn ends(&mut self, s: &str) -> bool {
        let s = s.as_bytes();
        if s.len() > self.k {
            return false;
        }
        if &self.b[self.k - s.len()..self.k] == s {
            self.j = self.k - s.len();
            true
        } else {
            false
        }
    }

    /// Replace the current suffix (everything past `j`) with `s`.
    fn set_to(&mut self, s: &str) {
        let s = s.as_bytes();
        if self.b.len() < self.j + s.len() {
            self.b.resize(self.j + s.len(), 0);
        }
        self.b[self.j..self.j + s.len()].copy_from_slice(s);
        self.k = self.j + s.len();
    }

    /// `set_to` guarded by a non-zero measure.
    fn replace(&mut self, s: &str) {
        if self.measure() > 0 {
            self.set_to(s);
        }
    }

    /// Plural and past-participle endings.
    fn step1ab(&mut self) {
        if self.b[self.k - 1] == b's' {
            if self.ends("sses") {
                self.k -= 2;
            } else if self.ends("ies") {
                self.set_to("i");
            } else if self.b[self.k - 2] != b's' {
                self.k -= 1;
            }
        }
        if self.ends("eed") {
            if self.measure() > 0 {
                self.k -= 1;
            }
        } else if (self.ends("ed") || self.ends("ing")) && self.vowel_in_stem() {
            self.k = self.j;
            if self.ends("at") {
                self.set_to("ate");
            } else if self.ends("bl") {
                self.set_to("ble");
            } else if self.ends("iz") {
                self.set_to("ize");
            } else if self.double_consonant(self.k - 1) {
                self.k -= 1;
                if matches!(self.b[self.k - 1], b'l' | b's' | b'z') {
                    self.k += 1;
                }
            } else if self.measure() == 1 && self.cvc(self.k - 1) {
                self.set_to("e");
            }
        }
    }

    /// Terminal y to i when the stem has a vowel.
    fn step1c(&mut self) {
        if self.ends("y") && self.vowel_in_stem() {
            self.b[self.k - 1] = b'i';
        }
    }

    /// Double suffixes to single ones, e.g. -ization to -ize.
    fn step2(&mut self) {
        if self.k < 2 {
            return;
        }
        match self.b[self.k - 2] {
            b'a' => {
                if self.ends("ational") {
                    self.replace("ate");
                } else if self.ends("tional") {
                    self.replace("tion");
                }
            }
            b'c' => {
                if self.ends("enci") {
                    self.replace("ence");
                } else if self.ends("anci") {
                    self.replace("ance");
                }
            }
            b'e' => {
                if self.ends("izer") {
                    self.replace("ize");
                }
            }
            b'l' => {
                if self.ends("abli") {
                    self.replace("able");
                } else if self.ends("alli") {
                    self.replace("al");
                } else if self.ends("entli") {
                    self.replace("ent");
                } else if self.ends("eli") {
                    self.replace("e");
                } else if self.ends("ousli") {
                    self.replace("ous");
                }
            }
            b'o' => {
                if self.ends("ization") {
                    self.replace("ize");
                } else if self.ends("ation") {
                    self.replace("ate");
                } else if self.ends("ator") {
                    self.replace("ate");
                }
            }
            b's' => {
                if self.ends("alism") {
                    self.replace("al");
                } else if self.ends("iveness") {
                    self.replace("ive");
                } else if self.ends("fulness") {
                    self.replace("ful");
                } else if self.ends("ousness") {
                    self.replace("ous");
                }
            }
            b't' => {
                if self.ends("aliti") {
                    self.replace("al");
                } else if self.ends("iviti") {
                    self.replace("ive");
                } else if self.ends("biliti") {
                    self.replace("ble");
                }
            }
            _ => {}
        }
    }

    /// -icate, -ative, -alize and friends.
    fn step3(&mut self) {
        match self.b[self.k - 1] {
            b'e' => {
                if self.ends("icate") {
                    self.replace("ic");
                } else if self.ends("ative") {
                    self.replace("");
                } else if self.ends("alize") {
                    self.replace("al");
                }
            }
            b'i' => {
                if self.ends("iciti") {
                    self.replace("ic");
                }
            }
            b'l' => {
                if self.ends("ical") {
                    self.replace("ic");
                } else if self.ends("ful") {
                    self.replace("");
                }
            }
            b's' => {
                if self.ends("ness") {
                    self.replace("");
                }
            }
            _ => {}
        }
    }

    /// Strip residual suffixes when the measure exceeds one.
    fn step4(&mut self) {
        if self.k < 2 {
            return;
        }
        let matched = match self.b[self.k - 2] {
            b'a' => self.ends("al"),
            b'c' => self.ends("ance") || self.ends("ence"),
            b'e' => self.ends("er"),
            b'i' => self.ends("ic"),
            b'l' => self.ends("able") || self.ends("ible"),
            b'n' => {
                self.ends("ant") || self.ends("ement") || self.ends("ment") || self.ends("ent")
            }
            b'o' => {
                (self.ends("ion")
                    && self.j >= 1
                    && matches!(self.b[self.j - 1], b's' | b't'))
                    || self.ends("ou")
            }
            b's' => self.ends("ism"),
            b't' => self.ends("ate") || self.ends("iti"),
            b'u' => self.ends("ous"),
            b'v' => self.ends("ive"),
            b'z' => self.ends("ize"),
            _ => false,
        };
        if matched && self.measure() > 1 {
            self.k = self.j;
        }
    }

    /// Tidy a final -e and -ll.
    fn step5(&mut self) {
        self.j = self.k;
        if self.b[self.k - 1] == b'e' {
            let a = self.measure();
            if a > 1 || (a == 1 && !self.cvc(self.k - 2)) {
                self.k -= 1;
            }
        }
        if self.b[self.k - 1] == b'l' && self.double_consonant(self.k - 1) && self.measure() > 1 {
            self.k -= 1;
        }
    }

    fn into_stem(self) -> String {
        String::from_utf8_lossy(&self.b[..self.k]).into_owned()
    }
}

/// Stem one lowercase ASCII word.
pub fn stem(word: &str) -> String {
    if word.len() <= 2 || !word.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit()) {
        return word.to_string();
    }
    let mut s = Stemmer::new(word);
    s.step1ab();
    s.step1c();
    s.step2();
    s.step3();
    s.step4();
    s.step5();
    s.into_stem()
}
