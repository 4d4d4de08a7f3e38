//! METEOR restricted to exact token matches.
//!
//! The alignment maximizes the number of matches and, among maximal
//! alignments, minimizes the number of chunks (runs of matches contiguous in
//! both sentences). The minimum is found by branch and bound, seeded with a
//! greedy longest-run tiling; a node budget caps pathological inputs, in
//! which case the best alignment found so far is used.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteorParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for MeteorParams {
    fn default() -> Self {
        MeteorParams {
            alpha: 0.9,
            beta: 3.0,
            gamma: 0.5,
        }
    }
}

const NODE_BUDGET: usize = 200_000;

pub fn meteor<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    meteor_with(candidate, reference, &MeteorParams::default())
}

pub fn meteor_with<S: AsRef<str>>(candidate: &[S], reference: &[S], params: &MeteorParams) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let (mut c, mut r) = (
        Vec::with_capacity(candidate.len()),
        Vec::with_capacity(reference.len()),
    );
    for (tokens, out) in [(candidate, &mut c), (reference, &mut r)] {
        for s in tokens {
            let next = ids.len();
            out.push(*ids.entry(s.as_ref()).or_insert(next));
        }
    }

    let (m, chunks) = min_chunk_alignment(&c, &r);
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / c.len() as f64;
    let rec = m as f64 / r.len() as f64;
    let fmean = p * rec / (params.alpha * p + (1.0 - params.alpha) * rec);
    let penalty = params.gamma * (chunks as f64 / m as f64).powf(params.beta);
    (100.0 * fmean * (1.0 - penalty)).clamp(0.0, 100.0)
}

/// Number of chunks in an alignment given as `align[i] = Some(j)`.
pub(crate) fn count_chunks(align: &[Option<usize>]) -> usize {
    let mut chunks = 0;
    let mut prev: Option<(usize, usize)> = None;
    for (i, a) in align.iter().enumerate() {
        if let Some(j) = *a {
            if prev != Some((i.wrapping_sub(1), j.wrapping_sub(1))) {
                chunks += 1;
            }
            prev = Some((i, j));
        }
    }
    chunks
}

fn greedy_tiling(c: &[usize], r: &[usize]) -> Vec<Option<usize>> {
    let mut align = vec![None; c.len()];
    let mut used_c = vec![false; c.len()];
    let mut used_r = vec![false; r.len()];
    loop {
        let mut best = (0usize, 0usize, 0usize);
        for i in 0..c.len() {
            for j in 0..r.len() {
                let mut len = 0;
                while i + len < c.len()
                    && j + len < r.len()
                    && !used_c[i + len]
                    && !used_r[j + len]
                    && c[i + len] == r[j + len]
                {
                    len += 1;
                }
                if len > best.2 {
                    best = (i, j, len);
                }
            }
        }
        let (i, j, len) = best;
        if len == 0 {
            return align;
        }
        for k in 0..len {
            align[i + k] = Some(j + k);
            used_c[i + k] = true;
            used_r[j + k] = true;
        }
    }
}

struct Search<'a> {
    c: &'a [usize],
    ref_positions: Vec<Vec<usize>>,
    need: Vec<usize>,
    /// Occurrences of each type at candidate positions `>= i`.
    remaining: Vec<usize>,
    used_r: Vec<bool>,
    best: usize,
    nodes: usize,
}

impl Search<'_> {
    fn run(&mut self, i: usize, prev: Option<(usize, usize)>, chunks: usize, need_total: usize) {
        self.nodes += 1;
        if chunks >= self.best || self.nodes > NODE_BUDGET {
            return;
        }
        if need_total == 0 {
            self.best = chunks;
            return;
        }
        if i == self.c.len() {
            return;
        }
        let t = self.c[i];
        self.remaining[t] -= 1;

        if self.need[t] > 0 {
            let continues = prev.and_then(|(pi, pj)| (pi + 1 == i).then_some(pj + 1));
            let mut options: Vec<usize> = self.ref_positions[t]
                .iter()
                .copied()
                .filter(|&j| !self.used_r[j])
                .collect();
            if let Some(k) = continues.and_then(|cj| options.iter().position(|&j| j == cj)) {
                options.swap(0, k);
            }
            for j in options {
                let extra = usize::from(continues != Some(j));
                self.used_r[j] = true;
                self.need[t] -= 1;
                self.run(i + 1, Some((i, j)), chunks + extra, need_total - 1);
                self.need[t] += 1;
                self.used_r[j] = false;
            }
        }
        if self.remaining[t] >= self.need[t] {
            self.run(i + 1, prev, chunks, need_total);
        }
        self.remaining[t] += 1;
    }
}

/// `(matches, chunks)` of a maximal exact alignment with the fewest chunks.
pub(crate) fn min_chunk_alignment(c: &[usize], r: &[usize]) -> (usize, usize) {
    let types = c.iter().chain(r).max().map_or(0, |m| m + 1);
    let mut count_c = vec![0usize; types];
    let mut ref_positions = vec![Vec::new(); types];
    for &t in c {
        count_c[t] += 1;
    }
    for (j, &t) in r.iter().enumerate() {
        ref_positions[t].push(j);
    }
    let need: Vec<usize> = (0..types)
        .map(|t| count_c[t].min(ref_positions[t].len()))
        .collect();
    let m: usize = need.iter().sum();
    if m == 0 {
        return (0, 0);
    }
    let seed = count_chunks(&greedy_tiling(c, r));
    if seed <= 1 {
        return (m, seed);
    }
    let mut search = Search {
        c,
        ref_positions,
        need,
        remaining: count_c,
        used_r: vec![false; r.len()],
        best: seed,
        nodes: 0,
    };
    search.run(0, None, 0, m);
    (m, search.best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identity_four_tokens() {
        let x = t("a b c d");
        assert!((meteor(&x, &x) - 99.21875).abs() < 1e-12);
    }

    #[test]
    fn no_overlap_and_empty() {
        assert_eq!(meteor(&t("a b"), &t("c d")), 0.0);
        assert_eq!(meteor::<&str>(&[], &t("c d")), 0.0);
    }

    #[test]
    fn single_shared_token() {
        let (c, r) = (t("x a y"), t("a b"));
        let (p, rec) = (1.0 / 3.0, 0.5);
        let fmean = p * rec / (0.9 * p + 0.1 * rec);
        assert!((meteor(&c, &r) - 50.0 * fmean).abs() < 1e-12);
    }

    #[test]
    fn repeated_tokens_two_chunks() {
        // a b a b c / b a b c a: "b a b c" in one run plus the leading "a"
        let c = [0, 1, 0, 1, 2];
        let r = [1, 0, 1, 2, 0];
        let greedy = count_chunks(&greedy_tiling(&c, &r));
        let (m, best) = min_chunk_alignment(&c, &r);
        assert_eq!(m, 5);
        assert!(best <= greedy);
        assert_eq!(best, 2);
    }
}
