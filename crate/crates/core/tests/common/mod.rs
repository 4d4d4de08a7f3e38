#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use solsum_core::callgraph::{CallTree, RefTree, EXTERNAL};
use solsum_core::parser::{parse_source, SourceUnit};
use solsum_core::pipeline::{self, PipelineConfig};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn corpus_dir() -> PathBuf {
    fixture_dir().join("corpus")
}

pub fn corpus_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "sol"))
        .collect();
    files.sort();
    files
}

pub fn parse_file(path: &Path) -> SourceUnit {
    let text = std::fs::read_to_string(path).unwrap();
    parse_source(&text, &path.display().to_string()).unwrap()
}

pub fn parse_fixture(name: &str) -> SourceUnit {
    parse_file(&corpus_dir().join(name))
}

/// Preorder `(depth, contract, function, count, cycle)` rows.
pub type Rows = Vec<(usize, String, String, usize, bool)>;

pub fn tree_rows(tree: &CallTree) -> Rows {
    tree.root
        .walk()
        .into_iter()
        .map(|(d, n)| (d, n.contract.clone(), n.function.clone(), n.count, n.cycle))
        .collect()
}

/// Recursive DFS with an explicit on-path set.
pub fn oracle_tree(reference: &RefTree, contract: &str, function: &str, max_depth: usize) -> Rows {
    fn visit(
        r: &RefTree,
        node: (&str, &str),
        depth: usize,
        max_depth: usize,
        on_path: &mut HashSet<(String, String)>,
        out: &mut Rows,
    ) {
        if depth >= max_depth {
            return;
        }
        let Some(callees) = r.callees(node.0, node.1) else {
            return;
        };
        let mut ordered: Vec<_> = callees.iter().collect();
        ordered.sort_by_key(|(_, e)| e.first_offset);
        for (name, entry) in ordered {
            let key = (entry.defining_contract.clone(), name.clone());
            let cycle = on_path.contains(&key);
            out.push((depth + 1, key.0.clone(), key.1.clone(), entry.count, cycle));
            if cycle || entry.defining_contract == EXTERNAL {
                continue;
            }
            on_path.insert(key.clone());
            visit(r, (&key.0, &key.1), depth + 1, max_depth, on_path, out);
            on_path.remove(&key);
        }
    }
    let mut out = vec![(1, contract.to_string(), function.to_string(), 1, false)];
    let mut on_path = HashSet::from([(contract.to_string(), function.to_string())]);
    visit(
        reference,
        (contract, function),
        1,
        max_depth,
        &mut on_path,
        &mut out,
    );
    out
}

/// Every elementary cycle, found by trying all simple paths from every node.
pub fn oracle_cycles(reference: &RefTree) -> BTreeSet<Vec<(String, String)>> {
    let mut edges: BTreeMap<(String, String), BTreeSet<(String, String)>> = BTreeMap::new();
    for (c, f) in reference.functions() {
        let targets = edges.entry((c.to_string(), f.to_string())).or_default();
        for (callee, e) in reference.callees(c, f).unwrap() {
            if e.defining_contract != EXTERNAL && reference.contains(&e.defining_contract, callee) {
                targets.insert((e.defining_contract.clone(), callee.clone()));
            }
        }
    }
    fn walk(
        edges: &BTreeMap<(String, String), BTreeSet<(String, String)>>,
        start: &(String, String),
        path: &mut Vec<(String, String)>,
        found: &mut BTreeSet<Vec<(String, String)>>,
    ) {
        let last = path.last().unwrap().clone();
        for next in edges.get(&last).into_iter().flatten() {
            if next == start {
                let min = path
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, n)| (*n).clone())
                    .unwrap()
                    .0;
                let mut cycle = path.clone();
                cycle.rotate_left(min);
                found.insert(cycle);
            } else if !path.contains(next) {
                path.push(next.clone());
                walk(edges, start, path, found);
                path.pop();
            }
        }
    }
    let mut found = BTreeSet::new();
    for start in edges.keys() {
        walk(&edges, start, &mut vec![start.clone()], &mut found);
    }
    found
}

/// BLEU-4 from string-keyed n-gram tables, multiplied out directly.
pub fn oracle_bleu(c: &[String], r: &[String]) -> f64 {
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let grams = |t: &[String], n: usize| {
        let mut m: BTreeMap<String, usize> = BTreeMap::new();
        if t.len() >= n {
            for i in 0..=t.len() - n {
                *m.entry(t[i..i + n].join("\u{1}")).or_default() += 1;
            }
        }
        m
    };
    let mut product = 1.0f64;
    for n in 1..=4 {
        let cg = grams(c, n);
        let rg = grams(r, n);
        let total: usize = cg.values().sum();
        let mut clipped = 0;
        for (g, k) in &cg {
            clipped += (*k).min(*rg.get(g).unwrap_or(&0));
        }
        let p = if clipped > 0 {
            clipped as f64 / total as f64
        } else if n == 1 {
            return 0.0;
        } else {
            1.0 / (total as f64 + 1.0)
        };
        product *= p;
    }
    let bp = if c.len() > r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    };
    100.0 * bp * product.powf(0.25)
}

/// Full-table LCS.
pub fn oracle_lcs(a: &[String], b: &[String]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in (0..a.len()).rev() {
        for j in (0..b.len()).rev() {
            t[i][j] = if a[i] == b[j] {
                1 + t[i + 1][j + 1]
            } else {
                t[i + 1][j].max(t[i][j + 1])
            };
        }
    }
    t[0][0]
}

/// Exact-match METEOR by enumerating every alignment. Only for short inputs.
pub fn oracle_meteor(c: &[String], r: &[String]) -> f64 {
    fn enumerate(
        c: &[String],
        r: &[String],
        i: usize,
        used: &mut Vec<bool>,
        align: &mut Vec<Option<usize>>,
        best: &mut (usize, usize),
    ) {
        if i == c.len() {
            let m = align.iter().flatten().count();
            let mut chunks = 0;
            let mut prev: Option<(usize, usize)> = None;
            for (ci, a) in align.iter().enumerate() {
                if let Some(j) = *a {
                    if !matches!(prev, Some((pi, pj)) if pi + 1 == ci && pj + 1 == j) {
                        chunks += 1;
                    }
                    prev = Some((ci, j));
                }
            }
            if m > best.0 || (m == best.0 && chunks < best.1) {
                *best = (m, chunks);
            }
            return;
        }
        align.push(None);
        enumerate(c, r, i + 1, used, align, best);
        align.pop();
        for j in 0..r.len() {
            if !used[j] && c[i] == r[j] {
                used[j] = true;
                align.push(Some(j));
                enumerate(c, r, i + 1, used, align, best);
                align.pop();
                used[j] = false;
            }
        }
    }
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let mut best = (0, usize::MAX);
    enumerate(
        c,
        r,
        0,
        &mut vec![false; r.len()],
        &mut Vec::new(),
        &mut best,
    );
    let (m, chunks) = best;
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / c.len() as f64;
    let rec = m as f64 / r.len() as f64;
    let fmean = 10.0 * p * rec / (rec + 9.0 * p);
    let frag = chunks as f64 / m as f64;
    100.0 * fmean * (1.0 - 0.5 * frag * frag * frag)
}

pub fn strings(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

/// Config for a fresh repository in `dir` with splits that leave every
/// fixture file represented in the test split.
pub fn test_config(dir: &Path) -> PipelineConfig {
    PipelineConfig {
        repo_root: dir.to_path_buf(),
        ratios: (0.6, 0.0, 0.4),
        ..PipelineConfig::default()
    }
}

/// Ingests the fixture corpus, splits it and builds the index.
pub fn prepared_repo(dir: &Path) -> PipelineConfig {
    let config = test_config(dir);
    pipeline::cmd_ingest(&config, &[corpus_dir()]).unwrap();
    pipeline::cmd_split(&config).unwrap();
    pipeline::cmd_index(&config).unwrap();
    config
}

#[derive(Clone)]
pub struct Reply {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Reply {
    pub fn json(status: u16, body: &str) -> Self {
        Reply {
            status,
            headers: Vec::new(),
            body: body.to_string(),
        }
    }

    pub fn with_header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }
}

/// A captured request: headers (lowercased names) and body.
#[derive(Debug, Clone)]
pub struct Captured {
    pub headers: Vec<(String, String)>,
    pub body: String,
}

pub struct StubServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<Captured>>>,
}

/// Serves one connection per call of `respond`, which sees the request
/// number (from 0) and body. Every reply closes its connection.
pub fn stub_server<F>(respond: F) -> StubServer
where
    F: Fn(usize, &str) -> Reply + Send + Sync + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let requests: Arc<Mutex<Vec<Captured>>> = Arc::default();
    let log = requests.clone();
    let respond = Arc::new(respond);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let log = log.clone();
            let respond = respond.clone();
            std::thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut headers = Vec::new();
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                loop {
                    line.clear();
                    if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some((k, v)) = line.trim_end().split_once(':') {
                        headers.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
                    }
                }
                let len: usize = headers
                    .iter()
                    .find(|(k, _)| k == "content-length")
                    .map_or(0, |(_, v)| v.parse().unwrap());
                let mut body = vec![0u8; len];
                reader.read_exact(&mut body).unwrap();
                let body = String::from_utf8(body).unwrap();
                let n = {
                    let mut log = log.lock().unwrap();
                    log.push(Captured {
                        headers,
                        body: body.clone(),
                    });
                    log.len() - 1
                };
                let reply = respond(n, &body);
                let mut out = format!(
                    "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n",
                    reply.status,
                    reply.body.len()
                );
                for (k, v) in &reply.headers {
                    out.push_str(&format!("{k}: {v}\r\n"));
                }
                out.push_str("\r\n");
                out.push_str(&reply.body);
                let _ = stream.write_all(out.as_bytes());
            });
        }
    });
    StubServer { url, requests }
}
