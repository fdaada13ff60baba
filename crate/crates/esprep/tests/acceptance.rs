//! End-to-end acceptance gate. Each test prints a single PASS line with the
//! measured values; a failing criterion panics with the measurement.

mod common;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::Instant;

use esprep::clean::{fix_encoding, CleanConfig, LangModel};
use esprep::corpus::Document;
use esprep::dedup::{self, minhash, DedupConfig, DedupMode};
use esprep::metrics;
use esprep::noise::{self, NoiseConfig, Objective, MASK_PLACEHOLDER};
use esprep::tok::TokenSeq;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn gen_chunk(i: u64, n: usize) -> (TokenSeq, Vec<std::ops::Range<usize>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE ^ i);
    let ids: Vec<u32> = (0..n).map(|_| rng.gen_range(300..5000)).collect();
    let spans: Vec<_> = (0..n / 64).map(|s| s * 64..(s + 1) * 64).collect();
    (TokenSeq::new(ids, i), spans)
}

fn multiset(ids: &[u32]) -> BTreeMap<u32, usize> {
    let mut m = BTreeMap::new();
    for &id in ids {
        *m.entry(id).or_insert(0) += 1;
    }
    m
}

#[test]
fn criterion_1_bart_mask_rate() {
    let cfg = NoiseConfig {
        objective: Objective::Bart,
        seed: 42,
        ..NoiseConfig::default()
    };
    let start = Instant::now();
    let mut covered = 0usize;
    let mut total = 0usize;
    for i in 0..1000u64 {
        let (chunk, spans) = gen_chunk(i, 512);
        let pair = noise::bart_noise(&chunk, &spans, &cfg, 0).unwrap();
        assert_eq!(
            multiset(&pair.target_ids),
            multiset(&chunk.ids),
            "target multiset differs from source chunk"
        );
        let kept = pair
            .input_ids
            .iter()
            .filter(|&&id| id != MASK_PLACEHOLDER)
            .count();
        covered += 512 - kept;
        total += 512;
    }
    let elapsed = start.elapsed();
    let fraction = covered as f64 / total as f64;
    assert!(
        (fraction - 0.30).abs() <= 0.02,
        "masked fraction {fraction:.4} outside 0.30 +/- 0.02"
    );
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10s");
    println!(
        "[PASS] criterion 1: BART masked fraction {fraction:.4} (target 0.30 +/- 0.02) in {elapsed:.2?}"
    );
}

#[test]
fn criterion_2_t5_corruption() {
    let cfg = NoiseConfig {
        objective: Objective::T5,
        seed: 42,
        ..NoiseConfig::default()
    };
    let sentinels: Vec<u32> = (0..100).map(|i| 5 + i).collect();
    let sentinel_set: HashSet<u32> = sentinels.iter().copied().collect();
    let mut noise_tokens = 0usize;
    let mut spans_count = 0usize;
    let mut total = 0usize;
    for i in 0..1000u64 {
        let (chunk, _) = gen_chunk(i, 512);
        let pair = noise::t5_span_corrupt(&chunk, &cfg, 0, &sentinels).unwrap();
        let n_sent = pair
            .target_ids
            .iter()
            .filter(|id| sentinel_set.contains(id))
            .count();
        noise_tokens += pair.target_ids.len() - n_sent;
        spans_count += n_sent - 1; // final sentinel closes the target
        total += 512;
        assert_eq!(
            noise::t5_reconstruct(&pair, &sentinels),
            chunk.ids,
            "splice reconstruction failed for chunk {i}"
        );
    }
    let fraction = noise_tokens as f64 / total as f64;
    let mean_span = noise_tokens as f64 / spans_count as f64;
    assert!(
        (fraction - 0.15).abs() <= 0.02,
        "corrupted fraction {fraction:.4} outside 0.15 +/- 0.02"
    );
    assert!(
        (mean_span - 3.0).abs() <= 0.3,
        "mean span {mean_span:.3} outside 3.0 +/- 0.3"
    );
    println!(
        "[PASS] criterion 2: T5 corruption {fraction:.4} (0.15 +/- 0.02), mean span {mean_span:.3} (3.0 +/- 0.3), reconstruction exact"
    );
}

/// Exhaustive best-segmentation search with the production tie rules,
/// summing scores right-to-left.
fn enumerate_best(word: &str, vocab: &[(String, f64)]) -> Option<Vec<String>> {
    fn rec(rest: &str, vocab: &[(String, f64)], acc: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
        if rest.is_empty() {
            out.push(acc.clone());
            return;
        }
        for (piece, _) in vocab {
            if let Some(tail) = rest.strip_prefix(piece.as_str()) {
                acc.push(piece.clone());
                rec(tail, vocab, acc, out);
                acc.pop();
            }
        }
    }
    let scores: HashMap<&str, f64> = vocab.iter().map(|(p, s)| (p.as_str(), *s)).collect();
    let mut all = Vec::new();
    rec(word, vocab, &mut Vec::new(), &mut all);
    all.into_iter().max_by(|a, b| {
        let score = |seg: &[String]| {
            seg.iter().rev().fold(0.0, |acc, p| scores[p.as_str()] + acc)
        };
        score(a)
            .total_cmp(&score(b))
            .then(b.len().cmp(&a.len()))
            .then_with(|| {
                for (x, y) in a.iter().zip(b.iter()) {
                    match x.chars().count().cmp(&y.chars().count()) {
                        std::cmp::Ordering::Equal => continue,
                        other => return other,
                    }
                }
                std::cmp::Ordering::Equal
            })
    })
}

#[test]
fn criterion_3_tokenizers() {
    let stock = common::word_stock(2000);
    let corpus = common::gen_corpus(7, &stock, 10 * 1024 * 1024);
    let n_docs = corpus.len();

    let bpe_target = 1200;
    let bpe = esprep::tok::bpe::train_bpe(corpus.iter().cloned(), bpe_target, esprep::tok::SpecialProfile::Bart)
        .unwrap();
    assert_eq!(bpe.vocab_size(), bpe_target, "BPE vocab size mismatch");

    let uni_target = 1000;
    let uni = esprep::tok::unigram::train_unigram(
        corpus.iter().cloned(),
        uni_target,
        esprep::tok::SpecialProfile::T5,
    )
    .unwrap();
    assert_eq!(uni.vocab_size(), uni_target, "unigram vocab size mismatch");

    // Roundtrip on 10,000 held-out whitespace-normalized documents.
    let mut rng = ChaCha8Rng::seed_from_u64(0xAB);
    for i in 0..10_000 {
        let text = common::gen_doc_text(&mut rng, &stock, 3);
        let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
        for tok in [&bpe, &uni] {
            let decoded = tok.decode(&tok.encode(&normalized, i).ids).unwrap();
            assert_eq!(decoded, normalized, "roundtrip failed on doc {i}");
        }
    }

    // Viterbi vs exhaustive enumeration on 500 random words <= 12 chars.
    let vocab: Vec<(String, f64)> = uni
        .pieces()
        .iter()
        .filter(|(p, _)| !p.starts_with('<'))
        .cloned()
        .collect();
    let mut checked = 0;
    let mut wi = 0;
    while checked < 500 {
        let word = &stock[wi % stock.len()];
        wi += 1;
        if word.chars().count() > 12 {
            continue;
        }
        let marked = format!("▁{word}");
        let expected = enumerate_best(&marked, &vocab).expect("alphabet covers the word");
        let got_ids = uni.encode(word, 0).ids;
        let expected_ids: Vec<u32> = expected
            .iter()
            .map(|p| uni.piece_id(p).expect("piece in vocab"))
            .collect();
        assert_eq!(got_ids, expected_ids, "Viterbi mismatch on '{word}'");
        checked += 1;
    }
    println!(
        "[PASS] criterion 3: vocab sizes exact (bpe {bpe_target}, unigram {uni_target}) on {n_docs}-doc 10MB corpus; 10k roundtrips; 500 Viterbi matches"
    );
}

#[test]
fn criterion_4_dedup() {
    let stock = common::word_stock(3000);
    let mut rng = ChaCha8Rng::seed_from_u64(0xDED);
    let doc_words = |rng: &mut ChaCha8Rng| -> Vec<String> {
        (0..150).map(|_| stock[rng.gen_range(0..stock.len())].clone()).collect()
    };
    let mut docs: Vec<Document> = Vec::new();
    let mut base_words: Vec<Vec<String>> = Vec::new();
    for i in 0..9800u64 {
        let words = doc_words(&mut rng);
        docs.push(Document::new(i, words.join(" ")));
        base_words.push(words);
    }
    // 100 exact duplicates of docs 0..100.
    for i in 0..100u64 {
        docs.push(Document::new(9800 + i, base_words[i as usize].join(" ")));
    }
    // 100 near duplicates of docs 100..200: one word replaced.
    let cfg = DedupConfig {
        mode: DedupMode::Both,
        seed: 11,
        ..DedupConfig::default()
    };
    for i in 0..100u64 {
        let mut words = base_words[100 + i as usize].clone();
        let pos = rng.gen_range(10..words.len() - 10);
        words[pos] = format!("zzz{i}");
        let near = words.join(" ");
        // By construction: true shingle-Jaccard >= 0.9.
        let a = minhash::shingle_set(&dedup::normalize_for_hash(&docs[100 + i as usize].text), 5);
        let b = minhash::shingle_set(&dedup::normalize_for_hash(&near), 5);
        let inter = a.intersection(&b).count() as f64;
        let union = a.union(&b).count() as f64;
        assert!(inter / union >= 0.9, "planted near dup below 0.9 Jaccard");
        docs.push(Document::new(9900 + i, near));
    }

    let originals = docs.clone();
    let (kept, report) = dedup::dedup(docs, &cfg).unwrap();
    let kept_ids: HashSet<u64> = kept.iter().map(|d| d.id).collect();

    let exact_found = (0..100u64).filter(|i| !kept_ids.contains(&(9800 + i))).count();
    assert_eq!(exact_found, 100, "exact recall {exact_found}/100");
    let near_found = (0..100u64).filter(|i| !kept_ids.contains(&(9900 + i))).count();
    assert!(near_found >= 95, "near recall {near_found}/100 < 95%");

    // False merges judged against an exact-Jaccard oracle: a removed doc is
    // a false merge if its true Jaccard with its cluster's survivor is
    // below the LSH threshold.
    let by_id: HashMap<u64, &Document> = originals.iter().map(|d| (d.id, d)).collect();
    let mut merges = 0usize;
    let mut false_merges = 0usize;
    for cluster in &report.clusters {
        let survivor = cluster.iter().min().unwrap();
        let sv = minhash::shingle_set(&dedup::normalize_for_hash(&by_id[survivor].text), 5);
        for id in cluster {
            if id == survivor {
                continue;
            }
            merges += 1;
            let other = minhash::shingle_set(&dedup::normalize_for_hash(&by_id[id].text), 5);
            let inter = sv.intersection(&other).count() as f64;
            let union = sv.union(&other).count() as f64;
            if inter / union < cfg.threshold() {
                false_merges += 1;
            }
        }
    }
    assert!(
        (false_merges as f64) <= 0.01 * merges as f64,
        "{false_merges} false merges of {merges}"
    );

    // MinHash accuracy at 128 permutations on 1000 random corpus pairs
    // (900 uniform draws plus 100 planted-duplicate pairs).
    let family = minhash::PermutationFamily::new(128, 11);
    let mut within = 0usize;
    let mut check_pair = |x: &Document, y: &Document| {
        let ta = dedup::normalize_for_hash(&x.text);
        let tb = dedup::normalize_for_hash(&y.text);
        let sa = family.signature(0, &minhash::shingle_hashes(&ta, 5));
        let sb = family.signature(1, &minhash::shingle_hashes(&tb, 5));
        let est = sa.equality_fraction(&sb);
        let a = minhash::shingle_set(&ta, 5);
        let b = minhash::shingle_set(&tb, 5);
        let truth = a.intersection(&b).count() as f64 / a.union(&b).count() as f64;
        if (est - truth).abs() <= 0.06 {
            within += 1;
        }
    };
    for _ in 0..900 {
        let i = rng.gen_range(0..originals.len());
        let j = rng.gen_range(0..originals.len());
        check_pair(&originals[i], &originals[j]);
    }
    for i in 0..100usize {
        check_pair(&originals[100 + i], &originals[9900 + i]);
    }
    assert!(within >= 950, "only {within}/1000 pairs within 0.06");
    println!(
        "[PASS] criterion 4: exact recall 100/100, near recall {near_found}/100, false merges {false_merges}/{merges}, minhash within-0.06 {within}/1000"
    );
}

#[test]
fn criterion_5_language_filter() {
    let langs = ["es", "en", "pt", "fr", "de"];
    let mut seed: BTreeMap<String, Vec<Document>> = BTreeMap::new();
    for lang in langs {
        let docs = common::lang_training_docs(lang, 10_000)
            .into_iter()
            .enumerate()
            .map(|(i, text)| Document::new(i as u64, text))
            .collect();
        seed.insert(lang.to_string(), docs);
    }
    let model = LangModel::train(seed).unwrap();

    // Held-out accuracy on sentences >= 40 chars.
    let mut correct = 0usize;
    let mut total = 0usize;
    for lang in langs {
        let (_, held) = common::lang_fixture(lang);
        for sentence in &held {
            assert!(sentence.chars().count() >= 40, "held-out line too short");
            let (best, _) = model.detect(sentence).unwrap();
            total += 1;
            if best == lang {
                correct += 1;
            }
        }
    }
    let accuracy = correct as f64 / total as f64;
    assert!(accuracy >= 0.97, "held-out accuracy {accuracy:.4} < 0.97");

    // Precision of the 0.98 threshold on a mixed corpus.
    let mut mixed: Vec<(String, String)> = Vec::new();
    for lang in langs {
        let (_, held) = common::lang_fixture(lang);
        for pair in held.chunks(2) {
            mixed.push((lang.to_string(), pair.join(" ")));
        }
    }
    let mut retained = 0usize;
    let mut retained_es = 0usize;
    for (lang, text) in &mixed {
        let posteriors = model.posteriors(text).unwrap();
        let p_es = posteriors
            .iter()
            .find(|(l, _)| l == "es")
            .map(|(_, p)| *p)
            .unwrap_or(0.0);
        if p_es >= 0.98 {
            retained += 1;
            if lang == "es" {
                retained_es += 1;
            }
        }
    }
    let precision = retained_es as f64 / retained.max(1) as f64;
    assert!(retained > 0, "threshold retained nothing");
    assert!(precision >= 0.95, "precision {precision:.4} < 0.95");
    println!(
        "[PASS] criterion 5: held-out accuracy {accuracy:.4} ({correct}/{total}), es precision {precision:.4} at threshold 0.98"
    );
}

#[test]
fn criterion_6_encoding_repair() {
    // Idempotence on 10,000 random strings over mixed scripts.
    let mut rng = ChaCha8Rng::seed_from_u64(0xE0);
    let pools: Vec<Vec<char>> = vec![
        (' '..='~').collect(),
        ('\u{00A1}'..='\u{00FF}').collect(),
        ('\u{0100}'..='\u{017F}').collect(),
        vec!['\u{2013}', '\u{2014}', '\u{201C}', '\u{201D}', '\u{2026}', '\u{20AC}'],
        ('\u{0391}'..='\u{03C9}').collect(),
    ];
    for i in 0..10_000 {
        let len = rng.gen_range(0..80);
        let s: String = (0..len)
            .map(|_| {
                let pool = &pools[rng.gen_range(0..pools.len())];
                pool[rng.gen_range(0..pool.len())]
            })
            .collect();
        let once = fix_encoding(&s);
        let twice = fix_encoding(&once);
        assert_eq!(once, twice, "not idempotent on case {i}: {s:?}");
    }

    // Generated UTF-8-as-Latin-1 mojibake must repair exactly.
    let (train, held) = common::lang_fixture("es");
    let mut cases = 0;
    for sentence in train.iter().chain(held.iter()) {
        if sentence.is_ascii() {
            continue;
        }
        let mojibake: String = sentence.bytes().map(|b| b as char).collect();
        assert_eq!(
            fix_encoding(&mojibake),
            fix_encoding(sentence),
            "mojibake repair failed on {sentence:?}"
        );
        cases += 1;
    }
    assert!(cases >= 20, "mojibake suite too small: {cases}");

    // NFKC vectors.
    assert_eq!(fix_encoding("ﬁn"), "fin");
    assert_eq!(fix_encoding("１２３"), "123");
    assert_eq!(fix_encoding("ﬀ"), "ff");
    println!("[PASS] criterion 6: idempotence on 10k strings, {cases}/{cases} mojibake repairs, NFKC vectors");
}

// ---- criterion 7: independent metric oracles ----

fn oracle_ngrams(tokens: &[String], n: usize) -> Vec<String> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n).map(|i| tokens[i..i + n].join(" ")).collect()
}

fn oracle_clip_overlap(cand: &[String], refr: &[String]) -> usize {
    let mut pool: Vec<&String> = refr.iter().collect();
    let mut overlap = 0;
    for g in cand {
        if let Some(pos) = pool.iter().position(|r| *r == g) {
            pool.swap_remove(pos);
            overlap += 1;
        }
    }
    overlap
}

fn oracle_rouge_n(cand: &[String], refr: &[String], n: usize) -> f64 {
    let cg = oracle_ngrams(cand, n);
    let rg = oracle_ngrams(refr, n);
    if cg.is_empty() || rg.is_empty() {
        return 0.0;
    }
    let o = oracle_clip_overlap(&cg, &rg) as f64;
    if o == 0.0 {
        return 0.0;
    }
    let p = o / cg.len() as f64;
    let r = o / rg.len() as f64;
    2.0 * p * r / (p + r)
}

fn oracle_lcs(a: &[String], b: &[String], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
    if i == a.len() || j == b.len() {
        return 0;
    }
    if let Some(&v) = memo.get(&(i, j)) {
        return v;
    }
    let v = if a[i] == b[j] {
        1 + oracle_lcs(a, b, i + 1, j + 1, memo)
    } else {
        oracle_lcs(a, b, i + 1, j, memo).max(oracle_lcs(a, b, i, j + 1, memo))
    };
    memo.insert((i, j), v);
    v
}

fn oracle_rouge_l(cand: &[String], refr: &[String]) -> f64 {
    if cand.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let lcs = oracle_lcs(cand, refr, 0, 0, &mut HashMap::new()) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / cand.len() as f64;
    let r = lcs / refr.len() as f64;
    2.0 * p * r / (p + r)
}

fn oracle_bleu(cands: &[Vec<String>], refs: &[Vec<Vec<String>>], smooth: bool) -> f64 {
    let mut matched = [0f64; 4];
    let mut total = [0f64; 4];
    let mut c_len = 0usize;
    let mut r_len = 0usize;
    for (cand, ref_set) in cands.iter().zip(refs) {
        c_len += cand.len();
        let mut best = ref_set[0].len();
        for r in ref_set {
            let better = (r.len() as i64 - cand.len() as i64).abs()
                < (best as i64 - cand.len() as i64).abs()
                || ((r.len() as i64 - cand.len() as i64).abs()
                    == (best as i64 - cand.len() as i64).abs()
                    && r.len() < best);
            if better {
                best = r.len();
            }
        }
        r_len += best;
        for n in 1..=4 {
            let cg = oracle_ngrams(cand, n);
            total[n - 1] += cg.len() as f64;
            // Clip against the max count over references.
            let mut seen: Vec<&String> = Vec::new();
            for g in &cg {
                if seen.contains(&g) {
                    continue;
                }
                seen.push(g);
                let count = cg.iter().filter(|x| *x == g).count();
                let max_ref = ref_set
                    .iter()
                    .map(|r| oracle_ngrams(r, n).iter().filter(|x| *x == g).count())
                    .max()
                    .unwrap_or(0);
                matched[n - 1] += count.min(max_ref) as f64;
            }
        }
    }
    let mut log_sum = 0.0;
    for n in 0..4 {
        let (m, t) = if smooth {
            (matched[n] + 1.0, total[n] + 1.0)
        } else {
            (matched[n], total[n])
        };
        if m == 0.0 || t == 0.0 {
            return 0.0;
        }
        log_sum += (m / t).ln();
    }
    let bp = if c_len < r_len {
        (1.0 - r_len as f64 / c_len.max(1) as f64).exp()
    } else {
        1.0
    };
    100.0 * bp * (log_sum / 4.0).exp()
}

fn oracle_token_f1(cand: &[String], refr: &[String]) -> f64 {
    if cand.is_empty() && refr.is_empty() {
        return 1.0;
    }
    if cand.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let o = oracle_clip_overlap(cand, refr) as f64;
    if o == 0.0 {
        return 0.0;
    }
    let p = o / cand.len() as f64;
    let r = o / refr.len() as f64;
    2.0 * p * r / (p + r)
}

fn oracle_meteor(cand: &[String], refr: &[String]) -> f64 {
    let m = oracle_clip_overlap(cand, refr);
    if m == 0 {
        return 0.0;
    }
    // Exhaustive search over all maximum alignments for minimum chunks.
    fn go(
        ci: usize,
        cand: &[String],
        refr: &[String],
        used: &mut Vec<bool>,
        matched: usize,
        chunks: usize,
        prev: Option<usize>,
        m: usize,
        best: &mut usize,
    ) {
        if matched == m {
            *best = (*best).min(chunks);
            return;
        }
        if ci == cand.len() || matched + (cand.len() - ci) < m {
            return;
        }
        for p in 0..refr.len() {
            if !used[p] && refr[p] == cand[ci] {
                used[p] = true;
                let extends = p > 0 && prev == Some(p - 1);
                go(ci + 1, cand, refr, used, matched + 1, if extends { chunks } else { chunks + 1 }, Some(p), m, best);
                used[p] = false;
            }
        }
        go(ci + 1, cand, refr, used, matched, chunks, prev, m, best);
    }
    let mut best = m;
    go(0, cand, refr, &mut vec![false; refr.len()], 0, 0, None, m, &mut best);
    let p = m as f64 / cand.len() as f64;
    let r = m as f64 / refr.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    fmean * (1.0 - 0.5 * (best as f64 / m as f64).powi(3))
}

fn oracle_sari(src: &[String], cand: &[String], refs: &[Vec<String>]) -> f64 {
    let numref = refs.len() as f64;
    let mut total = 0.0;
    for n in 1..=4 {
        let count = |toks: &[String]| -> HashMap<String, f64> {
            let mut m = HashMap::new();
            for g in oracle_ngrams(toks, n) {
                *m.entry(g).or_insert(0.0) += 1.0;
            }
            m
        };
        let s1: HashMap<String, f64> = count(src).into_iter().map(|(k, v)| (k, v * numref)).collect();
        let c1: HashMap<String, f64> = count(cand).into_iter().map(|(k, v)| (k, v * numref)).collect();
        let mut r1: HashMap<String, f64> = HashMap::new();
        for r in refs {
            for (k, v) in count(r) {
                *r1.entry(k).or_insert(0.0) += v;
            }
        }
        let inter = |a: &HashMap<String, f64>, b: &HashMap<String, f64>| -> HashMap<String, f64> {
            a.iter()
                .filter_map(|(k, &v)| {
                    let w = v.min(b.get(k).copied().unwrap_or(0.0));
                    (w > 0.0).then(|| (k.clone(), w))
                })
                .collect()
        };
        let sub = |a: &HashMap<String, f64>, b: &HashMap<String, f64>| -> HashMap<String, f64> {
            a.iter()
                .filter_map(|(k, &v)| {
                    let w = v - b.get(k).copied().unwrap_or(0.0);
                    (w > 0.0).then(|| (k.clone(), w))
                })
                .collect()
        };
        // keep
        let keep = inter(&s1, &c1);
        let keep_good = inter(&keep, &r1);
        let keep_all = inter(&s1, &r1);
        let kp = if keep.is_empty() {
            1.0
        } else {
            keep.iter().map(|(k, v)| keep_good.get(k).copied().unwrap_or(0.0) / v).sum::<f64>()
                / keep.len() as f64
        };
        let kr = if keep_all.is_empty() {
            1.0
        } else {
            keep_good.values().sum::<f64>() / keep_all.values().sum::<f64>()
        };
        let kf = if kp > 0.0 || kr > 0.0 { 2.0 * kp * kr / (kp + kr) } else { 0.0 };
        // delete: precision only
        let del = sub(&s1, &c1);
        let del_good = sub(&del, &r1);
        let dp = if del.is_empty() {
            1.0
        } else {
            del.iter().map(|(k, v)| del_good.get(k).copied().unwrap_or(0.0) / v).sum::<f64>()
                / del.len() as f64
        };
        // add: set semantics
        let cset: HashSet<&String> = c1.keys().collect();
        let sset: HashSet<&String> = s1.keys().collect();
        let rset: HashSet<&String> = r1.keys().collect();
        let added: HashSet<&&String> = cset.difference(&sset).collect();
        let good = added.iter().filter(|g| rset.contains(**g)).count() as f64;
        let add_all: HashSet<&&String> = rset.difference(&sset).collect();
        let ap = if added.is_empty() { 1.0 } else { good / added.len() as f64 };
        let ar = if add_all.is_empty() { 1.0 } else { good / add_all.len() as f64 };
        let af = if ap > 0.0 || ar > 0.0 { 2.0 * ap * ar / (ap + ar) } else { 0.0 };
        total += (kf + dp + af) / 3.0;
    }
    total / 4.0
}

fn rand_text(rng: &mut ChaCha8Rng, max_len: usize) -> String {
    let vocab = ["a", "b", "c", "d", "e", "f"];
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .map(|_| vocab[rng.gen_range(0..vocab.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn criterion_7_metric_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let tol = 1e-9;
    for case in 0..100 {
        let cand_s = rand_text(&mut rng, 20);
        let ref_s = rand_text(&mut rng, 20);
        let src_s = rand_text(&mut rng, 20);
        let cand = metrics::tokenize(&cand_s);
        let refr = metrics::tokenize(&ref_s);
        let src = metrics::tokenize(&src_s);

        for n in [1, 2] {
            let got = metrics::rouge_n(&cand_s, &[ref_s.as_str()], n).unwrap().f1;
            let want = oracle_rouge_n(&cand, &refr, n);
            assert!((got - want).abs() < tol, "rouge{n} case {case}: {got} vs {want}");
        }
        let got = metrics::rouge_l(&cand_s, &[ref_s.as_str()]).unwrap().f1;
        let want = oracle_rouge_l(&cand, &refr);
        assert!((got - want).abs() < tol, "rougeL case {case}: {got} vs {want}");

        let got = metrics::token_f1(&cand_s, &ref_s);
        let want = oracle_token_f1(&cand, &refr);
        assert!((got - want).abs() < tol, "f1 case {case}: {got} vs {want}");

        // METEOR with shorter strings to keep the exhaustive oracle cheap.
        let mc_s = rand_text(&mut rng, 8);
        let mr_s = rand_text(&mut rng, 8);
        let got = metrics::meteor_lite(&mc_s, &mr_s);
        let want = oracle_meteor(&metrics::tokenize(&mc_s), &metrics::tokenize(&mr_s));
        assert!((got - want).abs() < tol, "meteor case {case}: {got} vs {want} ({mc_s:?} / {mr_s:?})");

        // BLEU over a 3-sentence mini-corpus with 2 references each.
        let mut cands = Vec::new();
        let mut refsets = Vec::new();
        for _ in 0..3 {
            let mut c = rand_text(&mut rng, 12);
            if metrics::tokenize(&c).is_empty() {
                c = "a b c d".into();
            }
            cands.push(c);
            refsets.push(vec![rand_text(&mut rng, 12), rand_text(&mut rng, 12)]);
        }
        let cand_refs: Vec<&str> = cands.iter().map(String::as_str).collect();
        let set_refs: Vec<Vec<&str>> = refsets
            .iter()
            .map(|s| s.iter().map(String::as_str).collect())
            .collect();
        let smooth = case % 2 == 0;
        let got = metrics::corpus_bleu(&cand_refs, &set_refs, smooth).unwrap();
        let want = oracle_bleu(
            &cands.iter().map(|c| metrics::tokenize(c)).collect::<Vec<_>>(),
            &refsets
                .iter()
                .map(|s| s.iter().map(|r| metrics::tokenize(r)).collect())
                .collect::<Vec<_>>(),
            smooth,
        );
        assert!((got - want).abs() < tol, "bleu case {case}: {got} vs {want}");

        // SARI on nonempty triples.
        if !cand.is_empty() && !refr.is_empty() && !src.is_empty() {
            let got = metrics::sari(&[&src_s], &[&cand_s], &[vec![ref_s.as_str()]]).unwrap();
            let want = 100.0 * oracle_sari(&src, &cand, &[refr.clone()]);
            assert!((got - want).abs() < tol, "sari case {case}: {got} vs {want}");
        }
    }

    // Fixed-point checks.
    let text = "el gato come pescado fresco";
    assert!((metrics::corpus_bleu(&[text], &[vec![text]], false).unwrap() - 100.0).abs() < tol);
    assert!((metrics::rouge_n(text, &[text], 1).unwrap().f1 - 1.0).abs() < tol);
    println!("[PASS] criterion 7: 100 randomized oracle comparisons within 1e-9 for rouge/bleu/sari/meteor/f1");
}

#[test]
fn criterion_8_pipeline_determinism() {
    use esprep::pipeline::{run_pipeline, PipelineConfig, Stage, TokenizerStageConfig};

    let stock = common::word_stock(2000);
    let corpus = common::gen_corpus(21, &stock, 10 * 1024 * 1024);
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input.jsonl");
    esprep::corpus::write_corpus(corpus.into_iter(), &input).unwrap();

    let mut hashes: Vec<Vec<String>> = Vec::new();
    for workers in [1usize, 8] {
        let workdir = dir.path().join(format!("w{workers}"));
        let cfg = PipelineConfig {
            seed: 5,
            workers,
            input: input.clone(),
            workdir: workdir.clone(),
            stages: vec![Stage::Clean, Stage::Dedup, Stage::Tokenize, Stage::Noise],
            clean: CleanConfig::default(),
            langid_model: None,
            dedup: DedupConfig { seed: 5, ..DedupConfig::default() },
            tokenizer: TokenizerStageConfig { vocab_size: 800, ..Default::default() },
            noise: NoiseConfig { seed: 5, ..NoiseConfig::default() },
        };
        run_pipeline(&cfg).unwrap();
        let mut digests = Vec::new();
        for artifact in ["clean.jsonl", "dedup.jsonl", "dedup_report.json", "tokenizer.model", "noised.jsonl"] {
            use sha2::Digest;
            let bytes = std::fs::read(workdir.join(artifact)).unwrap();
            digests.push(format!("{:x}", sha2::Sha256::digest(&bytes)));
        }
        hashes.push(digests);
    }
    assert_eq!(hashes[0], hashes[1], "artifacts differ between 1 and 8 workers");
    println!("[PASS] criterion 8: byte-identical artifacts for workers 1 vs 8 on 10MB corpus");
}

#[test]
fn criterion_9_clean_throughput() {
    let stock = common::word_stock(2000);
    let corpus = common::gen_corpus(33, &stock, 100 * 1024 * 1024);
    let bytes: usize = corpus.iter().map(|d| d.text.len()).sum();
    let cfg = CleanConfig::default();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let (survivors, _) = pool
        .install(|| esprep::clean::clean_documents(corpus, &cfg, None))
        .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mbps = bytes as f64 / 1e6 / secs;
    assert!(!survivors.is_empty());
    assert!(mbps >= 10.0, "clean throughput {mbps:.1} MB/s below 10 MB/s (soft)");
    println!("[PASS] criterion 9 (soft): clean throughput {mbps:.1} MB/s on one core over {} MB", bytes / 1_000_000);
}
