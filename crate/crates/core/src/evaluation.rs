//! Synthetic place-recognition data, quantization-error and retrieval reports, and the
//! strategy comparison table.
//!
//! A synthetic traversal is a list of frames. Each place has a prototype (a set of random
//! descriptors); its first visit emits the prototype verbatim and every revisit emits a
//! copy with each bit flipped independently with probability `bit_flip_prob`.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bow::{transform, Match, RetrievalDatabase};
use crate::descriptor::{BinaryDescriptor, DescriptorSet, DEFAULT_BITS};
use crate::error::{Error, Result};
use crate::vocabulary::{train, Strategy, TrainConfig, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_places: usize,
    pub descriptors_per_place: usize,
    /// Fraction of frames that re-observe an earlier place, in `[0, 1)`.
    pub revisit_fraction: f64,
    /// Per-bit flip probability for revisits, in `[0, 0.5)`.
    pub bit_flip_prob: f64,
    pub descriptor_bits: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_places: 50,
            descriptors_per_place: 200,
            revisit_fraction: 0.3,
            bit_flip_prob: 0.05,
            descriptor_bits: DEFAULT_BITS,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.num_places == 0 || self.descriptors_per_place == 0 {
            return Err(Error::Config(
                "place and descriptor counts must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.revisit_fraction) {
            return Err(Error::Config(format!(
                "revisit fraction {} outside [0, 1)",
                self.revisit_fraction
            )));
        }
        if !(0.0..0.5).contains(&self.bit_flip_prob) {
            return Err(Error::Config(format!(
                "bit flip probability {} outside [0, 0.5)",
                self.bit_flip_prob
            )));
        }
        if self.descriptor_bits == 0 || !self.descriptor_bits.is_multiple_of(8) {
            return Err(Error::Config(format!(
                "descriptor width {} is not a positive multiple of 8",
                self.descriptor_bits
            )));
        }
        Ok(())
    }

    /// Total frame count: every place once plus the revisits.
    pub fn frame_count(&self) -> usize {
        let r = self.revisit_fraction;
        let revisits = (self.num_places as f64 * r / (1.0 - r)).round() as usize;
        self.num_places + revisits
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSequence {
    /// Vocabulary training corpus: an independent traversal from the same generator.
    pub training: DescriptorSet,
    /// Query traversal, one group per frame.
    pub frames: DescriptorSet,
    /// Place observed by each frame.
    pub frame_places: Vec<usize>,
    /// (query frame, earlier frame of the same place), sorted.
    pub ground_truth: Vec<(usize, usize)>,
}

/// Returns `d` with each bit flipped independently with probability `p`.
pub fn flip_bits<R: Rng + ?Sized>(d: &BinaryDescriptor, p: f64, rng: &mut R) -> BinaryDescriptor {
    let mut out = d.clone();
    if p > 0.0 {
        for i in 0..d.bits() {
            if rng.gen::<f64>() < p {
                out.set_bit(i, !d.bit(i));
            }
        }
    }
    out
}

struct Traversal {
    frames: Vec<Vec<BinaryDescriptor>>,
    places: Vec<usize>,
}

fn traverse(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Traversal {
    let total = cfg.frame_count();
    let mut fresh_left = cfg.num_places;
    let mut revisits_left = total - cfg.num_places;
    let mut prototypes: Vec<Vec<BinaryDescriptor>> = Vec::new();
    let mut first_seen: Vec<usize> = Vec::new();
    let mut frames = Vec::with_capacity(total);
    let mut places = Vec::with_capacity(total);
    for t in 0..total {
        // A revisit targets a place first seen at least two frames ago, so the original
        // view survives a one-frame temporal exclusion window.
        let mut eligible: Vec<usize> = (0..prototypes.len())
            .filter(|&p| first_seen[p] + 2 <= t)
            .collect();
        if eligible.is_empty() && fresh_left == 0 {
            eligible = (0..prototypes.len()).collect();
        }
        let revisit = revisits_left > 0
            && !eligible.is_empty()
            && (fresh_left == 0
                || rng.gen::<f64>() < revisits_left as f64 / (revisits_left + fresh_left) as f64);
        if revisit {
            revisits_left -= 1;
            let place = eligible[rng.gen_range(0..eligible.len())];
            let frame = prototypes[place]
                .iter()
                .map(|d| flip_bits(d, cfg.bit_flip_prob, rng))
                .collect();
            frames.push(frame);
            places.push(place);
        } else {
            fresh_left -= 1;
            let proto: Vec<_> = (0..cfg.descriptors_per_place)
                .map(|_| BinaryDescriptor::random(cfg.descriptor_bits, rng))
                .collect();
            first_seen.push(t);
            places.push(prototypes.len());
            frames.push(proto.clone());
            prototypes.push(proto);
        }
    }
    Traversal { frames, places }
}

/// Generates a training traversal and an independent query traversal with ground truth.
pub fn synth_sequence(cfg: &SynthConfig) -> Result<SynthSequence> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut train_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7472_6169_6e5f_7365);
    let query = traverse(cfg, &mut rng);
    let training = traverse(cfg, &mut train_rng);

    let mut ground_truth = Vec::new();
    for (t, &p) in query.places.iter().enumerate() {
        for (s, &q) in query.places[..t].iter().enumerate() {
            if p == q {
                ground_truth.push((t, s));
            }
        }
    }
    Ok(SynthSequence {
        training: DescriptorSet::from_groups(cfg.descriptor_bits, training.frames)?,
        frames: DescriptorSet::from_groups(cfg.descriptor_bits, query.frames)?,
        frame_places: query.places,
        ground_truth,
    })
}

/// Parameters for a corpus drawn around random cluster centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteredConfig {
    pub centers: usize,
    pub descriptors: usize,
    pub bit_flip_prob: f64,
    pub descriptor_bits: usize,
    /// Descriptors per group (image) for IDF purposes.
    pub group_size: usize,
    pub seed: u64,
}

/// Descriptors drawn uniformly around `centers` random prototypes with i.i.d. bit flips.
pub fn clustered_corpus(cfg: &ClusteredConfig) -> Result<DescriptorSet> {
    if cfg.centers == 0 || cfg.group_size == 0 {
        return Err(Error::Config(
            "centers and group size must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centers: Vec<_> = (0..cfg.centers)
        .map(|_| BinaryDescriptor::random(cfg.descriptor_bits, &mut rng))
        .collect();
    let descs: Vec<_> = (0..cfg.descriptors)
        .map(|_| {
            let c = &centers[rng.gen_range(0..centers.len())];
            flip_bits(c, cfg.bit_flip_prob, &mut rng)
        })
        .collect();
    let mut ends: Vec<usize> = (cfg.group_size..descs.len())
        .step_by(cfg.group_size)
        .collect();
    if !descs.is_empty() {
        ends.push(descs.len());
    }
    DescriptorSet::new(cfg.descriptor_bits, descs, ends)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantReport {
    /// Mean Hamming distance from each descriptor to the centroid of its word.
    pub mean_qe: f64,
    pub p50_qe: f64,
    pub p95_qe: f64,
    pub words_used: usize,
    /// Shannon entropy of the empirical word distribution, in bits.
    pub word_entropy: f64,
}

fn percentile(sorted: &[u32], q: f64) -> f64 {
    // nearest-rank
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1] as f64
}

pub fn quantization_report(vocab: &Vocabulary, descs: &DescriptorSet) -> Result<QuantReport> {
    if descs.is_empty() {
        return Err(Error::EmptyInput("quantization corpus"));
    }
    let mut dists = Vec::with_capacity(descs.len());
    let mut freq: HashMap<usize, u64> = HashMap::new();
    for d in descs.descriptors() {
        let hit = vocab.lookup_word(d)?;
        let centroid = vocab
            .node(hit.node_id)
            .centroid
            .as_ref()
            .expect("leaf centroid");
        dists.push(d.distance(centroid));
        *freq.entry(hit.word_id).or_insert(0) += 1;
    }
    let n = dists.len() as f64;
    let mean_qe = dists.iter().map(|&d| d as f64).sum::<f64>() / n;
    dists.sort_unstable();
    let mut counts: Vec<u64> = freq.values().copied().collect();
    counts.sort_unstable();
    let word_entropy = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0);
    Ok(QuantReport {
        mean_qe,
        p50_qe: percentile(&dists, 0.5),
        p95_qe: percentile(&dists, 0.95),
        words_used: freq.len(),
        word_entropy,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub recall_at_1: f64,
    pub max_f1: f64,
    /// One point per distinct top-1 score, thresholds ascending.
    pub pr_points: Vec<PrPoint>,
    /// Frames with at least one earlier frame of the same place.
    pub revisit_queries: usize,
    /// No revisits: recall is undefined and reported as 1.0.
    pub vacuous: bool,
}

/// Streams `frames` through a retrieval database: each frame is scored against earlier
/// frames (minus the last `temporal_exclusion`) and then added.
pub fn retrieval_report(
    vocab: &Vocabulary,
    frames: &DescriptorSet,
    ground_truth: &[(usize, usize)],
    temporal_exclusion: usize,
) -> Result<RetrievalReport> {
    if frames.group_count() == 0 {
        return Err(Error::EmptyInput("retrieval sequence"));
    }
    let mut truth: HashMap<usize, HashSet<usize>> = HashMap::new();
    for &(q, e) in ground_truth {
        truth.entry(q).or_default().insert(e);
    }
    let mut db = RetrievalDatabase::new(vocab);
    let mut tops: Vec<(usize, Match)> = Vec::new();
    for (t, group) in frames.groups().enumerate() {
        let v = transform(vocab, group)?;
        let exclude: HashSet<usize> = (t.saturating_sub(temporal_exclusion)..t).collect();
        if let Some(&top) = db.query(&v, 1, Some(&exclude)).first() {
            tops.push((t, top));
        }
        db.add(v);
    }

    let revisits = truth.len();
    if revisits == 0 {
        return Ok(RetrievalReport {
            recall_at_1: 1.0,
            max_f1: 1.0,
            pr_points: Vec::new(),
            revisit_queries: 0,
            vacuous: true,
        });
    }
    let correct = |t: usize, m: &Match| truth.get(&t).is_some_and(|s| s.contains(&m.entry));
    let hits = tops.iter().filter(|(t, m)| correct(*t, m)).count();

    // Sweep thresholds from high to low, accumulating detections.
    let mut by_score: Vec<(f64, bool)> = tops
        .iter()
        .map(|(t, m)| (m.score, correct(*t, m)))
        .collect();
    by_score.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut pr_points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < by_score.len() {
        let threshold = by_score[i].0;
        while i < by_score.len() && by_score[i].0 == threshold {
            if by_score[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        pr_points.push(PrPoint {
            threshold,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / revisits as f64,
        });
    }
    pr_points.reverse();
    let max_f1 = pr_points
        .iter()
        .map(|p| {
            if p.precision + p.recall > 0.0 {
                2.0 * p.precision * p.recall / (p.precision + p.recall)
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    Ok(RetrievalReport {
        recall_at_1: hits as f64 / revisits as f64,
        max_f1,
        pr_points,
        revisit_queries: revisits,
        vacuous: false,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    /// Generator settings; `seed` is replaced by each entry of `seeds`.
    pub synth: SynthConfig,
    /// Training settings; `strategy` and `seed` are replaced per row.
    pub train: TrainConfig,
    pub temporal_exclusion: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            strategies: Strategy::ALL.to_vec(),
            seeds: vec![0],
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            temporal_exclusion: 1,
        }
    }
}

/// One row of the comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: Strategy,
    pub seed: u64,
    pub mean_qe: f64,
    pub p95_qe: f64,
    pub words_used: usize,
    pub entropy: f64,
    pub recall_at_1: f64,
    pub max_f1: f64,
    pub train_seconds: f64,
}

/// Trains every strategy on the same training corpus and seed and evaluates quantization
/// error on the training corpus and retrieval on the query frames.
pub fn compare_on(
    sequence: &SynthSequence,
    strategies: &[Strategy],
    train_cfg: &TrainConfig,
    seed: u64,
    temporal_exclusion: usize,
) -> Result<Vec<ComparisonRow>> {
    strategies
        .iter()
        .map(|&strategy| {
            let cfg = TrainConfig {
                strategy,
                seed,
                ..train_cfg.clone()
            };
            let start = Instant::now();
            let vocab = train(&sequence.training, &cfg)?;
            let train_seconds = start.elapsed().as_secs_f64();
            let q = quantization_report(&vocab, &sequence.training)?;
            let r = retrieval_report(
                &vocab,
                &sequence.frames,
                &sequence.ground_truth,
                temporal_exclusion,
            )?;
            Ok(ComparisonRow {
                strategy,
                seed,
                mean_qe: q.mean_qe,
                p95_qe: q.p95_qe,
                words_used: q.words_used,
                entropy: q.word_entropy,
                recall_at_1: r.recall_at_1,
                max_f1: r.max_f1,
                train_seconds,
            })
        })
        .collect()
}

pub fn compare_strategies(cfg: &CompareConfig) -> Result<Vec<ComparisonRow>> {
    if cfg.strategies.len() < 2 {
        return Err(Error::Config(
            "comparison needs at least two strategies".into(),
        ));
    }
    if cfg.seeds.is_empty() {
        return Err(Error::Config("comparison needs at least one seed".into()));
    }
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let synth = SynthConfig {
            seed,
            ..cfg.synth.clone()
        };
        let sequence = synth_sequence(&synth)?;
        rows.extend(compare_on(
            &sequence,
            &cfg.strategies,
            &cfg.train,
            seed,
            cfg.temporal_exclusion,
        )?);
    }
    Ok(rows)
}

/// Writes rows as CSV with a header line.
pub fn write_csv<W: Write>(rows: &[ComparisonRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(rows: &[ComparisonRow], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, rows)?;
    Ok(())
}
