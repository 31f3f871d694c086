//! Hierarchical vocabulary trees: training under three strategies, word ids, IDF weights
//! and greedy word lookup.
//!
//! Node ids follow breadth-first creation order (root = 0, siblings contiguous), which is
//! also the order nodes are written to vocabulary text files. Word ids are assigned to
//! leaves depth-first, children visited in stored order.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{brb_kmeans_refs, kmajority_refs, realized_lloyd_refs, ClusterConfig};
use crate::descriptor::{binarize, BinaryDescriptor, DescriptorSet, BINARIZE_THRESHOLD};
use crate::error::{Error, Result};

/// How a vocabulary tree is grown.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// k-majority in Hamming space at every node.
    #[serde(rename = "kmajority")]
    KMajority,
    /// BRB-KMeans run independently at every node.
    #[serde(rename = "local-brb")]
    LocalBrb,
    /// Relax to reals once at the root, k-means in the real domain all the way down, and
    /// partition children by real-domain assignments. Binary centroids are produced by
    /// thresholding the real centroids.
    #[serde(rename = "hbrb")]
    GlobalHbrb,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::KMajority,
        Strategy::LocalBrb,
        Strategy::GlobalHbrb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::KMajority => "kmajority",
            Strategy::LocalBrb => "local-brb",
            Strategy::GlobalHbrb => "hbrb",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmajority" => Ok(Strategy::KMajority),
            "local-brb" => Ok(Strategy::LocalBrb),
            "hbrb" => Ok(Strategy::GlobalHbrb),
            other => Err(Error::Config(format!(
                "unknown strategy {other:?} (expected kmajority, local-brb or hbrb)"
            ))),
        }
    }
}

/// Scoring tag carried in vocabulary headers. Only L1 is supported.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scoring {
    #[default]
    L1,
}

impl Scoring {
    pub fn id(self) -> u32 {
        0
    }
}

/// Weighting tag carried in vocabulary headers. Only TF-IDF is supported.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    #[default]
    TfIdf,
}

impl Weighting {
    pub fn id(self) -> u32 {
        0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Branching factor.
    pub k: usize,
    /// Maximum leaf depth; the root sits at depth 0.
    pub depth: usize,
    pub strategy: Strategy,
    /// Per-node clustering parameters. `k` and `seed` are overridden per node.
    pub cluster: ClusterConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 10,
            depth: 6,
            strategy: Strategy::GlobalHbrb,
            cluster: ClusterConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VocabNode {
    pub id: usize,
    /// `None` for the root.
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// `None` only for the root.
    pub centroid: Option<BinaryDescriptor>,
    pub word_id: Option<usize>,
    /// IDF weight on leaves, 0 on internal nodes.
    pub weight: f64,
}

impl VocabNode {
    pub fn is_leaf(&self) -> bool {
        self.parent.is_some() && self.children.is_empty()
    }
}

/// Result of a word lookup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WordHit {
    pub word_id: usize,
    pub weight: f64,
    pub node_id: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub k: usize,
    pub depth: usize,
    /// Unknown for vocabularies loaded from text files.
    pub strategy: Option<Strategy>,
    pub descriptor_bits: usize,
    pub scoring: Scoring,
    pub weighting: Weighting,
    nodes: Vec<VocabNode>,
    /// Node id per word id.
    words: Vec<usize>,
}

impl Vocabulary {
    /// Assembles a vocabulary from nodes indexed by id, assigns word ids and validates.
    /// Word ids already present on the nodes are rejected.
    pub fn from_nodes(
        k: usize,
        depth: usize,
        strategy: Option<Strategy>,
        descriptor_bits: usize,
        nodes: Vec<VocabNode>,
    ) -> Result<Self> {
        let mut vocab = Self {
            k,
            depth,
            strategy,
            descriptor_bits,
            scoring: Scoring::L1,
            weighting: Weighting::TfIdf,
            nodes,
            words: Vec::new(),
        };
        vocab.assign_word_ids()?;
        vocab.validate()?;
        Ok(vocab)
    }

    pub fn nodes(&self) -> &[VocabNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &VocabNode {
        &self.nodes[id]
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    /// Leaf node id for a word id.
    pub fn word_node(&self, word_id: usize) -> &VocabNode {
        &self.nodes[self.words[word_id]]
    }

    pub fn word_weight(&self, word_id: usize) -> f64 {
        self.word_node(word_id).weight
    }

    /// Numbers leaves 0..W-1 depth-first, children in stored order.
    pub fn assign_word_ids(&mut self) -> Result<()> {
        if self.nodes.iter().any(|n| n.word_id.is_some()) || !self.words.is_empty() {
            return Err(Error::Internal("word ids already assigned".into()));
        }
        if self.nodes.is_empty() {
            return Err(Error::Internal("vocabulary has no root".into()));
        }
        let mut stack = vec![0usize];
        let mut visited = 0usize;
        while let Some(id) = stack.pop() {
            visited += 1;
            if visited > self.nodes.len() {
                return Err(Error::Internal("cycle in vocabulary tree".into()));
            }
            let node = self
                .nodes
                .get(id)
                .ok_or_else(|| Error::Internal(format!("dangling child id {id}")))?;
            if node.is_leaf() {
                self.nodes[id].word_id = Some(self.words.len());
                self.words.push(id);
            } else {
                stack.extend(node.children.iter().rev().copied());
            }
        }
        Ok(())
    }

    /// Sets leaf weights to `ln(N / N_i)` over the corpus groups, where `N_i` counts the
    /// groups with at least one descriptor looking up word `i`. Unseen words get 0.
    pub fn compute_idf(&mut self, corpus: &DescriptorSet) -> Result<()> {
        let groups = corpus.group_ranges();
        if groups.is_empty() {
            return Err(Error::EmptyInput("IDF corpus has no groups"));
        }
        if corpus.bits() != self.descriptor_bits && !corpus.is_empty() {
            return Err(Error::WidthMismatch {
                expected: self.descriptor_bits,
                found: corpus.bits(),
            });
        }
        let words: Vec<usize> = corpus
            .descriptors()
            .par_iter()
            .with_min_len(1024)
            .map(|d| self.descend(d))
            .map(|node| self.nodes[node].word_id.expect("descent ends at a leaf"))
            .collect();
        let mut doc_freq = vec![0u64; self.word_count()];
        let mut last_group = vec![usize::MAX; self.word_count()];
        for (g, range) in groups.iter().enumerate() {
            for &w in &words[range.clone()] {
                if last_group[w] != g {
                    last_group[w] = g;
                    doc_freq[w] += 1;
                }
            }
        }
        let n = groups.len() as f64;
        for node in &mut self.nodes {
            node.weight = 0.0;
        }
        for (w, &df) in doc_freq.iter().enumerate() {
            let weight = if df == 0 { 0.0 } else { (n / df as f64).ln() };
            self.nodes[self.words[w]].weight = weight;
        }
        Ok(())
    }

    #[inline]
    fn descend(&self, d: &BinaryDescriptor) -> usize {
        let mut id = 0;
        loop {
            let children = &self.nodes[id].children;
            if children.is_empty() {
                return id;
            }
            let mut best = children[0];
            let mut best_d = d.distance(self.nodes[best].centroid.as_ref().unwrap());
            for &c in &children[1..] {
                let dist = d.distance(self.nodes[c].centroid.as_ref().unwrap());
                if dist < best_d {
                    best = c;
                    best_d = dist;
                }
            }
            id = best;
        }
    }

    /// Greedy descent from the root, picking the nearest child by Hamming distance at each
    /// level (ties to the first child).
    pub fn lookup_word(&self, d: &BinaryDescriptor) -> Result<WordHit> {
        if d.bits() != self.descriptor_bits {
            return Err(Error::WidthMismatch {
                expected: self.descriptor_bits,
                found: d.bits(),
            });
        }
        let node_id = self.descend(d);
        let node = &self.nodes[node_id];
        Ok(WordHit {
            word_id: node.word_id.expect("descent ends at a leaf"),
            weight: node.weight,
            node_id,
        })
    }

    /// Depth of every node (root = 0).
    pub fn node_depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.nodes.len()];
        for node in &self.nodes {
            for &c in &node.children {
                depth[c] = depth[node.id] + 1;
            }
        }
        depth
    }

    /// Checks every structural invariant of the tree.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Internal(m));
        if self.nodes.is_empty() {
            return bad("no root".into());
        }
        let root = &self.nodes[0];
        if root.parent.is_some() || root.centroid.is_some() {
            return bad("root must have no parent and no centroid".into());
        }
        if root.children.is_empty() {
            return bad("root has no children".into());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut depth = vec![0usize; self.nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(id) = queue.pop_front() {
            let node = &self.nodes[id];
            if node.id != id {
                return bad(format!("node at index {id} claims id {}", node.id));
            }
            if node.children.len() > self.k.max(1) {
                return bad(format!(
                    "node {id} has {} children, k = {}",
                    node.children.len(),
                    self.k
                ));
            }
            for &c in &node.children {
                let Some(child) = self.nodes.get(c) else {
                    return bad(format!("node {id} lists missing child {c}"));
                };
                if seen[c] {
                    return bad(format!("node {c} reached twice"));
                }
                if child.parent != Some(id) {
                    return bad(format!("node {c} does not point back to parent {id}"));
                }
                match &child.centroid {
                    Some(cd) if cd.bits() == self.descriptor_bits => {}
                    _ => {
                        return bad(format!(
                            "node {c} lacks a {}-bit centroid",
                            self.descriptor_bits
                        ))
                    }
                }
                seen[c] = true;
                depth[c] = depth[id] + 1;
                queue.push_back(c);
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return bad(format!("node {orphan} is unreachable from the root"));
        }
        let mut word_seen = vec![false; self.words.len()];
        for node in &self.nodes {
            if node.is_leaf() {
                if depth[node.id] > self.depth {
                    return bad(format!(
                        "leaf {} at depth {} > L = {}",
                        node.id, depth[node.id], self.depth
                    ));
                }
                let Some(w) = node.word_id else {
                    return bad(format!("leaf {} has no word id", node.id));
                };
                if w >= self.words.len() || word_seen[w] || self.words[w] != node.id {
                    return bad(format!("word id {w} is not a bijection onto leaves"));
                }
                word_seen[w] = true;
                if !(node.weight >= 0.0 && node.weight.is_finite()) {
                    return bad(format!("leaf {} has weight {}", node.id, node.weight));
                }
            } else {
                if node.word_id.is_some() {
                    return bad(format!("internal node {} carries a word id", node.id));
                }
                if node.weight != 0.0 {
                    return bad(format!(
                        "internal node {} carries weight {}",
                        node.id, node.weight
                    ));
                }
            }
        }
        if word_seen.iter().any(|s| !s) {
            return bad("word ids do not cover 0..W".into());
        }
        Ok(())
    }
}

/// What training does with a node's points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ChildPlan {
    Leaf,
    /// Fewer than `k` distinct values: one child per distinct value, in first-occurrence
    /// order, holding the positions of its copies.
    Distinct(Vec<Vec<usize>>),
    /// Cluster into this many children.
    Split(usize),
}

/// Decides how a node at `depth` splits.
///
/// One point, all-identical points, or `depth == max_depth` make a leaf. With fewer than
/// `k` distinct values the node splits by value; otherwise into `k` clusters.
pub fn small_node_rule(
    points: &[&BinaryDescriptor],
    k: usize,
    depth: usize,
    max_depth: usize,
) -> ChildPlan {
    if points.len() <= 1 || depth >= max_depth {
        return ChildPlan::Leaf;
    }
    let mut index: HashMap<&BinaryDescriptor, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        match index.get(*p) {
            Some(&g) => groups[g].push(i),
            None => {
                if groups.len() + 1 >= k {
                    return ChildPlan::Split(k);
                }
                index.insert(p, groups.len());
                groups.push(vec![i]);
            }
        }
    }
    if groups.len() == 1 {
        ChildPlan::Leaf
    } else {
        ChildPlan::Distinct(groups)
    }
}

/// A trained vocabulary together with the training partition of the corpus.
#[derive(Clone, Debug)]
pub struct TrainedVocabulary {
    pub vocabulary: Vocabulary,
    /// Corpus indices that training routed to each word, indexed by word id.
    pub leaf_members: Vec<Vec<usize>>,
}

struct Subtree {
    centroid: BinaryDescriptor,
    /// Corpus indices; kept only on leaves.
    members: Vec<usize>,
    children: Vec<Subtree>,
}

struct Ctx<'a> {
    descs: &'a [BinaryDescriptor],
    cfg: &'a TrainConfig,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn child_seed(parent: u64, index: usize) -> u64 {
    splitmix64(parent ^ splitmix64(index as u64 + 1))
}

impl Ctx<'_> {
    /// Partitions `members` into children: (binary centroid, member indices).
    fn split(
        &self,
        members: &[usize],
        plan: ChildPlan,
        seed: u64,
    ) -> Result<Vec<(BinaryDescriptor, Vec<usize>)>> {
        let refs: Vec<&BinaryDescriptor> = members.iter().map(|&i| &self.descs[i]).collect();
        let k = match plan {
            ChildPlan::Leaf => return Ok(vec![(refs[0].clone(), members.to_vec())]),
            ChildPlan::Distinct(groups) => {
                return Ok(groups
                    .into_iter()
                    .map(|g| (refs[g[0]].clone(), g.iter().map(|&p| members[p]).collect()))
                    .collect())
            }
            ChildPlan::Split(k) => k,
        };
        let cluster = ClusterConfig {
            k,
            seed,
            ..self.cfg.cluster.clone()
        };
        let gather = |assignments: &[usize], k: usize| {
            let mut out = vec![Vec::new(); k];
            for (p, &a) in assignments.iter().enumerate() {
                out[a].push(members[p]);
            }
            out
        };
        Ok(match self.cfg.strategy {
            Strategy::KMajority => {
                let res = kmajority_refs(&refs, &cluster)?;
                let m = gather(&res.assignments, k);
                res.centroids.into_iter().zip(m).collect()
            }
            Strategy::LocalBrb => {
                let res = brb_kmeans_refs(&refs, &cluster)?;
                let m = gather(&res.assignments, k);
                res.centroids.into_iter().zip(m).collect()
            }
            Strategy::GlobalHbrb => {
                // Children are partitioned by the real-domain assignment; the binary
                // centroid is only the thresholded image of the real one.
                let res = realized_lloyd_refs(&refs, &cluster)?;
                let m = gather(&res.assignments, k);
                res.centroids
                    .iter()
                    .map(|c| binarize(c, BINARIZE_THRESHOLD))
                    .zip(m)
                    .collect()
            }
        })
    }

    fn grow(
        &self,
        centroid: BinaryDescriptor,
        members: Vec<usize>,
        depth: usize,
        seed: u64,
    ) -> Result<Subtree> {
        let refs: Vec<&BinaryDescriptor> = members.iter().map(|&i| &self.descs[i]).collect();
        let plan = small_node_rule(&refs, self.cfg.k, depth, self.cfg.depth);
        drop(refs);
        if plan == ChildPlan::Leaf {
            return Ok(Subtree {
                centroid,
                members,
                children: Vec::new(),
            });
        }
        let parts = self.split(&members, plan, seed)?;
        let children = self.grow_children(parts, depth + 1, seed)?;
        Ok(Subtree {
            centroid,
            members: Vec::new(),
            children,
        })
    }

    fn grow_children(
        &self,
        parts: Vec<(BinaryDescriptor, Vec<usize>)>,
        depth: usize,
        seed: u64,
    ) -> Result<Vec<Subtree>> {
        parts
            .into_par_iter()
            .enumerate()
            .map(|(i, (c, m))| self.grow(c, m, depth, child_seed(seed, i)))
            .collect()
    }
}

/// Trains a vocabulary and IDF-weights it on the same corpus.
pub fn train(corpus: &DescriptorSet, cfg: &TrainConfig) -> Result<Vocabulary> {
    Ok(train_with_members(corpus, cfg)?.vocabulary)
}

/// Like [`train`], also returning which corpus descriptors training placed in each leaf.
pub fn train_with_members(corpus: &DescriptorSet, cfg: &TrainConfig) -> Result<TrainedVocabulary> {
    if cfg.k < 2 {
        return Err(Error::Config(format!(
            "k must be at least 2, got {}",
            cfg.k
        )));
    }
    if cfg.depth < 1 {
        return Err(Error::Config("depth L must be at least 1".into()));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyInput("training corpus"));
    }
    let descs = corpus.descriptors();
    let ctx = Ctx { descs, cfg };
    let root_seed = splitmix64(cfg.seed);
    let all: Vec<usize> = (0..descs.len()).collect();
    let refs: Vec<&BinaryDescriptor> = descs.iter().collect();
    // The root always gets children; a degenerate corpus yields one leaf under it.
    let plan = small_node_rule(&refs, cfg.k, 0, cfg.depth);
    drop(refs);
    let parts = ctx.split(&all, plan, root_seed)?;
    let top = ctx.grow_children(parts, 1, root_seed)?;

    let mut nodes = vec![VocabNode {
        id: 0,
        parent: None,
        children: Vec::new(),
        centroid: None,
        word_id: None,
        weight: 0.0,
    }];
    let mut leaf_members_by_node: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut queue: VecDeque<(Subtree, usize)> = top.into_iter().map(|t| (t, 0)).collect();
    while let Some((sub, parent)) = queue.pop_front() {
        let id = nodes.len();
        nodes[parent].children.push(id);
        nodes.push(VocabNode {
            id,
            parent: Some(parent),
            children: Vec::new(),
            centroid: Some(sub.centroid),
            word_id: None,
            weight: 0.0,
        });
        if sub.children.is_empty() {
            leaf_members_by_node.insert(id, sub.members);
        } else {
            queue.extend(sub.children.into_iter().map(|c| (c, id)));
        }
    }

    let mut vocabulary =
        Vocabulary::from_nodes(cfg.k, cfg.depth, Some(cfg.strategy), corpus.bits(), nodes)?;
    vocabulary.compute_idf(corpus)?;
    vocabulary.validate()?;
    let leaf_members = vocabulary
        .words
        .iter()
        .map(|node| leaf_members_by_node.remove(node).unwrap_or_default())
        .collect();
    Ok(TrainedVocabulary {
        vocabulary,
        leaf_members,
    })
}
