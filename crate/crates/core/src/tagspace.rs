//! Tag sets, BIO labels and the tag hierarchy that aligns several tag sets
//! onto one unified space of fine-grained leaf types.
//!
//! Labels of a tag set with `n` entity types are indexed `O = 0`,
//! `B-type_k = 2k + 1`, `I-type_k = 2k + 2`.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hasher;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use twox_hash::XxHash64;

use crate::error::{Error, Result};

/// Suffix appended to a parent tag to name its placeholder child.
pub const PLACEHOLDER_SUFFIX: &str = "-OTHER";

/// Prefix of a BIO label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BioKind {
    O,
    B,
    I,
}

/// A span label in BIO encoding.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BioLabel {
    Outside,
    Begin(String),
    Inside(String),
}

impl BioLabel {
    pub fn kind(&self) -> BioKind {
        match self {
            BioLabel::Outside => BioKind::O,
            BioLabel::Begin(_) => BioKind::B,
            BioLabel::Inside(_) => BioKind::I,
        }
    }

    pub fn entity_type(&self) -> Option<&str> {
        match self {
            BioLabel::Outside => None,
            BioLabel::Begin(t) | BioLabel::Inside(t) => Some(t),
        }
    }
}

impl fmt::Display for BioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioLabel::Outside => f.write_str("O"),
            BioLabel::Begin(t) => write!(f, "B-{t}"),
            BioLabel::Inside(t) => write!(f, "I-{t}"),
        }
    }
}

impl FromStr for BioLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(BioLabel::Outside);
        }
        let (prefix, name) = s
            .split_once('-')
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))?;
        if name.is_empty() {
            return Err(Error::UnknownLabel(s.to_string()));
        }
        match prefix {
            "B" => Ok(BioLabel::Begin(name.to_string())),
            "I" => Ok(BioLabel::Inside(name.to_string())),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

/// A closed inventory of entity types, with BIO label indexing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagSet {
    id: String,
    types: Vec<String>,
    index: HashMap<String, usize>,
}

impl TagSet {
    pub fn new<S: Into<String>>(
        id: impl Into<String>,
        types: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let id = id.into();
        let types: Vec<String> = types.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(types.len());
        for (k, t) in types.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::TagSet(format!(
                    "bad entity type name {t:?} in `{id}`"
                )));
            }
            if index.insert(t.clone(), k).is_some() {
                return Err(Error::TagSet(format!(
                    "duplicate entity type `{t}` in `{id}`"
                )));
            }
        }
        Ok(TagSet { id, types, index })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// `2·|types| + 1`.
    pub fn label_count(&self) -> usize {
        2 * self.types.len() + 1
    }

    pub fn label(&self, idx: usize) -> BioLabel {
        assert!(idx < self.label_count(), "label index {idx} out of range");
        if idx == 0 {
            BioLabel::Outside
        } else {
            let name = self.types[(idx - 1) / 2].clone();
            if idx % 2 == 1 {
                BioLabel::Begin(name)
            } else {
                BioLabel::Inside(name)
            }
        }
    }

    pub fn labels(&self) -> Vec<BioLabel> {
        (0..self.label_count()).map(|i| self.label(i)).collect()
    }

    pub fn index_of(&self, label: &BioLabel) -> Option<usize> {
        match label {
            BioLabel::Outside => Some(0),
            BioLabel::Begin(t) => self.type_index(t).map(|k| 2 * k + 1),
            BioLabel::Inside(t) => self.type_index(t).map(|k| 2 * k + 2),
        }
    }

    pub fn parse_label(&self, s: &str) -> Result<usize> {
        let label: BioLabel = s.parse()?;
        self.index_of(&label)
            .ok_or_else(|| Error::UnknownLabel(format!("{s} (tag set `{}`)", self.id)))
    }

    /// Kind of the label at `idx` without allocating.
    pub fn kind_of(&self, idx: usize) -> BioKind {
        match idx {
            0 => BioKind::O,
            i if i % 2 == 1 => BioKind::B,
            _ => BioKind::I,
        }
    }

    /// Entity type index of label `idx`, `None` for `O`.
    pub fn type_of(&self, idx: usize) -> Option<usize> {
        (idx > 0).then(|| (idx - 1) / 2)
    }

    /// Same id and same ordered types.
    pub fn same_as(&self, other: &TagSet) -> bool {
        self.id == other.id && self.types == other.types
    }
}

/// Parsed hierarchy document, before validation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HierarchySpec {
    pub tag_sets: Vec<(String, Vec<String>)>,
    pub edges: Vec<(String, String)>,
    pub open: Vec<String>,
}

impl HierarchySpec {
    /// Parses the line-oriented hierarchy format:
    ///
    /// ```text
    /// # comment
    /// tagset onto: PERSON,GPE,DATE
    /// tagset i2b2: DOCTOR,PATIENT,CITY,STATE,COUNTRY,DATE
    /// edge GPE -> CITY
    /// open PERSON
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = HierarchySpec::default();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::HierarchySyntax {
                line: line_no,
                message,
            };
            let (keyword, rest) = line
                .split_once(char::is_whitespace)
                .map(|(k, r)| (k, r.trim()))
                .unwrap_or((line, ""));
            match keyword {
                "tagset" => {
                    let (id, types) = rest
                        .split_once(':')
                        .ok_or_else(|| err("expected `tagset <id>: TYPE,...`".into()))?;
                    let id = id.trim();
                    if id.is_empty() {
                        return Err(err("empty tag set id".into()));
                    }
                    let types: Vec<String> = types
                        .split(',')
                        .map(str::trim)
                        .filter(|t| !t.is_empty())
                        .map(String::from)
                        .collect();
                    spec.tag_sets.push((id.to_string(), types));
                }
                "edge" => {
                    let (p, c) = rest
                        .split_once("->")
                        .ok_or_else(|| err("expected `edge PARENT -> CHILD`".into()))?;
                    let (p, c) = (p.trim(), c.trim());
                    if p.is_empty() || c.is_empty() {
                        return Err(err("edge endpoints must be non-empty".into()));
                    }
                    spec.edges.push((p.to_string(), c.to_string()));
                }
                "open" => {
                    if rest.is_empty() || rest.contains(char::is_whitespace) {
                        return Err(err("expected `open PARENT`".into()));
                    }
                    spec.open.push(rest.to_string());
                }
                other => return Err(err(format!("unknown directive `{other}`"))),
            }
        }
        Ok(spec)
    }

    /// Identity hierarchy over one tag set.
    pub fn identity(tag_set: &TagSet) -> Self {
        HierarchySpec {
            tag_sets: vec![(tag_set.id().to_string(), tag_set.types().to_vec())],
            ..Default::default()
        }
    }

    /// Canonical text rendering; parsing it yields `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, types) in &self.tag_sets {
            out.push_str(&format!("tagset {id}: {}\n", types.join(",")));
        }
        for (p, c) in &self.edges {
            out.push_str(&format!("edge {p} -> {c}\n"));
        }
        for p in &self.open {
            out.push_str(&format!("open {p}\n"));
        }
        out
    }
}

/// Maps every label of one source tag set onto a group of unified labels.
///
/// The groups partition the unified label set.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    source: TagSet,
    unified_labels: usize,
    images: Vec<Vec<usize>>,
    owner: Vec<usize>,
    representative: Vec<usize>,
}

impl Projection {
    pub fn source(&self) -> &TagSet {
        &self.source
    }

    pub fn unified_label_count(&self) -> usize {
        self.unified_labels
    }

    pub fn group_count(&self) -> usize {
        self.images.len()
    }

    /// Unified labels covered by source label `src`, ascending.
    pub fn image(&self, src: usize) -> &[usize] {
        &self.images[src]
    }

    pub fn images(&self) -> &[Vec<usize>] {
        &self.images
    }

    /// The source label whose image contains unified label `unified`.
    pub fn source_of(&self, unified: usize) -> usize {
        self.owner[unified]
    }

    /// A single unified label standing in for source label `src` when a
    /// decoded coarse label has to be placed in the unified space.
    pub fn representative(&self, src: usize) -> usize {
        self.representative[src]
    }

    /// Maps a unified label sequence down to the source tag set.
    pub fn coarsen(&self, unified: &[usize]) -> Vec<usize> {
        unified.iter().map(|&u| self.owner[u]).collect()
    }

    /// Identity projection of a tag set onto itself.
    pub fn identity(tag_set: &TagSet) -> Self {
        let n = tag_set.label_count();
        Projection {
            source: tag_set.clone(),
            unified_labels: n,
            images: (0..n).map(|i| vec![i]).collect(),
            owner: (0..n).collect(),
            representative: (0..n).collect(),
        }
    }

    /// Re-checks the partition property from scratch.
    pub fn validate(&self) -> Result<()> {
        let violation = |message: String| Error::PartitionViolation {
            tag_set: self.source.id().to_string(),
            message,
        };
        if self.images.len() != self.source.label_count() {
            return Err(violation("one image per source label required".into()));
        }
        let mut seen = vec![0usize; self.unified_labels];
        for (src, image) in self.images.iter().enumerate() {
            if image.is_empty() {
                return Err(violation(format!("source label {src} has an empty image")));
            }
            for &u in image {
                if u >= self.unified_labels {
                    return Err(violation(format!("unified label {u} out of range")));
                }
                seen[u] += 1;
            }
        }
        if let Some(u) = seen.iter().position(|&c| c != 1) {
            return Err(violation(format!(
                "unified label {u} covered {} times",
                seen[u]
            )));
        }
        if !self.images[0].contains(&0) {
            return Err(violation(
                "O must map to a group containing unified O".into(),
            ));
        }
        Ok(())
    }
}

/// Validated DAG of hypernym/hyponym relations between tags of several tag
/// sets, with the unified leaf tag set and cached projections.
#[derive(Debug)]
pub struct TagHierarchy {
    id: String,
    spec: HierarchySpec,
    tag_sets: Vec<TagSet>,
    nodes: Vec<String>,
    node_index: HashMap<String, usize>,
    children: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
    placeholder: Vec<bool>,
    descendants: Vec<Vec<usize>>,
    unified: TagSet,
    projections: Vec<Arc<Projection>>,
}

impl TagHierarchy {
    pub fn parse(text: &str) -> Result<Self> {
        Self::build(HierarchySpec::parse(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Identity hierarchy: the tag set is its own unified space.
    pub fn identity(tag_set: &TagSet) -> Result<Self> {
        Self::build(HierarchySpec::identity(tag_set))
    }

    pub fn build(spec: HierarchySpec) -> Result<Self> {
        let mut tag_sets = Vec::with_capacity(spec.tag_sets.len());
        let mut nodes: Vec<String> = Vec::new();
        let mut node_index: HashMap<String, usize> = HashMap::new();
        for (id, types) in &spec.tag_sets {
            if tag_sets.iter().any(|k: &TagSet| k.id() == id) {
                return Err(Error::TagSet(format!("tag set `{id}` declared twice")));
            }
            let tag_set = TagSet::new(id.clone(), types.iter().cloned())?;
            for t in tag_set.types() {
                if !node_index.contains_key(t) {
                    node_index.insert(t.clone(), nodes.len());
                    nodes.push(t.clone());
                }
            }
            tag_sets.push(tag_set);
        }
        if tag_sets.is_empty() {
            return Err(Error::TagSet("hierarchy declares no tag sets".into()));
        }

        let mut children: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        let lookup = |name: &str, index: &HashMap<String, usize>| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::UnknownTag(name.to_string()))
        };
        for (p, c) in &spec.edges {
            let (pi, ci) = (lookup(p, &node_index)?, lookup(c, &node_index)?);
            if pi == ci {
                return Err(Error::Cycle(p.clone()));
            }
            if !children[pi].contains(&ci) {
                children[pi].push(ci);
            }
        }

        let mut placeholder = vec![false; nodes.len()];
        let mut opened: Vec<usize> = Vec::new();
        for p in &spec.open {
            let pi = lookup(p, &node_index)?;
            if opened.contains(&pi) {
                continue;
            }
            opened.push(pi);
            let name = format!("{p}{PLACEHOLDER_SUFFIX}");
            if node_index.contains_key(&name) {
                return Err(Error::PlaceholderCollision(name));
            }
            let id = nodes.len();
            node_index.insert(name.clone(), id);
            nodes.push(name);
            children.push(Vec::new());
            placeholder.push(true);
            children[pi].push(id);
        }

        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        for (p, cs) in children.iter().enumerate() {
            for &c in cs {
                parents[c].push(p);
            }
        }

        check_acyclic(&nodes, &children)?;

        let leaves: Vec<usize> = (0..nodes.len())
            .filter(|&n| children[n].is_empty())
            .collect();
        let mut leaf_rank = vec![usize::MAX; nodes.len()];
        for (rank, &leaf) in leaves.iter().enumerate() {
            leaf_rank[leaf] = rank;
        }
        let mut memo: Vec<Option<Vec<usize>>> = vec![None; nodes.len()];
        for n in 0..nodes.len() {
            collect_leaves(n, &children, &leaf_rank, &mut memo);
        }
        let descendants: Vec<Vec<usize>> = memo.into_iter().map(Option::unwrap).collect();

        let unified = TagSet::new("unified", leaves.iter().map(|&l| nodes[l].clone()))?;

        let id = {
            let mut h = XxHash64::with_seed(0);
            h.write(spec.to_text().as_bytes());
            format!("{:016x}", h.finish())
        };

        let mut hierarchy = TagHierarchy {
            id,
            spec,
            tag_sets,
            nodes,
            node_index,
            children,
            parents,
            placeholder,
            descendants,
            unified,
            projections: Vec::new(),
        };
        let projections = hierarchy
            .tag_sets
            .iter()
            .map(|k| hierarchy.compute_projection(k).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        hierarchy.projections = projections;
        Ok(hierarchy)
    }

    /// Content hash of the canonical hierarchy text.
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn spec(&self) -> &HierarchySpec {
        &self.spec
    }

    pub fn tag_sets(&self) -> &[TagSet] {
        &self.tag_sets
    }

    pub fn tag_set(&self, id: &str) -> Option<&TagSet> {
        self.tag_sets.iter().find(|k| k.id() == id)
    }

    /// The unified tag set over the leaves, in declaration order.
    pub fn unified(&self) -> &TagSet {
        &self.unified
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn contains(&self, node: &str) -> bool {
        self.node_index.contains_key(node)
    }

    pub fn is_placeholder(&self, node: &str) -> bool {
        self.node_index
            .get(node)
            .is_some_and(|&n| self.placeholder[n])
    }

    pub fn children(&self, node: &str) -> Result<Vec<&str>> {
        let n = self.node(node)?;
        Ok(self.children[n]
            .iter()
            .map(|&c| self.nodes[c].as_str())
            .collect())
    }

    pub fn leaves(&self) -> &[String] {
        self.unified.types()
    }

    /// All leaves reachable from `node`; a leaf yields itself.
    pub fn descendant_leaves(&self, node: &str) -> Result<Vec<&str>> {
        let n = self.node(node)?;
        Ok(self.descendants[n]
            .iter()
            .map(|&l| self.nodes[l].as_str())
            .collect())
    }

    /// Topmost ancestor of `node`, following the first declared parent.
    pub fn root_of(&self, node: &str) -> Result<&str> {
        let mut n = self.node(node)?;
        while let Some(&p) = self.parents[n].first() {
            n = p;
        }
        Ok(&self.nodes[n])
    }

    /// Cached projection of a declared tag set.
    pub fn projection(&self, tag_set_id: &str) -> Option<Arc<Projection>> {
        self.tag_sets
            .iter()
            .position(|k| k.id() == tag_set_id)
            .map(|i| Arc::clone(&self.projections[i]))
    }

    /// Projection for `k`; cached when `k` is one of the declared tag sets,
    /// computed and validated otherwise.
    pub fn projection_for(&self, k: &TagSet) -> Result<Arc<Projection>> {
        if let Some(i) = self.tag_sets.iter().position(|d| d.same_as(k)) {
            return Ok(Arc::clone(&self.projections[i]));
        }
        if k.same_as(&self.unified) {
            return Ok(Arc::new(Projection::identity(&self.unified)));
        }
        self.compute_projection(k).map(Arc::new)
    }

    /// Tag set mapping every leaf to its root ancestor, with the matching
    /// leaf-to-root label map (indexed by unified label).
    pub fn root_tag_set(&self) -> Result<(TagSet, Vec<usize>)> {
        let mut roots: Vec<String> = Vec::new();
        for leaf in self.leaves() {
            let r = self.root_of(leaf)?.to_string();
            if !roots.contains(&r) {
                roots.push(r);
            }
        }
        let coarse = TagSet::new("roots", roots)?;
        let mut map = vec![0usize; self.unified.label_count()];
        for (u, slot) in map.iter_mut().enumerate().skip(1) {
            let leaf = &self.unified.types()[(u - 1) / 2];
            let r = coarse
                .type_index(self.root_of(leaf)?)
                .expect("root present");
            *slot = if u % 2 == 1 { 2 * r + 1 } else { 2 * r + 2 };
        }
        Ok((coarse, map))
    }

    fn node(&self, name: &str) -> Result<usize> {
        self.node_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownTag(name.to_string()))
    }

    fn compute_projection(&self, k: &TagSet) -> Result<Projection> {
        let violation = |message: String| Error::PartitionViolation {
            tag_set: k.id().to_string(),
            message,
        };
        let unified_labels = self.unified.label_count();
        let mut owner = vec![usize::MAX; unified_labels];
        let mut images = vec![Vec::new(); k.label_count()];
        let mut representative = vec![0usize; k.label_count()];
        for (ti, t) in k.types().iter().enumerate() {
            let n = self.node(t)?;
            let (b, i) = (2 * ti + 1, 2 * ti + 2);
            for &leaf in &self.descendants[n] {
                let leaf_type = self
                    .unified
                    .type_index(&self.nodes[leaf])
                    .expect("leaf in unified set");
                let (ub, ui) = (2 * leaf_type + 1, 2 * leaf_type + 2);
                if owner[ub] != usize::MAX {
                    let other = k.label(owner[ub]);
                    return Err(violation(format!(
                        "leaf `{}` is covered by both `{}` and `{t}`",
                        self.nodes[leaf],
                        other.entity_type().unwrap_or("O")
                    )));
                }
                owner[ub] = b;
                owner[ui] = i;
                images[b].push(ub);
                images[i].push(ui);
            }
            let leaves = &self.descendants[n];
            let pick = leaves
                .iter()
                .copied()
                .find(|&l| self.nodes[l] == format!("{t}{PLACEHOLDER_SUFFIX}"))
                .or_else(|| leaves.iter().copied().find(|&l| self.placeholder[l]))
                .unwrap_or(leaves[0]);
            let leaf_type = self.unified.type_index(&self.nodes[pick]).expect("leaf");
            representative[b] = 2 * leaf_type + 1;
            representative[i] = 2 * leaf_type + 2;
        }
        for (u, o) in owner.iter_mut().enumerate() {
            if *o == usize::MAX {
                *o = 0;
                images[0].push(u);
            }
        }
        for image in &mut images {
            image.sort_unstable();
        }
        let projection = Projection {
            source: k.clone(),
            unified_labels,
            images,
            owner,
            representative,
        };
        projection.validate()?;
        Ok(projection)
    }
}

fn check_acyclic(nodes: &[String], children: &[Vec<usize>]) -> Result<()> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; nodes.len()];
    for root in 0..nodes.len() {
        if mark[root] != Mark::New {
            continue;
        }
        // iterative DFS: (node, next child position)
        let mut stack = vec![(root, 0usize)];
        mark[root] = Mark::Active;
        while let Some(&mut (n, ref mut pos)) = stack.last_mut() {
            if let Some(&c) = children[n].get(*pos) {
                *pos += 1;
                match mark[c] {
                    Mark::Active => return Err(Error::Cycle(nodes[c].clone())),
                    Mark::New => {
                        mark[c] = Mark::Active;
                        stack.push((c, 0));
                    }
                    Mark::Done => {}
                }
            } else {
                mark[n] = Mark::Done;
                stack.pop();
            }
        }
    }
    Ok(())
}

fn collect_leaves(
    n: usize,
    children: &[Vec<usize>],
    leaf_rank: &[usize],
    memo: &mut Vec<Option<Vec<usize>>>,
) -> Vec<usize> {
    if let Some(done) = &memo[n] {
        return done.clone();
    }
    let leaves = if children[n].is_empty() {
        vec![n]
    } else {
        let mut acc = Vec::new();
        for &c in &children[n] {
            for l in collect_leaves(c, children, leaf_rank, memo) {
                if !acc.contains(&l) {
                    acc.push(l);
                }
            }
        }
        acc.sort_by_key(|&l| leaf_rank[l]);
        acc
    };
    memo[n] = Some(leaves.clone());
    leaves
}
