use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ids::{EdgeId, NodeId};

/// A walk through a graph: `node_0, edge_1, node_1, …, node_k`.
///
/// Serialized as the flat alternating id list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub start: NodeId,
    pub steps: Vec<(EdgeId, NodeId)>,
}

impl Path {
    pub fn new(start: impl Into<NodeId>) -> Self {
        Self {
            start: start.into(),
            steps: Vec::new(),
        }
    }

    pub fn push(&mut self, edge: EdgeId, node: NodeId) {
        self.steps.push((edge, node));
    }

    pub fn last(&self) -> &NodeId {
        self.steps.last().map_or(&self.start, |(_, n)| n)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        std::iter::once(&self.start).chain(self.steps.iter().map(|(_, n)| n))
    }

    pub fn edges(&self) -> impl Iterator<Item = &EdgeId> {
        self.steps.iter().map(|(e, _)| e)
    }

    /// Number of ids in the alternating form (always odd).
    pub fn len(&self) -> usize {
        1 + 2 * self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_ids(&self) -> Vec<String> {
        let mut out = vec![self.start.to_string()];
        for (e, n) in &self.steps {
            out.push(e.to_string());
            out.push(n.to_string());
        }
        out
    }

    /// Inverse of [`Path::to_ids`]; `None` when the list length is even.
    pub fn from_ids<S: AsRef<str>>(ids: &[S]) -> Option<Self> {
        let (first, rest) = ids.split_first()?;
        if rest.len() % 2 != 0 {
            return None;
        }
        let mut path = Path::new(first.as_ref());
        for pair in rest.chunks(2) {
            path.push(pair[0].as_ref().into(), pair[1].as_ref().into());
        }
        Some(path)
    }
}

impl Serialize for Path {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_ids().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Path {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ids = Vec::<String>::deserialize(deserializer)?;
        Path::from_ids(&ids)
            .ok_or_else(|| serde::de::Error::custom("path must alternate node, edge, …, node"))
    }
}
