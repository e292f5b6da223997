//! MIB variable groups and a correlation-based feature ranking.

use serde::Deserialize;

use crate::dataset::{Dataset, FeatureSchema};
use crate::error::{Error, Result};

/// MIB-II Interface group counters, in catalog order.
pub const INTERFACE_VARIABLES: [&str; 8] = [
    "ifInOctets",
    "ifOutOctets",
    "ifOutDiscards",
    "ifInUcastPkts",
    "ifInNUcastPkts",
    "ifInDiscards",
    "ifOutUcastPkts",
    "ifOutNUcastPkts",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureGroup {
    pub name: String,
    pub members: Vec<String>,
}

impl FeatureGroup {
    pub fn new(name: impl Into<String>, members: impl IntoIterator<Item = impl Into<String>>) -> Self {
        FeatureGroup {
            name: name.into(),
            members: members.into_iter().map(Into::into).collect(),
        }
    }

    pub fn interface() -> Self {
        FeatureGroup::new("Interface", INTERFACE_VARIABLES)
    }

    pub fn schema(&self) -> Result<FeatureSchema> {
        FeatureSchema::new(self.members.iter().cloned())
    }
}

#[derive(Deserialize)]
struct GroupFile {
    #[serde(default)]
    groups: Vec<GroupEntry>,
}

#[derive(Deserialize)]
struct GroupEntry {
    name: String,
    members: Vec<String>,
}

/// Built-in groups plus any user-defined ones.
#[derive(Debug, Clone)]
pub struct GroupCatalog {
    groups: Vec<FeatureGroup>,
}

impl Default for GroupCatalog {
    fn default() -> Self {
        GroupCatalog {
            groups: vec![FeatureGroup::interface()],
        }
    }
}

impl GroupCatalog {
    /// Adds groups from a TOML document of the form
    ///
    /// ```toml
    /// [[groups]]
    /// name = "inbound"
    /// members = ["ifInOctets", "ifInUcastPkts"]
    /// ```
    ///
    /// A custom group replaces a built-in one with the same (case-insensitive) name.
    pub fn extend_from_toml(&mut self, text: &str) -> Result<()> {
        let file: GroupFile =
            toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("group file: {e}")))?;
        for entry in file.groups {
            if entry.members.is_empty() {
                return Err(Error::InvalidArgument(format!("group {:?} has no members", entry.name)));
            }
            let group = FeatureGroup::new(entry.name, entry.members);
            group.schema()?;
            self.groups.retain(|g| !g.name.eq_ignore_ascii_case(&group.name));
            self.groups.push(group);
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&FeatureGroup> {
        self.groups
            .iter()
            .find(|g| g.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownGroup(name.to_string()))
    }

    pub fn groups(&self) -> &[FeatureGroup] {
        &self.groups
    }
}

/// Projects `d` onto the group's members, in group order. Every member
/// must be present; the error lists the ones that are not.
pub fn select_group(d: &Dataset, g: &FeatureGroup) -> Result<Dataset> {
    let missing: Vec<String> = g
        .members
        .iter()
        .filter(|m| d.schema().index_of(m).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::GroupMissing {
            group: g.name.clone(),
            missing,
        });
    }
    d.project(&g.schema()?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRanking {
    pub entries: Vec<(String, f64)>,
}

impl FeatureRanking {
    pub fn top(&self, k: usize) -> Vec<&str> {
        self.entries.iter().take(k).map(|(n, _)| n.as_str()).collect()
    }
}

fn abs_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).abs().min(1.0)
}

/// Scores each feature by its absolute Pearson correlation with every
/// one-vs-rest class indicator, averaged over the classes present in `d`.
/// Sorted by descending score, ties in schema order.
pub fn rank_features(d: &Dataset) -> Result<FeatureRanking> {
    let counts = d.class_counts();
    let present: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    if present.len() < 2 {
        return Err(Error::InvalidArgument(
            "feature ranking needs at least two classes".into(),
        ));
    }
    let indicators: Vec<Vec<f64>> = present
        .iter()
        .map(|&c| {
            d.records()
                .iter()
                .map(|r| if r.label == c { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let mut entries: Vec<(usize, f64)> = (0..d.n_features())
        .map(|j| {
            let col: Vec<f64> = d.records().iter().map(|r| r.values[j]).collect();
            let score = indicators.iter().map(|ind| abs_pearson(&col, ind)).sum::<f64>()
                / indicators.len() as f64;
            (j, score)
        })
        .collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(FeatureRanking {
        entries: entries
            .into_iter()
            .map(|(j, s)| (d.schema().names()[j].clone(), s))
            .collect(),
    })
}

/// Keeps the `k` best-ranked features, in their original schema order.
pub fn select_top_k(d: &Dataset, ranking: &FeatureRanking, k: usize) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::InvalidArgument("top-k must be at least 1".into()));
    }
    let keep = ranking.top(k);
    let names: Vec<String> = d
        .schema()
        .names()
        .iter()
        .filter(|n| keep.contains(&n.as_str()))
        .cloned()
        .collect();
    d.project(&FeatureSchema::new(names)?)
}
