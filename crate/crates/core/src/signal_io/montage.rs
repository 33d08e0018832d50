use std::path::Path;

use super::{Channel, MontagedRecording, RawRecording, Result, SignalError};

/// The shipped 20-channel temporal-central-parasagittal montage.
pub const DEFAULT_MONTAGE: &str = include_str!("../../montages/tcp20.montage");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MontagePair {
    pub anode: String,
    pub cathode: String,
}

impl MontagePair {
    pub fn label(&self) -> String {
        format!("{}-{}", self.anode, self.cathode)
    }
}

/// Ordered list of differential channel definitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MontageSpec {
    pub name: String,
    pairs: Vec<MontagePair>,
}

impl MontageSpec {
    pub fn new(name: impl Into<String>, pairs: Vec<MontagePair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(SignalError::EmptyMontage);
        }
        Ok(Self { name: name.into(), pairs })
    }

    /// Parses `ANODE,CATHODE` lines; `#` starts a comment.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(c), None) if !a.is_empty() && !c.is_empty() => {
                    pairs.push(MontagePair { anode: a.into(), cathode: c.into() })
                }
                _ => {
                    return Err(SignalError::MontageSyntax {
                        line: i + 1,
                        msg: format!("expected `ANODE,CATHODE`, found {line:?}"),
                    })
                }
            }
        }
        Self::new(name, pairs)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SignalError::Io { path: path.into(), source })?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("montage");
        Self::parse(name, &text)
    }

    pub fn default_tcp() -> Self {
        Self::parse("tcp20", DEFAULT_MONTAGE).expect("shipped montage parses")
    }

    pub fn pairs(&self) -> &[MontagePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Resolves every pair to `(anode_index, cathode_index)` in `names`.
    pub fn resolve<'a>(&self, names: impl Iterator<Item = &'a str> + Clone) -> Result<Vec<(usize, usize)>> {
        let find = |want: &str| {
            names
                .clone()
                .position(|n| n == want)
                .ok_or_else(|| SignalError::UnknownChannel(want.to_string()))
        };
        self.pairs.iter().map(|p| Ok((find(&p.anode)?, find(&p.cathode)?))).collect()
    }
}

pub fn apply_montage(rec: &RawRecording, spec: &MontageSpec) -> Result<MontagedRecording> {
    let idx = spec.resolve(rec.channels().iter().map(|c| c.name.as_str()))?;
    let channels = spec
        .pairs()
        .iter()
        .zip(idx)
        .map(|(pair, (a, c))| {
            let anode = &rec.channels()[a].samples;
            let cathode = &rec.channels()[c].samples;
            Channel::new(pair.label(), anode.iter().zip(cathode).map(|(x, y)| x - y).collect())
        })
        .collect();
    MontagedRecording::new(channels, rec.sample_rate_hz())
}
