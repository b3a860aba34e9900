use std::fmt;
use std::str::FromStr;

use crate::cnn::Network;
use crate::error::{Error, Result};

/// Tap names of the three layers the grasp pipeline reads.
pub const CONV5: &str = "conv-5";
pub const CONV4: &str = "conv-4";
pub const CONV3: &str = "conv-3";

/// The i-th filter of a tapped conv layer.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FilterId {
    pub tap: String,
    pub filter: usize,
}

impl FilterId {
    pub fn new(tap: &str, filter: usize) -> Self {
        Self {
            tap: tap.to_string(),
            filter,
        }
    }

    pub fn check(&self, net: &Network) -> Result<()> {
        let g = net.tap_geometry(&self.tap)?;
        if self.filter >= g.channels {
            return Err(Error::Feature(format!("{self}: layer has only {} filters", g.channels)));
        }
        Ok(())
    }
}

impl fmt::Display for FilterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.tap, self.filter)
    }
}

impl FromStr for FilterId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (tap, idx) = s
            .rsplit_once('/')
            .ok_or_else(|| Error::parse("filter id", format!("expected tap/index, got {s:?}")))?;
        let filter = idx
            .parse()
            .map_err(|e| Error::parse("filter id", format!("{s:?}: {e}")))?;
        Ok(FilterId::new(tap, filter))
    }
}

/// Filters from the highest layer down, each feeding the one above it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HierFeature {
    filters: Vec<FilterId>,
}

impl HierFeature {
    pub fn root(f: FilterId) -> Self {
        Self { filters: vec![f] }
    }

    /// Builds a tuple and checks that its layers strictly descend in `net`.
    pub fn new(filters: Vec<FilterId>, net: &Network) -> Result<Self> {
        if filters.is_empty() {
            return Err(Error::Feature("empty feature tuple".into()));
        }
        let mut prev = usize::MAX;
        for f in &filters {
            f.check(net)?;
            let l = net.tap_layer(&f.tap)?;
            if l >= prev {
                return Err(Error::Feature(format!("layers do not descend at {f}")));
            }
            prev = l;
        }
        Ok(Self { filters })
    }

    pub(crate) fn from_vec_unchecked(filters: Vec<FilterId>) -> Self {
        Self { filters }
    }

    pub fn filters(&self) -> &[FilterId] {
        &self.filters
    }

    /// The conv-5 parent.
    pub fn parent(&self) -> &FilterId {
        &self.filters[0]
    }

    pub fn lowest(&self) -> &FilterId {
        self.filters.last().expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn child(&self, f: FilterId) -> Self {
        let mut filters = self.filters.clone();
        filters.push(f);
        Self { filters }
    }
}

impl fmt::Display for HierFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, id) in self.filters.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{id}")?;
        }
        Ok(())
    }
}

impl FromStr for HierFeature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let filters = s.split(',').map(str::parse).collect::<Result<Vec<FilterId>>>()?;
        if filters.is_empty() {
            return Err(Error::parse("feature", "empty tuple"));
        }
        Ok(Self { filters })
    }
}
