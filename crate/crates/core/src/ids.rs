//! Canonical identifiers (`WF-3`, `UI-2`, `DM-1`, `F-7`, `FS-2`).

use std::fmt;

use serde::{Deserialize, Serialize};

/// Parses `<prefix>-<n>` with `n >= 1`, returning `n`.
pub fn parse_numbered(prefix: &str, id: &str) -> Option<u32> {
    let rest = id.strip_prefix(prefix)?.strip_prefix('-')?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) || rest.starts_with('0') {
        return None;
    }
    rest.parse().ok().filter(|n| *n > 0)
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// Feature id, `F-<n>`.
    FeatureId
);
string_id!(
    /// Feature set id, `FS-<n>`. Ordering is lexicographic on the text.
    SetId
);
string_id!(
    /// Overall-design element id, `UI-<n>` or `DM-<n>`.
    DesignId
);

impl FeatureId {
    pub fn canonical(n: usize) -> Self {
        Self(format!("F-{n}"))
    }
}

impl SetId {
    pub fn canonical(n: usize) -> Self {
        Self(format!("FS-{n}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignNamespace {
    Ui,
    Data,
}

impl DesignNamespace {
    pub fn prefix(self) -> &'static str {
        match self {
            DesignNamespace::Ui => "UI",
            DesignNamespace::Data => "DM",
        }
    }
}

impl DesignId {
    pub fn canonical(ns: DesignNamespace, n: usize) -> Self {
        Self(format!("{}-{n}", ns.prefix()))
    }

    pub fn namespace(&self) -> Option<DesignNamespace> {
        if parse_numbered("UI", &self.0).is_some() {
            Some(DesignNamespace::Ui)
        } else if parse_numbered("DM", &self.0).is_some() {
            Some(DesignNamespace::Data)
        } else {
            None
        }
    }

    pub fn number(&self) -> Option<u32> {
        self.namespace().and_then(|ns| parse_numbered(ns.prefix(), &self.0))
    }
}
