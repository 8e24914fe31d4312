//! Versioned labeling rules loaded from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Etype;

pub const DEFAULT_RULES_TOML: &str = include_str!("../rules/default_rules.toml");

/// Rules schema version this build understands.
pub const RULES_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalRule {
    pub signal: String,
    pub etype: Etype,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CardRules {
    pub root_classes: Vec<String>,
    #[serde(default)]
    pub snippet_classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierRules {
    pub heading: Vec<SignalRule>,
    pub ad_class: Vec<SignalRule>,
    pub knowledge_class: Vec<SignalRule>,
    pub attrid_prefix: Vec<SignalRule>,
    pub organic: Etype,
    pub heading_fallback: Etype,
    pub chrome_class: Vec<SignalRule>,
    pub default: Etype,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rules {
    pub version: u32,
    pub name: String,
    pub cards: CardRules,
    pub tiers: TierRules,
}

impl Default for Rules {
    fn default() -> Self {
        Rules::from_toml_str(DEFAULT_RULES_TOML).expect("bundled rules file parses")
    }
}

/// Lowercases and collapses whitespace runs to single spaces.
pub fn normalize_heading(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

impl Rules {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let rules: Rules = toml::from_str(text).map_err(|e| Error::Rules(e.to_string()))?;
        if rules.version != RULES_VERSION {
            return Err(Error::Rules(format!(
                "unsupported rules version {} (expected {RULES_VERSION})",
                rules.version
            )));
        }
        if rules.cards.root_classes.is_empty() {
            return Err(Error::Rules("cards.root_classes is empty".into()));
        }
        Ok(rules)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn heading_etype(&self, heading: &str) -> Option<Etype> {
        let h = normalize_heading(heading);
        self.tiers
            .heading
            .iter()
            .find(|r| normalize_heading(&r.signal) == h)
            .map(|r| r.etype)
    }

    pub fn is_chrome_token(&self, token: &str) -> bool {
        self.tiers.chrome_class.iter().any(|r| r.signal == token)
    }
}
