use serde::{Deserialize, Serialize};

/// Role of an attribute in the elicitation workflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeTag {
    DeclaredKey,
    SurrogateKey,
    NaturalKeyMember,
    ForeignKey,
    SurrogateForeignKey,
    Remaining,
}

impl AttributeTag {
    /// Short category label shown on profile charts.
    pub fn category(self) -> &'static str {
        match self {
            AttributeTag::DeclaredKey => "K",
            AttributeTag::SurrogateKey => "SK",
            AttributeTag::NaturalKeyMember => "NK",
            AttributeTag::ForeignKey | AttributeTag::SurrogateForeignKey => "FK",
            AttributeTag::Remaining => "RA",
        }
    }

    pub fn is_key(self) -> bool {
        matches!(self, AttributeTag::DeclaredKey | AttributeTag::SurrogateKey)
    }

    pub fn is_foreign(self) -> bool {
        matches!(self, AttributeTag::ForeignKey | AttributeTag::SurrogateForeignKey)
    }
}
