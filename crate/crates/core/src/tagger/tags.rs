use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const NUM_TAGS: usize = 11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityType {
    Org,
    Cat,
    LocState,
    LocCity,
    LocZip,
}

impl EntityType {
    pub const ALL: [EntityType; 5] = [
        EntityType::Org,
        EntityType::Cat,
        EntityType::LocState,
        EntityType::LocCity,
        EntityType::LocZip,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EntityType::Org => "Organization Name",
            EntityType::Cat => "Business Category",
            EntityType::LocState => "Location:State",
            EntityType::LocCity => "Location:City",
            EntityType::LocZip => "Location:ZipCode",
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            EntityType::Org => "ORG",
            EntityType::Cat => "CAT",
            EntityType::LocState => "LOC-STATE",
            EntityType::LocCity => "LOC-CITY",
            EntityType::LocZip => "LOC-ZIP",
        }
    }
}

/// BIO tags in decoding tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    BOrg,
    IOrg,
    BCat,
    ICat,
    BLocState,
    ILocState,
    BLocCity,
    ILocCity,
    BLocZip,
    ILocZip,
    O,
}

pub const ALL_TAGS: [Tag; NUM_TAGS] = [
    Tag::BOrg,
    Tag::IOrg,
    Tag::BCat,
    Tag::ICat,
    Tag::BLocState,
    Tag::ILocState,
    Tag::BLocCity,
    Tag::ILocCity,
    Tag::BLocZip,
    Tag::ILocZip,
    Tag::O,
];

impl Tag {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Tag {
        ALL_TAGS[i]
    }

    pub fn entity(self) -> Option<EntityType> {
        Some(match self {
            Tag::BOrg | Tag::IOrg => EntityType::Org,
            Tag::BCat | Tag::ICat => EntityType::Cat,
            Tag::BLocState | Tag::ILocState => EntityType::LocState,
            Tag::BLocCity | Tag::ILocCity => EntityType::LocCity,
            Tag::BLocZip | Tag::ILocZip => EntityType::LocZip,
            Tag::O => return None,
        })
    }

    pub fn is_inside(self) -> bool {
        matches!(
            self,
            Tag::IOrg | Tag::ICat | Tag::ILocState | Tag::ILocCity | Tag::ILocZip
        )
    }

    pub fn begin(entity: EntityType) -> Tag {
        match entity {
            EntityType::Org => Tag::BOrg,
            EntityType::Cat => Tag::BCat,
            EntityType::LocState => Tag::BLocState,
            EntityType::LocCity => Tag::BLocCity,
            EntityType::LocZip => Tag::BLocZip,
        }
    }

    pub fn inside(entity: EntityType) -> Tag {
        match entity {
            EntityType::Org => Tag::IOrg,
            EntityType::Cat => Tag::ICat,
            EntityType::LocState => Tag::ILocState,
            EntityType::LocCity => Tag::ILocCity,
            EntityType::LocZip => Tag::ILocZip,
        }
    }

    /// Whether `self` may follow `prev` (`None` = sequence start).
    pub fn can_follow(self, prev: Option<Tag>) -> bool {
        if !self.is_inside() {
            return true;
        }
        match prev {
            None => false,
            Some(p) => p.entity() == self.entity(),
        }
    }

    pub fn is_valid_sequence(tags: &[Tag]) -> bool {
        let mut prev = None;
        for &t in tags {
            if !t.can_follow(prev) {
                return false;
            }
            prev = Some(t);
        }
        true
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self, self.entity()) {
            (Tag::O, _) | (_, None) => f.write_str("O"),
            (t, Some(e)) => {
                let prefix = if t.is_inside() { "I" } else { "B" };
                write!(f, "{prefix}-{}", e.suffix())
            }
        }
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(Tag::O);
        }
        let (prefix, rest) = s
            .split_once('-')
            .ok_or_else(|| format!("unknown tag {s:?}"))?;
        let entity = EntityType::ALL
            .into_iter()
            .find(|e| e.suffix() == rest)
            .ok_or_else(|| format!("unknown tag {s:?}"))?;
        match prefix {
            "B" => Ok(Tag::begin(entity)),
            "I" => Ok(Tag::inside(entity)),
            _ => Err(format!("unknown tag {s:?}")),
        }
    }
}
