use std::fmt;

use serde::{Deserialize, Serialize};

/// Per-cell operative state chosen every slot.
///
/// Integer codes are part of every file format (metrics, policy CSVs,
/// Q-table rows) and must not be renumbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperativeMode {
    /// Cell switched off; its traffic is dropped.
    Off = 0,
    /// Only RF runs at the cell, all baseband is processed at the macro site.
    PhyRf = 1,
    /// PHY runs locally, MAC and above at the macro site.
    MacPhy = 2,
}

impl OperativeMode {
    pub const COUNT: usize = 3;
    pub const ALL: [OperativeMode; 3] = [OperativeMode::Off, OperativeMode::PhyRf, OperativeMode::MacPhy];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Off),
            1 => Some(Self::PhyRf),
            2 => Some(Self::MacPhy),
            _ => None,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        u8::try_from(index).ok().and_then(Self::from_code)
    }

    pub fn is_on(self) -> bool {
        self != Self::Off
    }
}

impl fmt::Display for OperativeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Off => "off",
            Self::PhyRf => "phy-rf",
            Self::MacPhy => "mac-phy",
        })
    }
}
