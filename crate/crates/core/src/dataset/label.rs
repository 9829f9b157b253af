use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::Error;

/// Maneuver taxonomy plus the visibility sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ManeuverLabel {
    Straight,
    Turning,
    NudgeAroundObstacle,
    LaneChange,
    Reversing,
    UTurn,
    GettingOnRoad,
    ParkingLaneCutin,
    Stationary,
    GoingOffRoad,
    Stopped,
    HardStopped,
    /// Only ever produced by visibility relabeling.
    AgentNotVisible,
}

use ManeuverLabel::*;

impl ManeuverLabel {
    /// The twelve maneuvers a labeled scene can carry before relabeling.
    pub const BASE: [ManeuverLabel; 12] = [
        Straight,
        Turning,
        NudgeAroundObstacle,
        LaneChange,
        Reversing,
        UTurn,
        GettingOnRoad,
        ParkingLaneCutin,
        Stationary,
        GoingOffRoad,
        Stopped,
        HardStopped,
    ];

    /// Full label space: the base maneuvers plus the sentinel.
    pub const ALL: [ManeuverLabel; 13] = [
        Straight,
        Turning,
        NudgeAroundObstacle,
        LaneChange,
        Reversing,
        UTurn,
        GettingOnRoad,
        ParkingLaneCutin,
        Stationary,
        GoingOffRoad,
        Stopped,
        HardStopped,
        AgentNotVisible,
    ];

    pub fn is_sentinel(self) -> bool {
        self == AgentNotVisible
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Straight => "STRAIGHT",
            Turning => "TURNING",
            NudgeAroundObstacle => "NUDGE_AROUND_OBSTACLE",
            LaneChange => "LANE_CHANGE",
            Reversing => "REVERSING",
            UTurn => "U_TURN",
            GettingOnRoad => "GETTING_ON_ROAD",
            ParkingLaneCutin => "PARKING_LANE_CUTIN",
            Stationary => "STATIONARY",
            GoingOffRoad => "GOING_OFF_ROAD",
            Stopped => "STOPPED",
            HardStopped => "HARD_STOPPED",
            AgentNotVisible => "AGENT_NOT_VISIBLE",
        }
    }

    /// Verb phrase describing the maneuver, completing "The agent ...".
    pub fn gloss(self) -> &'static str {
        match self {
            Straight => "is going straight",
            Turning => "is making a turn in the junction",
            NudgeAroundObstacle => {
                "is going around an obstacle like a vehicle, pedestrian or garbage"
            }
            LaneChange => "is making a lane change",
            Reversing => "is moving backwards on the road",
            UTurn => "is making a U turn",
            GettingOnRoad => "is transitioning from being off road to being on road",
            ParkingLaneCutin => {
                "is transitioning from being in the parking lane to being in the driving lane"
            }
            Stationary => "is parked or double parked",
            GoingOffRoad => "is transitioning from being on road to being off road",
            Stopped => "is stopped for traffic light or stop sign",
            // Not glossed in the source taxonomy.
            HardStopped => "is braking hard to a sudden stop",
            AgentNotVisible => "is not visible in the scene",
        }
    }
}

impl fmt::Display for ManeuverLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ManeuverLabel {
    type Err = Error;

    /// Case-insensitive; spaces and hyphens are read as underscores.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .map(|c| match c {
                ' ' | '-' => '_',
                c => c.to_ascii_uppercase(),
            })
            .collect();
        ManeuverLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == norm)
            .ok_or_else(|| Error::Config(format!("unknown maneuver label `{s}`")))
    }
}

impl Serialize for ManeuverLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ManeuverLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}
