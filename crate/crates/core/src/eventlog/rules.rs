use std::fmt;

use chrono::Duration;
use serde::{Deserialize, Serialize};

use super::{Label, LabeledLog, Trace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    ContainsActivity,
    NotContainsActivity,
    EndActivityIs,
    EndActivityIsNot,
    DurationLessThan,
    DurationAtLeast,
}

impl RuleKind {
    pub fn is_duration(self) -> bool {
        matches!(self, RuleKind::DurationLessThan | RuleKind::DurationAtLeast)
    }
}

/// Config form of a rule: `{kind, activity?, days?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub kind: RuleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub days: Option<f64>,
}

/// Predicate deciding the positive class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelRule {
    ContainsActivity(String),
    NotContainsActivity(String),
    EndActivityIs(String),
    EndActivityIsNot(String),
    DurationLessThan(Duration),
    DurationAtLeast(Duration),
}

impl LabelRule {
    pub fn kind(&self) -> RuleKind {
        match self {
            LabelRule::ContainsActivity(_) => RuleKind::ContainsActivity,
            LabelRule::NotContainsActivity(_) => RuleKind::NotContainsActivity,
            LabelRule::EndActivityIs(_) => RuleKind::EndActivityIs,
            LabelRule::EndActivityIsNot(_) => RuleKind::EndActivityIsNot,
            LabelRule::DurationLessThan(_) => RuleKind::DurationLessThan,
            LabelRule::DurationAtLeast(_) => RuleKind::DurationAtLeast,
        }
    }

    pub fn duration_less_than_days(days: i64) -> Self {
        LabelRule::DurationLessThan(Duration::days(days))
    }

    pub fn from_spec(spec: &RuleSpec) -> Result<Self> {
        let activity = || {
            if spec.days.is_some() {
                return Err(Error::Config(format!("{:?} takes no 'days'", spec.kind)));
            }
            match &spec.activity {
                Some(a) if !a.is_empty() => Ok(a.clone()),
                _ => Err(Error::Config(format!("{:?} requires 'activity'", spec.kind))),
            }
        };
        let threshold = || {
            if spec.activity.is_some() {
                return Err(Error::Config(format!("{:?} takes no 'activity'", spec.kind)));
            }
            match spec.days {
                Some(d) if d.is_finite() && d >= 0.0 => {
                    Ok(Duration::milliseconds((d * 86_400_000.0).round() as i64))
                }
                _ => Err(Error::Config(format!(
                    "{:?} requires a non-negative 'days'",
                    spec.kind
                ))),
            }
        };
        Ok(match spec.kind {
            RuleKind::ContainsActivity => LabelRule::ContainsActivity(activity()?),
            RuleKind::NotContainsActivity => LabelRule::NotContainsActivity(activity()?),
            RuleKind::EndActivityIs => LabelRule::EndActivityIs(activity()?),
            RuleKind::EndActivityIsNot => LabelRule::EndActivityIsNot(activity()?),
            RuleKind::DurationLessThan => LabelRule::DurationLessThan(threshold()?),
            RuleKind::DurationAtLeast => LabelRule::DurationAtLeast(threshold()?),
        })
    }

    pub fn to_spec(&self) -> RuleSpec {
        let (activity, days) = match self {
            LabelRule::ContainsActivity(a)
            | LabelRule::NotContainsActivity(a)
            | LabelRule::EndActivityIs(a)
            | LabelRule::EndActivityIsNot(a) => (Some(a.clone()), None),
            LabelRule::DurationLessThan(d) | LabelRule::DurationAtLeast(d) => {
                (None, Some(d.num_milliseconds() as f64 / 86_400_000.0))
            }
        };
        RuleSpec {
            kind: self.kind(),
            activity,
            days,
        }
    }

    /// Evaluate the predicate; duration rules fail on traces without a time span.
    pub fn holds(&self, trace: &Trace) -> Result<bool> {
        Ok(match self {
            LabelRule::ContainsActivity(a) => trace.contains(a),
            LabelRule::NotContainsActivity(a) => !trace.contains(a),
            LabelRule::EndActivityIs(a) => trace.last_activity() == Some(a.as_str()),
            LabelRule::EndActivityIsNot(a) => trace.last_activity() != Some(a.as_str()),
            LabelRule::DurationLessThan(th) => duration(trace)? < *th,
            LabelRule::DurationAtLeast(th) => duration(trace)? >= *th,
        })
    }
}

impl fmt::Display for LabelRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelRule::ContainsActivity(a) => write!(f, "with activity '{a}'"),
            LabelRule::NotContainsActivity(a) => write!(f, "without activity '{a}'"),
            LabelRule::EndActivityIs(a) => write!(f, "end activity '{a}'"),
            LabelRule::EndActivityIsNot(a) => write!(f, "end activity not '{a}'"),
            LabelRule::DurationLessThan(d) => write!(f, "duration less than {} days", d.num_days()),
            LabelRule::DurationAtLeast(d) => write!(f, "duration at least {} days", d.num_days()),
        }
    }
}

fn duration(trace: &Trace) -> Result<Duration> {
    match (trace.start, trace.end) {
        (Some(s), Some(e)) => Ok(e - s),
        _ => Err(Error::Precondition(format!(
            "duration rule needs timestamps but case '{}' has none",
            trace.case_id
        ))),
    }
}

/// Label every trace: positive iff the rule holds.
pub fn apply_rule(name: impl Into<String>, traces: Vec<Trace>, rule: &LabelRule) -> Result<LabeledLog> {
    let mut log = LabeledLog::new(name);
    for t in traces {
        let label = Label::from_bool(rule.holds(&t)?);
        log.push(t, label);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    #[test]
    fn contains_activity() {
        let rule = LabelRule::ContainsActivity("Discharge alive".into());
        let t = Trace::new("p1", ["Register", "ICU", "Discharge alive"]);
        assert!(rule.holds(&t).unwrap());
        let t = Trace::new("p2", ["Register", "Discharge dead"]);
        assert!(!rule.holds(&t).unwrap());
    }

    #[test]
    fn end_activity_uses_last_element() {
        let rule = LabelRule::EndActivityIs("Payment".into());
        assert!(rule.holds(&Trace::new("a", ["A", "B", "Payment"])).unwrap());
        assert!(!rule.holds(&Trace::new("b", ["A", "Payment", "B"])).unwrap());
        let not = LabelRule::EndActivityIsNot("Payment".into());
        assert!(not.holds(&Trace::new("b", ["A", "Payment", "B"])).unwrap());
    }

    #[test]
    fn hundred_day_trace_fails_ninety_day_threshold() {
        let start = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
        let end = start + Duration::days(100);
        let t = Trace::new("x", ["A", "B"]).with_span(start, end);
        assert!(!LabelRule::duration_less_than_days(90).holds(&t).unwrap());
        assert!(LabelRule::DurationAtLeast(Duration::days(90)).holds(&t).unwrap());
        let short = Trace::new("y", ["A"]).with_span(start, start + Duration::days(89));
        assert!(LabelRule::duration_less_than_days(90).holds(&short).unwrap());
    }

    #[test]
    fn duration_rule_names_case_without_timestamps() {
        let err = apply_rule(
            "l",
            vec![Trace::new("no-time", ["A"])],
            &LabelRule::duration_less_than_days(90),
        )
        .unwrap_err();
        assert!(err.to_string().contains("no-time"), "{err}");
    }

    #[test]
    fn apply_rule_is_exhaustive() {
        let traces = vec![
            Trace::new("1", ["A", "X"]),
            Trace::new("2", ["A"]),
            Trace::new("3", ["X"]),
        ];
        let log = apply_rule("l", traces, &LabelRule::ContainsActivity("X".into())).unwrap();
        assert_eq!(log.class_count(Label::Positive), 2);
        assert_eq!(log.class_count(Label::Negative), 1);
    }

    #[test]
    fn spec_round_trip_and_validation() {
        let spec: RuleSpec = serde_json::from_str(r#"{"kind":"duration_less_than","days":270}"#).unwrap();
        let rule = LabelRule::from_spec(&spec).unwrap();
        assert_eq!(rule, LabelRule::duration_less_than_days(270));
        assert_eq!(LabelRule::from_spec(&rule.to_spec()).unwrap(), rule);

        let bad: RuleSpec = serde_json::from_str(r#"{"kind":"end_activity_is"}"#).unwrap();
        assert!(LabelRule::from_spec(&bad).is_err());
        let bad: RuleSpec =
            serde_json::from_str(r#"{"kind":"duration_at_least","days":3,"activity":"A"}"#).unwrap();
        assert!(LabelRule::from_spec(&bad).is_err());
    }
}
