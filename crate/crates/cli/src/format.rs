//! Instance files, CSV import and JSON rendering.

use std::collections::HashMap;
use std::path::Path;

use osm_core::model::Violation;
use osm_core::{
    format_rational, validate_problem, BigRational, Matching, PreferenceProfile, PriorityStructure,
    School, SchoolChoiceProblem, SchoolId, Student, StudentId,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub students: Vec<StudentEntry>,
    pub schools: Vec<SchoolEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentEntry {
    pub id: String,
    #[serde(default)]
    pub preferences: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchoolEntry {
    pub id: String,
    pub capacity: u32,
    #[serde(default)]
    pub priorities: Vec<Vec<String>>,
}

fn names<T: std::fmt::Display>(tiers: &[Vec<T>]) -> Vec<Vec<String>> {
    tiers
        .iter()
        .map(|t| t.iter().map(ToString::to_string).collect())
        .collect()
}

impl InstanceFile {
    pub fn from_problem(problem: &SchoolChoiceProblem) -> Self {
        InstanceFile {
            students: problem
                .students()
                .iter()
                .map(|s| StudentEntry {
                    id: s.id.to_string(),
                    preferences: names(s.preferences.tiers()),
                })
                .collect(),
            schools: problem
                .schools()
                .iter()
                .map(|s| SchoolEntry {
                    id: s.id.to_string(),
                    capacity: s.capacity,
                    priorities: names(s.priorities.tiers()),
                })
                .collect(),
        }
    }

    /// Unvalidated conversion.
    pub fn to_problem(&self) -> SchoolChoiceProblem {
        let students = self
            .students
            .iter()
            .map(|s| {
                let tiers = s
                    .preferences
                    .iter()
                    .map(|t| t.iter().map(|x| SchoolId::from(x.as_str())).collect())
                    .collect();
                Student::new(s.id.as_str(), PreferenceProfile::new(tiers))
            })
            .collect();
        let schools = self
            .schools
            .iter()
            .map(|s| {
                let tiers = s
                    .priorities
                    .iter()
                    .map(|t| t.iter().map(|x| StudentId::from(x.as_str())).collect())
                    .collect();
                School::new(s.id.as_str(), s.capacity)
                    .with_priorities(PriorityStructure::new(tiers))
            })
            .collect();
        SchoolChoiceProblem::from_parts(students, schools)
    }
}

/// Line (1-based) of the entry whose `"id"` is `anchor`, else of any quoted
/// occurrence, picking the last one so duplicates point at the repeat.
fn line_of(text: &str, anchor: &str) -> Option<usize> {
    let quoted = format!("\"{anchor}\"");
    let mut fallback = None;
    let mut found = None;
    for (k, line) in text.lines().enumerate() {
        if line.contains(&quoted) {
            fallback.get_or_insert(k + 1);
            if line.contains("\"id\"") {
                found = Some(k + 1);
            }
        }
    }
    found.or(fallback)
}

/// Where a violation shows up: the offending reference inside its entry when
/// there is one, else the entry, else the section key.
fn violation_line(text: &str, v: &Violation) -> usize {
    let inner = match v {
        Violation::RepeatedSchool { school, .. } | Violation::UnknownSchool { school, .. } => {
            Some(school.as_str())
        }
        Violation::RepeatedStudent { student, .. } | Violation::UnknownStudent { student, .. } => {
            Some(student.as_str())
        }
        _ => None,
    };
    let entry = v.anchor().and_then(|a| line_of(text, a));
    if let (Some(start), Some(inner)) = (entry, inner) {
        let quoted = format!("\"{inner}\"");
        let hits: Vec<usize> = text
            .lines()
            .enumerate()
            .skip(start)
            .take_while(|(_, l)| !l.contains("\"id\""))
            .filter(|(_, l)| l.contains(&quoted))
            .map(|(k, _)| k + 1)
            .collect();
        if let Some(line) = hits.last() {
            return *line;
        }
    }
    let section = match v {
        Violation::NoSchools | Violation::EmptySchoolId { .. } => "\"schools\"",
        _ => "\"students\"",
    };
    entry
        .or_else(|| {
            text.lines()
                .position(|l| l.contains(section))
                .map(|k| k + 1)
        })
        .unwrap_or(1)
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Parses and validates an instance document.
pub fn parse_instance(text: &str, source: &str) -> CliResult<SchoolChoiceProblem> {
    let file: InstanceFile = serde_json::from_str(text)
        .map_err(|e| CliError::input(format!("{source}:{}:{}: {e}", e.line(), e.column())))?;
    let problem = file.to_problem();
    validate_problem(&problem).map_err(|violations| {
        CliError::Input(
            violations
                .iter()
                .map(|v| {
                    let line = violation_line(text, v);
                    format!("{source}:{line}: {v}")
                })
                .collect(),
        )
    })?;
    Ok(problem)
}

pub fn load_instance(path: &Path) -> CliResult<SchoolChoiceProblem> {
    parse_instance(&read_text(path)?, &path.display().to_string())
}

pub fn render_instance(problem: &SchoolChoiceProblem) -> String {
    let mut text =
        serde_json::to_string_pretty(&InstanceFile::from_problem(problem)).expect("plain data");
    text.push('\n');
    text
}

/// `--capacity` value: a default (`3`) or one school (`s1=2`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CapacityArg {
    Default(u32),
    School(String, u32),
}

impl std::str::FromStr for CapacityArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let number = |v: &str| {
            v.trim()
                .parse::<u32>()
                .map_err(|_| format!("bad capacity `{v}`"))
        };
        match s.split_once('=') {
            Some((id, v)) => Ok(CapacityArg::School(id.trim().to_string(), number(v)?)),
            None => Ok(CapacityArg::Default(number(s)?)),
        }
    }
}

/// One row per student: `id, choice1, choice2, ...` after a header row.
/// Schools are every listed choice plus any named in `capacities`.
pub fn load_csv_instance(
    path: &Path,
    capacities: &[CapacityArg],
) -> CliResult<SchoolChoiceProblem> {
    let source = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("{source}: {e}")))?;
    let mut students = Vec::new();
    let mut lines: HashMap<String, usize> = HashMap::new();
    let mut school_order: Vec<String> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(1, |p| p.line());
            CliError::input(format!("{source}:{line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line()) as usize;
        let id = record.get(0).unwrap_or("");
        if id.is_empty() {
            return Err(CliError::input(format!(
                "{source}:{line}: empty student id"
            )));
        }
        let choices: Vec<&str> = record.iter().skip(1).filter(|c| !c.is_empty()).collect();
        for c in &choices {
            if !school_order.iter().any(|s| s == c) {
                school_order.push(c.to_string());
            }
        }
        lines
            .entry(id.to_string())
            .and_modify(|l| *l = line)
            .or_insert(line);
        students.push(Student::new(
            id,
            PreferenceProfile::strict(choices.iter().copied()),
        ));
    }

    let mut default = 1;
    let mut named: HashMap<&str, u32> = HashMap::new();
    for cap in capacities {
        match cap {
            CapacityArg::Default(c) => default = *c,
            CapacityArg::School(id, c) => {
                if !school_order.iter().any(|s| s == id) {
                    school_order.push(id.clone());
                }
                named.insert(id, *c);
            }
        }
    }
    let schools = school_order
        .iter()
        .map(|id| {
            School::new(
                id.as_str(),
                named.get(id.as_str()).copied().unwrap_or(default),
            )
        })
        .collect();
    let problem = SchoolChoiceProblem::from_parts(students, schools);
    validate_problem(&problem).map_err(|violations| {
        CliError::Input(
            violations
                .iter()
                .map(|v| match v.anchor().and_then(|a| lines.get(a)) {
                    Some(line) => format!("{source}:{line}: {v}"),
                    None => format!("{source}: {v}"),
                })
                .collect(),
        )
    })?;
    Ok(problem)
}

pub fn cost_value(value: &BigRational) -> Value {
    Value::String(format_rational(value))
}

/// Student id to school id (or null), in student order.
pub fn matching_value(problem: &SchoolChoiceProblem, matching: &Matching) -> Value {
    let mut map = Map::new();
    for (student, school) in matching.to_ids(problem) {
        let school = school.map_or(Value::Null, |s| Value::String(s.to_string()));
        map.insert(student.to_string(), school);
    }
    Value::Object(map)
}

pub fn ids_value<'a, T: std::fmt::Display + 'a>(ids: impl IntoIterator<Item = &'a T>) -> Value {
    Value::Array(
        ids.into_iter()
            .map(|id| Value::String(id.to_string()))
            .collect(),
    )
}

/// Reads a matching from a result document (its `matching` key) or from a
/// bare student-to-school object.
pub fn parse_matching(
    problem: &SchoolChoiceProblem,
    text: &str,
    source: &str,
) -> CliResult<Matching> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| CliError::input(format!("{source}:{}:{}: {e}", e.line(), e.column())))?;
    let map = match doc.get("matching") {
        Some(inner) => inner,
        None => &doc,
    };
    let Value::Object(map) = map else {
        return Err(CliError::input(format!(
            "{source}:1: expected an object of student ids"
        )));
    };
    let mut pairs = Vec::with_capacity(map.len());
    for (student, school) in map {
        let school = match school {
            Value::Null => None,
            Value::String(s) => Some(s.as_str()),
            other => {
                let line = line_of(text, student).unwrap_or(1);
                return Err(CliError::input(format!(
                    "{source}:{line}: student `{student}` maps to {other}, expected a school id or null"
                )));
            }
        };
        pairs.push((student.as_str(), school));
    }
    Matching::from_ids(problem, pairs).map_err(|e| {
        let anchor = match &e {
            osm_core::Error::UnknownStudent(id) => line_of(text, id.as_str()),
            osm_core::Error::UnknownSchool(id) => line_of(text, id.as_str()),
            _ => None,
        };
        CliError::input(format!("{source}:{}: {e}", anchor.unwrap_or(1)))
    })
}
