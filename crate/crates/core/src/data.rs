//! Data model and CSV ingestion.
//!
//! Inputs are three comma-separated files with fixed headers:
//! `institutions.csv`, `faculty.csv` and `publications.csv`. Everything built
//! here is immutable once constructed.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FIRST_COHORT_YEAR: i32 = 1970;
pub const LAST_COHORT_YEAR: i32 = 2011;

const INSTITUTION_HEADER: &[&str] = &["institution_id", "name", "region"];
const FACULTY_HEADER: &[&str] = &[
    "faculty_id",
    "phd_institution",
    "hire_institution",
    "hire_year",
    "gender",
    "postdoc",
];
const PUBLICATION_HEADER: &[&str] = &["faculty_id", "title", "year"];

/// The four U.S. Census regions plus Canada.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    Northeast,
    Midwest,
    South,
    West,
    Canada,
}

impl Region {
    pub const ALL: [Region; 5] = [
        Region::Northeast,
        Region::Midwest,
        Region::South,
        Region::West,
        Region::Canada,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Northeast => "Northeast",
            Region::Midwest => "Midwest",
            Region::South => "South",
            Region::West => "West",
            Region::Canada => "Canada",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Region::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidRegion(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Institution {
    pub id: String,
    pub name: String,
    pub region: Region,
}

/// `Unknown` is carried through but left out of gender-conditioned statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Female,
    Male,
    Unknown,
}

impl Gender {
    pub fn token(self) -> &'static str {
        match self {
            Gender::Female => "F",
            Gender::Male => "M",
            Gender::Unknown => "U",
        }
    }

    pub fn is_female(self) -> bool {
        self == Gender::Female
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "F" => Ok(Gender::Female),
            "M" => Ok(Gender::Male),
            "U" => Ok(Gender::Unknown),
            other => Err(Error::InvalidGender(other.to_string())),
        }
    }
}

/// One faculty member's first assistant-professor hire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacultyRecord {
    pub id: String,
    pub doctoral_institution: String,
    pub hiring_institution: String,
    pub hire_year: i32,
    pub gender: Gender,
    pub postdoc: bool,
    /// Publications through `hire_year + 1`.
    pub pub_count: u32,
    pub topic_mix: Option<Vec<f64>>,
    pub productivity_z: Option<f64>,
}

impl FacultyRecord {
    pub fn is_self_hire(&self) -> bool {
        self.doctoral_institution == self.hiring_institution
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Publication {
    pub faculty_id: String,
    pub title: String,
    pub year: i32,
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let found = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    let expected = header.join(",");
    if found != expected {
        return Err(Error::BadHeader {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    Ok(reader)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn parse_year(s: &str) -> Result<i32> {
    s.trim()
        .parse::<i32>()
        .map_err(|_| Error::InvalidYear(s.to_string()))
}

fn parse_flag(s: &str) -> Result<bool> {
    match s.trim() {
        "1" | "true" | "TRUE" | "True" | "yes" => Ok(true),
        "0" | "false" | "FALSE" | "False" | "no" | "" => Ok(false),
        other => Err(Error::InvalidField {
            column: "postdoc",
            value: other.to_string(),
        }),
    }
}

pub fn load_institutions(path: impl AsRef<Path>) -> Result<Vec<Institution>> {
    let path = path.as_ref();
    let mut reader = open_csv(path, INSTITUTION_HEADER)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let id = row[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateInstitution(id));
        }
        out.push(Institution {
            id,
            name: row[1].to_string(),
            region: row[2].parse()?,
        });
    }
    Ok(out)
}

/// Loads faculty rows; every referenced institution must be declared.
pub fn load_faculty(
    path: impl AsRef<Path>,
    institutions: &[Institution],
) -> Result<Vec<FacultyRecord>> {
    let path = path.as_ref();
    let known: HashSet<&str> = institutions.iter().map(|i| i.id.as_str()).collect();
    let mut reader = open_csv(path, FACULTY_HEADER)?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        for col in [1, 2] {
            if !known.contains(&row[col]) {
                return Err(Error::UnknownInstitution(row[col].to_string()));
            }
        }
        out.push(FacultyRecord {
            id: row[0].to_string(),
            doctoral_institution: row[1].to_string(),
            hiring_institution: row[2].to_string(),
            hire_year: parse_year(&row[3])?,
            gender: row[4].parse()?,
            postdoc: parse_flag(&row[5])?,
            pub_count: 0,
            topic_mix: None,
            productivity_z: None,
        });
    }
    Ok(out)
}

pub fn load_publications(path: impl AsRef<Path>) -> Result<Vec<Publication>> {
    let path = path.as_ref();
    let mut reader = open_csv(path, PUBLICATION_HEADER)?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        out.push(Publication {
            faculty_id: row[0].to_string(),
            title: row[1].to_string(),
            year: parse_year(&row[2])?,
        });
    }
    Ok(out)
}

pub fn write_institutions(path: impl AsRef<Path>, institutions: &[Institution]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    write_row(path, &mut w, INSTITUTION_HEADER)?;
    for inst in institutions {
        write_row(path, &mut w, &[&inst.id, &inst.name, inst.region.as_str()])?;
    }
    flush(path, w)
}

pub fn write_faculty(path: impl AsRef<Path>, records: &[FacultyRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    write_row(path, &mut w, FACULTY_HEADER)?;
    for r in records {
        write_row(
            path,
            &mut w,
            &[
                &r.id,
                &r.doctoral_institution,
                &r.hiring_institution,
                &r.hire_year.to_string(),
                r.gender.token(),
                if r.postdoc { "1" } else { "0" },
            ],
        )?;
    }
    flush(path, w)
}

pub fn write_publications(path: impl AsRef<Path>, pubs: &[Publication]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    write_row(path, &mut w, PUBLICATION_HEADER)?;
    for p in pubs {
        write_row(path, &mut w, &[&p.faculty_id, &p.title, &p.year.to_string()])?;
    }
    flush(path, w)
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

pub(crate) fn write_row<W: std::io::Write>(
    path: &Path,
    w: &mut csv::Writer<W>,
    fields: &[&str],
) -> Result<()> {
    w.write_record(fields).map_err(|e| csv_error(path, e))
}

pub(crate) fn flush(path: &Path, mut w: csv::Writer<std::fs::File>) -> Result<()> {
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Outcome of [`filter_cohort`].
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub kept: Vec<FacultyRecord>,
    pub dropped_out_of_window: usize,
    pub dropped_out_of_sample: usize,
}

impl Cohort {
    pub fn dropped(&self) -> usize {
        self.dropped_out_of_window + self.dropped_out_of_sample
    }

    pub fn female_fraction(&self) -> f64 {
        let labelled: Vec<_> = self
            .kept
            .iter()
            .filter(|r| r.gender != Gender::Unknown)
            .collect();
        if labelled.is_empty() {
            return 0.0;
        }
        labelled.iter().filter(|r| r.gender.is_female()).count() as f64 / labelled.len() as f64
    }
}

/// Keeps hires made between 1970 and 2011 (inclusive) where both institutions
/// are in the sample.
pub fn filter_cohort(records: &[FacultyRecord], institutions: &[Institution]) -> Cohort {
    let sample: HashSet<&str> = institutions.iter().map(|i| i.id.as_str()).collect();
    let mut cohort = Cohort {
        kept: Vec::with_capacity(records.len()),
        dropped_out_of_window: 0,
        dropped_out_of_sample: 0,
    };
    for r in records {
        if !sample.contains(r.doctoral_institution.as_str())
            || !sample.contains(r.hiring_institution.as_str())
        {
            cohort.dropped_out_of_sample += 1;
        } else if !(FIRST_COHORT_YEAR..=LAST_COHORT_YEAR).contains(&r.hire_year) {
            cohort.dropped_out_of_window += 1;
        } else {
            cohort.kept.push(r.clone());
        }
    }
    cohort
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub year: i32,
    pub faculty_id: String,
}

impl Edge {
    pub fn is_self_loop(&self) -> bool {
        self.source == self.target
    }
}

/// Directed multigraph of institutions; one edge per hire, doctoral → hiring.
#[derive(Debug, Clone)]
pub struct HiringNetwork {
    institutions: Vec<Institution>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
}

impl HiringNetwork {
    pub fn from_parts(institutions: Vec<Institution>, edges: Vec<Edge>) -> Self {
        let index = institutions
            .iter()
            .enumerate()
            .map(|(i, inst)| (inst.id.clone(), i))
            .collect();
        assert!(
            edges
                .iter()
                .all(|e| e.source < institutions.len() && e.target < institutions.len()),
            "edge endpoint out of range"
        );
        HiringNetwork {
            institutions,
            index,
            edges,
        }
    }

    /// Builds a network over anonymous nodes, all in one region. Convenient for
    /// fixtures and tests.
    pub fn from_index_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let institutions = (0..n)
            .map(|i| Institution {
                id: format!("n{i}"),
                name: format!("node {i}"),
                region: Region::Northeast,
            })
            .collect();
        let edges = edges
            .iter()
            .enumerate()
            .map(|(k, &(s, t))| Edge {
                source: s,
                target: t,
                year: FIRST_COHORT_YEAR,
                faculty_id: format!("e{k}"),
            })
            .collect();
        Self::from_parts(institutions, edges)
    }

    pub fn node_count(&self) -> usize {
        self.institutions.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn institutions(&self) -> &[Institution] {
        &self.institutions
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn institution(&self, idx: usize) -> &Institution {
        &self.institutions[idx]
    }

    /// Number of `(u, v)` edges, self-loops excluded, counted with multiplicity.
    pub fn non_loop_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| !e.is_self_loop()).count()
    }

    /// Dense edge-multiplicity matrix, row = source.
    pub fn adjacency_counts(&self) -> Vec<Vec<u32>> {
        let n = self.node_count();
        let mut m = vec![vec![0u32; n]; n];
        for e in &self.edges {
            m[e.source][e.target] += 1;
        }
        m
    }

    /// Returns a copy with the same nodes and a new edge list.
    pub fn with_edges(&self, edges: Vec<Edge>) -> Self {
        Self::from_parts(self.institutions.clone(), edges)
    }
}

/// One directed edge per record; multiplicities preserved.
///
/// Panics if a record names an institution outside `institutions`; run
/// [`filter_cohort`] first.
pub fn build_network(institutions: &[Institution], records: &[FacultyRecord]) -> HiringNetwork {
    let index: HashMap<&str, usize> = institutions
        .iter()
        .enumerate()
        .map(|(i, inst)| (inst.id.as_str(), i))
        .collect();
    let edges = records
        .iter()
        .map(|r| Edge {
            source: index[r.doctoral_institution.as_str()],
            target: index[r.hiring_institution.as_str()],
            year: r.hire_year,
            faculty_id: r.id.clone(),
        })
        .collect();
    HiringNetwork::from_parts(institutions.to_vec(), edges)
}

/// The candidate and opening stubs of one hiring year.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketYear {
    pub year: i32,
    /// Faculty ids.
    pub candidates: Vec<String>,
    /// Hiring institution ids, with multiplicity. Unordered within a year.
    pub openings: Vec<String>,
    /// Observed opening of each candidate, aligned with `candidates`.
    pub observed: Vec<String>,
}

/// Splits the hires of each year into candidate and opening stubs.
pub fn year_slices(network: &HiringNetwork) -> Vec<MarketYear> {
    let mut by_year: BTreeMap<i32, Vec<&Edge>> = BTreeMap::new();
    for e in network.edges() {
        by_year.entry(e.year).or_default().push(e);
    }
    by_year
        .into_iter()
        .map(|(year, edges)| {
            let candidates = edges.iter().map(|e| e.faculty_id.clone()).collect();
            let observed: Vec<String> = edges
                .iter()
                .map(|e| network.institution(e.target).id.clone())
                .collect();
            let mut openings = observed.clone();
            openings.sort();
            MarketYear {
                year,
                candidates,
                openings,
                observed,
            }
        })
        .collect()
}
