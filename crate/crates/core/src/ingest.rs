//! Loading and validation of the external CSV inputs.
//!
//! Every loader returns domain objects indexed by one shared district
//! ordering (lexicographic by id), so all downstream matrices and tensors
//! live in a single index space regardless of input row order.
//!
//! File formats (UTF-8, comma separated, one header line, `.` decimals):
//!
//! - `districts.csv`: `district_id,population`
//! - `commuters.csv`: `origin_id,dest_id,vehicles`
//! - `travel.csv`: `origin_id,dest_id,minutes`
//! - `supply.csv`: `period,district_id,doses` (1-based period)

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::grid::Grid;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: empty file (no data rows)")]
    EmptyFile { path: String },
    #[error("{path} line {line}: expected header {expected:?}")]
    BadHeader {
        path: String,
        line: u64,
        expected: &'static str,
    },
    #[error("{path} line {line}: malformed row: {reason}")]
    MalformedRow {
        path: String,
        line: u64,
        reason: String,
    },
    #[error("{path} line {line}: duplicate district id {id:?}")]
    DuplicateDistrict { path: String, line: u64, id: String },
    #[error("{path} line {line}: duplicate entry for pair {origin:?} -> {dest:?}")]
    DuplicatePair {
        path: String,
        line: u64,
        origin: String,
        dest: String,
    },
    #[error("{path} line {line}: unknown district id {id:?}")]
    UnknownDistrict { path: String, line: u64, id: String },
    #[error("{path} line {line}: negative count {value}")]
    NegativeCount { path: String, line: u64, value: f64 },
    #[error("district {id:?}: commuters {commuters} exceed population {population}")]
    CommutersExceedPopulation {
        id: String,
        commuters: u64,
        population: u64,
    },
    #[error("{path} line {line}: negative travel time {value}")]
    NegativeTime { path: String, line: u64, value: f64 },
    #[error("{path} line {line}: nonzero diagonal entry {id:?} -> {id:?} must be 0")]
    NonzeroDiagonal { path: String, line: u64, id: String },
    #[error("{path}: missing travel time for pair {origin:?} -> {dest:?}")]
    MissingPair {
        path: String,
        origin: String,
        dest: String,
    },
    #[error("{path} line {line}: period {period} out of range 1..={horizon}")]
    PeriodOutOfRange {
        path: String,
        line: u64,
        period: i64,
        horizon: usize,
    },
    #[error("{path} line {line}: negative dose count {value}")]
    NegativeDoses { path: String, line: u64, value: i64 },
    #[error("equity horizon {equity} exceeds horizon {horizon}")]
    EquityHorizonTooLong { equity: usize, horizon: usize },
    #[error("occupancy scale must be positive, got {0}")]
    BadOccupancyScale(f64),
}

/// The set of health districts, lexicographically ordered by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistrictTable {
    ids: Vec<String>,
    populations: Vec<u64>,
    index: BTreeMap<String, usize>,
}

impl DistrictTable {
    /// Build a table from `(id, population)` pairs; ids are sorted and must
    /// be unique and non-empty.
    pub fn new(mut entries: Vec<(String, u64)>) -> Result<Self, IngestError> {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut ids = Vec::with_capacity(entries.len());
        let mut populations = Vec::with_capacity(entries.len());
        let mut index = BTreeMap::new();
        for (id, pop) in entries {
            if index.insert(id.clone(), ids.len()).is_some() {
                return Err(IngestError::DuplicateDistrict {
                    path: String::new(),
                    line: 0,
                    id,
                });
            }
            ids.push(id);
            populations.push(pop);
        }
        Ok(Self {
            ids,
            populations,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, district: usize) -> &str {
        &self.ids[district]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn population(&self, district: usize) -> u64 {
        self.populations[district]
    }

    pub fn populations(&self) -> &[u64] {
        &self.populations
    }

    pub fn total_population(&self) -> u64 {
        self.populations.iter().sum()
    }
}

/// Commuter counts: `e[u][v]` people live in `u` and work in `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommuterMatrix {
    e: Grid<u64>,
}

impl CommuterMatrix {
    /// Wrap a count grid, validating that out-flows fit inside populations.
    pub fn new(e: Grid<u64>, table: &DistrictTable) -> Result<Self, IngestError> {
        assert_eq!(e.rows(), table.len());
        assert_eq!(e.cols(), table.len());
        for u in 0..table.len() {
            let out: u64 = e.row(u).iter().sum();
            if out > table.population(u) {
                return Err(IngestError::CommutersExceedPopulation {
                    id: table.id(u).to_owned(),
                    commuters: out,
                    population: table.population(u),
                });
            }
        }
        Ok(Self { e })
    }

    /// All-zero matrix (every person a non-commuter).
    pub fn zero(n: usize) -> Self {
        Self {
            e: Grid::filled(n, n, 0),
        }
    }

    pub fn n(&self) -> usize {
        self.e.rows()
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> u64 {
        self.e.at(u, v)
    }

    /// Commuters living in `u` (row sum).
    pub fn out_flow(&self, u: usize) -> u64 {
        self.e.row(u).iter().sum()
    }

    /// Non-commuters of `u`: population minus out-flow (never negative by
    /// construction).
    pub fn non_commuters(&self, u: usize, table: &DistrictTable) -> u64 {
        table.population(u) - self.out_flow(u)
    }

    pub fn total_flow(&self) -> u64 {
        self.e.raw().iter().sum()
    }

    pub fn grid(&self) -> &Grid<u64> {
        &self.e
    }
}

/// One-way travel inconvenience in minutes; zero diagonal, no symmetry or
/// triangle-inequality assumption.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelMatrix<T = f64> {
    c: Grid<T>,
}

impl<T: Scalar> TravelMatrix<T> {
    pub fn new(c: Grid<T>) -> Result<Self, IngestError> {
        assert_eq!(c.rows(), c.cols());
        for u in 0..c.rows() {
            if c.at(u, u) != T::zero() {
                return Err(IngestError::NonzeroDiagonal {
                    path: String::new(),
                    line: 0,
                    id: format!("#{u}"),
                });
            }
            for v in 0..c.cols() {
                if c.at(u, v) < T::zero() {
                    return Err(IngestError::NegativeTime {
                        path: String::new(),
                        line: 0,
                        value: c.at(u, v).to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }
        Ok(Self { c })
    }

    pub fn n(&self) -> usize {
        self.c.rows()
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> T {
        self.c.at(u, v)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.c
    }
}

/// Doses available per decision period and district, plus the equity horizon
/// (the leading periods over which distribution smoothness is scored).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupplySchedule {
    doses: Grid<u64>,
    equity_horizon: usize,
}

impl SupplySchedule {
    pub fn new(doses: Grid<u64>, equity_horizon: usize) -> Result<Self, IngestError> {
        if equity_horizon > doses.rows() {
            return Err(IngestError::EquityHorizonTooLong {
                equity: equity_horizon,
                horizon: doses.rows(),
            });
        }
        Ok(Self {
            doses,
            equity_horizon,
        })
    }

    /// Uniform capacity at every district and period.
    pub fn uniform(
        n: usize,
        horizon: usize,
        equity_horizon: usize,
        doses: u64,
    ) -> Result<Self, IngestError> {
        Self::new(Grid::filled(horizon, n, doses), equity_horizon)
    }

    pub fn horizon(&self) -> usize {
        self.doses.rows()
    }

    pub fn equity_horizon(&self) -> usize {
        self.equity_horizon
    }

    pub fn n(&self) -> usize {
        self.doses.cols()
    }

    #[inline]
    pub fn at(&self, period: usize, district: usize) -> u64 {
        self.doses.at(period, district)
    }

    pub fn total(&self) -> u64 {
        self.doses.raw().iter().sum()
    }

    /// Total capacity of one district column across all periods.
    pub fn district_total(&self, district: usize) -> u64 {
        (0..self.horizon()).map(|t| self.at(t, district)).sum()
    }

    pub fn grid(&self) -> &Grid<u64> {
        &self.doses
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn check_header(
    reader: &mut csv::Reader<std::fs::File>,
    path: &Path,
    expected: &'static [&'static str],
    expected_text: &'static str,
) -> Result<(), IngestError> {
    let headers = reader.headers().map_err(|e| IngestError::MalformedRow {
        path: path.display().to_string(),
        line: 1,
        reason: e.to_string(),
    })?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(IngestError::BadHeader {
            path: path.display().to_string(),
            line: 1,
            expected: expected_text,
        });
    }
    Ok(())
}

struct Row {
    line: u64,
    fields: csv::StringRecord,
}

fn read_rows(
    reader: &mut csv::Reader<std::fs::File>,
    path: &Path,
    width: usize,
) -> Result<Vec<Row>, IngestError> {
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::MalformedRow {
            path: path.display().to_string(),
            line: 0,
            reason: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            return Err(IngestError::MalformedRow {
                path: path.display().to_string(),
                line,
                reason: format!("expected {width} fields, got {}", record.len()),
            });
        }
        rows.push(Row {
            line,
            fields: record,
        });
    }
    Ok(rows)
}

fn parse_u64(path: &Path, line: u64, field: &str, what: &str) -> Result<u64, IngestError> {
    field.parse::<u64>().map_err(|_| IngestError::MalformedRow {
        path: path.display().to_string(),
        line,
        reason: format!("non-numeric {what} {field:?}"),
    })
}

fn parse_f64(path: &Path, line: u64, field: &str, what: &str) -> Result<f64, IngestError> {
    let value = field.parse::<f64>().map_err(|_| IngestError::MalformedRow {
        path: path.display().to_string(),
        line,
        reason: format!("non-numeric {what} {field:?}"),
    })?;
    if !value.is_finite() {
        return Err(IngestError::MalformedRow {
            path: path.display().to_string(),
            line,
            reason: format!("non-finite {what} {field:?}"),
        });
    }
    Ok(value)
}

fn lookup(table: &DistrictTable, path: &Path, line: u64, id: &str) -> Result<usize, IngestError> {
    table
        .index_of(id)
        .ok_or_else(|| IngestError::UnknownDistrict {
            path: path.display().to_string(),
            line,
            id: id.to_owned(),
        })
}

/// Load `districts.csv` into a lexicographically ordered table.
pub fn load_districts(path: &Path) -> Result<DistrictTable, IngestError> {
    let mut reader = open_reader(path)?;
    check_header(
        &mut reader,
        path,
        &["district_id", "population"],
        "district_id,population",
    )?;
    let rows = read_rows(&mut reader, path, 2)?;
    if rows.is_empty() {
        return Err(IngestError::EmptyFile {
            path: path.display().to_string(),
        });
    }
    let mut seen: BTreeMap<String, u64> = BTreeMap::new();
    let mut entries = Vec::with_capacity(rows.len());
    for row in &rows {
        let id = row.fields[0].to_owned();
        if id.is_empty() {
            return Err(IngestError::MalformedRow {
                path: path.display().to_string(),
                line: row.line,
                reason: "empty district id".into(),
            });
        }
        if seen.insert(id.clone(), row.line).is_some() {
            return Err(IngestError::DuplicateDistrict {
                path: path.display().to_string(),
                line: row.line,
                id,
            });
        }
        let population = parse_u64(path, row.line, &row.fields[1], "population")?;
        entries.push((id, population));
    }
    DistrictTable::new(entries)
}

/// Load `commuters.csv`, scaling vehicle counts by `occupancy_scale` and
/// rounding to the nearest person (ties away from zero). Missing pairs are
/// zero.
pub fn load_commuters(
    path: &Path,
    table: &DistrictTable,
    occupancy_scale: f64,
) -> Result<CommuterMatrix, IngestError> {
    if !(occupancy_scale > 0.0) {
        return Err(IngestError::BadOccupancyScale(occupancy_scale));
    }
    let mut reader = open_reader(path)?;
    check_header(
        &mut reader,
        path,
        &["origin_id", "dest_id", "vehicles"],
        "origin_id,dest_id,vehicles",
    )?;
    let rows = read_rows(&mut reader, path, 3)?;
    let n = table.len();
    let mut e = Grid::filled(n, n, 0u64);
    let mut seen = Grid::filled(n, n, false);
    for row in &rows {
        let u = lookup(table, path, row.line, &row.fields[0])?;
        let v = lookup(table, path, row.line, &row.fields[1])?;
        if seen.at(u, v) {
            return Err(IngestError::DuplicatePair {
                path: path.display().to_string(),
                line: row.line,
                origin: row.fields[0].to_owned(),
                dest: row.fields[1].to_owned(),
            });
        }
        seen.set(u, v, true);
        let vehicles = parse_f64(path, row.line, &row.fields[2], "vehicle count")?;
        if vehicles < 0.0 {
            return Err(IngestError::NegativeCount {
                path: path.display().to_string(),
                line: row.line,
                value: vehicles,
            });
        }
        e.set(u, v, (vehicles * occupancy_scale).round() as u64);
    }
    CommuterMatrix::new(e, table)
}

/// Load `travel.csv` into a complete matrix; every off-diagonal pair must be
/// present and diagonal entries, if listed, must be zero.
pub fn load_travel_matrix<T: Scalar>(
    path: &Path,
    table: &DistrictTable,
) -> Result<TravelMatrix<T>, IngestError> {
    let mut reader = open_reader(path)?;
    check_header(
        &mut reader,
        path,
        &["origin_id", "dest_id", "minutes"],
        "origin_id,dest_id,minutes",
    )?;
    let rows = read_rows(&mut reader, path, 3)?;
    let n = table.len();
    let mut c = Grid::filled(n, n, T::zero());
    let mut seen = Grid::filled(n, n, false);
    for row in &rows {
        let u = lookup(table, path, row.line, &row.fields[0])?;
        let v = lookup(table, path, row.line, &row.fields[1])?;
        if seen.at(u, v) {
            return Err(IngestError::DuplicatePair {
                path: path.display().to_string(),
                line: row.line,
                origin: row.fields[0].to_owned(),
                dest: row.fields[1].to_owned(),
            });
        }
        seen.set(u, v, true);
        let minutes = parse_f64(path, row.line, &row.fields[2], "minutes")?;
        if minutes < 0.0 {
            return Err(IngestError::NegativeTime {
                path: path.display().to_string(),
                line: row.line,
                value: minutes,
            });
        }
        if u == v && minutes != 0.0 {
            return Err(IngestError::NonzeroDiagonal {
                path: path.display().to_string(),
                line: row.line,
                id: row.fields[0].to_owned(),
            });
        }
        c.set(u, v, T::from_f64_c(minutes));
    }
    for u in 0..n {
        for v in 0..n {
            if u != v && !seen.at(u, v) {
                return Err(IngestError::MissingPair {
                    path: path.display().to_string(),
                    origin: table.id(u).to_owned(),
                    dest: table.id(v).to_owned(),
                });
            }
        }
    }
    TravelMatrix::new(c)
}

/// Load `supply.csv` on top of a uniform base capacity; rows override cells.
pub fn load_supply(
    path: &Path,
    table: &DistrictTable,
    horizon: usize,
    equity_horizon: usize,
    base: u64,
) -> Result<SupplySchedule, IngestError> {
    let mut reader = open_reader(path)?;
    check_header(
        &mut reader,
        path,
        &["period", "district_id", "doses"],
        "period,district_id,doses",
    )?;
    let rows = read_rows(&mut reader, path, 3)?;
    let n = table.len();
    let mut doses = Grid::filled(horizon, n, base);
    let mut seen = Grid::filled(horizon, n, false);
    for row in &rows {
        let period = row.fields[0]
            .parse::<i64>()
            .map_err(|_| IngestError::MalformedRow {
                path: path.display().to_string(),
                line: row.line,
                reason: format!("non-numeric period {:?}", &row.fields[0]),
            })?;
        if period < 1 || period as usize > horizon {
            return Err(IngestError::PeriodOutOfRange {
                path: path.display().to_string(),
                line: row.line,
                period,
                horizon,
            });
        }
        let t = (period - 1) as usize;
        let w = lookup(table, path, row.line, &row.fields[1])?;
        if seen.at(t, w) {
            return Err(IngestError::DuplicatePair {
                path: path.display().to_string(),
                line: row.line,
                origin: row.fields[0].to_owned(),
                dest: row.fields[1].to_owned(),
            });
        }
        seen.set(t, w, true);
        let amount = row.fields[2]
            .parse::<i64>()
            .map_err(|_| IngestError::MalformedRow {
                path: path.display().to_string(),
                line: row.line,
                reason: format!("non-numeric dose count {:?}", &row.fields[2]),
            })?;
        if amount < 0 {
            return Err(IngestError::NegativeDoses {
                path: path.display().to_string(),
                line: row.line,
                value: amount,
            });
        }
        doses.set(t, w, amount as u64);
    }
    SupplySchedule::new(doses, equity_horizon)
}

/// Load a square per-pair matrix such as `kappa.csv` or `beta.csv`
/// (`origin_id,dest_id,value`); missing pairs default to `default`.
pub fn load_pair_matrix<T: Scalar>(
    path: &Path,
    table: &DistrictTable,
    default: T,
) -> Result<Grid<T>, IngestError> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| IngestError::MalformedRow {
        path: path.display().to_string(),
        line: 1,
        reason: e.to_string(),
    })?;
    if headers.len() != 3 || &headers[0] != "origin_id" || &headers[1] != "dest_id" {
        return Err(IngestError::BadHeader {
            path: path.display().to_string(),
            line: 1,
            expected: "origin_id,dest_id,<value>",
        });
    }
    let rows = read_rows(&mut reader, path, 3)?;
    let n = table.len();
    let mut grid = Grid::filled(n, n, default);
    let mut seen = Grid::filled(n, n, false);
    for row in &rows {
        let u = lookup(table, path, row.line, &row.fields[0])?;
        let v = lookup(table, path, row.line, &row.fields[1])?;
        if seen.at(u, v) {
            return Err(IngestError::DuplicatePair {
                path: path.display().to_string(),
                line: row.line,
                origin: row.fields[0].to_owned(),
                dest: row.fields[1].to_owned(),
            });
        }
        seen.set(u, v, true);
        let value = parse_f64(path, row.line, &row.fields[2], "value")?;
        grid.set(u, v, T::from_f64_c(value));
    }
    Ok(grid)
}

/// Load a per-district column such as `prevalence.csv`
/// (`district_id,<value>`).
pub fn load_district_column<T: Scalar>(
    path: &Path,
    table: &DistrictTable,
) -> Result<Vec<T>, IngestError> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| IngestError::MalformedRow {
        path: path.display().to_string(),
        line: 1,
        reason: e.to_string(),
    })?;
    if headers.len() != 2 || &headers[0] != "district_id" {
        return Err(IngestError::BadHeader {
            path: path.display().to_string(),
            line: 1,
            expected: "district_id,<value>",
        });
    }
    let rows = read_rows(&mut reader, path, 2)?;
    let mut values = vec![None; table.len()];
    for row in &rows {
        let u = lookup(table, path, row.line, &row.fields[0])?;
        if values[u].is_some() {
            return Err(IngestError::DuplicateDistrict {
                path: path.display().to_string(),
                line: row.line,
                id: row.fields[0].to_owned(),
            });
        }
        values[u] = Some(T::from_f64_c(parse_f64(
            path,
            row.line,
            &row.fields[1],
            "value",
        )?));
    }
    values
        .into_iter()
        .enumerate()
        .map(|(u, v)| {
            v.ok_or_else(|| IngestError::MissingPair {
                path: path.display().to_string(),
                origin: table.id(u).to_owned(),
                dest: String::new(),
            })
        })
        .collect()
}
