//! Regularly spaced univariate series, search-intensity panels, and the
//! ingestion / aggregation / correlation utilities that operate on them.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling frequency of a [`TimeIndex`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Monthly,
    Weekly,
    Annual,
}

impl Frequency {
    /// Header used for the period column when emitting CSV.
    pub fn column_name(self) -> &'static str {
        match self {
            Frequency::Monthly => "Month",
            Frequency::Weekly => "Week",
            Frequency::Annual => "Year",
        }
    }
}

/// A calendar period. Weeks follow ISO-8601 numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Period {
    Month { year: i32, month: u32 },
    Week { year: i32, week: u32 },
    Year(i32),
}

impl Period {
    pub fn month(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Argument(format!("month {month} outside 1..=12")));
        }
        Ok(Period::Month { year, month })
    }

    pub fn week(year: i32, week: u32) -> Result<Self> {
        if week == 0 || NaiveDate::from_isoywd_opt(year, week, chrono::Weekday::Mon).is_none() {
            return Err(Error::Argument(format!(
                "week {week} invalid for year {year}"
            )));
        }
        Ok(Period::Week { year, week })
    }

    pub fn year(year: i32) -> Self {
        Period::Year(year)
    }

    pub fn frequency(&self) -> Frequency {
        match self {
            Period::Month { .. } => Frequency::Monthly,
            Period::Week { .. } => Frequency::Weekly,
            Period::Year(_) => Frequency::Annual,
        }
    }

    /// Calendar year the period belongs to (ISO year for weeks).
    pub fn calendar_year(&self) -> i32 {
        match *self {
            Period::Month { year, .. } | Period::Week { year, .. } | Period::Year(year) => year,
        }
    }

    /// Integer position on a frequency-specific axis; consecutive periods
    /// differ by exactly one.
    pub fn ordinal(&self) -> i64 {
        match *self {
            Period::Month { year, month } => i64::from(year) * 12 + i64::from(month) - 1,
            Period::Year(year) => i64::from(year),
            Period::Week { year, week } => {
                let monday = NaiveDate::from_isoywd_opt(year, week, chrono::Weekday::Mon)
                    .expect("validated week");
                i64::from(monday.num_days_from_ce()).div_euclid(7)
            }
        }
    }

    fn from_ordinal(frequency: Frequency, ordinal: i64) -> Period {
        match frequency {
            Frequency::Monthly => Period::Month {
                year: ordinal.div_euclid(12) as i32,
                month: ordinal.rem_euclid(12) as u32 + 1,
            },
            Frequency::Annual => Period::Year(ordinal as i32),
            Frequency::Weekly => {
                let date = NaiveDate::from_num_days_from_ce_opt((ordinal * 7 + 1) as i32)
                    .expect("ordinal within calendar range");
                let iso = date.iso_week();
                Period::Week {
                    year: iso.year(),
                    week: iso.week(),
                }
            }
        }
    }

    /// The period `steps` positions later (or earlier, when negative).
    pub fn offset(&self, steps: i64) -> Period {
        Period::from_ordinal(self.frequency(), self.ordinal() + steps)
    }

    pub fn next(&self) -> Period {
        self.offset(1)
    }

    /// Month that contains this period's first day; `None` for annual periods.
    fn containing_month(&self) -> Option<Period> {
        match *self {
            Period::Month { .. } => Some(*self),
            Period::Week { year, week } => {
                let monday = NaiveDate::from_isoywd_opt(year, week, chrono::Weekday::Mon)?;
                Some(Period::Month {
                    year: monday.year(),
                    month: monday.month(),
                })
            }
            Period::Year(_) => None,
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Month { year, month } => write!(f, "{year:04}-{month:02}"),
            Period::Week { year, week } => write!(f, "{year:04}-W{week:02}"),
            Period::Year(year) => write!(f, "{year:04}"),
        }
    }
}

/// What a period cell of an input table can hold.
#[derive(Debug, Clone, Copy, PartialEq)]
enum PeriodCell {
    Period(Period),
    /// A full date, as in weekly exports (the first day of the week).
    Date(NaiveDate),
}

impl PeriodCell {
    fn parse(s: &str) -> Option<PeriodCell> {
        let s = s.trim();
        let bytes = s.as_bytes();
        let digits = |r: std::ops::Range<usize>| bytes[r].iter().all(u8::is_ascii_digit);
        match bytes.len() {
            4 if digits(0..4) => Some(PeriodCell::Period(Period::Year(s.parse().ok()?))),
            7 if digits(0..4) && bytes[4] == b'-' && digits(5..7) => {
                let month = s[5..7].parse().ok()?;
                Period::month(s[..4].parse().ok()?, month)
                    .ok()
                    .map(PeriodCell::Period)
            }
            8 if digits(0..4) && &s[4..6] == "-W" && digits(6..8) => {
                Period::week(s[..4].parse().ok()?, s[6..8].parse().ok()?)
                    .ok()
                    .map(PeriodCell::Period)
            }
            10 => NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .ok()
                .map(PeriodCell::Date),
            _ => None,
        }
    }

    fn as_period(&self) -> Period {
        match *self {
            PeriodCell::Period(p) => p,
            PeriodCell::Date(d) => {
                let iso = d.iso_week();
                Period::Week {
                    year: iso.year(),
                    week: iso.week(),
                }
            }
        }
    }

    fn month_of_start(&self) -> Option<Period> {
        match *self {
            PeriodCell::Period(p) => p.containing_month(),
            PeriodCell::Date(d) => Some(Period::Month {
                year: d.year(),
                month: d.month(),
            }),
        }
    }
}

impl FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match PeriodCell::parse(s) {
            Some(cell) => Ok(cell.as_period()),
            None => Err(Error::Argument(format!("unrecognised period '{s}'"))),
        }
    }
}

impl Serialize for Period {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Period {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Contiguous run of periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeIndex {
    start: Period,
    len: usize,
}

impl TimeIndex {
    pub fn new(start: Period, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Argument(
                "time index must contain at least one period".into(),
            ));
        }
        Ok(TimeIndex { start, len })
    }

    /// Monthly index starting at `year`-`month`.
    pub fn monthly(year: i32, month: u32, len: usize) -> Result<Self> {
        TimeIndex::new(Period::month(year, month)?, len)
    }

    pub fn frequency(&self) -> Frequency {
        self.start.frequency()
    }

    pub fn start(&self) -> Period {
        self.start
    }

    pub fn end(&self) -> Period {
        self.start.offset(self.len as i64 - 1)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn period(&self, i: usize) -> Period {
        self.start.offset(i as i64)
    }

    /// Position of `period` within the index, if it falls inside it.
    pub fn position(&self, period: Period) -> Option<usize> {
        if period.frequency() != self.frequency() {
            return None;
        }
        let delta = period.ordinal() - self.start.ordinal();
        (0..self.len as i64)
            .contains(&delta)
            .then_some(delta as usize)
    }

    pub fn periods(&self) -> impl Iterator<Item = Period> + '_ {
        (0..self.len).map(|i| self.period(i))
    }
}

/// Univariate series on a [`TimeIndex`]; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SeriesRepr")]
pub struct Series {
    index: TimeIndex,
    values: Vec<Option<f64>>,
}

#[derive(Deserialize)]
struct SeriesRepr {
    index: TimeIndex,
    values: Vec<Option<f64>>,
}

impl TryFrom<SeriesRepr> for Series {
    type Error = Error;

    fn try_from(repr: SeriesRepr) -> Result<Self> {
        Series::new(repr.index, repr.values)
    }
}

impl Series {
    pub fn new(index: TimeIndex, values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != index.len() {
            return Err(Error::Argument(format!(
                "series has {} values but its index has {} periods",
                values.len(),
                index.len()
            )));
        }
        if let Some(i) = values
            .iter()
            .position(|v| matches!(v, Some(x) if !x.is_finite()))
        {
            return Err(Error::Domain(format!("non-finite value at position {i}")));
        }
        Ok(Series { index, values })
    }

    /// Fully observed series.
    pub fn from_values(index: TimeIndex, values: &[f64]) -> Result<Self> {
        Series::new(index, values.iter().copied().map(Some).collect())
    }

    /// Fully observed monthly series starting January 2000; handy for
    /// synthetic data.
    pub fn synthetic(values: &[f64]) -> Result<Self> {
        Series::from_values(TimeIndex::monthly(2000, 1, values.len().max(1))?, values)
    }

    pub fn index(&self) -> &TimeIndex {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.values.get(i).copied().flatten()
    }

    /// Observed values in order, skipping missing positions.
    pub fn observed(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().filter_map(|v| *v)
    }

    pub fn observed_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Mean of the observed values.
    pub fn mean(&self) -> Option<f64> {
        let n = self.observed_count();
        (n > 0).then(|| self.observed().sum::<f64>() / n as f64)
    }

    /// Sample variance (denominator n - 1) of the observed values.
    pub fn variance(&self) -> Option<f64> {
        let n = self.observed_count();
        if n < 2 {
            return None;
        }
        let mean = self.mean()?;
        Some(self.observed().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64)
    }

    /// Sub-series over positions `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Series> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::Argument(format!(
                "range {}..{} outside series of length {}",
                range.start,
                range.end,
                self.len()
            )));
        }
        Series::new(
            TimeIndex::new(self.index.period(range.start), range.len())?,
            self.values[range].to_vec(),
        )
    }

    /// Copy with every value passed through `f`; missing stays missing.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Series> {
        Series::new(self.index, self.values.iter().map(|v| v.map(&f)).collect())
    }
}

/// Named search-intensity series sharing one index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPanel {
    names: Vec<String>,
    series: Vec<Series>,
}

impl QueryPanel {
    pub fn new(names: Vec<String>, series: Vec<Series>) -> Result<Self> {
        if names.len() != series.len() {
            return Err(Error::Argument(format!(
                "{} names for {} series",
                names.len(),
                series.len()
            )));
        }
        if let Some(first) = series.first() {
            if series.iter().any(|s| s.index() != first.index()) {
                return Err(Error::Argument(
                    "panel members must share one time index".into(),
                ));
            }
        }
        Ok(QueryPanel { names, series })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn series(&self) -> &[Series] {
        &self.series
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn index(&self) -> Option<&TimeIndex> {
        self.series.first().map(Series::index)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Series)> {
        self.names.iter().map(String::as_str).zip(&self.series)
    }
}

/// Options for reading trends exports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    /// Value substituted for the censored "<1" cell.
    pub less_than_one: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { less_than_one: 0.5 }
    }
}

struct Table {
    names: Vec<String>,
    index: TimeIndex,
    columns: Vec<Vec<Option<f64>>>,
}

/// Parses header + rows, validating contiguity. Weekly rows are folded into
/// calendar months. `first_line` is the 1-based line number of the header.
fn parse_table(
    body: &str,
    first_line: usize,
    opts: &IngestOptions,
    intensity_range: bool,
    header_optional: bool,
) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: first_line + e.position().map_or(0, |p| p.line() as usize - 1),
            message: e.to_string(),
        })?;
        let line = first_line + rec.position().map_or(0, |p| p.line() as usize - 1);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push((line, rec));
    }
    let mut records = records.into_iter().peekable();

    let (header_line, header) = records.peek().cloned().ok_or_else(|| Error::Parse {
        line: first_line,
        message: "missing header row".into(),
    })?;
    let has_header = !header_optional || PeriodCell::parse(&header[0]).is_none();
    let width = header.len();
    if width < 2 {
        return Err(Error::Parse {
            line: header_line,
            message: "expected a period column and at least one value column".into(),
        });
    }
    let names: Vec<String> = if has_header {
        records.next();
        header.iter().skip(1).map(str::to_owned).collect()
    } else {
        (1..width).map(|i| format!("value{i}")).collect()
    };

    let mut cells: Vec<PeriodCell> = Vec::new();
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); width - 1];
    for (line, rec) in records {
        if rec.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let cell = PeriodCell::parse(&rec[0]).ok_or_else(|| Error::Parse {
            line,
            message: format!("malformed period '{}'", &rec[0]),
        })?;
        if let Some(prev) = cells.last() {
            let same_kind = matches!((prev, &cell), (PeriodCell::Date(_), PeriodCell::Date(_)))
                || (matches!(prev, PeriodCell::Period(_))
                    && matches!(cell, PeriodCell::Period(_))
                    && prev.as_period().frequency() == cell.as_period().frequency());
            if !same_kind {
                return Err(Error::Parse {
                    line,
                    message: format!("period '{}' does not match earlier rows", &rec[0]),
                });
            }
            let expected = prev.as_period().next();
            let contiguous = match (prev, &cell) {
                (PeriodCell::Date(a), PeriodCell::Date(b)) => (*b - *a).num_days() == 7,
                _ => cell.as_period() == expected,
            };
            if !contiguous {
                return Err(Error::Gap {
                    line,
                    expected: expected.to_string(),
                    found: rec[0].to_string(),
                });
            }
        }
        for (col, raw) in columns.iter_mut().zip(rec.iter().skip(1)) {
            col.push(parse_value(raw, line, opts, intensity_range)?);
        }
        cells.push(cell);
    }
    let first = *cells.first().ok_or_else(|| Error::Parse {
        line: header_line,
        message: "no data rows".into(),
    })?;

    if first.as_period().frequency() == Frequency::Weekly {
        return Ok(fold_weeks_into_months(names, &cells, &columns));
    }
    Ok(Table {
        names,
        index: TimeIndex::new(first.as_period(), cells.len())?,
        columns,
    })
}

fn parse_value(
    raw: &str,
    line: usize,
    opts: &IngestOptions,
    intensity_range: bool,
) -> Result<Option<f64>> {
    let value = match raw {
        "" => return Ok(None),
        "<1" => opts.less_than_one,
        _ => raw.parse::<f64>().map_err(|_| Error::Parse {
            line,
            message: format!("cannot parse value '{raw}'"),
        })?,
    };
    if !value.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("non-finite value '{raw}'"),
        });
    }
    if intensity_range && !(0.0..=100.0).contains(&value) {
        return Err(Error::Parse {
            line,
            message: format!("search intensity {value} outside [0, 100]"),
        });
    }
    Ok(Some(value))
}

fn fold_weeks_into_months(
    names: Vec<String>,
    cells: &[PeriodCell],
    columns: &[Vec<Option<f64>>],
) -> Table {
    let months: Vec<Period> = cells
        .iter()
        .map(|c| c.month_of_start().expect("weekly rows carry a date"))
        .collect();
    let start = months[0];
    let len = (months[months.len() - 1].ordinal() - start.ordinal() + 1) as usize;
    let columns = columns
        .iter()
        .map(|col| {
            let mut sums = vec![(0.0, 0usize); len];
            for (month, value) in months.iter().zip(col) {
                if let Some(v) = value {
                    let slot = &mut sums[(month.ordinal() - start.ordinal()) as usize];
                    slot.0 += v;
                    slot.1 += 1;
                }
            }
            sums.into_iter()
                .map(|(s, n)| (n > 0).then(|| s / n as f64))
                .collect()
        })
        .collect();
    Table {
        names,
        index: TimeIndex { start, len },
        columns,
    }
}

/// Splits off the optional "Category:" preamble; returns the body and the
/// 1-based line number where it starts.
fn strip_preamble(text: &str) -> (&str, usize) {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut offset = 0;
    let mut line = 1;
    let mut seen_preamble = false;
    for raw in text.split_inclusive('\n') {
        let content = raw.trim_end_matches(['\n', '\r']).trim();
        if content.is_empty() || (!seen_preamble && content.starts_with("Category:")) {
            seen_preamble |= !content.is_empty();
            offset += raw.len();
            line += 1;
            continue;
        }
        break;
    }
    (&text[offset..], line)
}

/// Reads a trends export: optional "Category:" line, blank line, header
/// (period column + one column per query), then data rows.
pub fn ingest_trends_csv(text: &str) -> Result<QueryPanel> {
    ingest_trends_csv_with(text, &IngestOptions::default())
}

pub fn ingest_trends_csv_with(text: &str, opts: &IngestOptions) -> Result<QueryPanel> {
    let (body, first_line) = strip_preamble(text);
    let table = parse_table(body, first_line, opts, true, false)?;
    let series = table
        .columns
        .into_iter()
        .map(|values| Series::new(table.index, values))
        .collect::<Result<Vec<_>>>()?;
    QueryPanel::new(table.names, series)
}

/// Reads a plain `period,value` CSV (header row optional).
pub fn parse_series_csv(text: &str) -> Result<Series> {
    let (body, first_line) = strip_preamble(text);
    let table = parse_table(body, first_line, &IngestOptions::default(), false, true)?;
    if table.columns.len() != 1 {
        return Err(Error::Parse {
            line: first_line,
            message: format!("expected two columns, found {}", table.columns.len() + 1),
        });
    }
    let values = table.columns.into_iter().next().expect("one column");
    Series::new(table.index, values)
}

/// Canonical trends-export emission: intensities with one decimal place.
pub fn emit_trends_csv(panel: &QueryPanel) -> String {
    let mut out = String::from("Category: All categories\n\n");
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let freq = panel
        .index()
        .map_or(Frequency::Monthly, TimeIndex::frequency);
    let mut header = vec![freq.column_name().to_owned()];
    header.extend(panel.names().iter().cloned());
    writer.write_record(&header).expect("in-memory write");
    if let Some(index) = panel.index() {
        for (i, period) in index.periods().enumerate() {
            let mut row = vec![period.to_string()];
            row.extend(
                panel
                    .series()
                    .iter()
                    .map(|s| s.get(i).map_or_else(String::new, |v| format!("{v:.1}"))),
            );
            writer.write_record(&row).expect("in-memory write");
        }
    }
    out.push_str(&String::from_utf8(writer.into_inner().expect("flush")).expect("utf-8"));
    out
}

/// `period,value` emission at full (round-trip) precision.
pub fn emit_series_csv(series: &Series) -> String {
    let mut out = String::from("period,value\n");
    for (period, value) in series.index().periods().zip(series.values()) {
        match value {
            Some(v) => out.push_str(&format!("{period},{v}\n")),
            None => out.push_str(&format!("{period},\n")),
        }
    }
    out
}

/// Pointwise mean over the non-missing members of a panel.
pub fn simple_average(panel: &QueryPanel) -> Result<Series> {
    let index = *panel
        .index()
        .ok_or_else(|| Error::Argument("cannot average an empty panel".into()))?;
    let mut column = Vec::with_capacity(panel.len());
    let values = (0..index.len())
        .map(|i| {
            column.clear();
            column.extend(panel.series().iter().filter_map(|s| s.get(i)));
            // summation order fixed by value so member order cannot matter
            column.sort_by(f64::total_cmp);
            (!column.is_empty()).then(|| column.iter().sum::<f64>() / column.len() as f64)
        })
        .collect();
    Series::new(index, values)
}

/// Rescales so the maximum becomes exactly 100.
pub fn rescale_0_100(series: &Series) -> Result<Series> {
    let max = series.observed().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(Error::Domain(
            "rescaling needs at least one positive observed value".into(),
        ));
    }
    if max == 100.0 {
        return Ok(series.clone());
    }
    series.map(|v| v / max * 100.0)
}

/// How [`to_annual`] combines the twelve months of a year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnualAggregate {
    Mean,
    Sum,
}

/// Aggregates a monthly series covering whole calendar years.
pub fn to_annual(series: &Series, how: AnnualAggregate) -> Result<Series> {
    let index = series.index();
    match index.start() {
        Period::Month { month: 1, .. } if series.len() % 12 == 0 => {}
        Period::Month { .. } => {
            return Err(Error::Argument(
                "annual aggregation needs whole calendar years (January to December)".into(),
            ))
        }
        other => {
            return Err(Error::Argument(format!(
                "annual aggregation needs a monthly series, got {:?}",
                other.frequency()
            )))
        }
    }
    let values = series
        .values()
        .chunks(12)
        .map(|year| match how {
            AnnualAggregate::Sum => year.iter().copied().sum::<Option<f64>>(),
            AnnualAggregate::Mean => {
                let seen: Vec<f64> = year.iter().filter_map(|v| *v).collect();
                (!seen.is_empty()).then(|| seen.iter().sum::<f64>() / seen.len() as f64)
            }
        })
        .collect();
    Series::new(
        TimeIndex::new(
            Period::Year(index.start().calendar_year()),
            series.len() / 12,
        )?,
        values,
    )
}

/// Drops leading and trailing months so a monthly series covers whole years.
pub fn trim_to_whole_years(series: &Series) -> Result<Series> {
    let skip = match series.index().start() {
        Period::Month { month, .. } => ((13 - month) % 12) as usize,
        _ => {
            return Err(Error::Argument(
                "only monthly series can be trimmed to years".into(),
            ))
        }
    };
    let usable = series.len().saturating_sub(skip) / 12 * 12;
    if usable == 0 {
        return Err(Error::Argument(
            "series does not cover a whole calendar year".into(),
        ));
    }
    series.slice(skip..skip + usable)
}

/// Brings two series onto one frequency and their overlapping span.
/// Monthly series are averaged to annual when compared with annual data.
pub fn align(a: &Series, b: &Series) -> Result<(Series, Series)> {
    let (a, b) = match (a.index().frequency(), b.index().frequency()) {
        (x, y) if x == y => (a.clone(), b.clone()),
        (Frequency::Monthly, Frequency::Annual) => (
            to_annual(&trim_to_whole_years(a)?, AnnualAggregate::Mean)?,
            b.clone(),
        ),
        (Frequency::Annual, Frequency::Monthly) => (
            a.clone(),
            to_annual(&trim_to_whole_years(b)?, AnnualAggregate::Mean)?,
        ),
        (x, y) => {
            return Err(Error::Argument(format!(
                "cannot align {x:?} with {y:?} series"
            )))
        }
    };
    let start = a.index().start().ordinal().max(b.index().start().ordinal());
    let end = a.index().end().ordinal().min(b.index().end().ordinal());
    if start > end {
        return Err(Error::Argument("series do not overlap in time".into()));
    }
    let cut = |s: &Series| {
        let from = (start - s.index().start().ordinal()) as usize;
        s.slice(from..from + (end - start + 1) as usize)
    };
    Ok((cut(&a)?, cut(&b)?))
}

/// Sample Pearson correlation with pairwise deletion of missing positions.
pub fn pearson_correlation(a: &Series, b: &Series) -> Result<f64> {
    if a.len() != b.len() || a.index().frequency() != b.index().frequency() {
        return Err(Error::Argument(
            "correlation needs equal-length series of one frequency".into(),
        ));
    }
    let pairs: Vec<(f64, f64)> = a
        .values()
        .iter()
        .zip(b.values())
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .collect();
    if pairs.len() < 3 {
        return Err(Error::Argument(format!(
            "correlation needs at least 3 paired observations, found {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Domain(
            "correlation undefined for a constant series".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// One row of a query ranking. A candidate whose correlation could not be
/// computed keeps its place at the end with the reason attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryScore {
    pub name: String,
    pub correlation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Ranks candidate queries by correlation with `target`, highest first;
/// ties go to the lexicographically smaller name.
pub fn rank_queries(candidates: &QueryPanel, target: &Series) -> Vec<QueryScore> {
    let mut scores: Vec<QueryScore> = candidates
        .iter()
        .map(|(name, series)| {
            let result = align(series, target).and_then(|(a, b)| pearson_correlation(&a, &b));
            match result {
                Ok(r) => QueryScore {
                    name: name.to_owned(),
                    correlation: Some(r),
                    error: None,
                },
                Err(e) => QueryScore {
                    name: name.to_owned(),
                    correlation: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    scores.sort_by(|x, y| match (x.correlation, y.correlation) {
        (Some(a), Some(b)) => b.total_cmp(&a).then_with(|| x.name.cmp(&y.name)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => x.name.cmp(&y.name),
    });
    scores
}
