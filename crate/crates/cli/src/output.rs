//! CSV artifacts: one header row, LF line endings, floats with 17
//! significant digits so every file parses back to the exact values.

use std::path::Path;

use vlcmod::analysis::{BoundCurve, BoundPoint, RateMap};
use vlcmod::montecarlo::{BerCurve, BerPoint};

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("malformed CSV: {0}")]
    Format(String),
}

type Result<T> = std::result::Result<T, OutputError>;

fn malformed<T>(msg: impl Into<String>) -> Result<T> {
    Err(OutputError::Format(msg.into()))
}

/// `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .or_else(|_| malformed(format!("'{s}' is not a number")))
}

fn parse_u64(s: &str) -> Result<u64> {
    s.trim()
        .parse()
        .or_else(|_| malformed(format!("'{s}' is not an unsigned integer")))
}

/// A header row plus records, all kept as text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| OutputError::Io(e.into_error()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| Ok(rec?.iter().map(str::to_string).collect()))
            .collect::<Result<_>>()?;
        Ok(Self { header, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_bytes()?)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    fn expect_header(&self, want: &[&str]) -> Result<()> {
        if self.header != want {
            return malformed(format!("expected header {want:?}, got {:?}", self.header));
        }
        Ok(())
    }
}

pub const BER_HEADER: [&str; 4] = ["eb_n0_db", "ber", "bits", "errors"];

fn ber_cells(p: &BerPoint) -> Vec<String> {
    vec![fmt_f64(p.eb_n0_db), fmt_f64(p.ber), p.bits.to_string(), p.errors.to_string()]
}

fn ber_point(cells: &[String]) -> Result<BerPoint> {
    Ok(BerPoint {
        eb_n0_db: parse_f64(&cells[0])?,
        ber: parse_f64(&cells[1])?,
        bits: parse_u64(&cells[2])?,
        errors: parse_u64(&cells[3])?,
    })
}

pub fn ber_table(curve: &BerCurve) -> Table {
    let mut t = Table::new(BER_HEADER);
    curve.points.iter().for_each(|p| t.push(ber_cells(p)));
    t
}

pub fn parse_ber_table(t: &Table) -> Result<BerCurve> {
    t.expect_header(&BER_HEADER)?;
    let points = t.rows.iter().map(|r| ber_point(r)).collect::<Result<_>>()?;
    Ok(BerCurve { points })
}

pub const BOUND_HEADER: [&str; 3] = ["eb_n0_db", "ber_bound", "ber_bound_raw"];

pub fn bound_table(curve: &BoundCurve) -> Table {
    let mut t = Table::new(BOUND_HEADER);
    for p in &curve.points {
        t.push(vec![fmt_f64(p.eb_n0_db), fmt_f64(p.ber_bound), fmt_f64(p.ber_bound_raw)]);
    }
    t
}

pub fn parse_bound_table(t: &Table) -> Result<BoundCurve> {
    t.expect_header(&BOUND_HEADER)?;
    let points = t
        .rows
        .iter()
        .map(|r| {
            Ok(BoundPoint {
                eb_n0_db: parse_f64(&r[0])?,
                ber_bound: parse_f64(&r[1])?,
                ber_bound_raw: parse_f64(&r[2])?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(BoundCurve { points })
}

/// Sweep results: the swept parameter followed by the BER columns.
pub fn sweep_table(parameter: &str, points: &[(f64, BerPoint)]) -> Table {
    let mut t = Table::new(std::iter::once(parameter).chain(BER_HEADER));
    for (v, p) in points {
        let mut row = vec![fmt_f64(*v)];
        row.extend(ber_cells(p));
        t.push(row);
    }
    t
}

pub fn parse_sweep_table(parameter: &str, t: &Table) -> Result<Vec<(f64, BerPoint)>> {
    let want: Vec<&str> = std::iter::once(parameter).chain(BER_HEADER).collect();
    t.expect_header(&want)?;
    t.rows
        .iter()
        .map(|r| Ok((parse_f64(&r[0])?, ber_point(&r[1..])?)))
        .collect()
}

/// One row of placement metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementRow {
    pub placement: String,
    pub modulation: String,
    pub d_min: f64,
    pub d_avg: f64,
}

pub const PLACEMENT_HEADER: [&str; 4] = ["placement", "modulation", "d_min", "d_avg"];

pub fn placement_table(rows: &[PlacementRow]) -> Table {
    let mut t = Table::new(PLACEMENT_HEADER);
    for r in rows {
        t.push(vec![r.placement.clone(), r.modulation.clone(), fmt_f64(r.d_min), fmt_f64(r.d_avg)]);
    }
    t
}

pub fn parse_placement_table(t: &Table) -> Result<Vec<PlacementRow>> {
    t.expect_header(&PLACEMENT_HEADER)?;
    t.rows
        .iter()
        .map(|r| {
            Ok(PlacementRow {
                placement: r[0].clone(),
                modulation: r[1].clone(),
                d_min: parse_f64(&r[2])?,
                d_avg: parse_f64(&r[3])?,
            })
        })
        .collect()
}

/// Which per-cell quantity of a [`RateMap`] a grid table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridField {
    GammaDb,
    RateBpcu,
}

/// Grid as a matrix: header `y_m\x_m, x₀, x₁, …`, then one row per `y`
/// starting with the `y` coordinate. Cells without data are left empty.
pub fn grid_table(map: &RateMap, field: GridField) -> Table {
    let mut t = Table::new(std::iter::once("y_m\\x_m".to_string()).chain(map.xs.iter().map(|&x| fmt_f64(x))));
    for (iy, &y) in map.ys.iter().enumerate() {
        let mut row = vec![fmt_f64(y)];
        for ix in 0..map.width() {
            row.push(match field {
                GridField::GammaDb => map.gamma_at(ix, iy).map(fmt_f64).unwrap_or_default(),
                GridField::RateBpcu => map.rate_at(ix, iy).map(|r| r.to_string()).unwrap_or_default(),
            });
        }
        t.push(row);
    }
    t
}

/// Coordinates and cells of a grid table, in the [`RateMap`] layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub cells: Vec<Option<f64>>,
}

pub fn parse_grid_table(t: &Table) -> Result<Grid> {
    if t.header.first().map(String::as_str) != Some("y_m\\x_m") {
        return malformed("grid header must start with y_m\\x_m");
    }
    let xs = t.header[1..].iter().map(|s| parse_f64(s)).collect::<Result<Vec<_>>>()?;
    let mut ys = Vec::with_capacity(t.rows.len());
    let mut cells = Vec::with_capacity(t.rows.len() * xs.len());
    for r in &t.rows {
        if r.len() != xs.len() + 1 {
            return malformed("grid row length does not match header");
        }
        ys.push(parse_f64(&r[0])?);
        for c in &r[1..] {
            cells.push(if c.is_empty() { None } else { Some(parse_f64(c)?) });
        }
    }
    Ok(Grid { xs, ys, cells })
}

pub const COVERAGE_HEADER: [&str; 2] = ["eta_bpcu", "coverage_percent"];

pub fn coverage_table(rows: &[(u32, f64)]) -> Table {
    let mut t = Table::new(COVERAGE_HEADER);
    rows.iter().for_each(|(e, p)| t.push(vec![e.to_string(), fmt_f64(*p)]));
    t
}

pub fn parse_coverage_table(t: &Table) -> Result<Vec<(u32, f64)>> {
    t.expect_header(&COVERAGE_HEADER)?;
    t.rows
        .iter()
        .map(|r| Ok((parse_u64(&r[0])? as u32, parse_f64(&r[1])?)))
        .collect()
}
