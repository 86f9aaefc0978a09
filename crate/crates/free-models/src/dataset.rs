//! Measurement collections, their CSV serialization, and train/test
//! partitioning.
//!
//! The on-disk format is a UTF-8, newline-delimited CSV with this exact
//! header:
//!
//! ```text
//! sample_id,gamma_deg,L_mm,Ri_mm,Ro_mm,dl_mm,dphi_deg,P_kPa,F_N,M_Nmm,buckled
//! ```
//!
//! `dl_mm` is the length offset `l - L`, `dphi_deg` the end-to-end twist,
//! and `buckled` is `0` or `1`. Values are stored in field units and
//! converted to SI on read.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::types::{CoreError, FreeDesign, GeneralizedForce, KinematicState, LoadRecord};
use crate::units;

pub const CSV_HEADER: &str = "sample_id,gamma_deg,L_mm,Ri_mm,Ro_mm,dl_mm,dphi_deg,P_kPa,F_N,M_Nmm,buckled";

/// An ordered collection of load measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    records: Vec<LoadRecord>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, records: Vec<LoadRecord>) -> Self {
        Self {
            name: name.into(),
            records,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn records(&self) -> &[LoadRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The admissible view: records whose sample had not buckled. Models
    /// never see buckled records; this filter is the single choke point.
    pub fn unbuckled(&self) -> Vec<&LoadRecord> {
        self.records.iter().filter(|r| !r.buckled).collect()
    }

    /// Owned copy of the admissible view.
    pub fn unbuckled_dataset(&self) -> Dataset {
        Dataset::new(
            self.name.clone(),
            self.records
                .iter()
                .filter(|r| !r.buckled)
                .cloned()
                .collect(),
        )
    }

    /// Normalization maxima `(max |F|, max |M|)` over the admissible view.
    pub fn normalizers(&self) -> Result<(f64, f64), CoreError> {
        let records = self.unbuckled();
        if records.is_empty() {
            return Err(CoreError::EmptyDataset);
        }
        let f_max = records
            .iter()
            .map(|r| r.tau.force.abs())
            .fold(0.0, f64::max);
        let m_max = records
            .iter()
            .map(|r| r.tau.moment.abs())
            .fold(0.0, f64::max);
        if f_max <= 0.0 || m_max <= 0.0 {
            return Err(CoreError::DegenerateNormalization);
        }
        Ok((f_max, m_max))
    }

    /// Merge several datasets into one, preserving order.
    pub fn concat(name: impl Into<String>, parts: &[&Dataset]) -> Dataset {
        let records = parts
            .iter()
            .flat_map(|d| d.records.iter().cloned())
            .collect();
        Dataset::new(name, records)
    }

    /// Split the admissible view into disjoint random subsets.
    ///
    /// `fractions` must sum to 1 (±1e-9). The first fraction is the training
    /// share; every other subset gets `round(fraction * n)` records and the
    /// training subset absorbs the remainder. The shuffle is a Fisher–Yates
    /// pass driven by a ChaCha stream, so a given `seed` always produces the
    /// same partition.
    pub fn partition(&self, fractions: &[f64], seed: u64) -> Result<Vec<Dataset>, CoreError> {
        let total: f64 = fractions.iter().sum();
        if fractions.is_empty() || (total - 1.0).abs() > 1e-9 {
            return Err(CoreError::BadFractions(total));
        }
        if fractions.iter().any(|&f| !(0.0..=1.0).contains(&f)) {
            return Err(CoreError::BadFractions(total));
        }
        let admissible: Vec<LoadRecord> = self
            .records
            .iter()
            .filter(|r| !r.buckled)
            .cloned()
            .collect();
        let n = admissible.len();
        if n < 5 {
            return Err(CoreError::TooFewRecords { needed: 5, got: n });
        }

        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);

        let mut sizes: Vec<usize> = fractions
            .iter()
            .skip(1)
            .map(|f| (f * n as f64).round() as usize)
            .collect();
        let rest: usize = sizes.iter().sum();
        if rest > n {
            return Err(CoreError::BadFractions(total));
        }
        sizes.insert(0, n - rest);

        let mut out = Vec::with_capacity(fractions.len());
        let mut cursor = 0usize;
        for (k, &size) in sizes.iter().enumerate() {
            let slice = &order[cursor..cursor + size];
            cursor += size;
            let records = slice.iter().map(|&i| admissible[i].clone()).collect();
            out.push(Dataset::new(format!("{}/part{k}", self.name), records));
        }
        Ok(out)
    }

    /// Convenience 2-way split.
    pub fn split_train_test(
        &self,
        train_fraction: f64,
        seed: u64,
    ) -> Result<(Dataset, Dataset), CoreError> {
        let mut parts = self.partition(&[train_fraction, 1.0 - train_fraction], seed)?;
        let test = parts.pop().expect("two parts");
        let mut train = parts.pop().expect("two parts");
        train.name = format!("{}/train", self.name);
        Ok((train, test))
    }

    /// Read a dataset from the CSV schema described in the module docs.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset, CoreError> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string());
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| match e.kind() {
                csv::ErrorKind::Io(_) => CoreError::Io(std::io::Error::other(e.to_string())),
                _ => CoreError::CsvSchema(e.to_string()),
            })?;

        {
            let headers = reader
                .headers()
                .map_err(|e| CoreError::CsvSchema(e.to_string()))?;
            let got = headers.iter().collect::<Vec<_>>().join(",");
            if got != CSV_HEADER {
                return Err(CoreError::CsvSchema(format!(
                    "expected `{CSV_HEADER}`, got `{got}`"
                )));
            }
        }

        let mut records = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| CoreError::CsvRow {
                line: e
                    .position()
                    .map(|p| p.line())
                    .unwrap_or_default(),
                msg: e.to_string(),
            })?;
            let line = row.position().map(|p| p.line()).unwrap_or_default();
            records.push(parse_row(&row, line)?);
        }
        Ok(Dataset::new(name, records))
    }

    /// Write the dataset in the CSV schema. Numeric fields use the shortest
    /// representation that round-trips, so read-after-write is lossless up
    /// to the unit conversions (well under 1e-9 relative).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), CoreError> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(file, "{CSV_HEADER}")?;
        for r in &self.records {
            let d = &r.design;
            writeln!(
                file,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.sample_id,
                units::rad_to_deg(d.gamma()),
                units::m_to_mm(d.length()),
                units::m_to_mm(d.inner_radius()),
                units::m_to_mm(d.outer_radius()),
                units::m_to_mm(r.state.length() - d.length()),
                units::rad_to_deg(r.state.twist()),
                units::pa_to_kpa(r.pressure),
                r.tau.force,
                units::nm_to_nmm(r.tau.moment),
                u8::from(r.buckled),
            )?;
        }
        file.flush()?;
        Ok(())
    }
}

fn parse_row(row: &csv::StringRecord, line: u64) -> Result<LoadRecord, CoreError> {
    let fail = |msg: String| CoreError::CsvRow { line, msg };
    if row.len() != 11 {
        return Err(fail(format!("expected 11 fields, got {}", row.len())));
    }
    let field = |idx: usize, name: &str| -> Result<f64, CoreError> {
        row[idx]
            .trim()
            .parse::<f64>()
            .map_err(|e| fail(format!("bad {name} value `{}`: {e}", &row[idx])))
    };

    let sample_id = row[0].to_string();
    let design = FreeDesign::from_io(
        field(1, "gamma_deg")?,
        field(2, "L_mm")?,
        field(3, "Ri_mm")?,
        field(4, "Ro_mm")?,
    )
    .map_err(|e| fail(e.to_string()))?;
    let state = KinematicState::from_deltas(
        &design,
        units::mm_to_m(field(5, "dl_mm")?),
        units::deg_to_rad(field(6, "dphi_deg")?),
    )
    .map_err(|e| fail(e.to_string()))?;
    let tau = GeneralizedForce::new(field(8, "F_N")?, units::nmm_to_nm(field(9, "M_Nmm")?))
        .map_err(|e| fail(e.to_string()))?;
    let buckled = match row[10].trim() {
        "0" => false,
        "1" => true,
        other => return Err(fail(format!("buckled must be 0 or 1, got `{other}`"))),
    };
    LoadRecord::new(
        sample_id,
        design,
        state,
        units::kpa_to_pa(field(7, "P_kPa")?),
        tau,
        buckled,
    )
    .map_err(|e| fail(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_dataset(n: usize) -> Dataset {
        let design = FreeDesign::from_io(15.0, 90.48, 4.77, 6.13).unwrap();
        let records = (0..n)
            .map(|i| {
                let state = KinematicState::from_deltas(
                    &design,
                    units::mm_to_m(-5.0 + i as f64 * 0.1),
                    units::deg_to_rad(i as f64),
                )
                .unwrap();
                LoadRecord::new(
                    "Sample1",
                    design,
                    state,
                    1e3 * i as f64,
                    GeneralizedForce::new(1.0 + i as f64, -0.5 * i as f64 - 0.1).unwrap(),
                    i % 7 == 3,
                )
                .unwrap()
            })
            .collect();
        Dataset::new("Sample1", records)
    }

    #[test]
    fn csv_roundtrip_preserves_records() {
        let ds = sample_dataset(5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        ds.write_csv(&path).unwrap();
        let back = Dataset::read_csv(&path).unwrap();
        assert_eq!(back.len(), ds.len());
        for (a, b) in ds.records().iter().zip(back.records()) {
            assert_eq!(a.sample_id, b.sample_id);
            assert_eq!(a.buckled, b.buckled);
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(1e-12);
            assert!(close(a.design.gamma(), b.design.gamma()));
            assert!(close(a.design.length(), b.design.length()));
            assert!(close(a.state.length(), b.state.length()));
            assert!(close(a.state.twist(), b.state.twist()));
            assert!(close(a.pressure, b.pressure));
            assert!(close(a.tau.force, b.tau.force));
            assert!(close(a.tau.moment, b.tau.moment));
        }
    }

    #[test]
    fn csv_sample1_design_row_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.csv");
        std::fs::write(
            &path,
            format!("{CSV_HEADER}\nSample1,15,90.48,4.77,6.13,0,0,0,1.0,2.0,0\n"),
        )
        .unwrap();
        let ds = Dataset::read_csv(&path).unwrap();
        let d = &ds.records()[0].design;
        assert!((d.gamma() - 15f64.to_radians()).abs() < 1e-12);
        assert!((d.length() - 0.09048).abs() < 1e-12);
        assert!((d.inner_radius() - 4.77e-3).abs() < 1e-12);
        assert!((d.outer_radius() - 6.13e-3).abs() < 1e-12);
    }

    #[test]
    fn buckled_rows_are_excluded_from_the_admissible_view() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        std::fs::write(
            &path,
            format!(
                "{CSV_HEADER}\n\
                 s,15,90.48,4.77,6.13,0,0,0,1.0,2.0,1\n\
                 s,15,90.48,4.77,6.13,1,0,0,1.5,2.5,0\n"
            ),
        )
        .unwrap();
        let ds = Dataset::read_csv(&path).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.unbuckled().len(), 1);
        assert!((ds.unbuckled()[0].tau.force - 1.5).abs() < 1e-12);
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            format!(
                "{CSV_HEADER}\n\
                 s,15,90.48,4.77,6.13,0,0,0,1.0,2.0,0\n\
                 s,15,90.48,4.77,6.13,0,0,0,oops,2.0,0\n"
            ),
        )
        .unwrap();
        match Dataset::read_csv(&path) {
            Err(CoreError::CsvRow { line, msg }) => {
                assert_eq!(line, 3, "{msg}");
                assert!(msg.contains("F_N"), "{msg}");
            }
            other => panic!("expected CsvRow error, got {other:?}"),
        }
    }

    #[test]
    fn header_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hdr.csv");
        std::fs::write(&path, "id,gamma\n1,2\n").unwrap();
        assert!(matches!(
            Dataset::read_csv(&path),
            Err(CoreError::CsvSchema(_))
        ));
    }

    #[test]
    fn partition_80_20_covers_disjointly() {
        let ds = sample_dataset(107); // some buckled
        let n = ds.unbuckled().len();
        let (train, test) = ds.split_train_test(0.8, 42).unwrap();
        assert_eq!(test.len(), ((0.2 * n as f64).round()) as usize);
        assert_eq!(train.len() + test.len(), n);

        // disjoint cover: compare by unique state fingerprint
        let key = |r: &LoadRecord| {
            (
                r.state.length().to_bits(),
                r.state.twist().to_bits(),
                r.pressure.to_bits(),
            )
        };
        let mut seen = std::collections::HashSet::new();
        for r in train.records().iter().chain(test.records()) {
            assert!(seen.insert(key(r)), "record appears in two splits");
            assert!(!r.buckled);
        }
        assert_eq!(seen.len(), n);
    }

    #[test]
    fn degenerate_fraction_gives_empty_test() {
        let ds = sample_dataset(20);
        let (train, test) = ds.split_train_test(1.0, 7).unwrap();
        assert!(test.is_empty());
        assert_eq!(train.len(), ds.unbuckled().len());
    }

    #[test]
    fn bad_fractions_are_rejected() {
        let ds = sample_dataset(20);
        assert!(matches!(
            ds.partition(&[0.8, 0.1], 0),
            Err(CoreError::BadFractions(_))
        ));
    }

    #[test]
    fn too_few_records_is_an_error() {
        let ds = sample_dataset(4);
        assert!(matches!(
            ds.partition(&[0.8, 0.2], 0),
            Err(CoreError::TooFewRecords { .. })
        ));
    }

    #[test]
    fn partition_is_deterministic_and_seed_sensitive() {
        let ds = sample_dataset(100);
        let (t1, _) = ds.split_train_test(0.8, 1234).unwrap();
        let (t2, _) = ds.split_train_test(0.8, 1234).unwrap();
        assert_eq!(t1.records(), t2.records());

        // Different seeds should almost always shuffle differently; demand
        // at least 15 of 20 alternate seeds disagree with seed 0.
        let (base, _) = ds.split_train_test(0.8, 0).unwrap();
        let mut differing = 0;
        for seed in 1..=20 {
            let (t, _) = ds.split_train_test(0.8, seed).unwrap();
            if t.records() != base.records() {
                differing += 1;
            }
        }
        assert!(differing >= 15, "only {differing} of 20 seeds differed");
    }

    #[test]
    fn three_way_partition_sizes() {
        let ds = sample_dataset(120);
        let n = ds.unbuckled().len();
        let parts = ds.partition(&[0.64, 0.16, 0.2], 5).unwrap();
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[1].len(), (0.16 * n as f64).round() as usize);
        assert_eq!(parts[2].len(), (0.2 * n as f64).round() as usize);
        assert_eq!(parts[0].len() + parts[1].len() + parts[2].len(), n);
    }
}
