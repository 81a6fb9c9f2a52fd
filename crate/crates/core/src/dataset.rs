//! Formulation records, API descriptors and the CSV corpus format.
//!
//! A corpus is two CSV files: one row per formulation (`formulations.csv`) and
//! one row per active ingredient (`apis.csv`). Rows keep their file order; the
//! row index of a formulation is its identity everywhere downstream (split
//! files, evaluation reports).
//!
//! Cell conventions:
//!
//! * a blank dose cell next to a named excipient reads as 0 mg;
//! * a blank name *and* dose means the slot is unused;
//! * blank manufacture parameters and a blank disintegration time are absent,
//!   never 0.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Bundled transcription of the 145-formulation ODT table.
pub const BUNDLED_FORMULATIONS_CSV: &str = include_str!("../../../data/odt_table1.csv");
/// Descriptor table for every API named in [`BUNDLED_FORMULATIONS_CSV`].
pub const BUNDLED_APIS_CSV: &str = include_str!("../../../data/apis.csv");

pub const FORMULATION_COLUMNS: [&str; 23] = [
    "api_name",
    "api_dose_mg",
    "filler1_name",
    "filler1_mg",
    "filler2_name",
    "filler2_mg",
    "binder_name",
    "binder_mg",
    "disint1_name",
    "disint1_mg",
    "disint2_name",
    "disint2_mg",
    "lubricant1_name",
    "lubricant1_mg",
    "lubricant2_name",
    "lubricant2_mg",
    "solubilizer_name",
    "solubilizer_mg",
    "hardness_n",
    "friability_pct",
    "thickness_mm",
    "punch_mm",
    "disintegration_time_sec",
];

pub const API_COLUMNS: [&str; 10] = [
    "api_name",
    "molecular_weight",
    "xlogp3",
    "hbond_donors",
    "hbond_acceptors",
    "rotatable_bonds",
    "tpsa",
    "heavy_atoms",
    "complexity",
    "logs",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExcipientCategory {
    Filler,
    Binder,
    Disintegrant,
    Lubricant,
    Solubilizer,
}

impl ExcipientCategory {
    pub const ALL: [ExcipientCategory; 5] = [
        ExcipientCategory::Filler,
        ExcipientCategory::Binder,
        ExcipientCategory::Disintegrant,
        ExcipientCategory::Lubricant,
        ExcipientCategory::Solubilizer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExcipientCategory::Filler => "filler",
            ExcipientCategory::Binder => "binder",
            ExcipientCategory::Disintegrant => "disintegrant",
            ExcipientCategory::Lubricant => "lubricant",
            ExcipientCategory::Solubilizer => "solubilizer",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ExcipientCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ExcipientCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExcipientCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown excipient category `{s}`")))
    }
}

/// Number of excipient slots in a formulation row.
pub const SLOT_COUNT: usize = 8;

/// Category and column prefix of each excipient slot, in column order:
/// two fillers, one binder, two disintegrants, two lubricants, one solubilizer.
pub const SLOT_LAYOUT: [(ExcipientCategory, &str); SLOT_COUNT] = [
    (ExcipientCategory::Filler, "filler1"),
    (ExcipientCategory::Filler, "filler2"),
    (ExcipientCategory::Binder, "binder"),
    (ExcipientCategory::Disintegrant, "disint1"),
    (ExcipientCategory::Disintegrant, "disint2"),
    (ExcipientCategory::Lubricant, "lubricant1"),
    (ExcipientCategory::Lubricant, "lubricant2"),
    (ExcipientCategory::Solubilizer, "solubilizer"),
];

/// Physicochemical descriptors of an active ingredient.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiDescriptor {
    pub name: String,
    /// g/mol
    pub molecular_weight: f64,
    pub xlogp3: f64,
    pub hbond_donors: u32,
    pub hbond_acceptors: u32,
    pub rotatable_bonds: u32,
    /// Å²
    pub tpsa: f64,
    pub heavy_atoms: u32,
    pub complexity: f64,
    pub logs: f64,
}

impl ApiDescriptor {
    pub const FEATURE_NAMES: [&'static str; 9] = [
        "molecular_weight",
        "xlogp3",
        "hbond_donors",
        "hbond_acceptors",
        "rotatable_bonds",
        "tpsa",
        "heavy_atoms",
        "complexity",
        "logs",
    ];

    /// Descriptor values in [`Self::FEATURE_NAMES`] order.
    pub fn values(&self) -> [f64; 9] {
        [
            self.molecular_weight,
            self.xlogp3,
            f64::from(self.hbond_donors),
            f64::from(self.hbond_acceptors),
            f64::from(self.rotatable_bonds),
            self.tpsa,
            f64::from(self.heavy_atoms),
            self.complexity,
            self.logs,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcipientEntry {
    pub category: ExcipientCategory,
    pub name: String,
    /// 0 means the slot is coded but the excipient is absent from this tablet.
    pub dose_mg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulationRecord {
    pub api_name: String,
    pub api_dose_mg: f64,
    /// Indexed like [`SLOT_LAYOUT`].
    pub slots: [Option<ExcipientEntry>; SLOT_COUNT],
    pub hardness_n: Option<f64>,
    pub friability_pct: Option<f64>,
    pub thickness_mm: Option<f64>,
    pub punch_mm: Option<f64>,
    pub disintegration_time_sec: Option<f64>,
}

impl FormulationRecord {
    pub fn excipients(&self) -> impl Iterator<Item = &ExcipientEntry> {
        self.slots.iter().flatten()
    }

    /// Hardness, friability, thickness and punch diameter, in that order.
    pub fn manufacture_parameters(&self) -> [Option<f64>; 4] {
        [
            self.hardness_n,
            self.friability_pct,
            self.thickness_mm,
            self.punch_mm,
        ]
    }

    pub fn is_labeled(&self) -> bool {
        self.disintegration_time_sec.is_some()
    }
}

/// Per-category excipient names, each list in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExcipientVocab {
    names: [Vec<String>; 5],
}

impl ExcipientVocab {
    pub fn names(&self, category: ExcipientCategory) -> &[String] {
        &self.names[category.index()]
    }

    pub fn position(&self, category: ExcipientCategory, name: &str) -> Option<usize> {
        self.names[category.index()].iter().position(|n| n == name)
    }

    /// Appends `name` to its category unless already present.
    pub fn insert(&mut self, category: ExcipientCategory, name: &str) {
        if self.position(category, name).is_none() {
            self.names[category.index()].push(name.to_string());
        }
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a FormulationRecord>) -> Self {
        let mut vocab = ExcipientVocab::default();
        for record in records {
            for entry in record.excipients() {
                vocab.insert(entry.category, &entry.name);
            }
        }
        vocab
    }
}

/// An immutable, ordered collection of formulations and the descriptors of
/// their APIs.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub records: Vec<FormulationRecord>,
    pub api_table: Vec<ApiDescriptor>,
    pub excipient_vocab: ExcipientVocab,
}

/// A dose that is more than ten times the median dose of its API group.
#[derive(Debug, Clone, PartialEq)]
pub struct DoseWarning {
    pub record: usize,
    pub column: String,
    pub dose_mg: f64,
    pub group_median_mg: f64,
}

impl Corpus {
    /// Parses the bundled corpus. The embedded files are checked by the test
    /// suite, so a failure here is a packaging bug.
    pub fn bundled() -> Corpus {
        parse_corpus(BUNDLED_FORMULATIONS_CSV, BUNDLED_APIS_CSV).expect("bundled corpus must parse")
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn api(&self, name: &str) -> Option<&ApiDescriptor> {
        self.api_table.iter().find(|a| a.name == name)
    }

    /// Descriptor of the record's API. Parsing guarantees it exists.
    pub fn descriptor_for(&self, record: &FormulationRecord) -> Result<&ApiDescriptor> {
        self.api(&record.api_name).ok_or_else(|| Error::UnknownApi {
            row: 0,
            name: record.api_name.clone(),
        })
    }

    pub fn labeled_records(&self) -> Vec<usize> {
        labeled_records(self)
    }

    pub fn api_groups(&self) -> BTreeMap<String, Vec<usize>> {
        api_groups(self)
    }

    pub fn to_formulations_csv(&self) -> String {
        write_formulations(&self.records)
    }

    pub fn to_apis_csv(&self) -> String {
        let mut out = API_COLUMNS.join(",");
        out.push('\n');
        for api in &self.api_table {
            let row = [
                api.name.clone(),
                api.molecular_weight.to_string(),
                api.xlogp3.to_string(),
                api.hbond_donors.to_string(),
                api.hbond_acceptors.to_string(),
                api.rotatable_bonds.to_string(),
                api.tpsa.to_string(),
                api.heavy_atoms.to_string(),
                api.complexity.to_string(),
                api.logs.to_string(),
            ];
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Doses exceeding ten times the median of all positive doses recorded
    /// for the same API. Used by `ingest --strict`; the data is never edited.
    pub fn dose_warnings(&self) -> Vec<DoseWarning> {
        let mut warnings = Vec::new();
        for rows in self.api_groups().values() {
            let mut doses: Vec<f64> = rows
                .iter()
                .flat_map(|&i| record_doses(&self.records[i]))
                .map(|(_, d)| d)
                .filter(|&d| d > 0.0)
                .collect();
            if doses.is_empty() {
                continue;
            }
            doses.sort_by(f64::total_cmp);
            let median = median_sorted(&doses);
            for &i in rows {
                for (column, dose) in record_doses(&self.records[i]) {
                    if dose > 10.0 * median {
                        warnings.push(DoseWarning {
                            record: i,
                            column,
                            dose_mg: dose,
                            group_median_mg: median,
                        });
                    }
                }
            }
        }
        warnings.sort_by_key(|w| w.record);
        warnings
    }
}

fn record_doses(record: &FormulationRecord) -> Vec<(String, f64)> {
    let mut doses = vec![("api_dose_mg".to_string(), record.api_dose_mg)];
    for ((_, prefix), slot) in SLOT_LAYOUT.iter().zip(&record.slots) {
        if let Some(entry) = slot {
            doses.push((format!("{prefix}_mg"), entry.dose_mg));
        }
    }
    doses
}

fn median_sorted(values: &[f64]) -> f64 {
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Indices of records that carry a disintegration-time label, in order.
pub fn labeled_records(corpus: &Corpus) -> Vec<usize> {
    corpus
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_labeled())
        .map(|(i, _)| i)
        .collect()
}

/// Partition of all record indices by API name.
pub fn api_groups(corpus: &Corpus) -> BTreeMap<String, Vec<usize>> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, record) in corpus.records.iter().enumerate() {
        groups.entry(record.api_name.clone()).or_default().push(i);
    }
    groups
}

/// Parses a formulation table and its API descriptor table.
pub fn parse_corpus(formulation_csv: &str, api_csv: &str) -> Result<Corpus> {
    let api_table = parse_apis(api_csv)?;
    let records = parse_formulations(formulation_csv)?;
    for (i, record) in records.iter().enumerate() {
        if !api_table.iter().any(|a| a.name == record.api_name) {
            return Err(Error::UnknownApi {
                row: i + 1,
                name: record.api_name.clone(),
            });
        }
    }
    let excipient_vocab = ExcipientVocab::from_records(&records);
    Ok(Corpus {
        records,
        api_table,
        excipient_vocab,
    })
}

/// Data rows with their 1-based row numbers. A completely empty text has no
/// rows (and no header to check).
fn csv_rows(text: &str, expected: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let record = result.map_err(|e| Error::parse(i, "-", e.to_string()))?;
        if i == 0 {
            let header: Vec<&str> = record.iter().collect();
            if header != expected {
                return Err(Error::parse(
                    0,
                    "header",
                    format!("expected columns {}", expected.join(",")),
                ));
            }
            continue;
        }
        if record.len() != expected.len() {
            return Err(Error::parse(
                i,
                "-",
                format!(
                    "expected {} columns, found {}",
                    expected.len(),
                    record.len()
                ),
            ));
        }
        rows.push((i, record));
    }
    Ok(rows)
}

fn number(row: usize, column: &str, cell: &str) -> Result<f64> {
    let value: f64 = cell
        .parse()
        .map_err(|_| Error::parse(row, column, format!("`{cell}` is not a number")))?;
    if !value.is_finite() {
        return Err(Error::parse(row, column, "value must be finite"));
    }
    Ok(value)
}

fn optional_number(row: usize, column: &str, cell: &str) -> Result<Option<f64>> {
    if cell.is_empty() {
        Ok(None)
    } else {
        number(row, column, cell).map(Some)
    }
}

fn non_negative(row: usize, column: &str, value: f64) -> Result<f64> {
    if value < 0.0 {
        return Err(Error::parse(row, column, "value must be non-negative"));
    }
    Ok(value)
}

fn count(row: usize, column: &str, cell: &str) -> Result<u32> {
    cell.parse().map_err(|_| {
        Error::parse(
            row,
            column,
            format!("`{cell}` is not a non-negative integer"),
        )
    })
}

fn parse_apis(text: &str) -> Result<Vec<ApiDescriptor>> {
    let mut table: Vec<ApiDescriptor> = Vec::new();
    for (row, cells) in csv_rows(text, &API_COLUMNS)? {
        let c = |k: usize| &cells[k];
        let name = c(0).to_string();
        if name.is_empty() {
            return Err(Error::parse(row, "api_name", "empty name"));
        }
        if table.iter().any(|a| a.name == name) {
            return Err(Error::parse(
                row,
                "api_name",
                format!("duplicate API `{name}`"),
            ));
        }
        let molecular_weight = number(row, API_COLUMNS[1], c(1))?;
        if molecular_weight <= 0.0 {
            return Err(Error::parse(row, API_COLUMNS[1], "must be positive"));
        }
        table.push(ApiDescriptor {
            name,
            molecular_weight,
            xlogp3: number(row, API_COLUMNS[2], c(2))?,
            hbond_donors: count(row, API_COLUMNS[3], c(3))?,
            hbond_acceptors: count(row, API_COLUMNS[4], c(4))?,
            rotatable_bonds: count(row, API_COLUMNS[5], c(5))?,
            tpsa: number(row, API_COLUMNS[6], c(6))?,
            heavy_atoms: count(row, API_COLUMNS[7], c(7))?,
            complexity: number(row, API_COLUMNS[8], c(8))?,
            logs: number(row, API_COLUMNS[9], c(9))?,
        });
    }
    Ok(table)
}

/// Parses formulation rows on their own, without resolving API names.
/// `predict` uses this for rows whose label column may be blank.
pub fn parse_formulations(text: &str) -> Result<Vec<FormulationRecord>> {
    let mut records = Vec::new();
    for (row, cells) in csv_rows(text, &FORMULATION_COLUMNS)? {
        let api_name = cells[0].to_string();
        if api_name.is_empty() {
            return Err(Error::parse(row, "api_name", "empty name"));
        }
        let api_dose_mg = number(row, "api_dose_mg", &cells[1])?;
        if api_dose_mg <= 0.0 {
            return Err(Error::parse(row, "api_dose_mg", "must be positive"));
        }
        let mut slots: [Option<ExcipientEntry>; SLOT_COUNT] = Default::default();
        for (s, (category, prefix)) in SLOT_LAYOUT.iter().enumerate() {
            let name = &cells[2 + 2 * s];
            let dose = &cells[3 + 2 * s];
            let dose_column = format!("{prefix}_mg");
            slots[s] = match (name.is_empty(), dose.is_empty()) {
                (true, true) => None,
                (true, false) => {
                    return Err(Error::parse(
                        row,
                        &format!("{prefix}_name"),
                        "dose given without an excipient name",
                    ))
                }
                (false, _) => {
                    let dose_mg = if dose.is_empty() {
                        0.0
                    } else {
                        non_negative(row, &dose_column, number(row, &dose_column, dose)?)?
                    };
                    Some(ExcipientEntry {
                        category: *category,
                        name: name.to_string(),
                        dose_mg,
                    })
                }
            };
        }
        let opt = |k: usize| -> Result<Option<f64>> {
            optional_number(row, FORMULATION_COLUMNS[k], &cells[k])?
                .map(|v| non_negative(row, FORMULATION_COLUMNS[k], v))
                .transpose()
        };
        records.push(FormulationRecord {
            api_name,
            api_dose_mg,
            slots,
            hardness_n: opt(18)?,
            friability_pct: opt(19)?,
            thickness_mm: opt(20)?,
            punch_mm: opt(21)?,
            disintegration_time_sec: opt(22)?,
        });
    }
    Ok(records)
}

/// Serializes records in the `formulations.csv` layout.
pub fn write_formulations(records: &[FormulationRecord]) -> String {
    let mut out = FORMULATION_COLUMNS.join(",");
    out.push('\n');
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for record in records {
        let mut cells = vec![record.api_name.clone(), record.api_dose_mg.to_string()];
        for slot in &record.slots {
            match slot {
                Some(entry) => {
                    cells.push(entry.name.clone());
                    cells.push(entry.dose_mg.to_string());
                }
                None => {
                    cells.push(String::new());
                    cells.push(String::new());
                }
            }
        }
        for v in record.manufacture_parameters() {
            cells.push(opt(v));
        }
        cells.push(opt(record.disintegration_time_sec));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        FORMULATION_COLUMNS.join(",")
    }

    const APIS: &str = "api_name,molecular_weight,xlogp3,hbond_donors,hbond_acceptors,rotatable_bonds,tpsa,heavy_atoms,complexity,logs\n\
        A,100,1,1,2,3,40,10,100,-2\n\
        B,200,2,0,1,1,20,15,150,-3\n";

    fn row(api: &str, label: &str) -> String {
        format!("{api},10,Mannitol,50,,,,,CC-Na,5,,,Mg stearate,1,,,,,40,0.5,,8,{label}")
    }

    #[test]
    fn first_mirtazapine_row() {
        let corpus = Corpus::bundled();
        let r = &corpus.records[0];
        assert_eq!(r.api_name, "Mirtazapine");
        assert_eq!(r.api_dose_mg, 45.0);
        let filler = r.slots[0].as_ref().unwrap();
        assert_eq!((filler.name.as_str(), filler.dose_mg), ("Mannitol", 285.0));
        let binder = r.slots[2].as_ref().unwrap();
        assert_eq!((binder.name.as_str(), binder.dose_mg), ("PVP", 195.0));
        let disint = r.slots[3].as_ref().unwrap();
        assert_eq!((disint.name.as_str(), disint.dose_mg), ("CC-Na", 25.0));
        assert!(r
            .excipients()
            .any(|e| e.name == "Mg stearate" && e.dose_mg == 10.0));
        assert_eq!(r.hardness_n, Some(53.0));
        assert_eq!(r.friability_pct, Some(0.56));
        assert_eq!(r.thickness_mm, Some(4.76));
        assert_eq!(r.punch_mm, None);
        assert_eq!(r.disintegration_time_sec, Some(30.0));
    }

    #[test]
    fn meloxicam_row_is_unlabeled() {
        let corpus = Corpus::bundled();
        let meloxicam: Vec<_> = corpus
            .records
            .iter()
            .filter(|r| r.api_name == "Meloxicam")
            .collect();
        assert_eq!(meloxicam.len(), 1);
        assert_eq!(meloxicam[0].disintegration_time_sec, None);
    }

    #[test]
    fn bundled_counts() {
        let corpus = Corpus::bundled();
        assert_eq!(corpus.len(), 145);
        // Meloxicam is the single unlabeled row.
        assert_eq!(corpus.labeled_records().len(), 144);
        // The table spells out 26 API names (Paracetamol and Acetaminophen
        // are listed separately).
        assert_eq!(corpus.api_groups().len(), 26);
    }

    #[test]
    fn header_only_is_empty_corpus() {
        let corpus = parse_corpus(&format!("{}\n", header()), APIS).unwrap();
        assert!(corpus.is_empty());
        assert!(corpus.labeled_records().is_empty());
    }

    #[test]
    fn labeled_subset() {
        let text = format!(
            "{}\n{}\n{}\n{}\n",
            header(),
            row("A", "30"),
            row("A", ""),
            row("B", "12")
        );
        let corpus = parse_corpus(&text, APIS).unwrap();
        assert_eq!(corpus.labeled_records(), vec![0, 2]);
    }

    #[test]
    fn all_labeled_is_identity() {
        let text = format!("{}\n{}\n{}\n", header(), row("A", "30"), row("B", "12"));
        let corpus = parse_corpus(&text, APIS).unwrap();
        assert_eq!(corpus.labeled_records(), vec![0, 1]);
    }

    #[test]
    fn groups_partition_records() {
        let text = format!(
            "{}\n{}\n{}\n{}\n",
            header(),
            row("A", "1"),
            row("A", "2"),
            row("B", "3")
        );
        let corpus = parse_corpus(&text, APIS).unwrap();
        let groups = corpus.api_groups();
        assert_eq!(groups["A"], vec![0, 1]);
        assert_eq!(groups["B"], vec![2]);

        let single = parse_corpus(&format!("{}\n{}\n", header(), row("B", "3")), APIS).unwrap();
        assert_eq!(single.api_groups().len(), 1);
        assert_eq!(single.api_groups()["B"], vec![0]);
    }

    #[test]
    fn blank_dose_is_zero_and_blank_parameters_absent() {
        let text = format!("{}\nA,10,Mannitol,,,,,,,,,,,,,,,,,,,,5\n", header());
        let corpus = parse_corpus(&text, APIS).unwrap();
        let r = &corpus.records[0];
        assert_eq!(r.slots[0].as_ref().unwrap().dose_mg, 0.0);
        assert_eq!(r.manufacture_parameters(), [None; 4]);
        assert_eq!(r.disintegration_time_sec, Some(5.0));
    }

    #[test]
    fn wrong_column_count_names_row() {
        let text = format!("{}\n{}\nA,10,Mannitol\n", header(), row("A", "1"));
        match parse_corpus(&text, APIS) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_dose_names_row_and_column() {
        let text = format!(
            "{}\n{}\n",
            header(),
            row("A", "1").replace(",50,", ",fifty,")
        );
        match parse_corpus(&text, APIS) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "filler1_mg");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_api_is_resolution_error() {
        let text = format!("{}\n{}\n", header(), row("Z", "1"));
        assert!(matches!(
            parse_corpus(&text, APIS),
            Err(Error::UnknownApi { row: 1, .. })
        ));
    }

    #[test]
    fn negative_label_rejected() {
        let text = format!("{}\n{}\n", header(), row("A", "-3"));
        assert!(matches!(
            parse_corpus(&text, APIS),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn vocab_in_first_appearance_order() {
        let corpus = Corpus::bundled();
        let fillers = corpus.excipient_vocab.names(ExcipientCategory::Filler);
        assert_eq!(fillers, ["Mannitol", "MCC", "Sucralose", "Lactose"]);
        let lubricants = corpus.excipient_vocab.names(ExcipientCategory::Lubricant);
        assert_eq!(lubricants, ["Aerosil", "Mg stearate"]);
    }

    #[test]
    fn strict_check_flags_risperidone_aerosil() {
        let corpus = Corpus::bundled();
        let warnings = corpus.dose_warnings();
        assert!(warnings
            .iter()
            .any(|w| corpus.records[w.record].api_name == "Risperidone"
                && w.column == "lubricant1_mg"));
    }

    #[test]
    fn bundled_round_trip() {
        let corpus = Corpus::bundled();
        let again = parse_corpus(&corpus.to_formulations_csv(), &corpus.to_apis_csv()).unwrap();
        assert_eq!(corpus, again);
    }
}
