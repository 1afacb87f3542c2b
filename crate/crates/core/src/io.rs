//! JSON file formats for lattices, sublattice pairs, and verification
//! suites, plus the complex and matrix literals the command line accepts.
//! Parse failures carry line/column positions; semantic validation (even-
//! ness, positive definiteness, embedding compatibility) happens in the
//! constructors the parsed data feeds into.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use crate::branching::SublatticePair;
use crate::error::{Error, Result};
use crate::kernels::SiegelPoint;
use crate::lattice::IntegralLattice;
use crate::verify::{
    BranchingSection, CharacterSection, CoverageSection, DiagonalSection, DualPairSection,
    InsertionSection, ModularSection, NamedPair, PoissonSection, PrefactorMatrixSection,
    PrefactorScalarSection, SiegelSection, Sl2Matrix, SuiteConfig,
};

/// Names of the lattices compiled into the binary, usable anywhere a
/// lattice file path is accepted.
pub const BUNDLED_LATTICE_NAMES: [&str; 4] = ["a1", "two-i2", "glue", "e8"];
/// Names of the sublattice pairs compiled into the binary.
pub const BUNDLED_PAIR_NAMES: [&str; 2] = ["orthogonal-split", "glued-split"];

const BUNDLED_LATTICES: [(&str, &str); 4] = [
    ("a1", include_str!("../data/lattices/a1.json")),
    ("two-i2", include_str!("../data/lattices/two-i2.json")),
    ("glue", include_str!("../data/lattices/glue.json")),
    ("e8", include_str!("../data/lattices/e8.json")),
];

const BUNDLED_PAIRS: [(&str, &str); 2] = [
    ("orthogonal-split", include_str!("../data/pairs/orthogonal-split.json")),
    ("glued-split", include_str!("../data/pairs/glued-split.json")),
];

const DEFAULT_SUITE: &str = include_str!("../data/suites/default.json");

// ---------------------------------------------------------------------------
// File schemas
// ---------------------------------------------------------------------------

/// A lattice file: `{"name": ..., "gram": [[...], ...]}` with an integer
/// Gram matrix.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeFile {
    pub name: String,
    pub gram: Vec<Vec<i64>>,
}

/// A sublattice pair file: the lattice schema extended with the two parts
/// and their embeddings (rows = part basis vectors, written in the full
/// lattice basis).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairFile {
    pub name: String,
    pub gram: Vec<Vec<i64>>,
    pub part1: LatticeFile,
    pub embedding1: Vec<Vec<i64>>,
    pub part2: LatticeFile,
    pub embedding2: Vec<Vec<i64>>,
}

fn default_eval_tolerance() -> f64 {
    crate::verify::DEFAULT_EVAL_TOL
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoissonFile {
    lattice: String,
    taus: Vec<[f64; 2]>,
    tolerance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CharacterFile {
    lattices: Vec<String>,
    gammas: Vec<Sl2Matrix>,
    taus: Vec<[f64; 2]>,
    tolerance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagonalFile {
    lattices: Vec<String>,
    gamma: Sl2Matrix,
    tau_pairs: Vec<[[f64; 2]; 2]>,
    tolerance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiegelFile {
    lattice: String,
    points: Vec<Vec<Vec<[f64; 2]>>>,
    tolerance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrefactorScalarFile {
    lattice: String,
    taus: Vec<[f64; 2]>,
    tolerance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrefactorMatrixFile {
    lattice: String,
    points: Vec<Vec<Vec<[f64; 2]>>>,
    tolerance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DualPairSampleFile {
    lattice: String,
    point: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DualPairFile {
    samples: Vec<DualPairSampleFile>,
    tolerance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InsertionSampleFile {
    lattice: String,
    taus: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InsertionFile {
    samples: Vec<InsertionSampleFile>,
    tolerance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModularFile {
    lattices: Vec<String>,
    agreement_tolerance: f64,
    relation_tolerance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchingFile {
    pairs: Vec<String>,
    tolerance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoverageFile {
    pair: String,
    taus: Vec<[f64; 2]>,
    tolerance: f64,
}

/// The suite file: a pool of lattices and pairs, an inner evaluation
/// tolerance, and one sample section per check. Complex numbers are
/// `[re, im]` pairs and Siegel points are row-major matrices of them.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    lattices: Vec<LatticeFile>,
    pairs: Vec<PairFile>,
    #[serde(default = "default_eval_tolerance")]
    eval_tolerance: f64,
    poisson: PoissonFile,
    character: CharacterFile,
    diagonal: DiagonalFile,
    siegel: SiegelFile,
    prefactor_scalar: PrefactorScalarFile,
    prefactor_matrix: PrefactorMatrixFile,
    dual_pair: DualPairFile,
    insertion: InsertionFile,
    modular: ModularFile,
    branching: BranchingFile,
    coverage: CoverageFile,
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// 1-based line/column of the first occurrence of a JSON key, so shape
/// errors serde cannot express still point into the document.
fn position_of_key(text: &str, key: &str) -> (usize, usize) {
    let needle = format!("\"{key}\"");
    match text.find(&needle) {
        Some(byte) => {
            let prefix = &text[..byte];
            let line = prefix.matches('\n').count() + 1;
            let column = byte - prefix.rfind('\n').map(|p| p + 1).unwrap_or(0) + 1;
            (line, column)
        }
        None => (1, 1),
    }
}

fn require_square(text: &str, key: &str, gram: &[Vec<i64>]) -> Result<()> {
    let n = gram.len();
    if n == 0 || gram.iter().any(|row| row.len() != n) {
        let (line, column) = position_of_key(text, key);
        let shape: Vec<usize> = gram.iter().map(|row| row.len()).collect();
        return Err(Error::Parse {
            line,
            column,
            message: format!("gram matrix must be square and nonempty, got {n} rows of lengths {shape:?}"),
        });
    }
    Ok(())
}

/// Parses and validates a lattice file.
pub fn parse_lattice(text: &str) -> Result<IntegralLattice> {
    let file: LatticeFile = parse_json(text)?;
    require_square(text, "gram", &file.gram)?;
    IntegralLattice::new(file.name, file.gram)
}

fn lattice_of(file: LatticeFile) -> Result<IntegralLattice> {
    IntegralLattice::new(file.name, file.gram)
}

/// Parses and validates a sublattice pair file, returning its name and the
/// constructed pair.
pub fn parse_pair(text: &str) -> Result<NamedPair> {
    let file: PairFile = parse_json(text)?;
    require_square(text, "gram", &file.gram)?;
    pair_of(file)
}

fn pair_of(file: PairFile) -> Result<NamedPair> {
    let full = IntegralLattice::new(file.name.clone(), file.gram)?;
    let part1 = lattice_of(file.part1)?;
    let part2 = lattice_of(file.part2)?;
    let pair = SublatticePair::new(full, part1, file.embedding1, part2, file.embedding2)?;
    Ok(NamedPair { name: file.name, pair })
}

fn complex_of(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

fn taus_of(vs: &[[f64; 2]]) -> Vec<Complex64> {
    vs.iter().map(|&v| complex_of(v)).collect()
}

fn point_of(rows: &[Vec<[f64; 2]>]) -> Result<SiegelPoint> {
    let entries = rows
        .iter()
        .map(|row| row.iter().map(|&v| complex_of(v)).collect())
        .collect();
    SiegelPoint::new(entries)
}

fn points_of(list: &[Vec<Vec<[f64; 2]>>]) -> Result<Vec<SiegelPoint>> {
    list.iter().map(|rows| point_of(rows)).collect()
}

/// Parses and validates a full suite file.
pub fn parse_suite(text: &str) -> Result<SuiteConfig> {
    let file: SuiteFile = parse_json(text)?;
    for lattice in &file.lattices {
        require_square(text, "gram", &lattice.gram)?;
    }
    let lattices: Vec<IntegralLattice> =
        file.lattices.into_iter().map(lattice_of).collect::<Result<_>>()?;
    let pairs: Vec<NamedPair> = file.pairs.into_iter().map(pair_of).collect::<Result<_>>()?;

    let config = SuiteConfig {
        lattices,
        pairs,
        eval_tolerance: file.eval_tolerance,
        poisson: PoissonSection {
            lattice: file.poisson.lattice,
            taus: taus_of(&file.poisson.taus),
            tolerance: file.poisson.tolerance,
        },
        character: CharacterSection {
            lattices: file.character.lattices,
            gammas: file.character.gammas,
            taus: taus_of(&file.character.taus),
            tolerance: file.character.tolerance,
        },
        diagonal: DiagonalSection {
            lattices: file.diagonal.lattices,
            gamma: file.diagonal.gamma,
            tau_pairs: file
                .diagonal
                .tau_pairs
                .iter()
                .map(|p| [complex_of(p[0]), complex_of(p[1])])
                .collect(),
            tolerance: file.diagonal.tolerance,
        },
        siegel: SiegelSection {
            lattice: file.siegel.lattice,
            points: points_of(&file.siegel.points)?,
            tolerance: file.siegel.tolerance,
        },
        prefactor_scalar: PrefactorScalarSection {
            lattice: file.prefactor_scalar.lattice,
            taus: taus_of(&file.prefactor_scalar.taus),
            tolerance: file.prefactor_scalar.tolerance,
        },
        prefactor_matrix: PrefactorMatrixSection {
            lattice: file.prefactor_matrix.lattice,
            points: points_of(&file.prefactor_matrix.points)?,
            tolerance: file.prefactor_matrix.tolerance,
        },
        dual_pair: DualPairSection {
            samples: file
                .dual_pair
                .samples
                .iter()
                .map(|s| Ok((s.lattice.clone(), point_of(&s.point)?)))
                .collect::<Result<_>>()?,
            tolerance: file.dual_pair.tolerance,
        },
        insertion: InsertionSection {
            samples: file
                .insertion
                .samples
                .iter()
                .map(|s| (s.lattice.clone(), taus_of(&s.taus)))
                .collect(),
            tolerance: file.insertion.tolerance,
        },
        modular: ModularSection {
            lattices: file.modular.lattices,
            agreement_tolerance: file.modular.agreement_tolerance,
            relation_tolerance: file.modular.relation_tolerance,
        },
        branching: BranchingSection {
            pairs: file.branching.pairs,
            tolerance: file.branching.tolerance,
        },
        coverage: CoverageSection {
            pair: file.coverage.pair,
            taus: taus_of(&file.coverage.taus),
            tolerance: file.coverage.tolerance,
        },
    };

    // Fail on dangling references now rather than mid-run.
    config.lattice(&config.poisson.lattice)?;
    for name in config
        .character
        .lattices
        .iter()
        .chain(&config.diagonal.lattices)
        .chain(&config.modular.lattices)
    {
        config.lattice(name)?;
    }
    config.lattice(&config.siegel.lattice)?;
    config.lattice(&config.prefactor_scalar.lattice)?;
    config.lattice(&config.prefactor_matrix.lattice)?;
    for (name, _) in &config.dual_pair.samples {
        config.lattice(name)?;
    }
    for (name, _) in &config.insertion.samples {
        config.lattice(name)?;
    }
    for name in &config.branching.pairs {
        config.pair(name)?;
    }
    config.pair(&config.coverage.pair)?;

    Ok(config)
}

// ---------------------------------------------------------------------------
// Loading (file path or bundled name)
// ---------------------------------------------------------------------------

fn read_file(path: &str) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {path}: {e}")))
}

/// Loads a lattice from a file path, or from the compiled-in set when the
/// argument is one of `BUNDLED_LATTICE_NAMES`.
pub fn load_lattice(spec: &str) -> Result<IntegralLattice> {
    if Path::new(spec).is_file() {
        return parse_lattice(&read_file(spec)?);
    }
    if let Some((_, text)) = BUNDLED_LATTICES.iter().find(|(n, _)| *n == spec) {
        return parse_lattice(text);
    }
    Err(Error::InvalidInput(format!(
        "no such file, and no bundled lattice named {spec:?} (bundled: {})",
        BUNDLED_LATTICE_NAMES.join(", ")
    )))
}

/// Loads a sublattice pair from a file path or from `BUNDLED_PAIR_NAMES`.
pub fn load_pair(spec: &str) -> Result<NamedPair> {
    if Path::new(spec).is_file() {
        return parse_pair(&read_file(spec)?);
    }
    if let Some((_, text)) = BUNDLED_PAIRS.iter().find(|(n, _)| *n == spec) {
        return parse_pair(text);
    }
    Err(Error::InvalidInput(format!(
        "no such file, and no bundled pair named {spec:?} (bundled: {})",
        BUNDLED_PAIR_NAMES.join(", ")
    )))
}

/// Loads a suite configuration from a file path; `"default"` (or a missing
/// argument upstream) selects the compiled-in suite.
pub fn load_suite(spec: &str) -> Result<SuiteConfig> {
    if spec == "default" {
        return default_suite();
    }
    if Path::new(spec).is_file() {
        return parse_suite(&read_file(spec)?);
    }
    Err(Error::InvalidInput(format!("no such suite file: {spec}")))
}

/// The compiled-in verification suite covering every bundled lattice and
/// pair.
pub fn default_suite() -> Result<SuiteConfig> {
    parse_suite(DEFAULT_SUITE)
}

// ---------------------------------------------------------------------------
// Command-line literals
// ---------------------------------------------------------------------------

fn parse_signed_imag(text: &str, original: &str) -> Result<f64> {
    match text {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        _ => text.parse().map_err(|_| {
            Error::InvalidInput(format!("cannot parse complex number {original:?}"))
        }),
    }
}

/// Parses a complex literal: `1.5`, `2i`, `-i`, `1+2i`, `0.3-0.7i`, with
/// scientific notation allowed in either part.
pub fn parse_complex(text: &str) -> Result<Complex64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || Error::InvalidInput(format!("cannot parse complex number {text:?}"));
    if s.is_empty() {
        return Err(err());
    }
    match s.strip_suffix('i') {
        Some(body) => {
            let bytes = body.as_bytes();
            let mut split = None;
            for k in (1..bytes.len()).rev() {
                let c = bytes[k] as char;
                if (c == '+' || c == '-') && !matches!(bytes[k - 1] as char, 'e' | 'E') {
                    split = Some(k);
                    break;
                }
            }
            match split {
                Some(k) => {
                    let re: f64 = body[..k].parse().map_err(|_| err())?;
                    let im = parse_signed_imag(&body[k..], text)?;
                    Ok(Complex64::new(re, im))
                }
                None => Ok(Complex64::new(0.0, parse_signed_imag(body, text)?)),
            }
        }
        None => Ok(Complex64::new(s.parse().map_err(|_| err())?, 0.0)),
    }
}

/// Parses a Siegel point literal: rows separated by `;`, entries by `,`,
/// each entry a complex literal; brackets are ignored, so
/// `[[2i, 0.5i]; [0.5i, i]]` and `2i,0.5i;0.5i,i` read the same.
pub fn parse_point_matrix(text: &str) -> Result<SiegelPoint> {
    let cleaned: String = text.chars().filter(|c| *c != '[' && *c != ']').collect();
    let rows: Vec<Vec<Complex64>> = cleaned
        .split(';')
        .map(|row| row.split(',').map(parse_complex).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let n = rows.len();
    if rows.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidInput(format!(
            "matrix literal must be square, got row lengths {:?}",
            rows.iter().map(|r| r.len()).collect::<Vec<_>>()
        )));
    }
    SiegelPoint::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_lattices_parse_and_validate() {
        for name in BUNDLED_LATTICE_NAMES {
            let l = load_lattice(name).unwrap();
            assert_eq!(l.name(), name);
        }
        assert_eq!(load_lattice("e8").unwrap().rank(), 8);
        assert_eq!(load_lattice("glue").unwrap().discriminant_group().order(), 4);
    }

    #[test]
    fn bundled_pairs_parse_and_validate() {
        for name in BUNDLED_PAIR_NAMES {
            let named = load_pair(name).unwrap();
            assert_eq!(named.name, name);
            assert_eq!(named.pair.full().rank(), 2);
        }
        assert_eq!(load_pair("glued-split").unwrap().pair.glue_index(), 2);
    }

    #[test]
    fn unknown_specs_are_rejected() {
        assert!(load_lattice("no-such-lattice").is_err());
        assert!(load_pair("no-such-pair").is_err());
        assert!(load_suite("/definitely/not/a/file.json").is_err());
    }

    #[test]
    fn default_suite_parses_with_resolved_references() {
        let config = default_suite().unwrap();
        assert_eq!(config.lattices.len(), 4);
        assert_eq!(config.pairs.len(), 2);
        assert_eq!(config.siegel.points.len(), 5);
        assert_eq!(config.dual_pair.samples.len(), 3);
        assert!(config.lattice("e8").is_ok());
        assert!(config.pair("glued-split").is_ok());
        assert_eq!(config.eval_tolerance, 1e-12);
        assert_eq!(config.poisson.tolerance, 1e-10);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_lattice("{\n  \"name\": \"x\",\n  \"gram\": [[2,]\n}").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert!(line >= 3),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_integer_entries_carry_positions() {
        let err = parse_lattice("{\"name\": \"x\", \"gram\": [[2.5]]}").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "got {err:?}");
    }

    #[test]
    fn non_square_grams_point_at_the_gram_key() {
        let text = "{\n  \"name\": \"x\",\n  \"gram\": [[2, 0], [0]]\n}";
        match parse_lattice(text).unwrap_err() {
            Error::Parse { line, column, message } => {
                assert_eq!((line, column), (3, 3));
                assert!(message.contains("square"), "{message}");
            }
            other => panic!("expected a positioned error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = parse_lattice("{\"name\": \"x\", \"gram\": [[2]], \"extra\": 1}").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn odd_or_indefinite_lattices_fail_validation() {
        assert!(matches!(
            parse_lattice("{\"name\": \"x\", \"gram\": [[3]]}"),
            Err(Error::NotEven { .. })
        ));
        assert!(matches!(
            parse_lattice("{\"name\": \"x\", \"gram\": [[-2]]}"),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn complex_literals_parse() {
        let cases = [
            ("1.5", Complex64::new(1.5, 0.0)),
            ("2i", Complex64::new(0.0, 2.0)),
            ("i", Complex64::new(0.0, 1.0)),
            ("-i", Complex64::new(0.0, -1.0)),
            ("1+2i", Complex64::new(1.0, 2.0)),
            ("0.3-0.7i", Complex64::new(0.3, -0.7)),
            ("1e-2+2e-1i", Complex64::new(0.01, 0.2)),
            (" 0.5 + 1.25i ", Complex64::new(0.5, 1.25)),
            ("-1.5e-3i", Complex64::new(0.0, -0.0015)),
        ];
        for (text, want) in cases {
            let got = parse_complex(text).unwrap();
            assert_eq!(got, want, "literal {text:?}");
        }
        for bad in ["", "abc", "1+2j", "i2", "1++2i"] {
            assert!(parse_complex(bad).is_err(), "literal {bad:?} should fail");
        }
    }

    #[test]
    fn matrix_literals_parse_to_validated_points() {
        let p = parse_point_matrix("[[2i, 0.5i]; [0.5i, i]]").unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.entry(0, 1), Complex64::new(0.0, 0.5));
        assert!(parse_point_matrix("2i, 0.5i; 0.5i").is_err());
        // Imaginary part must be positive definite.
        assert!(parse_point_matrix("[[-i]]").is_err());
    }

    #[test]
    fn files_load_from_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lattice.json");
        fs::write(&path, "{\"name\": \"disk\", \"gram\": [[2]]}").unwrap();
        let l = load_lattice(path.to_str().unwrap()).unwrap();
        assert_eq!(l.name(), "disk");
    }
}
