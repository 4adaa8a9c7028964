//! Bundled example data: 1930 per-capita cigarette consumption against 1950
//! lung-cancer deaths per million, eleven countries.

use crate::data::Dataset;
use crate::linalg::Matrix;

pub const CIGARETTE: [(&str, f64, f64); 11] = [
    ("Australia", 480.0, 180.0),
    ("Canada", 500.0, 150.0),
    ("Denmark", 380.0, 170.0),
    ("Finland", 1100.0, 350.0),
    ("GreatBritain", 1100.0, 460.0),
    ("Iceland", 230.0, 60.0),
    ("Netherlands", 490.0, 240.0),
    ("Norway", 250.0, 90.0),
    ("Sweden", 300.0, 110.0),
    ("Switzerland", 510.0, 250.0),
    ("USA", 1300.0, 200.0),
];

/// Row of the USA observation.
pub const USA_ROW: usize = 10;

pub fn cigarette() -> Dataset {
    let x = Matrix::from_row_major(11, 1, CIGARETTE.iter().map(|r| r.1).collect()).expect("11 x 1");
    let y = CIGARETTE.iter().map(|r| r.2).collect();
    Dataset::with_names(x, y, true, vec!["consumption".into()], "deaths".into())
        .expect("bundled data is valid")
}

/// The bundled table as CSV with a country column.
pub fn cigarette_csv() -> String {
    let mut s = String::from("country,consumption,deaths\n");
    for (c, x, y) in CIGARETTE {
        s.push_str(&format!("{c},{x},{y}\n"));
    }
    s
}
