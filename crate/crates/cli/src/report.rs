//! The solution report shared by `solve` and `sweep`.

use serde::Serialize;

use recgame_core::bargaining::{self, BargainingSolution};
use recgame_core::game::Thresholds;
use recgame_core::payoffs::UnitGains;
use recgame_core::scenario::ScenarioFile;

use crate::{build_model, Failure};

#[derive(Debug, Clone, Serialize)]
pub struct Solved {
    pub case: String,
    pub case_description: String,
    pub community_formed: bool,
    pub beta_star: f64,
    pub y_h: f64,
    pub y_b: f64,
    pub j_h: f64,
    pub j_b: f64,
    pub d_h: f64,
    pub d_b: f64,
    pub nash_product: f64,
    pub g_h: f64,
    pub g_b: f64,
    pub thresholds: Thresholds,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alternative_beta: Option<f64>,
}

impl Solved {
    fn new(solution: &BargainingSolution, gains: UnitGains, thresholds: Thresholds) -> Self {
        Self {
            case: solution.outcome.case.id(),
            case_description: solution.outcome.case.to_string(),
            community_formed: solution.community_formed,
            beta_star: solution.beta_star,
            y_h: solution.outcome.installs.y_h,
            y_b: solution.outcome.installs.y_b,
            j_h: solution.j_h_star,
            j_b: solution.j_b_star,
            d_h: solution.d_h,
            d_b: solution.d_b,
            nash_product: solution.nash_product,
            g_h: gains.g_h,
            g_b: gains.g_b,
            thresholds,
            alternative_beta: solution.alternative_beta,
        }
    }

    /// Values of [`SOLUTION_COLUMNS`], in order.
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.case.clone(),
            self.community_formed.to_string(),
            self.beta_star.to_string(),
            self.y_h.to_string(),
            self.y_b.to_string(),
            self.j_h.to_string(),
            self.j_b.to_string(),
            self.d_h.to_string(),
            self.d_b.to_string(),
            self.nash_product.to_string(),
            self.g_h.to_string(),
            self.g_b.to_string(),
        ]
    }
}

pub const SOLUTION_COLUMNS: [&str; 12] = [
    "case",
    "community_formed",
    "beta_star",
    "y_h",
    "y_b",
    "j_h",
    "j_b",
    "d_h",
    "d_b",
    "nash_product",
    "g_h",
    "g_b",
];

pub fn solve(file: &ScenarioFile) -> Result<Solved, Failure> {
    let model = build_model(file)?;
    let cfg = file
        .bargaining_config()
        .map_err(|e| Failure::Input(e.to_string()))?;
    let solution =
        bargaining::solve_bargaining(&model, &cfg).map_err(|e| Failure::Solver(e.to_string()))?;
    Ok(Solved::new(&solution, model.gains, model.thresholds))
}

pub fn to_json(solved: &Solved) -> String {
    let mut text = serde_json::to_string_pretty(solved).expect("report is serializable");
    text.push('\n');
    text
}

pub fn to_csv(solved: &Solved) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SOLUTION_COLUMNS).expect("in-memory write");
    w.write_record(solved.fields()).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv is utf-8")
}
