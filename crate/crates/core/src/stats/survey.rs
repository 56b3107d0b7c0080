use std::collections::BTreeMap;
use std::fmt::Write;
use std::io::Read;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{format_p, wilcoxon_one_sample, StatsError, TestResult};

/// Neutral point of a 1-5 Likert scale.
pub const NEUTRAL: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct QuestionSummary {
    pub n: usize,
    pub median: f64,
    /// Counts of ratings 1 through 5.
    pub distribution: [usize; 5],
    /// `None` when every rating is neutral.
    pub test: Option<TestResult<f64>>,
}

pub type SurveySummary = BTreeMap<String, QuestionSummary>;

pub fn summarize_survey(responses: &BTreeMap<String, Vec<u8>>) -> Result<SurveySummary, StatsError> {
    let mut out = BTreeMap::new();
    for (question, ratings) in responses {
        if ratings.is_empty() {
            return Err(StatsError::EmptyQuestion(question.clone()));
        }
        let mut distribution = [0usize; 5];
        for &r in ratings {
            if !(1..=5).contains(&r) {
                return Err(StatsError::RatingOutOfRange { question: question.clone(), rating: r.into() });
            }
            distribution[usize::from(r - 1)] += 1;
        }
        let values: Vec<f64> = ratings.iter().map(|&r| f64::from(r)).collect();
        let test = match wilcoxon_one_sample(&values, NEUTRAL) {
            Ok(t) => Some(t),
            Err(StatsError::AllZeroDifferences) => None,
            Err(e) => return Err(e),
        };
        out.insert(question.clone(), QuestionSummary { n: ratings.len(), median: median(&values), distribution, test });
    }
    Ok(out)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("ratings are finite"));
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}

#[derive(Debug, Deserialize)]
struct RatingRow {
    question: String,
    rating: i64,
}

/// Reads `question,rating` rows (with a header line).
pub fn parse_ratings_csv<R: Read>(reader: R) -> Result<BTreeMap<String, Vec<u8>>, StatsError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    for row in csv.deserialize::<RatingRow>() {
        let row = row.map_err(|e| StatsError::Input(e.to_string()))?;
        let rating = u8::try_from(row.rating)
            .ok()
            .filter(|r| (1..=5).contains(r))
            .ok_or(StatsError::RatingOutOfRange { question: row.question.clone(), rating: row.rating })?;
        out.entry(row.question).or_default().push(rating);
    }
    Ok(out)
}

pub fn format_summary_table(summary: &SurveySummary) -> String {
    let width = summary.keys().map(|q| q.len()).max().unwrap_or(8).max(8);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>3}  {:>6}  {:<19}  {:>6}  {:>7}  {:>8}",
        "question", "n", "median", "dist(1/2/3/4/5)", "W+", "z", "p"
    );
    for (q, s) in summary {
        let dist = s.distribution.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("/");
        let (w, z, p) = match &s.test {
            Some(t) => (format!("{}", t.w_plus), format!("{:.3}", t.z), format_p(t.p_two_sided)),
            None => ("-".into(), "-".into(), "-".into()),
        };
        let _ = writeln!(out, "{q:<width$}  {:>3}  {:>6}  {dist:<19}  {w:>6}  {z:>7}  {p:>8}", s.n, s.median);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(question: &str, ratings: &[u8]) -> BTreeMap<String, Vec<u8>> {
        BTreeMap::from([(question.to_string(), ratings.to_vec())])
    }

    #[test]
    fn accuracy_median_and_distribution() {
        let s = summarize_survey(&one("accuracy", &[4, 4, 4, 4, 4, 4, 5, 5, 5, 5])).unwrap();
        let q = &s["accuracy"];
        assert_eq!(q.median, 4.0);
        assert_eq!(q.distribution, [0, 0, 0, 6, 4]);
        assert_eq!(q.distribution.iter().sum::<usize>(), q.n);
        assert_eq!(q.test.unwrap().w_plus, 55.0);
    }

    #[test]
    fn even_count_uses_midpoint() {
        let s = summarize_survey(&one("vs_other_llms", &[5, 5, 5, 4, 4, 4])).unwrap();
        assert_eq!(s["vs_other_llms"].median, 4.5);
    }

    #[test]
    fn errors() {
        assert_eq!(
            summarize_survey(&one("q", &[4, 7])),
            Err(StatsError::RatingOutOfRange { question: "q".into(), rating: 7 })
        );
        assert_eq!(summarize_survey(&one("q", &[])), Err(StatsError::EmptyQuestion("q".into())));
        assert!(summarize_survey(&one("q", &[3, 3])).unwrap()["q"].test.is_none());
    }

    #[test]
    fn csv_input() {
        let text = "question,rating\naccuracy,4\naccuracy, 5\nuseful,3\n";
        let parsed = parse_ratings_csv(text.as_bytes()).unwrap();
        assert_eq!(parsed["accuracy"], vec![4, 5]);
        assert_eq!(parsed["useful"], vec![3]);
        let bad = "question,rating\naccuracy,9\n";
        assert!(matches!(parse_ratings_csv(bad.as_bytes()), Err(StatsError::RatingOutOfRange { .. })));
        let table = format_summary_table(&summarize_survey(&parsed).unwrap());
        assert!(table.starts_with("question"));
        assert_eq!(table.lines().count(), 3);
    }
}
