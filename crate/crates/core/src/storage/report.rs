//! Report documents and their fixed-width text rendering.

use serde::{Deserialize, Serialize};

use super::StorageError;
use crate::analytics::{percent, DistributionStats, MilestoneTable, OutcomeTable, StationaritySplit};
use crate::clock::Clock;
use crate::transcript::Seat;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderHints {
    /// Decimal places for action percentages.
    pub percent_decimals: u32,
    /// Decimal places for tie rates.
    pub tie_decimals: u32,
}

impl Default for RenderHints {
    fn default() -> Self {
        RenderHints {
            percent_decimals: 0,
            tie_decimals: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportBlock {
    Distribution { label: String, stats: DistributionStats },
    Stationarity { label: String, split: StationaritySplit },
    Outcomes { label: String, table: OutcomeTable },
    Milestones { label: String, table: MilestoneTable },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Distribution,
    Stationarity,
    Outcomes,
    Milestones,
}

impl TableKind {
    pub const ALL: [TableKind; 4] = [
        TableKind::Distribution,
        TableKind::Stationarity,
        TableKind::Outcomes,
        TableKind::Milestones,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TableKind::Distribution => "distribution",
            TableKind::Stationarity => "stationarity",
            TableKind::Outcomes => "outcomes",
            TableKind::Milestones => "milestones",
        }
    }

    fn matches(self, block: &ReportBlock) -> bool {
        matches!(
            (self, block),
            (TableKind::Distribution, ReportBlock::Distribution { .. })
                | (TableKind::Stationarity, ReportBlock::Stationarity { .. })
                | (TableKind::Outcomes, ReportBlock::Outcomes { .. })
                | (TableKind::Milestones, ReportBlock::Milestones { .. })
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub experiment_id: String,
    pub generated_at: String,
    /// Transcript files the blocks were computed from.
    #[serde(default)]
    pub sources: Vec<String>,
    #[serde(default)]
    pub hints: RenderHints,
    pub blocks: Vec<ReportBlock>,
}

impl ReportDocument {
    pub fn new(experiment_id: &str, clock: &Clock) -> Self {
        ReportDocument {
            schema_version: REPORT_SCHEMA_VERSION,
            experiment_id: experiment_id.to_string(),
            generated_at: clock.stamp(),
            sources: Vec::new(),
            hints: RenderHints::default(),
            blocks: Vec::new(),
        }
    }

    pub fn push(&mut self, block: ReportBlock) -> &mut Self {
        self.blocks.push(block);
        self
    }

    pub fn has(&self, kind: TableKind) -> bool {
        self.blocks.iter().any(|b| kind.matches(b))
    }
}

/// Left-aligned first column, right-aligned rest, two-space gutters.
fn grid(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width = vec![0usize; cols];
    for row in std::iter::once(header).chain(rows.iter().map(|r| r.as_slice())) {
        for (i, cell) in row.iter().enumerate() {
            width[i] = width[i].max(cell.chars().count());
        }
    }
    let line = |row: &[String]| {
        let mut s = String::new();
        for (i, cell) in row.iter().enumerate() {
            let pad = width[i] - cell.chars().count();
            if i == 0 {
                s.push_str(cell);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(cell);
            }
        }
        s.trim_end().to_string()
    };
    let total: usize = width.iter().sum::<usize>() + 2 * (cols - 1);
    let rule = "-".repeat(total);
    let mut out = String::new();
    out.push_str(&line(header));
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

fn strs(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn range_note(s: &DistributionStats) -> String {
    let correction = match s.test.correction {
        crate::analytics::Correction::Bonferroni => "bonferroni",
        crate::analytics::Correction::None => "uncorrected",
    };
    let method = match s.test.method {
        crate::analytics::CiMethod::Wald => "wald",
        crate::analytics::CiMethod::ExactBinomial => "exact binomial",
    };
    format!(
        "n={}: uniform range {:.1}% - {:.1}% (alpha {}, {correction}, {method})",
        s.n,
        s.interval.low * 100.0,
        s.interval.high * 100.0,
        s.test.alpha
    )
}

/// Action cells; values inside the uniform range carry a trailing `*`.
fn action_cells(s: &DistributionStats, hints: &RenderHints) -> Vec<String> {
    s.actions
        .iter()
        .map(|a| {
            let mut cell = percent(a.count, s.n, hints.percent_decimals);
            if !a.significant {
                cell.push('*');
            }
            cell
        })
        .collect()
}

fn distribution_header(s: &DistributionStats, first: &str, ties: bool) -> Vec<String> {
    let mut h = vec![first.to_string()];
    h.extend(s.actions.iter().map(|a| a.symbol.to_string()));
    if ties {
        h.push("Tie".into());
    }
    h.extend(strs(&["P1 score", "P2 score"]));
    h
}

fn distribution_row(label: &str, s: &DistributionStats, hints: &RenderHints, ties: bool) -> Vec<String> {
    let mut row = vec![label.to_string()];
    row.extend(action_cells(s, hints));
    if ties {
        row.push(percent(s.tie_count, s.games, hints.tie_decimals));
    }
    row.push(s.scores[Seat::First].to_string());
    row.push(s.scores[Seat::Second].to_string());
    row
}

fn notes(stats: &[&DistributionStats]) -> String {
    let mut seen = Vec::new();
    for s in stats {
        let n = range_note(s);
        if !seen.contains(&n) {
            seen.push(n);
        }
    }
    let mut out = String::from("* within the uniform range\n");
    for n in seen {
        out.push_str(&n);
        out.push('\n');
    }
    out
}

fn render_distribution(doc: &ReportDocument) -> String {
    let blocks: Vec<(&str, &DistributionStats)> = doc
        .blocks
        .iter()
        .filter_map(|b| match b {
            ReportBlock::Distribution { label, stats } => Some((label.as_str(), stats)),
            _ => None,
        })
        .collect();
    let mut out = String::new();
    // Rows with the same alphabet share one table.
    let mut i = 0;
    while i < blocks.len() {
        let symbols: Vec<char> = blocks[i].1.actions.iter().map(|a| a.symbol).collect();
        let mut j = i;
        while j < blocks.len() && blocks[j].1.actions.iter().map(|a| a.symbol).eq(symbols.iter().copied()) {
            j += 1;
        }
        let group = &blocks[i..j];
        let ties = group.iter().any(|(_, s)| s.report_ties);
        let header = distribution_header(group[0].1, "Row", ties);
        let rows: Vec<_> = group.iter().map(|(l, s)| distribution_row(l, s, &doc.hints, ties)).collect();
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&grid(&header, &rows));
        out.push_str(&notes(&group.iter().map(|(_, s)| *s).collect::<Vec<_>>()));
        i = j;
    }
    out
}

fn render_stationarity(doc: &ReportDocument) -> String {
    let mut out = String::new();
    for b in &doc.blocks {
        let ReportBlock::Stationarity { label, split } = b else { continue };
        if !out.is_empty() {
            out.push('\n');
        }
        let end = split.total.games;
        let ties = split.total.report_ties;
        let header = distribution_header(&split.early, label, ties);
        let early_label = format!("Games 1-{}", split.boundary);
        let late_label = format!("Games {}-{}", split.boundary + 1, end);
        let rows = vec![
            distribution_row(&early_label, &split.early, &doc.hints, ties),
            distribution_row(&late_label, &split.late, &doc.hints, ties),
            distribution_row("Total", &split.total, &doc.hints, ties),
        ];
        out.push_str(&grid(&header, &rows));
        out.push_str(&notes(&[&split.early, &split.late, &split.total]));
    }
    out
}

fn render_outcomes(doc: &ReportDocument) -> String {
    let tables: Vec<(&str, &OutcomeTable)> = doc
        .blocks
        .iter()
        .filter_map(|b| match b {
            ReportBlock::Outcomes { label, table } => Some((label.as_str(), table)),
            _ => None,
        })
        .collect();
    let Some((_, first)) = tables.first() else { return String::new() };
    let mut header = vec!["Row".to_string()];
    header.extend(first.cells.iter().map(|c| c.label.clone()));
    header.extend(strs(&["P1 sum", "P2 sum"]));
    let rows: Vec<Vec<String>> = tables
        .iter()
        .map(|(label, t)| {
            let mut row = vec![label.to_string()];
            row.extend(t.cells.iter().map(|c| percent(c.count, t.games, doc.hints.percent_decimals)));
            row.push(t.scores[Seat::First].to_string());
            row.push(t.scores[Seat::Second].to_string());
            row
        })
        .collect();
    grid(&header, &rows)
}

fn render_milestones(doc: &ReportDocument) -> String {
    let mut out = String::new();
    for b in &doc.blocks {
        let ReportBlock::Milestones { label, table } = b else { continue };
        if !out.is_empty() {
            out.push('\n');
        }
        let header = strs(&["Wins", "P1 game", "P1 increment", "P2 game", "P2 increment"]);
        let na = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_else(|| "n/a".into());
        let rows: Vec<Vec<String>> = table
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.threshold.to_string(),
                    na(r.players.first.game),
                    na(r.players.first.increment),
                    na(r.players.second.game),
                    na(r.players.second.increment),
                ]
            })
            .collect();
        out.push_str(&format!("{label} ({} games)\n", table.rounds));
        out.push_str(&grid(&header, &rows));
        out.push_str(&format!(
            "total wins: P1 {}, P2 {}\n",
            table.wins[Seat::First],
            table.wins[Seat::Second]
        ));
    }
    out
}

/// Renders every block of one kind as a fixed-width table.
pub fn render_table(doc: &ReportDocument, kind: TableKind) -> Result<String, StorageError> {
    if !doc.has(kind) {
        return Err(StorageError::MissingBlock(kind.name()));
    }
    Ok(match kind {
        TableKind::Distribution => render_distribution(doc),
        TableKind::Stationarity => render_stationarity(doc),
        TableKind::Outcomes => render_outcomes(doc),
        TableKind::Milestones => render_milestones(doc),
    })
}

/// All tables present, each under a heading.
pub fn render_text(doc: &ReportDocument) -> Result<String, StorageError> {
    if doc.blocks.is_empty() {
        return Err(StorageError::Invalid("report has no blocks".into()));
    }
    let mut out = format!("experiment: {}\ngenerated: {}\n", doc.experiment_id, doc.generated_at);
    for kind in TableKind::ALL {
        if doc.has(kind) {
            out.push_str(&format!("\n[{}]\n", kind.name()));
            out.push_str(&render_table(doc, kind)?);
        }
    }
    Ok(out)
}

pub fn render_json(doc: &ReportDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("report serializes");
    s.push('\n');
    s
}
