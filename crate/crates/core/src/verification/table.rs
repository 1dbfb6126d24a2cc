//! Error tables with experimental convergence rates.

use std::fmt::Write as _;

use super::norms::ErrorRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Norm,
    A,
    Div,
    Jump,
    U,
    UStar,
    P,
}

impl Column {
    pub const ALL: [Column; 7] = [
        Column::Norm,
        Column::A,
        Column::Div,
        Column::Jump,
        Column::U,
        Column::UStar,
        Column::P,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Column::Norm => "e_norm",
            Column::A => "e_a",
            Column::Div => "e_div",
            Column::Jump => "e_jump",
            Column::U => "e0_u",
            Column::UStar => "e0_ustar",
            Column::P => "e0_p",
        }
    }

    pub fn get(self, r: &ErrorRecord) -> f64 {
        match self {
            Column::Norm => r.e_norm,
            Column::A => r.e_a,
            Column::Div => r.e_div,
            Column::Jump => r.e_jump,
            Column::U => r.e0_u,
            Column::UStar => r.e0_ustar,
            Column::P => r.e0_p,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub level: usize,
    pub dofs: usize,
    pub h: f64,
    pub errors: ErrorRecord,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorTable {
    pub rows: Vec<TableRow>,
}

/// `log(e / e_prev) / log(h / h_prev)`.
pub fn rate(e_prev: f64, e: f64, h_prev: f64, h: f64) -> f64 {
    (e / e_prev).ln() / (h / h_prev).ln()
}

impl ErrorTable {
    pub fn push(&mut self, row: TableRow) {
        self.rows.push(row);
    }

    /// Rate of `column` between row `i - 1` and row `i`; `None` for row 0.
    pub fn rate(&self, i: usize, column: Column) -> Option<f64> {
        if i == 0 || i >= self.rows.len() {
            return None;
        }
        let (a, b) = (&self.rows[i - 1], &self.rows[i]);
        Some(rate(column.get(&a.errors), column.get(&b.errors), a.h, b.h))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,dof,h");
        for c in Column::ALL {
            let _ = write!(s, ",{},rate", c.name());
        }
        s.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            let _ = write!(s, "{},{},{:.6e}", r.level, r.dofs, r.h);
            for c in Column::ALL {
                let rate = self.rate(i, c).map_or(String::new(), |v| format!("{v:.4}"));
                let _ = write!(s, ",{:.6e},{}", c.get(&r.errors), rate);
            }
            s.push('\n');
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| DoF | h |");
        for c in Column::ALL {
            let _ = write!(s, " {} | rate |", c.name());
        }
        s.push_str("\n|---:|---:|");
        for _ in Column::ALL {
            s.push_str("---:|---:|");
        }
        s.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            let _ = write!(s, "| {} | {:.3} |", r.dofs, r.h);
            for c in Column::ALL {
                let rate = self.rate(i, c).map_or("–".to_string(), |v| format!("{v:.2}"));
                let _ = write!(s, " {:.2e} | {} |", c.get(&r.errors), rate);
            }
            s.push('\n');
        }
        s
    }
}
