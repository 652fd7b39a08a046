use std::io::{Read, Write};

use crate::{config_err, Result};

/// Named float columns, written as CSV with full round-trip precision.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(headers: Vec<String>) -> Self {
        Self { headers, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        let mut table = Self::new(headers);
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| config_err(format!("bad number {s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != table.headers.len() {
                return Err(config_err("row width differs from header"));
            }
            table.rows.push(row);
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut t = Table::new(vec!["a".into(), "b".into()]);
        t.push(vec![0.1, -1.0 / 3.0]);
        t.push(vec![f64::MIN_POSITIVE, 6.02e23]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(Table::read_csv(buf.as_slice()).unwrap(), t);
        assert_eq!(t.column("b").unwrap()[1], 6.02e23);
    }
}
