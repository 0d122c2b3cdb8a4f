//! JSON and CSV serialization.
//!
//! JSON floats are written with 17 significant digits (`{:.16e}`) so reports
//! are lossless and byte-stable; non-finite values become `null`. Key order
//! follows struct field order.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

use crate::{ClassifyDoc, CliError, NumbersDoc, ReportDoc};

#[derive(Default)]
struct FixedDigits {
    indent: usize,
    has_value: bool,
}

impl FixedDigits {
    fn newline<W: ?Sized + io::Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(b"\n")?;
        for _ in 0..self.indent {
            w.write_all(b"  ")?;
        }
        Ok(())
    }
}

impl Formatter for FixedDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        // serde_json routes non-finite floats to write_null before this point
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent += 1;
        self.has_value = false;
        w.write_all(b"[")
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent -= 1;
        if self.has_value {
            self.newline(w)?;
        }
        w.write_all(b"]")
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        if !first {
            w.write_all(b",")?;
        }
        self.newline(w)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, _w: &mut W) -> io::Result<()> {
        self.has_value = true;
        Ok(())
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent += 1;
        self.has_value = false;
        w.write_all(b"{")
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent -= 1;
        if self.has_value {
            self.newline(w)?;
        }
        w.write_all(b"}")
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        if !first {
            w.write_all(b",")?;
        }
        self.newline(w)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        w.write_all(b": ")
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, _w: &mut W) -> io::Result<()> {
        self.has_value = true;
        Ok(())
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, FixedDigits::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

fn write_table(header: &[&str], rows: Vec<Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writes UTF-8"))
}

/// One row per serialized record.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writes UTF-8"))
}

fn numbers_rows(doc: &NumbersDoc) -> Vec<Vec<String>> {
    doc.degrees
        .iter()
        .map(|d| {
            let s = &d.numbers;
            vec![
                doc.manifold.clone(),
                s.n.to_string(),
                s.r.to_string(),
                s.band.to_string(),
                s.b.to_string(),
                s.t.to_string(),
                s.k.to_string(),
                s.p.to_string(),
                fmt_f64(s.tol),
                d.duality.iter().all(|o| o.pass).to_string(),
                d.bounds.iter().all(|o| o.pass).to_string(),
                doc.seed.to_string(),
            ]
        })
        .collect()
}

const NUMBERS_HEADER: [&str; 12] = [
    "manifold",
    "n",
    "r",
    "band",
    "b",
    "t",
    "k",
    "p",
    "tol",
    "duality_pass",
    "bounds_pass",
    "seed",
];

pub fn numbers_csv(doc: &NumbersDoc) -> Result<String, CliError> {
    write_table(&NUMBERS_HEADER, numbers_rows(doc))
}

fn classify_row(doc: &ClassifyDoc) -> Vec<String> {
    let r = &doc.report;
    vec![
        doc.manifold.clone(),
        doc.form.clone(),
        r.degree.to_string(),
        fmt_f64(r.residuals.d1),
        fmt_f64(r.residuals.d2),
        fmt_f64(r.residuals.d3),
        fmt_f64(r.residuals.nabla),
        fmt_f64(r.form_norm),
        fmt_f64(r.threshold),
        doc.classes.join(" "),
        r.point_count.to_string(),
        doc.seed.to_string(),
    ]
}

const CLASSIFY_HEADER: [&str; 12] = [
    "manifold",
    "form",
    "r",
    "d1",
    "d2",
    "d3",
    "nabla",
    "form_norm",
    "threshold",
    "classes",
    "points",
    "seed",
];

pub fn classify_csv(doc: &ClassifyDoc) -> Result<String, CliError> {
    write_table(&CLASSIFY_HEADER, vec![classify_row(doc)])
}

/// Long format: `section,item,key,value`.
pub fn report_csv(doc: &ReportDoc) -> Result<String, CliError> {
    let mut rows = Vec::new();
    let mut push = |section: &str, item: String, key: &str, value: String| {
        rows.push(vec![section.to_string(), item, key.to_string(), value]);
    };
    push("report", String::new(), "seed", doc.seed.to_string());
    push("report", String::new(), "band", doc.band.to_string());
    for nd in &doc.numbers {
        for (row, d) in numbers_rows(nd).into_iter().zip(&nd.degrees) {
            let item = format!("{}:r={}", nd.manifold, d.numbers.r);
            for (key, value) in NUMBERS_HEADER.iter().zip(row).skip(4) {
                push("numbers", item.clone(), key, value);
            }
        }
    }
    for c in &doc.classifications {
        let item = format!("{} {}", c.manifold, c.form);
        for (key, value) in CLASSIFY_HEADER.iter().zip(classify_row(c)).skip(2) {
            push("classify", item.clone(), key, value);
        }
    }
    for r in &doc.identities.rows {
        let item = format!("{} {} {}", r.id, r.chart, r.form);
        push("verify", item.clone(), "status", format!("{:?}", r.status));
        push(
            "verify",
            item,
            "residual",
            r.residual.map(fmt_f64).unwrap_or_default(),
        );
    }
    let w = &doc.wedge_witness;
    let item = format!("n={} h={} r={}", w.n, w.h, w.r);
    push("wedge", item.clone(), "gram_rank", w.gram_rank.to_string());
    push("wedge", item.clone(), "expected", w.expected.to_string());
    push("wedge", item, "all_parallel", w.all_parallel.to_string());
    push(
        "decomposition",
        doc.decomposition.input.clone(),
        "pass",
        doc.decomposition.pass.to_string(),
    );
    push(
        "report",
        String::new(),
        "all_pass",
        doc.all_pass.to_string(),
    );
    write_table(&["section", "item", "key", "value"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        a: f64,
        b: Vec<f64>,
        c: f64,
        d: Option<f64>,
    }

    #[test]
    fn floats_have_seventeen_digits() {
        let s = to_json(&Sample {
            a: 0.1,
            b: vec![1.0, -0.15625],
            c: f64::NAN,
            d: None,
        })
        .unwrap();
        assert!(s.contains("\"a\": 1.0000000000000001e-1"));
        assert!(s.contains("1.0000000000000000e0"));
        assert!(s.contains("-1.5625000000000000e-1"));
        assert!(s.contains("\"c\": null"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }

    #[test]
    fn empty_containers() {
        let s = to_json(&(
            Vec::<u8>::new(),
            std::collections::BTreeMap::<u8, u8>::new(),
        ))
        .unwrap();
        assert_eq!(s, "[\n  [],\n  {}\n]\n");
    }
}
