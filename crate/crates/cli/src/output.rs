use herald_core::table::{Dataset, Value};
use serde_json::{Map, Value as Json};

use crate::args::Format;

/// Reals in CSV carry 17 significant digits so they round-trip exactly.
fn csv_field(v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Real(x) => format!("{x:.16e}"),
        Value::Bool(b) => b.to_string(),
        Value::Text(s) => s.clone(),
        Value::Null => String::new(),
    }
}

pub fn to_csv(data: &Dataset) -> Result<String, csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&data.columns)?;
    for row in &data.rows {
        w.write_record(row.iter().map(csv_field))?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("fields are UTF-8"))
}

fn json_value(v: &Value) -> Json {
    match v {
        Value::Int(i) => Json::from(*i),
        Value::Real(x) => serde_json::Number::from_f64(*x).map_or(Json::Null, Json::Number),
        Value::Bool(b) => Json::Bool(*b),
        Value::Text(s) => Json::String(s.clone()),
        Value::Null => Json::Null,
    }
}

/// `{"meta": ..., "data": [{column: value, ...}, ...]}`
pub fn to_json(meta: Json, data: &Dataset) -> String {
    let rows: Vec<Json> = data
        .rows
        .iter()
        .map(|row| {
            let obj: Map<String, Json> = data
                .columns
                .iter()
                .cloned()
                .zip(row.iter().map(json_value))
                .collect();
            Json::Object(obj)
        })
        .collect();
    let mut doc = Map::new();
    doc.insert("meta".into(), meta);
    doc.insert("data".into(), Json::Array(rows));
    let mut s = serde_json::to_string_pretty(&Json::Object(doc)).expect("JSON values serialize");
    s.push('\n');
    s
}

pub fn render(format: Format, meta: Json, data: &Dataset) -> Result<String, csv::Error> {
    match format {
        Format::Json => Ok(to_json(meta, data)),
        Format::Csv => to_csv(data),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        let mut d = Dataset::new(&["n", "p", "note"]);
        d.push(vec![2u64.into(), 0.1f64.into(), Value::Null]);
        d.push(vec![3u64.into(), f64::NAN.into(), "a,b".into()]);
        d
    }

    #[test]
    fn csv_layout() {
        let s = to_csv(&sample()).unwrap();
        assert_eq!(s, "n,p,note\n2,1.0000000000000001e-1,\n3,,\"a,b\"\n");
        let back: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn json_layout() {
        let s = to_json(serde_json::json!({"command": "x"}), &sample());
        let v: Json = serde_json::from_str(&s).unwrap();
        assert_eq!(v["data"][0]["p"], 0.1);
        assert!(v["data"][1]["p"].is_null());
        assert_eq!(v["meta"]["command"], "x");
    }
}
