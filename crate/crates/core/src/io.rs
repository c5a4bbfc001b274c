//! Small CSV helpers shared by the file formats.

use std::io::Read;

use crate::error::{Error, Result};

pub(crate) fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader)
}

pub(crate) fn expect_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str], context: &str) -> Result<()> {
    let headers = rdr.headers().map_err(|e| Error::parse(context, e))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::parse(
            context,
            format!("expected header `{}`, got `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

pub(crate) fn parse_floats<const N: usize>(record: &csv::StringRecord, context: &str, line: usize) -> Result<[f64; N]> {
    if record.len() != N {
        return Err(Error::parse(
            context,
            format!("line {line}: expected {N} fields, got {}", record.len()),
        ));
    }
    let mut out = [0.0; N];
    for (slot, field) in out.iter_mut().zip(record.iter()) {
        *slot = field
            .parse::<f64>()
            .map_err(|e| Error::parse(context, format!("line {line}: `{field}`: {e}")))?;
    }
    Ok(out)
}
