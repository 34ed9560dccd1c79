use std::io::Write;

use super::ValueField;
use crate::error::Result;

const HEADER: [&str; 7] = ["plane", "i0", "ii", "x0", "xi", "value", "flagged"];

fn write_rows<W: Write>(w: &mut csv::Writer<W>, field: &ValueField, plane: usize, rows: std::ops::Range<usize>) -> Result<()> {
    let g = &field.grid;
    for ii in rows {
        for i0 in 0..g.n0 {
            let n = g.index(plane, ii, i0);
            w.write_record([
                if ii == 0 { "0".to_string() } else { plane.to_string() },
                i0.to_string(),
                ii.to_string(),
                g.x0_at(i0).to_string(),
                g.xi_at(ii).to_string(),
                field.values[n].to_string(),
                u8::from(field.flagged[n]).to_string(),
            ])?;
        }
    }
    Ok(())
}

/// Every node: the Γ row once (plane 0), then each plane's rows.
pub fn write_field_csv<W: Write>(field: &ValueField, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    write_rows(&mut w, field, 1, 0..1)?;
    for k in 1..=field.grid.n_planes {
        write_rows(&mut w, field, k, 1..field.grid.ni)?;
    }
    w.flush()?;
    Ok(())
}

/// One plane including the shared Γ row.
pub fn write_plane_csv<W: Write>(field: &ValueField, plane: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    write_rows(&mut w, field, plane, 0..field.grid.ni)?;
    w.flush()?;
    Ok(())
}
