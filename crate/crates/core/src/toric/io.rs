use std::io::{BufRead, Write};

use super::Move;
use crate::error::{Error, Result};

/// Writes one move per line as space-separated integers in flat cell order.
pub fn write_moves<W: Write>(moves: &[Move], mut out: W) -> Result<()> {
    for m in moves {
        let line: Vec<String> = m.as_slice().iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Reads moves of length `num_cells`. Blank lines and `#` comments are
/// skipped; a leading `rows cols` header line, as written by common lattice
/// tools, is accepted when `cols == num_cells`.
pub fn read_moves<R: BufRead>(input: R, num_cells: usize) -> Result<Vec<Move>> {
    let mut moves = Vec::new();
    let mut first = true;
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let mut vals = Vec::new();
        let mut col = 1;
        for tok in text.split_whitespace() {
            let v: i64 = tok
                .parse()
                .map_err(|_| Error::parse(lineno, col, format!("`{tok}` is not an integer")))?;
            vals.push(v);
            col += tok.len() + 1;
        }
        let header = first && vals.len() == 2 && num_cells != 2 && vals[1] == num_cells as i64;
        first = false;
        if header {
            continue;
        }
        if vals.len() != num_cells {
            return Err(Error::parse(
                lineno,
                1,
                format!("expected {num_cells} entries, found {}", vals.len()),
            ));
        }
        let m = Move::new(vals).map_err(|_| Error::parse(lineno, 1, "zero move"))?;
        moves.push(m);
    }
    Ok(moves)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_header() {
        let moves = vec![
            Move::new(vec![1, -1, -1, 1]).unwrap(),
            Move::new(vec![0, 2, -1, -1]).unwrap(),
        ];
        let mut buf = Vec::new();
        write_moves(&moves, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "1 -1 -1 1\n0 2 -1 -1\n");
        assert_eq!(read_moves(&buf[..], 4).unwrap(), moves);
        let with_header = b"2 4\n1 -1 -1 1\n# note\n\n-1 1 1 -1\n";
        let read = read_moves(&with_header[..], 4).unwrap();
        assert_eq!(read.len(), 2);
        assert_eq!(read[1], moves[0]);
    }

    #[test]
    fn bad_lines_are_located() {
        let err = read_moves(&b"1 -1 -1 1\n1 x 0 0\n"[..], 4).unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 2,
                column: 3,
                message: "`x` is not an integer".into()
            }
        );
        assert!(read_moves(&b"1 -1 1\n"[..], 4).is_err());
        assert!(read_moves(&b"0 0 0 0\n"[..], 4).is_err());
    }
}
