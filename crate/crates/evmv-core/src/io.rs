//! Deterministic file formats: CSV and binary event streams, binary dense
//! maps, attention-head parameters, and a PGM map export. All binary
//! layouts are little-endian and round-trip bit-exact.
//!
//! Event file (`EVS1`): 16-byte header — magic, sensor width (u16),
//! sensor height (u16), event count (u64) — followed by one 16-byte
//! record per event: t (u64), x (u16), y (u16), p (i8), 3 pad bytes.
//!
//! Map file (`DMP1`): 17-byte header — magic, channels/rows/cols (u32
//! each), dtype tag (u8, 1 = f64) — followed by the payload row-major,
//! channel-major.
//!
//! Head file (`ATT1`): 16-byte header — magic, head count, model dim,
//! class count (u32 each) — followed by the flat parameter array in
//! `AttentionHead::flat_params` order.

use std::fs;
use std::path::Path;

use crate::encode::DenseMap;
use crate::error::{Error, Result};
use crate::event::{Event, EventStream};
use crate::fusion::AttentionHead;

const EVENT_MAGIC: &[u8; 4] = b"EVS1";
const MAP_MAGIC: &[u8; 4] = b"DMP1";
const HEAD_MAGIC: &[u8; 4] = b"ATT1";
const DTYPE_F64: u8 = 1;
const EVENT_RECORD_LEN: usize = 16;

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format(format!(
                "truncated payload: wanted {n} bytes at offset {}, file has {}",
                self.pos,
                self.buf.len()
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn magic(&mut self, expect: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != expect {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                got,
                std::str::from_utf8(expect).unwrap()
            )));
        }
        Ok(())
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn done(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn write_events_binary(stream: &EventStream, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + stream.len() * EVENT_RECORD_LEN);
    buf.extend_from_slice(EVENT_MAGIC);
    buf.extend_from_slice(&stream.sensor_width().to_le_bytes());
    buf.extend_from_slice(&stream.sensor_height().to_le_bytes());
    buf.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for e in stream.events() {
        buf.extend_from_slice(&e.t.to_le_bytes());
        buf.extend_from_slice(&e.x.to_le_bytes());
        buf.extend_from_slice(&e.y.to_le_bytes());
        buf.push(e.p as u8);
        buf.extend_from_slice(&[0u8; 3]);
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_events_binary(path: impl AsRef<Path>) -> Result<EventStream> {
    let buf = fs::read(path)?;
    let mut cur = Cursor::new(&buf);
    cur.magic(EVENT_MAGIC)?;
    let width = cur.u16()?;
    let height = cur.u16()?;
    let count = cur.u64()?;
    let count = usize::try_from(count)
        .map_err(|_| Error::Format(format!("event count {count} too large")))?;
    let mut events = Vec::with_capacity(count.min(1 << 24));
    for _ in 0..count {
        let t = cur.u64()?;
        let x = cur.u16()?;
        let y = cur.u16()?;
        let p = cur.u8()? as i8;
        cur.take(3)?;
        events.push(Event { t, x, y, p });
    }
    cur.done()?;
    EventStream::new(events, width, height)
        .map_err(|e| Error::Format(format!("event payload violates stream invariants: {e}")))
}

/// Parses `t,x,y,p` lines. Polarity may be -1/1 or 0/1; 0 maps to -1.
/// Blank lines and `#` comments are skipped. Every diagnostic carries its
/// 1-based line number.
pub fn read_events_csv(
    path: impl AsRef<Path>,
    sensor_width: u16,
    sensor_height: u16,
) -> Result<EventStream> {
    let text = fs::read_to_string(path)?;
    let mut events = Vec::new();
    let mut prev_t = 0u64;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 4 fields `t,x,y,p`, got {}", fields.len()),
            });
        }
        let parse_num = |field: &str, what: &str| -> Result<u64> {
            field.parse::<u64>().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid {what} `{field}`"),
            })
        };
        let t = parse_num(fields[0], "timestamp")?;
        let x = parse_num(fields[1], "x coordinate")?;
        let y = parse_num(fields[2], "y coordinate")?;
        let p = match fields[3] {
            "1" | "+1" => 1i8,
            "-1" | "0" => -1i8,
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("invalid polarity `{other}`"),
                })
            }
        };
        if x >= u64::from(sensor_width) || y >= u64::from(sensor_height) {
            return Err(Error::Parse {
                line,
                msg: format!("event at ({x}, {y}) outside {sensor_width}x{sensor_height} sensor"),
            });
        }
        if !events.is_empty() && t < prev_t {
            return Err(Error::Parse {
                line,
                msg: format!("timestamp {t} regresses below {prev_t}"),
            });
        }
        prev_t = t;
        events.push(Event {
            t,
            x: x as u16,
            y: y as u16,
            p,
        });
    }
    EventStream::new(events, sensor_width, sensor_height)
}

pub fn write_events_csv(stream: &EventStream, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for e in stream.events() {
        out.push_str(&format!("{},{},{},{}\n", e.t, e.x, e.y, e.p));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads an event file, picking the format from the extension: `.csv`
/// parses text (and needs sensor dimensions), anything else is binary.
pub fn read_events_auto(
    path: impl AsRef<Path>,
    csv_dims: Option<(u16, u16)>,
) -> Result<EventStream> {
    let path = path.as_ref();
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        let (w, h) = csv_dims
            .ok_or_else(|| Error::Contract("csv input needs explicit sensor dimensions".into()))?;
        read_events_csv(path, w, h)
    } else {
        read_events_binary(path)
    }
}

pub fn write_map(map: &DenseMap, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::with_capacity(17 + map.data().len() * 8);
    buf.extend_from_slice(MAP_MAGIC);
    buf.extend_from_slice(&(map.channels() as u32).to_le_bytes());
    buf.extend_from_slice(&(map.rows() as u32).to_le_bytes());
    buf.extend_from_slice(&(map.cols() as u32).to_le_bytes());
    buf.push(DTYPE_F64);
    for v in map.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_map(path: impl AsRef<Path>) -> Result<DenseMap> {
    let buf = fs::read(path)?;
    let mut cur = Cursor::new(&buf);
    cur.magic(MAP_MAGIC)?;
    let channels = cur.u32()? as usize;
    let rows = cur.u32()? as usize;
    let cols = cur.u32()? as usize;
    let dtype = cur.u8()?;
    if dtype != DTYPE_F64 {
        return Err(Error::Format(format!("unsupported dtype tag {dtype}")));
    }
    let n = channels
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Format("map dimensions overflow".into()))?;
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        data.push(cur.f64()?);
    }
    cur.done()?;
    DenseMap::from_data(channels, rows, cols, data)
}

pub fn write_head(head: &AttentionHead, path: impl AsRef<Path>) -> Result<()> {
    let params = head.flat_params();
    let mut buf = Vec::with_capacity(16 + params.len() * 8);
    buf.extend_from_slice(HEAD_MAGIC);
    buf.extend_from_slice(&(head.num_heads() as u32).to_le_bytes());
    buf.extend_from_slice(&(head.model_dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(head.classes() as u32).to_le_bytes());
    for v in params {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_head(path: impl AsRef<Path>) -> Result<AttentionHead> {
    let buf = fs::read(path)?;
    let mut cur = Cursor::new(&buf);
    cur.magic(HEAD_MAGIC)?;
    let num_heads = cur.u32()? as usize;
    let model_dim = cur.u32()? as usize;
    let classes = cur.u32()? as usize;
    let probe = AttentionHead::zeros(model_dim, classes, num_heads)
        .map_err(|e| Error::Format(format!("invalid head dimensions: {e}")))?;
    let mut params = Vec::with_capacity(probe.param_count());
    for _ in 0..probe.param_count() {
        params.push(cur.f64()?);
    }
    cur.done()?;
    AttentionHead::from_flat_params(model_dim, classes, num_heads, &params)
}

/// Exports one channel as an 8-bit binary PGM, min-max normalized; an
/// all-constant channel exports mid-gray (128).
pub fn export_map_image(map: &DenseMap, channel: usize, path: impl AsRef<Path>) -> Result<()> {
    if channel >= map.channels() {
        return Err(Error::contract(format!(
            "channel {channel} out of range for {}-channel map",
            map.channels()
        )));
    }
    let data = map.channel(channel);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in data {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let mut buf = format!("P5\n{} {}\n255\n", map.cols(), map.rows()).into_bytes();
    if lo >= hi {
        buf.resize(buf.len() + data.len(), 128u8);
    } else {
        let scale = 255.0 / (hi - lo);
        buf.extend(data.iter().map(|&v| ((v - lo) * scale).round() as u8));
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Nearest-neighbor resample to `rows x cols`, channel by channel.
pub fn resize_nearest(map: &DenseMap, rows: usize, cols: usize) -> Result<DenseMap> {
    if rows == 0 || cols == 0 {
        return Err(Error::contract("target dimensions must be positive"));
    }
    let mut data = Vec::with_capacity(map.channels() * rows * cols);
    for c in 0..map.channels() {
        for u in 0..rows {
            let src_u = u * map.rows() / rows;
            for v in 0..cols {
                let src_v = v * map.cols() / cols;
                data.push(map.get(c, src_u, src_v));
            }
        }
    }
    DenseMap::from_data(map.channels(), rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("evmv-io-{}-{name}", std::process::id()));
        p
    }

    fn sample_stream() -> EventStream {
        EventStream::new(
            vec![
                Event {
                    t: 0,
                    x: 1,
                    y: 2,
                    p: 1,
                },
                Event {
                    t: 5,
                    x: 3,
                    y: 4,
                    p: -1,
                },
                Event {
                    t: 5,
                    x: 7,
                    y: 0,
                    p: 1,
                },
            ],
            10,
            10,
        )
        .unwrap()
    }

    #[test]
    fn event_binary_round_trip() {
        let path = tmp("events.evs");
        let s = sample_stream();
        write_events_binary(&s, &path).unwrap();
        assert_eq!(read_events_binary(&path).unwrap(), s);

        let empty = EventStream::empty(346, 260);
        write_events_binary(&empty, &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 16);
        assert_eq!(read_events_binary(&path).unwrap(), empty);
        fs::remove_file(&path).ok();
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let path = tmp("badmagic.evs");
        let s = sample_stream();
        write_events_binary(&s, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, bytes).unwrap();
        assert!(matches!(read_events_binary(&path), Err(Error::Format(_))));
        fs::remove_file(&path).ok();
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let path = tmp("trunc.evs");
        write_events_binary(&sample_stream(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(read_events_binary(&path), Err(Error::Format(_))));
        fs::remove_file(&path).ok();
    }

    #[test]
    fn csv_examples() {
        let path = tmp("events.csv");
        fs::write(&path, "0,1,2,1\n5,3,4,-1\n").unwrap();
        let s = read_events_csv(&path, 10, 10).unwrap();
        assert_eq!(s.len(), 2);

        fs::write(&path, "5,1,2,1\n0,3,4,1\n").unwrap();
        match read_events_csv(&path, 10, 10) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected line-2 parse error, got {other:?}"),
        }

        fs::write(&path, "0,1,2,0\n").unwrap();
        let s = read_events_csv(&path, 10, 10).unwrap();
        assert_eq!(s.events()[0].p, -1);

        fs::write(&path, "0,12,2,1\n").unwrap();
        assert!(matches!(
            read_events_csv(&path, 10, 10),
            Err(Error::Parse { line: 1, .. })
        ));
        fs::remove_file(&path).ok();
    }

    #[test]
    fn csv_round_trip() {
        let path = tmp("round.csv");
        let s = sample_stream();
        write_events_csv(&s, &path).unwrap();
        assert_eq!(read_events_csv(&path, 10, 10).unwrap(), s);
        fs::remove_file(&path).ok();
    }

    #[test]
    fn map_round_trip_and_header() {
        let path = tmp("map.dmp");
        let data: Vec<f64> = (0..2 * 3 * 4).map(|i| i as f64 * 0.25 - 1.5).collect();
        let map = DenseMap::from_data(2, 3, 4, data).unwrap();
        write_map(&map, &path).unwrap();
        assert_eq!(read_map(&path).unwrap(), map);
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 17 + 2 * 3 * 4 * 8);
        assert_eq!(&bytes[..4], b"DMP1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
        fs::remove_file(&path).ok();
    }

    #[test]
    fn head_round_trip() {
        let path = tmp("head.att");
        let head = AttentionHead::random(16, 5, 2, 3).unwrap();
        write_head(&head, &path).unwrap();
        assert_eq!(read_head(&path).unwrap(), head);
        fs::remove_file(&path).ok();
    }

    #[test]
    fn pgm_export() {
        let path = tmp("map.pgm");
        let map = DenseMap::zeros(1, 2, 3);
        export_map_image(&map, 0, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..9], b"P5\n3 2\n25");
        assert!(bytes[11..].iter().all(|&b| b == 128));

        let map = DenseMap::from_data(1, 1, 2, vec![0.0, 10.0]).unwrap();
        export_map_image(&map, 0, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let pixels = &bytes[bytes.len() - 2..];
        assert_eq!(pixels, &[0u8, 255]);

        assert!(export_map_image(&map, 1, &path).is_err());
        fs::remove_file(&path).ok();
    }

    #[test]
    fn resize_nearest_shapes_and_values() {
        let map = DenseMap::from_data(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let up = resize_nearest(&map, 4, 4).unwrap();
        assert_eq!((up.rows(), up.cols()), (4, 4));
        assert_eq!(up.get(0, 0, 0), 1.0);
        assert_eq!(up.get(0, 3, 3), 4.0);
        let down = resize_nearest(&up, 2, 2).unwrap();
        assert_eq!(down, map);
    }

    #[test]
    fn auto_reader_picks_format() {
        let csv = tmp("auto.csv");
        fs::write(&csv, "0,1,2,1\n").unwrap();
        assert_eq!(read_events_auto(&csv, Some((10, 10))).unwrap().len(), 1);
        assert!(read_events_auto(&csv, None).is_err());
        fs::remove_file(&csv).ok();

        let bin = tmp("auto.evs");
        write_events_binary(&sample_stream(), &bin).unwrap();
        assert_eq!(read_events_auto(&bin, None).unwrap().len(), 3);
        fs::remove_file(&bin).ok();
    }
}
