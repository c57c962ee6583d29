//! Delimiter-separated result tables. Floats are written with a fixed
//! [`DECIMALS`] places, undefined values as `NaN`, so reruns are
//! byte-identical.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;

use crate::detect::{EventSign, ExtremeEvent};
use crate::error::{Error, Result};
use crate::ingest::bars::{BarSeries, MinuteBar};
use crate::relax::{FitRange, RelaxationFit};
use crate::study::{slot_time, AlignedCumulativeReturn, GroupAverage, PeakRow, SLOTS};
use crate::types::{FlowKey, FlowTable};

pub const DECIMALS: usize = 10;

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.DECIMALS$}")
    } else {
        "NaN".to_string()
    }
}

fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

pub fn write_table(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A read table with columns addressed by header name.
pub struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(file);
        let bad = |e: csv::Error| Error::malformed(path.display().to_string(), e.to_string());
        let header = r.headers().map_err(bad)?.iter().map(str::to_string).collect();
        let rows = r.records().collect::<std::result::Result<Vec<_>, _>>().map_err(bad)?;
        Ok(Table {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| self.error(0, format!("no column {name:?}")))
    }

    fn error(&self, row: usize, detail: String) -> Error {
        Error::malformed(self.path.display().to_string(), format!("row {}: {detail}", row + 1))
    }

    pub fn str(&self, row: usize, col: usize) -> &str {
        self.rows[row].get(col).unwrap_or("")
    }

    pub fn parse<T: FromStr>(&self, row: usize, col: usize) -> Result<T> {
        let s = self.str(row, col);
        s.parse()
            .map_err(|_| self.error(row, format!("cannot parse {s:?} in column {:?}", self.header[col])))
    }

    pub fn parse_opt<T: FromStr>(&self, row: usize, col: usize) -> Result<Option<T>> {
        if self.str(row, col).is_empty() {
            Ok(None)
        } else {
            self.parse(row, col).map(Some)
        }
    }
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

const BAR_FIXED: [&str; 10] = [
    "date",
    "day_index",
    "minute",
    "mid_price",
    "best_bid",
    "best_ask",
    "spread",
    "executed_buy",
    "executed_sell",
    "split_factor",
];

fn bar_header() -> Vec<String> {
    let mut h = header(&BAR_FIXED);
    h.extend(FlowKey::all().map(|k| format!("volume_{}", k.column_suffix())));
    h.extend(FlowKey::all().map(|k| format!("count_{}", k.column_suffix())));
    h
}

pub fn bar_path(dir: &Path, stock_id: &str) -> PathBuf {
    dir.join(format!("{stock_id}.csv"))
}

pub fn write_bars(dir: &Path, series: &BarSeries) -> Result<()> {
    let rows = series.bars.iter().map(|b| {
        let mut row = vec![
            b.date.to_string(),
            b.day_index.to_string(),
            b.minute.to_string(),
            fmt_f64(b.mid_price),
            fmt_f64(b.best_bid),
            fmt_f64(b.best_ask),
            fmt_f64(b.spread),
            fmt_f64(b.executed[0]),
            fmt_f64(b.executed[1]),
            fmt_f64(b.split_factor),
        ];
        row.extend(b.volume.iter().map(|(_, v)| fmt_f64(v)));
        row.extend(b.count.iter().map(|(_, c)| c.to_string()));
        row
    });
    write_table(&bar_path(dir, &series.stock_id), &bar_header(), rows)
}

pub fn read_bars(path: &Path) -> Result<BarSeries> {
    let t = Table::read(path)?;
    let expected = bar_header();
    if t.header != expected {
        return Err(Error::malformed(path.display().to_string(), "unexpected bar table header"));
    }
    let stock_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::malformed(path.display().to_string(), "no stock id in file name"))?;
    let n_fixed = BAR_FIXED.len();
    let mut bars = Vec::with_capacity(t.len());
    for r in 0..t.len() {
        let mut volume = FlowTable::<f64>::default();
        let mut count = FlowTable::<u32>::default();
        for (i, k) in FlowKey::all().enumerate() {
            volume[k] = t.parse(r, n_fixed + i)?;
            count[k] = t.parse(r, n_fixed + FlowKey::COUNT + i)?;
        }
        bars.push(MinuteBar {
            date: t.parse(r, 0)?,
            day_index: t.parse(r, 1)?,
            minute: t.parse(r, 2)?,
            mid_price: t.parse(r, 3)?,
            best_bid: t.parse(r, 4)?,
            best_ask: t.parse(r, 5)?,
            spread: t.parse(r, 6)?,
            executed: [t.parse(r, 7)?, t.parse(r, 8)?],
            split_factor: t.parse(r, 9)?,
            volume,
            count,
        });
    }
    BarSeries::new(stock_id, bars)
}

/// Every `*.csv` in `dir`, in file-name order.
pub fn read_bars_dir(dir: &Path) -> Result<Vec<BarSeries>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_bars(p)).collect()
}

const EVENT_HEADER: [&str; 7] = ["stock_id", "date", "day_index", "minute", "sign", "window", "cumulative_return"];

pub fn write_events(path: &Path, events: &[ExtremeEvent]) -> Result<()> {
    let rows = events.iter().map(|e| {
        vec![
            e.stock_id.clone(),
            e.date.to_string(),
            e.day_index.to_string(),
            e.minute.to_string(),
            e.sign.name().to_string(),
            e.window.to_string(),
            fmt_f64(e.cumulative_return),
        ]
    });
    write_table(path, &header(&EVENT_HEADER), rows)
}

pub fn read_events(path: &Path) -> Result<Vec<ExtremeEvent>> {
    let t = Table::read(path)?;
    let c: Vec<usize> = EVENT_HEADER.iter().map(|n| t.column(n)).collect::<Result<_>>()?;
    (0..t.len())
        .map(|r| {
            Ok(ExtremeEvent {
                stock_id: t.str(r, c[0]).to_string(),
                date: t.parse::<NaiveDate>(r, c[1])?,
                day_index: t.parse(r, c[2])?,
                minute: t.parse(r, c[3])?,
                sign: t.parse::<EventSign>(r, c[4])?,
                window: t.parse(r, c[5])?,
                cumulative_return: t.parse(r, c[6])?,
            })
        })
        .collect()
}

pub fn curve_path(dir: &Path, group: &str) -> PathBuf {
    dir.join(format!("{}.csv", group.replace('/', "__")))
}

pub fn write_curve(dir: &Path, avg: &GroupAverage) -> Result<()> {
    let rows = (0..SLOTS).map(|i| vec![slot_time(i).to_string(), fmt_f64(avg.mean[i]), avg.counts[i].to_string()]);
    write_table(&curve_path(dir, &avg.group), &header(&["t", "mean", "count"]), rows)
}

pub fn read_curve(dir: &Path, group: &str, n_events: usize) -> Result<GroupAverage> {
    let path = curve_path(dir, group);
    let t = Table::read(&path)?;
    if t.len() != SLOTS {
        return Err(Error::malformed(path.display().to_string(), format!("{} rows, expected {SLOTS}", t.len())));
    }
    let (cm, cc) = (t.column("mean")?, t.column("count")?);
    Ok(GroupAverage {
        group: group.to_string(),
        n_events,
        mean: (0..SLOTS).map(|r| t.parse(r, cm)).collect::<Result<_>>()?,
        counts: (0..SLOTS).map(|r| t.parse(r, cc)).collect::<Result<_>>()?,
    })
}

/// One studied group with its peak.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRow {
    pub group: String,
    pub sign: EventSign,
    pub quantity: String,
    pub n_events: usize,
    pub peak: Option<(i32, f64)>,
}

const GROUP_HEADER: [&str; 6] = ["group", "sign", "quantity", "n_events", "t_max", "peak"];

pub fn write_groups(path: &Path, rows: &[GroupRow]) -> Result<()> {
    let rows = rows.iter().map(|g| {
        vec![
            g.group.clone(),
            g.sign.name().to_string(),
            g.quantity.clone(),
            g.n_events.to_string(),
            fmt_opt(g.peak.map(|p| p.0)),
            g.peak.map_or_else(String::new, |p| fmt_f64(p.1)),
        ]
    });
    write_table(path, &header(&GROUP_HEADER), rows)
}

pub fn read_groups(path: &Path) -> Result<Vec<GroupRow>> {
    let t = Table::read(path)?;
    let c: Vec<usize> = GROUP_HEADER.iter().map(|n| t.column(n)).collect::<Result<_>>()?;
    (0..t.len())
        .map(|r| {
            let t_max: Option<i32> = t.parse_opt(r, c[4])?;
            let peak: Option<f64> = t.parse_opt(r, c[5])?;
            Ok(GroupRow {
                group: t.str(r, c[0]).to_string(),
                sign: t.parse(r, c[1])?,
                quantity: t.str(r, c[2]).to_string(),
                n_events: t.parse(r, c[3])?,
                peak: t_max.zip(peak),
            })
        })
        .collect()
}

pub fn write_peaks(path: &Path, rows: &[PeakRow]) -> Result<()> {
    let cells = |p: Option<(i32, f64)>| match p {
        Some((t, v)) => [t.to_string(), fmt_f64(v)],
        None => [String::new(), String::new()],
    };
    let rows = rows.iter().map(|p| {
        let mut row = vec![
            p.sign.name().to_string(),
            p.side.name().to_string(),
            p.aggressiveness.name().to_string(),
        ];
        row.extend(cells(p.volume_peak));
        row.extend(cells(p.count_peak));
        row
    });
    let h = header(&["sign", "side", "aggressiveness", "volume_t_max", "volume_peak", "count_t_max", "count_peak"]);
    write_table(path, &h, rows)
}

pub fn write_cumret(path: &Path, c: &AlignedCumulativeReturn) -> Result<()> {
    let rows = (0..SLOTS).map(|i| vec![slot_time(i).to_string(), fmt_f64(c.mean[i]), c.counts[i].to_string()]);
    write_table(path, &header(&["t", "mean", "count"]), rows)
}

/// A fitted group, or the reason the fit was refused.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub group: String,
    pub requested: FitRange,
    pub outcome: std::result::Result<RelaxationFit, String>,
}

const FIT_HEADER: [&str; 12] = [
    "group",
    "status",
    "alpha",
    "stderr",
    "log_amplitude",
    "lo",
    "hi",
    "used_lo",
    "used_hi",
    "points_used",
    "points_dropped",
    "reason",
];

pub fn write_fits(path: &Path, rows: &[FitRow]) -> Result<()> {
    let rows = rows.iter().map(|f| match &f.outcome {
        Ok(fit) => vec![
            f.group.clone(),
            "ok".into(),
            fmt_f64(fit.alpha),
            fmt_f64(fit.stderr),
            fmt_f64(fit.log_amplitude),
            fit.requested.lo.to_string(),
            fit.requested.hi.to_string(),
            fit.used.lo.to_string(),
            fit.used.hi.to_string(),
            fit.points_used.to_string(),
            fit.points_dropped.to_string(),
            String::new(),
        ],
        Err(reason) => {
            let mut row = vec![f.group.clone(), "refused".into()];
            row.extend(std::iter::repeat_n(String::new(), 3));
            row.extend([f.requested.lo.to_string(), f.requested.hi.to_string()]);
            row.extend(std::iter::repeat_n(String::new(), 4));
            row.push(reason.clone());
            row
        }
    });
    write_table(path, &header(&FIT_HEADER), rows)
}

pub fn read_fits(path: &Path) -> Result<Vec<FitRow>> {
    let t = Table::read(path)?;
    let c: Vec<usize> = FIT_HEADER.iter().map(|n| t.column(n)).collect::<Result<_>>()?;
    (0..t.len())
        .map(|r| {
            let group = t.str(r, c[0]).to_string();
            let requested = FitRange {
                lo: t.parse(r, c[5])?,
                hi: t.parse(r, c[6])?,
            };
            let outcome = match t.str(r, c[1]) {
                "ok" => Ok(RelaxationFit {
                    group: group.clone(),
                    alpha: t.parse(r, c[2])?,
                    stderr: t.parse(r, c[3])?,
                    log_amplitude: t.parse(r, c[4])?,
                    requested,
                    used: FitRange {
                        lo: t.parse(r, c[7])?,
                        hi: t.parse(r, c[8])?,
                    },
                    points_used: t.parse(r, c[9])?,
                    points_dropped: t.parse(r, c[10])?,
                }),
                "refused" => Err(t.str(r, c[11]).to_string()),
                other => return Err(t.error(r, format!("unknown status {other:?}"))),
            };
            Ok(FitRow {
                group,
                requested,
                outcome,
            })
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_bars, ScenarioSpec};

    #[test]
    fn bars_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (series, _) = generate_bars(&ScenarioSpec {
            days: 2,
            ..ScenarioSpec::default()
        })
        .unwrap();
        write_bars(dir.path(), &series[0]).unwrap();
        let back = read_bars_dir(dir.path()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].stock_id, series[0].stock_id);
        for (a, b) in back[0].bars.iter().zip(&series[0].bars) {
            assert_eq!(a.count, b.count);
            assert!((a.mid_price - b.mid_price).abs() < 1e-9);
            for (k, v) in a.volume.iter() {
                assert!((v - b.volume[k]).abs() < 1e-9);
            }
        }
        write_bars(dir.path(), &back[0]).unwrap();
        let again = read_bars(&bar_path(dir.path(), &series[0].stock_id)).unwrap();
        assert_eq!(again, back[0]);
    }

    #[test]
    fn events_and_fits_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ev = vec![ExtremeEvent {
            stock_id: "000001".into(),
            date: NaiveDate::from_ymd_opt(2003, 3, 4).unwrap(),
            day_index: 2,
            minute: 77,
            sign: EventSign::Negative,
            window: 12,
            cumulative_return: -0.0625,
        }];
        let p = dir.path().join("events.csv");
        write_events(&p, &ev).unwrap();
        assert_eq!(read_events(&p).unwrap(), ev);

        let fit = RelaxationFit {
            group: "positive/volume".into(),
            alpha: 0.5,
            stderr: 0.03125,
            log_amplitude: 1.25,
            requested: FitRange { lo: 1, hi: 300 },
            used: FitRange { lo: 1, hi: 200 },
            points_used: 198,
            points_dropped: 2,
        };
        let rows = vec![
            FitRow {
                group: fit.group.clone(),
                requested: fit.requested,
                outcome: Ok(fit),
            },
            FitRow {
                group: "negative/spread".into(),
                requested: FitRange { lo: 1, hi: 300 },
                outcome: Err("2 positive points".into()),
            },
        ];
        let p = dir.path().join("fits.csv");
        write_fits(&p, &rows).unwrap();
        assert_eq!(read_fits(&p).unwrap(), rows);
    }

    #[test]
    fn nan_is_written_and_read() {
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        assert_eq!(fmt_f64(0.5), "0.5000000000");
        assert!("NaN".parse::<f64>().unwrap().is_nan());
    }
}
