//! CSV persistence for simulation logs, estimates and benchmark results.
//!
//! Every file has a header row. Timestamps are written with 9 decimals, all
//! other floats in shortest round-trip form, so re-reading a file reproduces
//! the in-memory values bit for bit. Booleans are written as `0`/`1`.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Writer};

use crate::error::DataError;
use crate::filter::FilterKind;
use crate::gait::{GroundTruthRecord, SimLogs};
use crate::harness::{Channel, ConvergenceCriteria, MonteCarloResult, RunResult};
use crate::lie::{Mat3, Vec3};
use crate::state::{BiasVector, FootKin, ImuSample, KinSample, RobotState};

pub const TRUTH_FILE: &str = "truth.csv";
pub const IMU_FILE: &str = "imu.csv";
pub const KIN_FILE: &str = "kin.csv";
pub const DISTRIBUTION_FILE: &str = "distribution.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

pub fn estimate_file(kind: FilterKind) -> String {
    format!("estimate_{kind}.csv")
}

pub fn mse_file(kind: FilterKind) -> String {
    format!("mse_{kind}.csv")
}

pub fn trials_file(kind: FilterKind) -> String {
    format!("trials_{kind}.csv")
}

fn vec_cols(prefix: &str) -> [String; 3] {
    ["x", "y", "z"].map(|a| format!("{prefix}{a}"))
}

fn mat_cols(prefix: &str) -> [String; 9] {
    std::array::from_fn(|k| format!("{prefix}r{}{}", k / 3, k % 3))
}

fn truth_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(mat_cols(""));
    h.extend(vec_cols("v"));
    h.extend(vec_cols("p"));
    h.extend(vec_cols("foot_l_"));
    h.extend(vec_cols("foot_r_"));
    h.extend(["foot_l_yaw".into(), "foot_r_yaw".into(), "contact_l".into(), "contact_r".into()]);
    h.extend(vec_cols("w"));
    h.extend(vec_cols("a"));
    h.extend(vec_cols("bg_"));
    h.extend(vec_cols("ba_"));
    h
}

fn imu_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(vec_cols("w"));
    h.extend(vec_cols("a"));
    h
}

fn kin_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for side in ["l", "r"] {
        h.extend(vec_cols(&format!("fk_{side}_")));
        h.extend(mat_cols(&format!("fk_{side}_")));
        h.push(format!("contact_{side}"));
    }
    h
}

fn estimate_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(mat_cols(""));
    h.extend(vec_cols("v"));
    h.extend(vec_cols("p"));
    h.extend(vec_cols("foot_l_"));
    h.extend(vec_cols("foot_r_"));
    h.extend(vec_cols("bg_"));
    h.extend(vec_cols("ba_"));
    h
}

/// Row under construction.
struct Row(Vec<String>);

impl Row {
    fn time(t: f64) -> Self {
        Row(vec![format!("{t:.9}")])
    }
    fn num(&mut self, x: f64) -> &mut Self {
        self.0.push(format!("{x}"));
        self
    }
    fn vec3(&mut self, v: &Vec3) -> &mut Self {
        for x in v.iter() {
            self.num(*x);
        }
        self
    }
    fn mat3(&mut self, m: &Mat3) -> &mut Self {
        for i in 0..3 {
            for j in 0..3 {
                self.num(m[(i, j)]);
            }
        }
        self
    }
    fn flag(&mut self, b: bool) -> &mut Self {
        self.0.push(if b { "1" } else { "0" }.into());
        self
    }
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Row>) -> Result<(), DataError> {
    let mut w = Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r.0)?;
    }
    w.flush()?;
    Ok(())
}

/// Parsed numeric table with columns in the requested order.
struct Table {
    file: String,
    rows: Vec<Vec<f64>>,
}

impl Table {
    /// Line number in the file of data row `i` (the header is line 1).
    fn line(i: usize) -> usize {
        i + 2
    }

    fn read(path: &Path, columns: &[String]) -> Result<Self, DataError> {
        let file = path
            .file_name()
            .map_or_else(|| path.display().to_string(), |f| f.to_string_lossy().into_owned());
        let mut rdr = ReaderBuilder::new().has_headers(true).flexible(true).from_path(path)?;
        let headers = rdr.headers()?.clone();
        let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
        let mut cols = Vec::with_capacity(columns.len());
        for c in columns {
            match index.get(c.as_str()) {
                Some(&i) => cols.push(i),
                None => {
                    return Err(DataError::MissingColumn {
                        file,
                        column: c.clone(),
                    })
                }
            }
        }
        let mut rows = Vec::new();
        let mut rec = StringRecord::new();
        let mut i = 0;
        loop {
            match rdr.read_record(&mut rec) {
                Ok(true) => {}
                Ok(false) => break,
                Err(e) => {
                    return Err(DataError::BadRow {
                        file,
                        row: Table::line(i),
                        msg: e.to_string(),
                    })
                }
            }
            if rec.len() != headers.len() {
                return Err(DataError::BadRow {
                    file,
                    row: Table::line(i),
                    msg: format!("expected {} fields, found {}", headers.len(), rec.len()),
                });
            }
            let mut vals = Vec::with_capacity(cols.len());
            for (&ci, name) in cols.iter().zip(columns) {
                let field = rec[ci].trim();
                let x: f64 = field.parse().map_err(|_| DataError::BadRow {
                    file: file.clone(),
                    row: Table::line(i),
                    msg: format!("column `{name}`: cannot parse `{field}` as a number"),
                })?;
                if !x.is_finite() {
                    return Err(DataError::BadRow {
                        file,
                        row: Table::line(i),
                        msg: format!("column `{name}`: non-finite value"),
                    });
                }
                vals.push(x);
            }
            rows.push(vals);
            i += 1;
        }
        Ok(Table { file, rows })
    }

    fn bad(&self, i: usize, msg: String) -> DataError {
        DataError::BadRow {
            file: self.file.clone(),
            row: Table::line(i),
            msg,
        }
    }

    fn flag(&self, i: usize, x: f64, name: &str) -> Result<bool, DataError> {
        match x {
            v if v == 0.0 => Ok(false),
            v if v == 1.0 => Ok(true),
            _ => Err(self.bad(i, format!("`{name}` must be 0 or 1"))),
        }
    }
}

/// Cursor over one parsed row.
struct Cells<'a> {
    vals: &'a [f64],
    at: usize,
}

impl Cells<'_> {
    fn next(&mut self) -> f64 {
        let x = self.vals[self.at];
        self.at += 1;
        x
    }
    fn vec3(&mut self) -> Vec3 {
        Vec3::new(self.next(), self.next(), self.next())
    }
    fn mat3(&mut self) -> Mat3 {
        let mut m = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = self.next();
            }
        }
        m
    }
}

fn check_increasing(table: &Table) -> Result<(), DataError> {
    for i in 1..table.rows.len() {
        if !(table.rows[i][0] > table.rows[i - 1][0]) {
            return Err(table.bad(i, "timestamps must be strictly increasing".into()));
        }
    }
    Ok(())
}

pub fn write_truth(path: &Path, truth: &[GroundTruthRecord], bias: &BiasVector) -> Result<(), DataError> {
    let rows = truth.iter().map(|r| {
        let mut row = Row::time(r.t);
        row.mat3(&r.r).vec3(&r.v).vec3(&r.p).vec3(&r.feet[0]).vec3(&r.feet[1]);
        row.num(r.foot_yaw[0]).num(r.foot_yaw[1]);
        row.flag(r.contact[0]).flag(r.contact[1]);
        row.vec3(&r.omega).vec3(&r.accel).vec3(&bias.bg).vec3(&bias.ba);
        row
    });
    write_rows(path, &truth_header(), rows)
}

pub fn read_truth(path: &Path) -> Result<(Vec<GroundTruthRecord>, BiasVector), DataError> {
    let table = Table::read(path, &truth_header())?;
    check_increasing(&table)?;
    let mut truth = Vec::with_capacity(table.rows.len());
    let mut bias = BiasVector::default();
    for (i, vals) in table.rows.iter().enumerate() {
        let mut c = Cells { vals, at: 0 };
        let t = c.next();
        let r = c.mat3();
        let v = c.vec3();
        let p = c.vec3();
        let feet = [c.vec3(), c.vec3()];
        let foot_yaw = [c.next(), c.next()];
        let contact = [table.flag(i, c.next(), "contact_l")?, table.flag(i, c.next(), "contact_r")?];
        let omega = c.vec3();
        let accel = c.vec3();
        let b = BiasVector::new(c.vec3(), c.vec3());
        if i == 0 {
            bias = b;
        } else if b != bias {
            return Err(table.bad(i, "bias columns must be constant".into()));
        }
        truth.push(GroundTruthRecord {
            t,
            r,
            v,
            p,
            feet,
            foot_yaw,
            contact,
            omega,
            accel,
        });
    }
    Ok((truth, bias))
}

pub fn write_imu(path: &Path, imu: &[ImuSample]) -> Result<(), DataError> {
    let rows = imu.iter().map(|s| {
        let mut row = Row::time(s.t);
        row.vec3(&s.omega).vec3(&s.accel);
        row
    });
    write_rows(path, &imu_header(), rows)
}

pub fn read_imu(path: &Path) -> Result<Vec<ImuSample>, DataError> {
    let table = Table::read(path, &imu_header())?;
    check_increasing(&table)?;
    Ok(table
        .rows
        .iter()
        .map(|vals| {
            let mut c = Cells { vals, at: 0 };
            ImuSample {
                t: c.next(),
                omega: c.vec3(),
                accel: c.vec3(),
            }
        })
        .collect())
}

pub fn write_kin(path: &Path, kin: &[KinSample]) -> Result<(), DataError> {
    let rows = kin.iter().map(|s| {
        let mut row = Row::time(s.t);
        for f in &s.feet {
            row.vec3(&f.p_fk).mat3(&f.r_fk).flag(f.contact);
        }
        row
    });
    write_rows(path, &kin_header(), rows)
}

pub fn read_kin(path: &Path) -> Result<Vec<KinSample>, DataError> {
    let table = Table::read(path, &kin_header())?;
    check_increasing(&table)?;
    let mut out = Vec::with_capacity(table.rows.len());
    for (i, vals) in table.rows.iter().enumerate() {
        let mut c = Cells { vals, at: 0 };
        let t = c.next();
        let mut foot = |name: &str| -> Result<FootKin, DataError> {
            let p_fk = c.vec3();
            let r_fk = c.mat3();
            let contact = table.flag(i, c.next(), name)?;
            Ok(FootKin { p_fk, r_fk, contact })
        };
        let left = foot("contact_l")?;
        let right = foot("contact_r")?;
        out.push(KinSample { t, feet: [left, right] });
    }
    Ok(out)
}

/// Writes `truth.csv`, `imu.csv` and `kin.csv` into `dir`.
pub fn write_logs(dir: &Path, logs: &SimLogs) -> Result<(), DataError> {
    write_truth(&dir.join(TRUTH_FILE), &logs.truth, &logs.bias)?;
    write_imu(&dir.join(IMU_FILE), &logs.imu)?;
    write_kin(&dir.join(KIN_FILE), &logs.kin)
}

/// Reads the three log files from `dir` and checks that they share one time base.
pub fn read_logs(dir: &Path) -> Result<SimLogs, DataError> {
    let (truth, bias) = read_truth(&dir.join(TRUTH_FILE))?;
    let imu = read_imu(&dir.join(IMU_FILE))?;
    let kin = read_kin(&dir.join(KIN_FILE))?;
    if imu.len() != truth.len() || kin.len() != truth.len() {
        return Err(DataError::Inconsistent(format!(
            "row counts differ: {TRUTH_FILE} {}, {IMU_FILE} {}, {KIN_FILE} {}",
            truth.len(),
            imu.len(),
            kin.len()
        )));
    }
    for (i, ((tr, im), kn)) in truth.iter().zip(&imu).zip(&kin).enumerate() {
        if tr.t != im.t || tr.t != kn.t {
            return Err(DataError::Inconsistent(format!(
                "timestamps differ at line {} ({} / {} / {})",
                i + 2,
                tr.t,
                im.t,
                kn.t
            )));
        }
    }
    Ok(SimLogs { truth, imu, kin, bias })
}

pub fn write_estimates(path: &Path, times: &[f64], estimates: &[RobotState]) -> Result<(), DataError> {
    if times.len() != estimates.len() {
        return Err(DataError::Inconsistent(format!(
            "{} timestamps for {} estimates",
            times.len(),
            estimates.len()
        )));
    }
    let rows = times.iter().zip(estimates).map(|(&t, s)| {
        let mut row = Row::time(t);
        row.mat3(s.rotation()).vec3(s.velocity()).vec3(s.position());
        row.vec3(s.x.col(2)).vec3(s.x.col(3)).vec3(&s.bias.bg).vec3(&s.bias.ba);
        row
    });
    write_rows(path, &estimate_header(), rows)
}

pub fn read_estimates(path: &Path) -> Result<(Vec<f64>, Vec<RobotState>), DataError> {
    let table = Table::read(path, &estimate_header())?;
    check_increasing(&table)?;
    let mut times = Vec::with_capacity(table.rows.len());
    let mut states = Vec::with_capacity(table.rows.len());
    for vals in &table.rows {
        let mut c = Cells { vals, at: 0 };
        times.push(c.next());
        let r = c.mat3();
        let v = c.vec3();
        let p = c.vec3();
        let fl = c.vec3();
        let fr = c.vec3();
        let bias = BiasVector::new(c.vec3(), c.vec3());
        states.push(RobotState::new(r, v, p, fl, fr, bias));
    }
    Ok((times, states))
}

fn fmt_time(t: Option<f64>) -> String {
    match t {
        Some(t) if t.is_finite() => format!("{t:.9}"),
        Some(_) => "inf".into(),
        None => String::new(),
    }
}

/// Per-channel MSE and convergence time of a single run. Empty convergence
/// field: channel not tracked; `inf`: never settled.
pub fn write_run_metrics(path: &Path, run: &RunResult) -> Result<(), DataError> {
    let header = ["channel", "mse", "convergence_s"].map(String::from);
    let mut w = Writer::from_path(path)?;
    w.write_record(&header)?;
    for c in Channel::ALL {
        let conv = match run.convergence.get(&c) {
            Some(Some(t)) => fmt_time(Some(*t)),
            Some(None) => "inf".into(),
            None => String::new(),
        };
        w.write_record([c.name().to_string(), format!("{}", run.mse[&c]), conv])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per Monte-Carlo trial.
pub fn write_trials(path: &Path, mc: &MonteCarloResult) -> Result<(), DataError> {
    let conv_channels: Vec<Channel> = mc
        .trials
        .first()
        .map(|t| t.convergence.keys().copied().collect())
        .unwrap_or_default();
    let mut header = vec!["trial".to_string(), "init_seed".to_string()];
    header.extend(Channel::ALL.iter().map(|c| format!("mse_{c}")));
    header.extend(conv_channels.iter().map(|c| format!("conv_{c}")));
    let mut w = Writer::from_path(path)?;
    w.write_record(&header)?;
    for t in &mc.trials {
        let mut rec = vec![t.trial.to_string(), t.init_seed.to_string()];
        rec.extend(Channel::ALL.iter().map(|c| format!("{}", t.mse[c])));
        rec.extend(
            conv_channels
                .iter()
                .map(|c| fmt_time(Some(t.convergence[c].unwrap_or(f64::INFINITY)))),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// MSE distribution and median convergence per filter and channel.
pub fn write_distribution(path: &Path, results: &[MonteCarloResult]) -> Result<(), DataError> {
    let header = [
        "filter",
        "channel",
        "mse_min",
        "mse_q1",
        "mse_median",
        "mse_q3",
        "mse_max",
        "median_convergence_s",
    ]
    .map(String::from);
    let mut w = Writer::from_path(path)?;
    w.write_record(&header)?;
    for mc in results {
        for c in Channel::ALL {
            let d = mc.mse[&c];
            w.write_record([
                mc.kind.name().to_string(),
                c.name().to_string(),
                format!("{}", d.min),
                format!("{}", d.q1),
                format!("{}", d.median),
                format!("{}", d.q3),
                format!("{}", d.max),
                fmt_time(mc.median_convergence.get(&c).copied()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn fmt_conv(t: Option<f64>) -> String {
    match t {
        Some(t) if t.is_finite() => format!("{t:.3}"),
        Some(_) => "n/c".into(),
        None => "-".into(),
    }
}

fn criteria_lines(criteria: &ConvergenceCriteria) -> String {
    let bands: Vec<String> = criteria.bands.iter().map(|(c, b)| format!("{c}<{b}")).collect();
    format!("convergence: |error| {} held for {} s\n", bands.join(", "), criteria.hold)
}

/// Side-by-side table of single-run results.
pub fn run_summary(runs: &[RunResult], criteria: &ConvergenceCriteria) -> String {
    let mut s = String::new();
    s.push_str(&format!("{:<8}", "channel"));
    for r in runs {
        s.push_str(&format!(" {:>14} {:>10}", format!("mse_{}", r.kind), format!("t_{}", r.kind)));
    }
    s.push('\n');
    for c in Channel::ALL {
        s.push_str(&format!("{:<8}", c.name()));
        for r in runs {
            let conv = r.convergence.get(&c).map(|t| t.unwrap_or(f64::INFINITY));
            s.push_str(&format!(" {:>14.6e} {:>10}", r.mse[&c], fmt_conv(conv)));
        }
        s.push('\n');
    }
    s.push_str(&criteria_lines(criteria));
    s
}

/// Side-by-side table of Monte-Carlo medians.
pub fn benchmark_summary(results: &[MonteCarloResult], criteria: &ConvergenceCriteria) -> String {
    let mut s = String::new();
    if let Some(first) = results.first() {
        s.push_str(&format!("trials: {}  seed: {}\n", first.trials.len(), first.seed));
    }
    s.push_str(&format!("{:<8}", "channel"));
    for r in results {
        s.push_str(&format!(
            " {:>18} {:>12}",
            format!("median_mse_{}", r.kind),
            format!("median_t_{}", r.kind)
        ));
    }
    s.push('\n');
    for c in Channel::ALL {
        s.push_str(&format!("{:<8}", c.name()));
        for r in results {
            s.push_str(&format!(
                " {:>18.6e} {:>12}",
                r.mse[&c].median,
                fmt_conv(r.median_convergence.get(&c).copied())
            ));
        }
        s.push('\n');
    }
    s.push_str(&criteria_lines(criteria));
    for r in results {
        let h = &r.health;
        s.push_str(&format!(
            "{} health: min eig {:.3e}, psd violations {}, max orthonormality error {:.3e}{}{}\n",
            r.kind,
            h.min_eigenvalue,
            h.psd_violations,
            h.max_orthonormality_error,
            h.max_quaternion_norm_error
                .map_or(String::new(), |q| format!(", max |‖q‖-1| {q:.3e}")),
            if h.non_finite { ", NON-FINITE VALUES" } else { "" }
        ));
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), DataError> {
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
