//! Interconnection of white-box and black-box subsystems into one model,
//! and eigenvalue sweeps over a subsystem scaling factor.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::modal::{analyze, Dominance, ModalReport, StatePartition};
use crate::realization::StateSpaceModel;
use crate::scalar::{cabs, Complex, Real};
use crate::scan_io::ModelFile;

pub const ALGEBRAIC_LOOP_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    WhiteBox,
    BlackBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subsystem<T: Real> {
    pub id: String,
    pub kind: Kind,
    pub model: StateSpaceModel<T>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

fn check_unique(names: &[String], what: &'static str) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(Error::Duplicate {
                kind: what,
                name: n.clone(),
            });
        }
    }
    Ok(())
}

impl<T: Real> Subsystem<T> {
    /// Ports default to `u0, u1, …` and `y0, y1, …`.
    pub fn new(id: impl Into<String>, kind: Kind, model: StateSpaceModel<T>) -> Self {
        let inputs = (0..model.n_inputs()).map(|k| format!("u{k}")).collect();
        let outputs = (0..model.n_outputs()).map(|k| format!("y{k}")).collect();
        Self {
            id: id.into(),
            kind,
            model,
            inputs,
            outputs,
        }
    }

    pub fn with_ports(mut self, inputs: Vec<String>, outputs: Vec<String>) -> Result<Self> {
        if inputs.len() != self.model.n_inputs() || outputs.len() != self.model.n_outputs() {
            return Err(Error::Dimension(format!(
                "subsystem {}: {} input / {} output labels for a {}x{} model",
                self.id,
                inputs.len(),
                outputs.len(),
                self.model.n_outputs(),
                self.model.n_inputs()
            )));
        }
        check_unique(&inputs, "input port")?;
        check_unique(&outputs, "output port")?;
        self.inputs = inputs;
        self.outputs = outputs;
        Ok(self)
    }
}

/// `subsystem.port`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PortRef {
    pub subsystem: String,
    pub port: String,
}

impl PortRef {
    pub fn new(subsystem: impl Into<String>, port: impl Into<String>) -> Self {
        Self {
            subsystem: subsystem.into(),
            port: port.into(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.split_once('.') {
            Some((s, p)) if !s.is_empty() && !p.is_empty() => Ok(Self::new(s, p)),
            _ => Err(Error::UnresolvedPort(format!("{text:?} is not of the form subsystem.port"))),
        }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.subsystem, self.port)
    }
}

/// Output `from` drives input `to` through `gain`.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection<T: Real> {
    pub from: PortRef,
    pub to: PortRef,
    pub gain: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositionPlan<T: Real> {
    pub subsystems: Vec<Subsystem<T>>,
    pub connections: Vec<Connection<T>>,
    /// Subsystem inputs driven from outside.
    pub external_inputs: Vec<PortRef>,
    /// Subsystem outputs exposed to the outside.
    pub external_outputs: Vec<PortRef>,
}

/// The global model and the state indices owned by each subsystem kind.
#[derive(Debug, Clone)]
pub struct Composition<T: Real> {
    pub model: StateSpaceModel<T>,
    pub white: Vec<usize>,
    pub black: Vec<usize>,
}

impl<T: Real> Composition<T> {
    pub fn partition(&self) -> StatePartition {
        StatePartition {
            white: self.white.clone(),
            black: self.black.clone(),
        }
    }
}

struct Offsets {
    input: usize,
    output: usize,
}

struct Layout<'a, T: Real> {
    order: Vec<&'a Subsystem<T>>,
    offsets: BTreeMap<&'a str, Offsets>,
}

impl<'a, T: Real> Layout<'a, T> {
    fn new(plan: &'a CompositionPlan<T>) -> Result<Self> {
        let ids: Vec<String> = plan.subsystems.iter().map(|s| s.id.clone()).collect();
        check_unique(&ids, "subsystem")?;
        let mut order: Vec<&Subsystem<T>> = plan.subsystems.iter().filter(|s| s.kind == Kind::WhiteBox).collect();
        order.extend(plan.subsystems.iter().filter(|s| s.kind == Kind::BlackBox));
        let mut offsets = BTreeMap::new();
        let (mut m, mut p) = (0, 0);
        for s in &order {
            offsets.insert(
                s.id.as_str(),
                Offsets {
                    input: m,
                    output: p,
                },
            );
            m += s.model.n_inputs();
            p += s.model.n_outputs();
        }
        Ok(Self { order, offsets })
    }

    fn find(&self, port: &PortRef, output: bool) -> Result<usize> {
        let sub = self
            .order
            .iter()
            .find(|s| s.id == port.subsystem)
            .ok_or_else(|| Error::UnresolvedPort(format!("{port}: no subsystem {:?}", port.subsystem)))?;
        let names = if output { &sub.outputs } else { &sub.inputs };
        let k = names.iter().position(|n| *n == port.port).ok_or_else(|| {
            Error::UnresolvedPort(format!(
                "{port}: {} has no {} port {:?}",
                sub.id,
                if output { "output" } else { "input" },
                port.port
            ))
        })?;
        let off = &self.offsets[sub.id.as_str()];
        Ok(if output { off.output + k } else { off.input + k })
    }
}

fn block_diag<T: Real>(parts: impl Iterator<Item = DMatrix<T>> + Clone) -> DMatrix<T> {
    let rows = parts.clone().map(|m| m.nrows()).sum();
    let cols = parts.clone().map(|m| m.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for m in parts {
        out.view_mut((r, c), m.shape()).copy_from(&m);
        r += m.nrows();
        c += m.ncols();
    }
    out
}

fn condition_number<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::one();
    }
    let (_, sv, _) = linalg::svd(m);
    let hi = sv.iter().fold(T::zero(), |a, &x| a.max(x));
    let lo = sv.iter().fold(hi, |a, &x| a.min(x));
    if lo > T::zero() {
        hi / lo
    } else {
        T::max_value().unwrap_or(T::one())
    }
}

/// Closes `u = K y + E w` around the stacked subsystems `y = C x + D u`.
/// White-box states come first, then black-box, each in plan order.
pub fn compose<T: Real>(plan: &CompositionPlan<T>) -> Result<Composition<T>> {
    let layout = Layout::new(plan)?;
    let subs = &layout.order;
    let a = block_diag(subs.iter().map(|s| s.model.a.clone()));
    let b = block_diag(subs.iter().map(|s| s.model.b.clone()));
    let c = block_diag(subs.iter().map(|s| s.model.c.clone()));
    let d = block_diag(subs.iter().map(|s| s.model.d.clone()));
    let (n, m, p) = (a.nrows(), b.ncols(), c.nrows());

    let mut k = DMatrix::zeros(m, p);
    for conn in &plan.connections {
        let from = layout.find(&conn.from, true)?;
        let to = layout.find(&conn.to, false)?;
        k[(to, from)] += conn.gain;
    }
    let mut e = DMatrix::zeros(m, plan.external_inputs.len());
    for (col, port) in plan.external_inputs.iter().enumerate() {
        e[(layout.find(port, false)?, col)] = T::one();
    }
    let mut f = DMatrix::zeros(plan.external_outputs.len(), p);
    for (row, port) in plan.external_outputs.iter().enumerate() {
        f[(row, layout.find(port, true)?)] = T::one();
    }

    let closure = DMatrix::identity(p, p) - &d * &k;
    let cond = condition_number(&closure);
    let singular = || Error::AlgebraicLoop {
        subsystems: loop_members(plan, &layout),
        condition: cond.to_f64_lossy(),
    };
    if !(cond <= T::lit(ALGEBRAIC_LOOP_CONDITION)) {
        return Err(singular());
    }
    let mm = closure.lu().try_inverse().ok_or_else(singular)?;

    let kmc = &k * &mm * &c;
    let a_f = &a + &b * &kmc;
    let b_f = &b * (&e + &k * &mm * &d * &e);
    let c_f = &f * &mm * &c;
    let d_f = &f * &mm * &d * &e;

    let mut labels = Vec::with_capacity(n);
    let mut white = Vec::new();
    let mut black = Vec::new();
    for s in subs {
        let base = labels.len();
        labels.extend(s.model.state_labels.iter().map(|l| format!("{}.{l}", s.id)));
        let idx = base..labels.len();
        match s.kind {
            Kind::WhiteBox => white.extend(idx),
            Kind::BlackBox => black.extend(idx),
        }
    }
    let model = StateSpaceModel::new(a_f, b_f, c_f, d_f)?.with_state_labels(labels)?;
    Ok(Composition { model, white, black })
}

/// Subsystems with feedthrough on a connection path.
fn loop_members<T: Real>(plan: &CompositionPlan<T>, layout: &Layout<'_, T>) -> Vec<String> {
    let has_d = |id: &str| {
        layout
            .order
            .iter()
            .find(|s| s.id == id)
            .is_some_and(|s| s.model.d.iter().any(|x| *x != T::zero()))
    };
    let mut out: Vec<String> = plan
        .connections
        .iter()
        .flat_map(|c| [c.from.subsystem.clone(), c.to.subsystem.clone()])
        .filter(|id| has_d(id))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Scales the named subsystem's `B` and `C` by `√factor`, leaving `A` alone.
pub fn scale_subsystem<T: Real>(plan: &CompositionPlan<T>, id: &str, factor: T) -> Result<CompositionPlan<T>> {
    if !(factor > T::zero()) || !factor.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "scaling factor must be finite and positive, got {}",
            factor.to_f64_lossy()
        )));
    }
    let mut out = plan.clone();
    let sub = out
        .subsystems
        .iter_mut()
        .find(|s| s.id == id)
        .ok_or_else(|| Error::UnknownSubsystem(id.to_string()))?;
    let g = factor.sqrt();
    sub.model.b *= g;
    sub.model.c *= g;
    Ok(out)
}

/// One mode at one sweep factor, carrying the id of its trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedMode<T: Real> {
    pub mode_id: usize,
    pub lambda: Complex<T>,
    pub zeta: T,
    pub freq_hz: T,
    pub dominance: Dominance,
}

#[derive(Debug, Clone)]
pub struct SweepPoint<T: Real> {
    pub factor: T,
    /// Modes ordered by trajectory id, or the failure message.
    pub outcome: std::result::Result<Vec<TrackedMode<T>>, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing<T: Real> {
    /// First factor, in sweep order, with an eigenvalue of real part ≥ 0.
    pub unstable_factor: T,
    /// The stable factor immediately preceding it, if any.
    pub last_stable: Option<T>,
}

#[derive(Debug, Clone)]
pub struct SweepResult<T: Real> {
    pub points: Vec<SweepPoint<T>>,
    pub crossing: Option<Crossing<T>>,
}

impl<T: Real> SweepResult<T> {
    pub fn failures(&self) -> impl Iterator<Item = (T, &str)> {
        self.points
            .iter()
            .filter_map(|p| p.outcome.as_ref().err().map(|e| (p.factor, e.as_str())))
    }

    /// Trajectory of one mode id across the successful factors.
    pub fn trajectory(&self, mode_id: usize) -> Vec<(T, Complex<T>)> {
        self.points
            .iter()
            .filter_map(|p| p.outcome.as_ref().ok().map(|m| (p.factor, m)))
            .filter_map(|(f, modes)| modes.iter().find(|m| m.mode_id == mode_id).map(|m| (f, m.lambda)))
            .collect()
    }

    pub fn crossing_summary(&self) -> String {
        match &self.crossing {
            None => "stable throughout".to_string(),
            Some(c) => match c.last_stable {
                Some(s) => format!(
                    "first unstable factor {} (last stable factor {})",
                    c.unstable_factor.to_f64_lossy(),
                    s.to_f64_lossy()
                ),
                None => format!("first unstable factor {}", c.unstable_factor.to_f64_lossy()),
            },
        }
    }
}

fn track_distance<T: Real>(prev: Complex<T>, next: Complex<T>) -> T {
    cabs(next - prev) / (cabs(prev) + T::one())
}

fn zeta_of<T: Real>(l: Complex<T>) -> T {
    crate::modal::damping_ratio(l)
}

/// Assigns trajectory ids to `modes` by greedy nearest matching against
/// `prev`; ties go to the more similar damping ratio.
fn track<T: Real>(prev: &[TrackedMode<T>], report: &ModalReport<T>, next_id: &mut usize) -> Vec<TrackedMode<T>> {
    let fresh: Vec<TrackedMode<T>> = report
        .modes
        .iter()
        .map(|m| TrackedMode {
            mode_id: 0,
            lambda: m.lambda,
            zeta: m.zeta,
            freq_hz: m.freq_hz,
            dominance: m.dominance,
        })
        .collect();
    let mut cands: Vec<(T, T, usize, usize)> = Vec::with_capacity(prev.len() * fresh.len());
    for (i, p) in prev.iter().enumerate() {
        for (j, q) in fresh.iter().enumerate() {
            let dz = (zeta_of(p.lambda) - zeta_of(q.lambda)).abs();
            cands.push((track_distance(p.lambda, q.lambda), dz, i, j));
        }
    }
    cands.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.partial_cmp(&b.1).unwrap())
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    let mut taken_prev = vec![false; prev.len()];
    let mut assigned: Vec<Option<usize>> = vec![None; fresh.len()];
    for (_, _, i, j) in cands {
        if !taken_prev[i] && assigned[j].is_none() {
            taken_prev[i] = true;
            assigned[j] = Some(prev[i].mode_id);
        }
    }
    let mut out: Vec<TrackedMode<T>> = fresh
        .into_iter()
        .zip(assigned)
        .map(|(mut m, id)| {
            m.mode_id = id.unwrap_or_else(|| {
                *next_id += 1;
                *next_id
            });
            m
        })
        .collect();
    out.sort_by_key(|m| m.mode_id);
    out
}

/// Sweeps over models supplied by `build`, one per factor. Factors are
/// evaluated in parallel; a failing factor is recorded and skipped.
pub fn sweep_with<T, F>(factors: &[T], ratio: T, build: F) -> Result<SweepResult<T>>
where
    T: Real,
    F: Fn(T) -> Result<(StateSpaceModel<T>, StatePartition)> + Sync,
{
    if factors.iter().any(|f| !(f.is_finite() && *f > T::zero())) {
        return Err(Error::InvalidArgument("sweep factors must be finite and positive".into()));
    }
    let reports: Vec<Result<ModalReport<T>>> = factors
        .par_iter()
        .map(|&f| {
            let (model, partition) = build(f)?;
            analyze(&model, &partition, ratio)
        })
        .collect();

    let mut points = Vec::with_capacity(factors.len());
    let mut prev: Option<Vec<TrackedMode<T>>> = None;
    let mut next_id = 0;
    for (&factor, report) in factors.iter().zip(reports) {
        let outcome = match report {
            Ok(rep) => {
                let modes = match &prev {
                    Some(p) => track(p, &rep, &mut next_id),
                    None => track(&[], &rep, &mut next_id),
                };
                prev = Some(modes.clone());
                Ok(modes)
            }
            Err(e) => Err(e.to_string()),
        };
        points.push(SweepPoint { factor, outcome });
    }

    let mut crossing = None;
    let mut last_stable = None;
    for p in &points {
        if let Ok(modes) = &p.outcome {
            if modes.iter().any(|m| m.lambda.re >= T::zero()) {
                crossing = Some(Crossing {
                    unstable_factor: p.factor,
                    last_stable,
                });
                break;
            }
            last_stable = Some(p.factor);
        }
    }
    Ok(SweepResult { points, crossing })
}

/// Scales subsystem `id` by each factor, composes and analyses.
pub fn sensitivity_sweep<T: Real>(
    plan: &CompositionPlan<T>,
    id: &str,
    factors: &[T],
    ratio: T,
) -> Result<SweepResult<T>> {
    if !plan.subsystems.iter().any(|s| s.id == id) {
        return Err(Error::UnknownSubsystem(id.to_string()));
    }
    sweep_with(factors, ratio, |f| {
        let comp = compose(&scale_subsystem(plan, id, f)?)?;
        let part = comp.partition();
        Ok((comp.model, part))
    })
}

/// `factor, mode_id, re, im, zeta, f_hz, dominance`; failed factors are omitted.
pub fn write_sweep_csv<T: Real, W: Write>(result: &SweepResult<T>, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["factor", "mode_id", "re", "im", "zeta", "f_hz", "dominance"])?;
    for p in &result.points {
        if let Ok(modes) = &p.outcome {
            for m in modes {
                wtr.write_record([
                    format!("{}", p.factor.to_f64_lossy()),
                    m.mode_id.to_string(),
                    format!("{}", m.lambda.re.to_f64_lossy()),
                    format!("{}", m.lambda.im.to_f64_lossy()),
                    format!("{}", m.zeta.to_f64_lossy()),
                    format!("{}", m.freq_hz.to_f64_lossy()),
                    m.dominance.to_string(),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Path(String),
    Inline(ModelFile),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsystemSpec {
    pub id: String,
    pub kind: Kind,
    pub model: ModelSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExternalSpec {
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub outputs: Vec<String>,
}

/// JSON plan: `subsystems`, `connections` as `[from, to, gain]`, `externals`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanFile {
    pub subsystems: Vec<SubsystemSpec>,
    #[serde(default)]
    pub connections: Vec<(String, String, f64)>,
    #[serde(default)]
    pub externals: ExternalSpec,
}

impl PlanFile {
    /// Model paths are resolved against `base_dir`.
    pub fn into_plan<T: Real>(self, base_dir: &Path) -> Result<CompositionPlan<T>> {
        let mut subsystems = Vec::with_capacity(self.subsystems.len());
        for entry in self.subsystems {
            let model = match entry.model {
                ModelSource::Path(p) => crate::scan_io::load_model(base_dir.join(p))?,
                ModelSource::Inline(m) => m.into_model()?,
            };
            let mut sub = Subsystem::new(entry.id, entry.kind, model);
            if entry.inputs.is_some() || entry.outputs.is_some() {
                let inputs = entry.inputs.unwrap_or_else(|| sub.inputs.clone());
                let outputs = entry.outputs.unwrap_or_else(|| sub.outputs.clone());
                sub = sub.with_ports(inputs, outputs)?;
            }
            subsystems.push(sub);
        }
        let connections = self
            .connections
            .into_iter()
            .map(|(from, to, gain)| {
                Ok(Connection {
                    from: PortRef::parse(&from)?,
                    to: PortRef::parse(&to)?,
                    gain: T::lit(gain),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let parse_all = |v: Vec<String>| v.iter().map(|s| PortRef::parse(s)).collect::<Result<Vec<_>>>();
        Ok(CompositionPlan {
            subsystems,
            connections,
            external_inputs: parse_all(self.externals.inputs)?,
            external_outputs: parse_all(self.externals.outputs)?,
        })
    }
}

pub fn load_plan<T: Real>(path: impl AsRef<Path>) -> Result<CompositionPlan<T>> {
    let path = path.as_ref();
    let file: PlanFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    file.into_plan(path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    fn lag(gain: f64) -> StateSpaceModel<f64> {
        StateSpaceModel::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, gain),
            DMatrix::zeros(1, 1),
        )
        .unwrap()
    }

    fn port(s: &str) -> PortRef {
        PortRef::parse(s).unwrap()
    }

    fn conn(from: &str, to: &str, gain: f64) -> Connection<f64> {
        Connection {
            from: port(from),
            to: port(to),
            gain,
        }
    }

    /// Three unit lags in a ring with loop gain `−2`; unstable once scaled past 4.
    pub(crate) fn ring() -> CompositionPlan<f64> {
        CompositionPlan {
            subsystems: vec![
                Subsystem::new("g1", Kind::WhiteBox, lag(2.0)),
                Subsystem::new("g2", Kind::BlackBox, lag(1.0)),
                Subsystem::new("g3", Kind::WhiteBox, lag(1.0)),
            ],
            connections: vec![conn("g1.y0", "g2.u0", 1.0), conn("g2.y0", "g3.u0", 1.0), conn("g3.y0", "g1.u0", -1.0)],
            external_inputs: vec![port("g1.u0")],
            external_outputs: vec![port("g3.y0")],
        }
    }

    #[test]
    fn disconnected_is_block_diagonal() {
        let mut slow = lag(1.0);
        slow.a[(0, 0)] = -3.0;
        let plan = CompositionPlan {
            subsystems: vec![
                Subsystem::new("b", Kind::BlackBox, slow),
                Subsystem::new("w", Kind::WhiteBox, lag(1.0)),
            ],
            connections: vec![],
            external_inputs: vec![],
            external_outputs: vec![],
        };
        let comp = compose(&plan).unwrap();
        assert_eq!(comp.model.a, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -3.0]));
        assert_eq!(comp.white, vec![0]);
        assert_eq!(comp.black, vec![1]);
        assert_eq!(comp.model.state_labels, vec!["w.x0", "b.x0"]);
    }

    #[test]
    fn unity_feedback_moves_pole() {
        let plan = CompositionPlan {
            subsystems: vec![Subsystem::new("p", Kind::WhiteBox, lag(1.0))],
            connections: vec![conn("p.y0", "p.u0", -1.0)],
            external_inputs: vec![port("p.u0")],
            external_outputs: vec![port("p.y0")],
        };
        let comp = compose(&plan).unwrap();
        assert!((comp.model.a[(0, 0)] + 2.0).abs() < 1e-15);
        // closed loop 1/(s+2)
        let g = comp.model.eval_tf(cplx(0.0, 0.0)).unwrap()[(0, 0)];
        assert!((g - cplx(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn feedback_creates_cross_coupling() {
        let plan = CompositionPlan {
            subsystems: vec![
                Subsystem::new("bb", Kind::BlackBox, lag(1.0)),
                Subsystem::new("wb", Kind::WhiteBox, lag(1.0)),
            ],
            connections: vec![conn("wb.y0", "bb.u0", 1.0), conn("bb.y0", "wb.u0", -1.0)],
            external_inputs: vec![],
            external_outputs: vec![],
        };
        let a = compose(&plan).unwrap().model.a;
        assert!(a[(0, 1)] != 0.0 && a[(1, 0)] != 0.0);
    }

    #[test]
    fn algebraic_loop_rejected() {
        let unity = StateSpaceModel::static_gain(DMatrix::from_element(1, 1, 1.0));
        let plan = CompositionPlan {
            subsystems: vec![Subsystem::new("k", Kind::WhiteBox, unity)],
            connections: vec![conn("k.y0", "k.u0", 1.0)],
            external_inputs: vec![],
            external_outputs: vec![],
        };
        match compose(&plan) {
            Err(Error::AlgebraicLoop { subsystems, .. }) => assert_eq!(subsystems, vec!["k".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dangling_port_and_duplicates() {
        let mut plan = ring();
        plan.connections.push(conn("g9.y0", "g1.u0", 1.0));
        assert!(matches!(compose(&plan), Err(Error::UnresolvedPort(_))));
        let mut plan = ring();
        plan.connections.push(conn("g1.y7", "g1.u0", 1.0));
        assert!(matches!(compose(&plan), Err(Error::UnresolvedPort(_))));
        let mut plan = ring();
        plan.subsystems.push(Subsystem::new("g1", Kind::BlackBox, lag(1.0)));
        assert!(matches!(compose(&plan), Err(Error::Duplicate { .. })));
        let sub = Subsystem::new("x", Kind::WhiteBox, lag(1.0));
        assert!(sub.clone().with_ports(vec!["a".into()], vec!["b".into()]).is_ok());
        assert!(sub.with_ports(vec!["a".into(), "a".into()], vec!["b".into()]).is_err());
    }

    #[test]
    fn scaling() {
        let plan = ring();
        assert_eq!(scale_subsystem(&plan, "g1", 1.0).unwrap(), plan);
        let four = scale_subsystem(&plan, "g1", 4.0).unwrap();
        assert_eq!(four.subsystems[0].model.b[(0, 0)], 2.0);
        assert_eq!(four.subsystems[0].model.c[(0, 0)], 4.0);
        assert_eq!(four.subsystems[0].model.a, plan.subsystems[0].model.a);
        assert!(matches!(scale_subsystem(&plan, "nope", 2.0), Err(Error::UnknownSubsystem(_))));
        assert!(scale_subsystem(&plan, "g1", 0.0).is_err());
    }

    #[test]
    fn ring_crossing_is_bracketed() {
        // (s+1)³ + 2f = 0 crosses the imaginary axis at f = 4
        let factors: Vec<f64> = (0..=16).map(|k| 1.0 + 0.25 * k as f64).collect();
        let res = sensitivity_sweep(&ring(), "g1", &factors, 4.0).unwrap();
        let c = res.crossing.unwrap();
        let lo = c.last_stable.unwrap();
        assert!(lo <= 4.0 && 4.0 <= c.unstable_factor);
        assert!((c.unstable_factor - lo - 0.25).abs() < 1e-12);
        assert_eq!(res.failures().count(), 0);
        let stable = sensitivity_sweep(&ring(), "g1", &[1.0, 2.0], 4.0).unwrap();
        assert_eq!(stable.crossing_summary(), "stable throughout");
    }

    #[test]
    fn single_factor_matches_compose() {
        let res = sensitivity_sweep(&ring(), "g1", &[1.0], 4.0).unwrap();
        let modes = res.points[0].outcome.as_ref().unwrap();
        let eig = compose(&ring()).unwrap().model.eigenvalues().unwrap();
        for m in modes {
            assert!(eig.iter().any(|e| (e - m.lambda).norm() < 1e-12));
        }
    }

    #[test]
    fn trajectories_are_continuous() {
        let factors: Vec<f64> = (0..20).map(|k| 1.0 + 0.1 * k as f64).collect();
        let res = sensitivity_sweep(&ring(), "g1", &factors, 4.0).unwrap();
        for id in 1..=3 {
            let traj = res.trajectory(id);
            assert_eq!(traj.len(), factors.len());
            for w in traj.windows(2) {
                assert!((w[1].1 - w[0].1).norm() < 0.2, "{traj:?}");
            }
        }
    }

    #[test]
    fn plan_file_inline_models() {
        let json = r#"{
            "subsystems": [
                {"id": "p", "kind": "white_box",
                 "model": {"A": [[-1.0]], "B": [[1.0]], "C": [[1.0]], "D": [[0.0]]},
                 "inputs": ["v"], "outputs": ["i"]}
            ],
            "connections": [["p.i", "p.v", -1.0]],
            "externals": {"inputs": ["p.v"], "outputs": ["p.i"]}
        }"#;
        let file: PlanFile = serde_json::from_str(json).unwrap();
        let plan: CompositionPlan<f64> = file.into_plan(Path::new(".")).unwrap();
        let comp = compose(&plan).unwrap();
        assert!((comp.model.a[(0, 0)] + 2.0).abs() < 1e-15);
    }
}
