//! Field dumps (JSON, one cell per line, 17 significant digits) and metrics
//! tables (CSV).

use std::collections::HashMap;
use std::io;

use microfield::construct::pompe::tile_node_values;
use microfield::construct::{ClosedFormDiskField, Refinement, StageMetrics};
use microfield::geometry::{Cell, Datum, Domain2, Payload, PiecewiseField, Shape, TilePayload};
use microfield::{Mat2, TracelessMat2, Vec2};
use serde::{Deserialize, Serialize};

pub const FIELD_SCHEMA: &str = "microfield-field/1";
pub const METRICS_SCHEMA: &str = "microfield-metrics/1";

/// Writes every float as `{:.16e}`, which round-trips exactly.
struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write!(w, "{v:.8e}")
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    v.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("utf-8 json")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    Triangle,
    Polygon,
    Tile,
    Disk,
}

fn m4(m: &Mat2) -> [f64; 4] {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

fn from_m4(a: &[f64; 4]) -> Mat2 {
    Mat2::new(a[0], a[1], a[2], a[3])
}

fn coords(m: &Mat2) -> [f64; 3] {
    let t = TracelessMat2::project(m);
    [t.a1, t.a2, t.a3]
}

fn p2(v: &Vec2) -> [f64; 2] {
    [v.x, v.y]
}

fn v2(p: &[f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

/// One cell. `gradient` holds the coordinates `(a1, a2, a3)` for reading;
/// `matrix` (row-major) is authoritative and also carries any trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CellDump {
    id: u64,
    generation: u32,
    kind: Kind,
    vertices: Vec<[f64; 2]>,
    gradient: [f64; 3],
    matrix: [f64; 4],
    translation: [f64; 2],
    values: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tile: Option<TileDump>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    disk: Option<DiskDump>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TileDump {
    origin: [f64; 2],
    basis: [f64; 4],
    amp: f64,
    /// Index into the dump's `piece_sets`.
    pieces: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct DiskDump {
    center: [f64; 2],
    radius: f64,
    sign: f64,
    embed3d: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum DatumDump {
    Affine { gradient: [f64; 3], matrix: [f64; 4], translation: [f64; 2] },
    Piecewise { cells: Vec<CellDump> },
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    domain: Domain2,
    datum: DatumDump,
    residual: f64,
    embed3d: bool,
    #[serde(default)]
    refinement: Option<Refinement>,
    /// Sub-triangle gradients shared by the tile cells.
    #[serde(default)]
    piece_sets: Vec<Vec<[f64; 4]>>,
}

#[derive(Deserialize)]
struct FieldDump {
    #[serde(flatten)]
    header: Header,
    cells: Vec<CellDump>,
}

/// Interns tile piece gradients by bit pattern.
#[derive(Default)]
struct PieceSets {
    index: HashMap<Vec<u64>, usize>,
    sets: Vec<Vec<[f64; 4]>>,
}

impl PieceSets {
    fn intern(&mut self, grads: &[Mat2]) -> usize {
        let set: Vec<[f64; 4]> = grads.iter().map(m4).collect();
        let key: Vec<u64> = set.iter().flatten().map(|x| x.to_bits()).collect();
        *self.index.entry(key).or_insert_with(|| {
            self.sets.push(set);
            self.sets.len() - 1
        })
    }
}

fn cell_dump(c: &Cell, pieces: &mut PieceSets) -> CellDump {
    let (grad, shift) = match &c.payload {
        Payload::Affine { grad, shift, .. } => (*grad, *shift),
        Payload::Tile(t) => (t.grad, t.shift),
        Payload::Disk(_) => (Mat2::zeros(), Vec2::zeros()),
    };
    let mut d = CellDump {
        id: c.id,
        generation: c.generation,
        kind: Kind::Triangle,
        vertices: Vec::new(),
        gradient: coords(&grad),
        matrix: m4(&grad),
        translation: p2(&shift),
        values: Vec::new(),
        tile: None,
        disk: None,
    };
    match (&c.shape, &c.payload) {
        (Shape::Triangle { v }, Payload::Affine { values, .. }) => {
            d.vertices = v.iter().map(p2).collect();
            d.values = values.iter().map(p2).collect();
        }
        (Shape::Polygon { v }, Payload::Affine { values, .. }) => {
            d.kind = Kind::Polygon;
            d.vertices = v.iter().map(p2).collect();
            d.values = values.iter().map(p2).collect();
        }
        (Shape::Tile { origin, basis }, Payload::Tile(t)) => {
            // nodal values are rebuilt from the placement on reading
            d.kind = Kind::Tile;
            d.vertices = c.shape.outline().iter().map(p2).collect();
            d.tile = Some(TileDump { origin: p2(origin), basis: m4(basis), amp: t.amp, pieces: pieces.intern(&t.sub_grads) });
        }
        (Shape::Disk { center, radius }, Payload::Disk(f)) => {
            d.kind = Kind::Disk;
            d.vertices = vec![p2(center)];
            d.disk = Some(DiskDump { center: p2(&f.center), radius: *radius, sign: f.sign, embed3d: f.embed3d });
        }
        _ => unreachable!("shape and payload kinds always agree"),
    }
    d
}

fn cell_from(d: &CellDump, pieces: &[Vec<[f64; 4]>]) -> Result<Cell, String> {
    let grad = from_m4(&d.matrix);
    let shift = v2(&d.translation);
    let values: Vec<Vec2> = d.values.iter().map(v2).collect();
    let verts: Vec<Vec2> = d.vertices.iter().map(v2).collect();
    let (shape, payload) = match d.kind {
        Kind::Triangle => {
            let v: [Vec2; 3] = verts.try_into().map_err(|_| format!("cell {}: a triangle needs 3 vertices", d.id))?;
            (Shape::Triangle { v }, Payload::Affine { grad, shift, values })
        }
        Kind::Polygon => (Shape::Polygon { v: verts }, Payload::Affine { grad, shift, values }),
        Kind::Tile => {
            let t = d.tile.as_ref().ok_or_else(|| format!("cell {}: tile data missing", d.id))?;
            let set = pieces.get(t.pieces).ok_or_else(|| format!("cell {}: unknown piece set {}", d.id, t.pieces))?;
            let (origin, basis) = (v2(&t.origin), from_m4(&t.basis));
            let (anchor, increments) = tile_node_values(&origin, &basis, t.amp, &grad, &shift);
            (
                Shape::Tile { origin, basis },
                Payload::Tile(TilePayload { grad, shift, amp: t.amp, anchor, increments, sub_grads: set.iter().map(from_m4).collect() }),
            )
        }
        Kind::Disk => {
            let k = d.disk.as_ref().ok_or_else(|| format!("cell {}: disk data missing", d.id))?;
            let center = v2(&k.center);
            (
                Shape::Disk { center, radius: k.radius },
                Payload::Disk(ClosedFormDiskField { center, radius: k.radius, sign: k.sign, embed3d: k.embed3d }),
            )
        }
    };
    Ok(Cell { id: d.id, shape, payload, generation: d.generation })
}

pub fn write_field(f: &PiecewiseField) -> String {
    let mut pieces = PieceSets::default();
    let cells: Vec<String> = f.cells.iter().map(|c| to_json(&cell_dump(c, &mut pieces))).collect();
    let datum = match &f.datum {
        Datum::Affine { grad, shift } => {
            DatumDump::Affine { gradient: coords(grad), matrix: m4(grad), translation: p2(shift) }
        }
        Datum::Piecewise { cells } => DatumDump::Piecewise { cells: cells.iter().map(|c| cell_dump(c, &mut pieces)).collect() },
    };
    let header = Header {
        schema: FIELD_SCHEMA.into(),
        domain: f.domain.clone(),
        datum,
        residual: f.residual,
        embed3d: f.embed3d,
        refinement: f.refinement.clone(),
        piece_sets: pieces.sets,
    };
    let head = to_json(&header);
    let mut out = String::with_capacity(head.len() + cells.iter().map(|c| c.len() + 2).sum::<usize>() + 8);
    out.push_str(&head[..head.len() - 1]);
    out.push_str(",\"cells\":[");
    for (k, c) in cells.iter().enumerate() {
        out.push_str(if k == 0 { "\n" } else { ",\n" });
        out.push_str(c);
    }
    out.push_str("\n]}\n");
    out
}

pub fn read_field(text: &str) -> Result<PiecewiseField, String> {
    let d: FieldDump = serde_json::from_str(text).map_err(|e| format!("malformed field dump: {e}"))?;
    let h = d.header;
    if h.schema != FIELD_SCHEMA {
        return Err(format!("field dump schema {:?} is not supported; expected {FIELD_SCHEMA:?}", h.schema));
    }
    let datum = match &h.datum {
        DatumDump::Affine { matrix, translation, .. } => {
            Datum::Affine { grad: from_m4(matrix), shift: v2(translation) }
        }
        DatumDump::Piecewise { cells } => {
            Datum::Piecewise { cells: cells.iter().map(|c| cell_from(c, &h.piece_sets)).collect::<Result<_, _>>()? }
        }
    };
    let cells = d.cells.iter().map(|c| cell_from(c, &h.piece_sets)).collect::<Result<Vec<_>, _>>()?;
    let mut f = PiecewiseField::new(h.domain, cells, datum);
    f.residual = h.residual;
    f.embed3d = h.embed3d;
    if let Some(r) = h.refinement {
        f = f.with_refinement(r);
    }
    Ok(f)
}

pub fn write_metrics(rows: &[StageMetrics]) -> String {
    let mut s = format!("# {METRICS_SCHEMA}\nstage,round,bad_fraction,p50,p95,max,sup_dev,cells\n");
    for m in rows {
        s.push_str(&format!(
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            m.stage, m.round, m.bad_fraction, m.p50, m.p95, m.max, m.sup_dev, m.cells
        ));
    }
    s
}

pub fn read_metrics(text: &str) -> Result<Vec<StageMetrics>, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(l) if l.trim_start_matches('#').trim() == METRICS_SCHEMA => {}
        other => return Err(format!("metrics table must start with '# {METRICS_SCHEMA}', found {other:?}")),
    }
    let header = lines.next().ok_or("metrics table has no header")?;
    if header.trim() != "stage,round,bad_fraction,p50,p95,max,sup_dev,cells" {
        return Err(format!("unexpected metrics header {header:?}"));
    }
    lines
        .enumerate()
        .map(|(k, l)| {
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            if f.len() != 8 {
                return Err(format!("metrics row {}: expected 8 fields", k + 1));
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|e| format!("metrics row {}: {e}", k + 1));
            Ok(StageMetrics {
                stage: f[0].parse().map_err(|e| format!("metrics row {}: {e}", k + 1))?,
                round: f[1].parse().map_err(|e| format!("metrics row {}: {e}", k + 1))?,
                bad_fraction: num(2)?,
                p50: num(3)?,
                p95: num(4)?,
                max: num(5)?,
                sup_dev: num(6)?,
                cells: num(7)?,
            })
        })
        .collect()
}
