use rand::Rng;

use super::decode::{constrain, gumbel};
use super::model::Generator;
use super::unroll::{TokenKind, TokenValue};
use crate::error::{Error, Result};
use crate::graph::{assemble, validate_walk, Assembly, AssemblySpec, BudgetEdge, TemporalWalk};

/// Profile and teacher-forced edges of the piece that continues `prefix`.
///
/// The piece replays the last `min(len, L - 1)` edges. When that window
/// reaches back to the first edge the piece is an initial one (`x = 1`,
/// `t0 = 1`); otherwise `x = 0` and `t0` is the budget of the edge just
/// before the window.
fn window(prefix: &[BudgetEdge], max_len: usize) -> (usize, f64, &[BudgetEdge]) {
    let n = prefix.len();
    let w = n.min(max_len - 1);
    if w == n {
        (1, 1.0, prefix)
    } else {
        (0, prefix[n - w - 1].t_bar, &prefix[n - w..])
    }
}

fn forced_piece(x: usize, t0: f64, edges: &[BudgetEdge], free_edges: usize) -> Vec<Option<TokenValue>> {
    let mut f = vec![Some(TokenValue::Cat(x)), Some(TokenValue::Time(t0))];
    for e in edges {
        f.extend([
            Some(TokenValue::Cat(e.u.0)),
            Some(TokenValue::Cat(e.v.0)),
            Some(TokenValue::Time(e.t_bar)),
        ]);
    }
    f.extend(std::iter::repeat_n(None, 3 * free_edges + 1));
    f
}

/// Sample the edge following `prefix` and the final flag, conditioned on
/// the latent `z` that generated the prefix.
pub fn extend_walk<R: Rng + ?Sized>(
    gen: &Generator,
    prefix: &TemporalWalk,
    z: &[f64],
    rng: &mut R,
) -> Result<(BudgetEdge, u8)> {
    if prefix.edges.is_empty() {
        return Err(Error::InvalidWalk("cannot extend an empty walk".into()));
    }
    let rep = validate_walk(prefix, Some(gen.n_nodes()));
    if !rep.time_valid || !rep.in_range {
        return Err(Error::InvalidWalk(format!(
            "invalid prefix (first violation at edge {:?})",
            rep.first_violation_index
        )));
    }
    Ok(extend_unchecked(gen, &prefix.edges, z, rng))
}

/// Minimax bounding may emit walks that fail validation; generation carries
/// on regardless and leaves filtering to assembly.
fn extend_unchecked<R: Rng + ?Sized>(gen: &Generator, prefix: &[BudgetEdge], z: &[f64], rng: &mut R) -> (BudgetEdge, u8) {
    let (x, t0, win) = window(prefix, gen.config().max_len);
    let forced = forced_piece(x, t0, win, 1);
    let (walks, _) = gen.unroll_pieces(&[z.to_vec()], &[forced], win.len() + 1, 1.0, false, rng);
    let piece = &walks[0];
    let edge = *piece.edges().last().expect("piece has an edge");
    (edge, piece.y())
}

/// Generate a whole walk: an initial piece with `x = 1`, then one edge at a
/// time until the final flag is set or `max_walk_len` edges exist.
pub fn generate_full_walk<R: Rng + ?Sized>(gen: &Generator, rng: &mut R) -> TemporalWalk {
    let cfg = gen.config();
    let z = gen.sample_z(rng);
    let forced = forced_piece(1, 1.0, &[], cfg.max_len);
    let (walks, _) = gen.unroll_pieces(std::slice::from_ref(&z), &[forced], cfg.max_len, 1.0, false, rng);
    let mut walk = TemporalWalk {
        edges: walks[0].edges(),
    };
    let mut y = walks[0].y();
    while y == 0 && walk.edges.len() < cfg.max_walk_len {
        let (e, flag) = extend_unchecked(gen, &walk.edges, &z, rng);
        walk.edges.push(e);
        y = flag;
    }
    walk
}

fn argmax(x: &[f64]) -> usize {
    (0..x.len()).fold(0, |b, i| if x[i] > x[b] { i } else { b })
}

/// Token-by-token recomputation of [`generate_full_walk`] that rebuilds every
/// piece from scratch without the batched unroll.
pub fn reference_full_walk<R: Rng + ?Sized>(gen: &Generator, rng: &mut R) -> TemporalWalk {
    let cfg = gen.config().clone();
    let z = gen.sample_z(rng);
    let mut edges: Vec<BudgetEdge> = Vec::new();
    loop {
        let n = edges.len();
        let (x, t0, given, free) = if n == 0 {
            (1, 1.0, Vec::new(), cfg.max_len)
        } else {
            let (x, t0, w) = window(&edges, cfg.max_len);
            (x, t0, w.to_vec(), 1)
        };
        let n_piece = given.len() + free;

        let mut state = gen.initial_state(&z);
        let mut input = vec![0.0; cfg.input_dim];
        let mut vals: Vec<TokenValue> = Vec::new();
        let mut prev_t = 1.0;
        for kind in TokenKind::sequence(n_piece) {
            let (next, _) = gen.lstm.step(&state, &input);
            state = next;
            let o = state.h.clone();
            let teacher = match kind {
                TokenKind::X => Some(TokenValue::Cat(x)),
                TokenKind::T0 => Some(TokenValue::Time(t0)),
                TokenKind::U(i) if i <= given.len() => Some(TokenValue::Cat(given[i - 1].u.0)),
                TokenKind::V(i) if i <= given.len() => Some(TokenValue::Cat(given[i - 1].v.0)),
                TokenKind::T(i) if i <= given.len() => Some(TokenValue::Time(given[i - 1].t_bar)),
                TokenKind::U(i) if i >= 2 && cfg.force_connectivity => Some(vals[vals.len() - 2]),
                _ => None,
            };
            let value = match teacher {
                Some(v) => v,
                None if kind.is_time() => {
                    let (raw, _) = gen.time.forward(&o, &cfg, cfg.noise, rng);
                    let slot = kind.time_slot().expect("budget token");
                    let slack = matches!(kind, TokenKind::T(i) if i >= 2);
                    let stats = gen.minimax_stats[slot];
                    TokenValue::Time(constrain(raw, prev_t, cfg.constraint, slack, &stats).0)
                }
                None => {
                    let head = match kind {
                        TokenKind::X => &gen.dec_x,
                        TokenKind::Y => &gen.dec_y,
                        _ => &gen.dec_v,
                    };
                    let q = head.forward(&o);
                    let g = if cfg.noise { gumbel(q.len(), rng) } else { vec![0.0; q.len()] };
                    let p: Vec<f64> = q.iter().zip(&g).map(|(a, b)| a + b).collect();
                    TokenValue::Cat(argmax(&p))
                }
            };
            if let TokenValue::Time(t) = value {
                prev_t = t;
            }
            input = match (kind, value) {
                (TokenKind::X | TokenKind::Y, TokenValue::Cat(i)) => gen.encode_flag_id(i).0,
                (_, TokenValue::Cat(i)) => gen.encode_node_id(i).0,
                (_, TokenValue::Time(t)) => gen.encode_time(t).0,
            };
            vals.push(value);
        }
        let y = vals.last().expect("y token").cat();
        for i in given.len()..n_piece {
            let b = 2 + 3 * i;
            edges.push(BudgetEdge::new(vals[b].cat(), vals[b + 1].cat(), vals[b + 2].time()));
        }
        if y == 1 || edges.len() >= cfg.max_walk_len {
            return TemporalWalk { edges };
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedGraph {
    pub assembly: Assembly,
    pub walks: Vec<TemporalWalk>,
}

/// Generate `n_walks` full walks and assemble them into one graph sample.
pub fn generate_graph<R: Rng + ?Sized>(
    gen: &Generator,
    n_walks: usize,
    spec: &AssemblySpec,
    rng: &mut R,
) -> Result<GeneratedGraph> {
    if n_walks == 0 {
        return Err(Error::Config("n_walks must be at least 1".into()));
    }
    if spec.n_nodes != gen.n_nodes() {
        return Err(Error::Config(format!(
            "assembly universe {} differs from the generator's {}",
            spec.n_nodes,
            gen.n_nodes()
        )));
    }
    let walks: Vec<TemporalWalk> = (0..n_walks).map(|_| generate_full_walk(gen, rng)).collect();
    let assembly = assemble(&walks, spec)?;
    Ok(GeneratedGraph { assembly, walks })
}
