//! Seeded design and testbench generators for tests and benchmarks.
//!
//! Random designs are built as ASTs, printed, and re-parsed, so every
//! generated design is expressible in the text format and valid by
//! construction: wires only reference earlier declarations, every wire
//! has one assign and every reg one update, and operand widths match.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::netlist::{parse_design, BinOp, Design, Expr, SignalDecl, SignalId, SignalKind};
use crate::sim::Testbench;

/// `r1 <= a; r2 <= r1; ...` with `n` registers, all `width` bits.
pub fn chain_design(n: usize, width: u32) -> Design {
    assert!(n >= 1);
    let mut text = format!("design chain{n}\ninput a : {width}\n");
    for i in 1..=n {
        text.push_str(&format!("reg r{i} : {width} = 0\n"));
    }
    text.push_str("always r1 <= a\n");
    for i in 2..=n {
        text.push_str(&format!("always r{i} <= r{}\n", i - 1));
    }
    let d = parse_design(&text, "chain").expect("chain design parses");
    d.validate().expect("chain design is valid");
    d
}

fn pick_width(rng: &mut ChaCha8Rng) -> u32 {
    rng.gen_range(1..=2)
}

fn gen_expr(rng: &mut ChaCha8Rng, avail: &[(SignalId, u32)], width: u32, depth: usize) -> Expr {
    fn leaf(rng: &mut ChaCha8Rng, avail: &[(SignalId, u32)], width: u32) -> Expr {
        let same: Vec<SignalId> = avail
            .iter()
            .filter(|(_, w)| *w == width)
            .map(|(id, _)| *id)
            .collect();
        if !same.is_empty() && rng.gen_bool(0.75) {
            Expr::Ref(same[rng.gen_range(0..same.len())])
        } else {
            Expr::Const {
                value: rng.gen_range(0..(1u64 << width)),
                width,
            }
        }
    }
    if depth == 0 {
        return leaf(rng, avail, width);
    }
    match rng.gen_range(0..10u32) {
        0..=3 => {
            let cond_w = pick_width(rng);
            Expr::Mux {
                cond: Box::new(gen_expr(rng, avail, cond_w, depth - 1)),
                then: Box::new(gen_expr(rng, avail, width, depth - 1)),
                els: Box::new(gen_expr(rng, avail, width, depth - 1)),
            }
        }
        4..=5 => {
            let op = [BinOp::And, BinOp::Or, BinOp::Xor, BinOp::Add][rng.gen_range(0..4)];
            Expr::Bin {
                op,
                lhs: Box::new(gen_expr(rng, avail, width, depth - 1)),
                rhs: Box::new(gen_expr(rng, avail, width, depth - 1)),
            }
        }
        6 => Expr::Not(Box::new(gen_expr(rng, avail, width, depth - 1))),
        7 if width == 1 => {
            let op = [BinOp::Eq, BinOp::Neq, BinOp::Lt][rng.gen_range(0..3)];
            let w = pick_width(rng);
            Expr::Bin {
                op,
                lhs: Box::new(gen_expr(rng, avail, w, depth - 1)),
                rhs: Box::new(gen_expr(rng, avail, w, depth - 1)),
            }
        }
        _ => leaf(rng, avail, width),
    }
}

/// A small random design: at most 8 signals, widths 1 or 2, mux-heavy
/// expressions, wires acyclic by construction. The same seed always
/// yields the same design.
pub fn random_design(seed: u64) -> Design {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_inputs = rng.gen_range(1..=3usize);
    let n_regs = rng.gen_range(1..=3usize);
    let n_wires = rng.gen_range(0..=2usize);

    let mut decls = Vec::new();
    for i in 0..n_inputs {
        decls.push(SignalDecl {
            name: format!("i{i}"),
            width: pick_width(&mut rng),
            kind: SignalKind::Input,
            reset_value: 0,
        });
    }
    for i in 0..n_regs {
        let width = pick_width(&mut rng);
        decls.push(SignalDecl {
            name: format!("r{i}"),
            width,
            kind: SignalKind::Reg,
            reset_value: rng.gen_range(0..(1u64 << width)),
        });
    }
    for i in 0..n_wires {
        decls.push(SignalDecl {
            name: format!("w{i}"),
            width: pick_width(&mut rng),
            kind: SignalKind::Wire,
            reset_value: 0,
        });
    }

    let all: Vec<(SignalId, u32)> = decls.iter().enumerate().map(|(i, d)| (i, d.width)).collect();
    let mut design = Design {
        name: format!("rand{seed}"),
        decls: decls.clone(),
        assigns: Default::default(),
        updates: Default::default(),
    };
    for (id, d) in decls.iter().enumerate() {
        match d.kind {
            SignalKind::Wire => {
                let earlier: Vec<(SignalId, u32)> =
                    all.iter().copied().filter(|(o, _)| *o < id).collect();
                let e = gen_expr(&mut rng, &earlier, d.width, 3);
                design.assigns.insert(id, e);
            }
            SignalKind::Reg => {
                let e = gen_expr(&mut rng, &all, d.width, 3);
                design.updates.insert(id, e);
            }
            SignalKind::Input => {}
        }
    }
    design.validate().expect("generated design is valid");
    let text = design.to_string();
    let parsed = parse_design(&text, "generated")
        .unwrap_or_else(|e| panic!("generated design parses: {e}\n---\n{text}"));
    parsed.validate().expect("parsed generated design is valid");
    parsed
}

/// Uniform random stimulus for every input, one row per cycle.
pub fn random_testbench(design: &Design, cycles: usize, seed: u64) -> Testbench {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<SignalId> = design.inputs().map(|(id, _)| id).collect();
    let rows = (0..cycles)
        .map(|_| {
            inputs
                .iter()
                .map(|&id| {
                    let w = design.decls[id].width;
                    if w == 64 {
                        rng.gen::<u64>()
                    } else {
                        rng.gen_range(0..(1u64 << w))
                    }
                })
                .collect()
        })
        .collect();
    Testbench { inputs, rows }
}
