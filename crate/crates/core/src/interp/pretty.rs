use std::fmt::Write;

use super::ast::*;

pub fn pretty(spec: &SpecAst) -> String {
    let mut out = String::new();
    for agent in &spec.agents {
        write_agent(&mut out, agent);
        out.push('\n');
    }
    if !spec.evaluation.is_empty() {
        out.push_str("Evaluation\n");
        for p in &spec.evaluation {
            let _ = writeln!(out, "  {} if {};", p.name, expr(&p.body));
        }
        out.push_str("end Evaluation\n\n");
    }
    let _ = writeln!(out, "InitStates\n  {};\nend InitStates", expr(&spec.init));
    if !spec.formulae.is_empty() {
        out.push_str("\nFormulae\n");
        for f in &spec.formulae {
            let _ = writeln!(out, "  {f};");
        }
        out.push_str("end Formulae\n");
    }
    out
}

fn write_agent(out: &mut String, a: &AgentAst) {
    let _ = writeln!(out, "Agent {}", a.name);
    if !a.obsvars.is_empty() {
        out.push_str("  Obsvars:\n");
        write_decls(out, &a.obsvars);
        out.push_str("  end Obsvars\n");
    }
    out.push_str("  Vars:\n");
    write_decls(out, &a.vars);
    out.push_str("  end Vars\n");
    let _ = writeln!(out, "  Actions = {{{}}};", a.actions.join(", "));
    out.push_str("  Protocol:\n");
    for r in &a.protocol {
        let guard = match &r.guard {
            Guard::Other => "Other".to_string(),
            Guard::When(e) => expr(e),
        };
        let _ = writeln!(out, "    {guard} : {{{}}};", r.actions.join(", "));
    }
    out.push_str("  end Protocol\n  Evolution:\n");
    for r in &a.evolution {
        let assigns: Vec<String> = r.assigns.iter().map(|(v, e)| format!("{v} = {}", assigned(e))).collect();
        let _ = writeln!(out, "    {} if {};", assigns.join(" and "), expr(&r.guard));
    }
    out.push_str("  end Evolution\nend Agent\n");
}

fn write_decls(out: &mut String, decls: &[VarDecl]) {
    for d in decls {
        let ty = match &d.ty {
            TypeAst::Boolean => "boolean".to_string(),
            TypeAst::Range(lo, hi) => format!("{lo}..{hi}"),
            TypeAst::Enum(vs) => format!("{{{}}}", vs.join(", ")),
        };
        let _ = writeln!(out, "    {} : {ty};", d.name);
    }
}

/// Binary sub-expressions are always parenthesised, so printing never
/// depends on precedence and reparsing yields the same tree.
pub fn expr(e: &Expr) -> String {
    match e {
        Expr::Int(i) => i.to_string(),
        Expr::Bool(b) => b.to_string(),
        Expr::Ident(s) => s.clone(),
        Expr::Qualified(o, f) => format!("{o}.{f}"),
        Expr::Action => "Action".to_string(),
        Expr::Not(inner) => match &**inner {
            Expr::Not(_) => format!("!{}", expr(inner)),
            _ => format!("!{}", operand(inner)),
        },
        Expr::Bin(op, l, r) => format!("{} {} {}", operand(l), op.symbol(), operand(r)),
    }
}

fn operand(e: &Expr) -> String {
    match e {
        Expr::Bin(..) | Expr::Not(..) => format!("({})", expr(e)),
        Expr::Int(i) if *i < 0 => format!("({i})"),
        _ => expr(e),
    }
}

/// Right-hand sides of assignments are sums.
fn assigned(e: &Expr) -> String {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => expr(e),
        _ => operand(e),
    }
}
