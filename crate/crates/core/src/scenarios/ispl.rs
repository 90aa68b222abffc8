//! Interpreted-system descriptions of the foraging and flocking models,
//! generated as text for any number of robots and run through the parser.

use std::fmt::Write;

use super::{invalid, ConfigError, ScenarioConfig};
use crate::interp::SystemSpec;
use crate::world::Topology;

const DIRS: [&str; 4] = ["Up", "Down", "Left", "Right"];

/// Watch-and-imitate flocking. Each robot either moves one cell along its
/// stored direction or watches, copying the environment's `lastDir`: the
/// direction of the lowest-numbered robot that moved in the previous step.
/// Bounded arenas disable `Move` towards an edge; toroidal arenas wrap.
pub fn flocking_ispl_text(robots: usize, width: i32, height: i32, topology: Topology) -> String {
    let mut s = String::new();
    let dirs = DIRS.join(", ");
    let _ = writeln!(s, "-- watch-and-imitate flocking, {robots} robots, {width}x{height} {topology:?}\n");
    s.push_str("Agent Environment\n  Obsvars:\n");
    let _ = writeln!(s, "    lastDir : {{{dirs}}};");
    s.push_str("  end Obsvars\n  Vars:\n  end Vars\n  Actions = {none};\n");
    s.push_str("  Protocol:\n    Other : {none};\n  end Protocol\n  Evolution:\n");
    for i in 1..=robots {
        let mut guard = format!("Robot{i}.Action = Move");
        for j in 1..i {
            let _ = write!(guard, " and Robot{j}.Action = Watch");
        }
        let _ = writeln!(s, "    lastDir = Robot{i}.dir if {guard};");
    }
    s.push_str("  end Evolution\nend Agent\n\n");

    for i in 1..=robots {
        let _ = writeln!(s, "Agent Robot{i}");
        s.push_str("  Vars:\n");
        let _ = writeln!(s, "    x : 1..{width};\n    y : 1..{height};\n    dir : {{{dirs}}};");
        s.push_str("  end Vars\n  Actions = {Move, Watch};\n  Protocol:\n");
        match topology {
            Topology::Bounded => {
                let _ = writeln!(
                    s,
                    "    (dir = Up and y < {height}) or (dir = Down and y > 1) or (dir = Left and x > 1) or (dir = Right and x < {width}) : {{Move, Watch}};"
                );
                s.push_str("    Other : {Watch};\n");
            }
            Topology::Toroidal => s.push_str("    Other : {Move, Watch};\n"),
        }
        s.push_str("  end Protocol\n  Evolution:\n");
        match topology {
            Topology::Bounded => {
                s.push_str("    y = y + 1 if Action = Move and dir = Up;\n");
                s.push_str("    y = y - 1 if Action = Move and dir = Down;\n");
                s.push_str("    x = x - 1 if Action = Move and dir = Left;\n");
                s.push_str("    x = x + 1 if Action = Move and dir = Right;\n");
            }
            Topology::Toroidal => {
                let _ = writeln!(s, "    y = y + 1 if Action = Move and dir = Up and y < {height};");
                let _ = writeln!(s, "    y = 1 if Action = Move and dir = Up and y = {height};");
                s.push_str("    y = y - 1 if Action = Move and dir = Down and y > 1;\n");
                let _ = writeln!(s, "    y = {height} if Action = Move and dir = Down and y = 1;");
                s.push_str("    x = x - 1 if Action = Move and dir = Left and x > 1;\n");
                let _ = writeln!(s, "    x = {width} if Action = Move and dir = Left and x = 1;");
                let _ = writeln!(s, "    x = x + 1 if Action = Move and dir = Right and x < {width};");
                let _ = writeln!(s, "    x = 1 if Action = Move and dir = Right and x = {width};");
            }
        }
        s.push_str("    dir = Environment.lastDir if Action = Watch;\n");
        s.push_str("  end Evolution\nend Agent\n\n");
    }

    s.push_str("Evaluation\n");
    let mut pairs = Vec::new();
    for i in 1..=robots {
        for j in i + 1..=robots {
            pairs.push(format!("Robot{i}.dir = Robot{j}.dir"));
        }
    }
    let consensus = if pairs.is_empty() { "true".to_string() } else { pairs.join(" and ") };
    let _ = writeln!(s, "  consensus if {consensus};");
    s.push_str("end Evaluation\n\nInitStates\n  true;\nend InitStates\n\n");
    s.push_str("Formulae\n  AF consensus;\nend Formulae\n");
    s
}

pub fn flocking_ispl(cfg: &ScenarioConfig) -> Result<SystemSpec, ConfigError> {
    cfg.arena()?;
    Ok(SystemSpec::parse(&flocking_ispl_text(cfg.agents, cfg.width, cfg.height, cfg.topology))?)
}

/// Random-walk foraging. The environment exposes, per item, an availability
/// flag and its cell, and privately counts collected items. A robot may
/// pick an item only on its cell while it is available; the environment
/// then clears the flag and adds the number of distinct items picked.
/// `items` pins item cells; `None` leaves them free in the initial states.
pub fn foraging_ispl_text(
    robots: usize,
    width: i32,
    height: i32,
    items: &[Option<(i32, i32)>],
    starts: &[(i32, i32)],
) -> String {
    let m = items.len();
    let mut s = String::new();
    let _ = writeln!(s, "-- random-walk foraging, {robots} robots, {m} items, {width}x{height}\n");
    s.push_str("Agent Environment\n  Obsvars:\n");
    for j in 1..=m {
        let _ = writeln!(s, "    item{j} : boolean;\n    item{j}X : 1..{width};\n    item{j}Y : 1..{height};");
    }
    s.push_str("  end Obsvars\n  Vars:\n");
    let _ = writeln!(s, "    foundItems : 0..{m};");
    s.push_str("  end Vars\n  Actions = {none};\n  Protocol:\n    Other : {none};\n  end Protocol\n  Evolution:\n");
    let picked = |j: usize| -> String {
        let alts: Vec<String> = (1..=robots).map(|i| format!("Robot{i}.Action = Pick{j}")).collect();
        if alts.is_empty() {
            "false".into()
        } else {
            format!("({})", alts.join(" or "))
        }
    };
    for j in 1..=m {
        let _ = writeln!(s, "    item{j} = false if {};", picked(j));
    }
    for subset in 1u32..(1 << m) {
        let mut conj = Vec::new();
        for j in 1..=m {
            if subset & (1 << (j - 1)) != 0 {
                conj.push(picked(j));
            } else {
                conj.push(format!("!{}", picked(j)));
            }
        }
        let _ = writeln!(s, "    foundItems = foundItems + {} if {};", subset.count_ones(), conj.join(" and "));
    }
    s.push_str("  end Evolution\nend Agent\n\n");

    let mut actions = vec!["Up".to_string(), "Down".into(), "Left".into(), "Right".into(), "Wait".into()];
    actions.extend((1..=m).map(|j| format!("Pick{j}")));
    for i in 1..=robots {
        let _ = writeln!(s, "Agent Robot{i}");
        let _ = writeln!(s, "  Vars:\n    PosX : 1..{width};\n    PosY : 1..{height};\n  end Vars");
        let _ = writeln!(s, "  Actions = {{{}}};", actions.join(", "));
        s.push_str("  Protocol:\n");
        let _ = writeln!(s, "    PosY < {height} : {{Up}};");
        s.push_str("    PosY > 1 : {Down};\n    PosX > 1 : {Left};\n");
        let _ = writeln!(s, "    PosX < {width} : {{Right}};");
        for j in 1..=m {
            let _ = writeln!(
                s,
                "    PosX = Environment.item{j}X and PosY = Environment.item{j}Y and Environment.item{j} = true : {{Pick{j}}};"
            );
        }
        s.push_str("    Other : {Wait};\n  end Protocol\n  Evolution:\n");
        s.push_str("    PosY = PosY + 1 if Action = Up;\n    PosY = PosY - 1 if Action = Down;\n");
        s.push_str("    PosX = PosX - 1 if Action = Left;\n    PosX = PosX + 1 if Action = Right;\n");
        s.push_str("  end Evolution\nend Agent\n\n");
    }

    s.push_str("Evaluation\n");
    let _ = writeln!(s, "  allFound if Environment.foundItems = {m};");
    s.push_str("  noneFound if Environment.foundItems = 0;\n");
    for j in 1..=m {
        let _ = writeln!(s, "  collected{j} if Environment.item{j} = false;");
    }
    s.push_str("end Evaluation\n\nInitStates\n");
    let mut init = vec!["Environment.foundItems = 0".to_string()];
    for (j, cell) in items.iter().enumerate() {
        let j = j + 1;
        init.push(format!("Environment.item{j} = true"));
        if let Some((x, y)) = cell {
            init.push(format!("Environment.item{j}X = {x} and Environment.item{j}Y = {y}"));
        }
    }
    for (i, (x, y)) in starts.iter().enumerate() {
        init.push(format!("Robot{}.PosX = {x} and Robot{}.PosY = {y}", i + 1, i + 1));
    }
    let _ = writeln!(s, "  {};", init.join(" and "));
    s.push_str("end InitStates\n\nFormulae\n  EF allFound;\nend Formulae\n");
    s
}

pub fn foraging_ispl(cfg: &ScenarioConfig) -> Result<SystemSpec, ConfigError> {
    let arena = cfg.arena()?;
    if cfg.topology != Topology::Bounded {
        return invalid("foraging_ispl supports bounded arenas only");
    }
    let pinned = cfg.item_cells(&arena)?;
    let items: Vec<Option<(i32, i32)>> = match cfg.item_count {
        Some(n) if pinned.is_empty() => vec![None; n],
        Some(n) if n != pinned.len() => return invalid("item_count disagrees with items"),
        _ => pinned.iter().map(|p| Some((p.x, p.y))).collect(),
    };
    if items.len() > 8 {
        return invalid("foraging_ispl supports at most 8 items");
    }
    let starts = cfg
        .positions
        .iter()
        .take(cfg.agents)
        .map(|&[x, y]| arena.check(crate::kernel::Pos::new(x, y)).map(|p| (p.x, p.y)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SystemSpec::parse(&foraging_ispl_text(cfg.agents, cfg.width, cfg.height, &items, &starts))?)
}
