//! Model files: syntax tree, parser and assembly into a [`System`].

use std::collections::{BTreeMap, HashSet};

use ogwb_core::control::control;
use ogwb_core::echronos::{build_system, initial_state, preset_invariants, SystemConfig};
use ogwb_core::hw::{self, HwVariant};
use ogwb_core::kernel::command::is_label;
use ogwb_core::kernel::{
    Action, Builtin, Command, Cond, Expr, Layout, NatSet, System, Type, Update, Value, VarId,
};

use crate::error::{ErrorKind, ParseError};
use crate::lexer::{lex, Pos, Tok, Token};
use crate::typeck::{infer, unify, Ty, TypeError};

/// A config value as written.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ConfigValue {
    Num(u128),
    Word(String),
    Map(Vec<(u32, u32)>),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ConfigEntry {
    pub key: String,
    pub value: ConfigValue,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VarItem {
    pub id: VarId,
    pub value: Value,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TaskItem {
    pub name: String,
    pub owner: u32,
    /// Whether `control` is applied to the whole body.
    pub controlled: bool,
    /// The body as written (inner `control` blocks already expanded).
    pub body: Command,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AssertItem {
    pub task: String,
    pub label: String,
    pub pred: Expr,
}

/// The syntax tree of a model file. Printing it and parsing the result
/// gives it back unchanged.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ModelFile {
    pub name: String,
    pub preset: Option<String>,
    pub config: Vec<ConfigEntry>,
    /// Hardware/OS variables plus declared ones; expressions refer to it.
    pub layout: Layout,
    pub vars: Vec<VarItem>,
    pub init: Vec<VarItem>,
    pub tasks: Vec<TaskItem>,
    pub asserts: Vec<AssertItem>,
    pub invariants: Vec<(String, Expr)>,
}

/// A parsed model ready to check.
#[derive(Clone, Debug)]
pub struct Model {
    pub file: ModelFile,
    pub system: System,
    pub invariants: Vec<(String, Expr)>,
}

pub const PRESETS: [&str; 1] = ["echronos"];

pub fn parse_model(text: &str) -> Result<Model, ParseError> {
    parse_model_with(text, &[])
}

/// Parses with config entries overridden (or added) by `overrides`, each a
/// `(key, value text)` pair as given on a command line.
pub fn parse_model_with(text: &str, overrides: &[(String, String)]) -> Result<Model, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        i: 0,
        layout: Layout::canonical(SystemConfig::new(1, 0, 0).routines(), 0, false),
        cfg: SystemConfig::new(1, 0, 0),
        labels: HashSet::new(),
        spans: Vec::new(),
    };
    p.file(overrides)
}

fn override_value(key: &str, text: &str) -> Result<ConfigValue, ParseError> {
    let toks = lex(text).map_err(|e| ParseError { message: format!("--{key}: {}", e.message), ..e })?;
    let mut p = Parser {
        toks,
        i: 0,
        layout: Layout::canonical(SystemConfig::new(1, 0, 0).routines(), 0, false),
        cfg: SystemConfig::new(1, 0, 0),
        labels: HashSet::new(),
        spans: Vec::new(),
    };
    let v = p.config_value()?;
    p.expect(&Tok::Eof, "end of value")?;
    Ok(v)
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    layout: Layout,
    cfg: SystemConfig,
    /// Labels of the task being parsed.
    labels: HashSet<String>,
    /// Start of every subexpression of the expression being parsed, for
    /// placing type errors.
    spans: Vec<(Pos, Expr)>,
}

type PResult<T> = Result<T, ParseError>;

fn is_kw(t: &Tok, kw: &str) -> bool {
    matches!(t, Tok::Ident(s) if s == kw)
}

const HW_MACROS: [&str; 9] = [
    "SVC_now",
    "SVCaRequest",
    "ITake",
    "IRet",
    "SVCaTake",
    "SVCaEnable",
    "SVCaDisable",
    "IntDisable",
    "IntEnable",
];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, kind: ErrorKind, pos: Pos, msg: impl Into<String>) -> PResult<T> {
        Err(ParseError::new(kind, pos, msg))
    }

    fn syntax<T>(&self, expected: &str) -> PResult<T> {
        self.err(ErrorKind::Syntax, self.pos(), format!("expected {expected}, found {}", self.peek()))
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if is_kw(self.peek(), kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> PResult<()> {
        if self.eat(t) {
            Ok(())
        } else {
            self.syntax(what)
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.syntax(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Pos)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let pos = self.pos();
                self.bump();
                Ok((s, pos))
            }
            _ => self.syntax(what),
        }
    }

    fn num(&mut self, what: &str) -> PResult<(u128, Pos)> {
        match *self.peek() {
            Tok::Num(n) => {
                let pos = self.pos();
                self.bump();
                Ok((n, pos))
            }
            _ => self.syntax(what),
        }
    }

    fn small(&mut self, what: &str) -> PResult<u32> {
        let (n, pos) = self.num(what)?;
        u32::try_from(n).or_else(|_| self.err(ErrorKind::Syntax, pos, format!("{n} is too large")))
    }

    // ---- file structure ----

    fn file(&mut self, overrides: &[(String, String)]) -> PResult<Model> {
        self.expect_kw("system")?;
        let name = match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                s
            }
            _ => return self.syntax("a quoted system name"),
        };
        let preset = if self.eat_kw("preset") {
            let (p, pos) = self.ident("a preset name")?;
            if !PRESETS.contains(&p.as_str()) {
                return self.err(ErrorKind::UnknownIdentifier, pos, format!("no preset named `{p}`"));
            }
            Some(p)
        } else {
            None
        };
        let config_pos = self.pos();
        let (config, value_pos) = self.config_block()?;
        let mut effective = config.clone();
        for (key, text) in overrides {
            let value = override_value(key, text)?;
            match effective.iter_mut().find(|e| &e.key == key) {
                Some(e) => e.value = value,
                None => effective.push(ConfigEntry { key: key.clone(), value }),
            }
        }
        // overridden values are blamed on the block
        let at = |key: &str| match (config.iter().position(|e| e.key == key), overrides.iter().any(|(k, _)| k == key)) {
            (Some(i), false) => value_pos[i],
            _ => config_pos,
        };
        self.cfg = build_config(&effective, config_pos, at)?;
        self.layout = self.cfg.layout();

        let mut file = ModelFile {
            name,
            preset: preset.clone(),
            config,
            layout: self.layout.clone(),
            vars: Vec::new(),
            init: Vec::new(),
            tasks: Vec::new(),
            asserts: Vec::new(),
            invariants: Vec::new(),
        };
        let mut task_pos = Vec::new();
        let mut assert_pos = Vec::new();
        let mut invariant_names = HashSet::new();
        loop {
            let pos = self.pos();
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(kw) => match kw.as_str() {
                    "var" | "task" | "controlled" if preset.is_some() => {
                        return self.err(
                            ErrorKind::Syntax,
                            pos,
                            "a preset model cannot declare variables or tasks",
                        )
                    }
                    "var" => {
                        self.bump();
                        file.vars.push(self.var_decl()?);
                    }
                    "init" => {
                        self.bump();
                        file.init.extend(self.init_block()?);
                    }
                    "task" | "controlled" => {
                        let t = self.task()?;
                        if file.tasks.iter().any(|x| x.name == t.name) {
                            return self.err(ErrorKind::Syntax, pos, format!("task `{}` declared twice", t.name));
                        }
                        task_pos.push(pos);
                        file.tasks.push(t);
                    }
                    "assert" => {
                        self.bump();
                        assert_pos.push(pos);
                        file.asserts.push(self.assert_item()?);
                    }
                    "invariant" => {
                        self.bump();
                        let (n, npos) = self.ident("an invariant name")?;
                        if !invariant_names.insert(n.clone()) {
                            return self.err(ErrorKind::Syntax, npos, format!("invariant `{n}` declared twice"));
                        }
                        self.expect(&Tok::Colon, "`:`")?;
                        let e = self.pred()?;
                        self.eat(&Tok::Semi);
                        file.invariants.push((n, e));
                    }
                    _ => return self.syntax("`var`, `init`, `task`, `assert` or `invariant`"),
                },
                _ => return self.syntax("`var`, `init`, `task`, `assert` or `invariant`"),
            }
        }
        file.layout = self.layout.clone();
        let mut system = self.assemble(&file, config_pos, &task_pos)?;
        for (a, pos) in file.asserts.iter().zip(&assert_pos) {
            attach_assertion(&mut system, a).or_else(|m| self.err(ErrorKind::UnknownIdentifier, *pos, m))?;
        }
        let invariants = if file.invariants.is_empty() && preset.is_some() {
            preset_invariants()
        } else {
            file.invariants.clone()
        };
        Ok(Model {
            file,
            system,
            invariants,
        })
    }

    fn assemble(&self, file: &ModelFile, config_pos: Pos, task_pos: &[Pos]) -> PResult<System> {
        let cfg = &self.cfg;
        if file.preset.is_some() {
            let mut sys = build_system(cfg).or_else(|e| self.err(ErrorKind::ConfigInvalid, config_pos, e.to_string()))?;
            sys.name = file.name.clone();
            return Ok(sys);
        }
        let env = cfg.env().or_else(|e| self.err(ErrorKind::ConfigInvalid, config_pos, e.to_string()))?;
        let mut init = initial_state(cfg, &self.layout);
        for v in file.vars.iter().chain(&file.init) {
            init.set(v.id, v.value.clone());
        }
        let tasks = file
            .tasks
            .iter()
            .map(|t| ogwb_core::kernel::Task {
                name: t.name.clone(),
                owner: t.owner,
                body: if t.controlled {
                    control(t.owner, t.body.clone())
                } else {
                    t.body.clone()
                },
            })
            .collect();
        let sys = System {
            name: file.name.clone(),
            tasks,
            layout: self.layout.clone(),
            init,
            env,
            config: cfg.clone(),
        };
        if let Err(e) = sys.validate() {
            let pos = match &e {
                ogwb_core::kernel::SystemError::Command { task, .. } => sys
                    .task_index(task)
                    .map_or(config_pos, |i| task_pos[i]),
                _ => config_pos,
            };
            return self.err(ErrorKind::Type, pos, e.to_string());
        }
        Ok(sys)
    }

    /// The entries, and where each value starts.
    fn config_block(&mut self) -> PResult<(Vec<ConfigEntry>, Vec<Pos>)> {
        self.expect_kw("config")?;
        self.expect(&Tok::LBrace, "`{`")?;
        let mut out: Vec<ConfigEntry> = Vec::new();
        let mut value_pos = Vec::new();
        while !self.eat(&Tok::RBrace) {
            let (key, pos) = self.ident("a config key or `}`")?;
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return self.err(
                    ErrorKind::ConfigInvalid,
                    pos,
                    format!("unknown config key `{key}` (known: {})", CONFIG_KEYS.join(", ")),
                );
            }
            if out.iter().any(|e| e.key == key) {
                return self.err(ErrorKind::ConfigInvalid, pos, format!("`{key}` set twice"));
            }
            self.expect(&Tok::Eq, "`=`")?;
            value_pos.push(self.pos());
            let value = self.config_value()?;
            self.eat(&Tok::Semi);
            out.push(ConfigEntry { key, value });
        }
        Ok((out, value_pos))
    }

    fn config_value(&mut self) -> PResult<ConfigValue> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(ConfigValue::Num(n))
            }
            Tok::Ident(w) => {
                self.bump();
                Ok(ConfigValue::Word(w))
            }
            Tok::LBrace => {
                self.bump();
                let mut items = Vec::new();
                if !self.eat(&Tok::RBrace) {
                    loop {
                        let k = self.small("a key")?;
                        self.expect(&Tok::Colon, "`:`")?;
                        let v = self.small("a value")?;
                        items.push((k, v));
                        if self.eat(&Tok::RBrace) {
                            break;
                        }
                        self.expect(&Tok::Comma, "`,` or `}`")?;
                    }
                }
                Ok(ConfigValue::Map(items))
            }
            _ => self.syntax("a number, word or `{`"),
        }
    }

    fn var_decl(&mut self) -> PResult<VarItem> {
        let (name, pos) = self.ident("a variable name")?;
        if Builtin::from_name(&name).is_some() || RESERVED.contains(&name.as_str()) || HW_MACROS.contains(&name.as_str()) {
            return self.err(ErrorKind::Syntax, pos, format!("`{name}` is reserved"));
        }
        self.expect(&Tok::Colon, "`:`")?;
        let ty = self.ty()?;
        let id = self
            .layout
            .declare(&name, ty.clone())
            .or_else(|e| self.err(ErrorKind::Type, pos, e.to_string()))?;
        let value = if self.eat(&Tok::Eq) { self.value(&ty)? } else { ty.default_value() };
        self.eat(&Tok::Semi);
        Ok(VarItem { id, value })
    }

    fn init_block(&mut self) -> PResult<Vec<VarItem>> {
        self.expect(&Tok::LBrace, "`{`")?;
        let mut out = Vec::new();
        while !self.eat(&Tok::RBrace) {
            let (name, pos) = self.ident("a variable name or `}`")?;
            let id = self.variable(&name, pos)?;
            self.expect(&Tok::Eq, "`=`")?;
            let ty = self.layout.ty(id).clone();
            let value = self.value(&ty)?;
            self.expect(&Tok::Semi, "`;`")?;
            out.push(VarItem { id, value });
        }
        Ok(out)
    }

    fn variable(&self, name: &str, pos: Pos) -> PResult<VarId> {
        self.layout
            .lookup(name)
            .map_or_else(|| self.err(ErrorKind::UnknownIdentifier, pos, format!("no variable `{name}`")), Ok)
    }

    fn routine(&mut self) -> PResult<u32> {
        let pos = self.pos();
        let r = match self.peek().clone() {
            Tok::Num(_) => self.small("a routine")?,
            Tok::Ident(s) if s == "SVC_s" => {
                self.bump();
                0
            }
            Tok::Ident(s) if s == "SVC_a" => {
                self.bump();
                1
            }
            _ => return self.syntax("a routine number, `SVC_s` or `SVC_a`"),
        };
        if r >= self.cfg.routines().count() {
            return self.err(ErrorKind::Type, pos, format!("routine {r} does not exist"));
        }
        Ok(r)
    }

    fn task(&mut self) -> PResult<TaskItem> {
        let controlled = self.eat_kw("controlled");
        self.expect_kw("task")?;
        let (name, _) = self.ident("a task name")?;
        self.expect_kw("as")?;
        let owner = self.routine()?;
        self.labels.clear();
        self.expect(&Tok::LBrace, "`{`")?;
        let body = self.block_body()?;
        Ok(TaskItem {
            name,
            owner,
            controlled,
            body,
        })
    }

    fn assert_item(&mut self) -> PResult<AssertItem> {
        let (task, _) = self.ident("a task name")?;
        let (label, _) = self.ident("a point label")?;
        self.expect(&Tok::Colon, "`:`")?;
        let pred = self.pred()?;
        self.eat(&Tok::Semi);
        Ok(AssertItem { task, label, pred })
    }

    // ---- statements ----

    /// Statements up to and including the closing `}`.
    fn block_body(&mut self) -> PResult<Command> {
        let mut cmds = Vec::new();
        while !self.eat(&Tok::RBrace) {
            match self.stmt()? {
                Command::Seq(cs) => cmds.extend(cs),
                c => cmds.push(c),
            }
        }
        Ok(match cmds.len() {
            0 => Command::Skip,
            1 => cmds.pop().unwrap(),
            _ => Command::Seq(cmds),
        })
    }

    fn block(&mut self) -> PResult<Command> {
        self.expect(&Tok::LBrace, "`{`")?;
        self.block_body()
    }

    fn stmt(&mut self) -> PResult<Command> {
        let apos = self.pos();
        let assertion = if self.eat(&Tok::LBrace) {
            let e = self.pred()?;
            self.expect(&Tok::RBrace, "`}` closing the assertion")?;
            Some(e)
        } else {
            None
        };
        let pos = self.pos();
        let unlabeled = |p: &Parser| {
            if assertion.is_some() {
                p.err(ErrorKind::Syntax, apos, "only labelled points carry assertions")
            } else {
                Ok(())
            }
        };
        if is_kw(self.peek(), "skip") && *self.peek_at(1) == Tok::Semi {
            unlabeled(self)?;
            self.bump();
            self.bump();
            return Ok(Command::Skip);
        }
        if is_kw(self.peek(), "control") && *self.peek_at(1) == Tok::LParen {
            unlabeled(self)?;
            self.bump();
            self.bump();
            let r = self.routine()?;
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(control(r, self.block()?));
        }
        let (label, lpos) = match (self.peek().clone(), self.peek_at(1)) {
            (Tok::Ident(l), Tok::Colon) => (l, pos),
            _ => return self.syntax("a statement (`label: ...`, `skip;` or `control (r) { ... }`)"),
        };
        self.bump();
        self.bump();
        if !is_label(&label) {
            return self.err(ErrorKind::Syntax, lpos, format!("invalid label `{label}`"));
        }
        if !self.labels.insert(label.clone()) {
            return self.err(ErrorKind::Syntax, lpos, format!("label `{label}` used twice in this task"));
        }
        let mut cmd = self.point(&label)?;
        if let Some(a) = assertion {
            set_assertion(&mut cmd, a);
        }
        Ok(cmd)
    }

    fn point(&mut self, label: &str) -> PResult<Command> {
        if self.eat_kw("await") {
            let guard = self.paren_pred()?;
            self.expect(&Tok::LBrace, "`{`")?;
            let branches = self.updates(label)?;
            self.expect(&Tok::RBrace, "`}`")?;
            return Ok(Command::Await(guard, Action::choice(label, branches)));
        }
        let guard = if self.eat_kw("when") { Some(self.paren_pred()?) } else { None };
        if self.eat_kw("if") {
            let test = self.paren_pred()?;
            let then = self.block()?;
            let els = if self.eat_kw("else") { self.block()? } else { Command::Skip };
            let cond = Cond {
                label: label.to_string(),
                guard,
                test,
                assertion: None,
            };
            return Ok(Command::If(cond, Box::new(then), Box::new(els)));
        }
        if self.eat_kw("while") {
            let test = self.paren_pred()?;
            let body = self.block()?;
            let cond = Cond {
                label: label.to_string(),
                guard,
                test,
                assertion: None,
            };
            return Ok(Command::While(cond, Box::new(body)));
        }
        if guard.is_some() {
            return self.syntax("`if` or `while` after `when (...)`");
        }
        if let Tok::Ident(m) = self.peek().clone() {
            if HW_MACROS.contains(&m.as_str()) {
                self.bump();
                let c = self.hw_macro(&m, label)?;
                self.expect(&Tok::Semi, "`;`")?;
                return Ok(c);
            }
        }
        let branches = self.updates(label)?;
        self.expect(&Tok::Semi, "`;`")?;
        Ok(Command::Basic(Action::choice(label, branches)))
    }

    fn hw_macro(&mut self, m: &str, label: &str) -> PResult<Command> {
        let v = self.cfg.variant;
        Ok(match m {
            "SVC_now" => hw::svc_now(label, v),
            "SVCaRequest" => hw::svca_request(label),
            "IRet" => hw::iret(label, v),
            "SVCaTake" => hw::svca_take(label, v),
            "SVCaEnable" => hw::svca_enable(label),
            "SVCaDisable" => hw::svca_disable(label),
            "ITake" => {
                self.expect(&Tok::LParen, "`(`")?;
                let pos = self.pos();
                let r = self.routine()?;
                if !self.cfg.routines().is_interrupt(r) {
                    return self.err(ErrorKind::Type, pos, format!("routine {r} is not an interrupt"));
                }
                self.expect(&Tok::RParen, "`)`")?;
                hw::itake(label, r, v)
            }
            _ => {
                self.expect(&Tok::LParen, "`(`")?;
                let bound = self.cfg.routines().count();
                let set = match self.value(&Type::Set(bound))? {
                    Value::Set(s) => s,
                    _ => unreachable!("parsed as a set"),
                };
                self.expect(&Tok::RParen, "`)`")?;
                if m == "IntDisable" {
                    hw::int_disable(label, set)
                } else {
                    hw::int_enable(label, set)
                }
            }
        })
    }

    fn updates(&mut self, label: &str) -> PResult<Vec<Vec<Update>>> {
        let mut branches = vec![self.branch(label)?];
        while *self.peek() == Tok::LBracket && *self.peek_at(1) == Tok::RBracket {
            self.bump();
            self.bump();
            branches.push(self.branch(label)?);
        }
        Ok(branches)
    }

    fn branch(&mut self, label: &str) -> PResult<Vec<Update>> {
        if is_kw(self.peek(), "skip") {
            self.bump();
            return Ok(Vec::new());
        }
        let mut out: Vec<Update> = Vec::new();
        loop {
            let (name, pos) = self.ident("an assignment `x := e`")?;
            let target = self.variable(&name, pos)?;
            if out.iter().any(|u| u.target == target) {
                return self.err(ErrorKind::Syntax, pos, format!("`{label}` assigns `{name}` twice"));
            }
            self.expect(&Tok::Assign, "`:=`")?;
            let (vpos, first) = (self.pos(), self.spans.len());
            let value = self.expr()?;
            let want: Ty = self.layout.ty(target).into();
            let got = infer(&value, &self.layout).or_else(|te| self.type_error(te, vpos, first))?;
            self.spans.truncate(first);
            if unify(&want, &got).is_none() {
                return self.err(ErrorKind::Type, vpos, format!("`{name}` has type {want}, assigned {got}"));
            }
            out.push(Update::new(target, value));
            if !self.eat(&Tok::Comma) {
                return Ok(out);
            }
        }
    }

    // ---- types and values ----

    fn ty(&mut self) -> PResult<Type> {
        let (name, pos) = self.ident("a type")?;
        let bound = |p: &mut Parser| -> PResult<u32> {
            p.expect(&Tok::LBracket, "`[`")?;
            let n = p.small("a bound")?;
            p.expect(&Tok::RBracket, "`]`")?;
            Ok(n)
        };
        let inner = |p: &mut Parser| -> PResult<Type> {
            p.expect(&Tok::Lt, "`<`")?;
            let t = p.ty()?;
            p.expect(&Tok::Gt, "`>`")?;
            Ok(t)
        };
        Ok(match name.as_str() {
            "bool" => Type::Bool,
            "nat" => Type::Nat(bound(self)?),
            "set" => Type::Set(bound(self)?),
            "stack" => Type::stack(inner(self)?),
            "option" => Type::opt(inner(self)?),
            "map" => {
                let n = bound(self)?;
                Type::map(n, inner(self)?)
            }
            "pair" => {
                self.expect(&Tok::Lt, "`<`")?;
                let a = self.ty()?;
                self.expect(&Tok::Comma, "`,`")?;
                let b = self.ty()?;
                self.expect(&Tok::Gt, "`>`")?;
                Type::pair(a, b)
            }
            _ => return self.err(ErrorKind::UnknownIdentifier, pos, format!("no type `{name}`")),
        })
    }

    /// A constant of type `ty`.
    fn value(&mut self, ty: &Type) -> PResult<Value> {
        let pos = self.pos();
        let bad = |p: &Parser| p.err(ErrorKind::Type, pos, format!("expected a value of type {ty}, found {}", p.peek()));
        let v = match (ty, self.peek().clone()) {
            (Type::Bool, Tok::Ident(b)) if b == "true" || b == "false" => {
                self.bump();
                Value::Bool(b == "true")
            }
            (Type::Nat(_), Tok::Num(_) | Tok::Ident(_)) => Value::Nat(self.routine_or_nat()?),
            (Type::Set(_), Tok::LBrace) => {
                self.bump();
                let mut s = NatSet::empty();
                if !self.eat(&Tok::RBrace) {
                    loop {
                        let epos = self.pos();
                        let n = self.routine_or_nat()?;
                        if n >= NatSet::MAX_ELEM {
                            return self.err(ErrorKind::Type, epos, format!("set element {n} is too large"));
                        }
                        s.insert(n);
                        if self.eat(&Tok::RBrace) {
                            break;
                        }
                        self.expect(&Tok::Comma, "`,` or `}`")?;
                    }
                }
                Value::Set(s)
            }
            (Type::Stack(t), Tok::LBracket) => {
                self.bump();
                let mut items = Vec::new();
                if !self.eat(&Tok::RBracket) {
                    loop {
                        items.push(self.value(t)?);
                        if self.eat(&Tok::RBracket) {
                            break;
                        }
                        self.expect(&Tok::Comma, "`,` or `]`")?;
                    }
                }
                Value::Stack(items)
            }
            (Type::Opt(_), Tok::Ident(s)) if s == "None" => {
                self.bump();
                Value::none()
            }
            (Type::Opt(t), Tok::Ident(s)) if s == "Some" => {
                self.bump();
                self.expect(&Tok::LParen, "`(`")?;
                let v = self.value(t)?;
                self.expect(&Tok::RParen, "`)`")?;
                Value::some(v)
            }
            (Type::Pair(a, b), Tok::LParen) => {
                self.bump();
                let x = self.value(a)?;
                self.expect(&Tok::Comma, "`,`")?;
                let y = self.value(b)?;
                self.expect(&Tok::RParen, "`)`")?;
                Value::pair(x, y)
            }
            (Type::Map(n, t), Tok::Ident(s)) if s == "map" => {
                self.bump();
                self.expect(&Tok::LBrace, "`{`")?;
                let mut entries = vec![Value::none(); *n as usize];
                if !self.eat(&Tok::RBrace) {
                    loop {
                        let kpos = self.pos();
                        let k = self.routine_or_nat()?;
                        if k >= *n {
                            return self.err(ErrorKind::Type, kpos, format!("map key {k} outside 0..{n}"));
                        }
                        self.expect(&Tok::Colon, "`:`")?;
                        entries[k as usize] = Value::some(self.value(t)?);
                        if self.eat(&Tok::RBrace) {
                            break;
                        }
                        self.expect(&Tok::Comma, "`,` or `}`")?;
                    }
                }
                Value::Map(entries)
            }
            _ => return bad(self),
        };
        if !ty.admits(&v) {
            return self.err(ErrorKind::Type, pos, format!("{v} is outside {ty}"));
        }
        Ok(v)
    }

    fn routine_or_nat(&mut self) -> PResult<u32> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "SVC_s" || s == "SVC_a" => {
                self.bump();
                Ok(u32::from(s == "SVC_a"))
            }
            _ => self.small("a number"),
        }
    }

    // ---- expressions ----

    fn paren_pred(&mut self) -> PResult<Expr> {
        self.expect(&Tok::LParen, "`(`")?;
        let e = self.pred()?;
        self.expect(&Tok::RParen, "`)`")?;
        Ok(e)
    }

    /// A boolean expression, type-checked.
    fn pred(&mut self) -> PResult<Expr> {
        let (pos, first) = (self.pos(), self.spans.len());
        let e = self.expr()?;
        let r = match infer(&e, &self.layout) {
            Ok(t) if unify(&t, &Ty::Bool).is_some() => Ok(e),
            Ok(t) => self.err(ErrorKind::Type, pos, format!("expected a predicate, found {t}")),
            Err(te) => self.type_error(te, pos, first),
        };
        self.spans.truncate(first);
        r
    }

    fn mark(&mut self, pos: Pos, e: Expr) -> Expr {
        self.spans.push((pos, e.clone()));
        e
    }

    /// Blames the operand at fault. Subexpressions are recorded children
    /// first, so the first recorded one that fails to type is the innermost
    /// failing node, and the culprit is its latest recorded operand equal to
    /// the one blamed. Falls back to the whole expression at `pos`.
    fn type_error<T>(&self, te: TypeError, pos: Pos, first: usize) -> PResult<T> {
        let spans = &self.spans[first..];
        let inner = spans
            .iter()
            .enumerate()
            .find_map(|(j, (p, e))| infer(e, &self.layout).err().map(|te| (j, *p, te)));
        let Some((j, start, te)) = inner else {
            return self.err(ErrorKind::Type, pos, te.message);
        };
        let at = te
            .culprit
            .as_ref()
            .and_then(|c| spans[..j].iter().rev().find(|(p, e)| e == c && *p >= start))
            .map_or(start, |(p, _)| *p);
        self.err(ErrorKind::Type, at, te.message)
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let e = self.expr_unspanned()?;
        Ok(self.mark(pos, e))
    }

    fn expr_unspanned(&mut self) -> PResult<Expr> {
        let lhs = self.or_expr()?;
        if self.eat(&Tok::Implies) {
            let rhs = self.expr()?;
            return Ok(Expr::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let e = self.or_expr_unspanned()?;
        Ok(self.mark(pos, e))
    }

    fn or_expr_unspanned(&mut self) -> PResult<Expr> {
        let mut parts = vec![self.and_expr()?];
        while self.eat(&Tok::OrOr) {
            parts.push(self.and_expr()?);
        }
        Ok(Expr::or(parts))
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let e = self.and_expr_unspanned()?;
        Ok(self.mark(pos, e))
    }

    fn and_expr_unspanned(&mut self) -> PResult<Expr> {
        let mut parts = vec![self.cmp_expr()?];
        while self.eat(&Tok::AndAnd) {
            parts.push(self.cmp_expr()?);
        }
        Ok(Expr::and(parts))
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let e = self.cmp_expr_unspanned()?;
        Ok(self.mark(pos, e))
    }

    fn cmp_expr_unspanned(&mut self) -> PResult<Expr> {
        let lhs = self.set_expr()?;
        let op = match self.peek() {
            Tok::Eq => 0,
            Tok::Ne => 1,
            Tok::Ident(s) if s == "in" => 2,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.set_expr()?;
        Ok(match op {
            0 => Expr::eq(lhs, rhs),
            1 => Expr::ne(lhs, rhs),
            _ => Expr::member(lhs, rhs),
        })
    }

    fn set_expr(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let e = self.set_expr_unspanned()?;
        Ok(self.mark(pos, e))
    }

    fn set_expr_unspanned(&mut self) -> PResult<Expr> {
        let mut lhs = self.push_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Ident(s) if s == "union" || s == "minus" || s == "inter" => s.clone(),
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.push_expr()?;
            lhs = match op.as_str() {
                "union" => Expr::union(lhs, rhs),
                "minus" => Expr::diff(lhs, rhs),
                _ => Expr::Inter(Box::new(lhs), Box::new(rhs)),
            };
        }
    }

    fn push_expr(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let e = self.push_expr_unspanned()?;
        Ok(self.mark(pos, e))
    }

    fn push_expr_unspanned(&mut self) -> PResult<Expr> {
        let x = self.unary()?;
        if self.eat(&Tok::Hash) {
            let st = self.push_expr()?;
            return Ok(Expr::push(x, st));
        }
        Ok(x)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let e = self.unary_unspanned()?;
        Ok(self.mark(pos, e))
    }

    fn unary_unspanned(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Bang) {
            return Ok(Expr::not(self.unary()?));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            match self.peek() {
                Tok::LParen => {
                    self.bump();
                    let k = self.expr()?;
                    self.expect(&Tok::RParen, "`)`")?;
                    e = Expr::lookup(e, k);
                }
                Tok::LBracket if *self.peek_at(1) != Tok::RBracket => {
                    self.bump();
                    let k = self.expr()?;
                    self.expect(&Tok::Assign, "`:=`")?;
                    let v = self.expr()?;
                    self.expect(&Tok::RBracket, "`]`")?;
                    e = Expr::override_(e, k, v);
                }
                _ => return Ok(e),
            }
        }
    }

    fn args(&mut self, n: usize, name: &str) -> PResult<Vec<Expr>> {
        self.expect(&Tok::LParen, &format!("`(` after `{name}`"))?;
        let mut out = Vec::new();
        for i in 0..n {
            if i > 0 {
                self.expect(&Tok::Comma, "`,`")?;
            }
            out.push(self.expr()?);
        }
        self.expect(&Tok::RParen, "`)`")?;
        Ok(out)
    }

    fn string_arg(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.syntax("a quoted string"),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(_) => Ok(Expr::nat(self.small("a number")?)),
            Tok::LParen => {
                self.bump();
                if self.eat_kw("if") {
                    let c = self.expr()?;
                    self.expect_kw("then")?;
                    let t = self.expr()?;
                    self.expect_kw("else")?;
                    let f = self.expr()?;
                    self.expect(&Tok::RParen, "`)`")?;
                    return Ok(Expr::ite(c, t, f));
                }
                let a = self.expr()?;
                if self.eat(&Tok::Comma) {
                    let b = self.expr()?;
                    self.expect(&Tok::RParen, "`)`")?;
                    return Ok(fold(Expr::pair(a, b)));
                }
                self.expect(&Tok::RParen, "`)`")?;
                Ok(a)
            }
            Tok::LBrace => {
                self.bump();
                let mut xs = Vec::new();
                if !self.eat(&Tok::RBrace) {
                    loop {
                        xs.push(self.expr()?);
                        if self.eat(&Tok::RBrace) {
                            break;
                        }
                        self.expect(&Tok::Comma, "`,` or `}`")?;
                    }
                }
                Ok(fold(Expr::SetLit(xs)))
            }
            Tok::LBracket => {
                self.bump();
                let mut items = Vec::new();
                if !self.eat(&Tok::RBracket) {
                    loop {
                        let epos = self.pos();
                        match fold(self.expr()?) {
                            Expr::Lit(v) => items.push(v),
                            _ => return self.err(ErrorKind::Syntax, epos, "stack literal elements must be constants"),
                        }
                        if self.eat(&Tok::RBracket) {
                            break;
                        }
                        self.expect(&Tok::Comma, "`,` or `]`")?;
                    }
                }
                Ok(Expr::Lit(Value::Stack(items)))
            }
            Tok::Ident(name) => {
                self.bump();
                self.named(&name, pos)
            }
            _ => self.syntax("an expression"),
        }
    }

    fn named(&mut self, name: &str, pos: Pos) -> PResult<Expr> {
        let one = |p: &mut Parser| -> PResult<Expr> { Ok(p.args(1, name)?.pop().unwrap()) };
        Ok(match name {
            "true" => Expr::bool(true),
            "false" => Expr::bool(false),
            "None" => Expr::Lit(Value::none()),
            "SVC_s" => Expr::nat(0),
            "SVC_a" => Expr::nat(1),
            "hd" => Expr::head(one(self)?),
            "tl" => Expr::tail(one(self)?),
            "Some" => fold(Expr::some(one(self)?)),
            "the" => Expr::the(one(self)?),
            "fst" => Expr::fst(one(self)?),
            "snd" => Expr::snd(one(self)?),
            "at" => {
                self.expect(&Tok::LParen, "`(` after `at`")?;
                let r = self.expr()?;
                self.expect(&Tok::Comma, "`,`")?;
                let label = self.string_arg()?;
                self.expect(&Tok::RParen, "`)`")?;
                Expr::At(Box::new(r), label)
            }
            "abort" => {
                self.expect(&Tok::LParen, "`(` after `abort`")?;
                let kind = self.string_arg()?;
                self.expect(&Tok::RParen, "`)`")?;
                Expr::Abort(kind)
            }
            "map" if *self.peek() == Tok::LBrace => {
                return self.err(ErrorKind::Syntax, pos, "map literals are only allowed as initial values")
            }
            _ => {
                if let Some(b) = Builtin::from_name(name) {
                    let args = if b.arity() == 0 { Vec::new() } else { self.args(b.arity(), name)? };
                    return Ok(Expr::call(b, args));
                }
                match self.layout.lookup(name) {
                    Some(id) => Expr::Var(id),
                    None => return self.err(ErrorKind::UnknownIdentifier, pos, format!("no variable or function `{name}`")),
                }
            }
        })
    }
}

/// Words that cannot name variables.
const RESERVED: [&str; 27] = [
    "true", "false", "None", "Some", "SVC_s", "SVC_a", "hd", "tl", "the", "fst", "snd", "at", "abort", "map",
    "in", "union", "minus", "inter", "if", "then", "else", "skip", "await", "when", "while", "control", "EITStack",
];

/// Constant folding of literal constructors, so printed literals parse
/// back to the same tree.
fn fold(e: Expr) -> Expr {
    match e {
        Expr::SetLit(xs) if xs.iter().all(|x| matches!(x, Expr::Lit(Value::Nat(n)) if *n < NatSet::MAX_ELEM)) => {
            Expr::set(
                xs.iter()
                    .map(|x| match x {
                        Expr::Lit(Value::Nat(n)) => *n,
                        _ => unreachable!(),
                    })
                    .collect(),
            )
        }
        Expr::Some(x) => match *x {
            Expr::Lit(v) => Expr::Lit(Value::some(v)),
            other => Expr::some(other),
        },
        Expr::Pair(a, b) => match (*a, *b) {
            (Expr::Lit(x), Expr::Lit(y)) => Expr::Lit(Value::pair(x, y)),
            (a, b) => Expr::pair(a, b),
        },
        other => other,
    }
}

pub const CONFIG_KEYS: [&str; 14] = [
    "users",
    "interrupts",
    "events",
    "variant",
    "events_mode",
    "syscall_wait",
    "sched",
    "max_states",
    "max_depth",
    "stack_bound",
    "vc_bound",
    "priority",
    "user_priority",
    "event_task",
];

/// `at` locates a key's value; `pos` is used for errors spanning keys.
fn build_config(entries: &[ConfigEntry], pos: Pos, at: impl Fn(&str) -> Pos) -> PResult<SystemConfig> {
    fn bad<T>(pos: Pos, m: String) -> PResult<T> {
        Err(ParseError::new(ErrorKind::ConfigInvalid, pos, m))
    }
    let num = |key: &str, default: u128| -> PResult<u128> {
        match entries.iter().find(|e| e.key == key).map(|e| &e.value) {
            None => Ok(default),
            Some(ConfigValue::Num(n)) => Ok(*n),
            Some(_) => bad(at(key), format!("`{key}` must be a number")),
        }
    };
    let small = |key: &str, default: u32| -> PResult<u32> {
        u32::try_from(num(key, default as u128)?).or_else(|_| bad(at(key), format!("`{key}` is too large")))
    };
    let mut cfg = SystemConfig::new(small("users", 1)?, small("interrupts", 0)?, small("events", 0)?);
    for e in entries {
        let word = || match &e.value {
            ConfigValue::Word(w) => Ok(w.as_str()),
            _ => Err(format!("`{}` must be a word", e.key)),
        };
        let table = || match &e.value {
            ConfigValue::Map(items) => Ok(items.iter().copied().collect::<BTreeMap<u32, u32>>()),
            _ => Err(format!("`{}` must be a table {{k: v, ...}}", e.key)),
        };
        let r: Result<(), String> = (|| {
            match e.key.as_str() {
                "users" | "interrupts" | "events" => {}
                "variant" => cfg.variant = word()?.parse::<HwVariant>()?,
                "events_mode" => cfg.change_events_mode = word()?.parse()?,
                "syscall_wait" => cfg.syscall_wait = word()?.parse()?,
                "sched" => cfg.sched_mode = word()?.parse()?,
                "max_states" => cfg.state_limit = num("max_states", 0).map_err(|e| e.message)? as u64,
                "max_depth" => cfg.depth_limit = num("max_depth", 0).map_err(|e| e.message)? as u64,
                "stack_bound" => cfg.stack_bound = Some(small("stack_bound", 0).map_err(|e| e.message)?),
                "vc_bound" => cfg.vc_bound = num("vc_bound", 0).map_err(|e| e.message)?,
                "priority" => cfg.priority = table()?,
                "user_priority" => cfg.user_priority = table()?,
                "event_task" => cfg.event_task = table()?,
                other => return Err(format!("unknown config key `{other}`")),
            }
            Ok(())
        })();
        if let Err(m) = r {
            return bad(at(&e.key), m);
        }
    }
    cfg.validate().or_else(|e| {
        let m = e.to_string();
        bad(pos, m.strip_prefix("invalid config: ").unwrap_or(&m).to_string())
    })?;
    Ok(cfg)
}

fn set_assertion(c: &mut Command, a: Expr) {
    match c {
        Command::Basic(act) | Command::Await(_, act) => act.assertion = Some(a),
        Command::If(cond, ..) | Command::While(cond, _) => cond.assertion = Some(a),
        Command::Skip | Command::Seq(_) => unreachable!("points are atomic commands"),
    }
}

fn attach_assertion(sys: &mut System, a: &AssertItem) -> Result<(), String> {
    let task = sys
        .tasks
        .iter_mut()
        .find(|t| t.name == a.task)
        .ok_or_else(|| format!("no task `{}`", a.task))?;
    let mut found = false;
    fn visit(c: &mut Command, label: &str, pred: &Expr, found: &mut bool) {
        match c {
            Command::Basic(act) | Command::Await(_, act) if act.label == label => {
                act.assertion = Some(pred.clone());
                *found = true;
            }
            Command::If(cond, t, e) => {
                if cond.label == label {
                    cond.assertion = Some(pred.clone());
                    *found = true;
                }
                visit(t, label, pred, found);
                visit(e, label, pred, found);
            }
            Command::While(cond, b) => {
                if cond.label == label {
                    cond.assertion = Some(pred.clone());
                    *found = true;
                }
                visit(b, label, pred, found);
            }
            Command::Seq(cs) => cs.iter_mut().for_each(|c| visit(c, label, pred, found)),
            _ => {}
        }
    }
    visit(&mut task.body, &a.label, &a.pred, &mut found);
    if found {
        Ok(())
    } else {
        Err(format!("task `{}` has no point `{}`", a.task, a.label))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ogwb_core::kernel::render::render_system;

    const TOY: &str = r#"
system "toy"
config { users = 2 }
var x: bool = false
var y: nat[4]
controlled task Task1 as 2 {
  First: x := true;
  Second: x := false;
  Third: x := true;
}
controlled task Task2 as 3 {
  First: y := 1;
  Second: y := 2;
  Third: y := 3;
}
invariant Small: y in {0, 1, 2, 3} && (x || !x)
"#;

    #[test]
    fn toy_has_three_points_per_task() {
        let m = parse_model(TOY).unwrap();
        let counts: Vec<usize> = m.system.tasks.iter().map(|t| t.body.point_count()).collect();
        assert_eq!(counts, [3, 3]);
        assert!(matches!(&m.system.tasks[0].body, Command::Seq(cs) if matches!(cs[0], Command::Await(..))));
        assert_eq!(m.invariants.len(), 1);
    }

    #[test]
    fn preset_builds_six_tasks() {
        let m = parse_model("system \"os\" preset echronos config { users = 2 interrupts = 1 events = 1 }").unwrap();
        assert_eq!(m.system.tasks.len(), 6);
        assert_eq!(m.invariants.len(), 4);
    }

    #[test]
    fn malformed_guard_reports_position() {
        let text = "system \"t\"\nconfig { users = 1 }\ntask a as 2 {\n  s: await (AT == ) { skip }\n}\n";
        let e = parse_model(text).unwrap_err();
        assert_eq!(e.kind, ErrorKind::Syntax);
        assert_eq!((e.line, e.col), (4, 17));
    }

    #[test]
    fn expanded_preset_reparses_to_same_text() {
        let m = parse_model("system \"echronos\" preset echronos config { users = 2 interrupts = 1 events = 1 }").unwrap();
        let text = render_system(&m.system);
        let again = parse_model(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        assert_eq!(render_system(&again.system), text);
        // builders nest sequences and leave `Some(lit)` unfolded; the
        // atomic points are what must agree
        for (a, b) in again.system.tasks.iter().zip(&m.system.tasks) {
            let labels = |t: &ogwb_core::kernel::Task| -> Vec<String> {
                t.body.atomic_points().iter().map(|p| p.label.to_string()).collect()
            };
            assert_eq!(labels(a), labels(b));
        }
    }

    #[test]
    fn errors_are_classified() {
        let unknown = parse_model("system \"t\" config { users = 1 } task a as 2 { s: z := 1; }").unwrap_err();
        assert_eq!(unknown.kind, ErrorKind::UnknownIdentifier);
        let ty = parse_model("system \"t\" config { users = 1 } task a as 2 { s: AT := true; }").unwrap_err();
        assert_eq!(ty.kind, ErrorKind::Type);
        let cfg = parse_model("system \"t\" config { users = 0 }").unwrap_err();
        assert_eq!(cfg.kind, ErrorKind::ConfigInvalid);
        let key = parse_model("system \"t\" config { colour = 1 }").unwrap_err();
        assert_eq!((key.kind, key.col), (ErrorKind::ConfigInvalid, 21));
    }

    #[test]
    fn overrides_replace_entries() {
        let text = "system \"os\" preset echronos config { users = 1 }";
        let m = parse_model_with(text, &[("variant".into(), "generic".into())]).unwrap();
        assert_eq!(m.system.config.variant, HwVariant::Generic);
        assert!(m.system.layout.has_eit_stack());
        // the file itself is unchanged
        assert_eq!(m.file.config.len(), 1);
        assert!(parse_model_with(text, &[("variant".into(), "x86".into())]).is_err());
    }

    #[test]
    fn hw_macros_and_assertions() {
        let text = "system \"t\" config { users = 1 interrupts = 1 }\n\
                    task h as 3 { loop: while (true) { take: ITake(3); {AT = 3} ret: IRet; } }\n\
                    assert h take: true\n";
        let m = parse_model(text).unwrap();
        let pts = m.system.tasks[0].body.atomic_points();
        assert_eq!(pts.len(), 3);
        assert!(pts[1].guard.is_some());
        assert_eq!(pts[1].assertion, Some(&Expr::bool(true)));
        assert_eq!(pts[2].assertion, Some(&Expr::at_is(3)));
    }
}
