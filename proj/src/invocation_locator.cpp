// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#include "apisync/invocation_locator.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "apisync/error.hpp"
#include "text_util.hpp"

namespace apisync {

std::string_view to_string(EvidenceKind kind) noexcept {
  switch (kind) {
    case EvidenceKind::DirectName: return "DirectName";
    case EvidenceKind::AliasChain: return "AliasChain";
    case EvidenceKind::TypedReceiver: return "TypedReceiver";
  }
  return "?";
}

Json evidence_to_json(const Evidence& e) {
  Json j = {{"kind", std::string(to_string(e.kind))}};
  if (e.kind == EvidenceKind::AliasChain) j["hops"] = e.hops;
  if (e.kind == EvidenceKind::TypedReceiver) j["situation"] = e.situation;
  return j;
}

namespace {

using namespace pysrc;

Evidence evidence_from_json(const Json& j) {
  Evidence e;
  auto kind = j.at("kind").get<std::string>();
  if (kind == "DirectName") {
    e.kind = EvidenceKind::DirectName;
  } else if (kind == "AliasChain") {
    e.kind = EvidenceKind::AliasChain;
    e.hops = j.at("hops").get<std::vector<std::string>>();
  } else if (kind == "TypedReceiver") {
    e.kind = EvidenceKind::TypedReceiver;
    e.situation = j.at("situation").get<int>();
  } else {
    throw Error(Errc::InvalidValue, "unknown evidence kind '" + kind + "'");
  }
  return e;
}

// ---------------------------------------------------------------------------
// Abstract values

struct Value {
  enum Kind { Unbound, Opaque, Alias, Instance, Function } kind = Unbound;
  std::string path;  // Alias target, Instance class, Function return class
  int situation = 0;

  bool operator==(const Value&) const = default;
};

const Value kOpaque{Value::Opaque, {}, 0};

// A name that may be unbound only raises when read, so joining with Unbound
// keeps the bound value.
Value join(const Value& a, const Value& b) {
  if (a.kind == Value::Unbound) return b;
  if (b.kind == Value::Unbound) return a;
  if (a == b) return a;
  if (a.kind == Value::Instance && b.kind == Value::Instance && a.path == b.path) {
    return {Value::Instance, a.path, std::min(a.situation, b.situation)};
  }
  return kOpaque;
}

struct Env {
  bool reachable = true;
  std::map<std::string, Value> vars;

  Value get(const std::string& name) const {
    auto it = vars.find(name);
    return it == vars.end() ? Value{} : it->second;
  }
  void set(const std::string& name, Value v) {
    if (v.kind == Value::Unbound) {
      vars.erase(name);
    } else {
      vars[name] = std::move(v);
    }
  }
  bool operator==(const Env&) const = default;
};

Env join(const Env& a, const Env& b) {
  if (!a.reachable) return b;
  if (!b.reachable) return a;
  Env out = a;
  for (const auto& [k, v] : b.vars) out.set(k, join(a.get(k), v));
  return out;
}

// ---------------------------------------------------------------------------
// Syntactic binding pre-pass

struct BindEvent {
  std::size_t offset = 0;
  std::vector<const Stmt*> loops;
};

struct ScopeInfo {
  std::set<std::string> locals;
  std::set<std::string> globals;
  std::set<std::string> nonlocals;
  // "*" records star imports.
  std::map<std::string, std::vector<BindEvent>> events;
};

std::string import_local_name(const ImportName& n) {
  if (n.asname) return *n.asname;
  return std::string(detail::split(n.module, '.').front());
}

class Binder {
 public:
  explicit Binder(ScopeInfo& info) : info_(info) {}

  void add(const std::string& name) {
    info_.locals.insert(name);
    info_.events[name].push_back({cur_, loops_});
  }

  void block(const Block& b) {
    for (const auto& s : b) stmt(*s);
  }

  void target(const Expr& e) {
    switch (e.kind) {
      case ExprKind::Name: add(e.name); break;
      case ExprKind::Starred: target(*e.value); break;
      case ExprKind::Compound:
        if (e.tag == "Tuple" || e.tag == "List") {
          for (const auto& c : e.children) target(*c);
        } else {
          expr(e);
        }
        break;
      default: expr(e); break;
    }
  }

  // Walrus targets bind in this scope, including from inside comprehensions.
  void expr(const Expr& e) {
    if (e.kind == ExprKind::NamedExpr) add(e.name);
    if (e.kind == ExprKind::Lambda) {
      for (const auto& p : e.params) {
        if (p.default_value) expr(*p.default_value);
      }
      return;
    }
    if (e.value) expr(*e.value);
    if (e.value2) expr(*e.value2);
    for (const auto& c : e.children) expr(*c);
    for (const auto& a : e.args) expr(*a.value);
    for (const auto& g : e.generators) {
      expr(*g.iter);
      for (const auto& c : g.conditions) expr(*c);
    }
  }

  void stmt(const Stmt& s) {
    cur_ = s.span.begin.offset;
    auto exprs = [&] {
      if (s.value) expr(*s.value);
      if (s.annotation) expr(*s.annotation);
      if (s.extra) expr(*s.extra);
    };
    switch (s.kind) {
      case StmtKind::Assign:
      case StmtKind::AugAssign:
      case StmtKind::Delete:
        exprs();
        for (const auto& t : s.targets) target(*t);
        break;
      case StmtKind::AnnAssign:
        exprs();
        // An annotation alone still makes the name local.
        if (s.targets[0]->kind == ExprKind::Name) {
          if (s.value) {
            add(s.targets[0]->name);
          } else {
            info_.locals.insert(s.targets[0]->name);
          }
        } else {
          expr(*s.targets[0]);
        }
        break;
      case StmtKind::Import:
        for (const auto& n : s.names) add(import_local_name(n));
        break;
      case StmtKind::ImportFrom:
        if (s.star) {
          info_.events["*"].push_back({cur_, loops_});
        } else {
          for (const auto& n : s.names) add(n.asname ? *n.asname : n.module);
        }
        break;
      case StmtKind::FunctionDef:
      case StmtKind::ClassDef:
        for (const auto& d : s.decorators) expr(*d);
        for (const auto& p : s.params) {
          if (p.default_value) expr(*p.default_value);
          if (p.annotation) expr(*p.annotation);
        }
        for (const auto& b : s.bases) expr(*b.value);
        if (s.annotation) expr(*s.annotation);
        add(s.name);
        break;
      case StmtKind::TypeAlias:
        add(s.name);
        break;
      case StmtKind::Global:
        info_.globals.insert(s.identifiers.begin(), s.identifiers.end());
        break;
      case StmtKind::Nonlocal:
        info_.nonlocals.insert(s.identifiers.begin(), s.identifiers.end());
        break;
      case StmtKind::For:
        expr(*s.value);
        loops_.push_back(&s);
        cur_ = s.span.begin.offset;
        target(*s.targets[0]);
        block(s.body);
        loops_.pop_back();
        block(s.orelse);
        break;
      case StmtKind::While:
        loops_.push_back(&s);
        expr(*s.value);
        block(s.body);
        loops_.pop_back();
        block(s.orelse);
        break;
      case StmtKind::If:
        expr(*s.value);
        block(s.body);
        block(s.orelse);
        break;
      case StmtKind::Try:
        block(s.body);
        for (const auto& h : s.handlers) {
          if (h.type) expr(*h.type);
          cur_ = s.span.begin.offset;
          if (h.name) add(*h.name);
          block(h.body);
        }
        block(s.orelse);
        block(s.finalbody);
        break;
      case StmtKind::With:
        for (const auto& item : s.items) {
          expr(*item.context);
          if (item.target) target(*item.target);
        }
        block(s.body);
        break;
      case StmtKind::Match:
        expr(*s.value);
        for (const auto& c : s.cases) {
          for (const auto& n : c.captures) add(n);
          if (c.guard) expr(*c.guard);
          block(c.body);
        }
        break;
      default:
        exprs();
        break;
    }
  }

 private:
  ScopeInfo& info_;
  std::size_t cur_ = 0;
  std::vector<const Stmt*> loops_;
};

void collect_declarations(const Block& b, std::set<std::string>& globals,
                          std::set<std::string>& nonlocals) {
  for (const auto& s : b) {
    if (s->kind == StmtKind::Global) globals.insert(s->identifiers.begin(), s->identifiers.end());
    if (s->kind == StmtKind::Nonlocal) {
      nonlocals.insert(s->identifiers.begin(), s->identifiers.end());
    }
    collect_declarations(s->body, globals, nonlocals);
    collect_declarations(s->orelse, globals, nonlocals);
    collect_declarations(s->finalbody, globals, nonlocals);
    for (const auto& h : s->handlers) collect_declarations(h.body, globals, nonlocals);
    for (const auto& c : s->cases) collect_declarations(c.body, globals, nonlocals);
  }
}

void collect_walrus(const Expr& e, std::vector<std::string>& out) {
  if (e.kind == ExprKind::NamedExpr) out.push_back(e.name);
  if (e.kind == ExprKind::Lambda) return;
  if (e.value) collect_walrus(*e.value, out);
  if (e.value2) collect_walrus(*e.value2, out);
  for (const auto& c : e.children) collect_walrus(*c, out);
  for (const auto& a : e.args) collect_walrus(*a.value, out);
  for (const auto& g : e.generators) {
    collect_walrus(*g.iter, out);
    for (const auto& c : g.conditions) collect_walrus(*c, out);
  }
}

// ---------------------------------------------------------------------------
// Flow analysis

enum class FrameKind { Module, Function, Class, Comprehension };

struct LoopCtx {
  Env breaks{false, {}};
  Env continues{false, {}};
};

struct Frame {
  FrameKind kind = FrameKind::Module;
  // Nearest enclosing non-class frame; reads that miss this frame go there.
  Frame* lookup_parent = nullptr;
  // Function frames: where the function was created.
  Frame* closure_parent = nullptr;
  std::size_t anchor_offset = 0;
  std::vector<const Stmt*> anchor_loops;

  std::unique_ptr<ScopeInfo> info;  // Module and Function frames
  Env env;
  std::set<std::string> comp_locals;

  std::size_t cur_offset = 0;
  std::vector<const Stmt*> loops;
  std::vector<LoopCtx> loop_ctx;
  std::vector<Env*> try_stack;

  const Stmt* def = nullptr;
  std::string scope_name;
};

bool is_dotted_name(std::string_view s) {
  if (s.empty()) return false;
  for (const auto& part : detail::split(s, '.')) {
    if (!is_identifier(part) || is_keyword(part)) return false;
  }
  return true;
}

class Analyzer {
 public:
  explicit Analyzer(SourceAnalysis& out) : out_(out) {
    collect_declarations(out.module.body, global_written_, nonlocal_written_);
  }

  void run() {
    Frame module;
    module.kind = FrameKind::Module;
    module.info = std::make_unique<ScopeInfo>();
    Binder(*module.info).block(out_.module.body);
    module.scope_name = "<module>";
    exec_block(module, out_.module.body);
  }

 private:
  // ---- name resolution ----------------------------------------------------

  static bool stable(const ScopeInfo& info, const std::string& name, std::size_t anchor,
                     const std::vector<const Stmt*>& loops) {
    auto check = [&](const char* key) {
      auto it = info.events.find(key);
      if (it == info.events.end()) return true;
      for (const auto& ev : it->second) {
        if (ev.offset > anchor) return false;
        for (const auto* l : ev.loops) {
          if (std::find(loops.begin(), loops.end(), l) != loops.end()) return false;
        }
      }
      return true;
    };
    return check(name.c_str()) && check("*");
  }

  // The value `name` has whenever code created at (`t`, anchor) runs later.
  Value closure_value(const Frame* t, std::size_t anchor, const std::vector<const Stmt*>& loops,
                      const std::string& name) const {
    switch (t->kind) {
      case FrameKind::Comprehension:
        if (t->comp_locals.count(name)) return kOpaque;
        return closure_value(t->lookup_parent, t->lookup_parent->cur_offset,
                             t->lookup_parent->loops, name);
      case FrameKind::Class:
        return closure_value(t->lookup_parent, t->lookup_parent->cur_offset,
                             t->lookup_parent->loops, name);
      case FrameKind::Module:
        if (global_written_.count(name)) return kOpaque;
        if (!stable(*t->info, name, anchor, loops)) return kOpaque;
        return t->env.get(name);
      case FrameKind::Function:
        if (t->info->globals.count(name)) return global_value(*t, name);
        if (t->info->locals.count(name)) {
          if (nonlocal_written_.count(name)) return kOpaque;
          if (!stable(*t->info, name, anchor, loops)) return kOpaque;
          return t->env.get(name);
        }
        return closure_value(t->closure_parent, t->anchor_offset, t->anchor_loops, name);
    }
    return kOpaque;
  }

  Value global_value(const Frame& f, const std::string& name) const {
    const Frame* fr = &f;
    while (true) {
      const Frame* parent = fr->kind == FrameKind::Function ? fr->closure_parent : fr->lookup_parent;
      std::size_t off = fr->kind == FrameKind::Function ? fr->anchor_offset : parent->cur_offset;
      const auto& loops = fr->kind == FrameKind::Function ? fr->anchor_loops : parent->loops;
      if (parent->kind == FrameKind::Module) return closure_value(parent, off, loops, name);
      fr = parent;
    }
  }

  Value lookup(const Frame& f, const std::string& name) const {
    switch (f.kind) {
      case FrameKind::Module:
        if (global_written_.count(name)) return kOpaque;
        return f.env.get(name);
      case FrameKind::Class:
        if (f.env.vars.count(name)) return f.env.get(name);
        return lookup(*f.lookup_parent, name);
      case FrameKind::Comprehension:
        if (f.comp_locals.count(name)) return f.env.get(name);
        return lookup(*f.lookup_parent, name);
      case FrameKind::Function:
        if (f.info->globals.count(name)) return global_value(f, name);
        if (f.info->locals.count(name)) {
          if (nonlocal_written_.count(name)) return kOpaque;
          return f.env.get(name);
        }
        return closure_value(f.closure_parent, f.anchor_offset, f.anchor_loops, name);
    }
    return kOpaque;
  }

  struct Chain {
    DottedPath path;
    Evidence evidence;
  };

  std::optional<Chain> resolve_chain(const Frame& f, const Expr& e) const {
    if (e.kind == ExprKind::Name) {
      Value v = lookup(f, e.name);
      if (v.kind != Value::Alias) return std::nullopt;
      Evidence ev;
      if (e.name == v.path) {
        ev.kind = EvidenceKind::DirectName;
      } else {
        ev.kind = EvidenceKind::AliasChain;
        ev.hops = {e.name, v.path};
      }
      return Chain{DottedPath::parse(v.path), std::move(ev)};
    }
    if (e.kind == ExprKind::Attribute) {
      auto base = resolve_chain(f, *e.value);
      if (!base) return std::nullopt;
      base->path = base->path.child(e.name);
      return base;
    }
    return std::nullopt;
  }

  // Annotations: a dotted expression or a quoted dotted name.
  std::optional<DottedPath> resolve_annotation(const Frame& f, const Expr& e) const {
    if (e.kind == ExprKind::Constant && e.is_string) {
      const auto& lit = e.literal;
      if (lit.size() < 2 || (lit.front() != '\'' && lit.front() != '"') ||
          lit.back() != lit.front()) {
        return std::nullopt;
      }
      auto inner = lit.substr(1, lit.size() - 2);
      if (!is_dotted_name(inner)) return std::nullopt;
      auto parts = detail::split(inner, '.');
      Value v = lookup(f, std::string(parts[0]));
      if (v.kind != Value::Alias) return std::nullopt;
      auto path = DottedPath::parse(v.path);
      for (std::size_t i = 1; i < parts.size(); ++i) path = path.child(parts[i]);
      return path;
    }
    auto c = resolve_chain(f, e);
    if (!c) return std::nullopt;
    return c->path;
  }

  Value assigned_value(const Frame& f, const Expr& value) const {
    if (value.kind != ExprKind::Call) return kOpaque;
    if (auto c = resolve_chain(f, *value.value)) {
      return {Value::Instance, c->path.str(), 1};
    }
    if (value.value->kind == ExprKind::Name) {
      Value fn = lookup(f, value.value->name);
      if (fn.kind == Value::Function && !fn.path.empty()) {
        return {Value::Instance, fn.path, 3};
      }
    }
    return kOpaque;
  }

  // ---- bindings ------------------------------------------------------------

  void bind(Frame& f, const std::string& name, const Value& v, int line) {
    f.env.set(name, v);
    for (Env* acc : f.try_stack) acc->set(name, join(acc->get(name), v));
    if (recording_ && v.kind == Value::Instance) {
      out_.types.bindings.push_back(
          {f.scope_name, name, DottedPath::parse(v.path), v.situation, line});
    }
  }

  void bind_targets_opaque(Frame& f, const Expr& t) {
    switch (t.kind) {
      case ExprKind::Name: bind(f, t.name, kOpaque, t.span.begin.line); break;
      case ExprKind::Starred: bind_targets_opaque(f, *t.value); break;
      case ExprKind::Compound:
        if (t.tag == "Tuple" || t.tag == "List") {
          for (const auto& c : t.children) bind_targets_opaque(f, *c);
        } else {
          eval(f, t);
        }
        break;
      default: eval(f, t); break;
    }
  }

  void comp_bind(Frame& comp, const Expr& t) {
    switch (t.kind) {
      case ExprKind::Name:
        comp.comp_locals.insert(t.name);
        comp.env.set(t.name, kOpaque);
        break;
      case ExprKind::Starred: comp_bind(comp, *t.value); break;
      case ExprKind::Compound:
        if (t.tag == "Tuple" || t.tag == "List") {
          for (const auto& c : t.children) comp_bind(comp, *c);
          break;
        }
        [[fallthrough]];
      default: eval(comp, t); break;
    }
  }

  static Frame& binding_frame(Frame& f) {
    Frame* fr = &f;
    while (fr->kind == FrameKind::Comprehension) fr = fr->lookup_parent;
    return *fr;
  }

  static Frame& non_class(Frame& f) {
    Frame* fr = &f;
    while (fr->kind == FrameKind::Class) fr = fr->lookup_parent;
    return *fr;
  }

  // ---- expressions ---------------------------------------------------------

  void eval(Frame& f, const Expr& e) {
    switch (e.kind) {
      case ExprKind::Name:
      case ExprKind::Constant:
        return;
      case ExprKind::Call:
        eval(f, *e.value);
        for (const auto& a : e.args) eval(f, *a.value);
        record_call(f, e);
        return;
      case ExprKind::Lambda:
        for (const auto& p : e.params) {
          if (p.default_value) eval(f, *p.default_value);
        }
        if (recording_) analyze_lambda(f, e);
        return;
      case ExprKind::Comprehension:
        eval_comprehension(f, e);
        return;
      case ExprKind::NamedExpr: {
        eval(f, *e.value);
        Frame& target = binding_frame(f);
        Value v = join(lookup(target, e.name), assigned_value(f, *e.value));
        bind(target, e.name, v, e.span.begin.line);
        return;
      }
      default:
        if (e.value) eval(f, *e.value);
        if (e.value2) eval(f, *e.value2);
        for (const auto& c : e.children) eval(f, *c);
        for (const auto& a : e.args) eval(f, *a.value);
        return;
    }
  }

  void eval_comprehension(Frame& f, const Expr& e) {
    // Assignment expressions inside may rebind between iterations.
    std::vector<std::string> walrus;
    collect_walrus(e, walrus);
    Frame& target = binding_frame(f);
    for (const auto& n : walrus) bind(target, n, kOpaque, e.span.begin.line);

    eval(f, *e.generators[0].iter);
    Frame comp;
    comp.kind = FrameKind::Comprehension;
    comp.lookup_parent = &non_class(f);
    comp.def = f.def;
    comp.scope_name = f.scope_name;
    for (std::size_t i = 0; i < e.generators.size(); ++i) {
      const auto& g = e.generators[i];
      if (i > 0) eval(comp, *g.iter);
      comp_bind(comp, *g.target);
      for (const auto& c : g.conditions) eval(comp, *c);
    }
    eval(comp, *e.value);
    if (e.value2) eval(comp, *e.value2);
  }

  void record_call(const Frame& f, const Expr& e) {
    if (!recording_) return;
    ResolvedCall rc;
    if (auto c = resolve_chain(f, *e.value)) {
      rc.callee_path = c->path;
      rc.callee_evidence = c->evidence;
    }
    const Expr& callee = *e.value;
    if (callee.kind == ExprKind::Attribute && callee.value->kind == ExprKind::Name) {
      Value v = lookup(f, callee.value->name);
      if (v.kind == Value::Instance) {
        rc.receiver_class = DottedPath::parse(v.path);
        rc.method = callee.name;
        rc.receiver_situation = v.situation;
      }
    }
    if (!rc.callee_path && !rc.receiver_class) return;
    rc.start_line = e.span.begin.line;
    rc.end_line = e.rparen.line;
    rc.column = e.span.begin.col;
    rc.begin = e.span.begin.offset;
    rc.callee_end = callee.span.end.offset;
    rc.lparen = e.lparen.offset;
    rc.rparen = e.rparen.offset;
    rc.enclosing_def = f.def;
    out_.calls.push_back(std::move(rc));
  }

  // ---- functions -----------------------------------------------------------

  void init_function_frame(Frame& fn, Frame& creator) {
    Frame& cp = non_class(creator);
    fn.kind = FrameKind::Function;
    fn.lookup_parent = &cp;
    fn.closure_parent = &cp;
    fn.anchor_offset = cp.cur_offset;
    fn.anchor_loops = cp.loops;
    fn.info = std::make_unique<ScopeInfo>();
  }

  void bind_params(Frame& fn, Frame& creator, const std::vector<ParamDecl>& params, int line) {
    Binder binder(*fn.info);
    for (const auto& p : params) binder.add(p.name);
    for (const auto& p : params) {
      Value v = kOpaque;
      if (p.annotation && !is_star_kind(p.kind)) {
        if (auto cls = resolve_annotation(creator, *p.annotation)) {
          v = {Value::Instance, cls->str(), 2};
        }
      }
      fn.env.set(p.name, v);
      if (v.kind == Value::Instance) {
        out_.types.bindings.push_back({fn.scope_name, p.name, DottedPath::parse(v.path), 2, line});
      }
    }
  }

  void analyze_function(Frame& creator, const Stmt& s) {
    Frame fn;
    init_function_frame(fn, creator);
    fn.def = &s;
    fn.scope_name = creator.kind == FrameKind::Module ? s.name : creator.scope_name + "." + s.name;
    bind_params(fn, creator, s.params, s.keyword.line);
    Binder binder(*fn.info);
    binder.block(s.body);
    for (const auto& n : fn.info->globals) fn.info->locals.erase(n);
    for (const auto& n : fn.info->nonlocals) fn.info->locals.erase(n);
    exec_block(fn, s.body);
  }

  void analyze_lambda(Frame& creator, const Expr& e) {
    Frame fn;
    init_function_frame(fn, creator);
    fn.def = creator.def;
    fn.scope_name = creator.scope_name;
    bind_params(fn, creator, e.params, e.span.begin.line);
    Binder(*fn.info).expr(*e.value);
    eval(fn, *e.value);
  }

  // ---- statements ----------------------------------------------------------

  void exec_block(Frame& f, const Block& b) {
    for (const auto& s : b) exec(f, *s);
  }

  void exec_import(Frame& f, const Stmt& s) {
    int line = s.span.begin.line;
    if (s.kind == StmtKind::Import) {
      for (const auto& n : s.names) {
        std::string local = import_local_name(n);
        std::string target = n.asname ? n.module : local;
        bind(f, local, {Value::Alias, target, 0}, line);
        if (recording_) {
          out_.aliases.bindings.push_back({f.scope_name, local, DottedPath::parse(target), line});
        }
      }
      return;
    }
    if (s.level > 0) {
      for (const auto& n : s.names) bind(f, n.asname ? *n.asname : n.module, kOpaque, line);
      if (recording_) {
        out_.aliases.relative_import_lines.push_back(line);
        out_.notes.push_back({out_.file_id, line, "relative import left unresolved"});
      }
      return;
    }
    if (s.star) {
      for (auto& [name, v] : f.env.vars) v = kOpaque;
      for (Env* acc : f.try_stack) {
        for (auto& [name, v] : acc->vars) v = kOpaque;
      }
      if (recording_) {
        out_.aliases.star_import_lines.push_back(line);
        out_.notes.push_back(
            {out_.file_id, line, "star import from " + s.module + "; earlier bindings unknown"});
      }
      return;
    }
    for (const auto& n : s.names) {
      std::string local = n.asname ? *n.asname : n.module;
      std::string target = s.module + "." + n.module;
      bind(f, local, {Value::Alias, target, 0}, line);
      if (recording_) {
        out_.aliases.bindings.push_back({f.scope_name, local, DottedPath::parse(target), line});
      }
    }
  }

  void exec_def(Frame& f, const Stmt& s) {
    for (const auto& d : s.decorators) eval(f, *d);
    for (const auto& p : s.params) {
      if (p.default_value) eval(f, *p.default_value);
      if (p.annotation) eval(f, *p.annotation);
    }
    if (s.annotation) eval(f, *s.annotation);
    if (recording_) analyze_function(f, s);
    // Decorators may replace the function and coroutines return awaitables.
    Value v{Value::Function, {}, 0};
    if (!s.decorators.empty() || s.is_async) {
      v = kOpaque;
    } else if (s.annotation) {
      if (auto ret = resolve_annotation(f, *s.annotation)) v.path = ret->str();
    }
    bind(f, s.name, v, s.keyword.line);
  }

  void exec_class(Frame& f, const Stmt& s) {
    for (const auto& d : s.decorators) eval(f, *d);
    for (const auto& b : s.bases) eval(f, *b.value);
    if (recording_) {
      Frame cls;
      cls.kind = FrameKind::Class;
      cls.lookup_parent = &non_class(f);
      cls.def = f.def;
      cls.scope_name = f.kind == FrameKind::Module ? s.name : f.scope_name + "." + s.name;
      exec_block(cls, s.body);
    }
    bind(f, s.name, kOpaque, s.keyword.line);
  }

  void exec_assign(Frame& f, const Stmt& s) {
    if (s.value) eval(f, *s.value);
    if (s.kind == StmtKind::AnnAssign) eval(f, *s.annotation);
    for (const auto& t : s.targets) {
      if (t->kind == ExprKind::Name) {
        if (s.kind == StmtKind::AnnAssign && !s.value) continue;
        Value v = s.kind == StmtKind::AugAssign ? kOpaque : assigned_value(f, *s.value);
        bind(f, t->name, v, t->span.begin.line);
      } else {
        bind_targets_opaque(f, *t);
      }
    }
  }

  void exec_delete(Frame& f, const Stmt& s) {
    std::vector<const Expr*> stack{s.targets[0].get()};
    while (!stack.empty()) {
      const Expr* t = stack.back();
      stack.pop_back();
      if (t->kind == ExprKind::Name) {
        f.env.set(t->name, Value{});
      } else if (t->kind == ExprKind::Compound && (t->tag == "Tuple" || t->tag == "List")) {
        for (const auto& c : t->children) stack.push_back(c.get());
      } else {
        eval(f, *t);
      }
    }
  }

  // Runs one pass over a loop body from the current env.
  std::pair<Env, Env> loop_pass(Frame& f, const Stmt& s) {
    f.loops.push_back(&s);
    f.loop_ctx.emplace_back();
    if (s.kind == StmtKind::While) {
      eval(f, *s.value);
    } else {
      bind_targets_opaque(f, *s.targets[0]);
    }
    exec_block(f, s.body);
    Env end = join(f.env, f.loop_ctx.back().continues);
    Env breaks = f.loop_ctx.back().breaks;
    f.loop_ctx.pop_back();
    f.loops.pop_back();
    return {end, breaks};
  }

  void exec_loop(Frame& f, const Stmt& s) {
    if (s.kind == StmtKind::For) eval(f, *s.value);
    Env head = f.env;
    bool was_recording = recording_;
    recording_ = false;
    constexpr int kMaxIterations = 32;
    bool converged = false;
    for (int i = 0; i < kMaxIterations && !converged; ++i) {
      f.env = head;
      auto [end, breaks] = loop_pass(f, s);
      Env next = join(head, end);
      converged = next == head;
      head = std::move(next);
    }
    if (!converged) {
      for (auto& [name, v] : head.vars) v = kOpaque;
    }
    recording_ = was_recording;
    f.env = head;
    auto [end, breaks] = loop_pass(f, s);
    f.env = head;
    exec_block(f, s.orelse);
    f.env = join(f.env, breaks);
  }

  void exec_try(Frame& f, const Stmt& s) {
    Env acc = f.env;
    f.try_stack.push_back(&acc);
    exec_block(f, s.body);
    f.try_stack.pop_back();
    exec_block(f, s.orelse);
    Env out = f.env;
    for (const auto& h : s.handlers) {
      f.env = acc;
      f.env.reachable = true;
      if (h.type) eval(f, *h.type);
      if (h.name) bind(f, *h.name, kOpaque, s.span.begin.line);
      exec_block(f, h.body);
      if (h.name) f.env.set(*h.name, Value{});
      out = join(out, f.env);
    }
    if (!s.finalbody.empty()) {
      Env entry = join(out, acc);
      entry.reachable = true;
      f.env = std::move(entry);
      exec_block(f, s.finalbody);
      if (!out.reachable) f.env.reachable = false;
    } else {
      f.env = out;
    }
  }

  void exec_with(Frame& f, const Stmt& s) {
    Env acc = f.env;
    f.try_stack.push_back(&acc);
    for (const auto& item : s.items) {
      eval(f, *item.context);
      if (item.target) bind_targets_opaque(f, *item.target);
    }
    exec_block(f, s.body);
    f.try_stack.pop_back();
    // A context manager may swallow an exception raised anywhere in the body.
    bool reachable = f.env.reachable;
    f.env = join(f.env, acc);
    f.env.reachable = reachable || acc.reachable;
  }

  void exec_match(Frame& f, const Stmt& s) {
    eval(f, *s.value);
    Env pre = f.env;
    Env none_matched = pre;
    Env out{false, {}};
    for (const auto& c : s.cases) {
      f.env = pre;
      for (const auto& n : c.captures) bind(f, n, kOpaque, s.span.begin.line);
      if (c.guard) eval(f, *c.guard);
      none_matched = join(none_matched, f.env);
      exec_block(f, c.body);
      out = join(out, f.env);
    }
    f.env = join(out, none_matched);
  }

  void exec(Frame& f, const Stmt& s) {
    f.cur_offset = s.span.begin.offset;
    switch (s.kind) {
      case StmtKind::Import:
      case StmtKind::ImportFrom: exec_import(f, s); break;
      case StmtKind::FunctionDef: exec_def(f, s); break;
      case StmtKind::ClassDef: exec_class(f, s); break;
      case StmtKind::Assign:
      case StmtKind::AugAssign:
      case StmtKind::AnnAssign: exec_assign(f, s); break;
      case StmtKind::Delete: exec_delete(f, s); break;
      case StmtKind::If: {
        eval(f, *s.value);
        Env pre = f.env;
        exec_block(f, s.body);
        Env then_env = f.env;
        f.env = pre;
        exec_block(f, s.orelse);
        f.env = join(then_env, f.env);
        break;
      }
      case StmtKind::For:
      case StmtKind::While: exec_loop(f, s); break;
      case StmtKind::Try: exec_try(f, s); break;
      case StmtKind::With: exec_with(f, s); break;
      case StmtKind::Match: exec_match(f, s); break;
      case StmtKind::TypeAlias: bind(f, s.name, kOpaque, s.span.begin.line); break;
      case StmtKind::Return:
      case StmtKind::Raise:
        if (s.value) eval(f, *s.value);
        if (s.extra) eval(f, *s.extra);
        f.env.reachable = false;
        break;
      case StmtKind::Break:
      case StmtKind::Continue:
        if (!f.loop_ctx.empty()) {
          auto& ctx = f.loop_ctx.back();
          Env& slot = s.kind == StmtKind::Break ? ctx.breaks : ctx.continues;
          slot = join(slot, f.env);
        }
        f.env.reachable = false;
        break;
      default:
        if (s.value) eval(f, *s.value);
        if (s.extra) eval(f, *s.extra);
        break;
    }
  }

  SourceAnalysis& out_;
  std::set<std::string> global_written_;
  std::set<std::string> nonlocal_written_;
  bool recording_ = true;
};

// ---------------------------------------------------------------------------
// Segments

struct Segment {
  std::string text;
  std::size_t src_begin = 0;
  std::size_t src_end = 0;
  struct Line {
    std::size_t src_start;
    std::size_t seg_start;
    std::size_t removed;
  };
  std::vector<Line> lines;

  std::size_t map(std::size_t offset) const {
    auto it = std::upper_bound(lines.begin(), lines.end(), offset,
                               [](std::size_t o, const Line& l) { return o < l.src_start; });
    const Line& l = *(it - 1);
    std::size_t col = offset - l.src_start;
    return l.seg_start + (col > l.removed ? col - l.removed : 0);
  }
};

Segment make_segment(std::string_view source, const Stmt& def) {
  Segment seg;
  std::size_t kw = def.keyword.offset;
  std::size_t line_start = source.rfind('\n', kw == 0 ? 0 : kw - 1);
  line_start = (kw == 0 || line_start == std::string_view::npos) ? 0 : line_start + 1;
  std::string_view indent = source.substr(line_start, kw - line_start);
  if (indent.find_first_not_of(" \t") != std::string_view::npos) {
    line_start = kw;
    indent = {};
  }
  seg.src_begin = line_start;
  seg.src_end = def.span.end.offset;
  std::size_t pos = line_start;
  while (pos < seg.src_end) {
    std::size_t nl = source.find('\n', pos);
    std::size_t stop = std::min(nl == std::string_view::npos ? source.size() : nl + 1, seg.src_end);
    std::string_view line = source.substr(pos, stop - pos);
    std::size_t removed = 0;
    if (line.substr(0, indent.size()) == indent) {
      removed = indent.size();
    } else {
      while (removed < indent.size() && removed < line.size() &&
             (line[removed] == ' ' || line[removed] == '\t')) {
        ++removed;
      }
    }
    seg.lines.push_back({pos, seg.text.size(), removed});
    seg.text.append(line.substr(removed));
    pos = stop;
  }
  return seg;
}

std::string module_imports(const SourceAnalysis& a) {
  std::string out;
  for (const auto& s : a.module.body) {
    if (s->kind != StmtKind::Import && s->kind != StmtKind::ImportFrom) continue;
    if (!out.empty()) out += '\n';
    out += slice(a.source, s->span);
  }
  return out;
}

}  // namespace

std::unique_ptr<SourceAnalysis> analyze_source(std::string file_id, std::string source) {
  auto a = std::make_unique<SourceAnalysis>();
  a->file_id = std::move(file_id);
  a->source = std::move(source);
  a->module = parse_module(a->source);
  Analyzer(*a).run();
  return a;
}

AliasMap build_alias_map(std::string_view source) {
  return analyze_source("", std::string(source))->aliases;
}

TypeEnvironment infer_types(std::string_view source) {
  return analyze_source("", std::string(source))->types;
}

std::vector<InvocationSite> locate_invocations(const SourceAnalysis& analysis,
                                               const ApiSignature& api) {
  std::vector<InvocationSite> sites;
  std::optional<DottedPath> owner;
  if (api.kind == ApiKind::Method) owner = api.owning_class();
  for (const auto& c : analysis.calls) {
    Evidence ev;
    if (api.kind == ApiKind::Method) {
      if (!c.receiver_class || *c.receiver_class != *owner || c.method != api.api_path.back()) {
        continue;
      }
      ev.kind = EvidenceKind::TypedReceiver;
      ev.situation = c.receiver_situation;
    } else {
      if (!c.callee_path || *c.callee_path != api.api_path) continue;
      ev = c.callee_evidence;
    }
    InvocationSite s{analysis.file_id, api.api_path, c.start_line, c.end_line, c.column,
                     std::move(ev),    c.callee_end, c.lparen,     c.rparen,   c.enclosing_def};
    sites.push_back(std::move(s));
  }
  std::stable_sort(sites.begin(), sites.end(), [](const auto& a, const auto& b) {
    return std::tie(a.start_line, a.column) < std::tie(b.start_line, b.column);
  });
  return sites;
}

Json metadata_to_json(const MetadataItem& item) {
  return Json{{"api_path", item.api_path.str()},
              {"code_context", item.code_context},
              {"target_seq", item.target_seq},
              {"suffix", item.suffix},
              {"imports", item.imports},
              {"file_id", item.file_id},
              {"start_line", item.start_line},
              {"end_line", item.end_line},
              {"evidence", evidence_to_json(item.evidence)}};
}

MetadataItem metadata_from_json(const Json& row) {
  try {
    MetadataItem m{DottedPath::parse(row.at("api_path").get<std::string>()),
                   row.at("code_context").get<std::string>(),
                   row.at("target_seq").get<std::string>(),
                   row.at("suffix").get<std::string>(),
                   row.value("imports", std::string()),
                   row.at("file_id").get<std::string>(),
                   row.at("start_line").get<int>(),
                   row.at("end_line").get<int>(),
                   evidence_from_json(row.at("evidence"))};
    return m;
  } catch (const Json::exception& e) {
    throw Error(Errc::InvalidValue, std::string("metadata row: ") + e.what());
  }
}

SegmentResult segment_and_metadata(const SourceAnalysis& analysis,
                                   const std::vector<InvocationSite>& sites) {
  SegmentResult result;
  std::map<std::size_t, const InvocationSite*> first_by_def;  // keyed by def keyword offset
  for (const auto& s : sites) {
    if (!s.enclosing_def) {
      result.skipped.push_back({s.file_id, s.start_line, "site outside any function definition"});
      continue;
    }
    auto key = s.enclosing_def->keyword.offset;
    auto it = first_by_def.find(key);
    if (it == first_by_def.end() ||
        std::tie(s.start_line, s.column) < std::tie(it->second->start_line, it->second->column)) {
      first_by_def[key] = &s;
    }
  }
  std::string imports = module_imports(analysis);
  for (const auto& [key, site] : first_by_def) {
    if (site->callee_end != site->lparen) {
      result.skipped.push_back(
          {site->file_id, site->start_line, "text between callee and argument list"});
      continue;
    }
    Segment seg = make_segment(analysis.source, *site->enclosing_def);
    std::size_t callee_end = seg.map(site->callee_end);
    std::size_t lparen = seg.map(site->lparen);
    std::size_t after = seg.map(site->rparen) + 1;
    result.items.push_back(MetadataItem{site->api_path, seg.text.substr(0, callee_end),
                                        seg.text.substr(lparen, after - lparen),
                                        seg.text.substr(after), imports, site->file_id,
                                        site->start_line, site->end_line, site->evidence});
  }
  return result;
}

}  // namespace apisync
