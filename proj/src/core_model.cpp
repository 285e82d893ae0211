// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#include "apisync/core_model.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "apisync/error.hpp"
#include "text_util.hpp"

namespace apisync {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::InvalidValue: return "InvalidValue";
    case Errc::ParseError: return "ParseError";
    case Errc::PathMismatch: return "PathMismatch";
    case Errc::LibraryMismatch: return "LibraryMismatch";
    case Errc::ThresholdOutOfRange: return "ThresholdOutOfRange";
    case Errc::PathTooShort: return "PathTooShort";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::RateLimited: return "RateLimited";
    case Errc::ResponseUnparseable: return "ResponseUnparseable";
    case Errc::DistractorExhausted: return "DistractorExhausted";
    case Errc::EmptyReference: return "EmptyReference";
    case Errc::InvalidCounts: return "InvalidCounts";
    case Errc::MissingItem: return "MissingItem";
    case Errc::MissingPrerequisite: return "MissingPrerequisite";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::ExternalService: return "ExternalService";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

bool is_identifier(std::string_view text) noexcept {
  if (text.empty()) return false;
  auto head = static_cast<unsigned char>(text.front());
  if (!(std::isalpha(head) || head == '_')) return false;
  return std::all_of(text.begin() + 1, text.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u == '_';
  });
}

// ---------------------------------------------------------------------------
// DottedPath

DottedPath::DottedPath(std::vector<std::string> fields)
    : fields_(std::move(fields)) {
  if (fields_.empty()) throw Error(Errc::InvalidValue, "empty dotted path");
  for (const auto& f : fields_) {
    if (!is_identifier(f)) {
      throw Error(Errc::InvalidValue, "invalid path field '" + f + "'");
    }
  }
}

DottedPath DottedPath::parse(std::string_view text) {
  std::vector<std::string> fields;
  for (auto part : detail::split(text, '.')) fields.emplace_back(part);
  return DottedPath(std::move(fields));
}

std::string DottedPath::str() const { return detail::join(fields_, "."); }

DottedPath DottedPath::prefix(std::size_t count) const {
  if (count == 0 || count > fields_.size()) {
    throw Error(Errc::InvalidValue, "prefix length out of range");
  }
  return DottedPath({fields_.begin(), fields_.begin() + count});
}

DottedPath DottedPath::parent() const { return prefix(fields_.size() - 1); }

DottedPath DottedPath::child(std::string_view field) const {
  auto fields = fields_;
  fields.emplace_back(field);
  return DottedPath(std::move(fields));
}

bool DottedPath::starts_with(const DottedPath& other) const noexcept {
  return other.fields_.size() <= fields_.size() &&
         std::equal(other.fields_.begin(), other.fields_.end(),
                    fields_.begin());
}

// ---------------------------------------------------------------------------
// Parameters

std::string_view to_string(ParamKind kind) noexcept {
  switch (kind) {
    case ParamKind::PositionalOnly: return "positional_only";
    case ParamKind::PositionalOrKeyword: return "positional_or_keyword";
    case ParamKind::VarPositional: return "var_positional";
    case ParamKind::KeywordOnly: return "keyword_only";
    case ParamKind::VarKeyword: return "var_keyword";
  }
  return "unknown";
}

ParamKind param_kind_from_string(std::string_view text) {
  for (auto k : {ParamKind::PositionalOnly, ParamKind::PositionalOrKeyword,
                 ParamKind::VarPositional, ParamKind::KeywordOnly,
                 ParamKind::VarKeyword}) {
    if (to_string(k) == text) return k;
  }
  throw Error(Errc::InvalidValue, "unknown parameter kind '" +
                                      std::string(text) + "'");
}

namespace {

Parameter make_param(std::string name, ParamKind kind,
                     std::optional<std::string> def) {
  Parameter p;
  p.name = std::move(name);
  p.kind = kind;
  p.required = !def.has_value() && !is_star_kind(kind);
  p.default_repr = std::move(def);
  return p;
}

}  // namespace

Parameter Parameter::positional_only(std::string name,
                                     std::optional<std::string> def) {
  return make_param(std::move(name), ParamKind::PositionalOnly, std::move(def));
}
Parameter Parameter::positional_or_keyword(std::string name,
                                           std::optional<std::string> def) {
  return make_param(std::move(name), ParamKind::PositionalOrKeyword,
                    std::move(def));
}
Parameter Parameter::keyword_only(std::string name,
                                  std::optional<std::string> def) {
  return make_param(std::move(name), ParamKind::KeywordOnly, std::move(def));
}
Parameter Parameter::var_positional(std::string name) {
  return make_param(std::move(name), ParamKind::VarPositional, std::nullopt);
}
Parameter Parameter::var_keyword(std::string name) {
  return make_param(std::move(name), ParamKind::VarKeyword, std::nullopt);
}

ParameterList::ParameterList(std::vector<Parameter> params)
    : params_(std::move(params)) {
  std::set<std::string_view> names;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& p = params_[i];
    if (!is_identifier(p.name)) {
      throw Error(Errc::SyntaxError, "invalid parameter name '" + p.name + "'");
    }
    if (!names.insert(p.name).second) {
      throw Error(Errc::SyntaxError, "duplicate parameter '" + p.name + "'");
    }
    if (is_star_kind(p.kind)) {
      if (p.required || p.default_repr) {
        throw Error(Errc::SyntaxError,
                    "star parameter '" + p.name + "' cannot have a default");
      }
    } else if (p.required == p.default_repr.has_value()) {
      throw Error(Errc::SyntaxError,
                  "parameter '" + p.name +
                      "': required must hold exactly when no default exists");
    }
    if (i > 0) {
      auto prev = params_[i - 1].kind;
      bool repeated_star = is_star_kind(p.kind) && prev == p.kind;
      if (p.kind < prev || repeated_star) {
        throw Error(Errc::SyntaxError,
                    "parameter '" + p.name + "' (" +
                        std::string(to_string(p.kind)) + ") after " +
                        std::string(to_string(prev)));
      }
    }
  }
}

const Parameter* ParameterList::find(std::string_view name) const noexcept {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

bool ParameterList::has_kind(ParamKind kind) const noexcept {
  return count_kind(kind) > 0;
}

std::size_t ParameterList::count_kind(ParamKind kind) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(params_.begin(), params_.end(),
                    [kind](const Parameter& p) { return p.kind == kind; }));
}

// ---------------------------------------------------------------------------
// Signatures and dumps

std::string_view to_string(ApiKind kind) noexcept {
  switch (kind) {
    case ApiKind::Function: return "function";
    case ApiKind::Method: return "method";
    case ApiKind::Initializer: return "initializer";
  }
  return "unknown";
}

ApiKind api_kind_from_string(std::string_view text) {
  if (text == "function") return ApiKind::Function;
  if (text == "method") return ApiKind::Method;
  if (text == "initializer") return ApiKind::Initializer;
  throw Error(Errc::InvalidValue, "unknown api kind '" + std::string(text) + "'");
}

ApiSignature::ApiSignature(DottedPath path, ApiKind k,
                           std::vector<ParameterList> ovl)
    : api_path(std::move(path)), kind(k), overloads(std::move(ovl)) {
  if (overloads.empty()) {
    throw Error(Errc::InvalidValue, api_path.str() + ": no overloads");
  }
  if (kind == ApiKind::Method && api_path.size() < 2) {
    throw Error(Errc::InvalidValue,
                api_path.str() + ": a method needs an owning class");
  }
  std::set<std::string> seen;
  for (const auto& o : overloads) {
    if (!seen.insert(render_signature_text(o)).second) {
      throw Error(Errc::InvalidValue,
                  api_path.str() + ": duplicate overload " +
                      render_signature_text(o));
    }
  }
}

DottedPath ApiSignature::owning_class() const {
  switch (kind) {
    case ApiKind::Method: return api_path.parent();
    case ApiKind::Initializer: return api_path;
    case ApiKind::Function: break;
  }
  throw Error(Errc::InvalidValue, api_path.str() + " is not a class member");
}

void SignatureDump::validate() const {
  if (!is_identifier(library)) {
    throw Error(Errc::InvalidValue, "invalid library name '" + library + "'");
  }
  for (const auto& [path, sig] : apis) {
    if (path != sig.api_path) {
      throw Error(Errc::InvalidValue, "key " + path.str() +
                                          " does not match signature path " +
                                          sig.api_path.str());
    }
    if (path.front() != library) {
      throw Error(Errc::InvalidValue,
                  path.str() + " is outside library " + library);
    }
  }
}

// ---------------------------------------------------------------------------
// Signature text

namespace {

Parameter parse_param_item(std::string_view item) {
  using detail::trim;
  Parameter p;
  std::string_view rest = item;
  if (rest.starts_with("**")) {
    p.kind = ParamKind::VarKeyword;
    rest.remove_prefix(2);
  } else if (rest.starts_with("*")) {
    p.kind = ParamKind::VarPositional;
    rest.remove_prefix(1);
  }

  auto eq = detail::find_assignment(rest);
  std::string_view head = rest.substr(0, eq);
  if (eq != std::string_view::npos) {
    auto def = trim(rest.substr(eq + 1));
    if (def.empty()) {
      throw Error(Errc::SyntaxError, "empty default in '" + std::string(item) + "'");
    }
    p.default_repr = std::string(def);
  }
  auto colon = detail::find_top_level(head, ':');
  if (colon != std::string_view::npos) {
    auto ann = trim(head.substr(colon + 1));
    if (ann.empty()) {
      throw Error(Errc::SyntaxError,
                  "empty annotation in '" + std::string(item) + "'");
    }
    p.annotation_repr = std::string(ann);
    head = head.substr(0, colon);
  }
  p.name = std::string(trim(head));
  if (!is_identifier(p.name)) {
    throw Error(Errc::SyntaxError, "bad parameter '" + std::string(item) + "'");
  }
  if (is_star_kind(p.kind) && p.default_repr) {
    throw Error(Errc::SyntaxError,
                "star parameter with default: '" + std::string(item) + "'");
  }
  p.required = !p.default_repr && !is_star_kind(p.kind);
  return p;
}

}  // namespace

ParameterList parse_signature_text(std::string_view text) {
  auto body = detail::trim(text);
  if (body.size() < 2 || body.front() != '(') {
    throw Error(Errc::SyntaxError, "signature must start with '('");
  }
  auto close = detail::find_matching_close(body, 0);
  if (close == std::string_view::npos) {
    throw Error(Errc::SyntaxError, "unbalanced parentheses in " + std::string(body));
  }
  if (close != body.size() - 1) {
    throw Error(Errc::SyntaxError, "trailing text after signature");
  }
  auto inner = body.substr(1, body.size() - 2);
  auto items = detail::split_top_level(inner, ',');
  if (items.size() == 1 && detail::trim(items.front()).empty()) items.clear();

  std::vector<Parameter> params;
  bool seen_slash = false;
  bool seen_star = false;  // bare "*" or a var-positional
  bool kw_region_open = false;
  std::size_t kw_only_after_bare_star = 0;
  bool bare_star = false;

  for (auto raw : items) {
    auto item = detail::trim(raw);
    if (item.empty()) throw Error(Errc::SyntaxError, "empty parameter slot");
    if (item == "/") {
      if (seen_slash || seen_star || params.empty()) {
        throw Error(Errc::SyntaxError, "misplaced '/'");
      }
      for (auto& p : params) p.kind = ParamKind::PositionalOnly;
      seen_slash = true;
      continue;
    }
    if (item == "*") {
      if (seen_star) throw Error(Errc::SyntaxError, "misplaced '*'");
      seen_star = bare_star = kw_region_open = true;
      continue;
    }
    auto p = parse_param_item(item);
    if (p.kind == ParamKind::VarPositional) {
      if (seen_star) throw Error(Errc::SyntaxError, "misplaced '*" + p.name + "'");
      seen_star = kw_region_open = true;
    } else if (p.kind != ParamKind::VarKeyword && kw_region_open) {
      p.kind = ParamKind::KeywordOnly;
      if (bare_star) ++kw_only_after_bare_star;
    }
    if (!params.empty() && params.back().kind == ParamKind::VarKeyword) {
      throw Error(Errc::SyntaxError, "parameter after '**" + params.back().name + "'");
    }
    params.push_back(std::move(p));
  }
  if (bare_star && kw_only_after_bare_star == 0) {
    throw Error(Errc::SyntaxError, "named parameters must follow bare '*'");
  }
  return ParameterList(std::move(params));
}

std::string render_signature_text(const ParameterList& params) {
  std::vector<std::string> parts;
  bool has_var_positional = params.has_kind(ParamKind::VarPositional);
  bool kw_marker_done = false;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (i > 0 && params[i - 1].kind == ParamKind::PositionalOnly &&
        p.kind != ParamKind::PositionalOnly) {
      parts.emplace_back("/");
    }
    if (p.kind == ParamKind::KeywordOnly && !has_var_positional &&
        !kw_marker_done) {
      parts.emplace_back("*");
      kw_marker_done = true;
    }
    std::string s;
    if (p.kind == ParamKind::VarPositional) s = "*";
    if (p.kind == ParamKind::VarKeyword) s = "**";
    s += p.name;
    if (p.annotation_repr) s += ": " + *p.annotation_repr;
    if (p.default_repr) s += "=" + *p.default_repr;
    parts.push_back(std::move(s));
  }
  if (!params.empty() && params.params().back().kind == ParamKind::PositionalOnly) {
    parts.emplace_back("/");
  }
  return "(" + detail::join(parts, ", ") + ")";
}

}  // namespace apisync
