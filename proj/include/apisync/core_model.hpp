// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace apisync {

bool is_identifier(std::string_view text) noexcept;

/// A dotted API name such as `torch.nn.functional.softmax`. Never empty.
class DottedPath {
 public:
  explicit DottedPath(std::vector<std::string> fields);

  /// Splits on "." and validates each field. Throws Error(InvalidValue).
  static DottedPath parse(std::string_view text);

  const std::vector<std::string>& fields() const noexcept { return fields_; }
  std::size_t size() const noexcept { return fields_.size(); }
  const std::string& front() const noexcept { return fields_.front(); }
  const std::string& back() const noexcept { return fields_.back(); }

  std::string str() const;
  DottedPath prefix(std::size_t count) const;
  DottedPath parent() const;
  DottedPath child(std::string_view field) const;
  bool starts_with(const DottedPath& other) const noexcept;

  auto operator<=>(const DottedPath&) const = default;
  bool operator==(const DottedPath&) const = default;

 private:
  std::vector<std::string> fields_;
};

// Declaration order is the order kinds must appear in a parameter list.
enum class ParamKind {
  PositionalOnly,
  PositionalOrKeyword,
  VarPositional,
  KeywordOnly,
  VarKeyword,
};

std::string_view to_string(ParamKind kind) noexcept;
ParamKind param_kind_from_string(std::string_view text);

inline bool is_star_kind(ParamKind kind) noexcept {
  return kind == ParamKind::VarPositional || kind == ParamKind::VarKeyword;
}
inline bool accepts_position(ParamKind kind) noexcept {
  return kind == ParamKind::PositionalOnly ||
         kind == ParamKind::PositionalOrKeyword;
}
inline bool accepts_keyword(ParamKind kind) noexcept {
  return kind == ParamKind::PositionalOrKeyword ||
         kind == ParamKind::KeywordOnly;
}

struct Parameter {
  std::string name;
  ParamKind kind = ParamKind::PositionalOrKeyword;
  bool required = true;
  // Opaque source text; never evaluated.
  std::optional<std::string> default_repr;
  std::optional<std::string> annotation_repr;

  static Parameter positional_only(std::string name,
                                   std::optional<std::string> def = {});
  static Parameter positional_or_keyword(std::string name,
                                         std::optional<std::string> def = {});
  static Parameter keyword_only(std::string name,
                                std::optional<std::string> def = {});
  static Parameter var_positional(std::string name);
  static Parameter var_keyword(std::string name);

  bool operator==(const Parameter&) const = default;
};

/// Ordered parameters of one callable overload. Construction enforces unique
/// names, kind ordering, at most one of each star parameter and the
/// required/default consistency of every parameter.
class ParameterList {
 public:
  ParameterList() = default;
  explicit ParameterList(std::vector<Parameter> params);

  const std::vector<Parameter>& params() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }
  bool empty() const noexcept { return params_.empty(); }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  auto begin() const noexcept { return params_.begin(); }
  auto end() const noexcept { return params_.end(); }

  const Parameter* find(std::string_view name) const noexcept;
  bool has_kind(ParamKind kind) const noexcept;
  std::size_t count_kind(ParamKind kind) const noexcept;

  bool operator==(const ParameterList&) const = default;

 private:
  std::vector<Parameter> params_;
};

enum class ApiKind { Function, Method, Initializer };

std::string_view to_string(ApiKind kind) noexcept;
ApiKind api_kind_from_string(std::string_view text);

struct ApiSignature {
  ApiSignature(DottedPath path, ApiKind kind,
               std::vector<ParameterList> overloads);

  DottedPath api_path;
  ApiKind kind;
  std::vector<ParameterList> overloads;

  /// Class that owns a method (the path minus the method name) or an
  /// initializer (the path itself, since initializers are keyed by class).
  /// Throws for functions.
  DottedPath owning_class() const;

  bool operator==(const ApiSignature&) const = default;
};

struct SignatureDump {
  std::string library;
  std::string version;
  std::map<DottedPath, ApiSignature> apis;

  /// Throws Error(InvalidValue) when a key disagrees with its signature or
  /// does not live under the library's root package.
  void validate() const;
};

/// Parses "(a, b=1, /, c, *, d=None)" style text.
ParameterList parse_signature_text(std::string_view text);

/// Canonical form: ", " separators, "=" without spaces, ": " before
/// annotations, and "/" / "*" markers only at real region boundaries.
std::string render_signature_text(const ParameterList& params);

}  // namespace apisync
