// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "apisync/core_model.hpp"
#include "apisync/io.hpp"
#include "apisync/pysource.hpp"

namespace apisync {

/// Where an import binds a local name. `scope` is "<module>" or the dotted
/// chain of enclosing definition names, e.g. "Trainer.fit".
struct AliasBinding {
  std::string scope;
  std::string local_name;
  DottedPath target;
  int line = 0;
};

struct AliasMap {
  std::vector<AliasBinding> bindings;
  std::vector<int> star_import_lines;
  std::vector<int> relative_import_lines;
};

/// A variable typed by one of the three sanctioned situations:
///   1 = assigned from a call to a resolved class initializer,
///   2 = parameter annotated with a resolved class path,
///   3 = assigned from a same-file function with a resolved return annotation.
/// The binding is live from `line` until the variable is rebound.
struct TypeBinding {
  std::string scope;
  std::string variable;
  DottedPath class_path;
  int situation = 0;
  int line = 0;
};

struct TypeEnvironment {
  std::vector<TypeBinding> bindings;
};

enum class EvidenceKind { DirectName, AliasChain, TypedReceiver };
std::string_view to_string(EvidenceKind kind) noexcept;

struct Evidence {
  EvidenceKind kind = EvidenceKind::DirectName;
  // AliasChain: the local name followed by the path it was rewritten to.
  std::vector<std::string> hops;
  // TypedReceiver: the inference situation (1, 2 or 3).
  int situation = 0;

  bool operator==(const Evidence&) const = default;
};

Json evidence_to_json(const Evidence& e);

struct InvocationSite {
  std::string file_id;
  DottedPath api_path;
  int start_line = 0;  // 1-based, inclusive
  int end_line = 0;
  int column = 0;      // 0-based byte column of the call's first token
  Evidence evidence;
  // Byte offsets into the source: callee end, "(" and ")".
  std::size_t callee_end = 0;
  std::size_t lparen = 0;
  std::size_t rparen = 0;
  // Innermost enclosing function definition, or nullptr at module or class
  // level. Points into SourceAnalysis::module.
  const pysrc::Stmt* enclosing_def = nullptr;
};

/// Something the analysis deliberately did not resolve.
struct SkipNote {
  std::string file_id;
  int line = 0;
  std::string reason;
};

/// One call expression whose callee could be resolved to a dotted path or
/// whose receiver carries an inferred type.
struct ResolvedCall {
  std::optional<DottedPath> callee_path;
  Evidence callee_evidence;
  std::optional<DottedPath> receiver_class;
  std::string method;
  int receiver_situation = 0;
  int start_line = 0;
  int end_line = 0;
  int column = 0;
  std::size_t begin = 0;
  std::size_t callee_end = 0;
  std::size_t lparen = 0;
  std::size_t rparen = 0;
  const pysrc::Stmt* enclosing_def = nullptr;
};

/// Parsed source plus the results of the scope-aware flow analysis.
struct SourceAnalysis {
  std::string file_id;
  std::string source;
  pysrc::Module module;
  AliasMap aliases;
  TypeEnvironment types;
  std::vector<ResolvedCall> calls;
  std::vector<SkipNote> notes;
};

/// Parses and analyzes a file. Throws Error(ParseError) for sources outside
/// the supported grammar (Python 2 code, syntax errors).
std::unique_ptr<SourceAnalysis> analyze_source(std::string file_id, std::string source);

AliasMap build_alias_map(std::string_view source);
TypeEnvironment infer_types(std::string_view source);

/// Verified invocation sites of `api`, ordered by (line, column). Function
/// and initializer APIs match calls whose callee rewrites through the import
/// aliases to the API path; methods match `recv.method(...)` where `recv`
/// carries the owning class type.
std::vector<InvocationSite> locate_invocations(const SourceAnalysis& analysis,
                                               const ApiSignature& api);

struct MetadataItem {
  DottedPath api_path;
  std::string code_context;  // segment text up to and including the callee
  std::string target_seq;    // "(" ... ")"
  std::string suffix;        // rest of the segment
  std::string imports;       // module-level import statements, one per line
  std::string file_id;
  int start_line = 0;
  int end_line = 0;
  Evidence evidence;

  std::string segment_text() const { return code_context + target_seq + suffix; }
};

Json metadata_to_json(const MetadataItem& item);
MetadataItem metadata_from_json(const Json& row);

struct SegmentResult {
  std::vector<MetadataItem> items;
  std::vector<SkipNote> skipped;
};

/// Splits the file into function-definition segments and emits one item per
/// segment, built from the first site inside it. Segment text runs from the
/// definition keyword through the end of its body, dedented by the
/// definition's own indentation; decorators are not part of it.
SegmentResult segment_and_metadata(const SourceAnalysis& analysis,
                                   const std::vector<InvocationSite>& sites);

}  // namespace apisync
