// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "apisync/core_model.hpp"
#include "apisync/io.hpp"

namespace apisync {

// SignatureDump wire format, shared with the reflection extractor:
//   {"library": ..., "version": ...,
//    "apis": {"<dotted.path>": {"kind": "function|method|initializer",
//                               "overloads": ["(<sig text>)", ...]}}}

Json dump_to_json(const SignatureDump& dump);
SignatureDump dump_from_json(const Json& doc);

SignatureDump load_dump(const std::filesystem::path& path);
std::string serialize_dump(const SignatureDump& dump);

/// Entries of the extractor's `<path>.skipped.json` side file: a JSON array
/// of {"api_path", "reason"} objects.
std::vector<std::pair<std::string, std::string>> load_skipped(
    const std::filesystem::path& path);

}  // namespace apisync
