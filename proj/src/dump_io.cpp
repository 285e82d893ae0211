// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#include "apisync/dump_io.hpp"

#include "apisync/error.hpp"

namespace apisync {

Json dump_to_json(const SignatureDump& dump) {
  Json apis = Json::object();
  for (const auto& [path, sig] : dump.apis) {
    Json overloads = Json::array();
    for (const auto& o : sig.overloads) overloads.push_back(render_signature_text(o));
    apis[path.str()] = Json{{"kind", std::string(to_string(sig.kind))},
                            {"overloads", std::move(overloads)}};
  }
  return Json{{"library", dump.library},
              {"version", dump.version},
              {"apis", std::move(apis)}};
}

SignatureDump dump_from_json(const Json& doc) {
  auto field = [&](const Json& obj, const char* key, Json::value_t type,
                   const std::string& where) -> const Json& {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).type() != type) {
      throw Error(Errc::InvalidValue,
                  where + ": missing or mistyped field '" + key + "'");
    }
    return obj.at(key);
  };
  SignatureDump dump;
  dump.library = field(doc, "library", Json::value_t::string, "dump").get<std::string>();
  dump.version = field(doc, "version", Json::value_t::string, "dump").get<std::string>();
  for (const auto& [key, entry] :
       field(doc, "apis", Json::value_t::object, "dump").items()) {
    auto path = DottedPath::parse(key);
    auto kind = api_kind_from_string(
        field(entry, "kind", Json::value_t::string, key).get<std::string>());
    std::vector<ParameterList> overloads;
    for (const auto& text : field(entry, "overloads", Json::value_t::array, key)) {
      if (!text.is_string()) {
        throw Error(Errc::InvalidValue, key + ": overload is not a string");
      }
      try {
        overloads.push_back(parse_signature_text(text.get<std::string>()));
      } catch (const Error& e) {
        throw Error(e.code(), key + ": " + e.what());
      }
    }
    dump.apis.emplace(path, ApiSignature(path, kind, std::move(overloads)));
  }
  dump.validate();
  return dump;
}

SignatureDump load_dump(const std::filesystem::path& path) {
  Json doc;
  try {
    doc = Json::parse(io::read_file(path));
  } catch (const Json::parse_error& e) {
    throw Error(Errc::InvalidValue, path.string() + ": " + e.what());
  }
  return dump_from_json(doc);
}

std::string serialize_dump(const SignatureDump& dump) {
  return dump_to_json(dump).dump(2) + "\n";
}

std::vector<std::pair<std::string, std::string>> load_skipped(
    const std::filesystem::path& path) {
  auto doc = Json::parse(io::read_file(path));
  if (!doc.is_array()) throw Error(Errc::InvalidValue, path.string() + ": expected array");
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : doc) {
    out.emplace_back(e.at("api_path").get<std::string>(),
                     e.value("reason", std::string{}));
  }
  return out;
}

}  // namespace apisync
