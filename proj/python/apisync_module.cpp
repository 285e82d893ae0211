// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

// Structured values cross the boundary as JSON text; the Python package
// decodes them.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "apisync/bench_builder.hpp"
#include "apisync/dump_io.hpp"
#include "apisync/eval_metrics.hpp"
#include "apisync/invocation_locator.hpp"
#include "apisync/pair_synthesizer.hpp"
#include "apisync/pipeline.hpp"
#include "apisync/search_planner.hpp"
#include "apisync/update_detector.hpp"

namespace py = pybind11;
using namespace apisync;

namespace {

std::string render(const std::string& text) {
  return render_signature_text(parse_signature_text(text));
}

std::vector<std::vector<std::string>> templates(const std::string& path, const std::string& kind) {
  std::vector<std::vector<std::string>> out;
  for (auto& t : enumerate_templates(DottedPath::parse(path), api_kind_from_string(kind))) {
    out.push_back(std::move(t.segments));
  }
  return out;
}

std::string diff(const std::string& legacy, const std::string& updated, double threshold) {
  auto report = diff_dumps(dump_from_json(Json::parse(legacy)), dump_from_json(Json::parse(updated)),
                           threshold);
  return updates_to_jsonl(report.updates);
}

std::string locate(const std::string& file_id, const std::string& source,
                   const std::string& api_path, const std::string& kind,
                   const std::vector<std::string>& overloads) {
  std::vector<ParameterList> lists;
  for (const auto& o : overloads) lists.push_back(parse_signature_text(o));
  ApiSignature sig(DottedPath::parse(api_path), api_kind_from_string(kind), std::move(lists));
  auto analysis = analyze_source(file_id, source);
  auto result = segment_and_metadata(*analysis, locate_invocations(*analysis, sig));
  std::vector<Json> rows;
  for (const auto& item : result.items) rows.push_back(metadata_to_json(item));
  return io::to_jsonl(rows);
}

py::tuple mock_pair(const std::string& api_path, const std::string& latest,
                    const std::string& outdated, const std::string& context,
                    const std::string& statement, const std::string& suffix, std::uint64_t seed) {
  SynthesisRequest req{DottedPath::parse(api_path), latest, outdated, context, statement, suffix};
  req.validate();
  MockGenerationClient client;
  auto res = parse_synthesis_response(client.generate(build_synthesis_prompt(req), seed));
  return py::make_tuple(res.updated_code, res.outdated_code);
}

std::string prompt(const std::string& api_path, const std::string& latest,
                   const std::string& outdated, const std::string& context,
                   const std::string& statement, const std::string& suffix) {
  return build_synthesis_prompt(
      {DottedPath::parse(api_path), latest, outdated, context, statement, suffix});
}

std::string score(const std::string& task, const std::vector<std::string>& answers,
                  const std::string& outputs_jsonl) {
  std::vector<ModelOutputRecord> outputs;
  for (const auto& row : io::parse_jsonl(outputs_jsonl)) {
    outputs.push_back(output_record_from_json(row));
  }
  return score_run(bench_task_from_string(task), answers, outputs).to_json().dump();
}

std::string run_stage(const std::filesystem::path& config, const std::string& stage,
                      std::optional<std::uint64_t> seed, bool resume) {
  RunOptions opts;
  opts.seed = seed;
  opts.resume = resume;
  Pipeline p(PipelineConfig::load(config), opts);
  Json out = Json::array();
  if (stage == "all") {
    for (const auto& r : p.run_all()) out.push_back(r.manifest.to_json());
  } else {
    out.push_back(p.run_stage(stage_from_string(stage)).manifest.to_json());
  }
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_apisync, m) {
  m.doc() = "apisync native core";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::object(py::exception<Error>(m, "ApisyncError")); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& type = error_type.get_stored();
      py::object exc = type(py::str(e.what()));
      exc.attr("code") = std::string(errc_name(e.code()));
      exc.attr("exit_code") = exit_code_for(e.code());
      PyErr_SetObject(type.ptr(), exc.ptr());
    } catch (const Json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("render_signature", &render, py::arg("text"));
  m.def("enumerate_templates", &templates, py::arg("api_path"), py::arg("kind"));
  m.def("diff_dumps_jsonl", &diff, py::arg("legacy"), py::arg("updated"),
        py::arg("threshold") = kDefaultRenameThreshold);
  m.def("locate_jsonl", &locate, py::arg("file_id"), py::arg("source"), py::arg("api_path"),
        py::arg("kind"), py::arg("overloads"));
  m.def("synthesis_prompt", &prompt, py::arg("api_path"), py::arg("latest"),
        py::arg("outdated"), py::arg("context"), py::arg("statement"), py::arg("suffix"));
  m.def("mock_pair", &mock_pair, py::arg("api_path"), py::arg("latest"), py::arg("outdated"),
        py::arg("context"), py::arg("statement"), py::arg("suffix"), py::arg("seed") = 0);

  m.def("tokenize_code", &tokenize_code, py::arg("text"));
  m.def(
      "bleu",
      [](const std::string& c, const std::string& r) {
        return bleu(tokenize_code(c), tokenize_code(r));
      },
      py::arg("candidate"), py::arg("reference"));
  m.def(
      "rouge_l",
      [](const std::string& c, const std::string& r) {
        return rouge_l(tokenize_code(c), tokenize_code(r));
      },
      py::arg("candidate"), py::arg("reference"));
  m.def(
      "red", [](const std::string& c, const std::string& r) { return red(c, r); },
      py::arg("candidate"), py::arg("reference"));
  m.def(
      "codebleu", [](const std::string& c, const std::string& r) { return codebleu(c, r); },
      py::arg("candidate"), py::arg("reference"));
  m.def("pass_at_k", &pass_at_k, py::arg("n"), py::arg("c"), py::arg("k"));
  m.def(
      "extract_choice",
      [](const std::string& s) -> std::optional<std::string> {
        auto c = extract_choice(s);
        if (!c) return std::nullopt;
        return std::string(1, *c);
      },
      py::arg("sample"));
  m.def("normalize_answer", &normalize_answer, py::arg("text"));
  m.def("score_run_json", &score, py::arg("task"), py::arg("answers"), py::arg("outputs_jsonl"));

  m.def("run_stage_json", &run_stage, py::arg("config"), py::arg("stage"),
        py::arg("seed") = std::nullopt, py::arg("resume") = false,
        py::call_guard<py::gil_scoped_release>());
}
