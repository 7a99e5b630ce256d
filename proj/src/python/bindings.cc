// Copyright 2026 The PueLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Python bindings. Plans and configs cross the boundary as JSON text; the
// Python package converts them to and from dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "json.hpp"
#include "puelab/checkpoint.h"
#include "puelab/corpus.h"
#include "puelab/efficiency.h"
#include "puelab/error.h"
#include "puelab/finetune.h"
#include "puelab/lab.h"
#include "puelab/metrics.h"
#include "puelab/model.h"
#include "puelab/tokens.h"

namespace py = pybind11;

namespace puelab {
namespace {

py::dict span_dict(const AnnotatedDocument& doc, const SensitiveSpan& s) {
  py::dict d;
  d["start"] = s.start;
  d["end"] = s.end;
  d["kind"] = std::string(to_string(s.kind));
  d["value"] = std::string(doc.span_text(s));
  return d;
}

py::dict doc_dict(const AnnotatedDocument& doc) {
  py::dict d;
  d["doc_id"] = doc.doc_id;
  d["text"] = doc.text;
  d["dataset"] = std::string(to_string(doc.dataset_tag));
  py::list spans;
  for (const auto& s : doc.spans) spans.append(span_dict(doc, s));
  d["spans"] = spans;
  return d;
}

py::list corpus_list(const Corpus& corpus) {
  py::list out;
  for (const auto& doc : corpus) out.append(doc_dict(doc));
  return out;
}

py::object optional_value(const std::optional<double>& v) {
  return v ? py::object(py::float_(*v)) : py::object(py::none());
}

py::dict report_dict(const EpochReport& r) {
  py::dict d;
  d["epoch"] = r.epoch;
  d["method"] = r.method;
  d["sigma"] = optional_value(r.sigma);
  d["rank"] = r.rank ? py::object(py::int_(*r.rank)) : py::object(py::none());
  d["alpha"] = optional_value(r.alpha);
  d["lr"] = r.lr;
  d["loss_train_sensitive"] = optional_value(r.loss_train_sensitive);
  d["loss_train_nonsensitive"] = optional_value(r.loss_train_nonsensitive);
  d["loss_train_all"] = optional_value(r.loss_train_all);
  d["loss_test_sensitive"] = optional_value(r.loss_test_sensitive);
  d["loss_test_nonsensitive"] = optional_value(r.loss_test_nonsensitive);
  d["loss_test_all"] = optional_value(r.loss_test_all);
  d["n_train_sensitive"] = r.n_train_sensitive;
  d["n_train_nonsensitive"] = r.n_train_nonsensitive;
  d["n_test_sensitive"] = r.n_test_sensitive;
  d["n_test_nonsensitive"] = r.n_test_nonsensitive;
  d["flops_cumulative"] = r.flops_cumulative;
  d["steps_cumulative"] = r.steps_cumulative;
  return d;
}

TradeoffPoint point_from(const py::dict& d) {
  TradeoffPoint p;
  p.method = d["method"].cast<std::string>();
  p.tag = d.contains("tag") ? d["tag"].cast<std::string>() : p.method;
  p.epoch = d.contains("epoch") ? d["epoch"].cast<int>() : 0;
  p.privacy = d["privacy"].cast<double>();
  p.utility_loss = d["utility_loss"].cast<double>();
  p.flops_cumulative =
      d.contains("flops_cumulative") ? d["flops_cumulative"].cast<double>() : 0.0;
  return p;
}

py::dict point_dict(const TradeoffPoint& p) {
  py::dict d;
  d["method"] = p.method;
  d["tag"] = p.tag;
  d["epoch"] = p.epoch;
  d["privacy"] = p.privacy;
  d["utility_loss"] = p.utility_loss;
  d["flops_cumulative"] = p.flops_cumulative;
  return d;
}

std::vector<TradeoffPoint> points_from(const py::list& items) {
  std::vector<TradeoffPoint> out;
  for (const auto& item : items) out.push_back(point_from(item.cast<py::dict>()));
  return out;
}

}  // namespace
}  // namespace puelab

PYBIND11_MODULE(_puelab, m) {
  using namespace puelab;
  m.doc() = "Privacy, utility and efficiency lab for fine-tuning methods";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
  static py::exception<DecodeError> decode_error(m, "DecodeError", error.ptr());
  static py::exception<CheckpointError> checkpoint_error(m, "CheckpointError",
                                                         error.ptr());
  static py::exception<IoError> io_error(m, "IoError", error.ptr());
  static py::exception<ConsistencyError> consistency_error(
      m, "ConsistencyError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const DecodeError& e) {
      py::set_error(decode_error, e.what());
    } catch (const CheckpointError& e) {
      py::set_error(checkpoint_error, e.what());
    } catch (const IoError& e) {
      py::set_error(io_error, e.what());
    } catch (const ConsistencyError& e) {
      py::set_error(consistency_error, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.attr("VOCAB_SIZE") = kVocabSize;
  m.attr("BOS") = kBos;

  m.def("tokenize", [](const std::string& text) { return tokenize(text); });
  m.def("detokenize",
        [](const std::vector<TokenId>& ids) { return detokenize(ids); });

  m.def("generate_corpus",
        [](const std::string& dataset, std::uint64_t seed, std::size_t n_docs) {
          switch (dataset_tag_from_string(dataset)) {
            case DatasetTag::kDialog:
              return corpus_list(generate_dialog_corpus(seed, n_docs));
            case DatasetTag::kBio:
              return corpus_list(generate_bio_corpus(seed, n_docs));
            case DatasetTag::kPretrain:
              return corpus_list(generate_pretrain_corpus(seed, n_docs));
          }
          throw ConfigError("unknown dataset");
        },
        py::arg("dataset"), py::arg("seed"), py::arg("n_docs"));

  m.def("regex_annotate", [](const std::string& text) {
    AnnotatedDocument doc{"", text, regex_annotate(text, PatternSet::defaults()),
                          DatasetTag::kDialog};
    py::list out;
    for (const auto& s : doc.spans) out.append(span_dict(doc, s));
    return out;
  });

  m.def("sensitivity_mask", [](const std::string& text, const py::list& spans) {
    std::vector<SensitiveSpan> out;
    for (const auto& item : spans) {
      const auto d = item.cast<py::dict>();
      out.push_back({d["start"].cast<std::size_t>(), d["end"].cast<std::size_t>(),
                     entity_kind_from_string(d["kind"].cast<std::string>())});
    }
    return align_spans_to_mask(text, out);
  });

  m.def("masked_mean_loss",
        [](const std::vector<double>& losses, const std::vector<bool>& mask,
           bool sensitive) {
          const MaskedMean r = masked_mean_loss(
              losses, mask, sensitive ? Select::kSensitive : Select::kNonsensitive);
          return py::make_tuple(optional_value(r.mean), r.count);
        },
        py::arg("losses"), py::arg("mask"), py::arg("sensitive"));

  m.def("num_params", [](const std::string& model_json) {
    return model_layout(model_config_from_json(nlohmann::json::parse(model_json)))
        .total_size();
  });

  m.def("flops_fft", &flops_fft, py::arg("tokens"), py::arg("params"));
  m.def("flops_per_step",
        [](const std::string& method, double tokens, double params,
           double adapter_params, double batch) {
          return flops_per_method(method_from_string(method), tokens, params,
                                  adapter_params, batch)
              .flops_per_step;
        },
        py::arg("method"), py::arg("tokens"), py::arg("params"),
        py::arg("adapter_params"), py::arg("batch"));
  m.def("memory_estimate",
        [](const std::string& method, double params, double adapter_params,
           double batch) {
          return memory_estimate(method_from_string(method), params,
                                 adapter_params, batch);
        },
        py::arg("method"), py::arg("params"), py::arg("adapter_params"),
        py::arg("batch"));

  m.def("pareto_select",
        [](const py::list& points, double min_privacy) -> py::object {
          const auto pts = points_from(points);
          const auto best = pareto_select(pts, min_privacy);
          return best ? py::object(point_dict(*best)) : py::object(py::none());
        },
        py::arg("points"), py::arg("min_privacy"));

  m.def("emit_tradeoff_plot",
        [](const py::list& points, const std::string& svg, const std::string& csv) {
          emit_tradeoff_plot(points_from(points), svg, csv);
        },
        py::arg("points"), py::arg("svg_path"), py::arg("csv_path"));

  m.def("default_plan_json", [](const std::string& output_dir, std::uint64_t seed) {
    return plan_to_json(ExperimentPlan::defaults(output_dir, seed)).dump();
  });

  m.def("run_experiment", [](const std::string& plan_json,
                             const std::string& output_dir, bool verbose) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(plan_json);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad plan: ") + e.what());
    }
    // Defaults take the plan's seed so pretraining follows it too.
    const std::uint64_t seed =
        j.is_object() && j.contains("seed") && j["seed"].is_number_unsigned()
            ? j["seed"].get<std::uint64_t>()
            : 0;
    ExperimentPlan plan =
        plan_from_json(j, ExperimentPlan::defaults(output_dir, seed));
    if (verbose) {
      plan.log = [](const std::string& line) {
        py::gil_scoped_acquire gil;
        py::print(line);
      };
    }
    ExperimentResult result;
    {
      py::gil_scoped_release release;
      result = run_experiment(plan);
    }
    py::dict out;
    out["output_dir"] = result.output_dir;
    out["base_model_path"] = result.base_model_path;
    py::list runs;
    for (const auto& run : result.runs) {
      py::dict r;
      r["label"] = run.config.label();
      r["directory"] = run.directory;
      py::list reports;
      for (const auto& e : run.reports) reports.append(report_dict(e));
      r["reports"] = reports;
      runs.append(r);
    }
    out["runs"] = runs;
    return out;
  }, py::arg("plan_json"), py::arg("output_dir"), py::arg("verbose") = false);

  m.def("load_metrics_csv", [](const std::string& path) {
    py::list out;
    for (const auto& e : load_metrics_csv(path)) out.append(report_dict(e));
    return out;
  });

  m.def("read_tradeoff_csv", [](const std::string& path) {
    py::list out;
    for (const auto& p : read_tradeoff_csv(path)) out.append(point_dict(p));
    return out;
  });
}
