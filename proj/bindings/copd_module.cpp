// Python bindings for the core operations: policies, domains, single GRPO
// and mixed distillation steps, behavioral distance metrics, checkpoints,
// and full schedule runs driven by a config dict.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "copd/checkpoint.hpp"
#include "copd/config.hpp"
#include "copd/domains.hpp"
#include "copd/grpo.hpp"
#include "copd/metrics.hpp"
#include "copd/metrics_log.hpp"
#include "copd/opd.hpp"
#include "copd/orchestrator.hpp"
#include "copd/policy.hpp"
#include "copd/rollout.hpp"

namespace py = pybind11;
using namespace copd;

namespace {

RunConfig config_from_dict(const py::dict& d) {
  const nlohmann::json j = nlohmann::json::parse(
      py::cast<std::string>(py::module_::import("json").attr("dumps")(d)));
  RunConfig cfg = parse_run_config(j);
  validate(cfg);
  return cfg;
}

py::dict train_py(const py::dict& config, int workers) {
  const RunConfig cfg = config_from_dict(config);
  MetricsWriter writer(std::filesystem::path(cfg.out_dir) / "metrics.jsonl",
                       {{"run", std::filesystem::path(cfg.out_dir).filename().string() +
                                    "-s" + std::to_string(cfg.seed)},
                        {"mode", to_string(cfg.schedule.mode)},
                        {"seed", cfg.seed},
                        {"window", cfg.window}});
  const TrainResult result = run_training(cfg, writer, workers);
  py::dict out;
  out["total_updates"] = result.total_updates;
  out["metrics_path"] = writer.path().string();
  py::list evals;
  for (const EvalRow& row : result.final_evals) {
    py::dict r;
    r["model"] = row.model;
    r["domain"] = row.domain;
    r["accuracy"] = row.accuracy;
    evals.append(r);
  }
  out["final_evals"] = evals;
  out["merged_ckpt"] = (std::filesystem::path(cfg.out_dir) / "merged.ckpt").string();
  return out;
}

}  // namespace

PYBIND11_MODULE(_copd, m) {
  m.doc() = "co-evolving policy distillation core";

  py::class_<Vocab>(m, "Vocab")
      .def_readonly("size", &Vocab::size)
      .def_readonly("bos", &Vocab::bos)
      .def_readonly("eos", &Vocab::eos);
  m.def("task_vocab", &task_vocab);

  py::class_<Policy>(m, "Policy")
      .def_static("zeros", &Policy::zeros, py::arg("vocab"), py::arg("window"))
      .def_readonly("window", &Policy::window)
      .def_readonly("vocab", &Policy::vocab)
      .def_property_readonly("params", [](const Policy& p) { return p.params; })
      .def("with_params",
           [](const Policy& p, const std::vector<double>& params) {
             if (params.size() != p.params.size())
               throw ConfigError("parameter count mismatch");
             Policy q = p;
             q.params = params;
             return q;
           })
      .def("logits",
           [](const Policy& p, const std::vector<int>& context) {
             return logits(p, ContextWindow::trailing(p.vocab, context, p.window));
           })
      .def("next_token_distribution",
           [](const Policy& p, const std::vector<int>& context, double temperature) {
             return next_token_distribution(
                 p, ContextWindow::trailing(p.vocab, context, p.window), temperature);
           },
           py::arg("context"), py::arg("temperature") = 1.0);

  py::class_<PromptCase>(m, "PromptCase")
      .def_readonly("prompt", &PromptCase::prompt)
      .def_readonly("target", &PromptCase::target);

  py::class_<Domain>(m, "Domain")
      .def(py::init([](const std::string& id) { return make_domain(id); }))
      .def_property_readonly("id", &Domain::id)
      .def("generate", &Domain::generate)
      .def("verify",
           [](const Domain& d, const std::vector<int>& prompt,
              const std::vector<int>& completion) { return d.verify(prompt, completion); })
      .def("train_size", [](const Domain& d) { return d.train_set().size(); })
      .def("eval_size", [](const Domain& d) { return d.eval_set().size(); })
      .def("max_completion_len", &Domain::max_completion_len);
  m.def("domain_ids", &domain_ids);

  py::class_<Rollout>(m, "Rollout")
      .def_readonly("prompt", &Rollout::prompt)
      .def_readonly("completion", &Rollout::completion)
      .def_readonly("behavior_logprobs", &Rollout::behavior_logprobs);
  m.def("sample_rollout",
        [](const Policy& p, const std::vector<int>& prompt, int max_len, double temperature,
           std::uint64_t seed) { return sample_rollout(p, prompt, max_len, temperature, seed); },
        py::arg("policy"), py::arg("prompt"), py::arg("max_len"), py::arg("temperature"),
        py::arg("seed"));
  m.def("greedy_completion",
        [](const Policy& p, const std::vector<int>& prompt, int max_len) {
          return greedy_completion(p, prompt, max_len);
        },
        py::arg("policy"), py::arg("prompt"), py::arg("max_len"));
  m.def("eval_accuracy", &eval_accuracy, py::arg("policy"), py::arg("domain"),
        py::arg("n_prompts"), py::arg("seed"), py::arg("max_len"));

  m.def("group_advantages", [](const std::vector<double>& rewards) {
    const GroupAdvantages g = group_advantages(rewards);
    return py::make_tuple(g.values, g.degenerate);
  });

  m.def("save_checkpoint", &save_checkpoint, py::arg("policy"), py::arg("path"));
  m.def("load_checkpoint",
        [](const std::string& path) { return load_checkpoint(path, task_vocab()); },
        py::arg("path"));
  m.def("merge", [](const std::vector<Policy>& policies, const std::vector<double>& weights) {
    return merge(policies, MergeSpec{weights});
  });

  m.def("top_k_overlap",
        [](const Policy& a, const Policy& b, const std::vector<std::vector<int>>& prompts,
           int rollouts_per_prompt, std::uint64_t seed, int max_len, int k) {
          const ProbeSet probes =
              collect_probe_states(a, prompts, rollouts_per_prompt, seed, max_len);
          const OverlapReport rep = top_k_overlap(a, b, probes, k);
          py::dict out;
          out["k"] = rep.k;
          out["mean_overlap"] = rep.mean_overlap;
          out["sym_kl_mean"] = rep.sym_kl_mean;
          return out;
        },
        py::arg("a"), py::arg("b"), py::arg("prompts"), py::arg("rollouts_per_prompt"),
        py::arg("seed"), py::arg("max_len"), py::arg("k"));

  m.def("train", &train_py, py::arg("config"), py::arg("workers") = 1);
}
