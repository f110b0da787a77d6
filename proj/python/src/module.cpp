#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "finsage/commands.hpp"
#include "finsage/eval.hpp"
#include "finsage/metrics.hpp"
#include "finsage/rerank.hpp"

namespace py = pybind11;
using namespace finsage;

namespace {

// Engine plus the store it reads, built from the same layered config as the CLI.
class PyEngine {
 public:
  PyEngine(const std::optional<std::string>& config_path, const std::vector<std::string>& overrides) {
    std::optional<std::filesystem::path> file;
    if (config_path) file = *config_path;
    auto config = load_config(file, process_env(), overrides);
    engine_ = std::make_unique<Engine>(config, load_store(config), make_clients(config.clients));
  }

  std::string retrieve(const std::string& query, std::optional<std::size_t> k) const {
    py::gil_scoped_release release;
    return retrieve_response(*engine_, query, k.value_or(engine_->config().rerank.k)).dump();
  }

  std::string evaluate(const std::string& queries_path, const std::string& mode,
                       const std::vector<std::size_t>& k_list) const {
    std::ifstream in(queries_path);
    if (!in) throw Error(ErrorCode::kInput, "cannot read " + queries_path);
    const auto queries = read_eval_queries(in);
    py::gil_scoped_release release;
    if (mode == "rerank") {
      return rerank_report_to_json(
                 evaluate_rerank(queries, *engine_, k_list.empty() ? engine_->config().eval_k : k_list))
          .dump();
    }
    if (mode != "retrieval") throw Error(ErrorCode::kArgument, "mode must be retrieval or rerank");
    return eval_report_to_json(evaluate_retrieval(queries, *engine_)).dump();
  }

  std::size_t size() const { return engine_->store().size(); }
  std::string config() const { return config_to_json(engine_->config()).dump(); }

 private:
  std::unique_ptr<Engine> engine_;
};

}  // namespace

PYBIND11_MODULE(_finsage, m) {
  m.doc() = "Multi-path retrieval and re-ranking over financial filings";

  py::register_exception<Error>(m, "FinsageError", PyExc_RuntimeError);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one command; returns (exit_code, stdout, stderr).");

  m.def(
      "set_metrics",
      [](const IdSet& retrieved, const IdSet& relevant) {
        const auto s = set_metrics(retrieved, relevant);
        py::dict d;
        d["precision"] = s.precision;
        d["recall"] = s.recall;
        d["f1"] = s.f1;
        d["num_retrieved"] = s.num_retrieved;
        return d;
      },
      py::arg("retrieved"), py::arg("relevant"));
  m.def("normalized_recall", &normalized_recall, py::arg("ranked"), py::arg("relevant"), py::arg("k"));
  m.def("mrr", &mrr, py::arg("ranked"), py::arg("relevant"));
  m.def("binary_ndcg", &binary_ndcg, py::arg("ranked"), py::arg("relevant"));
  m.def("dpo_term", &dpo_term, py::arg("k_pos"), py::arg("k_neg"));
  m.def("sigmoid", &sigmoid, py::arg("x"));
  m.def(
      "time_bonus",
      [](const std::optional<std::string>& publication_date, const std::string& query_time) {
        auto now = Date::parse(query_time);
        if (!now) throw Error(ErrorCode::kArgument, "not an ISO-8601 date: " + query_time);
        std::optional<Date> pub;
        if (publication_date) {
          pub = Date::parse(*publication_date);
          if (!pub) throw Error(ErrorCode::kArgument, "not an ISO-8601 date: " + *publication_date);
        }
        return time_bonus(pub, *now);
      },
      py::arg("publication_date"), py::arg("query_time"));
  m.def(
      "resolved_config",
      [](const std::optional<std::string>& path, const std::vector<std::string>& overrides) {
        std::optional<std::filesystem::path> file;
        if (path) file = *path;
        return config_to_json(load_config(file, process_env(), overrides)).dump();
      },
      py::arg("path") = py::none(), py::arg("overrides") = std::vector<std::string>{});

  py::class_<PyEngine>(m, "Engine")
      .def(py::init<const std::optional<std::string>&, const std::vector<std::string>&>(),
           py::arg("config_path") = py::none(), py::arg("overrides") = std::vector<std::string>{})
      .def("retrieve_json", &PyEngine::retrieve, py::arg("query"), py::arg("k") = py::none())
      .def("evaluate_json", &PyEngine::evaluate, py::arg("queries_path"), py::arg("mode") = "retrieval",
           py::arg("k_list") = std::vector<std::size_t>{})
      .def("config_json", &PyEngine::config)
      .def_property_readonly("size", &PyEngine::size);
}
