// Python bindings for the core operations: corpus handling, models,
// unlearning algorithms, metrics and the sequential driver.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "unrec/config.hpp"
#include "unrec/driver.hpp"
#include "unrec/errors.hpp"
#include "unrec/metrics.hpp"
#include "unrec/serialize.hpp"
#include "unrec/synthetic.hpp"
#include "unrec/unlearn.hpp"

namespace py = pybind11;
using namespace unrec;

namespace {

py::dict outcome_to_dict(const UnlearnOutcome& out) {
    py::dict d;
    d["wall_time_s"] = out.wall_time_s;
    d["update_norm"] = out.update_norm;
    d["failed"] = out.failed;
    d["failure_reason"] = out.failure_reason;
    d["diagnostics"] = out.diagnostics;
    return d;
}

py::dict row_to_dict(const MetricRow& r) {
    py::dict d;
    d["category"] = r.category;
    d["requests"] = r.requests_label;
    d["checkpoint"] = r.checkpoint;
    d["algorithm"] = r.algorithm;
    d["seed"] = r.seed;
    d["recall@10"] = r.recall10;
    d["recall@20"] = r.recall20;
    d["ndcg@10"] = r.ndcg10;
    d["ndcg@20"] = r.ndcg20;
    d["phr@10"] = r.phr10;
    d["phr@20"] = r.phr20;
    d["time_per_request_s"] = r.time_per_request_s;
    d["leakage@10"] = r.leakage10;
    d["leakage@20"] = r.leakage20;
    d["kl_r_u"] = r.kl_r_u;
    d["retrain_time_s"] = r.retrain_time_s;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Sequential unlearning benchmark for recommendation models";

    py::register_exception<SchemaError>(m, "SchemaError");
    py::register_exception<EmptyInputError>(m, "EmptyInputError");
    py::register_exception<ConsistencyError>(m, "ConsistencyError");
    py::register_exception<VocabMismatchError>(m, "VocabMismatchError");

    py::class_<Interaction>(m, "Interaction")
        .def(py::init<>())
        .def_readwrite("user", &Interaction::user)
        .def_readwrite("item", &Interaction::item)
        .def_readwrite("timestamp", &Interaction::timestamp)
        .def_readwrite("basket", &Interaction::basket)
        .def_readwrite("category", &Interaction::category)
        .def("__repr__", [](const Interaction& it) {
            return "Interaction(user=" + std::to_string(it.user) +
                   ", item=" + std::to_string(it.item) +
                   ", t=" + std::to_string(it.timestamp) + ")";
        });

    py::class_<InteractionLog>(m, "InteractionLog")
        .def_property_readonly("n_users", &InteractionLog::n_users)
        .def_property_readonly("n_items", &InteractionLog::n_items)
        .def_readonly("interactions", &InteractionLog::interactions)
        .def("category_index", [](const InteractionLog& log, const std::string& name) {
            const auto idx = log.vocab->categories.lookup(name);
            if (!idx) throw py::key_error("unknown category: " + name);
            return *idx;
        })
        .def("__len__", [](const InteractionLog& log) { return log.interactions.size(); });

    py::class_<SplitDataset>(m, "SplitDataset")
        .def_readonly("train", &SplitDataset::train)
        .def_readonly("validation", &SplitDataset::validation)
        .def_readonly("test", &SplitDataset::test)
        .def_readonly("dropped_users", &SplitDataset::dropped_users);

    py::class_<ForgetRequest>(m, "ForgetRequest")
        .def_readonly("index", &ForgetRequest::index)
        .def_readonly("user", &ForgetRequest::user)
        .def_readonly("interactions", &ForgetRequest::interactions);

    py::class_<ForgetStream>(m, "ForgetStream")
        .def_readonly("requests", &ForgetStream::requests)
        .def_readonly("checkpoints", &ForgetStream::checkpoints)
        .def_readonly("seed", &ForgetStream::seed)
        .def("__len__", &ForgetStream::length);

    py::class_<SyntheticCfParams>(m, "SyntheticCfParams")
        .def(py::init<>())
        .def_readwrite("n_users", &SyntheticCfParams::n_users)
        .def_readwrite("n_items", &SyntheticCfParams::n_items)
        .def_readwrite("n_clusters", &SyntheticCfParams::n_clusters)
        .def_readwrite("sensitive_fraction", &SyntheticCfParams::sensitive_fraction)
        .def_readwrite("sensitive_user_fraction", &SyntheticCfParams::sensitive_user_fraction)
        .def_readwrite("main_interactions_min", &SyntheticCfParams::main_interactions_min)
        .def_readwrite("main_interactions_max", &SyntheticCfParams::main_interactions_max)
        .def_readwrite("sensitive_min", &SyntheticCfParams::sensitive_min)
        .def_readwrite("sensitive_max", &SyntheticCfParams::sensitive_max);

    py::class_<SyntheticNbrParams>(m, "SyntheticNbrParams")
        .def(py::init<>())
        .def_readwrite("n_users", &SyntheticNbrParams::n_users)
        .def_readwrite("n_items", &SyntheticNbrParams::n_items)
        .def_readwrite("n_clusters", &SyntheticNbrParams::n_clusters)
        .def_readwrite("baskets_per_user", &SyntheticNbrParams::baskets_per_user);

    m.def("make_synthetic_cf", &make_synthetic_cf, py::arg("params"), py::arg("seed"));
    m.def("make_synthetic_nbr", &make_synthetic_nbr, py::arg("params"), py::arg("seed"));
    m.def("load_interactions",
          [](const std::string& path, const std::string& user_col, const std::string& item_col,
             const std::string& time_col, const std::string& basket_col,
             const std::string& category_col) {
              CsvSchema schema{user_col, item_col, time_col, basket_col, category_col};
              return load_interactions(path, schema);
          },
          py::arg("path"), py::arg("user_col"), py::arg("item_col"), py::arg("time_col"),
          py::arg("basket_col") = "", py::arg("category_col") = "");
    m.def("temporal_leave_one_out", &temporal_leave_one_out, py::arg("log"),
          py::arg("min_activity") = 3);
    m.def("sample_sensitive_stream", &sample_sensitive_stream, py::arg("split"),
          py::arg("category"), py::arg("fraction"), py::arg("seed"));
    m.def("quarter_checkpoints", &quarter_checkpoints, py::arg("length"));

    py::class_<MfHyper>(m, "MfHyper")
        .def(py::init<>())
        .def_readwrite("d", &MfHyper::d)
        .def_readwrite("reg", &MfHyper::reg)
        .def_readwrite("lr", &MfHyper::lr)
        .def_readwrite("epochs", &MfHyper::epochs)
        .def_readwrite("negatives_per_positive", &MfHyper::negatives_per_positive);

    py::class_<MfModel>(m, "MfModel")
        .def_property_readonly("n_users", &MfModel::n_users)
        .def_property_readonly("n_items", &MfModel::n_items)
        .def("score", &MfModel::score, py::arg("user"), py::arg("item"))
        .def("recommend",
             [](const MfModel& model, std::int32_t user, int k,
                const std::vector<std::int32_t>& exclude) {
                 std::unordered_set<std::int32_t> ex(exclude.begin(), exclude.end());
                 return recommend_topk(model, user, k, ex).items;
             },
             py::arg("user"), py::arg("k"), py::arg("exclude") = std::vector<std::int32_t>{});

    m.def("train_mf_bpr",
          [](const SplitDataset& split, const MfHyper& hyper, std::uint64_t seed) {
              return train_mf_bpr(split, hyper, seed);
          },
          py::arg("split"), py::arg("hyper"), py::arg("seed"));

    py::class_<TifuHyper>(m, "TifuHyper")
        .def(py::init<>())
        .def_readwrite("k", &TifuHyper::k)
        .def_readwrite("alpha", &TifuHyper::alpha);

    py::class_<TifuModel>(m, "TifuModel")
        .def_property_readonly("n_users", &TifuModel::n_users)
        .def_property_readonly("n_items", &TifuModel::n_items)
        .def("score", &TifuModel::score, py::arg("user"), py::arg("item"))
        .def("recommend",
             [](const TifuModel& model, std::int32_t user, int k,
                const std::vector<std::int32_t>& exclude) {
                 std::unordered_set<std::int32_t> ex(exclude.begin(), exclude.end());
                 return recommend_topk(model, user, k, ex).items;
             },
             py::arg("user"), py::arg("k"), py::arg("exclude") = std::vector<std::int32_t>{});

    m.def("build_tifu", [](const SplitDataset& split, const TifuHyper& hyper) {
        return build_tifu(split, hyper);
    });

    py::class_<RetainView>(m, "RetainView")
        .def(py::init<const InteractionLog&>())
        .def("remove", &RetainView::remove)
        .def("__len__", &RetainView::size)
        .def("content_hash", &RetainView::content_hash);

    py::class_<ScifConfig>(m, "ScifConfig")
        .def(py::init<>())
        .def_readwrite("bs", &ScifConfig::bs)
        .def_readwrite("damping", &ScifConfig::damping)
        .def_property(
            "clip", [](const ScifConfig& c) { return c.clip; },
            [](ScifConfig& c, std::optional<double> v) { c.clip = v; })
        .def_readwrite("cg_max_iter", &ScifConfig::cg_max_iter)
        .def_readwrite("cg_tol", &ScifConfig::cg_tol);

    py::class_<KookminConfig>(m, "KookminConfig")
        .def(py::init<>())
        .def_readwrite("p", &KookminConfig::p)
        .def_readwrite("retain_rounds", &KookminConfig::retain_rounds)
        .def_readwrite("retain_multiplier", &KookminConfig::retain_multiplier)
        .def_readwrite("lr", &KookminConfig::lr);

    py::class_<FanchuanConfig>(m, "FanchuanConfig")
        .def(py::init<>())
        .def_readwrite("forget_epochs", &FanchuanConfig::forget_epochs)
        .def_readwrite("repair_epochs", &FanchuanConfig::repair_epochs)
        .def_readwrite("lr", &FanchuanConfig::lr);

    m.def("scif_unlearn",
          [](MfModel& model, const RetainView& view, const ForgetRequest& req,
             const ScifConfig& cfg, std::uint64_t seed) {
              return outcome_to_dict(scif_unlearn(model, view, req, cfg, RngStream(seed)));
          },
          py::arg("model"), py::arg("retain"), py::arg("forget"), py::arg("config"),
          py::arg("seed"));
    m.def("kookmin_unlearn",
          [](MfModel& model, const RetainView& view, const ForgetRequest& req,
             const KookminConfig& cfg, std::uint64_t seed) {
              return outcome_to_dict(kookmin_unlearn(model, view, req, cfg, RngStream(seed)));
          },
          py::arg("model"), py::arg("retain"), py::arg("forget"), py::arg("config"),
          py::arg("seed"));
    m.def("fanchuan_unlearn",
          [](MfModel& model, const RetainView& view, const ForgetRequest& req,
             const FanchuanConfig& cfg, std::uint64_t seed) {
              return outcome_to_dict(fanchuan_unlearn(model, view, req, cfg, RngStream(seed)));
          },
          py::arg("model"), py::arg("retain"), py::arg("forget"), py::arg("config"),
          py::arg("seed"));
    m.def("exact_knn_unlearn", [](TifuModel& model, const ForgetRequest& req) {
        return outcome_to_dict(exact_knn_unlearn(model, req));
    });

    m.def("recall_at_k",
          [](const std::vector<std::int32_t>& topk, const std::vector<std::int32_t>& truth,
             int k) {
              return recall_at_k(topk, {truth.begin(), truth.end()}, k);
          });
    m.def("ndcg_at_k",
          [](const std::vector<std::int32_t>& topk, const std::vector<std::int32_t>& truth,
             int k) {
              return ndcg_at_k(topk, {truth.begin(), truth.end()}, k);
          });
    m.def("softmax_kl", [](const std::vector<double>& p, const std::vector<double>& q) {
        return softmax_kl(p, q);
    });
    m.def("kl_completeness",
          [](const MfModel& retrained, const MfModel& unlearned,
             const std::vector<std::int32_t>& users) {
              return kl_completeness(retrained, unlearned, users);
          });
    m.def("sensitive_leakage",
          [](const MfModel& model, const std::vector<std::int32_t>& users,
             const std::vector<std::int32_t>& category_items, int k) {
              return sensitive_leakage(model, users,
                                       {category_items.begin(), category_items.end()}, k, {});
          });

    m.attr("__version__") = "0.1.0";
}
