#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "unrec/corpus.hpp"
#include "unrec/mf.hpp"
#include "unrec/tifu.hpp"
#include "unrec/unlearn.hpp"

namespace unrec {

struct DatasetConfig {
    std::string path;
    CsvSchema schema;
};

struct ModelConfig {
    std::string type = "mf-bpr";  // "mf-bpr" | "tifu" | "item-knn"
    MfHyper mf;
    TifuHyper tifu;
    int item_knn_k = 50;
};

struct ScenarioConfig {
    std::string kind = "sensitive";  // "sensitive" | "spam"
    std::string category;            // external category id (sensitive kind)
    double fraction = 0.001;
    SpamParams spam;
    std::vector<std::uint64_t> seeds = {1};
};

struct EvalConfig {
    int k_primary = 10;
    int k_secondary = 20;
    bool kl_full_catalog = true;
    int kl_sample_size = 0;
};

struct RunConfig {
    int version = 1;
    DatasetConfig dataset;
    ModelConfig model;
    ScenarioConfig scenario;
    // Algorithm sections, keyed by tag ("scif-clip", "scif", "kookmin",
    // "fanchuan", "exact-knn"). Only listed algorithms run.
    std::vector<std::string> algorithms = {"scif-clip"};
    ScifConfig scif;          // shared by "scif-clip" (clip kept) and "scif" (clip dropped)
    KookminConfig kookmin;
    FanchuanConfig fanchuan;
    EvalConfig eval;
    int min_activity = 3;
    bool protocol_checks = true;
    std::string output_dir = "out";
};

nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& cfg);

// Output root override through the environment.
std::string resolve_output_dir(const RunConfig& cfg);

}  // namespace unrec
