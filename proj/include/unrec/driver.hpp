#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "unrec/config.hpp"
#include "unrec/metrics.hpp"
#include "unrec/retain.hpp"

namespace unrec {

using AnyModel = std::variant<MfModel, TifuModel, ItemKnnModel>;

const Recommender& as_recommender(const AnyModel& model);

// Trains the configured model type from scratch; also the retrain oracle.
AnyModel train_base_model(const SplitDataset& split, const RunConfig& cfg, std::uint64_t seed);

void save_model_checkpoint(const std::string& path, const AnyModel& model,
                           std::uint64_t vocab_hash_value);
AnyModel load_model_checkpoint(const std::string& path, const std::string& model_type,
                               std::uint64_t vocab_hash_value);

struct RequestRecord {
    int index = 0;
    std::int32_t user = -1;
    std::size_t n_forget = 0;
    double wall_time_s = 0.0;
    double update_norm = 0.0;
    bool failed = false;
    std::string failure_reason;
    std::map<std::string, double> diagnostics;
    std::uint64_t retain_hash = 0;  // 0 when protocol checks are off
};

struct RunState {
    int processed = 0;
    std::vector<RequestRecord> records;
    std::vector<int> checkpoints_written;
};

// Sequential protocol: consume the stream strictly in order, starting each
// request from the previous model state; checkpoints are serialized at the
// stream's quarter marks. A failing unlearner leaves the model unchanged and
// the run continues. With `resume`, picks up after the newest checkpoint
// already present in run_dir.
RunState run_sequential(const SplitDataset& split, const ForgetStream& stream,
                        const std::string& algorithm, const RunConfig& cfg, AnyModel base_model,
                        const std::string& run_dir, bool resume = false);

// Retrains from scratch on D_r^i for every checkpoint i; records wall times.
std::map<int, double> run_retrain_checkpoints(const SplitDataset& split,
                                              const ForgetStream& stream, const RunConfig& cfg,
                                              std::uint64_t seed, const std::string& retrain_dir);

// Compares unlearned checkpoints against the retrain oracle; one row per
// (checkpoint, algorithm) plus the retrain reference rows.
std::vector<MetricRow> evaluate_run(const SplitDataset& split, const ForgetStream& stream,
                                    const RunConfig& cfg, std::uint64_t seed,
                                    const std::vector<std::string>& algorithms,
                                    const std::string& seed_dir);

std::vector<RequestRecord> read_diagnostics(const std::string& path);
void write_diagnostics(const std::string& path, const std::vector<RequestRecord>& records);

// "25%".."100%" labels for the checkpoint set of a stream of length L.
std::vector<std::pair<int, std::string>> checkpoint_labels(int length);

ScifConfig scif_config_for_tag(const RunConfig& cfg, const std::string& algorithm);

}  // namespace unrec
