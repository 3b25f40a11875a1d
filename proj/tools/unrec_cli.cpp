// Command-line driver for the sequential unlearning benchmark.
//
// Pipeline: ingest -> scenario -> train -> unlearn -> retrain -> evaluate ->
// report. Every subcommand reads the same JSON run config and works inside
// the configured output directory (overridable via UNREC_OUTPUT_ROOT).

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "unrec/config.hpp"
#include "unrec/driver.hpp"
#include "unrec/errors.hpp"
#include "unrec/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace unrec;

namespace {

struct ScenarioData {
    SplitDataset split;
    ForgetStream stream;
};

std::string out_dir(const RunConfig& cfg) {
    const std::string dir = resolve_output_dir(cfg);
    fs::create_directories(dir);
    return dir;
}

std::string seed_dir(const std::string& out, std::uint64_t seed) {
    return (fs::path(out) / ("seed_" + std::to_string(seed))).string();
}

InteractionLog load_corpus(const std::string& out) {
    const std::string path = (fs::path(out) / "corpus.json").string();
    if (!fs::exists(path)) throw SchemaError("missing corpus.json; run `ingest` first");
    return log_from_json(json::parse(read_text_file(path)));
}

// The scenario split and stream for one seed. Spam scenarios swap in the
// poisoned train log written by the `scenario` subcommand.
ScenarioData load_scenario(const RunConfig& cfg, const std::string& out, std::uint64_t seed) {
    const InteractionLog corpus = load_corpus(out);
    SplitDataset split = temporal_leave_one_out(corpus, cfg.min_activity);
    if (cfg.scenario.kind == "spam") {
        const std::string train_path =
            (fs::path(out) / ("poisoned_train_" + std::to_string(seed) + ".json")).string();
        if (!fs::exists(train_path))
            throw SchemaError("missing poisoned train log; run `scenario` first");
        InteractionLog poisoned = log_from_json(json::parse(read_text_file(train_path)));
        split.train = poisoned;
        split.validation.vocab = split.test.vocab = poisoned.vocab;
    }
    const std::string stream_path =
        (fs::path(out) / ("stream_" + std::to_string(seed) + ".json")).string();
    if (!fs::exists(stream_path)) throw SchemaError("missing forget stream; run `scenario` first");
    ForgetStream stream = stream_from_json(json::parse(read_text_file(stream_path)),
                                           vocab_hash(*split.train.vocab));
    return {std::move(split), std::move(stream)};
}

std::vector<std::uint64_t> pick_seeds(const RunConfig& cfg, std::int64_t seed_flag) {
    if (seed_flag < 0) return cfg.scenario.seeds;
    return {static_cast<std::uint64_t>(seed_flag)};
}

int cmd_ingest(const RunConfig& cfg) {
    const std::string out = out_dir(cfg);
    const InteractionLog log = load_interactions(cfg.dataset.path, cfg.dataset.schema);
    write_text_file((fs::path(out) / "corpus.json").string(), log_to_json(log).dump() + "\n");
    std::cout << "ingested " << log.interactions.size() << " interactions, " << log.n_users()
              << " users, " << log.n_items() << " items\n";
    return 0;
}

int cmd_scenario(const RunConfig& cfg) {
    const std::string out = out_dir(cfg);
    const InteractionLog corpus = load_corpus(out);
    SplitDataset split = temporal_leave_one_out(corpus, cfg.min_activity);

    for (std::uint64_t seed : cfg.scenario.seeds) {
        ForgetStream stream;
        std::uint64_t vhash = 0;
        if (cfg.scenario.kind == "sensitive") {
            const auto category = corpus.vocab->categories.lookup(cfg.scenario.category);
            if (!category)
                throw SchemaError("unknown sensitive category: " + cfg.scenario.category);
            stream = sample_sensitive_stream(split, *category, cfg.scenario.fraction, seed);
            vhash = vocab_hash(*split.train.vocab);
        } else if (cfg.scenario.kind == "spam") {
            auto [poisoned, scenario] = inject_spam(split, cfg.scenario.spam, seed);
            stream = spam_stream_from(scenario);
            vhash = vocab_hash(*poisoned.train.vocab);
            write_text_file(
                (fs::path(out) / ("poisoned_train_" + std::to_string(seed) + ".json")).string(),
                log_to_json(poisoned.train).dump() + "\n");
            json scn;
            scn["version"] = 1;
            scn["seed"] = seed;
            scn["spammer_users"] = scenario.spammer_users;
            scn["promoted_items"] = scenario.promoted_items;
            write_text_file(
                (fs::path(out) / ("scenario_" + std::to_string(seed) + ".json")).string(),
                scn.dump(2) + "\n");
        } else {
            throw SchemaError("unknown scenario kind: " + cfg.scenario.kind);
        }
        write_text_file((fs::path(out) / ("stream_" + std::to_string(seed) + ".json")).string(),
                        stream_to_json(stream, vhash).dump() + "\n");
        std::cout << "seed " << seed << ": stream of " << stream.length() << " requests\n";
    }
    return 0;
}

int cmd_train(const RunConfig& cfg, std::int64_t seed_flag) {
    const std::string out = out_dir(cfg);
    for (std::uint64_t seed : pick_seeds(cfg, seed_flag)) {
        const ScenarioData data = load_scenario(cfg, out, seed);
        const std::string dir = seed_dir(out, seed);
        fs::create_directories(dir);
        const AnyModel model = train_base_model(data.split, cfg, seed);
        save_model_checkpoint((fs::path(dir) / "base.ck").string(), model,
                              vocab_hash(*data.split.train.vocab));
        std::cout << "seed " << seed << ": trained base model (" << cfg.model.type << ")\n";
    }
    return 0;
}

int cmd_unlearn(const RunConfig& cfg, const std::string& algorithm, std::int64_t seed_flag,
                bool fresh) {
    const std::string out = out_dir(cfg);
    for (std::uint64_t seed : pick_seeds(cfg, seed_flag)) {
        const ScenarioData data = load_scenario(cfg, out, seed);
        const std::string base = (fs::path(seed_dir(out, seed)) / "base.ck").string();
        if (!fs::exists(base)) throw SchemaError("missing base model; run `train` first");
        AnyModel model =
            load_model_checkpoint(base, cfg.model.type, vocab_hash(*data.split.train.vocab));
        const std::string run_dir = (fs::path(seed_dir(out, seed)) / algorithm).string();
        const RunState state = run_sequential(data.split, data.stream, algorithm, cfg,
                                              std::move(model), run_dir, !fresh);
        int failures = 0;
        for (const auto& r : state.records) failures += r.failed ? 1 : 0;
        std::cout << "seed " << seed << ": " << algorithm << " processed " << state.processed
                  << " requests (" << failures << " failed)\n";
    }
    return 0;
}

int cmd_retrain(const RunConfig& cfg, std::int64_t seed_flag) {
    const std::string out = out_dir(cfg);
    for (std::uint64_t seed : pick_seeds(cfg, seed_flag)) {
        const ScenarioData data = load_scenario(cfg, out, seed);
        const std::string dir = (fs::path(seed_dir(out, seed)) / "retrain").string();
        const auto times = run_retrain_checkpoints(data.split, data.stream, cfg, seed, dir);
        std::cout << "seed " << seed << ": retrained " << times.size() << " checkpoints\n";
    }
    return 0;
}

json rows_to_json(const std::vector<MetricRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows) {
        json j;
        j["category"] = r.category;
        j["requests"] = r.requests_label;
        j["checkpoint"] = r.checkpoint;
        j["algorithm"] = r.algorithm;
        j["seed"] = r.seed;
        j["recall@10"] = r.recall10;
        j["recall@20"] = r.recall20;
        j["ndcg@10"] = r.ndcg10;
        j["ndcg@20"] = r.ndcg20;
        j["phr@10"] = r.phr10;
        j["phr@20"] = r.phr20;
        j["time_per_request_s"] = r.time_per_request_s;
        j["leakage@10"] = r.leakage10;
        j["leakage@20"] = r.leakage20;
        j["kl_r_u"] = r.kl_r_u;
        j["retrain_time_s"] = r.retrain_time_s;
        j["skipped_users"] = r.skipped_users;
        arr.push_back(std::move(j));
    }
    return arr;
}

int cmd_evaluate(const RunConfig& cfg, std::int64_t seed_flag) {
    const std::string out = out_dir(cfg);
    for (std::uint64_t seed : pick_seeds(cfg, seed_flag)) {
        const ScenarioData data = load_scenario(cfg, out, seed);
        const std::string dir = seed_dir(out, seed);
        const auto rows =
            evaluate_run(data.split, data.stream, cfg, seed, cfg.algorithms, dir);
        write_text_file((fs::path(dir) / "metrics.csv").string(), metric_rows_to_csv(rows));
        write_text_file((fs::path(dir) / "metrics.json").string(),
                        rows_to_json(rows).dump(2) + "\n");
        std::cout << "seed " << seed << ": " << rows.size() << " metric rows\n";
    }
    return 0;
}

int cmd_report(const RunConfig& cfg, bool aggregate) {
    const std::string out = out_dir(cfg);
    std::vector<MetricRow> all;
    for (std::uint64_t seed : cfg.scenario.seeds) {
        const std::string path = (fs::path(seed_dir(out, seed)) / "metrics.json").string();
        if (!fs::exists(path))
            throw SchemaError("missing metrics for seed " + std::to_string(seed) +
                              "; run `evaluate` first");
        for (const auto& j : json::parse(read_text_file(path))) {
            MetricRow r;
            r.category = j.at("category").get<std::string>();
            r.requests_label = j.at("requests").get<std::string>();
            r.checkpoint = j.at("checkpoint").get<int>();
            r.algorithm = j.at("algorithm").get<std::string>();
            r.seed = j.at("seed").get<std::uint64_t>();
            r.recall10 = j.at("recall@10").get<double>();
            r.recall20 = j.at("recall@20").get<double>();
            r.ndcg10 = j.at("ndcg@10").get<double>();
            r.ndcg20 = j.at("ndcg@20").get<double>();
            r.phr10 = j.at("phr@10").get<double>();
            r.phr20 = j.at("phr@20").get<double>();
            r.time_per_request_s = j.at("time_per_request_s").get<double>();
            r.leakage10 = j.at("leakage@10").get<double>();
            r.leakage20 = j.at("leakage@20").get<double>();
            r.kl_r_u = j.at("kl_r_u").get<double>();
            r.retrain_time_s = j.at("retrain_time_s").get<double>();
            r.skipped_users = j.at("skipped_users").get<int>();
            all.push_back(std::move(r));
        }
    }
    write_text_file((fs::path(out) / "metrics.csv").string(), metric_rows_to_csv(all));
    write_text_file((fs::path(out) / "metrics.json").string(), rows_to_json(all).dump(2) + "\n");

    if (aggregate) {
        // Mean over seeds per (checkpoint, algorithm); the seed column holds
        // the number of aggregated seeds.
        std::map<std::pair<int, std::string>, std::vector<MetricRow>> groups;
        for (const auto& r : all) groups[{r.checkpoint, r.algorithm}].push_back(r);
        std::vector<MetricRow> agg;
        for (const auto& [key, rows] : groups) {
            MetricRow m = rows.front();
            m.seed = rows.size();
            m.recall10 = m.recall20 = m.ndcg10 = m.ndcg20 = m.phr10 = m.phr20 = 0.0;
            m.time_per_request_s = m.leakage10 = m.leakage20 = m.kl_r_u = m.retrain_time_s = 0.0;
            m.skipped_users = 0;
            for (const auto& r : rows) {
                m.recall10 += r.recall10;
                m.recall20 += r.recall20;
                m.ndcg10 += r.ndcg10;
                m.ndcg20 += r.ndcg20;
                m.phr10 += r.phr10;
                m.phr20 += r.phr20;
                m.time_per_request_s += r.time_per_request_s;
                m.leakage10 += r.leakage10;
                m.leakage20 += r.leakage20;
                m.kl_r_u += r.kl_r_u;
                m.retrain_time_s += r.retrain_time_s;
                m.skipped_users += r.skipped_users;
            }
            const double n = static_cast<double>(rows.size());
            m.recall10 /= n;
            m.recall20 /= n;
            m.ndcg10 /= n;
            m.ndcg20 /= n;
            m.phr10 /= n;
            m.phr20 /= n;
            m.time_per_request_s /= n;
            m.leakage10 /= n;
            m.leakage20 /= n;
            m.kl_r_u /= n;
            m.retrain_time_s /= n;
            agg.push_back(std::move(m));
        }
        std::sort(agg.begin(), agg.end(), [](const MetricRow& a, const MetricRow& b) {
            if (a.checkpoint != b.checkpoint) return a.checkpoint < b.checkpoint;
            return a.algorithm < b.algorithm;
        });
        write_text_file((fs::path(out) / "metrics_aggregate.csv").string(),
                        metric_rows_to_csv(agg));
        std::cout << "wrote metrics_aggregate.csv (" << agg.size() << " rows)\n";
    }
    std::cout << "wrote metrics.csv with " << all.size() << " rows\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential unlearning benchmark for recommendation models"};
    app.require_subcommand(1);

    std::string config_path;
    std::string algorithm;
    std::int64_t seed_flag = -1;
    bool aggregate = false;
    bool fresh = false;

    auto add_config = [&config_path](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Run config JSON")->required();
    };

    CLI::App* ingest = app.add_subcommand("ingest", "Load the CSV corpus into canonical form");
    add_config(ingest);
    CLI::App* scenario = app.add_subcommand("scenario", "Build forget streams (and spam data)");
    add_config(scenario);
    CLI::App* train = app.add_subcommand("train", "Train the base model per seed");
    add_config(train);
    train->add_option("--seed", seed_flag, "Restrict to one seed");
    CLI::App* unlearn = app.add_subcommand("unlearn", "Run the sequential unlearning protocol");
    add_config(unlearn);
    unlearn->add_option("--algorithm", algorithm, "Algorithm tag")->required();
    unlearn->add_option("--seed", seed_flag, "Restrict to one seed");
    unlearn->add_flag("--fresh", fresh, "Ignore existing checkpoints instead of resuming");
    CLI::App* retrain = app.add_subcommand("retrain", "Retrain oracle models at checkpoints");
    add_config(retrain);
    retrain->add_option("--seed", seed_flag, "Restrict to one seed");
    CLI::App* evaluate = app.add_subcommand("evaluate", "Compare unlearned vs retrained models");
    add_config(evaluate);
    evaluate->add_option("--seed", seed_flag, "Restrict to one seed");
    CLI::App* report = app.add_subcommand("report", "Merge per-seed metrics");
    add_config(report);
    report->add_flag("--aggregate", aggregate, "Average metrics over seeds");

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig cfg = load_run_config(config_path);
        if (ingest->parsed()) return cmd_ingest(cfg);
        if (scenario->parsed()) return cmd_scenario(cfg);
        if (train->parsed()) return cmd_train(cfg, seed_flag);
        if (unlearn->parsed()) return cmd_unlearn(cfg, algorithm, seed_flag, fresh);
        if (retrain->parsed()) return cmd_retrain(cfg, seed_flag);
        if (evaluate->parsed()) return cmd_evaluate(cfg, seed_flag);
        if (report->parsed()) return cmd_report(cfg, aggregate);
    } catch (const std::exception& e) {
        const char* kind = "error";
        if (dynamic_cast<const SchemaError*>(&e)) kind = "schema-error";
        else if (dynamic_cast<const RowError*>(&e)) kind = "row-error";
        else if (dynamic_cast<const EmptyInputError*>(&e)) kind = "empty-input";
        else if (dynamic_cast<const VocabMismatchError*>(&e)) kind = "vocab-mismatch";
        else if (dynamic_cast<const ConsistencyError*>(&e)) kind = "consistency-error";
        else if (dynamic_cast<const NumericalError*>(&e)) kind = "numerical-failure";
        json err;
        err["error"] = kind;
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
