#include "unrec/driver.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "unrec/errors.hpp"
#include "unrec/serialize.hpp"
#include "unrec/unlearn.hpp"

namespace unrec {

namespace fs = std::filesystem;
using nlohmann::json;

const Recommender& as_recommender(const AnyModel& model) {
    return *std::visit([](const auto& m) -> const Recommender* { return &m; }, model);
}

AnyModel train_base_model(const SplitDataset& split, const RunConfig& cfg, std::uint64_t seed) {
    if (cfg.model.type == "mf-bpr") return train_mf_bpr(split, cfg.model.mf, seed);
    if (cfg.model.type == "tifu") return build_tifu(split, cfg.model.tifu);
    if (cfg.model.type == "item-knn") return build_item_knn(split, cfg.model.item_knn_k);
    throw SchemaError("unknown model type: " + cfg.model.type);
}

void save_model_checkpoint(const std::string& path, const AnyModel& model,
                           std::uint64_t vocab_hash_value) {
    if (const auto* mf = std::get_if<MfModel>(&model)) {
        save_mf_checkpoint(path, *mf, vocab_hash_value);
    } else if (const auto* tifu = std::get_if<TifuModel>(&model)) {
        save_tifu_checkpoint(path, *tifu, vocab_hash_value);
    } else {
        save_item_knn_checkpoint(path, std::get<ItemKnnModel>(model), vocab_hash_value);
    }
}

AnyModel load_model_checkpoint(const std::string& path, const std::string& model_type,
                               std::uint64_t vocab_hash_value) {
    if (model_type == "mf-bpr") return load_mf_checkpoint(path, vocab_hash_value);
    if (model_type == "tifu") return load_tifu_checkpoint(path, vocab_hash_value);
    if (model_type == "item-knn") return load_item_knn_checkpoint(path, vocab_hash_value);
    throw SchemaError("unknown model type: " + model_type);
}

ScifConfig scif_config_for_tag(const RunConfig& cfg, const std::string& algorithm) {
    ScifConfig scif = cfg.scif;
    if (algorithm == "scif-clip") {
        if (!scif.clip) scif.clip = 1.0;
    } else if (algorithm == "scif" || algorithm == "scif-noclip") {
        scif.clip.reset();
    } else {
        throw SchemaError("not a scif algorithm tag: " + algorithm);
    }
    return scif;
}

namespace {

std::string checkpoint_path(const std::string& dir, int i) {
    return (fs::path(dir) / ("checkpoint_" + std::to_string(i) + ".ck")).string();
}

UnlearnOutcome dispatch_unlearn(AnyModel& model, const std::string& algorithm,
                                const RetainView& view, const ForgetRequest& req,
                                const RunConfig& cfg, RngStream rng) {
    if (algorithm == "exact-knn") {
        if (auto* tifu = std::get_if<TifuModel>(&model)) return exact_knn_unlearn(*tifu, req);
        if (auto* knn = std::get_if<ItemKnnModel>(&model)) return exact_knn_unlearn(*knn, req);
        throw SchemaError("exact-knn requires a neighborhood model");
    }
    auto* mf = std::get_if<MfModel>(&model);
    if (!mf) throw SchemaError("algorithm '" + algorithm + "' requires the mf-bpr model");
    if (algorithm == "scif" || algorithm == "scif-clip" || algorithm == "scif-noclip")
        return scif_unlearn(*mf, view, req, scif_config_for_tag(cfg, algorithm), rng);
    if (algorithm == "kookmin") return kookmin_unlearn(*mf, view, req, cfg.kookmin, rng);
    if (algorithm == "fanchuan") return fanchuan_unlearn(*mf, view, req, cfg.fanchuan, rng);
    throw SchemaError("unknown algorithm: " + algorithm);
}

json record_to_json(const RequestRecord& r) {
    json j;
    j["index"] = r.index;
    j["user"] = r.user;
    j["n_forget"] = r.n_forget;
    j["wall_time_s"] = r.wall_time_s;
    j["update_norm"] = r.update_norm;
    j["failed"] = r.failed;
    j["failure_reason"] = r.failure_reason;
    j["diagnostics"] = r.diagnostics;
    j["retain_hash"] = r.retain_hash;
    return j;
}

RequestRecord record_from_json(const json& j) {
    RequestRecord r;
    r.index = j.at("index").get<int>();
    r.user = j.at("user").get<std::int32_t>();
    r.n_forget = j.at("n_forget").get<std::size_t>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    r.update_norm = j.at("update_norm").get<double>();
    r.failed = j.at("failed").get<bool>();
    r.failure_reason = j.at("failure_reason").get<std::string>();
    r.diagnostics = j.at("diagnostics").get<std::map<std::string, double>>();
    r.retain_hash = j.at("retain_hash").get<std::uint64_t>();
    return r;
}

}  // namespace

std::vector<RequestRecord> read_diagnostics(const std::string& path) {
    std::vector<RequestRecord> records;
    std::ifstream in(path);
    if (!in) return records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_json(json::parse(line)));
    }
    return records;
}

void write_diagnostics(const std::string& path, const std::vector<RequestRecord>& records) {
    std::ostringstream os;
    for (const auto& r : records) os << record_to_json(r).dump() << '\n';
    write_text_file(path, os.str());
}

RunState run_sequential(const SplitDataset& split, const ForgetStream& stream,
                        const std::string& algorithm, const RunConfig& cfg, AnyModel base_model,
                        const std::string& run_dir, bool resume) {
    fs::create_directories(run_dir);
    const std::uint64_t vhash = vocab_hash(*split.train.vocab);
    const std::string diag_path = (fs::path(run_dir) / "diagnostics.jsonl").string();

    RunState state;
    AnyModel model = std::move(base_model);
    RetainView view(split.train);

    if (stream.requests.empty()) {
        save_model_checkpoint(checkpoint_path(run_dir, 0), model, vhash);
        state.checkpoints_written.push_back(0);
        write_diagnostics(diag_path, {});
        return state;
    }

    int start = 0;
    if (resume) {
        for (int c : stream.checkpoints)
            if (fs::exists(checkpoint_path(run_dir, c))) start = std::max(start, c);
        if (start > 0) {
            model = load_model_checkpoint(checkpoint_path(run_dir, start), cfg.model.type, vhash);
            auto existing = read_diagnostics(diag_path);
            for (const auto& r : existing)
                if (r.index <= start) state.records.push_back(r);
            for (int c : stream.checkpoints)
                if (c <= start) state.checkpoints_written.push_back(c);
        }
    }
    // Fast-forward the retain view over already-processed requests.
    for (int i = 1; i <= start; ++i)
        view.remove(stream.requests[static_cast<std::size_t>(i - 1)].interactions);
    state.processed = start;

    for (int i = start + 1; i <= stream.length(); ++i) {
        const ForgetRequest& req = stream.requests[static_cast<std::size_t>(i - 1)];
        // D_r^i excludes the current request's interactions.
        view.remove(req.interactions);

        RequestRecord rec;
        rec.index = i;
        rec.user = req.user;
        rec.n_forget = req.interactions.size();

        RngStream rng = RngStream(stream.seed).substream("request", static_cast<std::uint64_t>(i));
        try {
            const UnlearnOutcome outcome = dispatch_unlearn(model, algorithm, view, req, cfg, rng);
            rec.wall_time_s = outcome.wall_time_s;
            rec.update_norm = outcome.update_norm;
            rec.failed = outcome.failed;
            rec.failure_reason = outcome.failure_reason;
            rec.diagnostics = outcome.diagnostics;
        } catch (const std::exception& e) {
            rec.failed = true;
            rec.failure_reason = e.what();
        }
        if (cfg.protocol_checks) rec.retain_hash = view.content_hash();
        state.records.push_back(std::move(rec));
        state.processed = i;

        if (std::find(stream.checkpoints.begin(), stream.checkpoints.end(), i) !=
            stream.checkpoints.end()) {
            save_model_checkpoint(checkpoint_path(run_dir, i), model, vhash);
            state.checkpoints_written.push_back(i);
        }
    }
    write_diagnostics(diag_path, state.records);
    return state;
}

std::map<int, double> run_retrain_checkpoints(const SplitDataset& split,
                                              const ForgetStream& stream, const RunConfig& cfg,
                                              std::uint64_t seed, const std::string& retrain_dir) {
    fs::create_directories(retrain_dir);
    const std::uint64_t vhash = vocab_hash(*split.train.vocab);
    RetainView view(split.train);

    std::map<int, double> times;
    int prev = 0;
    for (int c : stream.checkpoints) {
        for (int i = prev + 1; i <= c; ++i)
            view.remove(stream.requests[static_cast<std::size_t>(i - 1)].interactions);
        prev = c;

        SplitDataset reduced = split;
        reduced.train.interactions = view.materialize();

        const auto t0 = std::chrono::steady_clock::now();
        AnyModel model = train_base_model(reduced, cfg, seed);
        const double secs = std::max(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 1e-9);
        times[c] = secs;
        save_model_checkpoint(checkpoint_path(retrain_dir, c), model, vhash);
    }
    json jt;
    for (const auto& [c, t] : times) jt[std::to_string(c)] = t;
    write_text_file((fs::path(retrain_dir) / "retrain_times.json").string(), jt.dump(2) + "\n");
    return times;
}

std::vector<std::pair<int, std::string>> checkpoint_labels(int length) {
    static const char* kLabels[4] = {"25%", "50%", "75%", "100%"};
    std::vector<std::pair<int, std::string>> out;
    for (int j = 1; j <= 4; ++j) {
        const int c = (j * length + 3) / 4;
        // Duplicate checkpoints keep the latest quarter label.
        if (!out.empty() && out.back().first == c)
            out.back().second = kLabels[j - 1];
        else
            out.emplace_back(c, kLabels[j - 1]);
    }
    return out;
}

std::vector<MetricRow> evaluate_run(const SplitDataset& split, const ForgetStream& stream,
                                    const RunConfig& cfg, std::uint64_t seed,
                                    const std::vector<std::string>& algorithms,
                                    const std::string& seed_dir) {
    const std::uint64_t vhash = vocab_hash(*split.train.vocab);
    const std::string retrain_dir = (fs::path(seed_dir) / "retrain").string();

    // Item -> category over the whole corpus.
    std::unordered_map<std::int32_t, std::int32_t> item_category;
    for (const auto* log : {&split.train, &split.validation, &split.test})
        for (const auto& it : log->interactions)
            if (it.category >= 0) item_category.emplace(it.item, it.category);
    std::unordered_set<std::int32_t> category_items;
    if (stream.category) {
        for (const auto& [item, cat] : item_category)
            if (cat == *stream.category) category_items.insert(item);
    }

    // Per-user train multiplicities (exclude sets follow deletions).
    std::unordered_map<std::int32_t, std::unordered_map<std::int32_t, int>> train_counts;
    for (const auto& it : split.train.interactions) train_counts[it.user][it.item] += 1;
    std::unordered_map<std::int32_t, std::unordered_set<std::int32_t>> test_items;
    for (const auto& it : split.test.interactions) test_items[it.user].insert(it.item);

    json retrain_times;
    {
        const std::string path = (fs::path(retrain_dir) / "retrain_times.json").string();
        if (!fs::exists(path)) throw SchemaError("missing retrain times: " + path);
        retrain_times = json::parse(read_text_file(path));
    }
    std::map<std::string, std::vector<RequestRecord>> diag;
    for (const auto& algo : algorithms)
        diag[algo] = read_diagnostics((fs::path(seed_dir) / algo / "diagnostics.jsonl").string());

    std::vector<MetricRow> rows;
    std::vector<std::int32_t> forget_users;
    std::unordered_set<std::int32_t> forget_user_set;
    int prev_cp = 0;

    for (const auto& [cp, label] : checkpoint_labels(stream.length())) {
        // Apply deletions for requests (prev_cp, cp].
        for (int i = prev_cp + 1; i <= cp; ++i) {
            const auto& req = stream.requests[static_cast<std::size_t>(i - 1)];
            if (forget_user_set.insert(req.user).second) forget_users.push_back(req.user);
            for (const auto& it : req.interactions) {
                auto& counts = train_counts[it.user];
                auto entry = counts.find(it.item);
                if (entry == counts.end())
                    throw ConsistencyError("evaluate_run: deletion outside the train set");
                if (--entry->second == 0) counts.erase(entry);
            }
        }

        // Exclusion = remaining train items; truth = test items, sensitive
        // items removed for the affected users.
        std::unordered_map<std::int32_t, std::unordered_set<std::int32_t>> exclude;
        for (const auto& [u, counts] : train_counts) {
            auto& ex = exclude[u];
            for (const auto& [item, count] : counts) ex.insert(item);
        }
        std::unordered_map<std::int32_t, std::unordered_set<std::int32_t>> truth = test_items;
        if (stream.category) {
            for (std::int32_t u : forget_users) {
                auto t = truth.find(u);
                if (t == truth.end()) continue;
                for (std::int32_t item : category_items) t->second.erase(item);
            }
        }

        const std::string retrain_cp = checkpoint_path(retrain_dir, cp);
        if (!fs::exists(retrain_cp))
            throw SchemaError("missing retrain checkpoint for i=" + std::to_string(cp));
        const AnyModel retrained = load_model_checkpoint(retrain_cp, cfg.model.type, vhash);
        const double retrain_time = retrain_times.at(std::to_string(cp)).get<double>();

        KlCandidatePolicy kl_policy;
        kl_policy.full_catalog = cfg.eval.kl_full_catalog;
        kl_policy.sample_size = cfg.eval.kl_sample_size;
        kl_policy.seed = seed;

        auto make_row = [&](const std::string& algo, const Recommender& model,
                            double kl, double time_per_request) {
            MetricRow row;
            row.category = stream.category
                               ? split.train.vocab->categories.external(*stream.category)
                               : cfg.scenario.kind;
            row.requests_label = label;
            row.checkpoint = cp;
            row.algorithm = algo;
            row.seed = seed;
            const UtilityResult u10 = utility_at_k(model, cfg.eval.k_primary, truth, exclude);
            const UtilityResult u20 = utility_at_k(model, cfg.eval.k_secondary, truth, exclude);
            row.recall10 = u10.recall;
            row.ndcg10 = u10.ndcg;
            row.phr10 = u10.phr;
            row.recall20 = u20.recall;
            row.ndcg20 = u20.ndcg;
            row.phr20 = u20.phr;
            row.skipped_users = u10.skipped_users;
            if (!forget_users.empty() && !category_items.empty()) {
                row.leakage10 =
                    sensitive_leakage(model, forget_users, category_items, cfg.eval.k_primary, exclude);
                row.leakage20 =
                    sensitive_leakage(model, forget_users, category_items, cfg.eval.k_secondary, exclude);
            }
            row.kl_r_u = kl;
            row.time_per_request_s = time_per_request;
            row.retrain_time_s = retrain_time;
            return row;
        };

        rows.push_back(make_row("retrain", as_recommender(retrained), 0.0, retrain_time));

        for (const auto& algo : algorithms) {
            const std::string cp_path = checkpoint_path((fs::path(seed_dir) / algo).string(), cp);
            if (!fs::exists(cp_path))
                throw SchemaError("missing checkpoint for algorithm '" + algo +
                                  "' at i=" + std::to_string(cp));
            const AnyModel model = load_model_checkpoint(cp_path, cfg.model.type, vhash);
            double kl = 0.0;
            if (!forget_users.empty())
                kl = kl_completeness(as_recommender(retrained), as_recommender(model), forget_users,
                                     kl_policy);
            // Mean wall time over this quarter's requests.
            double time_sum = 0.0;
            int time_count = 0;
            for (const auto& rec : diag[algo]) {
                if (rec.index > prev_cp && rec.index <= cp) {
                    time_sum += rec.wall_time_s;
                    ++time_count;
                }
            }
            const double tpr = time_count ? time_sum / time_count : 0.0;
            rows.push_back(make_row(algo, as_recommender(model), kl, tpr));
        }
        prev_cp = cp;
    }
    return rows;
}

}  // namespace unrec
