#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace unrec {

struct Interaction {
    std::int32_t user = -1;
    std::int32_t item = -1;
    std::int64_t timestamp = 0;
    std::int32_t basket = -1;    // -1: no basket information
    std::int32_t category = -1;  // -1: no category information

    friend bool operator==(const Interaction&, const Interaction&) = default;
};

// Canonical sort: (user, timestamp, item, basket).
bool interaction_less(const Interaction& a, const Interaction& b);

// External id <-> dense 0-based index, in first-appearance order.
class Vocab {
public:
    std::int32_t intern(const std::string& external_id);
    std::optional<std::int32_t> lookup(const std::string& external_id) const;
    const std::string& external(std::int32_t index) const;
    std::int32_t size() const { return static_cast<std::int32_t>(ids_.size()); }
    const std::vector<std::string>& ids() const { return ids_; }

private:
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::int32_t> index_;
};

struct CorpusVocab {
    Vocab users;
    Vocab items;
    Vocab categories;
    Vocab baskets;
};

// FNV-1a over the user/item/category external ids; pins model checkpoints to
// the corpus they were trained on.
std::uint64_t vocab_hash(const CorpusVocab& vocab);

struct InteractionLog {
    std::vector<Interaction> interactions;  // sorted by interaction_less
    std::shared_ptr<const CorpusVocab> vocab;

    std::int32_t n_users() const;
    std::int32_t n_items() const;
    bool has_baskets() const;
    void sort_canonical();
};

struct SplitDataset {
    InteractionLog train;
    InteractionLog validation;
    InteractionLog test;
    std::string split_rule = "temporal-leave-one-out";
    std::int64_t dropped_users = 0;  // users below the min-activity threshold
};

struct ForgetRequest {
    int index = 0;  // 1-based position in the stream
    std::int32_t user = -1;
    std::vector<Interaction> interactions;
};

struct ForgetStream {
    std::vector<ForgetRequest> requests;
    std::vector<int> checkpoints;  // sorted, deduplicated
    std::optional<std::int32_t> category;
    std::uint64_t seed = 0;

    int length() const { return static_cast<int>(requests.size()); }
};

struct SpamScenario {
    std::vector<std::int32_t> spammer_users;
    std::vector<std::int32_t> promoted_items;
    InteractionLog injected;
    std::uint64_t seed = 0;

    bool empty() const { return spammer_users.empty(); }
};

// Column mapping for CSV ingestion. Names must match the header row.
struct CsvSchema {
    std::string user_col;
    std::string item_col;
    std::string time_col;
    std::string basket_col;    // optional, empty = absent
    std::string category_col;  // optional, empty = absent
};

// checkpoints {ceil(L/4), ceil(2L/4), ceil(3L/4), L}, deduplicated.
std::vector<int> quarter_checkpoints(int length);

InteractionLog load_interactions(const std::string& path, const CsvSchema& schema);

SplitDataset temporal_leave_one_out(const InteractionLog& log, int min_activity = 3);

ForgetStream sample_sensitive_stream(const SplitDataset& split, std::int32_t category,
                                     double fraction, std::uint64_t seed);

struct SpamParams {
    int n_spammers = 0;
    int promoted_items = 0;
    int clicks_each = 0;
    double promoted_ratio = 0.5;  // fraction of clicks aimed at the promoted set
};

std::pair<SplitDataset, SpamScenario> inject_spam(const SplitDataset& split,
                                                  const SpamParams& params, std::uint64_t seed);

ForgetStream spam_stream_from(const SpamScenario& scenario);

}  // namespace unrec
