#include "unrec/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "unrec/errors.hpp"
#include "unrec/rng.hpp"

namespace unrec {

bool interaction_less(const Interaction& a, const Interaction& b) {
    if (a.user != b.user) return a.user < b.user;
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    if (a.item != b.item) return a.item < b.item;
    return a.basket < b.basket;
}

std::int32_t Vocab::intern(const std::string& external_id) {
    auto it = index_.find(external_id);
    if (it != index_.end()) return it->second;
    const auto idx = static_cast<std::int32_t>(ids_.size());
    ids_.push_back(external_id);
    index_.emplace(external_id, idx);
    return idx;
}

std::optional<std::int32_t> Vocab::lookup(const std::string& external_id) const {
    auto it = index_.find(external_id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocab::external(std::int32_t index) const {
    if (index < 0 || index >= size()) throw std::out_of_range("Vocab::external: bad index");
    return ids_[static_cast<std::size_t>(index)];
}

std::uint64_t vocab_hash(const CorpusVocab& vocab) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        h ^= 0xff;
        h *= 0x100000001b3ull;
    };
    for (const auto& s : vocab.users.ids()) mix(s);
    for (const auto& s : vocab.items.ids()) mix(s);
    for (const auto& s : vocab.categories.ids()) mix(s);
    return h;
}

std::int32_t InteractionLog::n_users() const { return vocab ? vocab->users.size() : 0; }
std::int32_t InteractionLog::n_items() const { return vocab ? vocab->items.size() : 0; }

bool InteractionLog::has_baskets() const {
    for (const auto& it : interactions)
        if (it.basket >= 0) return true;
    return false;
}

void InteractionLog::sort_canonical() {
    std::sort(interactions.begin(), interactions.end(), interaction_less);
}

std::vector<int> quarter_checkpoints(int length) {
    std::vector<int> out;
    for (int j = 1; j <= 4; ++j) {
        const int c = (j * length + 3) / 4;  // ceil(j*L/4)
        if (out.empty() || out.back() != c) out.push_back(c);
    }
    return out;
}

namespace {

// Minimal CSV field splitter with double-quote support.
std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::size_t require_column(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw SchemaError("missing column '" + name + "' in CSV header");
}

}  // namespace

InteractionLog load_interactions(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw EmptyInputError("empty CSV file: " + path);
    const auto header = split_csv_row(line);

    const std::size_t user_idx = require_column(header, schema.user_col);
    const std::size_t item_idx = require_column(header, schema.item_col);
    const std::size_t time_idx = require_column(header, schema.time_col);
    std::optional<std::size_t> basket_idx, category_idx;
    if (!schema.basket_col.empty()) basket_idx = require_column(header, schema.basket_col);
    if (!schema.category_col.empty()) category_idx = require_column(header, schema.category_col);

    auto vocab = std::make_shared<CorpusVocab>();
    InteractionLog log;
    // Each basket belongs to exactly one user; checked while ingesting.
    std::unordered_map<std::int32_t, std::int32_t> basket_owner;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const auto fields = split_csv_row(line);
        const std::size_t needed = std::max({user_idx, item_idx, time_idx,
                                             basket_idx.value_or(0), category_idx.value_or(0)});
        if (fields.size() <= needed) throw RowError("too few columns", line_no);

        Interaction it;
        it.user = vocab->users.intern(fields[user_idx]);
        it.item = vocab->items.intern(fields[item_idx]);
        try {
            std::size_t pos = 0;
            it.timestamp = std::stoll(fields[time_idx], &pos);
            if (pos != fields[time_idx].size()) throw std::invalid_argument("trailing chars");
        } catch (const std::exception&) {
            throw RowError("unparseable timestamp '" + fields[time_idx] + "'", line_no);
        }
        if (it.timestamp < 0) throw RowError("negative timestamp", line_no);
        if (basket_idx && !fields[*basket_idx].empty()) {
            it.basket = vocab->baskets.intern(fields[*basket_idx]);
            auto [owner, inserted] = basket_owner.emplace(it.basket, it.user);
            if (!inserted && owner->second != it.user)
                throw RowError("basket '" + fields[*basket_idx] + "' spans multiple users", line_no);
        }
        if (category_idx && !fields[*category_idx].empty())
            it.category = vocab->categories.intern(fields[*category_idx]);
        log.interactions.push_back(it);
    }
    if (log.interactions.empty()) throw EmptyInputError("CSV has no data rows: " + path);

    log.vocab = std::move(vocab);
    log.sort_canonical();
    return log;
}

SplitDataset temporal_leave_one_out(const InteractionLog& log, int min_activity) {
    if (log.interactions.empty()) throw EmptyInputError("temporal_leave_one_out: empty log");
    const bool basket_mode = log.has_baskets();

    SplitDataset split;
    split.train.vocab = split.validation.vocab = split.test.vocab = log.vocab;

    // Interactions are already sorted by (user, timestamp, ...); walk per-user runs.
    std::size_t begin = 0;
    while (begin < log.interactions.size()) {
        std::size_t end = begin;
        const std::int32_t user = log.interactions[begin].user;
        while (end < log.interactions.size() && log.interactions[end].user == user) ++end;

        if (basket_mode) {
            // Chronological basket order: first appearance within the sorted run.
            std::vector<std::int32_t> order;
            std::unordered_map<std::int32_t, std::size_t> seen;
            for (std::size_t i = begin; i < end; ++i) {
                const std::int32_t b = log.interactions[i].basket;
                if (seen.emplace(b, order.size()).second) order.push_back(b);
            }
            if (static_cast<int>(order.size()) < min_activity) {
                ++split.dropped_users;
                begin = end;
                continue;
            }
            const std::int32_t test_basket = order[order.size() - 1];
            const std::int32_t val_basket = order[order.size() - 2];
            for (std::size_t i = begin; i < end; ++i) {
                const auto& it = log.interactions[i];
                if (it.basket == test_basket)
                    split.test.interactions.push_back(it);
                else if (it.basket == val_basket)
                    split.validation.interactions.push_back(it);
                else
                    split.train.interactions.push_back(it);
            }
        } else {
            const std::size_t n = end - begin;
            if (static_cast<int>(n) < min_activity) {
                ++split.dropped_users;
                begin = end;
                continue;
            }
            for (std::size_t i = begin; i < end; ++i) {
                if (i == end - 1)
                    split.test.interactions.push_back(log.interactions[i]);
                else if (i == end - 2)
                    split.validation.interactions.push_back(log.interactions[i]);
                else
                    split.train.interactions.push_back(log.interactions[i]);
            }
        }
        begin = end;
    }

    if (split.train.interactions.empty())
        throw EmptyInputError("temporal_leave_one_out: no users left after min-activity filter");
    return split;
}

ForgetStream sample_sensitive_stream(const SplitDataset& split, std::int32_t category,
                                     double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::invalid_argument("sample_sensitive_stream: fraction must be in (0,1)");
    const auto& train = split.train.interactions;

    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < train.size(); ++i)
        if (train[i].category == category) pool.push_back(i);
    if (pool.empty())
        throw EmptyInputError("sample_sensitive_stream: no train interactions in category " +
                              std::to_string(category));

    const auto target = static_cast<std::size_t>(
        std::max<long long>(1, std::llround(fraction * static_cast<double>(train.size()))));
    const std::size_t k = std::min(target, pool.size());

    RngStream rng(seed);
    RngStream pick = rng.substream("sensitive-sample");
    // Partial Fisher-Yates; sampling without replacement.
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + pick.uniform_int(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }

    std::set<std::int32_t> touched;
    for (std::size_t i = 0; i < k; ++i) touched.insert(train[pool[i]].user);

    std::vector<std::int32_t> users(touched.begin(), touched.end());
    RngStream order = rng.substream("user-order");
    for (std::size_t i = 0; i + 1 < users.size(); ++i) {
        const std::size_t j = i + order.uniform_int(users.size() - i);
        std::swap(users[i], users[j]);
    }

    ForgetStream stream;
    stream.category = category;
    stream.seed = seed;
    for (std::size_t r = 0; r < users.size(); ++r) {
        ForgetRequest req;
        req.index = static_cast<int>(r + 1);
        req.user = users[r];
        // A user's request covers all of their sensitive-category train interactions.
        for (const auto& it : train)
            if (it.user == req.user && it.category == category) req.interactions.push_back(it);
        stream.requests.push_back(std::move(req));
    }
    stream.checkpoints = quarter_checkpoints(stream.length());
    return stream;
}

std::pair<SplitDataset, SpamScenario> inject_spam(const SplitDataset& split,
                                                  const SpamParams& params, std::uint64_t seed) {
    SpamScenario scenario;
    scenario.seed = seed;
    if (params.n_spammers == 0) {
        scenario.injected.vocab = split.train.vocab;
        return {split, scenario};
    }
    if (params.n_spammers < 0 || params.clicks_each <= 0 || params.promoted_items <= 0)
        throw std::invalid_argument("inject_spam: counts must be positive");
    const std::int32_t n_items = split.train.n_items();
    if (params.promoted_items > n_items)
        throw std::invalid_argument("inject_spam: promoted_items exceeds item vocabulary");
    if (!(params.promoted_ratio >= 0.0 && params.promoted_ratio <= 1.0))
        throw std::invalid_argument("inject_spam: promoted_ratio must be in [0,1]");

    RngStream rng(seed);
    RngStream pick = rng.substream("promoted");
    std::vector<std::int32_t> items(static_cast<std::size_t>(n_items));
    for (std::int32_t i = 0; i < n_items; ++i) items[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < params.promoted_items; ++i) {
        const std::size_t j = static_cast<std::size_t>(i) +
                              pick.uniform_int(items.size() - static_cast<std::size_t>(i));
        std::swap(items[static_cast<std::size_t>(i)], items[j]);
    }
    scenario.promoted_items.assign(items.begin(), items.begin() + params.promoted_items);
    std::sort(scenario.promoted_items.begin(), scenario.promoted_items.end());

    auto vocab = std::make_shared<CorpusVocab>(*split.train.vocab);
    const bool basket_mode = split.train.has_baskets();
    std::int64_t t0 = 0;
    for (const auto& it : split.train.interactions) t0 = std::max(t0, it.timestamp);

    RngStream clicks = rng.substream("clicks");
    scenario.injected.vocab = vocab;
    for (int s = 0; s < params.n_spammers; ++s) {
        const std::int32_t u = vocab->users.intern("spam_user_" + std::to_string(s));
        scenario.spammer_users.push_back(u);
        for (int c = 0; c < params.clicks_each; ++c) {
            Interaction it;
            it.user = u;
            it.timestamp = t0 + 1 + c;
            if (clicks.uniform() < params.promoted_ratio) {
                it.item = scenario.promoted_items[clicks.uniform_int(scenario.promoted_items.size())];
            } else {
                it.item = static_cast<std::int32_t>(clicks.uniform_int(static_cast<std::uint64_t>(n_items)));
            }
            if (basket_mode)
                it.basket = vocab->baskets.intern("spam_basket_" + std::to_string(s) + "_" +
                                                  std::to_string(c));
            scenario.injected.interactions.push_back(it);
        }
    }
    scenario.injected.sort_canonical();

    SplitDataset poisoned = split;
    poisoned.train.vocab = poisoned.validation.vocab = poisoned.test.vocab = vocab;
    poisoned.train.interactions.insert(poisoned.train.interactions.end(),
                                       scenario.injected.interactions.begin(),
                                       scenario.injected.interactions.end());
    poisoned.train.sort_canonical();
    return {poisoned, scenario};
}

ForgetStream spam_stream_from(const SpamScenario& scenario) {
    if (scenario.empty()) throw EmptyInputError("spam_stream_from: empty scenario");

    std::vector<std::int32_t> users = scenario.spammer_users;
    RngStream order = RngStream(scenario.seed).substream("spam-order");
    for (std::size_t i = 0; i + 1 < users.size(); ++i) {
        const std::size_t j = i + order.uniform_int(users.size() - i);
        std::swap(users[i], users[j]);
    }

    ForgetStream stream;
    stream.seed = scenario.seed;
    for (std::size_t r = 0; r < users.size(); ++r) {
        ForgetRequest req;
        req.index = static_cast<int>(r + 1);
        req.user = users[r];
        for (const auto& it : scenario.injected.interactions)
            if (it.user == req.user) req.interactions.push_back(it);
        stream.requests.push_back(std::move(req));
    }
    stream.checkpoints = quarter_checkpoints(stream.length());
    return stream;
}

}  // namespace unrec
