#include "unrec/synthetic.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

#include "unrec/rng.hpp"

namespace unrec {
namespace {

std::vector<std::int32_t> sample_distinct(RngStream& rng, std::int32_t lo, std::int32_t hi,
                                          int count) {
    std::set<std::int32_t> picked;
    const auto span = static_cast<std::uint64_t>(hi - lo);
    const int want = std::min<int>(count, hi - lo);
    while (static_cast<int>(picked.size()) < want)
        picked.insert(lo + static_cast<std::int32_t>(rng.uniform_int(span)));
    return {picked.begin(), picked.end()};
}

}  // namespace

InteractionLog make_synthetic_cf(const SyntheticCfParams& p, std::uint64_t seed) {
    if (p.n_users <= 0 || p.n_items <= 0 || p.n_clusters <= 0)
        throw std::invalid_argument("make_synthetic_cf: counts must be positive");
    const auto n_sensitive =
        static_cast<std::int32_t>(static_cast<double>(p.n_items) * p.sensitive_fraction);
    const std::int32_t n_main = p.n_items - n_sensitive;
    if (n_main < p.n_clusters) throw std::invalid_argument("make_synthetic_cf: too few items");
    const std::int32_t block = n_main / p.n_clusters;

    auto vocab = std::make_shared<CorpusVocab>();
    for (std::int32_t u = 0; u < p.n_users; ++u) vocab->users.intern("u" + std::to_string(u));
    // Sensitive items occupy the tail of the index range.
    for (std::int32_t i = 0; i < p.n_items; ++i) vocab->items.intern("i" + std::to_string(i));
    for (int c = 0; c < p.n_clusters; ++c) vocab->categories.intern("c" + std::to_string(c));
    const std::int32_t sensitive_cat = vocab->categories.intern(p.sensitive_category);

    auto category_of = [&](std::int32_t item) -> std::int32_t {
        if (item >= n_main) return sensitive_cat;
        return std::min<std::int32_t>(item / block, p.n_clusters - 1);
    };

    RngStream root(seed);
    InteractionLog log;
    log.vocab = vocab;
    for (std::int32_t u = 0; u < p.n_users; ++u) {
        RngStream rng = root.substream("user", static_cast<std::uint64_t>(u));
        const std::int32_t cluster = static_cast<std::int32_t>(rng.uniform_int(
            static_cast<std::uint64_t>(p.n_clusters)));
        const std::int32_t lo = cluster * block;
        const std::int32_t hi = (cluster == p.n_clusters - 1) ? n_main : lo + block;

        const int n_pick = p.main_interactions_min +
                           static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
                               p.main_interactions_max - p.main_interactions_min + 1)));
        std::vector<std::int32_t> items = sample_distinct(rng, lo, hi, n_pick);

        if (n_sensitive > 0 && rng.uniform() < p.sensitive_user_fraction) {
            const int n_sens = p.sensitive_min +
                               static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
                                   p.sensitive_max - p.sensitive_min + 1)));
            for (std::int32_t s : sample_distinct(rng, n_main, p.n_items, n_sens))
                items.push_back(s);
        }

        // Random chronological order over the user's interactions.
        for (std::size_t i = 0; i + 1 < items.size(); ++i) {
            const std::size_t j = i + rng.uniform_int(items.size() - i);
            std::swap(items[i], items[j]);
        }
        for (std::size_t t = 0; t < items.size(); ++t) {
            Interaction it;
            it.user = u;
            it.item = items[t];
            it.timestamp = static_cast<std::int64_t>(t);
            it.category = category_of(items[t]);
            log.interactions.push_back(it);
        }
    }
    log.sort_canonical();
    return log;
}

InteractionLog make_synthetic_nbr(const SyntheticNbrParams& p, std::uint64_t seed) {
    if (p.n_users <= 0 || p.n_items <= 0 || p.n_clusters <= 0 || p.baskets_per_user <= 0)
        throw std::invalid_argument("make_synthetic_nbr: counts must be positive");
    const std::int32_t block = std::max<std::int32_t>(1, p.n_items / p.n_clusters);

    auto vocab = std::make_shared<CorpusVocab>();
    for (std::int32_t u = 0; u < p.n_users; ++u) vocab->users.intern("u" + std::to_string(u));
    for (std::int32_t i = 0; i < p.n_items; ++i) vocab->items.intern("i" + std::to_string(i));
    for (int c = 0; c < p.n_clusters; ++c) vocab->categories.intern("c" + std::to_string(c));

    RngStream root(seed);
    InteractionLog log;
    log.vocab = vocab;
    for (std::int32_t u = 0; u < p.n_users; ++u) {
        RngStream rng = root.substream("user", static_cast<std::uint64_t>(u));
        const std::int32_t cluster =
            static_cast<std::int32_t>(rng.uniform_int(static_cast<std::uint64_t>(p.n_clusters)));
        const std::int32_t lo = cluster * block;
        const std::int32_t hi = (cluster == p.n_clusters - 1) ? p.n_items : lo + block;
        for (int b = 0; b < p.baskets_per_user; ++b) {
            const std::int32_t basket =
                vocab->baskets.intern("u" + std::to_string(u) + "_b" + std::to_string(b));
            const int size = p.basket_size_min +
                             static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
                                 p.basket_size_max - p.basket_size_min + 1)));
            for (std::int32_t item : sample_distinct(rng, lo, hi, size)) {
                Interaction it;
                it.user = u;
                it.item = item;
                it.timestamp = b;
                it.basket = basket;
                it.category = std::min<std::int32_t>(item / block, p.n_clusters - 1);
                log.interactions.push_back(it);
            }
        }
    }
    log.sort_canonical();
    return log;
}

std::string log_to_csv(const InteractionLog& log) {
    std::ostringstream os;
    os << "user_id,item_id,timestamp,basket_id,category\n";
    for (const auto& it : log.interactions) {
        os << log.vocab->users.external(it.user) << ',' << log.vocab->items.external(it.item)
           << ',' << it.timestamp << ',';
        if (it.basket >= 0) os << log.vocab->baskets.external(it.basket);
        os << ',';
        if (it.category >= 0) os << log.vocab->categories.external(it.category);
        os << '\n';
    }
    return os.str();
}

CsvSchema synthetic_csv_schema(bool with_baskets, bool with_categories) {
    CsvSchema schema;
    schema.user_col = "user_id";
    schema.item_col = "item_id";
    schema.time_col = "timestamp";
    if (with_baskets) schema.basket_col = "basket_id";
    if (with_categories) schema.category_col = "category";
    return schema;
}

}  // namespace unrec
