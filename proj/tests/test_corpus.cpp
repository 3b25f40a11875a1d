#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "unrec/corpus.hpp"
#include "unrec/errors.hpp"
#include "unrec/serialize.hpp"
#include "unrec/synthetic.hpp"

using namespace unrec;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = fs::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path.string();
}

CsvSchema basic_schema() {
    CsvSchema s;
    s.user_col = "user";
    s.item_col = "item";
    s.time_col = "ts";
    return s;
}

}  // namespace

TEST_CASE("loading a 3-row csv counts distinct users and items") {
    const auto path = write_temp("unrec_basic.csv",
                                 "user,item,ts\n"
                                 "alice,apple,1\n"
                                 "alice,pear,2\n"
                                 "bob,plum,1\n");
    const InteractionLog log = load_interactions(path, basic_schema());
    CHECK(log.n_users() == 2);
    CHECK(log.n_items() == 3);
    CHECK(log.interactions.size() == 3);
}

TEST_CASE("grocery-order columns populate basket and category") {
    CsvSchema schema;
    schema.user_col = "user_id";
    schema.item_col = "product_id";
    schema.time_col = "order_number";
    schema.basket_col = "order_id";
    schema.category_col = "aisle";
    const auto path = write_temp("unrec_insta.csv",
                                 "order_id,user_id,product_id,order_number,aisle\n"
                                 "o1,u1,p1,1,beer\n"
                                 "o1,u1,p2,1,bread\n"
                                 "o2,u1,p3,2,beer\n");
    const InteractionLog log = load_interactions(path, schema);
    CHECK(log.has_baskets());
    CHECK(log.vocab->baskets.size() == 2);
    CHECK(log.vocab->categories.size() == 2);
    CHECK(log.interactions[0].basket >= 0);
    CHECK(log.interactions[0].category >= 0);
}

TEST_CASE("loading the same file twice serializes byte-identically") {
    const auto path = write_temp("unrec_det.csv",
                                 "user,item,ts\nu1,i1,3\nu2,i2,1\nu1,i3,2\n");
    const auto a = log_to_json(load_interactions(path, basic_schema())).dump();
    const auto b = log_to_json(load_interactions(path, basic_schema())).dump();
    CHECK(a == b);
}

TEST_CASE("csv error paths") {
    const auto missing = write_temp("unrec_missing.csv", "user,thing,ts\nu,i,1\n");
    CHECK_THROWS_AS(load_interactions(missing, basic_schema()), SchemaError);

    const auto bad_row = write_temp("unrec_badrow.csv", "user,item,ts\nu,i,notatime\n");
    try {
        load_interactions(bad_row, basic_schema());
        FAIL("expected RowError");
    } catch (const RowError& e) {
        CHECK(e.line() == 2);
    }

    const auto empty = write_temp("unrec_empty.csv", "");
    CHECK_THROWS_AS(load_interactions(empty, basic_schema()), EmptyInputError);

    const auto header_only = write_temp("unrec_header.csv", "user,item,ts\n");
    CHECK_THROWS_AS(load_interactions(header_only, basic_schema()), EmptyInputError);
}

TEST_CASE("a basket spanning two users is rejected") {
    CsvSchema schema = basic_schema();
    schema.basket_col = "basket";
    const auto path = write_temp("unrec_basket.csv",
                                 "user,item,ts,basket\nu1,i1,1,b1\nu2,i2,1,b1\n");
    CHECK_THROWS_AS(load_interactions(path, schema), RowError);
}

TEST_CASE("vocab round-trips external ids") {
    const auto path = write_temp("unrec_vocab.csv", "user,item,ts\nx,a,1\ny,b,2\nz,c,3\n");
    const InteractionLog log = load_interactions(path, basic_schema());
    for (std::int32_t u = 0; u < log.n_users(); ++u) {
        const auto& ext = log.vocab->users.external(u);
        CHECK(log.vocab->users.lookup(ext) == u);
    }
    for (std::int32_t i = 0; i < log.n_items(); ++i) {
        const auto& ext = log.vocab->items.external(i);
        CHECK(log.vocab->items.lookup(ext) == i);
    }
}

TEST_CASE("leave-one-out keeps the last basket for test and the previous for validation") {
    CsvSchema schema = basic_schema();
    schema.basket_col = "basket";
    const auto path = write_temp("unrec_loo.csv",
                                 "user,item,ts,basket\n"
                                 "u,i1,1,b1\nu,i2,2,b2\nu,i3,3,b3\n");
    const SplitDataset split = temporal_leave_one_out(load_interactions(path, schema));
    REQUIRE(split.train.interactions.size() == 1);
    REQUIRE(split.validation.interactions.size() == 1);
    REQUIRE(split.test.interactions.size() == 1);
    CHECK(split.train.interactions[0].timestamp == 1);
    CHECK(split.validation.interactions[0].timestamp == 2);
    CHECK(split.test.interactions[0].timestamp == 3);
}

TEST_CASE("users below the activity threshold are dropped and counted") {
    const auto path = write_temp("unrec_drop.csv",
                                 "user,item,ts\n"
                                 "u1,i1,1\nu1,i2,2\n"
                                 "u2,i1,1\nu2,i2,2\nu2,i3,3\n");
    const SplitDataset split = temporal_leave_one_out(load_interactions(path, basic_schema()));
    CHECK(split.dropped_users == 1);
    CHECK(split.train.interactions.size() == 1);

    const auto all_small = write_temp("unrec_allsmall.csv", "user,item,ts\nu1,i1,1\n");
    CHECK_THROWS_AS(temporal_leave_one_out(load_interactions(all_small, basic_schema())),
                    EmptyInputError);
}

TEST_CASE("five-user toy split matches brute-force enumeration of timestamps") {
    // Independent oracle: for each user, sort (timestamp, item) pairs and
    // assign the last to test, second-to-last to validation.
    const SyntheticCfParams params{.n_users = 5,
                                   .n_items = 30,
                                   .n_clusters = 2,
                                   .sensitive_fraction = 0.0,
                                   .sensitive_user_fraction = 0.0,
                                   .main_interactions_min = 3,
                                   .main_interactions_max = 7};
    const InteractionLog log = make_synthetic_cf(params, 21);
    const SplitDataset split = temporal_leave_one_out(log);

    std::map<std::int32_t, std::vector<Interaction>> per_user;
    for (const auto& it : log.interactions) per_user[it.user].push_back(it);
    for (auto& [u, items] : per_user) {
        std::sort(items.begin(), items.end(), interaction_less);
        const Interaction expected_test = items.back();
        const Interaction expected_val = items[items.size() - 2];
        bool found_test = false, found_val = false;
        for (const auto& it : split.test.interactions)
            if (it == expected_test) found_test = true;
        for (const auto& it : split.validation.interactions)
            if (it == expected_val) found_val = true;
        CHECK(found_test);
        CHECK(found_val);
    }
    // The split partitions the filtered log.
    CHECK(split.train.interactions.size() + split.validation.interactions.size() +
              split.test.interactions.size() ==
          log.interactions.size());
}

TEST_CASE("quarter checkpoints follow the ceiling formula") {
    CHECK(quarter_checkpoints(1) == std::vector<int>{1});
    CHECK(quarter_checkpoints(4) == std::vector<int>{1, 2, 3, 4});
    CHECK(quarter_checkpoints(10) == std::vector<int>{3, 5, 8, 10});
    CHECK(quarter_checkpoints(37) == std::vector<int>{10, 19, 28, 37});
}

TEST_CASE("sensitive streams cover the category, one request per user") {
    const InteractionLog log = make_synthetic_cf(
        {.n_users = 300, .n_items = 100, .n_clusters = 4, .sensitive_fraction = 0.1,
         .sensitive_user_fraction = 0.4, .main_interactions_min = 6, .main_interactions_max = 10,
         .sensitive_min = 2, .sensitive_max = 3},
        5);
    const SplitDataset split = temporal_leave_one_out(log);
    const auto category = log.vocab->categories.lookup("sensitive");
    REQUIRE(category.has_value());

    const ForgetStream stream = sample_sensitive_stream(split, *category, 0.01, 77);
    REQUIRE(stream.length() > 0);
    CHECK(stream.checkpoints == quarter_checkpoints(stream.length()));

    std::set<std::int32_t> users;
    std::set<std::pair<std::int32_t, std::int64_t>> seen;
    for (const auto& req : stream.requests) {
        CHECK(users.insert(req.user).second);  // users appear at most once
        CHECK(!req.interactions.empty());
        for (const auto& it : req.interactions) {
            CHECK(it.user == req.user);
            CHECK(it.category == *category);
            CHECK(seen.insert({it.item * 100000 + it.user, it.timestamp}).second);
        }
        // The request covers all of the user's sensitive train interactions.
        std::size_t expected = 0;
        for (const auto& it : split.train.interactions)
            if (it.user == req.user && it.category == *category) ++expected;
        CHECK(req.interactions.size() == expected);
    }

    // Determinism.
    const ForgetStream again = sample_sensitive_stream(split, *category, 0.01, 77);
    REQUIRE(again.length() == stream.length());
    for (int i = 0; i < stream.length(); ++i)
        CHECK(again.requests[static_cast<std::size_t>(i)].user ==
              stream.requests[static_cast<std::size_t>(i)].user);

    // Different seed, different order (with overwhelming probability).
    const ForgetStream other = sample_sensitive_stream(split, *category, 0.01, 78);
    bool any_diff = other.length() != stream.length();
    for (int i = 0; !any_diff && i < std::min(stream.length(), other.length()); ++i)
        any_diff = other.requests[static_cast<std::size_t>(i)].user !=
                   stream.requests[static_cast<std::size_t>(i)].user;
    CHECK(any_diff);
}

TEST_CASE("sampling targets the requested fraction of train interactions") {
    // One sensitive interaction per drinker, so per-user expansion is the
    // identity and the request count equals the sampled count.
    const InteractionLog log = make_synthetic_cf(
        {.n_users = 500, .n_items = 120, .n_clusters = 4, .sensitive_fraction = 0.1,
         .sensitive_user_fraction = 0.9, .main_interactions_min = 8, .main_interactions_max = 12,
         .sensitive_min = 1, .sensitive_max = 1},
        77);
    const SplitDataset split = temporal_leave_one_out(log);
    const auto category = log.vocab->categories.lookup("sensitive");
    const double fraction = 0.01;
    const ForgetStream stream = sample_sensitive_stream(split, *category, fraction, 3);
    const auto expected = static_cast<long long>(
        std::llround(fraction * static_cast<double>(split.train.interactions.size())));
    CHECK(stream.length() == expected);
}

TEST_CASE("sensitive stream errors") {
    const InteractionLog log = make_synthetic_cf(
        {.n_users = 50, .n_items = 40, .n_clusters = 2, .sensitive_fraction = 0.1,
         .sensitive_user_fraction = 0.0, .main_interactions_min = 5, .main_interactions_max = 8},
        1);
    const SplitDataset split = temporal_leave_one_out(log);
    const auto category = log.vocab->categories.lookup("sensitive");
    REQUIRE(category.has_value());
    CHECK_THROWS_AS(sample_sensitive_stream(split, *category, 0.01, 1), EmptyInputError);
    CHECK_THROWS_AS(sample_sensitive_stream(split, *category, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_sensitive_stream(split, *category, 1.0, 1), std::invalid_argument);
}

TEST_CASE("forget streams shrink the retain set monotonically") {
    const InteractionLog log = make_synthetic_cf(
        {.n_users = 200, .n_items = 80, .n_clusters = 4, .sensitive_fraction = 0.1,
         .sensitive_user_fraction = 0.3, .main_interactions_min = 5, .main_interactions_max = 9,
         .sensitive_min = 2, .sensitive_max = 3},
        9);
    const SplitDataset split = temporal_leave_one_out(log);
    const auto category = log.vocab->categories.lookup("sensitive");
    const ForgetStream stream = sample_sensitive_stream(split, *category, 0.02, 3);

    std::size_t remaining = split.train.interactions.size();
    std::set<std::size_t> cumulative;
    for (const auto& req : stream.requests) {
        remaining -= req.interactions.size();
        cumulative.insert(cumulative.size() + req.interactions.size());
        CHECK(remaining < split.train.interactions.size());
    }
}

TEST_CASE("spam injection with zero spammers is the identity") {
    const InteractionLog log = make_synthetic_cf(
        {.n_users = 40, .n_items = 30, .n_clusters = 2, .sensitive_fraction = 0.0,
         .main_interactions_min = 4, .main_interactions_max = 6},
        2);
    const SplitDataset split = temporal_leave_one_out(log);
    const auto [poisoned, scenario] = inject_spam(split, SpamParams{}, 1);
    CHECK(scenario.empty());
    CHECK(poisoned.train.interactions.size() == split.train.interactions.size());
}

TEST_CASE("spam injection appends exactly n_spammers * clicks_each interactions") {
    const InteractionLog log = make_synthetic_cf(
        {.n_users = 50, .n_items = 30, .n_clusters = 2, .sensitive_fraction = 0.0,
         .main_interactions_min = 4, .main_interactions_max = 6},
        3);
    const SplitDataset split = temporal_leave_one_out(log);
    SpamParams params{.n_spammers = 5, .promoted_items = 3, .clicks_each = 20};
    const auto [poisoned, scenario] = inject_spam(split, params, 11);
    CHECK(scenario.injected.interactions.size() == 100);
    CHECK(poisoned.train.interactions.size() == split.train.interactions.size() + 100);
    CHECK(poisoned.train.n_users() == split.train.n_users() + 5);
    for (const auto& it : scenario.injected.interactions)
        CHECK(std::find(scenario.spammer_users.begin(), scenario.spammer_users.end(), it.user) !=
              scenario.spammer_users.end());
}

TEST_CASE("promoted items strictly improve their popularity rank") {
    const InteractionLog log = make_synthetic_cf(
        {.n_users = 50, .n_items = 30, .n_clusters = 2, .sensitive_fraction = 0.0,
         .main_interactions_min = 4, .main_interactions_max = 6},
        4);
    const SplitDataset split = temporal_leave_one_out(log);
    SpamParams params{.n_spammers = 8, .promoted_items = 1, .clicks_each = 25,
                      .promoted_ratio = 0.8};
    const auto [poisoned, scenario] = inject_spam(split, params, 13);
    REQUIRE(scenario.promoted_items.size() == 1);
    const std::int32_t promoted = scenario.promoted_items[0];

    auto rank_of = [&](const InteractionLog& train) {
        std::map<std::int32_t, int> freq;
        for (const auto& it : train.interactions) freq[it.item] += 1;
        int rank = 1;
        for (const auto& [item, count] : freq)
            if (count > freq[promoted] || (count == freq[promoted] && item < promoted)) ++rank;
        return rank;
    };
    CHECK(rank_of(poisoned.train) < rank_of(split.train));
}

TEST_CASE("spam streams delete exactly the injected interactions") {
    const InteractionLog log = make_synthetic_cf(
        {.n_users = 50, .n_items = 30, .n_clusters = 2, .sensitive_fraction = 0.0,
         .main_interactions_min = 4, .main_interactions_max = 6},
        5);
    const SplitDataset split = temporal_leave_one_out(log);
    SpamParams params{.n_spammers = 5, .promoted_items = 2, .clicks_each = 4};
    const auto [poisoned, scenario] = inject_spam(split, params, 17);

    const ForgetStream stream = spam_stream_from(scenario);
    CHECK(stream.length() == 5);
    CHECK(stream.checkpoints == std::vector<int>{2, 3, 4, 5});

    std::vector<Interaction> unioned;
    for (const auto& req : stream.requests)
        unioned.insert(unioned.end(), req.interactions.begin(), req.interactions.end());
    std::sort(unioned.begin(), unioned.end(), interaction_less);
    CHECK(unioned == scenario.injected.interactions);

    const ForgetStream again = spam_stream_from(scenario);
    for (int i = 0; i < stream.length(); ++i)
        CHECK(again.requests[static_cast<std::size_t>(i)].user ==
              stream.requests[static_cast<std::size_t>(i)].user);

    CHECK_THROWS_AS(spam_stream_from(SpamScenario{}), EmptyInputError);
}

TEST_CASE("interaction logs survive a json round trip") {
    const InteractionLog log = make_synthetic_nbr({.n_users = 12, .n_items = 20}, 8);
    const InteractionLog back = log_from_json(log_to_json(log));
    CHECK(back.interactions == log.interactions);
    CHECK(back.n_users() == log.n_users());
    CHECK(vocab_hash(*back.vocab) == vocab_hash(*log.vocab));
}

TEST_CASE("forget streams survive a json round trip and check the vocab hash") {
    const InteractionLog log = make_synthetic_cf(
        {.n_users = 120, .n_items = 60, .n_clusters = 3, .sensitive_fraction = 0.1,
         .sensitive_user_fraction = 0.5, .main_interactions_min = 5, .main_interactions_max = 8,
         .sensitive_min = 2, .sensitive_max = 3},
        6);
    const SplitDataset split = temporal_leave_one_out(log);
    const auto category = log.vocab->categories.lookup("sensitive");
    const ForgetStream stream = sample_sensitive_stream(split, *category, 0.02, 4);

    const auto h = vocab_hash(*log.vocab);
    const ForgetStream back = stream_from_json(stream_to_json(stream, h), h);
    CHECK(back.length() == stream.length());
    CHECK(back.checkpoints == stream.checkpoints);
    CHECK(back.seed == stream.seed);
    CHECK_THROWS_AS(stream_from_json(stream_to_json(stream, h), h + 1), VocabMismatchError);
}
