#include <doctest.h>

#include <map>
#include <set>

#include "infnet/analytics.hpp"
#include "infnet/stats.hpp"
#include "infnet/synth.hpp"
#include "test_util.hpp"

using namespace infnet;

namespace {

SynthConfig small_config() {
    SynthConfig cfg;
    cfg.users = 2000;
    cfg.items = 100;
    cfg.categories = 5;
    cfg.grid_steps = 6;
    cfg.base_share_rate = 0.4;
    cfg.browse_rate = 2.0;
    cfg.seed = 11;
    return cfg;
}

}  // namespace

TEST_CASE("generate: identical seeds give byte-identical logs") {
    TempDir d1, d2;
    auto cfg = small_config();
    write_logs(generate(cfg), d1.path.string());
    write_logs(generate(cfg), d2.path.string());
    for (const char* f : {"catalog.txt", "diffusion.txt", "browse.txt", "purchase.txt"})
        CHECK(slurp(d1.file(f)) == slurp(d2.file(f)));

    auto cfg2 = cfg;
    cfg2.seed = 12;
    TempDir d3;
    write_logs(generate(cfg2), d3.path.string());
    CHECK(slurp(d1.file("diffusion.txt")) != slurp(d3.file("diffusion.txt")));
}

TEST_CASE("generate: logs satisfy the events-module invariants") {
    auto logs = generate(small_config());
    CHECK(!logs.diffusion.empty());
    CHECK(!logs.purchases.empty());
    std::set<std::string> users;
    for (const auto& r : logs.diffusion) {
        CHECK(r.sender != r.receiver);
        CHECK(r.timestamp >= logs.grid.span_begin());
        CHECK(r.timestamp < logs.grid.span_end());
        CHECK(logs.catalog.find(r.item) != nullptr);
        users.insert(r.receiver);
    }
    for (const auto& r : logs.purchases) CHECK(logs.catalog.find(r.item) != nullptr);
    for (const auto& r : logs.browse) CHECK(logs.catalog.find(r.item) != nullptr);
    CHECK(users.size() > 100);

    // logs parse cleanly through the loaders
    TempDir dir;
    write_logs(logs, dir.path.string());
    auto reloaded = load_diffusion_records(dir.file("diffusion.txt"));
    CHECK(reloaded.size() == logs.diffusion.size());
    auto net = build_dynamic_network(reloaded, logs.grid);
    CHECK(net.dropped() == 0);
    CHECK(net.event_count() == logs.diffusion.size());
}

TEST_CASE("generate: a hugely negative intercept kills all purchases") {
    auto cfg = small_config();
    cfg.beta0 = -40.0;
    cfg.beta_taocode = 0.0;
    cfg.beta_neighbors = 0.0;
    cfg.beta_sender_bought = 0.0;
    cfg.beta_price = 0.0;
    cfg.beta_gap = 0.0;
    auto logs = generate(cfg);
    CHECK(logs.purchases.empty());
    CHECK(!logs.diffusion.empty());
}

TEST_CASE("generate: contact degrees are mostly small") {
    auto logs = generate(small_config());
    // degree proxy: distinct diffusion partners per user
    std::map<std::string, std::set<std::string>> partners;
    for (const auto& r : logs.diffusion) {
        partners[r.sender].insert(r.receiver);
        partners[r.receiver].insert(r.sender);
    }
    std::size_t small = 0;
    for (const auto& [u, s] : partners) small += s.size() <= 9;
    CHECK(double(small) / double(partners.size()) > 0.8);
}

TEST_CASE("generate: planted taocode effect raises CI over browsing") {
    auto cfg = small_config();
    cfg.users = 6000;
    cfg.base_share_rate = 1.4;
    cfg.browse_rate = 2.0;
    auto logs = generate(cfg);
    auto purchased_after = [&](const std::vector<UserItemEvent>& evs) {
        auto tao = conversion_index(evs, logs.purchases, cfg.step_seconds, CiGroupBy::Item,
                                    logs.catalog);
        std::size_t conv = 0, total = 0;
        for (const auto& r : tao.rows) {
            conv += r.converted;
            total += r.total;
        }
        return std::pair(conv, total);
    };
    auto [tc, tn] = purchased_after(taocode_events(logs.diffusion));
    auto [bc, bn] = purchased_after(browse_events(logs.browse));
    REQUIRE(tn > 10000);
    REQUIRE(bn > 5000);
    double ci_tao = double(tc) / double(tn);
    double ci_browse = double(bc) / double(bn);
    CHECK(ci_tao > ci_browse);
    CHECK(two_proportion_pvalue(tc, tn, bc, bn) < 0.01);
}
