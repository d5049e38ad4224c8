#include "infnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <unordered_map>

#include "infnet/rng.hpp"

namespace infnet {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string user_name(std::size_t u) { return strfmt("u%06zu", u); }
std::string item_name(std::size_t p) { return strfmt("p%05zu", p); }

// Growing power-law contact graph with triad formation for clustering,
// truncated at max_degree.
std::vector<std::vector<std::uint32_t>> build_contact_graph(const SynthConfig& cfg, Rng& rng) {
    const std::size_t n = cfg.users;
    const int m = std::max(1, cfg.contact_edges_per_user);
    std::vector<std::vector<std::uint32_t>> adj(n);
    std::vector<std::uint32_t> stubs;  // one entry per half-edge, drives preferential attachment

    auto connected = [&](std::uint32_t a, std::uint32_t b) {
        return std::find(adj[a].begin(), adj[a].end(), b) != adj[a].end();
    };
    auto link = [&](std::uint32_t a, std::uint32_t b) {
        adj[a].push_back(b);
        adj[b].push_back(a);
        stubs.push_back(a);
        stubs.push_back(b);
    };

    const std::size_t seed_nodes = std::min<std::size_t>(n, static_cast<std::size_t>(m) + 1);
    for (std::uint32_t a = 0; a < seed_nodes; ++a)
        for (std::uint32_t b = a + 1; b < seed_nodes; ++b) link(a, b);

    for (std::uint32_t u = static_cast<std::uint32_t>(seed_nodes); u < n; ++u) {
        std::uint32_t prev = UINT32_MAX;
        for (int e = 0; e < m; ++e) {
            std::uint32_t target = UINT32_MAX;
            // triad step: close a triangle through the previous attachment
            if (prev != UINT32_MAX && rng.bernoulli(cfg.triad_prob)) {
                for (int tries = 0; tries < 8; ++tries) {
                    std::uint32_t w = adj[prev][rng.below(adj[prev].size())];
                    if (w != u && !connected(u, w) &&
                        adj[w].size() < static_cast<std::size_t>(cfg.max_degree)) {
                        target = w;
                        break;
                    }
                }
            }
            if (target == UINT32_MAX) {
                for (int tries = 0; tries < 16; ++tries) {
                    std::uint32_t w = stubs[rng.below(stubs.size())];
                    if (w != u && !connected(u, w) &&
                        adj[w].size() < static_cast<std::size_t>(cfg.max_degree)) {
                        target = w;
                        break;
                    }
                }
            }
            if (target == UINT32_MAX) {
                std::uint32_t w = static_cast<std::uint32_t>(rng.below(u));
                if (w == u || connected(u, w)) continue;
                target = w;
            }
            link(u, target);
            prev = target;
        }
    }
    for (auto& v : adj) std::sort(v.begin(), v.end());
    return adj;
}

struct PendingShare {
    std::int64_t time;
    std::uint64_t seq;
    std::uint32_t sender;
    std::uint32_t item;
    bool operator>(const PendingShare& o) const {
        return std::tie(time, seq) > std::tie(o.time, o.seq);
    }
};

struct PendingPurchase {
    std::int64_t time;
    std::uint64_t seq;
    std::uint32_t user;
    std::uint32_t item;
    bool operator>(const PendingPurchase& o) const {
        return std::tie(time, seq) > std::tie(o.time, o.seq);
    }
};

// per (user, item) event-time history, queried with strict "before t"
class PairHistory {
public:
    void add(std::uint32_t user, std::uint32_t item, std::int64_t t) {
        map_[key(user, item)].push_back(t);  // insertion is time-ordered by construction
    }
    bool before(std::uint32_t user, std::uint32_t item, std::int64_t t) const {
        auto it = map_.find(key(user, item));
        return it != map_.end() && it->second.front() < t;
    }
    // sum of decay^(whole weeks ago) over events strictly before t
    double decayed_before(std::uint32_t user, std::uint32_t item, std::int64_t t, double decay,
                          std::int64_t week) const {
        auto it = map_.find(key(user, item));
        if (it == map_.end()) return 0.0;
        double acc = 0.0;
        for (auto tj : it->second) {
            if (tj >= t) break;
            acc += std::pow(decay, double((t - tj) / week));
        }
        return acc;
    }

private:
    static std::uint64_t key(std::uint32_t u, std::uint32_t i) {
        return (static_cast<std::uint64_t>(u) << 32) | i;
    }
    std::unordered_map<std::uint64_t, std::vector<std::int64_t>> map_;
};

}  // namespace

SynthOutput generate(const SynthConfig& cfg) {
    check(cfg.users >= 3, "synth: need at least 3 users");
    check(cfg.items >= 1 && cfg.categories >= 1, "synth: need items and categories");
    check(cfg.pi_max >= cfg.pi_min, "synth: invalid PI range");
    Rng rng(derive_seed(cfg.seed, "synth"));

    SynthOutput out;
    out.grid = build_time_grid(cfg.grid_start, cfg.step_seconds, cfg.grid_steps);
    const std::int64_t grid_end = out.grid.span_end();
    const std::int64_t horizon = cfg.step_seconds;
    const std::int64_t pre_begin = std::max<std::int64_t>(
        0, cfg.grid_start - static_cast<std::int64_t>(
                                cfg.pre_span_fraction * double(grid_end - cfg.grid_start)));

    // catalog: PI centered per category so category mean PIs spread out
    std::vector<int> item_pi(cfg.items);
    const double span = double(cfg.pi_max - cfg.pi_min + 1);
    for (std::size_t p = 0; p < cfg.items; ++p) {
        std::size_t cat = rng.below(cfg.categories);
        double center = cfg.pi_min + (double(cat) + 0.5) * span / double(cfg.categories);
        double spread = span / double(cfg.categories);
        int pi = static_cast<int>(std::lround(center + rng.uniform(-spread, spread)));
        item_pi[p] = std::clamp(pi, cfg.pi_min, cfg.pi_max);
        out.catalog.add({item_name(p), item_pi[p], strfmt("c%03zu", cat)});
    }

    auto contact = build_contact_graph(cfg, rng);
    std::vector<int> degree(cfg.users);
    for (std::size_t u = 0; u < cfg.users; ++u) degree[u] = static_cast<int>(contact[u].size());

    PairHistory received, purchased;
    std::uint64_t seq = 0;

    std::priority_queue<PendingShare, std::vector<PendingShare>, std::greater<PendingShare>>
        shares;
    std::priority_queue<PendingPurchase, std::vector<PendingPurchase>,
                        std::greater<PendingPurchase>>
        purchases;

    // browses: independent of the graph, spanning the pre-grid window too
    const std::size_t n_browse =
        static_cast<std::size_t>(std::llround(cfg.browse_rate * double(cfg.users)));
    for (std::size_t i = 0; i < n_browse; ++i) {
        std::uint32_t u = static_cast<std::uint32_t>(rng.below(cfg.users));
        std::uint32_t p = static_cast<std::uint32_t>(rng.below(cfg.items));
        std::int64_t t = rng.range(pre_begin, grid_end - 1);
        out.browse.push_back({user_name(u), item_name(p), t});
        if (rng.bernoulli(logistic(cfg.beta0 + cfg.beta_price * item_pi[p])))
            purchases.push({t + rng.range(0, horizon - 1), seq++, u, p});
    }

    // spontaneous shares: senders drawn degree-proportionally, items with a
    // Zipf popularity skew so popular products spread through many hands
    std::vector<std::uint32_t> stubs;
    for (std::uint32_t u = 0; u < cfg.users; ++u)
        for (std::size_t k = 0; k < contact[u].size(); ++k) stubs.push_back(u);
    std::vector<double> item_cdf(cfg.items);
    {
        double acc = 0.0;
        for (std::size_t p = 0; p < cfg.items; ++p) {
            acc += 1.0 / std::pow(double(p + 1), cfg.item_zipf);
            item_cdf[p] = acc;
        }
        for (auto& v : item_cdf) v /= acc;
    }
    auto draw_item = [&]() {
        double u = rng.uniform();
        return static_cast<std::uint32_t>(
            std::lower_bound(item_cdf.begin(), item_cdf.end(), u) - item_cdf.begin());
    };
    const std::size_t n_seed_shares =
        static_cast<std::size_t>(std::llround(cfg.base_share_rate * double(cfg.users)));
    for (std::size_t i = 0; i < n_seed_shares; ++i) {
        std::uint32_t u = stubs.empty() ? static_cast<std::uint32_t>(rng.below(cfg.users))
                                        : stubs[rng.below(stubs.size())];
        std::int64_t t = rng.range(cfg.grid_start, grid_end - 1);
        shares.push({t, seq++, u, draw_item()});
    }

    // event loop: interleave purchases and shares in time order so every
    // decision sees exactly the history strictly before it
    while (!shares.empty() || !purchases.empty()) {
        if (shares.empty() ||
            (!purchases.empty() &&
             std::tie(purchases.top().time, purchases.top().seq) <
                 std::tie(shares.top().time, shares.top().seq))) {
            auto ev = purchases.top();
            purchases.pop();
            purchased.add(ev.user, ev.item, ev.time);
            out.purchases.push_back({user_name(ev.user), item_name(ev.item), ev.time});
            continue;
        }
        auto ev = shares.top();
        shares.pop();
        const auto& nbrs = contact[ev.sender];
        if (nbrs.empty()) continue;

        // up to max_multicast distinct candidate receivers, each kept with
        // multicast_prob; at least one receiver always gets the share
        std::vector<std::uint32_t> candidates(nbrs);
        const std::size_t n_cand =
            std::min<std::size_t>(candidates.size(), std::max(1, cfg.max_multicast));
        for (std::size_t i = 0; i < n_cand; ++i) {
            std::size_t j = i + rng.below(candidates.size() - i);
            std::swap(candidates[i], candidates[j]);
        }
        std::vector<std::uint32_t> targets;
        for (std::size_t i = 0; i < n_cand; ++i)
            if (rng.bernoulli(cfg.multicast_prob)) targets.push_back(candidates[i]);
        if (targets.empty()) targets.push_back(candidates[rng.below(n_cand)]);

        const bool sender_bought = purchased.before(ev.sender, ev.item, ev.time);
        for (auto w : targets) {
            out.diffusion.push_back({user_name(ev.sender), user_name(w), item_name(ev.item),
                                     ev.time});
            int close_nbrs = 0;
            for (auto x : contact[w])
                if (received.before(x, ev.item, ev.time) && purchased.before(x, ev.item, ev.time))
                    ++close_nbrs;
            // current receipt plus decayed prior receipts of the same item
            double exposure =
                std::min(cfg.exposure_cap,
                         1.0 + received.decayed_before(w, ev.item, ev.time, cfg.exposure_decay,
                                                       cfg.step_seconds));
            received.add(w, ev.item, ev.time);

            double score = cfg.beta0 + cfg.beta_taocode * exposure +
                           cfg.beta_neighbors * close_nbrs +
                           (sender_bought ? cfg.beta_sender_bought : 0.0) +
                           cfg.beta_price * item_pi[ev.item] +
                           cfg.beta_gap * std::abs(degree[ev.sender] - degree[w]);
            if (rng.bernoulli(logistic(score)))
                purchases.push({ev.time + rng.range(0, horizon - 1), seq++, w, ev.item});

            if (rng.bernoulli(cfg.cascade_prob)) {
                // half the forwards happen within days, the rest spread out
                // over several weeks to plant long-range temporal structure
                std::int64_t delay =
                    rng.bernoulli(0.5)
                        ? rng.range(1, cfg.step_seconds / 2)
                        : rng.range(cfg.step_seconds / 2,
                                    static_cast<std::int64_t>(4.5 * double(cfg.step_seconds)));
                std::int64_t tf = ev.time + delay;
                if (tf < grid_end) shares.push({tf, seq++, w, ev.item});
            }
        }
    }

    std::sort(out.browse.begin(), out.browse.end(), [&](const auto& a, const auto& b) {
        return std::tie(a.timestamp, a.user, a.item) < std::tie(b.timestamp, b.user, b.item);
    });
    std::sort(out.purchases.begin(), out.purchases.end(), [&](const auto& a, const auto& b) {
        return std::tie(a.timestamp, a.user, a.item) < std::tie(b.timestamp, b.user, b.item);
    });
    std::sort(out.diffusion.begin(), out.diffusion.end(), [&](const auto& a, const auto& b) {
        return std::tie(a.timestamp, a.sender, a.receiver, a.item) <
               std::tie(b.timestamp, b.sender, b.receiver, b.item);
    });
    return out;
}

void write_logs(const SynthOutput& logs, const std::string& out_dir) {
    auto open = [&](const char* name) {
        std::ofstream os(out_dir + "/" + name);
        if (!os) fail("cannot write '%s/%s'", out_dir.c_str(), name);
        return os;
    };
    {
        auto os = open("catalog.txt");
        os << "# item price_index category\n";
        for (const auto& e : logs.catalog.entries())
            os << e.item << ' ' << e.price_index << ' ' << e.category << '\n';
    }
    {
        auto os = open("diffusion.txt");
        os << "# sender receiver item timestamp\n";
        for (const auto& r : logs.diffusion)
            os << r.sender << ' ' << r.receiver << ' ' << r.item << ' ' << r.timestamp << '\n';
    }
    {
        auto os = open("browse.txt");
        os << "# user item timestamp\n";
        for (const auto& r : logs.browse)
            os << r.user << ' ' << r.item << ' ' << r.timestamp << '\n';
    }
    {
        auto os = open("purchase.txt");
        os << "# user item timestamp\n";
        for (const auto& r : logs.purchases)
            os << r.user << ' ' << r.item << ' ' << r.timestamp << '\n';
    }
}

}  // namespace infnet
