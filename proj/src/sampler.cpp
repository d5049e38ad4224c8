#include "infnet/sampler.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <tuple>
#include <unordered_map>

namespace infnet {

ItemBins::ItemBins(const DynamicNetwork& network, const ItemCatalog& catalog,
                   const FeatureConfig& cfg) {
    check(cfg.price_bins >= 1, "feature config: price_bins must be >= 1");
    n_bins_ = cfg.price_bins;
    min_pi_ = std::numeric_limits<int>::max();
    max_pi_ = std::numeric_limits<int>::min();
    for (const auto& e : catalog.entries()) {
        min_pi_ = std::min(min_pi_, e.price_index);
        max_pi_ = std::max(max_pi_, e.price_index);
    }
    if (catalog.size() == 0) {
        min_pi_ = 0;
        max_pi_ = 0;
    }
    bins_.resize(network.items().size());
    for (std::uint32_t i = 0; i < network.items().size(); ++i) {
        const auto& name = network.items().name(i);
        const CatalogEntry* entry = catalog.find(name);
        if (!entry) fail("catalog: item '%s' referenced by the network is missing", name.c_str());
        bins_[i] = bin_of_pi(entry->price_index);
    }
}

int ItemBins::bin_of_pi(int pi) const {
    const int span = max_pi_ - min_pi_ + 1;
    int b = static_cast<int>((static_cast<long long>(pi - min_pi_) * n_bins_) / span);
    return std::clamp(b, 0, n_bins_ - 1);
}

std::vector<double> ItemBins::item_features(std::uint32_t item) const {
    std::vector<double> f(n_bins_, 0.0);
    f[bin_of_item(item)] = 1.0;
    return f;
}

PurchaseIndex::PurchaseIndex(const DynamicNetwork& network,
                             const std::vector<PurchaseRecord>& purchases,
                             const ItemCatalog& catalog, const ItemBins& bins) {
    n_bins_ = bins.bins();
    by_user_.resize(network.users().size());
    for (const auto& p : purchases) {
        auto u = network.users().find(p.user);
        if (!u) continue;
        const CatalogEntry* entry = catalog.find(p.item);
        if (!entry) fail("purchase history: unknown item '%s'", p.item.c_str());
        by_user_[*u].emplace_back(p.timestamp, bins.bin_of_pi(entry->price_index));
    }
    for (auto& v : by_user_) std::sort(v.begin(), v.end());
}

std::vector<double> PurchaseIndex::histogram(std::uint32_t user, std::int64_t window_end,
                                             std::int64_t lookback) const {
    std::vector<double> h(n_bins_, 0.0);
    const auto& v = by_user_.at(user);
    const std::int64_t lo =
        lookback < 0 ? std::numeric_limits<std::int64_t>::min() : window_end - lookback;
    for (const auto& [ts, bin] : v) {
        if (ts >= window_end) break;
        if (ts >= lo) h[bin] += 1.0;
    }
    return h;
}

Sampler::Sampler(const DynamicNetwork& network, const ItemCatalog& catalog,
                 const std::vector<PurchaseRecord>& purchases, FeatureConfig cfg)
    : network_(&network),
      cfg_(cfg),
      bins_(network, catalog, cfg),
      purchases_(network, purchases, catalog, bins_) {}

std::vector<std::uint32_t> Sampler::seed_set(const Query& query) const {
    check(query.step >= 1 && query.step < network_->steps(), "seed_set: query step out of range");
    std::vector<std::uint32_t> seeds{query.user};
    const std::size_t prev = query.step - 1;
    const auto& adj = network_->in_adj(prev);
    const auto& events = network_->events(prev);
    for (std::uint32_t k = adj.offsets[query.user]; k < adj.offsets[query.user + 1]; ++k) {
        const auto& e = events[adj.events[k]];
        if (e.item == query.item) seeds.push_back(e.sender);
    }
    std::sort(seeds.begin(), seeds.end());
    seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
    return seeds;
}

std::vector<double> Sampler::node_features(std::uint32_t user, const Query& query,
                                           const std::vector<std::uint32_t>& seed_users) const {
    const std::int64_t window_end = network_->grid().begin(query.step);
    auto f = purchases_.histogram(user, window_end, cfg_.purchase_lookback);
    f.resize(f.size() + FeatureConfig::role_width, 0.0);
    const std::size_t role0 = f.size() - FeatureConfig::role_width;
    if (user == query.user)
        f[role0] = 1.0;  // target outranks seed
    else if (std::binary_search(seed_users.begin(), seed_users.end(), user))
        f[role0 + 1] = 1.0;
    else
        f[role0 + 2] = 1.0;
    return f;
}

std::vector<double> Sampler::edge_features(std::uint32_t u, std::uint32_t v,
                                           std::size_t step) const {
    std::vector<double> f;
    const auto& adj = network_->out_adj(step);
    const auto& events = network_->events(step);
    for (std::uint32_t k = adj.offsets[u]; k < adj.offsets[u + 1]; ++k) {
        const auto& e = events[adj.events[k]];
        if (e.receiver != v) continue;
        if (f.empty()) f.assign(bins_.bins(), 0.0);
        f[bins_.bin_of_item(e.item)] += 1.0;
    }
    return f;
}

QuerySubgraph Sampler::sample_subgraph(const Query& query, int depth) const {
    QuerySubgraph sg;
    sg.query = query;
    auto seed_users = seed_set(query);

    // steps covered by the query's history: everything up to t_i by default,
    // or the last W steps ending at t_i - 1 when a window is configured
    std::size_t first_step = 0;
    std::size_t last_step = query.step;
    if (cfg_.history_window > 0) {
        const std::size_t w = static_cast<std::size_t>(cfg_.history_window);
        last_step = query.step - 1;
        if (last_step + 1 > w) first_step = last_step + 1 - w;
    }
    sg.first_step = static_cast<std::uint32_t>(first_step);
    const std::size_t n_steps = last_step + 1 - first_step;
    const auto& rank = network_->rank_by_id();

    // BFS over the undirected union of steps <= t_i, seeds at distance 0.
    // Local indices follow discovery order; within a frontier, neighbors are
    // visited in ascending user-id order.
    std::unordered_map<std::uint32_t, std::uint32_t> local;  // user -> local index
    auto by_rank = [&](std::uint32_t a, std::uint32_t b) { return rank[a] < rank[b]; };

    std::vector<std::uint32_t> frontier = seed_users;
    std::sort(frontier.begin(), frontier.end(), by_rank);
    for (auto u : frontier) {
        local.emplace(u, static_cast<std::uint32_t>(sg.nodes.size()));
        sg.nodes.push_back(u);
    }
    for (int hop = 0; hop < depth && !frontier.empty(); ++hop) {
        std::vector<std::uint32_t> next;
        for (auto u : frontier) {
            for (std::size_t t = first_step; t < first_step + n_steps; ++t) {
                const auto& out = network_->out_adj(t);
                const auto& in = network_->in_adj(t);
                const auto& events = network_->events(t);
                for (std::uint32_t k = out.offsets[u]; k < out.offsets[u + 1]; ++k)
                    next.push_back(events[out.events[k]].receiver);
                for (std::uint32_t k = in.offsets[u]; k < in.offsets[u + 1]; ++k)
                    next.push_back(events[in.events[k]].sender);
            }
        }
        std::sort(next.begin(), next.end(), by_rank);
        next.erase(std::unique(next.begin(), next.end()), next.end());
        std::erase_if(next, [&](std::uint32_t w) { return local.count(w) != 0; });
        for (auto w : next) {
            local.emplace(w, static_cast<std::uint32_t>(sg.nodes.size()));
            sg.nodes.push_back(w);
        }
        frontier = std::move(next);
    }

    sg.target_local = local.at(query.user);
    for (auto u : seed_users) sg.seeds.push_back(local.at(u));
    std::sort(sg.seeds.begin(), sg.seeds.end());

    // per-step edges restricted to the node set, grouped per directed pair
    sg.step_edges.resize(n_steps);
    for (std::size_t t = 0; t < n_steps; ++t) {
        const auto& events = network_->events(first_step + t);
        // events are sorted by (sender, receiver, ...), so runs share an edge
        std::size_t i = 0;
        while (i < events.size()) {
            std::size_t j = i;
            while (j < events.size() && events[j].sender == events[i].sender &&
                   events[j].receiver == events[i].receiver)
                ++j;
            auto su = local.find(events[i].sender);
            auto sv = local.find(events[i].receiver);
            if (su != local.end() && sv != local.end()) {
                SubgraphEdge edge;
                edge.src = su->second;
                edge.dst = sv->second;
                edge.features.assign(bins_.bins(), 0.0);
                for (std::size_t k = i; k < j; ++k)
                    edge.features[bins_.bin_of_item(events[k].item)] += 1.0;
                sg.step_edges[t].push_back(std::move(edge));
            }
            i = j;
        }
        // deterministic order over local indices
        std::sort(sg.step_edges[t].begin(), sg.step_edges[t].end(),
                  [](const SubgraphEdge& a, const SubgraphEdge& b) {
                      return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
                  });
    }

    sg.node_features.reserve(sg.nodes.size());
    for (auto u : sg.nodes) sg.node_features.push_back(node_features(u, query, seed_users));
    sg.item_features = bins_.item_features(query.item);
    return sg;
}

void Sampler::dump_subgraph(const QuerySubgraph& sg, std::ostream& os) const {
    os << "query user=" << network_->users().name(sg.query.user)
       << " item=" << network_->items().name(sg.query.item) << " step=" << sg.query.step
       << " label=" << int(sg.query.label) << "\n";
    os << "nodes";
    for (auto u : sg.nodes) os << ' ' << network_->users().name(u);
    os << "\nseeds";
    for (auto s : sg.seeds) os << ' ' << network_->users().name(sg.nodes[s]);
    os << "\n";
    for (std::size_t i = 0; i < sg.nodes.size(); ++i) {
        os << "node " << network_->users().name(sg.nodes[i]) << " feat";
        for (double v : sg.node_features[i]) os << ' ' << v;
        os << "\n";
    }
    for (std::size_t t = 0; t < sg.step_edges.size(); ++t)
        for (const auto& e : sg.step_edges[t]) {
            os << "edge t=" << t << ' ' << network_->users().name(sg.nodes[e.src]) << " -> "
               << network_->users().name(sg.nodes[e.dst]) << " feat";
            for (double v : e.features) os << ' ' << v;
            os << "\n";
        }
}

}  // namespace infnet
