#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "infnet/events.hpp"

namespace infnet {

// Price-bin featurization. Bin boundaries are equal-width over the catalog's
// PI range; the role indicator is [is-target, is-seed, is-other].
struct FeatureConfig {
    int price_bins = 8;                     // B
    std::int64_t purchase_lookback = -1;    // seconds; < 0 means unbounded
    // steps of diffusion history per query: 0 keeps every step up to and
    // including t_i; W > 0 keeps the W steps ending at t_i - 1, mirroring an
    // online deployment that cannot see the prediction window
    int history_window = 0;
    static constexpr int role_width = 3;

    int node_dim() const { return price_bins + role_width; }
};

// Catalog-derived item featurization bound to a network's item index.
class ItemBins {
public:
    ItemBins() = default;
    // validates that every network item appears in the catalog
    ItemBins(const DynamicNetwork& network, const ItemCatalog& catalog, const FeatureConfig& cfg);

    int bin_of_item(std::uint32_t item) const { return bins_.at(item); }
    int bin_of_pi(int pi) const;
    int bins() const { return n_bins_; }
    // one-hot price-bin vector Attr(p)
    std::vector<double> item_features(std::uint32_t item) const;

private:
    int n_bins_ = 0;
    int min_pi_ = 0;
    int max_pi_ = 0;
    std::vector<int> bins_;  // per network item index
};

// Purchases bucketed per network user as (timestamp, price bin), sorted by
// timestamp. Purchases by users outside the network are ignored; purchases of
// items missing from the catalog are an error.
class PurchaseIndex {
public:
    PurchaseIndex() = default;
    PurchaseIndex(const DynamicNetwork& network, const std::vector<PurchaseRecord>& purchases,
                  const ItemCatalog& catalog, const ItemBins& bins);

    // histogram of the user's purchases per bin in [window_end - lookback, window_end)
    std::vector<double> histogram(std::uint32_t user, std::int64_t window_end,
                                  std::int64_t lookback) const;

private:
    int n_bins_ = 0;
    std::vector<std::vector<std::pair<std::int64_t, int>>> by_user_;
};

struct SubgraphEdge {
    std::uint32_t src = 0;  // local index of the sender
    std::uint32_t dst = 0;  // local index of the receiver
    std::vector<double> features;  // B-dim price-bin histogram of shared items
};

// Everything the model needs for one query: the 2-hop BFS node set over the
// union of steps <= t_i, per-step directed edges with features, node feature
// matrix, and the seed set.
struct QuerySubgraph {
    Query query;
    std::vector<std::uint32_t> nodes;   // local index -> network user index (BFS order)
    std::vector<std::uint32_t> seeds;   // local indices of {u} + senders of the item
    std::uint32_t target_local = 0;
    std::uint32_t first_step = 0;       // grid step of step_edges[0]
    std::vector<std::vector<SubgraphEdge>> step_edges;  // steps first_step .. query.step
    std::vector<std::vector<double>> node_features;     // per local node
    std::vector<double> item_features;                  // Attr(p)
};

// Stateless sampling over an immutable network; instances are safe to share
// across threads.
class Sampler {
public:
    Sampler(const DynamicNetwork& network, const ItemCatalog& catalog,
            const std::vector<PurchaseRecord>& purchases, FeatureConfig cfg);

    const FeatureConfig& config() const { return cfg_; }
    const ItemBins& bins() const { return bins_; }
    const DynamicNetwork& network() const { return *network_; }

    // {u} + senders who shared query.item to u during step-1 (network indices)
    std::vector<std::uint32_t> seed_set(const Query& query) const;

    QuerySubgraph sample_subgraph(const Query& query, int depth = 2) const;

    // purchase-bin histogram + role indicator for one user under a query
    std::vector<double> node_features(std::uint32_t user, const Query& query,
                                      const std::vector<std::uint32_t>& seed_users) const;

    // B-dim histogram of items shared on the directed edge (u -> v) in `step`;
    // empty vector if the edge does not exist there
    std::vector<double> edge_features(std::uint32_t u, std::uint32_t v, std::size_t step) const;

    void dump_subgraph(const QuerySubgraph& sg, std::ostream& os) const;

private:
    const DynamicNetwork* network_;
    FeatureConfig cfg_;
    ItemBins bins_;
    PurchaseIndex purchases_;
};

}  // namespace infnet
