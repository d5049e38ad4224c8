#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "infnet/common.hpp"

namespace infnet {

// One Taocode-style sharing event: sender pushed a product link to receiver.
struct DiffusionRecord {
    std::string sender;
    std::string receiver;
    std::string item;
    std::int64_t timestamp = 0;
};

struct PurchaseRecord {
    std::string user;
    std::string item;
    std::int64_t timestamp = 0;
};

struct BrowseRecord {
    std::string user;
    std::string item;
    std::int64_t timestamp = 0;
};

struct CatalogEntry {
    std::string item;
    int price_index = 0;  // PI, a non-negative integer bin
    std::string category;
};

class ItemCatalog {
public:
    void add(CatalogEntry entry);
    const CatalogEntry* find(const std::string& item) const;
    const CatalogEntry& at(const std::string& item) const;
    const std::vector<CatalogEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<CatalogEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Contiguous half-open intervals [b_i, b_{i+1}); every in-span timestamp maps
// to exactly one step.
class TimeGrid {
public:
    TimeGrid() = default;
    explicit TimeGrid(std::vector<std::int64_t> boundaries);

    std::size_t steps() const { return boundaries_.empty() ? 0 : boundaries_.size() - 1; }
    std::int64_t begin(std::size_t step) const { return boundaries_.at(step); }
    std::int64_t end(std::size_t step) const { return boundaries_.at(step + 1); }
    std::int64_t span_begin() const { return boundaries_.front(); }
    std::int64_t span_end() const { return boundaries_.back(); }
    std::int64_t step_length(std::size_t step) const { return end(step) - begin(step); }

    // step index containing ts, or nullopt if outside the span
    std::optional<std::size_t> step_of(std::int64_t ts) const;

    const std::vector<std::int64_t>& boundaries() const { return boundaries_; }

private:
    std::vector<std::int64_t> boundaries_;
};

TimeGrid build_time_grid(std::int64_t start, std::int64_t step_length, std::size_t n);

// Opaque string ids mapped to dense indices in first-seen order.
class IdIndex {
public:
    std::uint32_t intern(const std::string& name);
    std::optional<std::uint32_t> find(const std::string& name) const;
    const std::string& name(std::uint32_t idx) const { return names_.at(idx); }
    std::uint32_t size() const { return static_cast<std::uint32_t>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> lookup_;
};

// One sharing event with interned endpoints, bucketed into a grid step.
struct StepEvent {
    std::uint32_t sender = 0;
    std::uint32_t receiver = 0;
    std::uint32_t item = 0;
    std::int64_t timestamp = 0;
};

// Per-step directed multigraph of sharing events plus the global id maps.
// Built once, then immutable; safe for concurrent reads.
class DynamicNetwork {
public:
    DynamicNetwork() = default;
    DynamicNetwork(TimeGrid grid, IdIndex users, IdIndex items,
                   std::vector<std::vector<StepEvent>> step_events, std::size_t dropped);

    const TimeGrid& grid() const { return grid_; }
    const IdIndex& users() const { return users_; }
    const IdIndex& items() const { return items_; }
    std::size_t dropped() const { return dropped_; }
    std::size_t steps() const { return grid_.steps(); }
    std::size_t event_count() const;

    // events in step t, sorted by (sender, receiver, item, timestamp)
    const std::vector<StepEvent>& events(std::size_t step) const { return step_events_.at(step); }

    // event indices of step t grouped by sender / receiver (CSR over users)
    struct Adjacency {
        std::vector<std::uint32_t> offsets;  // size users+1
        std::vector<std::uint32_t> events;   // indices into events(step)
    };
    const Adjacency& out_adj(std::size_t step) const { return out_adj_.at(step); }
    const Adjacency& in_adj(std::size_t step) const { return in_adj_.at(step); }

    // users ranked by ascending string id; rank_by_id()[u] is u's rank
    const std::vector<std::uint32_t>& rank_by_id() const { return rank_by_id_; }

    void save(std::ostream& os) const;
    static DynamicNetwork load(std::istream& is);
    void save_file(const std::string& path) const;
    static DynamicNetwork load_file(const std::string& path);

private:
    void build_indexes();

    TimeGrid grid_;
    IdIndex users_;
    IdIndex items_;
    std::vector<std::vector<StepEvent>> step_events_;
    std::vector<Adjacency> out_adj_;
    std::vector<Adjacency> in_adj_;
    std::vector<std::uint32_t> rank_by_id_;
    std::size_t dropped_ = 0;
};

// A labeled prediction instance: did `user` purchase `item` during step
// `step`, given they received it during step-1?
struct Query {
    std::uint32_t user = 0;
    std::uint32_t item = 0;
    std::uint32_t step = 0;
    std::uint8_t label = 0;
    bool cold = false;  // no purchases anywhere before the grid span
};

std::vector<DiffusionRecord> load_diffusion_records(const std::string& path);
std::vector<PurchaseRecord> load_purchase_records(const std::string& path);
std::vector<BrowseRecord> load_browse_records(const std::string& path);
ItemCatalog load_catalog(const std::string& path);

DynamicNetwork build_dynamic_network(const std::vector<DiffusionRecord>& records,
                                     const TimeGrid& grid);

std::vector<Query> materialize_queries(const DynamicNetwork& network,
                                       const std::vector<PurchaseRecord>& purchases,
                                       std::size_t step);

// materialize_queries for every valid step 1..n-1, concatenated
std::vector<Query> materialize_all_queries(const DynamicNetwork& network,
                                           const std::vector<PurchaseRecord>& purchases);

void save_queries(const DynamicNetwork& network, const std::vector<Query>& queries,
                  const std::string& path);
std::vector<Query> load_queries(const DynamicNetwork& network, const std::string& path);

}  // namespace infnet
