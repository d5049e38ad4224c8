#include "infnet/events.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <tuple>

namespace infnet {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

std::int64_t parse_timestamp(const std::string& s, const std::string& path, std::size_t lineno) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        fail("%s:%zu: invalid timestamp '%s'", path.c_str(), lineno, s.c_str());
    if (v < 0) fail("%s:%zu: negative timestamp %lld", path.c_str(), lineno, (long long)v);
    return v;
}

int parse_int(const std::string& s, const std::string& path, std::size_t lineno,
              const char* what) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        fail("%s:%zu: invalid %s '%s'", path.c_str(), lineno, what, s.c_str());
    return v;
}

// Calls fn(fields, lineno) for every non-comment, non-blank line.
template <class Fn>
void for_each_line(const std::string& path, Fn fn) {
    std::ifstream in(path);
    if (!in) fail("cannot open '%s'", path.c_str());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_fields(line);
        if (fields.empty()) continue;
        fn(fields, lineno);
    }
}

}  // namespace

void ItemCatalog::add(CatalogEntry entry) {
    auto [it, inserted] = index_.emplace(entry.item, entries_.size());
    if (!inserted) fail("catalog: duplicate item '%s'", entry.item.c_str());
    entries_.push_back(std::move(entry));
}

const CatalogEntry* ItemCatalog::find(const std::string& item) const {
    auto it = index_.find(item);
    return it == index_.end() ? nullptr : &entries_[it->second];
}

const CatalogEntry& ItemCatalog::at(const std::string& item) const {
    const CatalogEntry* e = find(item);
    if (!e) fail("catalog: unknown item '%s'", item.c_str());
    return *e;
}

TimeGrid::TimeGrid(std::vector<std::int64_t> boundaries) : boundaries_(std::move(boundaries)) {
    check(boundaries_.size() >= 3, "time grid needs at least 2 steps");
    for (std::size_t i = 0; i + 1 < boundaries_.size(); ++i)
        check(boundaries_[i] < boundaries_[i + 1], "time grid boundaries must strictly increase");
}

std::optional<std::size_t> TimeGrid::step_of(std::int64_t ts) const {
    if (ts < span_begin() || ts >= span_end()) return std::nullopt;
    auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), ts);
    return static_cast<std::size_t>(it - boundaries_.begin()) - 1;
}

TimeGrid build_time_grid(std::int64_t start, std::int64_t step_length, std::size_t n) {
    if (step_length <= 0) fail("time grid: step_length must be positive, got %lld",
                               (long long)step_length);
    if (n < 2) fail("time grid: need at least 2 steps, got %zu", n);
    std::vector<std::int64_t> b(n + 1);
    for (std::size_t i = 0; i <= n; ++i) b[i] = start + static_cast<std::int64_t>(i) * step_length;
    return TimeGrid(std::move(b));
}

std::uint32_t IdIndex::intern(const std::string& name) {
    auto [it, inserted] = lookup_.emplace(name, static_cast<std::uint32_t>(names_.size()));
    if (inserted) names_.push_back(name);
    return it->second;
}

std::optional<std::uint32_t> IdIndex::find(const std::string& name) const {
    auto it = lookup_.find(name);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

std::vector<DiffusionRecord> load_diffusion_records(const std::string& path) {
    std::vector<DiffusionRecord> out;
    for_each_line(path, [&](const std::vector<std::string>& f, std::size_t lineno) {
        if (f.size() != 4)
            fail("%s:%zu: expected 'sender receiver item timestamp', got %zu fields",
                 path.c_str(), lineno, f.size());
        if (f[0] == f[1])
            fail("%s:%zu: self-loop diffusion record (sender == receiver == '%s')",
                 path.c_str(), lineno, f[0].c_str());
        out.push_back({f[0], f[1], f[2], parse_timestamp(f[3], path, lineno)});
    });
    return out;
}

template <class Rec>
static std::vector<Rec> load_user_item_records(const std::string& path) {
    std::vector<Rec> out;
    for_each_line(path, [&](const std::vector<std::string>& f, std::size_t lineno) {
        if (f.size() != 3)
            fail("%s:%zu: expected 'user item timestamp', got %zu fields", path.c_str(), lineno,
                 f.size());
        out.push_back({f[0], f[1], parse_timestamp(f[2], path, lineno)});
    });
    return out;
}

std::vector<PurchaseRecord> load_purchase_records(const std::string& path) {
    return load_user_item_records<PurchaseRecord>(path);
}

std::vector<BrowseRecord> load_browse_records(const std::string& path) {
    return load_user_item_records<BrowseRecord>(path);
}

ItemCatalog load_catalog(const std::string& path) {
    ItemCatalog catalog;
    for_each_line(path, [&](const std::vector<std::string>& f, std::size_t lineno) {
        if (f.size() != 3)
            fail("%s:%zu: expected 'item price_index category', got %zu fields", path.c_str(),
                 lineno, f.size());
        int pi = parse_int(f[1], path, lineno, "price index");
        if (pi < 0) fail("%s:%zu: price index must be non-negative", path.c_str(), lineno);
        catalog.add({f[0], pi, f[2]});
    });
    return catalog;
}

DynamicNetwork::DynamicNetwork(TimeGrid grid, IdIndex users, IdIndex items,
                               std::vector<std::vector<StepEvent>> step_events,
                               std::size_t dropped)
    : grid_(std::move(grid)),
      users_(std::move(users)),
      items_(std::move(items)),
      step_events_(std::move(step_events)),
      dropped_(dropped) {
    check(step_events_.size() == grid_.steps(), "network: step count mismatch with grid");
    build_indexes();
}

std::size_t DynamicNetwork::event_count() const {
    std::size_t n = 0;
    for (const auto& ev : step_events_) n += ev.size();
    return n;
}

void DynamicNetwork::build_indexes() {
    const std::uint32_t n_users = users_.size();
    out_adj_.assign(step_events_.size(), {});
    in_adj_.assign(step_events_.size(), {});
    for (std::size_t t = 0; t < step_events_.size(); ++t) {
        auto& events = step_events_[t];
        std::sort(events.begin(), events.end(), [](const StepEvent& a, const StepEvent& b) {
            return std::tie(a.sender, a.receiver, a.item, a.timestamp) <
                   std::tie(b.sender, b.receiver, b.item, b.timestamp);
        });
        auto build = [&](Adjacency& adj, auto key) {
            adj.offsets.assign(n_users + 1, 0);
            adj.events.resize(events.size());
            for (const auto& e : events) ++adj.offsets[key(e) + 1];
            for (std::size_t u = 0; u < n_users; ++u) adj.offsets[u + 1] += adj.offsets[u];
            std::vector<std::uint32_t> cursor(adj.offsets.begin(), adj.offsets.end() - 1);
            for (std::uint32_t i = 0; i < events.size(); ++i)
                adj.events[cursor[key(events[i])]++] = i;
            return;
        };
        build(out_adj_[t], [](const StepEvent& e) { return e.sender; });
        build(in_adj_[t], [](const StepEvent& e) { return e.receiver; });
    }
    // rank users by string id for deterministic, id-ordered traversals
    std::vector<std::uint32_t> order(n_users);
    for (std::uint32_t u = 0; u < n_users; ++u) order[u] = u;
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return users_.name(a) < users_.name(b);
    });
    rank_by_id_.assign(n_users, 0);
    for (std::uint32_t r = 0; r < n_users; ++r) rank_by_id_[order[r]] = r;
}

DynamicNetwork build_dynamic_network(const std::vector<DiffusionRecord>& records,
                                     const TimeGrid& grid) {
    check(grid.steps() >= 2, "network: grid must have at least 2 steps");
    IdIndex users, items;
    std::vector<std::vector<StepEvent>> steps(grid.steps());
    std::size_t dropped = 0;
    for (const auto& r : records) {
        auto step = grid.step_of(r.timestamp);
        if (!step) {
            ++dropped;
            continue;
        }
        StepEvent e;
        e.sender = users.intern(r.sender);
        e.receiver = users.intern(r.receiver);
        e.item = items.intern(r.item);
        e.timestamp = r.timestamp;
        steps[*step].push_back(e);
    }
    return DynamicNetwork(std::move(grid), std::move(users), std::move(items), std::move(steps),
                          dropped);
}

namespace {

constexpr char kNetworkMagic[8] = {'I', 'D', 'N', 'S', 'N', 'A', 'P', '\0'};
constexpr std::uint32_t kNetworkVersion = 1;

template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) fail("network snapshot: truncated file");
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    auto n = read_pod<std::uint32_t>(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) fail("network snapshot: truncated string");
    return s;
}

}  // namespace

void DynamicNetwork::save(std::ostream& os) const {
    os.write(kNetworkMagic, sizeof(kNetworkMagic));
    write_pod(os, kNetworkVersion);
    const auto& b = grid_.boundaries();
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(b.size()));
    for (auto v : b) write_pod(os, v);
    write_pod<std::uint32_t>(os, users_.size());
    for (const auto& n : users_.names()) write_string(os, n);
    write_pod<std::uint32_t>(os, items_.size());
    for (const auto& n : items_.names()) write_string(os, n);
    write_pod<std::uint64_t>(os, dropped_);
    for (const auto& events : step_events_) {
        write_pod<std::uint64_t>(os, events.size());
        for (const auto& e : events) {
            write_pod(os, e.sender);
            write_pod(os, e.receiver);
            write_pod(os, e.item);
            write_pod(os, e.timestamp);
        }
    }
}

DynamicNetwork DynamicNetwork::load(std::istream& is) {
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kNetworkMagic, sizeof(magic)) != 0)
        fail("network snapshot: bad magic header");
    auto version = read_pod<std::uint32_t>(is);
    if (version != kNetworkVersion)
        fail("network snapshot: version %u unsupported (expected %u)", version, kNetworkVersion);
    auto nb = read_pod<std::uint32_t>(is);
    std::vector<std::int64_t> boundaries(nb);
    for (auto& v : boundaries) v = read_pod<std::int64_t>(is);
    TimeGrid grid(std::move(boundaries));
    IdIndex users, items;
    auto nu = read_pod<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < nu; ++i) users.intern(read_string(is));
    auto ni = read_pod<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < ni; ++i) items.intern(read_string(is));
    auto dropped = read_pod<std::uint64_t>(is);
    std::vector<std::vector<StepEvent>> steps(grid.steps());
    for (auto& events : steps) {
        auto n = read_pod<std::uint64_t>(is);
        events.resize(n);
        for (auto& e : events) {
            e.sender = read_pod<std::uint32_t>(is);
            e.receiver = read_pod<std::uint32_t>(is);
            e.item = read_pod<std::uint32_t>(is);
            e.timestamp = read_pod<std::int64_t>(is);
        }
    }
    return DynamicNetwork(std::move(grid), std::move(users), std::move(items), std::move(steps),
                          static_cast<std::size_t>(dropped));
}

void DynamicNetwork::save_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail("cannot write '%s'", path.c_str());
    save(os);
    if (!os) fail("write failed for '%s'", path.c_str());
}

DynamicNetwork DynamicNetwork::load_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("cannot open network snapshot '%s'", path.c_str());
    return load(is);
}

std::vector<Query> materialize_queries(const DynamicNetwork& network,
                                       const std::vector<PurchaseRecord>& purchases,
                                       std::size_t step) {
    const std::size_t n = network.steps();
    if (step < 1 || step >= n)
        fail("materialize_queries: step %zu out of range [1, %zu]", step, n - 1);

    // purchase times per known (user, item) pair, and first purchase per user
    std::unordered_map<std::uint64_t, std::vector<std::int64_t>> pair_times;
    std::unordered_map<std::uint32_t, std::int64_t> first_purchase;
    for (const auto& p : purchases) {
        auto u = network.users().find(p.user);
        if (!u) continue;
        auto it = first_purchase.find(*u);
        if (it == first_purchase.end() || p.timestamp < it->second)
            first_purchase[*u] = p.timestamp;
        auto i = network.items().find(p.item);
        if (!i) continue;
        pair_times[(static_cast<std::uint64_t>(*u) << 32) | *i].push_back(p.timestamp);
    }

    // distinct (receiver, item) pairs that received during step-1
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    for (const auto& e : network.events(step - 1)) pairs.emplace_back(e.receiver, e.item);
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

    const std::int64_t tb = network.grid().begin(step);
    const std::int64_t te = network.grid().end(step);
    const std::int64_t grid_begin = network.grid().span_begin();

    std::vector<Query> out;
    out.reserve(pairs.size());
    for (auto [user, item] : pairs) {
        Query q;
        q.user = user;
        q.item = item;
        q.step = static_cast<std::uint32_t>(step);
        auto it = pair_times.find((static_cast<std::uint64_t>(user) << 32) | item);
        if (it != pair_times.end())
            for (auto ts : it->second)
                if (ts >= tb && ts < te) {
                    q.label = 1;
                    break;
                }
        auto fp = first_purchase.find(user);
        q.cold = (fp == first_purchase.end() || fp->second >= grid_begin);
        out.push_back(q);
    }
    return out;
}

std::vector<Query> materialize_all_queries(const DynamicNetwork& network,
                                           const std::vector<PurchaseRecord>& purchases) {
    std::vector<Query> out;
    for (std::size_t step = 1; step < network.steps(); ++step) {
        auto qs = materialize_queries(network, purchases, step);
        out.insert(out.end(), qs.begin(), qs.end());
    }
    return out;
}

void save_queries(const DynamicNetwork& network, const std::vector<Query>& queries,
                  const std::string& path) {
    std::ofstream os(path);
    if (!os) fail("cannot write '%s'", path.c_str());
    os << "# user item step label cold\n";
    for (const auto& q : queries)
        os << network.users().name(q.user) << ' ' << network.items().name(q.item) << ' ' << q.step
           << ' ' << int(q.label) << ' ' << int(q.cold) << '\n';
    if (!os) fail("write failed for '%s'", path.c_str());
}

std::vector<Query> load_queries(const DynamicNetwork& network, const std::string& path) {
    std::vector<Query> out;
    std::ifstream in(path);
    if (!in) fail("cannot open queries file '%s'", path.c_str());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string user, item;
        unsigned step, label, cold;
        if (!(ss >> user >> item >> step >> label >> cold))
            fail("%s:%zu: malformed query line", path.c_str(), lineno);
        auto u = network.users().find(user);
        auto i = network.items().find(item);
        if (!u || !i) fail("%s:%zu: query references unknown user/item", path.c_str(), lineno);
        out.push_back({*u, *i, step, static_cast<std::uint8_t>(label), cold != 0});
    }
    return out;
}

}  // namespace infnet
