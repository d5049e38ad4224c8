#include "infnet/analytics.hpp"

#include "infnet/stats.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <unordered_map>

namespace infnet {

namespace {

constexpr std::int64_t kWeekSeconds = 604800;

// sorted event times per (user, item) key
class PairTimes {
public:
    void add(const std::string& user, const std::string& item, std::int64_t ts) {
        map_[key(user, item)].push_back(ts);
    }
    void finalize() {
        for (auto& [k, v] : map_) std::sort(v.begin(), v.end());
    }
    bool any_in(const std::string& user, const std::string& item, std::int64_t after,
                std::int64_t upto) const {  // (after, upto]
        auto it = map_.find(key(user, item));
        if (it == map_.end()) return false;
        auto lo = std::upper_bound(it->second.begin(), it->second.end(), after);
        return lo != it->second.end() && *lo <= upto;
    }
    bool any_before(const std::string& user, const std::string& item, std::int64_t t) const {
        auto it = map_.find(key(user, item));
        return it != map_.end() && !it->second.empty() && it->second.front() < t;
    }
    std::optional<std::int64_t> latest_before(const std::string& user, const std::string& item,
                                              std::int64_t t) const {
        auto it = map_.find(key(user, item));
        if (it == map_.end()) return std::nullopt;
        auto lo = std::lower_bound(it->second.begin(), it->second.end(), t);
        if (lo == it->second.begin()) return std::nullopt;
        return *(lo - 1);
    }

private:
    static std::string key(const std::string& user, const std::string& item) {
        return user + '\x1f' + item;
    }
    std::unordered_map<std::string, std::vector<std::int64_t>> map_;
};

PairTimes index_purchases(const std::vector<PurchaseRecord>& purchases) {
    PairTimes pt;
    for (const auto& p : purchases) pt.add(p.user, p.item, p.timestamp);
    pt.finalize();
    return pt;
}

// undirected union-graph adjacency plus merged in+out degrees
struct UnionGraph {
    std::vector<std::vector<std::uint32_t>> neighbors;
    std::vector<int> degree;  // in-degree + out-degree over distinct directed pairs
};

UnionGraph build_union_graph(const DynamicNetwork& network) {
    std::set<std::pair<std::uint32_t, std::uint32_t>> directed;
    for (std::size_t t = 0; t < network.steps(); ++t)
        for (const auto& e : network.events(t)) directed.emplace(e.sender, e.receiver);
    UnionGraph g;
    g.neighbors.resize(network.users().size());
    g.degree.assign(network.users().size(), 0);
    for (auto [s, r] : directed) {
        ++g.degree[s];
        ++g.degree[r];
        g.neighbors[s].push_back(r);
        g.neighbors[r].push_back(s);
    }
    for (auto& v : g.neighbors) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return g;
}

}  // namespace

std::vector<UserItemEvent> taocode_events(const std::vector<DiffusionRecord>& records) {
    std::vector<UserItemEvent> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back({r.receiver, r.item, r.timestamp});
    return out;
}

std::vector<UserItemEvent> browse_events(const std::vector<BrowseRecord>& records) {
    std::vector<UserItemEvent> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back({r.user, r.item, r.timestamp});
    return out;
}

const CiRow* CiTable::find(const std::string& group) const {
    auto it = std::lower_bound(rows.begin(), rows.end(), group,
                               [](const CiRow& r, const std::string& g) { return r.group < g; });
    return (it != rows.end() && it->group == group) ? &*it : nullptr;
}

CiTable conversion_index(const std::vector<UserItemEvent>& records,
                         const std::vector<PurchaseRecord>& purchases, std::int64_t horizon,
                         CiGroupBy group_by, const ItemCatalog& catalog,
                         std::vector<std::string>* warnings) {
    check(horizon > 0, "conversion_index: horizon must be positive");
    auto purchased = index_purchases(purchases);
    std::map<std::string, CiRow> groups;
    for (const auto& r : records) {
        std::string group =
            group_by == CiGroupBy::Item ? r.item : catalog.at(r.item).category;
        auto& row = groups[group];
        row.group = group;
        ++row.total;
        if (purchased.any_in(r.user, r.item, r.timestamp, r.timestamp + horizon)) ++row.converted;
    }
    if (warnings && group_by == CiGroupBy::Category) {
        std::set<std::string> seen;
        for (const auto& [g, row] : groups) seen.insert(g);
        std::set<std::string> all;
        for (const auto& e : catalog.entries()) all.insert(e.category);
        for (const auto& c : all)
            if (!seen.count(c)) warnings->push_back("category " + c + " has no records; excluded");
    }
    CiTable table;
    for (auto& [g, row] : groups) {
        row.ci = ci_value(row.converted, row.total);
        table.rows.push_back(row);
    }
    return table;
}

LiftResult ci_lift_vs_pi(const CiTable& taocode_by_category, const CiTable& browse_by_category,
                         const ItemCatalog& catalog) {
    std::map<std::string, std::pair<double, std::size_t>> pi_sum;  // category -> (sum, count)
    for (const auto& e : catalog.entries()) {
        auto& agg = pi_sum[e.category];
        agg.first += e.price_index;
        agg.second += 1;
    }
    LiftResult out;
    for (const auto& row : taocode_by_category.rows) {
        const CiRow* browse = browse_by_category.find(row.group);
        if (!browse || browse->ci <= 0.0) continue;
        auto it = pi_sum.find(row.group);
        if (it == pi_sum.end()) continue;
        LiftPoint p;
        p.category = row.group;
        p.mean_pi = it->second.first / double(it->second.second);
        p.lift = row.ci / browse->ci;
        out.points.push_back(p);
    }
    if (out.points.size() < 3)
        fail("ci_lift_vs_pi: need at least 3 categories with defined CI Lift, got %zu",
             out.points.size());
    std::vector<double> x, y;
    for (const auto& p : out.points) {
        x.push_back(p.mean_pi);
        y.push_back(p.lift);
    }
    out.slope = ols_slope(x, y);
    out.spearman = spearman_rho(x, y);
    return out;
}

DegreeGapMatrix degree_gap_matrix(const std::vector<DiffusionRecord>& records,
                                  const std::vector<PurchaseRecord>& purchases,
                                  const DynamicNetwork& network, std::int64_t horizon) {
    check(horizon > 0, "degree_gap_matrix: horizon must be positive");
    auto purchased = index_purchases(purchases);
    auto graph = build_union_graph(network);
    DegreeGapMatrix m;
    for (const auto& r : records) {
        auto s = network.users().find(r.sender);
        auto v = network.users().find(r.receiver);
        if (!s || !v) {
            ++m.skipped;
            continue;
        }
        int ds = graph.degree[*s], dr = graph.degree[*v];
        if (ds < 1 || ds > 9 || dr < 1 || dr > 9) {
            ++m.skipped;
            continue;
        }
        auto& cell = m.cells[ds - 1][dr - 1];
        ++cell.total;
        if (purchased.any_in(r.receiver, r.item, r.timestamp, r.timestamp + horizon))
            ++cell.converted;
    }
    return m;
}

std::vector<BucketRow> close_neighbor_curve(const std::vector<DiffusionRecord>& records,
                                            const std::vector<PurchaseRecord>& purchases,
                                            const DynamicNetwork& network, std::int64_t horizon) {
    check(horizon > 0, "close_neighbor_curve: horizon must be positive");
    auto purchased = index_purchases(purchases);
    auto graph = build_union_graph(network);
    PairTimes received;
    for (const auto& r : records) received.add(r.receiver, r.item, r.timestamp);
    received.finalize();

    std::vector<BucketRow> buckets(5);
    const char* labels[5] = {"0", "1", "2", "3", "4+"};
    for (int i = 0; i < 5; ++i) buckets[i].label = labels[i];
    for (const auto& r : records) {
        auto v = network.users().find(r.receiver);
        if (!v) continue;
        int close = 0;
        for (auto x : graph.neighbors[*v]) {
            const std::string& xname = network.users().name(x);
            if (received.any_before(xname, r.item, r.timestamp) &&
                purchased.any_before(xname, r.item, r.timestamp))
                ++close;
        }
        auto& b = buckets[std::min(close, 4)];
        ++b.total;
        if (purchased.any_in(r.receiver, r.item, r.timestamp, r.timestamp + horizon))
            ++b.converted;
    }
    return buckets;
}

TemporalBars temporal_gap_bars(const std::vector<DiffusionRecord>& records,
                               const std::vector<PurchaseRecord>& purchases,
                               const DynamicNetwork& network, std::int64_t horizon) {
    check(horizon > 0, "temporal_gap_bars: horizon must be positive");
    (void)network;
    auto purchased = index_purchases(purchases);
    PairTimes received;
    for (const auto& r : records) received.add(r.receiver, r.item, r.timestamp);
    received.finalize();

    TemporalBars bars;
    const char* labels[5] = {"0", "1", "2", "3", "4+"};
    bars.sender_bought.resize(5);
    bars.sender_not_bought.resize(5);
    for (int i = 0; i < 5; ++i) {
        bars.sender_bought[i].label = labels[i];
        bars.sender_not_bought[i].label = labels[i];
    }
    for (const auto& r : records) {
        int delta = 0;
        if (auto t1 = received.latest_before(r.sender, r.item, r.timestamp)) {
            std::int64_t gap = r.timestamp - *t1;
            // ceiling week buckets with a 4+ overflow; a zero gap still counts
            // as one week since the prior receipt exists
            delta = static_cast<int>((gap + kWeekSeconds - 1) / kWeekSeconds);
            delta = std::clamp(delta, 1, 4);  // index 4 is the 4+ overflow bucket
        }
        bool bought = purchased.any_before(r.sender, r.item, r.timestamp);
        auto& b = (bought ? bars.sender_bought : bars.sender_not_bought)[delta];
        ++b.total;
        if (purchased.any_in(r.receiver, r.item, r.timestamp, r.timestamp + horizon))
            ++b.converted;
    }
    return bars;
}

AnalyticsReport analyze(const std::vector<DiffusionRecord>& diffusion,
                        const std::vector<BrowseRecord>& browse,
                        const std::vector<PurchaseRecord>& purchases,
                        const DynamicNetwork& network, const ItemCatalog& catalog,
                        std::int64_t horizon) {
    AnalyticsReport rep;
    rep.horizon = horizon > 0 ? horizon : network.grid().step_length(0);
    auto tao = taocode_events(diffusion);
    auto bro = browse_events(browse);
    rep.taocode_by_item =
        conversion_index(tao, purchases, rep.horizon, CiGroupBy::Item, catalog, &rep.warnings);
    rep.browse_by_item =
        conversion_index(bro, purchases, rep.horizon, CiGroupBy::Item, catalog, &rep.warnings);
    rep.taocode_by_category =
        conversion_index(tao, purchases, rep.horizon, CiGroupBy::Category, catalog, &rep.warnings);
    rep.browse_by_category =
        conversion_index(bro, purchases, rep.horizon, CiGroupBy::Category, catalog, &rep.warnings);
    for (const auto& r : rep.taocode_by_item.rows) {
        rep.taocode_converted += r.converted;
        rep.taocode_total += r.total;
    }
    for (const auto& r : rep.browse_by_item.rows) {
        rep.browse_converted += r.converted;
        rep.browse_total += r.total;
    }
    rep.lift = ci_lift_vs_pi(rep.taocode_by_category, rep.browse_by_category, catalog);
    rep.degree_matrix = degree_gap_matrix(diffusion, purchases, network, rep.horizon);
    rep.close_neighbors = close_neighbor_curve(diffusion, purchases, network, rep.horizon);
    rep.temporal = temporal_gap_bars(diffusion, purchases, network, rep.horizon);
    return rep;
}

namespace {

void write_ci_table(std::ostream& os, const char* title, const CiTable& t) {
    os << "## " << title << "\n";
    os << "group converted total ci\n";
    for (const auto& r : t.rows)
        os << r.group << ' ' << r.converted << ' ' << r.total << ' ' << strfmt("%.4f", r.ci)
           << '\n';
    os << "\n";
}

void write_buckets(std::ostream& os, const char* title, const std::vector<BucketRow>& rows) {
    os << "## " << title << "\n";
    os << "bucket converted total ci\n";
    for (const auto& b : rows)
        os << b.label << ' ' << b.converted << ' ' << b.total << ' ' << strfmt("%.4f", b.ci())
           << '\n';
    os << "\n";
}

}  // namespace

void write_report(const AnalyticsReport& rep, std::ostream& os) {
    os << "# observational report\n";
    os << "conversion_horizon_seconds " << rep.horizon << "\n\n";
    os << "## overall conversion\n";
    os << "taocode " << rep.taocode_converted << ' ' << rep.taocode_total << ' '
       << strfmt("%.4f", ci_value(rep.taocode_converted, rep.taocode_total)) << '\n';
    os << "browse " << rep.browse_converted << ' ' << rep.browse_total << ' '
       << strfmt("%.4f", ci_value(rep.browse_converted, rep.browse_total)) << "\n\n";
    write_ci_table(os, "CI by category (taocode)", rep.taocode_by_category);
    write_ci_table(os, "CI by category (browse)", rep.browse_by_category);
    os << "## CI Lift vs PI\n";
    os << "slope " << strfmt("%.6f", rep.lift.slope) << "\n";
    os << "spearman " << strfmt("%.6f", rep.lift.spearman) << "\n";
    os << "category mean_pi lift\n";
    for (const auto& p : rep.lift.points)
        os << p.category << ' ' << strfmt("%.4f", p.mean_pi) << ' ' << strfmt("%.4f", p.lift)
           << '\n';
    os << "\n## degree-gap CI matrix (rows sender degree 1-9, cols receiver degree 1-9)\n";
    for (int s = 0; s < 9; ++s) {
        for (int r = 0; r < 9; ++r) {
            const auto& c = rep.degree_matrix.cells[s][r];
            os << (r ? " " : "") << (c.present() ? strfmt("%.2f", c.ci()) : std::string("-"));
        }
        os << '\n';
    }
    os << "skipped " << rep.degree_matrix.skipped << "\n\n";
    write_buckets(os, "CI by close-neighbor count", rep.close_neighbors);
    write_buckets(os, "temporal gap, sender bought", rep.temporal.sender_bought);
    write_buckets(os, "temporal gap, sender did not buy", rep.temporal.sender_not_bought);
    if (!rep.warnings.empty()) {
        os << "## warnings\n";
        for (const auto& w : rep.warnings) os << w << '\n';
    }
}

void write_report_csv(const AnalyticsReport& rep, const std::string& out_dir) {
    auto open = [&](const char* name) {
        std::ofstream os(out_dir + "/" + name);
        if (!os) fail("cannot write '%s/%s'", out_dir.c_str(), name);
        return os;
    };
    {
        auto os = open("ci_by_category.csv");
        os << "mode,category,converted,total,ci\n";
        for (const auto& r : rep.taocode_by_category.rows)
            os << "taocode," << r.group << ',' << r.converted << ',' << r.total << ','
               << strfmt("%.4f", r.ci) << '\n';
        for (const auto& r : rep.browse_by_category.rows)
            os << "browse," << r.group << ',' << r.converted << ',' << r.total << ','
               << strfmt("%.4f", r.ci) << '\n';
    }
    {
        auto os = open("ci_lift_vs_pi.csv");
        os << "category,mean_pi,lift\n";
        for (const auto& p : rep.lift.points)
            os << p.category << ',' << strfmt("%.4f", p.mean_pi) << ','
               << strfmt("%.4f", p.lift) << '\n';
    }
    {
        auto os = open("degree_gap_matrix.csv");
        os << "sender_degree,receiver_degree,converted,total,ci\n";
        for (int s = 0; s < 9; ++s)
            for (int r = 0; r < 9; ++r) {
                const auto& c = rep.degree_matrix.cells[s][r];
                if (!c.present()) continue;
                os << (s + 1) << ',' << (r + 1) << ',' << c.converted << ',' << c.total << ','
                   << strfmt("%.4f", c.ci()) << '\n';
            }
    }
    {
        auto os = open("close_neighbor_curve.csv");
        os << "bucket,converted,total,ci\n";
        for (const auto& b : rep.close_neighbors)
            os << b.label << ',' << b.converted << ',' << b.total << ','
               << strfmt("%.4f", b.ci()) << '\n';
    }
    {
        auto os = open("temporal_gap_bars.csv");
        os << "delta,sender_bought,converted,total,ci\n";
        for (int flag = 0; flag < 2; ++flag) {
            const auto& rows = flag ? rep.temporal.sender_bought : rep.temporal.sender_not_bought;
            for (const auto& b : rows)
                os << b.label << ',' << flag << ',' << b.converted << ',' << b.total << ','
                   << strfmt("%.4f", b.ci()) << '\n';
        }
    }
}

}  // namespace infnet
