#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "infnet/events.hpp"

namespace infnet {

// The paper's privacy mapping f is replaced by identity x 100, so every CI is
// the conversion percentage; any monotone f preserves the studied trends.
inline double ci_value(std::size_t converted, std::size_t total) {
    return total == 0 ? 0.0 : 100.0 * double(converted) / double(total);
}

enum class CiGroupBy { Item, Category };

struct UserItemEvent {
    std::string user;
    std::string item;
    std::int64_t timestamp = 0;
};

// taocode records viewed from the receiver side
std::vector<UserItemEvent> taocode_events(const std::vector<DiffusionRecord>& records);
std::vector<UserItemEvent> browse_events(const std::vector<BrowseRecord>& records);

struct CiRow {
    std::string group;
    std::size_t converted = 0;
    std::size_t total = 0;
    double ci = 0.0;
};

struct CiTable {
    std::vector<CiRow> rows;  // sorted by group id
    const CiRow* find(const std::string& group) const;
};

// A record converts iff the same (user, item) has a purchase strictly after
// the record within `horizon` seconds.
CiTable conversion_index(const std::vector<UserItemEvent>& records,
                         const std::vector<PurchaseRecord>& purchases, std::int64_t horizon,
                         CiGroupBy group_by, const ItemCatalog& catalog,
                         std::vector<std::string>* warnings = nullptr);

struct LiftPoint {
    std::string category;
    double mean_pi = 0.0;
    double lift = 0.0;
};

struct LiftResult {
    double slope = 0.0;
    double spearman = 0.0;
    std::vector<LiftPoint> points;
};

// CI Lift = CI(taocode) / CI(browse) per category, regressed on mean PI.
// Requires at least 3 categories with both CIs defined and browse CI > 0.
LiftResult ci_lift_vs_pi(const CiTable& taocode_by_category, const CiTable& browse_by_category,
                         const ItemCatalog& catalog);

struct CiCell {
    std::size_t converted = 0;
    std::size_t total = 0;
    bool present() const { return total > 0; }
    double ci() const { return ci_value(converted, total); }
};

// CI per (sender degree, receiver degree) with both degrees in 1..9; degrees
// are in+out degree over the step-merged network with duplicate directed
// edges collapsed.
struct DegreeGapMatrix {
    std::array<std::array<CiCell, 9>, 9> cells{};  // [sender_degree-1][receiver_degree-1]
    std::size_t skipped = 0;                       // records with a degree outside 1..9
};

DegreeGapMatrix degree_gap_matrix(const std::vector<DiffusionRecord>& records,
                                  const std::vector<PurchaseRecord>& purchases,
                                  const DynamicNetwork& network, std::int64_t horizon);

struct BucketRow {
    std::string label;
    std::size_t converted = 0;
    std::size_t total = 0;
    double ci() const { return ci_value(converted, total); }
};

// CI bucketed by the receiver's close-neighbor count {0,1,2,3,4+}: union-graph
// neighbors who both received and purchased the item strictly before the record.
std::vector<BucketRow> close_neighbor_curve(const std::vector<DiffusionRecord>& records,
                                            const std::vector<PurchaseRecord>& purchases,
                                            const DynamicNetwork& network, std::int64_t horizon);

// CI of u2->u3 records grouped by the week gap delta since u2's most recent
// receipt of the same item (0 = never received) and by whether u2 purchased
// the item before sending.
struct TemporalBars {
    std::vector<BucketRow> sender_bought;      // delta 0,1,2,3,4+
    std::vector<BucketRow> sender_not_bought;
};

TemporalBars temporal_gap_bars(const std::vector<DiffusionRecord>& records,
                               const std::vector<PurchaseRecord>& purchases,
                               const DynamicNetwork& network, std::int64_t horizon);

struct AnalyticsReport {
    std::int64_t horizon = 0;
    CiTable taocode_by_item, browse_by_item;
    CiTable taocode_by_category, browse_by_category;
    std::size_t taocode_converted = 0, taocode_total = 0;
    std::size_t browse_converted = 0, browse_total = 0;
    LiftResult lift;
    DegreeGapMatrix degree_matrix;
    std::vector<BucketRow> close_neighbors;
    TemporalBars temporal;
    std::vector<std::string> warnings;
};

// Runs all five observational studies. horizon <= 0 selects one grid step.
AnalyticsReport analyze(const std::vector<DiffusionRecord>& diffusion,
                        const std::vector<BrowseRecord>& browse,
                        const std::vector<PurchaseRecord>& purchases,
                        const DynamicNetwork& network, const ItemCatalog& catalog,
                        std::int64_t horizon = 0);

void write_report(const AnalyticsReport& report, std::ostream& os);
void write_report_csv(const AnalyticsReport& report, const std::string& out_dir);

}  // namespace infnet
