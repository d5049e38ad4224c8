#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "infnet/events.hpp"

namespace infnet {

// Seeded generator of sharing/browsing/purchase logs with planted diffusion
// effects. Purchase decisions follow a single logistic link:
//   receipt:  sigmoid(beta0 + beta_taocode * exposure + beta_neighbors * closeNbrs
//                     + beta_sender_bought * 1[sender bought item before]
//                     + beta_price * PI + beta_gap * |deg_s - deg_r|)
//   browse:   sigmoid(beta0 + beta_price * PI)
// where exposure counts the user's receipts of the item, decayed per week and
// capped, so repeated recent shares reinforce. The exposure, close-neighbor,
// sender-bought and degree-gap terms are graph- and history-derived, which a
// feature-only baseline cannot fully see.
struct SynthConfig {
    std::size_t users = 50000;
    std::size_t items = 600;
    std::size_t categories = 20;
    double item_zipf = 1.1;  // share popularity skew; 0 = uniform
    int pi_min = 0;
    int pi_max = 99;

    std::int64_t grid_start = 2419200;  // four weeks in, leaving room for history
    std::int64_t step_seconds = 604800;  // one week
    std::size_t grid_steps = 8;

    double base_share_rate = 0.15;   // spontaneous share events per user
    double cascade_prob = 0.50;      // probability a receipt is forwarded
    double multicast_prob = 0.40;    // per-candidate probability on each share
    int max_multicast = 3;           // receivers considered per share event
    double browse_rate = 1.5;        // browse events per user
    double pre_span_fraction = 0.5;  // browsing history before the grid

    double beta0 = -1.9;
    double beta_taocode = 1.0;
    double exposure_decay = 0.75; // per-week weight of older receipts
    double exposure_cap = 4.0;
    double beta_neighbors = 1.2;
    double beta_sender_bought = 2.0;
    double beta_price = -0.03;
    double beta_gap = 0.07;

    int contact_edges_per_user = 2;   // attachment count in the contact graph
    double triad_prob = 0.65;         // clustering strength
    int max_degree = 60;

    std::uint64_t seed = 1;
};

struct SynthOutput {
    ItemCatalog catalog;
    std::vector<DiffusionRecord> diffusion;
    std::vector<BrowseRecord> browse;
    std::vector<PurchaseRecord> purchases;
    TimeGrid grid;
};

SynthOutput generate(const SynthConfig& cfg);

// writes catalog.txt, diffusion.txt, browse.txt, purchase.txt under out_dir
void write_logs(const SynthOutput& logs, const std::string& out_dir);

}  // namespace infnet
