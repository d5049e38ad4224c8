#include "infnet/config.hpp"

#include <charconv>
#include <fstream>

namespace infnet {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

template <class T>
T parse_num(const std::string& key, const std::string& value) {
    T v{};
    if constexpr (std::is_floating_point_v<T>) {
        try {
            std::size_t pos = 0;
            v = static_cast<T>(std::stod(value, &pos));
            if (pos != value.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            fail("config: key '%s' expects a number, got '%s'", key.c_str(), value.c_str());
        }
    } else {
        auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec != std::errc{} || p != value.data() + value.size())
            fail("config: key '%s' expects an integer, got '%s'", key.c_str(), value.c_str());
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "yes") return true;
    if (value == "0" || value == "false" || value == "no") return false;
    fail("config: key '%s' expects a boolean, got '%s'", key.c_str(), value.c_str());
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open config file '%s'", path.c_str());
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            fail("%s:%zu: expected 'key = value'", path.c_str(), lineno);
        try {
            cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const Error& e) {
            fail("%s:%zu: %s", path.c_str(), lineno, e.what());
        }
    }
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "seed") seed = parse_num<std::uint64_t>(key, value);
    else if (key == "f64") f64 = parse_bool(key, value);
    else if (key == "threads") threads = parse_num<int>(key, value);
    else if (key == "out") out_dir = value;

    else if (key == "paths.diffusion") path_diffusion = value;
    else if (key == "paths.browse") path_browse = value;
    else if (key == "paths.purchase") path_purchase = value;
    else if (key == "paths.catalog") path_catalog = value;
    else if (key == "paths.network") path_network = value;
    else if (key == "paths.queries") path_queries = value;
    else if (key == "paths.checkpoint") path_checkpoint = value;

    else if (key == "grid.start") grid_start = parse_num<std::int64_t>(key, value);
    else if (key == "grid.step_seconds") grid_step_seconds = parse_num<std::int64_t>(key, value);
    else if (key == "grid.steps") grid_steps = parse_num<std::size_t>(key, value);

    else if (key == "features.price_bins") features.price_bins = parse_num<int>(key, value);
    else if (key == "features.lookback_seconds")
        features.purchase_lookback = parse_num<std::int64_t>(key, value);
    else if (key == "features.history_window") features.history_window = parse_num<int>(key, value);

    else if (key == "synth.users") synth.users = parse_num<std::size_t>(key, value);
    else if (key == "synth.items") synth.items = parse_num<std::size_t>(key, value);
    else if (key == "synth.categories") synth.categories = parse_num<std::size_t>(key, value);
    else if (key == "synth.pi_min") synth.pi_min = parse_num<int>(key, value);
    else if (key == "synth.pi_max") synth.pi_max = parse_num<int>(key, value);
    else if (key == "synth.base_share_rate") synth.base_share_rate = parse_num<double>(key, value);
    else if (key == "synth.cascade_prob") synth.cascade_prob = parse_num<double>(key, value);
    else if (key == "synth.multicast_prob") synth.multicast_prob = parse_num<double>(key, value);
    else if (key == "synth.max_multicast") synth.max_multicast = parse_num<int>(key, value);
    else if (key == "synth.item_zipf") synth.item_zipf = parse_num<double>(key, value);
    else if (key == "synth.browse_rate") synth.browse_rate = parse_num<double>(key, value);
    else if (key == "synth.pre_span_fraction")
        synth.pre_span_fraction = parse_num<double>(key, value);
    else if (key == "synth.beta0") synth.beta0 = parse_num<double>(key, value);
    else if (key == "synth.beta_taocode") synth.beta_taocode = parse_num<double>(key, value);
    else if (key == "synth.exposure_decay") synth.exposure_decay = parse_num<double>(key, value);
    else if (key == "synth.exposure_cap") synth.exposure_cap = parse_num<double>(key, value);
    else if (key == "synth.beta_neighbors") synth.beta_neighbors = parse_num<double>(key, value);
    else if (key == "synth.beta_sender_bought")
        synth.beta_sender_bought = parse_num<double>(key, value);
    else if (key == "synth.beta_price") synth.beta_price = parse_num<double>(key, value);
    else if (key == "synth.beta_gap") synth.beta_gap = parse_num<double>(key, value);
    else if (key == "synth.contact_edges_per_user")
        synth.contact_edges_per_user = parse_num<int>(key, value);
    else if (key == "synth.triad_prob") synth.triad_prob = parse_num<double>(key, value);
    else if (key == "synth.max_degree") synth.max_degree = parse_num<int>(key, value);

    else if (key == "model.hidden") model.hidden = parse_num<int>(key, value);
    else if (key == "model.structural_layers")
        model.structural_layers = parse_num<int>(key, value);
    else if (key == "model.diffusion_layers") model.diffusion_layers = parse_num<int>(key, value);
    else if (key == "model.encoder") model.encoder = seq_encoder_from_string(value);
    else if (key == "model.edge_attention") model.use_edge_attention = parse_bool(key, value);
    else if (key == "model.structural_block") model.use_structural_block = parse_bool(key, value);
    else if (key == "model.mask_user") model.mask_user_features = parse_bool(key, value);
    else if (key == "model.mask_item") model.mask_item_features = parse_bool(key, value);
    else if (key == "model.mask_taocode") model.mask_taocode_features = parse_bool(key, value);

    else if (key == "train.fraction") train_fraction = parse_num<double>(key, value);
    else if (key == "train.lr") train.lr = parse_num<double>(key, value);
    else if (key == "train.batch_size") train.batch_size = parse_num<int>(key, value);
    else if (key == "train.max_epochs") train.max_epochs = parse_num<int>(key, value);
    else if (key == "train.patience") train.patience = parse_num<int>(key, value);

    else if (key == "baseline.lr") baseline.lr = parse_num<double>(key, value);
    else if (key == "baseline.max_epochs") baseline.max_epochs = parse_num<int>(key, value);
    else if (key == "baseline.patience") baseline.patience = parse_num<int>(key, value);

    else if (key == "analytics.horizon_seconds")
        analytics_horizon = parse_num<std::int64_t>(key, value);
    else if (key == "analytics.csv") analytics_csv = parse_bool(key, value);

    else fail("config: unknown key '%s'", key.c_str());
}

void RunConfig::finalize() {
    auto def = [&](std::string& slot, const char* name) {
        if (slot.empty()) slot = out_dir + "/" + name;
    };
    def(path_diffusion, "diffusion.txt");
    def(path_browse, "browse.txt");
    def(path_purchase, "purchase.txt");
    def(path_catalog, "catalog.txt");
    def(path_network, "network.bin");
    def(path_queries, "queries.txt");
    def(path_checkpoint, "model.ckpt");

    synth.seed = seed;
    synth.grid_start = grid_start;
    synth.step_seconds = grid_step_seconds;
    synth.grid_steps = grid_steps;

    train.seed = seed;
    train.threads = threads;
    baseline.seed = seed;
    model.validate();
}

}  // namespace infnet
