// Command-line front end: gen -> build -> queries -> analyze/train/eval,
// plus the LR baseline and the ablation runner. All knobs come from a flat
// dotted-key config file; flags override file keys with a logged notice.

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "infnet/analytics.hpp"
#include "infnet/config.hpp"
#include "infnet/eval.hpp"
#include "infnet/synth.hpp"

namespace infnet {
namespace {

int log_level() {  // 0 error, 1 warn, 2 info, 3 debug
    const char* env = std::getenv("INFNET_LOG");
    if (!env) return 2;
    std::string v = env;
    if (v == "error") return 0;
    if (v == "warn") return 1;
    if (v == "debug") return 3;
    return 2;
}

void notice(const std::string& msg) {
    if (log_level() >= 2) std::fprintf(stderr, "notice: %s\n", msg.c_str());
}

struct Options {
    std::string config_path;
    std::string out_override;
    std::string seed_override;
    std::vector<std::string> sets;
    bool f32 = false;
    bool f64 = false;
    int threads = -1;
};

void add_common(CLI::App* cmd, Options& opt) {
    cmd->add_option("--config", opt.config_path, "run configuration file (dotted keys)");
    cmd->add_option("--out", opt.out_override, "output directory (overrides config key 'out')");
    cmd->add_option("--seed", opt.seed_override, "master seed (overrides config key 'seed')");
    cmd->add_option("--set", opt.sets, "override any config key, e.g. --set model.hidden=32")
        ->take_all();
    cmd->add_flag("--f32", opt.f32, "train/evaluate in 32-bit floats");
    cmd->add_flag("--f64", opt.f64, "train/evaluate in 64-bit floats (default)");
    cmd->add_option("--threads", opt.threads, "worker threads (0 = hardware)");
}

RunConfig load_config(const Options& opt) {
    RunConfig cfg =
        opt.config_path.empty() ? RunConfig::defaults() : RunConfig::from_file(opt.config_path);
    auto override_key = [&](const std::string& key, const std::string& value) {
        cfg.set(key, value);
        notice("flag override: " + key + " = " + value);
    };
    if (!opt.out_override.empty()) override_key("out", opt.out_override);
    if (!opt.seed_override.empty()) override_key("seed", opt.seed_override);
    if (opt.f32) override_key("f64", "0");
    if (opt.f64) override_key("f64", "1");
    if (opt.threads >= 0) override_key("threads", std::to_string(opt.threads));
    for (const auto& s : opt.sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos) fail("--set expects key=value, got '%s'", s.c_str());
        override_key(s.substr(0, eq), s.substr(eq + 1));
    }
    cfg.finalize();
    std::filesystem::create_directories(cfg.out_dir);
    return cfg;
}

// one writer per output directory
class OutputLock {
public:
    explicit OutputLock(const std::string& out_dir) : path_(out_dir + "/.lock") {
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            fail("output directory '%s' is locked by another run (remove %s if stale)",
                 out_dir.c_str(), path_.c_str());
    }
    ~OutputLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            ::unlink(path_.c_str());
        }
    }
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    std::string path_;
    int fd_ = -1;
};

void require_file(const std::string& path, const char* hint) {
    if (!std::filesystem::exists(path))
        fail("missing input '%s' (%s)", path.c_str(), hint);
}

void write_kv_file(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& kv) {
    std::ofstream os(path);
    if (!os) fail("cannot write '%s'", path.c_str());
    for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
}

std::string fmt_metric(const MetricResult& m, const std::string& prefix,
                       std::vector<std::pair<std::string, std::string>>& kv) {
    kv.emplace_back(prefix + ".auc_roc", strfmt("%.6f", m.auc_roc));
    kv.emplace_back(prefix + ".auc_pr", strfmt("%.6f", m.auc_pr));
    kv.emplace_back(prefix + ".n", std::to_string(m.n));
    kv.emplace_back(prefix + ".positives", std::to_string(m.positives));
    auto stratum = [&](const char* name, const std::optional<StratumResult>& s) {
        if (!s) {
            kv.emplace_back(prefix + "." + name, "absent");
            return;
        }
        kv.emplace_back(prefix + "." + name + ".auc_roc", strfmt("%.6f", s->auc_roc));
        kv.emplace_back(prefix + "." + name + ".auc_pr", strfmt("%.6f", s->auc_pr));
        kv.emplace_back(prefix + "." + name + ".n", std::to_string(s->n));
        kv.emplace_back(prefix + "." + name + ".positives", std::to_string(s->positives));
    };
    stratum("cold", m.cold);
    stratum("warm", m.warm);
    return strfmt("auc_roc=%.4f auc_pr=%.4f n=%zu pos=%zu", m.auc_roc, m.auc_pr, m.n,
                  m.positives);
}

struct LoadedData {
    DynamicNetwork network;
    std::vector<PurchaseRecord> purchases;
    ItemCatalog catalog;
    std::vector<Query> queries;
};

LoadedData load_training_inputs(const RunConfig& cfg) {
    require_file(cfg.path_network, "run the `build` subcommand first");
    require_file(cfg.path_queries, "run the `queries` subcommand first");
    require_file(cfg.path_purchase, "purchase log");
    require_file(cfg.path_catalog, "item catalog");
    LoadedData d;
    d.network = DynamicNetwork::load_file(cfg.path_network);
    d.purchases = load_purchase_records(cfg.path_purchase);
    d.catalog = load_catalog(cfg.path_catalog);
    d.queries = load_queries(d.network, cfg.path_queries);
    return d;
}

void write_train_log(const std::string& path, const TrainResult& r) {
    std::ofstream os(path);
    if (!os) fail("cannot write '%s'", path.c_str());
    os << "# epoch train_loss valid_auc_roc valid_auc_pr\n";
    for (const auto& e : r.log)
        os << e.epoch << ' ' << strfmt("%.6f", e.train_loss) << ' '
           << strfmt("%.6f", e.valid_auc_roc) << ' ' << strfmt("%.6f", e.valid_auc_pr) << '\n';
    os << "# best_epoch " << r.best_epoch << "\n";
}

int cmd_gen(const RunConfig& cfg) {
    OutputLock lock(cfg.out_dir);
    auto logs = generate(cfg.synth);
    write_logs(logs, cfg.out_dir);
    std::printf("gen: %zu diffusion, %zu browse, %zu purchase records, %zu items -> %s\n",
                logs.diffusion.size(), logs.browse.size(), logs.purchases.size(),
                logs.catalog.size(), cfg.out_dir.c_str());
    return 0;
}

int cmd_build(const RunConfig& cfg) {
    OutputLock lock(cfg.out_dir);
    require_file(cfg.path_diffusion, "diffusion log (generate one with `gen`)");
    auto records = load_diffusion_records(cfg.path_diffusion);
    auto network = build_dynamic_network(records, cfg.grid());
    network.save_file(cfg.path_network);
    std::printf("build: %u users, %u items, %zu events over %zu steps (%zu dropped) -> %s\n",
                network.users().size(), network.items().size(), network.event_count(),
                network.steps(), network.dropped(), cfg.path_network.c_str());
    return 0;
}

int cmd_queries(const RunConfig& cfg) {
    OutputLock lock(cfg.out_dir);
    require_file(cfg.path_network, "run the `build` subcommand first");
    require_file(cfg.path_purchase, "purchase log");
    auto network = DynamicNetwork::load_file(cfg.path_network);
    auto purchases = load_purchase_records(cfg.path_purchase);
    auto queries = materialize_all_queries(network, purchases);
    save_queries(network, queries, cfg.path_queries);
    std::size_t positives = 0, cold = 0;
    for (const auto& q : queries) {
        positives += q.label;
        cold += q.cold;
    }
    std::printf("queries: %zu total, %zu positive, %zu cold -> %s\n", queries.size(), positives,
                cold, cfg.path_queries.c_str());
    return 0;
}

int cmd_analyze(const RunConfig& cfg) {
    OutputLock lock(cfg.out_dir);
    require_file(cfg.path_network, "run the `build` subcommand first");
    require_file(cfg.path_diffusion, "diffusion log");
    require_file(cfg.path_browse, "browse log");
    require_file(cfg.path_purchase, "purchase log");
    require_file(cfg.path_catalog, "item catalog");
    auto network = DynamicNetwork::load_file(cfg.path_network);
    auto diffusion = load_diffusion_records(cfg.path_diffusion);
    auto browse = load_browse_records(cfg.path_browse);
    auto purchases = load_purchase_records(cfg.path_purchase);
    auto catalog = load_catalog(cfg.path_catalog);
    auto report = analyze(diffusion, browse, purchases, network, catalog, cfg.analytics_horizon);
    const std::string path = cfg.out_dir + "/analytics.txt";
    {
        std::ofstream os(path);
        if (!os) fail("cannot write '%s'", path.c_str());
        write_report(report, os);
    }
    if (cfg.analytics_csv) write_report_csv(report, cfg.out_dir);
    std::printf("analyze: CI(taocode)=%.2f CI(browse)=%.2f lift-slope=%.4f spearman=%.3f -> %s\n",
                ci_value(report.taocode_converted, report.taocode_total),
                ci_value(report.browse_converted, report.browse_total), report.lift.slope,
                report.lift.spearman, path.c_str());
    return 0;
}

template <class Real>
int run_train(const RunConfig& cfg) {
    auto data = load_training_inputs(cfg);
    Sampler sampler(data.network, data.catalog, data.purchases, cfg.features);
    SubgraphCache cache(sampler, data.queries);
    cache.prefetch(cfg.threads);
    auto split = split_queries(data.queries, cfg.train_fraction, cfg.seed);

    Rng init_rng(derive_seed(cfg.seed, "model-init"));
    auto params = ModelParams<Real>::init(cfg.model, cfg.features.node_dim(),
                                          cfg.features.price_bins, init_rng);
    InfNetModel<Real> model(cfg.model, std::move(params));
    notice(strfmt("training InfNet (%zu parameters, %zu train / %zu valid / %zu test queries)",
                  model.params().count(), split.train.size(), split.valid.size(),
                  split.test.size()));
    TrainOptions topt = cfg.train;
    topt.verbose = log_level() >= 3;
    auto result = train_model(model, cache, split, topt);

    Checkpoint ck;
    ck.meta.emplace_back("model_config", cfg.model.serialize());
    ck.meta.emplace_back("dtype", sizeof(Real) == 4 ? "f32" : "f64");
    ck.meta.emplace_back("seed", std::to_string(cfg.seed));
    model.params().save(ck);
    ck.save(cfg.path_checkpoint);
    write_train_log(cfg.out_dir + "/train_log.txt", result);

    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("command", "train");
    kv.emplace_back("seed", std::to_string(cfg.seed));
    kv.emplace_back("precision", cfg.f64 ? "f64" : "f32");
    kv.emplace_back("encoder", to_string(cfg.model.encoder));
    kv.emplace_back("parameters", std::to_string(model.params().count()));
    kv.emplace_back("best_epoch", std::to_string(result.best_epoch));
    kv.emplace_back("best_valid_auc_pr", strfmt("%.6f", result.best_valid_auc_pr));
    auto line = fmt_metric(result.test, "test", kv);
    write_kv_file(cfg.out_dir + "/run_summary.txt", kv);
    std::printf("train: %s best_epoch=%d -> %s\n", line.c_str(), result.best_epoch,
                cfg.path_checkpoint.c_str());
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    OutputLock lock(cfg.out_dir);
    return cfg.f64 ? run_train<double>(cfg) : run_train<float>(cfg);
}

template <class Real>
int run_eval(const RunConfig& cfg) {
    auto data = load_training_inputs(cfg);
    require_file(cfg.path_checkpoint, "run the `train` subcommand first");
    auto ck = Checkpoint::load(cfg.path_checkpoint);
    const std::string* cfg_text = ck.find_meta("model_config");
    check(cfg_text != nullptr, "checkpoint is missing the model_config metadata");
    ModelConfig mcfg = ModelConfig::deserialize(*cfg_text);

    Sampler sampler(data.network, data.catalog, data.purchases, cfg.features);
    SubgraphCache cache(sampler, data.queries);
    auto split = split_queries(data.queries, cfg.train_fraction, cfg.seed);

    Rng init_rng(derive_seed(cfg.seed, "model-init"));
    auto params = ModelParams<Real>::init(mcfg, cfg.features.node_dim(), cfg.features.price_bins,
                                          init_rng);
    params.restore(ck);
    InfNetModel<Real> model(mcfg, std::move(params));
    auto metrics = evaluate_on(model, cache, split.test, cfg.threads);

    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("command", "eval");
    kv.emplace_back("seed", std::to_string(cfg.seed));
    kv.emplace_back("encoder", to_string(mcfg.encoder));
    auto line = fmt_metric(metrics, "test", kv);
    write_kv_file(cfg.out_dir + "/eval_summary.txt", kv);
    std::printf("eval: %s\n", line.c_str());
    return 0;
}

int cmd_eval(const RunConfig& cfg) {
    OutputLock lock(cfg.out_dir);
    return cfg.f64 ? run_eval<double>(cfg) : run_eval<float>(cfg);
}

int cmd_baseline(const RunConfig& cfg) {
    OutputLock lock(cfg.out_dir);
    auto data = load_training_inputs(cfg);
    auto split = split_queries(data.queries, cfg.train_fraction, cfg.seed);
    auto result = lr_baseline(data.queries, data.network, data.purchases, data.catalog,
                              cfg.features, split, cfg.baseline);
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("command", "baseline");
    kv.emplace_back("seed", std::to_string(cfg.seed));
    auto line = fmt_metric(result.test, "test", kv);
    write_kv_file(cfg.out_dir + "/baseline_summary.txt", kv);
    std::printf("baseline: %s\n", line.c_str());
    return 0;
}

template <class Real>
int run_ablate(const RunConfig& cfg) {
    auto data = load_training_inputs(cfg);
    Sampler sampler(data.network, data.catalog, data.purchases, cfg.features);
    SubgraphCache cache(sampler, data.queries);
    cache.prefetch(cfg.threads);
    auto split = split_queries(data.queries, cfg.train_fraction, cfg.seed);
    auto variants = table3_variants(cfg.model);
    TrainOptions topt = cfg.train;
    topt.verbose = log_level() >= 3;
    auto rows = ablate<Real>(cfg.model, variants, sampler, cache, split, topt, cfg.seed);

    const std::string path = cfg.out_dir + "/ablation.txt";
    std::ofstream os(path);
    if (!os) fail("cannot write '%s'", path.c_str());
    os << "# variant auc_roc auc_pr best_epoch\n";
    for (const auto& r : rows)
        os << r.name << ' ' << strfmt("%.6f", r.result.test.auc_roc) << ' '
           << strfmt("%.6f", r.result.test.auc_pr) << ' ' << r.result.best_epoch << '\n';
    os.close();
    std::printf("ablate: %zu rows (base + %zu variants) -> %s\n", rows.size(), variants.size(),
                path.c_str());
    for (const auto& r : rows)
        std::printf("  %-18s auc_roc=%.4f auc_pr=%.4f\n", r.name.c_str(), r.result.test.auc_roc,
                    r.result.test.auc_pr);
    return 0;
}

int cmd_ablate(const RunConfig& cfg) {
    OutputLock lock(cfg.out_dir);
    return cfg.f64 ? run_ablate<double>(cfg) : run_ablate<float>(cfg);
}

}  // namespace
}  // namespace infnet

int main(int argc, char** argv) {
    CLI::App app{"interest-diffusion purchase prediction pipeline"};
    app.require_subcommand(1);

    struct Cmd {
        const char* name;
        const char* help;
        int (*fn)(const infnet::RunConfig&);
    };
    const Cmd cmds[] = {
        {"gen", "generate seeded synthetic sharing/browsing/purchase logs", infnet::cmd_gen},
        {"build", "build the dynamic diffusion network snapshot from logs", infnet::cmd_build},
        {"queries", "materialize labeled prediction queries", infnet::cmd_queries},
        {"analyze", "run the observational studies and write the report", infnet::cmd_analyze},
        {"train", "train InfNet and write a checkpoint", infnet::cmd_train},
        {"eval", "evaluate a checkpoint on the test split", infnet::cmd_eval},
        {"baseline", "train and evaluate the logistic-regression baseline",
         infnet::cmd_baseline},
        {"ablate", "train the base model and ablation variants", infnet::cmd_ablate},
    };

    std::vector<infnet::Options> opts(std::size(cmds));
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < std::size(cmds); ++i) {
        auto* sub = app.add_subcommand(cmds[i].name, cmds[i].help);
        infnet::add_common(sub, opts[i]);
        subs.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);

    for (std::size_t i = 0; i < std::size(cmds); ++i) {
        if (!subs[i]->parsed()) continue;
        try {
            auto cfg = infnet::load_config(opts[i]);
            return cmds[i].fn(cfg);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return 1;
        }
    }
    return 1;
}
