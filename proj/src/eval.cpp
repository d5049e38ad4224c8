#include "infnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include "infnet/grad_check.hpp"
#include "infnet/optimizer.hpp"
#include "infnet/rng.hpp"

namespace infnet {

namespace {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// static contiguous chunks keep the reduction order independent of timing
template <class Fn>
void parallel_chunks(std::size_t n, int threads, Fn fn) {
    threads = std::max(1, std::min<int>(threads, static_cast<int>(n == 0 ? 1 : n)));
    if (threads == 1) {
        fn(0, 0, n);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const std::size_t lo = std::min(n, t * chunk);
        const std::size_t hi = std::min(n, lo + chunk);
        pool.emplace_back([&fn, t, lo, hi]() { fn(t, lo, hi); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace

Split split_queries(const std::vector<Query>& queries, double train_fraction,
                    std::uint64_t seed) {
    check(train_fraction > 0.0 && train_fraction < 1.0, "split: train fraction must be in (0,1)");
    std::set<std::uint32_t> steps;
    for (const auto& q : queries) steps.insert(q.step);
    if (steps.size() < 3)
        fail("split: need queries on at least 3 distinct steps, got %zu", steps.size());
    const std::uint32_t test_step = *steps.rbegin();

    Split split;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (queries[i].step == test_step)
            split.test.push_back(i);
        else
            rest.push_back(i);
    }
    check(!rest.empty(), "split: no queries before the test step");
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(rest);
    const std::size_t n_train =
        static_cast<std::size_t>(std::llround(train_fraction * double(rest.size())));
    split.train.assign(rest.begin(), rest.begin() + n_train);
    split.valid.assign(rest.begin() + n_train, rest.end());
    return split;
}

std::vector<Query> shuffle_labels(const std::vector<Query>& queries, std::uint64_t seed) {
    std::vector<std::uint8_t> labels;
    labels.reserve(queries.size());
    for (const auto& q : queries) labels.push_back(q.label);
    Rng rng(derive_seed(seed, "label-shuffle"));
    rng.shuffle(labels);
    auto out = queries;
    for (std::size_t i = 0; i < out.size(); ++i) out[i].label = labels[i];
    return out;
}

SubgraphCache::SubgraphCache(const Sampler& sampler, const std::vector<Query>& queries)
    : sampler_(&sampler), queries_(queries), cache_(queries.size()) {}

void SubgraphCache::prefetch(int threads) {
    parallel_chunks(queries_.size(), resolve_threads(threads),
                    [&](int, std::size_t lo, std::size_t hi) {
                        for (std::size_t i = lo; i < hi; ++i)
                            if (!cache_[i])
                                cache_[i] = std::make_unique<QuerySubgraph>(
                                    sampler_->sample_subgraph(queries_[i]));
                    });
}

const QuerySubgraph& SubgraphCache::get(std::size_t query_id) {
    auto& slot = cache_.at(query_id);
    if (!slot) slot = std::make_unique<QuerySubgraph>(sampler_->sample_subgraph(queries_[query_id]));
    return *slot;
}

void SubgraphCache::set_labels(const std::vector<Query>& queries) {
    check(queries.size() == queries_.size(), "subgraph cache: label list size mismatch");
    for (std::size_t i = 0; i < queries.size(); ++i) {
        check(queries[i].user == queries_[i].user && queries[i].item == queries_[i].item &&
                  queries[i].step == queries_[i].step,
              "subgraph cache: labels belong to a different query list");
        queries_[i].label = queries[i].label;
        if (cache_[i]) cache_[i]->query.label = queries[i].label;
    }
}

template <class Real>
std::vector<double> score_queries(const InfNetModel<Real>& model, SubgraphCache& cache,
                                  const std::vector<std::size_t>& ids, int threads) {
    InfNetModel<Real> frozen(model.config(), model.params().frozen_clone());
    std::vector<double> scores(ids.size());
    parallel_chunks(ids.size(), resolve_threads(threads), [&](int, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            scores[i] = double(frozen.score(cache.get(ids[i])));
    });
    return scores;
}

template <class Real>
MetricResult evaluate_on(const InfNetModel<Real>& model, SubgraphCache& cache,
                         const std::vector<std::size_t>& ids, int threads) {
    auto scores = score_queries(model, cache, ids, threads);
    std::vector<std::uint8_t> labels(ids.size()), cold(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        labels[i] = cache.queries()[ids[i]].label;
        cold[i] = cache.queries()[ids[i]].cold ? 1 : 0;
    }
    return evaluate_scores(scores, labels, cold);
}

template <class Real>
TrainResult train_model(InfNetModel<Real>& model, SubgraphCache& cache, const Split& split,
                        const TrainOptions& opt) {
    check(!split.train.empty(), "train: empty training split");
    check(!split.valid.empty(), "train: empty validation split");
    const int threads = resolve_threads(opt.threads);
    auto params = model.params().all();
    auto state = AdamState<Real>::init(std::span<const Tensor<Real>>(params), opt.lr);

    Rng shuffle_rng(derive_seed(opt.seed, "train-shuffle"));
    TrainResult result;
    ModelParams<Real> best = model.params().clone();
    double best_pr = -1.0;
    int best_epoch = -1;
    const int max_epochs = opt.patience == 0 ? 1 : opt.max_epochs;

    std::vector<std::size_t> order = split.train;
    for (int epoch = 0; epoch < max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(opt.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
            const std::size_t bn = end - start;

            std::vector<ModelParams<Real>> clones;
            clones.reserve(threads);
            for (int t = 0; t < threads; ++t) clones.push_back(model.params().clone());
            std::vector<double> losses(threads, 0.0);

            parallel_chunks(bn, threads, [&](int tid, std::size_t lo, std::size_t hi) {
                InfNetModel<Real> worker(model.config(), clones[tid]);
                for (std::size_t i = lo; i < hi; ++i) {
                    const auto& sg = cache.get(order[start + i]);
                    Tape<Real> tape;
                    auto pred = worker.predict(tape, sg);
                    auto loss = binary_cross_entropy(tape, pred,
                                                     std::vector<Real>{Real(sg.query.label)});
                    auto scaled = scale(tape, loss, Real(1.0 / double(bn)));
                    tape.backward(scaled);
                    losses[tid] += double(loss.value(0));
                }
            });

            // fixed-order reduction of thread-local gradients
            auto main = model.params().all();
            for (int t = 0; t < threads; ++t) {
                auto part = clones[t].all();
                for (std::size_t p = 0; p < main.size(); ++p) {
                    const auto& src = part[p].grad_buffer();
                    auto& dst = main[p].grad_buffer();
                    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
                }
            }
            adam_step(std::span<Tensor<Real>>(main), state);
            model.params().zero_grads();
            double batch_loss = 0.0;
            for (double l : losses) batch_loss += l;
            batch_loss /= double(bn);
            if (!std::isfinite(batch_loss))
                fail("training diverged: loss is not finite at epoch %d", epoch + 1);
            epoch_loss += batch_loss;
            ++batches;
        }
        epoch_loss /= double(std::max<std::size_t>(1, batches));

        auto valid = evaluate_on(model, cache, split.valid, threads);
        EpochLog log;
        log.epoch = epoch + 1;
        log.train_loss = epoch_loss;
        log.valid_auc_roc = valid.auc_roc;
        log.valid_auc_pr = valid.auc_pr;
        result.log.push_back(log);
        if (opt.verbose)
            std::fprintf(stderr, "epoch %d loss %.5f valid roc %.4f pr %.4f\n", log.epoch,
                         log.train_loss, log.valid_auc_roc, log.valid_auc_pr);

        if (valid.auc_pr > best_pr) {
            best_pr = valid.auc_pr;
            best_epoch = epoch;
            best = model.params().clone();
        } else if (opt.patience > 0 && epoch - best_epoch >= opt.patience) {
            break;
        }
    }

    // leave the model holding the best-validation parameters
    auto main = model.params().all();
    auto best_tensors = best.all();
    for (std::size_t p = 0; p < main.size(); ++p)
        for (std::size_t i = 0; i < main[p].size(); ++i)
            main[p].set_value(i, best_tensors[p].value(i));

    result.best_epoch = best_epoch + 1;
    result.best_valid_auc_pr = best_pr;
    result.test = evaluate_on(model, cache, split.test, threads);
    return result;
}

// ---------------------------------------------------------------------------
// logistic-regression baseline
// ---------------------------------------------------------------------------

namespace {

constexpr std::int64_t kThirtyDays = 30LL * 24 * 3600;

struct LrFeatures {
    std::vector<std::vector<double>> rows;
    std::vector<std::string> names;
};

LrFeatures lr_features(const std::vector<Query>& queries, const DynamicNetwork& network,
                       const std::vector<PurchaseRecord>& purchases, const ItemCatalog& catalog,
                       const FeatureConfig& fcfg) {
    const int B = fcfg.price_bins;
    ItemBins bins(network, catalog, fcfg);

    // user purchase (timestamp, pi) lists for the 30-day spend feature
    std::vector<std::vector<std::pair<std::int64_t, int>>> spend(network.users().size());
    for (const auto& p : purchases) {
        auto u = network.users().find(p.user);
        if (!u) continue;
        spend[*u].emplace_back(p.timestamp, catalog.at(p.item).price_index);
    }
    for (auto& v : spend) std::sort(v.begin(), v.end());

    LrFeatures out;
    for (int b = 0; b < B; ++b) out.names.push_back(strfmt("item_bin_%d", b));
    out.names.push_back("spend_30d");
    out.names.push_back("in_degree");
    out.names.push_back("out_degree");
    for (int b = 0; b < B; ++b) out.names.push_back(strfmt("shared_bin_%d", b));
    for (int b = 0; b < B; ++b) out.names.push_back(strfmt("received_bin_%d", b));

    out.rows.reserve(queries.size());
    for (const auto& q : queries) {
        std::vector<double> f(out.names.size(), 0.0);
        std::size_t k = 0;
        f[k + bins.bin_of_item(q.item)] = 1.0;
        k += B;
        const std::int64_t t_end = network.grid().begin(q.step);
        double total_spend = 0.0;
        for (const auto& [ts, pi] : spend[q.user])
            if (ts >= t_end - kThirtyDays && ts < t_end) total_spend += pi;
        f[k++] = total_spend;
        // degrees and share/receive histograms over the same history window
        // the sampler uses for this query
        std::uint32_t first_step = 0;
        std::uint32_t last_step = q.step;
        if (fcfg.history_window > 0) {
            last_step = q.step - 1;
            if (last_step + 1 > static_cast<std::uint32_t>(fcfg.history_window))
                first_step = last_step + 1 - static_cast<std::uint32_t>(fcfg.history_window);
        }
        std::set<std::uint32_t> in_partners, out_partners;
        const std::size_t deg_slot = k;
        k += 2;
        for (std::uint32_t t = first_step; t <= last_step; ++t) {
            const auto& oa = network.out_adj(t);
            const auto& ia = network.in_adj(t);
            const auto& ev = network.events(t);
            for (std::uint32_t e = oa.offsets[q.user]; e < oa.offsets[q.user + 1]; ++e) {
                out_partners.insert(ev[oa.events[e]].receiver);
                f[k + bins.bin_of_item(ev[oa.events[e]].item)] += 1.0;
            }
            for (std::uint32_t e = ia.offsets[q.user]; e < ia.offsets[q.user + 1]; ++e) {
                in_partners.insert(ev[ia.events[e]].sender);
                f[k + B + bins.bin_of_item(ev[ia.events[e]].item)] += 1.0;
            }
        }
        f[deg_slot] = double(in_partners.size());
        f[deg_slot + 1] = double(out_partners.size());
        out.rows.push_back(std::move(f));
    }
    return out;
}

}  // namespace

LrResult lr_baseline(const std::vector<Query>& queries, const DynamicNetwork& network,
                     const std::vector<PurchaseRecord>& purchases, const ItemCatalog& catalog,
                     const FeatureConfig& fcfg, const Split& split, const LrOptions& opt) {
    check(!split.train.empty() && !split.valid.empty() && !split.test.empty(),
          "lr_baseline: split must have train/valid/test");
    auto feats = lr_features(queries, network, purchases, catalog, fcfg);
    const std::size_t d = feats.names.size();

    // z-score standardization fitted on the training split
    std::vector<double> mean(d, 0.0), stdev(d, 0.0);
    for (auto i : split.train)
        for (std::size_t j = 0; j < d; ++j) mean[j] += feats.rows[i][j];
    for (std::size_t j = 0; j < d; ++j) mean[j] /= double(split.train.size());
    for (auto i : split.train)
        for (std::size_t j = 0; j < d; ++j) {
            const double dv = feats.rows[i][j] - mean[j];
            stdev[j] += dv * dv;
        }
    for (std::size_t j = 0; j < d; ++j)
        stdev[j] = std::sqrt(stdev[j] / double(split.train.size()));

    auto design = [&](const std::vector<std::size_t>& ids, std::vector<double>& y) {
        auto X = Tensor<double>::zeros({ids.size(), d + 1});
        y.resize(ids.size());
        for (std::size_t r = 0; r < ids.size(); ++r) {
            for (std::size_t j = 0; j < d; ++j) {
                // zero-variance features are centered away entirely
                const double v = stdev[j] > 0.0 ? (feats.rows[ids[r]][j] - mean[j]) / stdev[j] : 0.0;
                X.set_value(r * (d + 1) + j, v);
            }
            X.set_value(r * (d + 1) + d, 1.0);  // bias column
            y[r] = double(queries[ids[r]].label);
        }
        return X;
    };

    std::vector<double> y_train, y_valid, y_test;
    auto X_train = design(split.train, y_train);
    auto X_valid = design(split.valid, y_valid);
    auto X_test = design(split.test, y_test);

    auto w = Tensor<double>::zeros({d + 1}, true);
    std::vector<Tensor<double>> params{w};
    auto state = AdamState<double>::init(std::span<const Tensor<double>>(params), opt.lr);

    auto scores_of = [&](const Tensor<double>& X) {
        Tape<double> tape;
        auto logits = matmul(tape, X, w);
        auto probs = sigmoid(tape, logits);
        return std::vector<double>(probs.values().begin(), probs.values().end());
    };
    auto valid_labels = [&]() {
        std::vector<std::uint8_t> l(split.valid.size());
        for (std::size_t i = 0; i < l.size(); ++i) l[i] = queries[split.valid[i]].label;
        return l;
    }();

    std::vector<double> best_w(w.values());
    double best_pr = -1.0;
    int rounds_since_best = 0;
    for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
        Tape<double> tape;
        auto probs = sigmoid(tape, matmul(tape, X_train, w));
        auto loss = binary_cross_entropy(tape, probs, y_train);
        w.zero_grad();
        tape.backward(loss);
        adam_step(std::span<Tensor<double>>(params), state);
        if ((epoch + 1) % 10 == 0) {
            auto vscores = scores_of(X_valid);
            const double pr = auc_pr(vscores, valid_labels);
            if (pr > best_pr) {
                best_pr = pr;
                best_w = w.values();
                rounds_since_best = 0;
            } else if (++rounds_since_best >= opt.patience) {
                break;
            }
        }
    }
    for (std::size_t i = 0; i < best_w.size(); ++i) w.set_value(i, best_w[i]);

    LrResult result;
    result.feature_names = feats.names;
    result.weights = w.values();
    auto tscores = scores_of(X_test);
    std::vector<std::uint8_t> tlabels(split.test.size()), tcold(split.test.size());
    for (std::size_t i = 0; i < split.test.size(); ++i) {
        tlabels[i] = queries[split.test[i]].label;
        tcold[i] = queries[split.test[i]].cold ? 1 : 0;
    }
    result.test = evaluate_scores(tscores, tlabels, tcold);
    return result;
}

std::vector<std::pair<std::string, ModelConfig>> table3_variants(const ModelConfig& base) {
    std::vector<std::pair<std::string, ModelConfig>> out;
    auto push = [&](const char* name, auto mutate) {
        ModelConfig cfg = base;
        mutate(cfg);
        out.emplace_back(name, cfg);
    };
    push("encoder-none", [](ModelConfig& c) { c.encoder = SeqEncoder::None; });
    push("encoder-mean", [](ModelConfig& c) { c.encoder = SeqEncoder::Mean; });
    push("encoder-gru", [](ModelConfig& c) { c.encoder = SeqEncoder::Gru; });
    push("-user-feature", [](ModelConfig& c) { c.mask_user_features = true; });
    push("-item-feature", [](ModelConfig& c) { c.mask_item_features = true; });
    push("-taocode-feature", [](ModelConfig& c) { c.mask_taocode_features = true; });
    push("-attention", [](ModelConfig& c) { c.use_edge_attention = false; });
    push("-structural", [](ModelConfig& c) { c.use_structural_block = false; });
    return out;
}

template <class Real>
std::vector<AblationRow> ablate(const ModelConfig& base,
                                const std::vector<std::pair<std::string, ModelConfig>>& variants,
                                const Sampler& sampler, SubgraphCache& cache, const Split& split,
                                const TrainOptions& opt, std::uint64_t init_seed) {
    std::vector<AblationRow> rows;
    auto run = [&](const std::string& name, const ModelConfig& cfg) {
        Rng init_rng(derive_seed(init_seed, "model-init"));
        auto params = ModelParams<Real>::init(cfg, sampler.config().node_dim(),
                                              sampler.config().price_bins, init_rng);
        InfNetModel<Real> model(cfg, std::move(params));
        AblationRow row;
        row.name = name;
        row.config = cfg;
        row.result = train_model(model, cache, split, opt);
        rows.push_back(std::move(row));
    };
    run("base", base);
    for (const auto& [name, cfg] : variants) run(name, cfg);
    return rows;
}

template TrainResult train_model<float>(InfNetModel<float>&, SubgraphCache&, const Split&,
                                        const TrainOptions&);
template TrainResult train_model<double>(InfNetModel<double>&, SubgraphCache&, const Split&,
                                         const TrainOptions&);
template std::vector<double> score_queries<float>(const InfNetModel<float>&, SubgraphCache&,
                                                  const std::vector<std::size_t>&, int);
template std::vector<double> score_queries<double>(const InfNetModel<double>&, SubgraphCache&,
                                                   const std::vector<std::size_t>&, int);
template MetricResult evaluate_on<float>(const InfNetModel<float>&, SubgraphCache&,
                                         const std::vector<std::size_t>&, int);
template MetricResult evaluate_on<double>(const InfNetModel<double>&, SubgraphCache&,
                                          const std::vector<std::size_t>&, int);
template std::vector<AblationRow> ablate<float>(
    const ModelConfig&, const std::vector<std::pair<std::string, ModelConfig>>&, const Sampler&,
    SubgraphCache&, const Split&, const TrainOptions&, std::uint64_t);
template std::vector<AblationRow> ablate<double>(
    const ModelConfig&, const std::vector<std::pair<std::string, ModelConfig>>&, const Sampler&,
    SubgraphCache&, const Split&, const TrainOptions&, std::uint64_t);

}  // namespace infnet
