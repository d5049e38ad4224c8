#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "infnet/metrics.hpp"
#include "infnet/model.hpp"
#include "infnet/sampler.hpp"

namespace infnet {

// Time-respecting split: queries carry their grid step as a day tag. All
// queries of the final step are the test set; earlier steps are shuffled into
// train/validation with the given fraction.
struct Split {
    std::vector<std::size_t> train, valid, test;
};

Split split_queries(const std::vector<Query>& queries, double train_fraction, std::uint64_t seed);

// label permutation across the whole query list (null-control experiments)
std::vector<Query> shuffle_labels(const std::vector<Query>& queries, std::uint64_t seed);

// Subgraphs sampled once per query id and reused across epochs and ablation
// variants; thread-safe after prefetch.
class SubgraphCache {
public:
    SubgraphCache(const Sampler& sampler, const std::vector<Query>& queries);

    void prefetch(int threads);
    const QuerySubgraph& get(std::size_t query_id);
    const std::vector<Query>& queries() const { return queries_; }
    // override labels (the subgraphs themselves are label-independent)
    void set_labels(const std::vector<Query>& queries);

private:
    const Sampler* sampler_;
    std::vector<Query> queries_;
    std::vector<std::unique_ptr<QuerySubgraph>> cache_;
};

struct TrainOptions {
    double lr = 0.001;
    int batch_size = 512;
    int max_epochs = 30;
    int patience = 5;
    int threads = 0;  // 0 = hardware concurrency
    std::uint64_t seed = 1;
    bool verbose = false;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double valid_auc_roc = 0.0;
    double valid_auc_pr = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    int best_epoch = 0;
    double best_valid_auc_pr = 0.0;
    MetricResult test;
};

// Adam training with early stopping on validation AUC-PR; the model is left
// holding the best-validation parameters.
template <class Real>
TrainResult train_model(InfNetModel<Real>& model, SubgraphCache& cache, const Split& split,
                        const TrainOptions& opt);

// parallel scoring with a frozen parameter copy
template <class Real>
std::vector<double> score_queries(const InfNetModel<Real>& model, SubgraphCache& cache,
                                  const std::vector<std::size_t>& ids, int threads);

template <class Real>
MetricResult evaluate_on(const InfNetModel<Real>& model, SubgraphCache& cache,
                         const std::vector<std::size_t>& ids, int threads);

// Logistic-regression baseline over engineered features: item price bin, user
// 30-day spend, user in/out degree, per-bin counts of items shared/received.
struct LrOptions {
    double lr = 0.05;
    int max_epochs = 400;
    int patience = 10;     // measured in evaluation rounds (every 10 epochs)
    std::uint64_t seed = 1;
};

struct LrResult {
    MetricResult test;
    std::vector<double> weights;  // standardized-feature weights, bias last
    std::vector<std::string> feature_names;
};

LrResult lr_baseline(const std::vector<Query>& queries, const DynamicNetwork& network,
                     const std::vector<PurchaseRecord>& purchases, const ItemCatalog& catalog,
                     const FeatureConfig& fcfg, const Split& split, const LrOptions& opt);

// one train+eval per named config variant, same split and seed
struct AblationRow {
    std::string name;
    ModelConfig config;
    TrainResult result;
};

std::vector<std::pair<std::string, ModelConfig>> table3_variants(const ModelConfig& base);

template <class Real>
std::vector<AblationRow> ablate(const ModelConfig& base,
                                const std::vector<std::pair<std::string, ModelConfig>>& variants,
                                const Sampler& sampler, SubgraphCache& cache, const Split& split,
                                const TrainOptions& opt, std::uint64_t init_seed);

extern template TrainResult train_model<float>(InfNetModel<float>&, SubgraphCache&, const Split&,
                                               const TrainOptions&);
extern template TrainResult train_model<double>(InfNetModel<double>&, SubgraphCache&,
                                                const Split&, const TrainOptions&);
extern template std::vector<double> score_queries<float>(const InfNetModel<float>&,
                                                         SubgraphCache&,
                                                         const std::vector<std::size_t>&, int);
extern template std::vector<double> score_queries<double>(const InfNetModel<double>&,
                                                          SubgraphCache&,
                                                          const std::vector<std::size_t>&, int);
extern template MetricResult evaluate_on<float>(const InfNetModel<float>&, SubgraphCache&,
                                                const std::vector<std::size_t>&, int);
extern template MetricResult evaluate_on<double>(const InfNetModel<double>&, SubgraphCache&,
                                                 const std::vector<std::size_t>&, int);
extern template std::vector<AblationRow> ablate<float>(
    const ModelConfig&, const std::vector<std::pair<std::string, ModelConfig>>&, const Sampler&,
    SubgraphCache&, const Split&, const TrainOptions&, std::uint64_t);
extern template std::vector<AblationRow> ablate<double>(
    const ModelConfig&, const std::vector<std::pair<std::string, ModelConfig>>&, const Sampler&,
    SubgraphCache&, const Split&, const TrainOptions&, std::uint64_t);

}  // namespace infnet
